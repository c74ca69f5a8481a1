"""Experiment-level behavior at desk scale; the acceptance module runs the
full-size versions."""

import numpy as np
import pytest

from sigmapaths import oracles
from sigmapaths.decompose import class_d_from_batches
from sigmapaths.experiments import (
    EXPERIMENTS,
    LEMMA_ACCEPTANCE_SPECS,
    azema_conditional_experiment,
    honest_time,
    lemma_balance_experiment,
    saturation_probe,
    tail_experiment,
    two_infinity_check,
)
from sigmapaths.generators import GeneratorSpec
from sigmapaths.grids import Path, make_grid
from sigmapaths.reports import reports_equal_ignoring_meta


def _grid(h, n):
    return make_grid(float(h), n)


# -- honest_time ---------------------------------------------------------------


def test_honest_time_last_zero():
    p = Path(_grid(1, 3), [0.0, 1.0, 0.0, 2.0])
    assert honest_time(p, lambda v: v == 0.0) == 2


def test_honest_time_never():
    p = Path(_grid(1, 3), [0.0, 1.0, 0.0, 2.0])
    assert honest_time(p, lambda v: v > 5.0) is None


def test_honest_time_decreasing_path_running_min():
    vals = np.array([3.0, 2.0, 1.0, 0.5])
    p = Path(_grid(1, 3), vals)
    mins = np.minimum.accumulate(vals)
    hits = {j: vals[j] == mins[j] for j in range(4)}
    assert all(hits.values())
    assert honest_time(p, lambda v: True) == 3


def test_honest_time_respects_horizon_index():
    p = Path(_grid(1, 4), [0.0, 0.0, 1.0, 0.0, 0.0])
    assert honest_time(p, lambda v: v == 0.0, horizon_index=2) == 1


# -- lemma balance ---------------------------------------------------------------


def test_lemma_balance_constant_surrogate_exact():
    # a constant positive "martingale" keeps C at 1: both sides are exactly 1
    g = _grid(1, 16)
    rep = class_d_from_batches([np.ones((64, 17))], g)
    assert rep.e_mc.mean == 1.0
    assert rep.e_int.mean == 1.0


def test_lemma_balance_shipped_specs_small():
    for label, cfg in LEMMA_ACCEPTANCE_SPECS:
        spec = GeneratorSpec.from_config(dict(cfg))
        small = GeneratorSpec(spec.family, dict(spec.params),
                              make_grid(spec.grid.horizon, 512))
        rep = lemma_balance_experiment(small, 4000, 314)
        assert rep.abs_diff <= 4.0 * rep.combined_stderr, label
        assert not rep.degenerate


def test_lemma_balance_detects_strict_local_martingale():
    # the normalized Bessel(3) scale factor from x0=1 is a strict local
    # martingale: the balance identity must fail by many standard errors
    spec = GeneratorSpec("bessel3", {"x0": 1.0}, _grid(1, 512))
    rep = lemma_balance_experiment(spec, 8000, 271)
    assert rep.e_mc.mean < rep.e_int.mean
    assert rep.abs_diff > 10.0 * rep.combined_stderr
    assert not rep.ci_agreement


def test_lemma_balance_rejects_non_martingale_family():
    spec = GeneratorSpec("brownian", {}, _grid(1, 64))
    with pytest.raises(ValueError, match="martingale"):
        lemma_balance_experiment(spec, 100, 1)


def test_lemma_report_envelope_shape():
    spec = GeneratorSpec("exp_martingale", {}, _grid(1, 64))
    env = lemma_balance_experiment(spec, 500, 2).as_report()
    assert env["schema"] == 1
    assert env["experiment"] == "lemma-balance"
    assert {"spec", "seed", "n_paths", "horizon", "censoring_rate", "results"} <= set(env)


# -- azema conditional law --------------------------------------------------------


def test_azema_formula_branches_with_explicit_bins():
    spec = GeneratorSpec("bessel3", {"x0": 1.0}, _grid(8, 1024))
    tab = azema_conditional_experiment(
        spec, level=1.0, t=1.0, bins=[0.25, 0.75, 1.75, 2.25, 4.0],
        n_paths=3000, master_seed=5,
    )
    by_center = dict(zip(tab.bin_centers, tab.formula))
    assert by_center[0.5] == 1.0  # capped branch below the level
    assert by_center[2.0] == 0.5  # min(y/z, 1) at z = 2
    assert tab.censoring_rate <= 1.0


def test_azema_bessel_unbiased_at_moderate_size():
    spec = GeneratorSpec("bessel3", {"x0": 1.0}, _grid(16, 8192))
    tab = azema_conditional_experiment(spec, 1.0, 1.0, 10, 8000, 21)
    for est, f in zip(tab.empirical, tab.formula):
        assert abs(est.mean - f) <= max(0.05, 4.0 * est.stderr)
    assert tab.tail_correction_mass < 0.25


def test_azema_exp_martingale_variant():
    spec = GeneratorSpec("exp_martingale", {}, _grid(24, 8192))
    # narrow bins below the level, one wide capped bin above; the formula is
    # linear/constant inside each, so center evaluation is faithful (a bin
    # straddling the kink at the level would not be)
    edges = [0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 5.0]
    tab = azema_conditional_experiment(spec, level=0.5, t=1.0, bins=edges,
                                       n_paths=4000, master_seed=31)
    for (lo, hi), c, est, f in zip(
        zip(tab.bin_edges, tab.bin_edges[1:]), tab.bin_centers, tab.empirical, tab.formula
    ):
        assert f == oracles.exp_martingale_level_hit_probability(c, 0.5)
        if lo >= 0.5 or hi <= 0.5:  # skip the kink-straddling bin
            assert abs(est.mean - f) <= max(0.08, 4.0 * est.stderr), (lo, hi)


def test_azema_table_monotone_above_level():
    spec = GeneratorSpec("bessel3", {"x0": 1.0}, _grid(16, 8192))
    tab = azema_conditional_experiment(spec, 1.0, 1.0, 12, 8000, 43)
    above = [(c, e, f) for c, e, f in zip(tab.bin_centers, tab.empirical, tab.formula)
             if c > 1.0]
    formulas = [f for _, _, f in above]
    assert all(b <= a for a, b in zip(formulas, formulas[1:]))  # exactly nonincreasing
    for (c1, e1, _), (c2, e2, _) in zip(above, above[1:]):
        slack = 3.0 * (e1.stderr + e2.stderr)
        assert e2.mean <= e1.mean + slack, (c1, c2)


def test_tail_report_validates_survival_monotonicity():
    from sigmapaths.experiments import TailReport
    from sigmapaths.grids import McEstimate

    up = (McEstimate(0.3, 0.01, 100), McEstimate(0.5, 0.01, 100))
    with pytest.raises(ValueError, match="nonincreasing"):
        TailReport(kind="T_a_heavy_tail", levels=(1.0, 2.0), empirical_survival=up,
                   reference=(0.4, 0.3), extras={}, censoring_rate=0.0, n_paths=100,
                   horizon=4.0, dt=0.01, seed=1)


def test_azema_rejects_bad_setup():
    spec = GeneratorSpec("bessel3", {"x0": 1.0}, _grid(8, 256))
    with pytest.raises(ValueError, match="horizon"):
        azema_conditional_experiment(spec, 1.0, 9.0, 4, 100, 1)
    with pytest.raises(ValueError, match="positive"):
        azema_conditional_experiment(spec, -1.0, 1.0, 4, 100, 1)
    brown = GeneratorSpec("brownian", {}, _grid(8, 256))
    with pytest.raises(ValueError, match="supports"):
        azema_conditional_experiment(brown, 1.0, 1.0, 4, 100, 1)


# -- two infinity ------------------------------------------------------------------


def test_two_infinity_single_path_algebra():
    # with A carried exactly by the zeros of X, the terminal gap is
    # e^{-A_T} * |X_T - 1| on the nose
    g = _grid(1, 4)
    X = Path(g, [0.0, 0.3, 0.0, 0.6, 1.0 - 0.125])
    A = Path(g, [0.0, 0.0, 0.4, 0.4, 0.4])
    from sigmapaths.decompose import sigma_martingale

    M = sigma_martingale(X, A)
    I = np.minimum.accumulate(M.values)
    gap = abs(M.values[-1] - 2.0 * I[-1])
    assert gap == pytest.approx(np.exp(-0.4) * 0.125, abs=1e-15)


def test_two_infinity_negative_control_constant():
    # X == 0 (a last visit that never happens) keeps the gap pinned at 1
    g = _grid(1, 8)
    from sigmapaths.decompose import sigma_martingale

    zero = Path(g, np.zeros(9))
    M = sigma_martingale(zero, zero)
    assert np.all(np.abs(M.values - 2.0 * np.minimum.accumulate(M.values)) == 1.0)


def test_two_infinity_trend_small():
    spec = GeneratorSpec("bessel3", {"x0": 1.0}, _grid(16, 4096))
    rep = two_infinity_check(spec, [2, 4, 8, 16], 400, 77)
    assert rep.nonincreasing
    assert rep.median_gap[-1] < rep.median_gap[0]
    assert rep.x_range_violation <= 1e-9


def test_two_infinity_requires_matching_horizon():
    spec = GeneratorSpec("bessel3", {"x0": 1.0}, _grid(16, 1024))
    with pytest.raises(ValueError, match="horizon"):
        two_infinity_check(spec, [2, 4, 8], 100, 1)


# -- saturation probe ---------------------------------------------------------------


def test_saturation_survival_matches_ruin_probabilities():
    rep = saturation_probe("nonsaturated_zero_set", 8000, 99, horizon=64.0, dt=2e-3)
    assert rep.n_censored == 0
    for a, est, ref in zip(rep.levels, rep.empirical_survival, rep.reference):
        allowance = 0.1 * np.sqrt(rep.dt)  # grid overshoot, second order here
        assert abs(est.mean - ref) <= 3.5 * est.stderr + allowance, f"level {a}"
    # |B_L| > 0 in continuous time; at grid resolution a small fraction of
    # paths reach level 1 without ever printing a negative grid value
    samples = np.asarray(rep.samples)
    assert np.all(samples >= 0)
    assert np.mean(samples == 0.0) < 0.05
    assert samples.mean() > 0.5


def test_saturation_membership_is_exact():
    rep = saturation_probe("saturated_level_set", 2000, 98, horizon=64.0, dt=2e-3)
    assert rep.membership_rate == 1.0
    assert rep.n_uncensored + rep.n_censored == 2000


def test_saturation_rejects_unknown_kind():
    with pytest.raises(ValueError, match="kind"):
        saturation_probe("mystery", 10, 1)


# -- tails ------------------------------------------------------------------------


def test_tail_t_a_survival_and_slope():
    rep = tail_experiment("T_a_heavy_tail", 8000, 55, a=1.0, horizon=64.0, dt=1e-3)
    for t, est, ref in zip(rep.levels, rep.empirical_survival, rep.reference):
        tol = 3.0 * est.stderr + oracles.overshoot_allowance(1.0, t, rep.dt)
        assert abs(est.mean - ref) <= tol, f"t={t}"
    assert -0.6 <= rep.extras["loglog_slope"] <= -0.4


def test_tail_sigma_b_reports_not_asserts():
    rep = tail_experiment("sigma_b_expectation", 4000, 56, b=1.0, horizon=16.0, dt=1e-3)
    w = rep.extras["wealth_estimate"]
    assert rep.extras["wealth_reference_laplace"] == pytest.approx(1.0)
    assert rep.extras["side_of_one"] in ("below", "above")
    assert w["stderr"] > 0
    assert rep.censoring_rate <= 0.001


def test_tail_sigma_b_censoring_vanishes_with_horizon():
    rates = []
    for horizon in (2.0, 4.0, 8.0):
        rep = tail_experiment("sigma_b_expectation", 3000, 57, b=1.0,
                              horizon=horizon, dt=2e-3)
        rates.append(rep.censoring_rate)
    assert rates[0] >= rates[1] >= rates[2]
    assert rates[2] < rates[0]


# -- registry and determinism --------------------------------------------------------


def test_registry_names_and_runners():
    assert set(EXPERIMENTS) == {"lemma-balance", "azema-law", "two-infinity",
                                "saturation", "tail"}
    for defn in EXPERIMENTS.values():
        assert defn.summary
        assert callable(defn.runner)


def test_experiment_rerun_is_byte_identical():
    spec = GeneratorSpec("exp_martingale", {}, _grid(1, 128))
    a = lemma_balance_experiment(spec, 1000, 7).as_report()
    b = lemma_balance_experiment(spec, 1000, 7).as_report()
    assert reports_equal_ignoring_meta(a, b)


def test_worker_count_does_not_change_numbers():
    spec = GeneratorSpec("exp_martingale", {}, _grid(1, 128))
    one = lemma_balance_experiment(spec, 2000, 11, workers=1).as_report()
    two = lemma_balance_experiment(spec, 2000, 11, workers=2).as_report()
    assert reports_equal_ignoring_meta(one, two)

    t1 = tail_experiment("T_a_heavy_tail", 2000, 12, horizon=8.0, dt=2e-3, workers=1)
    t2 = tail_experiment("T_a_heavy_tail", 2000, 12, horizon=8.0, dt=2e-3, workers=2)
    assert reports_equal_ignoring_meta(t1.as_report(), t2.as_report())
