"""Process family generators against their closed-form oracles."""

import numpy as np
import pytest

from sigmapaths import oracles
from sigmapaths.generators import (
    FAMILIES,
    GeneratorSpec,
    bessel3_rows,
    brownian_rows,
    gen_bessel3,
    gen_brownian,
    gen_exp_martingale,
    gen_stopped_hitting,
    generate_rows,
    make_ensemble,
    scale_martingale,
)
from sigmapaths.grids import Path, make_grid
from sigmapaths.streams import StreamKey


def test_brownian_zero_stream_is_identically_zero():
    g = make_grid(1.0, 8)
    p = gen_brownian(g, increments=np.zeros(8))
    assert np.all(p.values == 0.0)


def test_brownian_starts_at_zero_exactly():
    g = make_grid(2.0, 64)
    p = gen_brownian(g, StreamKey(5, 0, 0))
    assert p.values[0] == 0.0


def test_brownian_terminal_moments():
    g = make_grid(1.0, 16)
    B = brownian_rows(g, master_seed=101, first_index=0, rows=100_000)
    end = B[:, -1]
    n = end.size
    se_mean = end.std(ddof=1) / np.sqrt(n)
    assert abs(end.mean()) <= 3 * se_mean
    # variance of the sample variance of a Gaussian: 2 sigma^4 / n
    se_var = np.sqrt(2.0 / n) * 1.0
    assert abs(end.var(ddof=1) - 1.0) <= 3 * se_var


def test_stopped_hitting_on_deterministic_ramp():
    g = make_grid(1.0, 4)
    ramp = gen_brownian(g, increments=np.full(4, 0.25))  # b_t = t
    sp = gen_stopped_hitting(ramp, "level", a=0.5)
    assert sp.stop_index == 2
    assert np.array_equal(sp.values, [0.0, 0.25, 0.5, 0.5, 0.5])


def test_stopped_hitting_never_triggers():
    g = make_grid(1.0, 4)
    ramp = gen_brownian(g, increments=np.full(4, 0.1))
    sp = gen_stopped_hitting(ramp, "level", a=5.0)
    assert sp.stop_index is None
    assert np.array_equal(sp.values, ramp.values)


def test_stopped_hitting_line_rule():
    g = make_grid(1.0, 4)
    flat = gen_brownian(g, increments=np.zeros(4))
    sp = gen_stopped_hitting(flat, "line", b=2.0)  # 0 + 2t >= 1 at t = 0.5
    assert sp.stop_index == 2
    assert "line" not in sp.rule or "1" in sp.rule


def test_exp_martingale_degenerate_stream():
    g = make_grid(1.0, 4)
    p = gen_exp_martingale(g, increments=np.zeros(4))
    assert np.allclose(p.values, np.exp(-g.times / 2.0))
    assert "degenerate" in p.label


def test_exp_martingale_unit_mean():
    # the discrete exponential walk has exactly unit conditional mean, so the
    # sample mean converges with no discretization bias
    g = make_grid(1.0, 16)
    spec = GeneratorSpec("exp_martingale", {}, g)
    M = generate_rows(spec, 404, 0, 100_000)
    end = M[:, -1]
    se = end.std(ddof=1) / np.sqrt(end.size)
    assert abs(end.mean() - 1.0) <= 3 * se
    assert np.all(M > 0)
    assert np.all(M[:, 0] == 1.0)


def test_exp_martingale_stopped_is_bounded():
    g = make_grid(4.0, 1024)
    key = StreamKey(17, 4, 0)
    p = gen_exp_martingale(g, key, stop=("level", 1.0))
    B = gen_brownian(g, key)
    max_inc = np.max(np.abs(np.diff(B.values)))
    assert np.max(p.values) <= np.exp(1.0 + max_inc)


def test_bessel3_zero_stream_is_constant():
    g = make_grid(1.0, 8)
    p = gen_bessel3(g, x0=1.5, increments=np.zeros((3, 8)))
    assert np.all(p.values == 1.5)


def test_bessel3_stays_positive():
    g = make_grid(1.0, 2048)
    for i in range(20):
        p = gen_bessel3(g, 1.0, StreamKey(23, i, 0))
        assert np.min(p.values) > 0.0


def test_bessel3_inverse_moment_oracle():
    # 1/R is a strict local martingale: its mean at T is (2*Phi(x0/sqrt(T))-1)/x0,
    # not 1/x0; the closed form is the oracle here
    g = make_grid(1.0, 512)
    R = bessel3_rows(g, 1.0, master_seed=606, first_index=0, rows=100_000)
    inv = 1.0 / R[:, -1]
    se = inv.std(ddof=1) / np.sqrt(inv.size)
    ref = oracles.bessel3_inverse_moment(1.0, 1.0)
    assert abs(inv.mean() - ref) <= 3 * se
    assert abs(ref - 1.0) > 30 * se  # the naive martingale-mean guess is far away


def test_scale_martingale_constant_path():
    g = make_grid(1.0, 3)
    R = Path(g, [2.0, 2.0, 2.0, 2.0])
    N = scale_martingale(R, "normalized")
    assert np.all(N.values == 1.0)


def test_scale_martingale_neg_inverse_values():
    g = make_grid(1.0, 2)
    R = Path(g, [1.0, 2.0, 4.0])
    M = scale_martingale(R, "neg_inverse")
    assert np.array_equal(M.values, [1.0, 0.5, 0.25])


def test_scale_martingale_rejects_nonpositive():
    g = make_grid(1.0, 2)
    with pytest.raises(ValueError, match="positive"):
        scale_martingale(Path(g, [1.0, 0.0, 1.0]), "neg_inverse")


def test_normalized_scale_mean_matches_oracle():
    g = make_grid(1.0, 512)
    spec = GeneratorSpec("scale_martingale", {"x0": 1.0}, g)
    N = generate_rows(spec, 707, 0, 100_000)
    end = N[:, -1]
    se = end.std(ddof=1) / np.sqrt(end.size)
    ref = 1.0 * oracles.bessel3_inverse_moment(1.0, 1.0)
    assert abs(end.mean() - ref) <= 3 * se
    assert np.all(N[:, 0] == 1.0)


def test_bessel3_transience_proxy():
    g = make_grid(1.0, 1024)
    R = bessel3_rows(g, 1.0, master_seed=808, first_index=0, rows=5000)
    mins = R.min(axis=1)
    probs = [(mins < eps).mean() for eps in (0.1, 0.05, 0.01)]
    assert probs[0] >= probs[1] >= probs[2]
    assert probs[2] < probs[0]


def test_generator_spec_validation():
    g = make_grid(1.0, 4)
    with pytest.raises(ValueError, match="unknown family"):
        GeneratorSpec("levy", {}, g)
    with pytest.raises(ValueError, match="requires"):
        GeneratorSpec("bessel3", {}, g)
    with pytest.raises(ValueError, match="positive"):
        GeneratorSpec("bessel3", {"x0": -1.0}, g)
    with pytest.raises(ValueError, match="accept"):
        GeneratorSpec("brownian", {"a": 1.0}, g)
    with pytest.raises(ValueError, match="at most one"):
        GeneratorSpec("exp_martingale", {"stop_level": 1.0, "stop_line_drift": 1.0}, g)


def test_generator_spec_config_roundtrip():
    g = make_grid(4.0, 128)
    for family in sorted(FAMILIES):
        params = {}
        if family in ("bessel3", "scale_martingale"):
            params["x0"] = 2.0
        if family == "brownian_stopped_level":
            params["a"] = 1.5
        if family == "brownian_drift_stopped_line":
            params["b"] = 0.5
        spec = GeneratorSpec(family, params, g)
        back = GeneratorSpec.from_config(spec.to_config())
        assert back.family == spec.family
        assert back.params == spec.params
        assert np.array_equal(back.grid.times, g.times)


def test_generate_rows_batch_split_invariance():
    g = make_grid(1.0, 64)
    spec = GeneratorSpec("bessel3", {"x0": 1.0}, g)
    full = generate_rows(spec, 99, 0, 10)
    split = np.vstack([generate_rows(spec, 99, 0, 4), generate_rows(spec, 99, 4, 6)])
    assert np.array_equal(full, split)


def test_make_ensemble_distinct_paths_and_seeds():
    g = make_grid(1.0, 16)
    ens = make_ensemble(GeneratorSpec("brownian", {}, g), 5, 12)
    assert len(ens) == 5
    assert len({s.path_index for s in ens.seeds}) == 5
    vals = np.vstack([p.values for p in ens.paths])
    assert np.unique(vals[:, -1]).size == 5
