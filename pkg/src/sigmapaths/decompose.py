"""Multiplicative decomposition of nonnegative submartingales.

A nonnegative source path ``Y`` with ``Y_0 = 0`` factors as ``Y = M*C - 1``
with ``M`` positive (``M_0 = 1``) and ``C`` nondecreasing (``C_0 = 1``).
Given the increasing part ``ell`` of the additive decomposition of ``Y``,
the factors are explicit:

    C = exp( integral of d(ell) / (1 + Y) ),    M = (Y + 1) / C,

and equivalently ``M = exp( int dm/(1+Y) - (1/2) int d<m>/(1+Y)^2 )`` for the
martingale part ``m = Y - ell``.  When the increasing part grows only on the
zero set of the process (a zero-carried, "reflected" submartingale), the
factorization specializes to ``X = M/I - 1`` with ``I`` the running minimum
of ``M``, ``C = 1/I`` and ``A = log(1/I)``; these are the smallest members of
the family sharing a given ``M``.

Grid conventions: the d(ell) integrand uses the left-point value of ``Y``
(a midpoint rule is available as an option); stochastic integrals are always
left-point Ito sums.  The discrete Stieltjes sum for ``int M dC`` evaluates
``M`` at the right endpoint, i.e. at the time the jump of the discrete ``C``
occurs -- this is the grid transcription of the optional projection and makes
the balance identity ``E[M_T C_T] = 1 + E[sum M dC]`` exact in expectation
for discretely sampled martingales.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .calculus import ito_sum, running_min
from .grids import Ensemble, McEstimate, Path, TimeGrid

__all__ = [
    "MultDecomp",
    "SigmaTriple",
    "CarriedVerdict",
    "ClassDReport",
    "CARRIED_SCORE_THRESHOLD",
    "default_zero_threshold",
    "mult_compose",
    "mult_decompose",
    "mult_decompose_exp",
    "sigma_compose",
    "sigma_martingale",
    "carried_by_zeros",
    "minimality_gap",
    "class_d_diagnostics",
]

#: Acceptance threshold for the zero-carried score.
CARRIED_SCORE_THRESHOLD = 0.05

_ADDITIVITY_TOL = 1e-10
_NEG_FLOOR = -1e-12


def default_zero_threshold(grid: TimeGrid) -> float:
    """Default band for "the process is at zero": ``2 * sqrt(dt)``."""
    return 2.0 * float(np.sqrt(grid.dt))


def _first_bad(mask: np.ndarray) -> int:
    return int(np.argmax(mask))


# ---------------------------------------------------------------------------
# containers


@dataclass(frozen=True, eq=False)
class MultDecomp:
    """Factorization ``Y = M*C - 1`` of a nonnegative source path."""

    martingale_part: Path
    increasing_part: Path
    source: Path

    def __post_init__(self):
        M, C, Y = self.martingale_part.values, self.increasing_part.values, self.source.values
        if np.any(M <= 0):
            raise ValueError(f"M must be positive; first violation at index {_first_bad(M <= 0)}")
        if M[0] != 1.0:
            raise ValueError("M_0 must equal 1")
        if C[0] != 1.0 or np.any(np.diff(C) < 0):
            raise ValueError("C must be nondecreasing with C_0 = 1")
        resid = np.abs(M * C - (Y + 1.0))
        scale = np.maximum(np.abs(Y) + 1.0, 1.0)
        if np.any(resid > _ADDITIVITY_TOL * scale):
            raise ValueError("M*C does not reproduce Y + 1 within tolerance")


@dataclass(frozen=True, eq=False)
class SigmaTriple:
    """Additive split ``X = N + A`` of a nonnegative path whose increasing
    part is meant to grow only on the zero set of ``X``.

    Construction checks the cheap exact invariants (signs, initial values,
    exact additivity).  Whether ``A`` really is carried by the zeros of ``X``
    is a statistical statement on a grid; score it with
    :func:`carried_by_zeros` against ``zero_threshold``.
    """

    submartingale: Path
    martingale_part: Path
    increasing_part: Path
    zero_threshold: float

    def __post_init__(self):
        X, N, A = self.submartingale.values, self.martingale_part.values, self.increasing_part.values
        if not self.zero_threshold > 0:
            raise ValueError("zero_threshold must be positive")
        if np.any(X < _NEG_FLOOR):
            raise ValueError(f"X must be nonnegative; first violation at {_first_bad(X < _NEG_FLOOR)}")
        if X[0] != 0.0 or N[0] != 0.0 or A[0] != 0.0:
            raise ValueError("X, N, A must all start at 0")
        if np.any(np.diff(A) < 0):
            raise ValueError("A must be nondecreasing")
        if np.any(np.abs(X - (N + A)) > _ADDITIVITY_TOL * np.maximum(np.abs(X), 1.0)):
            raise ValueError("X = N + A violated beyond tolerance")

    def carried_verdict(self, epsilon: float | None = None) -> "CarriedVerdict":
        eps = self.zero_threshold if epsilon is None else epsilon
        return carried_by_zeros(self.submartingale, self.increasing_part, eps)


@dataclass(frozen=True)
class CarriedVerdict:
    """Fraction of A-increase falling where X is away from zero."""

    score: float
    carried: bool
    epsilon: float
    threshold: float


@dataclass(frozen=True)
class ClassDReport:
    """Horizon-truncated integrability diagnostics for an ensemble of
    positive martingale paths ``M`` with ``C = 1/I``.

    The four estimates are finite-horizon stand-ins for the limit quantities
    in the equivalences "Y of class (D)" <=> "E[M C] finite" <=> "E[int M dC]
    finite", and for the L^2 criterion through ``U = int dM/M``.  Uniform
    integrability itself is not testable from finitely many sampled paths;
    ``e_mean_drift`` (E[M_T] - 1) and ``tail_mass`` (P(M_T > tail_level)) are
    reported as labeled proxies only.
    """

    horizon: float
    n_paths: int
    e_mc: McEstimate
    e_int: McEstimate
    e_log_inv_i: McEstimate
    e_qv_u: McEstimate
    pathwise_log_identity_median_err: float
    pathwise_inf_identity_median_err: float
    e_int_left: McEstimate
    e_mean_drift: float
    tail_level: float
    tail_mass: float

    def as_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "n_paths": self.n_paths,
            "e_mc": self.e_mc.as_dict(),
            "e_int": self.e_int.as_dict(),
            "e_log_inv_i": self.e_log_inv_i.as_dict(),
            "e_qv_u": self.e_qv_u.as_dict(),
            "pathwise_log_identity_median_err": self.pathwise_log_identity_median_err,
            "pathwise_inf_identity_median_err": self.pathwise_inf_identity_median_err,
            "e_int_left": self.e_int_left.as_dict(),
            "ui_proxies": {
                "e_mean_drift": self.e_mean_drift,
                "tail_level": self.tail_level,
                "tail_mass": self.tail_mass,
            },
        }


# ---------------------------------------------------------------------------
# operations


def mult_compose(M: Path, C: Path) -> Path:
    """Source path ``Y = M*C - 1`` from an admissible factor pair."""
    _check_factor_pair(M.values, C.values)
    # M*C >= 1 was checked to 1e-12; clamp the sub-ulp negatives so the
    # nonnegativity post-condition holds exactly.
    Y = np.maximum(M.values * C.values - 1.0, 0.0)
    return M.with_values(Y, label=f"compose({M.label},{C.label})")


def _check_factor_pair(M: np.ndarray, C: np.ndarray) -> None:
    if np.any(M <= 0):
        raise ValueError(f"M must be positive; first violation at index {_first_bad(M <= 0)}")
    if M[0] != 1.0:
        raise ValueError("M_0 must equal 1")
    if C[0] != 1.0:
        raise ValueError("C_0 must equal 1")
    dec = np.diff(C) < 0
    if np.any(dec):
        raise ValueError(f"C must be nondecreasing; first decrease at index {_first_bad(dec) + 1}")
    below = M * C < 1.0 - 1e-12
    if np.any(below):
        raise ValueError(f"M*C must stay >= 1; first violation at index {_first_bad(below)}")


def mult_decompose(Y: Path, ell: Path, integrand_rule: str = "left") -> MultDecomp:
    """Recover the factor pair of ``Y`` from its increasing part ``ell``.

    ``C_j = exp( sum_{i<j} d(ell)_i / (1 + Y_i) )`` with the left-point value
    of ``Y`` (default), or the midpoint average with
    ``integrand_rule='midpoint'``; then ``M = (Y + 1) / C``.
    """
    if Y.grid is not ell.grid and not np.array_equal(Y.grid.times, ell.grid.times):
        raise ValueError("Y and ell live on different grids")
    y = Y.values
    if np.any(y < _NEG_FLOOR):
        raise ValueError(f"Y must be nonnegative; first violation at index {_first_bad(y < _NEG_FLOOR)}")
    if y[0] != 0.0:
        raise ValueError("Y_0 must equal 0")
    dl = np.diff(ell.values)
    if ell.values[0] != 0.0 or np.any(dl < 0):
        raise ValueError("ell must be nondecreasing with ell_0 = 0")
    if integrand_rule == "left":
        w = 1.0 / (1.0 + y[:-1])
    elif integrand_rule == "midpoint":
        w = 0.5 * (1.0 / (1.0 + y[:-1]) + 1.0 / (1.0 + y[1:]))
    else:
        raise ValueError(f"integrand_rule must be 'left' or 'midpoint', got {integrand_rule!r}")
    log_c = np.concatenate([[0.0], np.cumsum(dl * w)])
    C = np.exp(log_c)
    M = (y + 1.0) / C
    return MultDecomp(
        martingale_part=Y.with_values(M, label=f"M({Y.label})"),
        increasing_part=Y.with_values(C, label=f"C({Y.label})"),
        source=Y,
    )


def mult_decompose_exp(m: Path, Y: Path) -> Path:
    """Martingale factor via the exponential formula.

    ``M = exp( int dm/(1+Y) - (1/2) int d<m>/(1+Y)^2 )`` with left-point
    sums; agrees with the ``(Y+1)/C`` form under grid refinement.
    """
    if m.grid is not Y.grid and not np.array_equal(m.grid.times, Y.grid.times):
        raise ValueError("m and Y live on different grids")
    if m.values[0] != 0.0:
        raise ValueError("m_0 must equal 0")
    w = 1.0 / (1.0 + Y.values)
    drift_arg = ito_sum(w, m.values)
    dm = np.diff(m.values)
    qv_part = np.concatenate([[0.0], np.cumsum(dm * dm * w[:-1] * w[:-1])])
    return Y.with_values(np.exp(drift_arg - 0.5 * qv_part), label=f"M_exp({Y.label})")


def sigma_compose(M: Path) -> SigmaTriple:
    """Zero-carried triple generated by a positive martingale path.

    ``X = M/I - 1`` with ``I`` the running minimum, ``A = log(1/I)``,
    ``N = X - A`` (so additivity is exact; the stochastic-integral form of
    ``N`` is a consistency diagnostic, not the stored value).
    """
    v = M.values
    if np.any(v <= 0):
        raise ValueError(f"M must be positive; first violation at index {_first_bad(v <= 0)}")
    if v[0] != 1.0:
        raise ValueError("M_0 must equal 1")
    I = running_min(v)
    X = v / I - 1.0
    A = -np.log(I)
    A = np.maximum.accumulate(np.maximum(A, 0.0))  # exact-zero start, monotone under rounding
    N = X - A
    return SigmaTriple(
        submartingale=M.with_values(X, label=f"X({M.label})"),
        martingale_part=M.with_values(N, label=f"N({M.label})"),
        increasing_part=M.with_values(A, label=f"A({M.label})"),
        zero_threshold=default_zero_threshold(M.grid),
    )


def sigma_martingale(X: Path, A: Path) -> Path:
    """Positive martingale factor ``M = (1 + X) * exp(-A)`` of a triple."""
    x, a = X.values, A.values
    if np.any(x < _NEG_FLOOR):
        raise ValueError(f"X must be nonnegative; first violation at index {_first_bad(x < _NEG_FLOOR)}")
    if x[0] != 0.0:
        raise ValueError("X_0 must equal 0")
    if a[0] != 0.0 or np.any(np.diff(a) < 0):
        raise ValueError("A must be nondecreasing with A_0 = 0")
    return X.with_values((1.0 + x) * np.exp(-a), label=f"M({X.label})")


def carried_by_zeros(X: Path, A: Path, epsilon: float) -> CarriedVerdict:
    """Score how much of the increase of ``A`` happens away from zeros of ``X``.

    The increment ``A_{i+1} - A_i`` lives on the step ``(t_i, t_{i+1}]``; it
    counts as off-zero only when both endpoints are outside the band
    (``X_i > eps`` and ``X_{i+1} > eps``), since a step with an endpoint
    inside the band plausibly straddles a zero.  The score is the off-zero
    increase divided by ``A_n`` (``A == 0`` scores 0), and the verdict is
    "carried" when it is at most the acceptance threshold (default 0.05).
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    a = A.values
    if np.any(np.diff(a) < 0):
        raise ValueError("A must be nondecreasing")
    da = np.diff(a)
    x = X.values
    off_zero = (x[:-1] > epsilon) & (x[1:] > epsilon)
    total = a[-1] - a[0]
    bad = float(np.sum(da[off_zero]))
    score = bad / max(total, np.finfo(float).tiny)
    return CarriedVerdict(
        score=score,
        carried=score <= CARRIED_SCORE_THRESHOLD,
        epsilon=epsilon,
        threshold=CARRIED_SCORE_THRESHOLD,
    )


def minimality_gap(M: Path, C: Path) -> float:
    """``min_j (M_j C_j - M_j / I_j)``: slack of ``(M, C)`` over the smallest
    admissible source sharing the martingale part ``M``.

    Nonnegative (up to rounding) for every admissible pair, and exactly 0
    when ``C = 1/I``: the slack is evaluated as ``M * (C - 1/I)`` so the
    minimal choice cancels bit-for-bit.  The start point is excluded from the
    minimum (both sources vanish there by construction, which would mask
    strict inflation).
    """
    _check_factor_pair(M.values, C.values)
    I = running_min(M.values)
    return float(np.min((M.values * (C.values - 1.0 / I))[1:]))


# ---------------------------------------------------------------------------
# class-(D) diagnostics


def _as_batches(ensemble) -> tuple[Iterator[np.ndarray], TimeGrid]:
    if isinstance(ensemble, Ensemble):
        grid = ensemble.paths[0].grid if ensemble.paths else None
        if grid is None:
            raise ValueError("empty ensemble")
        mat = np.vstack([p.values for p in ensemble.paths])
        return iter([mat]), grid
    raise TypeError("expected an Ensemble; use class_d_from_batches for raw arrays")


def class_d_diagnostics(ensemble: Ensemble, tail_level: float = 10.0) -> ClassDReport:
    """Integrability diagnostics for an ensemble of positive martingale paths."""
    batches, grid = _as_batches(ensemble)
    return class_d_from_batches(batches, grid, tail_level=tail_level)


def class_d_from_batches(
    batches: Iterable[np.ndarray], grid: TimeGrid, tail_level: float = 10.0
) -> ClassDReport:
    """Streaming form of :func:`class_d_diagnostics`.

    ``batches`` yields ``(rows, n+1)`` arrays of positive M-paths with
    ``M_0 = 1``.  Per-path statistics are concatenated in batch order, so the
    result does not depend on how the ensemble was split into batches.
    """
    per_path: dict[str, list[np.ndarray]] = {k: [] for k in (
        "mc", "int_right", "int_left", "log_inv_i", "qv_u", "err_log", "err_inf", "m_T")}
    for M in batches:
        M = np.asarray(M, dtype=float)
        if M.ndim != 2:
            raise ValueError("each batch must be a 2-D (paths, points) array")
        if np.any(M[:, 0] != 1.0):
            raise ValueError("every path must start at M_0 = 1")
        if np.any(M <= 0):
            raise ValueError("every path must stay positive")
        # temporaries are released batch by batch; ensembles stream through
        I = running_min(M)
        log_inv_i = -np.log(I[:, -1])
        C = 1.0 / I
        del I
        dC = np.diff(C, axis=1)
        per_path["mc"].append(M[:, -1] * C[:, -1])
        del C
        per_path["int_right"].append(1.0 + np.sum(M[:, 1:] * dC, axis=1))
        per_path["int_left"].append(1.0 + np.sum(M[:, :-1] * dC, axis=1))
        del dC
        u_inc = np.diff(M, axis=1)
        u_inc /= M[:, :-1]
        zero = np.zeros((M.shape[0], 1))
        QV = np.concatenate([zero, np.cumsum(u_inc * u_inc, axis=1)], axis=1)
        drift = np.concatenate([zero, np.cumsum(u_inc, axis=1)], axis=1)
        del u_inc
        drift -= 0.5 * QV
        per_path["qv_u"].append(QV[:, -1].copy())
        del QV
        per_path["err_inf"].append(np.abs(log_inv_i + np.min(drift, axis=1)))
        drift -= np.log(M)
        per_path["err_log"].append(np.max(np.abs(drift), axis=1))
        del drift
        per_path["log_inv_i"].append(log_inv_i)
        per_path["m_T"].append(M[:, -1].copy())
    if not per_path["mc"]:
        raise ValueError("empty ensemble")
    cat = {k: np.concatenate(v) for k, v in per_path.items()}
    n = cat["mc"].size
    if n < 2:
        raise ValueError("need at least 2 paths")
    return ClassDReport(
        horizon=grid.horizon,
        n_paths=n,
        e_mc=McEstimate.from_samples(cat["mc"]),
        e_int=McEstimate.from_samples(cat["int_right"]),
        e_log_inv_i=McEstimate.from_samples(cat["log_inv_i"]),
        e_qv_u=McEstimate.from_samples(cat["qv_u"]),
        pathwise_log_identity_median_err=float(np.median(cat["err_log"])),
        pathwise_inf_identity_median_err=float(np.median(cat["err_inf"])),
        e_int_left=McEstimate.from_samples(cat["int_left"]),
        e_mean_drift=float(np.mean(cat["m_T"]) - 1.0),
        tail_level=tail_level,
        tail_mass=float(np.mean(cat["m_T"] > tail_level)),
    )
