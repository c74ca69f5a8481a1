"""Discrete stochastic calculus on grid paths.

Two layers live here.  Array kernels (``running_min``, ``ito_sum``,
``qv_sum``, ``regulator``, ``tanaka_raw``, ``occupation_sum``) operate along
the last axis of numpy arrays so ensemble code can process thousands of paths
per call.  The Path-level operations wrap those kernels with grid checks and
the container types used across the package.

Conventions, fixed once:

* Integrals are left-point Riemann sums: ``S_{j+1} = S_j + h_j (x_{j+1} - x_j)``.
* ``sgn(0) = -1`` in the Tanaka residual, matching the left-continuous
  integrand convention on the grid.
* The Tanaka local-time estimate is clamped nondecreasing by running max;
  the raw residual stays available for diagnostics.  (With the ``sgn(0) = -1``
  convention the raw residual only grows at sign flips, so the clamp is only
  absorbing summation rounding, not discretization noise.)
* The occupation-time estimator uses the band ``(-eps, eps)`` with default
  ``eps = sqrt(dt)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import Path

__all__ = [
    "ReflectionPair",
    "LocalTimeEstimate",
    "running_min",
    "running_max",
    "ito_sum",
    "qv_sum",
    "regulator",
    "tanaka_raw",
    "occupation_sum",
    "running_extremum",
    "ito_integral",
    "quadratic_variation",
    "skorokhod_map",
    "local_time_tanaka",
    "local_time_occupation",
    "estimate_local_time",
    "sigma_example_triple",
]


# ---------------------------------------------------------------------------
# array kernels (last axis = time)


def running_min(a: np.ndarray) -> np.ndarray:
    return np.minimum.accumulate(a, axis=-1)


def running_max(a: np.ndarray) -> np.ndarray:
    return np.maximum.accumulate(a, axis=-1)


def _with_zero_start(increments: np.ndarray) -> np.ndarray:
    """Cumulative sum with a 0 prepended along the last axis."""
    out = np.zeros(increments.shape[:-1] + (increments.shape[-1] + 1,))
    np.cumsum(increments, axis=-1, out=out[..., 1:])
    return out


def ito_sum(h: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Left-point stochastic sum of ``h`` against increments of ``x``."""
    return _with_zero_start(h[..., :-1] * np.diff(x, axis=-1))


def qv_sum(x: np.ndarray) -> np.ndarray:
    """Cumulative sum of squared increments of ``x``."""
    dx = np.diff(x, axis=-1)
    return _with_zero_start(dx * dx)


def regulator(z: np.ndarray) -> np.ndarray:
    """Skorokhod regulator ``k_j = max(0, max_{i<=j}(-z_i))`` (needs z_0 = 0)."""
    return np.maximum(np.maximum.accumulate(-z, axis=-1), 0.0)


def tanaka_raw(k: np.ndarray) -> np.ndarray:
    """Tanaka residual ``|K_j| - |K_0| - sum_{i<j} sgn(K_i) dK_i``, sgn(0) = -1."""
    sgn = np.where(k > 0, 1.0, -1.0)
    return np.abs(k) - np.abs(k[..., :1]) - ito_sum(sgn, k)


def occupation_sum(k: np.ndarray, epsilon: float, dt: float) -> np.ndarray:
    """Occupation-band local time: ``(1/2eps) * sum_{i<j} 1{|K_i| < eps} dt``."""
    inside = (np.abs(k[..., :-1]) < epsilon).astype(float)
    return _with_zero_start(inside * (dt / (2.0 * epsilon)))


# ---------------------------------------------------------------------------
# containers


@dataclass(frozen=True, eq=False)
class ReflectionPair:
    """Skorokhod decomposition ``y = z + k`` of an input path ``z``."""

    regulated: Path
    regulator: Path

    def __post_init__(self):
        y = self.regulated.values
        k = self.regulator.values
        if np.any(y < 0):
            raise ValueError("regulated path must be nonnegative")
        if k[0] != 0.0 or np.any(np.diff(k) < 0):
            raise ValueError("regulator must be nondecreasing from 0")


@dataclass(frozen=True, eq=False)
class LocalTimeEstimate:
    """Local time at 0 by two routes: Tanaka residual and occupation band."""

    tanaka: Path
    occupation: Path
    epsilon: float

    def __post_init__(self):
        for p in (self.tanaka, self.occupation):
            if p.values[0] != 0.0:
                raise ValueError("local time must start at 0")
            if np.any(np.diff(p.values) < -1e-12):
                raise ValueError("local time estimate must be nondecreasing")


# ---------------------------------------------------------------------------
# path-level operations


def _same_grid(a: Path, b: Path) -> None:
    if a.grid is b.grid:
        return
    if not np.array_equal(a.grid.times, b.grid.times):
        raise ValueError("paths live on different grids")


def running_extremum(path: Path, mode: str) -> Path:
    """Prefix minimum (``mode='min'``) or maximum (``mode='max'``) of a path."""
    if mode == "min":
        vals = running_min(path.values)
    elif mode == "max":
        vals = running_max(path.values)
    else:
        raise ValueError(f"mode must be 'min' or 'max', got {mode!r}")
    return path.with_values(vals, label=f"{mode}({path.label})")


def ito_integral(h: Path, x: Path) -> Path:
    """Left-point Riemann sum of ``h`` against ``dx``, as a path from 0."""
    _same_grid(h, x)
    return x.with_values(ito_sum(h.values, x.values), label=f"int({h.label} d{x.label})")


def quadratic_variation(x: Path) -> Path:
    """Cumulative sum of squared increments."""
    return x.with_values(qv_sum(x.values), label=f"qv({x.label})")


def skorokhod_map(z: Path) -> ReflectionPair:
    """Reflect ``z`` at 0: the unique ``k`` nondecreasing from 0 with
    ``y = z + k >= 0`` and ``k`` increasing only where ``y = 0``.

    Exact on the grid: at every index where ``k`` increases, ``y`` is 0 in
    floating point, not merely small.
    """
    if z.values[0] != 0.0:
        raise ValueError("skorokhod_map requires z_0 = 0")
    k = regulator(z.values)
    y = z.values + k
    return ReflectionPair(
        regulated=z.with_values(y, label=f"reflect({z.label})"),
        regulator=z.with_values(k, label=f"regulator({z.label})"),
    )


def local_time_tanaka(K: Path) -> Path:
    """Local time at 0 via the Tanaka residual, clamped nondecreasing."""
    L = np.maximum.accumulate(tanaka_raw(K.values))
    return K.with_values(L, label=f"tanaka({K.label})")


def tanaka_residual(K: Path) -> Path:
    """Unclamped Tanaka residual, for diagnostics."""
    return K.with_values(tanaka_raw(K.values), label=f"tanaka_raw({K.label})")


def local_time_occupation(K: Path, epsilon: float) -> Path:
    """Local time at 0 via normalized occupation of the band ``(-eps, eps)``."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    L = occupation_sum(K.values, epsilon, K.grid.dt)
    return K.with_values(L, label=f"occupation({K.label})")


def estimate_local_time(K: Path, epsilon: float | None = None) -> LocalTimeEstimate:
    """Both local-time estimates; ``epsilon`` defaults to ``sqrt(dt)``."""
    eps = float(np.sqrt(K.grid.dt)) if epsilon is None else epsilon
    return LocalTimeEstimate(
        tanaka=local_time_tanaka(K),
        occupation=local_time_occupation(K, eps),
        epsilon=eps,
    )


def sigma_example_triple(K: Path, kind: str):
    """Canonical zero-carried triples built from a local-martingale path ``K``.

    kind='abs':      X = |K|,        A = Tanaka local time L,  N = X - A
    kind='pos_part': X = max(K, 0),  A = L / 2,                N = X - A
    kind='drawdown': X = max(K) - K, A = running max of K,     N = X - A (= -K)

    ``X = N + A`` holds exactly by construction in all three cases.
    """
    from .decompose import SigmaTriple  # deferred: decompose imports this module

    if K.values[0] != 0.0:
        raise ValueError("sigma_example_triple requires K_0 = 0")
    v = K.values
    if kind == "abs":
        X = np.abs(v)
        A = np.maximum.accumulate(tanaka_raw(v))
    elif kind == "pos_part":
        X = np.maximum(v, 0.0)
        A = 0.5 * np.maximum.accumulate(tanaka_raw(v))
    elif kind == "drawdown":
        kbar = running_max(v)
        X = kbar - v
        A = kbar
    else:
        raise ValueError(f"kind must be 'abs', 'pos_part' or 'drawdown', got {kind!r}")
    N = X - A
    eps = 2.0 * float(np.sqrt(K.grid.dt))
    return SigmaTriple(
        submartingale=K.with_values(X, label=f"{kind}({K.label})"),
        martingale_part=K.with_values(N, label=f"N[{kind}]"),
        increasing_part=K.with_values(A, label=f"A[{kind}]"),
        zero_threshold=eps,
    )
