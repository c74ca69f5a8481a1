"""Builders for the concrete process families used across the experiments.

Families
--------
* ``brownian``                    standard Brownian motion from 0
* ``brownian_stopped_level``     Brownian motion frozen at the first grid
                                  index with ``B >= a``
* ``brownian_drift_stopped_line`` Brownian motion frozen at the first grid
                                  index with ``B + b t >= 1``
* ``exp_martingale``             ``exp(B_t - t/2)``, optionally on a stopped
                                  Brownian path (``t`` stops with it)
* ``bessel3``                    Euclidean norm of a 3-D Brownian motion
                                  started at ``(x0, 0, 0)`` -- exact in law at
                                  the grid points, no singularity handling
* ``scale_martingale``           ``x0 / R_t`` for a Bessel(3) path ``R``: the
                                  scale-function martingale normalized to 1

Generators are pure functions of ``(grid, key, parameters)``.  Batch variants
(``*_rows``, :func:`generate_rows`) produce ``(rows, n+1)`` matrices with one
keyed stream per path so ensembles can be built in any order, split across
any number of workers, and still come out bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .grids import Ensemble, Path, StoppedPath, TimeGrid, freeze_after, make_grid
from .streams import StreamKey, gaussian_increments

__all__ = [
    "GeneratorSpec",
    "FAMILIES",
    "gen_brownian",
    "gen_stopped_hitting",
    "gen_exp_martingale",
    "gen_bessel3",
    "scale_martingale",
    "brownian_rows",
    "bessel3_rows",
    "stop_at_mask_rows",
    "generate_rows",
    "make_ensemble",
]

#: family -> (required params, optional params)
FAMILIES: dict[str, tuple[set, set]] = {
    "brownian": (set(), set()),
    "brownian_stopped_level": ({"a"}, set()),
    "brownian_drift_stopped_line": ({"b"}, set()),
    "exp_martingale": (set(), {"stop_level", "stop_line_drift"}),
    "bessel3": ({"x0"}, set()),
    "scale_martingale": ({"x0"}, set()),
}

_POSITIVE_PARAMS = {"a", "b", "x0", "stop_level", "stop_line_drift"}


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    """A process family with its parameters and the grid it runs on."""

    family: str
    params: dict = field(default_factory=dict)
    grid: TimeGrid = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; known: {sorted(FAMILIES)}")
        if self.grid is None:
            raise ValueError("spec requires a grid")
        required, optional = FAMILIES[self.family]
        given = set(self.params)
        missing = required - given
        if missing:
            raise ValueError(f"{self.family} requires parameters {sorted(missing)}")
        unknown = given - required - optional
        if unknown:
            raise ValueError(f"{self.family} does not accept {sorted(unknown)}")
        if self.family == "exp_martingale" and {"stop_level", "stop_line_drift"} <= given:
            raise ValueError("exp_martingale accepts at most one stopping rule")
        for k, v in self.params.items():
            if k in _POSITIVE_PARAMS and not v > 0:
                raise ValueError(f"parameter {k} must be positive, got {v}")

    def to_config(self) -> dict[str, str]:
        """Flat key-value form (echoed into reports)."""
        cfg = {
            "family": self.family,
            "horizon": repr(self.grid.horizon),
            "n_steps": str(self.grid.n_steps),
        }
        for k in sorted(self.params):
            cfg[k] = repr(float(self.params[k]))
        return cfg

    @classmethod
    def from_config(cls, cfg: Mapping[str, str]) -> "GeneratorSpec":
        items = dict(cfg)
        family = items.pop("family")
        grid = make_grid(float(items.pop("horizon")), int(items.pop("n_steps")))
        params = {k: float(v) for k, v in items.items()}
        return cls(family=family, params=params, grid=grid)


# ---------------------------------------------------------------------------
# single-path generators


def gen_brownian(grid: TimeGrid, key: StreamKey | None = None, *, increments=None) -> Path:
    """Brownian path from 0: cumulative sum of the key's Gaussian increments.

    ``increments`` may be injected directly for deterministic tests; exactly
    one of ``key`` / ``increments`` must be given.
    """
    inc = _resolve_increments(grid, key, increments, n_streams=1)
    values = np.concatenate([[0.0], np.cumsum(inc)])
    return Path(grid, values, label="brownian")


def _resolve_increments(grid, key, increments, n_streams):
    if (key is None) == (increments is None):
        raise ValueError("provide exactly one of key or increments")
    if increments is not None:
        inc = np.asarray(increments, dtype=float)
        want = (grid.n_steps,) if n_streams == 1 else (n_streams, grid.n_steps)
        if inc.shape != want:
            raise ValueError(f"increments must have shape {want}, got {inc.shape}")
        return inc
    if n_streams == 1:
        return gaussian_increments(grid, key)
    rows = [
        gaussian_increments(grid, StreamKey(key.master_seed, key.path_index, key.substream + s))
        for s in range(n_streams)
    ]
    return np.vstack(rows)


def gen_stopped_hitting(base: Path, kind: str, *, a: float | None = None, b: float | None = None) -> StoppedPath:
    """Freeze ``base`` at its first grid index past a level or a line.

    kind='level': first index with ``B >= a`` (a > 0).
    kind='line':  first index with ``B + b*t >= 1`` (b > 0).

    No sub-step correction: the hit is resolved at grid resolution, and a
    path that never triggers within the horizon comes back "not stopped".
    """
    v = base.values
    if kind == "level":
        if a is None or not a > 0:
            raise ValueError("level kind requires a > 0")
        mask = v >= a
        rule = f"first B >= {a}"
    elif kind == "line":
        if b is None or not b > 0:
            raise ValueError("line kind requires b > 0")
        mask = v + b * base.grid.times >= 1.0
        rule = f"first B + {b}*t >= 1"
    else:
        raise ValueError(f"kind must be 'level' or 'line', got {kind!r}")
    if not mask.any():
        return StoppedPath(path=base, stop_index=None, rule=rule)
    k = int(np.argmax(mask))
    return StoppedPath(path=base.with_values(freeze_after(v, k)), stop_index=k, rule=rule)


def gen_exp_martingale(
    grid: TimeGrid,
    key: StreamKey | None = None,
    *,
    stop: tuple[str, float] | None = None,
    increments=None,
) -> Path:
    """Exponential martingale path ``exp(B_{t ^ tau} - (t ^ tau)/2)``.

    ``stop`` is ``None``, ``("level", a)`` or ``("line", b)``; the clock is
    frozen together with the Brownian path.  Strictly positive, starts at 1.
    A zero increment stream yields the deterministic ``exp(-t/2)`` branch
    (the degenerate stream, not a martingale sample); the label records it.
    """
    B = gen_brownian(grid, key, increments=increments)
    t = grid.times
    label = "exp_martingale"
    if stop is not None:
        kind, value = stop
        sp = gen_stopped_hitting(B, kind, **({"a": value} if kind == "level" else {"b": value}))
        B = sp.path
        if sp.stop_index is not None:
            t = np.minimum(t, t[sp.stop_index])
        label += f"[{sp.rule}]"
    if increments is not None and not np.any(np.asarray(increments)):
        label += "[degenerate zero stream]"
    values = np.exp(B.values - t / 2.0)
    values[0] = 1.0
    return Path(grid, values, label=label)


def gen_bessel3(grid: TimeGrid, x0: float, key: StreamKey | None = None, *, increments=None) -> Path:
    """Bessel(3) path: norm of a 3-D Brownian motion from ``(x0, 0, 0)``.

    Exact in law at the grid points, strictly positive.  Uses substreams
    ``key.substream + {0, 1, 2}`` for the three components.
    """
    if not x0 > 0:
        raise ValueError(f"x0 must be positive, got {x0}")
    inc = _resolve_increments(grid, key, increments, n_streams=3)
    w = np.cumsum(inc, axis=1)
    sq = (x0 + w[0]) ** 2 + w[1] ** 2 + w[2] ** 2
    values = np.concatenate([[x0], np.sqrt(sq)])
    return Path(grid, values, label=f"bessel3(x0={x0})")


def scale_martingale(R: Path, mode: str) -> Path:
    """Scale-function transforms of a positive transient path.

    mode='neg_inverse': ``1/R`` (the local martingale ``-s(R)`` for the
    canonical scale ``s(x) = -1/x`` with s(0) = -inf, s(inf) = 0).
    mode='normalized':  ``R_0 / R``, so the path starts at 1.
    """
    v = R.values
    if np.any(v <= 0):
        raise ValueError("scale_martingale requires a strictly positive path")
    if mode == "neg_inverse":
        return R.with_values(1.0 / v, label=f"1/({R.label})")
    if mode == "normalized":
        return R.with_values(v[0] / v, label=f"normalized 1/({R.label})")
    raise ValueError(f"mode must be 'neg_inverse' or 'normalized', got {mode!r}")


# ---------------------------------------------------------------------------
# batch engines: one keyed stream per path, rows stacked in path order


def _normal_rows(master_seed: int, first_index: int, rows: int, substream: int, n: int) -> np.ndarray:
    from .streams import standard_normal_block

    out = np.empty((rows, n))
    for i in range(rows):
        out[i] = standard_normal_block(StreamKey(master_seed, first_index + i, substream), n)
    return out


def brownian_rows(grid: TimeGrid, master_seed: int, first_index: int, rows: int, substream: int = 0) -> np.ndarray:
    """(rows, n+1) Brownian paths; row i uses path_index = first_index + i."""
    out = np.empty((rows, grid.n_steps + 1))
    out[:, 0] = 0.0
    inc = _normal_rows(master_seed, first_index, rows, substream, grid.n_steps)
    inc *= np.sqrt(grid.dt)
    np.cumsum(inc, axis=1, out=out[:, 1:])
    return out


def bessel3_rows(grid: TimeGrid, x0: float, master_seed: int, first_index: int, rows: int) -> np.ndarray:
    """(rows, n+1) Bessel(3) paths from x0 via three component substreams."""
    if not x0 > 0:
        raise ValueError(f"x0 must be positive, got {x0}")
    sq = None
    for comp in range(3):
        inc = _normal_rows(master_seed, first_index, rows, comp, grid.n_steps)
        inc *= np.sqrt(grid.dt)
        w = np.cumsum(inc, axis=1)
        if comp == 0:
            w += x0
        sq = w * w if sq is None else sq + w * w
        del inc, w
    out = np.empty((rows, grid.n_steps + 1))
    out[:, 0] = x0
    np.sqrt(sq, out=out[:, 1:])
    return out


def stop_at_mask_rows(values: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Freeze each row at its first True in ``mask``.

    Returns the frozen matrix and per-row stop indices (the final index for
    rows that never trigger, which leaves them unchanged).
    """
    n_last = values.shape[1] - 1
    any_hit = mask.any(axis=1)
    stop = np.where(any_hit, mask.argmax(axis=1), n_last)
    idx = np.minimum(np.arange(values.shape[1])[None, :], stop[:, None])
    frozen = np.take_along_axis(values, idx, axis=1)
    return frozen, stop


def generate_rows(spec: GeneratorSpec, master_seed: int, first_index: int, rows: int) -> np.ndarray:
    """Batch of the family's primary output, one keyed stream set per path."""
    grid = spec.grid
    fam = spec.family
    if fam == "brownian":
        return brownian_rows(grid, master_seed, first_index, rows)
    if fam == "brownian_stopped_level":
        B = brownian_rows(grid, master_seed, first_index, rows)
        frozen, _ = stop_at_mask_rows(B, B >= spec.params["a"])
        return frozen
    if fam == "brownian_drift_stopped_line":
        B = brownian_rows(grid, master_seed, first_index, rows)
        line = B + spec.params["b"] * grid.times[None, :]
        frozen, _ = stop_at_mask_rows(B, line >= 1.0)
        return frozen
    if fam == "exp_martingale":
        B = brownian_rows(grid, master_seed, first_index, rows)
        t = np.broadcast_to(grid.times, B.shape)
        if "stop_level" in spec.params:
            B, stop = stop_at_mask_rows(B, B >= spec.params["stop_level"])
            t = np.minimum(grid.times[None, :], grid.times[stop][:, None])
        elif "stop_line_drift" in spec.params:
            line = B + spec.params["stop_line_drift"] * grid.times[None, :]
            B, stop = stop_at_mask_rows(B, line >= 1.0)
            t = np.minimum(grid.times[None, :], grid.times[stop][:, None])
        M = np.exp(B - t / 2.0)
        M[:, 0] = 1.0
        return M
    if fam == "bessel3":
        return bessel3_rows(grid, spec.params["x0"], master_seed, first_index, rows)
    if fam == "scale_martingale":
        R = bessel3_rows(grid, spec.params["x0"], master_seed, first_index, rows)
        return spec.params["x0"] / R
    raise ValueError(f"unknown family {fam!r}")


def make_ensemble(spec: GeneratorSpec, n_paths: int, master_seed: int) -> Ensemble:
    """Materialize ``n_paths`` Path objects (small runs; experiments stream
    row batches instead of building ensembles)."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    values = generate_rows(spec, master_seed, 0, n_paths)
    paths = [
        Path(spec.grid, values[i], label=f"{spec.family}#{i}") for i in range(n_paths)
    ]
    seeds = [StreamKey(master_seed, i, 0) for i in range(n_paths)]
    return Ensemble(spec=spec, paths=tuple(paths), seeds=tuple(seeds))
