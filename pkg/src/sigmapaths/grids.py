"""Uniform time grids, sampled paths, stopped paths, and ensembles.

Every process in this package lives on a :class:`TimeGrid`: a uniform
discretization ``0 = t_0 < t_1 < ... < t_n = T``.  A :class:`Path` holds the
sampled values at those grid points; integrals and hitting times downstream
are always defined in terms of grid sums and grid indices.  Hitting times are
resolved at grid resolution (first grid index at/after the crossing), with no
sub-step bridge correction; the resulting O(sqrt(dt)) first-passage bias is
quantified by refinement studies in the test suite.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

__all__ = [
    "TimeGrid",
    "Path",
    "StoppedPath",
    "Ensemble",
    "McEstimate",
    "make_grid",
    "stop_path",
    "freeze_after",
    "write_paths_csv",
    "read_paths_csv",
]

#: Relative tolerance for grid uniformity.
UNIFORMITY_RTOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=float)
    if out is a:
        out = out.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Uniform grid ``t_0 = 0 < t_1 < ... < t_n = horizon``."""

    horizon: float
    n_steps: int
    times: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", _readonly(self.times))
        t = self.times
        if len(t) != self.n_steps + 1:
            raise ValueError("times must have n_steps + 1 entries")
        if t[0] != 0.0:
            raise ValueError("grid must start at t = 0")
        steps = np.diff(t)
        if np.any(steps <= 0):
            raise ValueError("grid times must be strictly increasing")
        if np.max(np.abs(steps - steps[0])) > UNIFORMITY_RTOL * steps[0]:
            raise ValueError("grid spacing not uniform within 1e-9")

    @property
    def dt(self) -> float:
        """Step size ``horizon / n_steps``."""
        return self.horizon / self.n_steps

    def __len__(self) -> int:
        return self.n_steps + 1

    def index_at(self, t: float) -> int:
        """Grid index of the point closest to time ``t``."""
        j = int(round(t / self.dt))
        return min(max(j, 0), self.n_steps)


def make_grid(horizon: float, n_steps: int) -> TimeGrid:
    """Build a uniform grid over ``[0, horizon]`` with ``n_steps`` steps.

    The final grid point equals ``horizon`` exactly.
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    times = np.linspace(0.0, float(horizon), int(n_steps) + 1)
    return TimeGrid(horizon=float(horizon), n_steps=int(n_steps), times=times)


@dataclass(frozen=True, eq=False)
class Path:
    """A process sampled on a grid: finite values, one per grid point."""

    grid: TimeGrid
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))
        if len(self.values) != len(self.grid):
            raise ValueError(
                f"path has {len(self.values)} values for a grid of {len(self.grid)} points"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"path {self.label!r} contains non-finite values")

    def with_values(self, values: np.ndarray, label: str | None = None) -> "Path":
        """New path on the same grid."""
        return Path(self.grid, values, self.label if label is None else label)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class StoppedPath:
    """A path frozen from a stopping index onward.

    ``stop_index is None`` means the stopping rule never triggered within the
    horizon ("not stopped"); the path is then unchanged.
    """

    path: Path
    stop_index: int | None
    rule: str = ""

    def __post_init__(self):
        k = self.stop_index
        if k is None:
            return
        if not 0 <= k < len(self.path):
            raise ValueError(f"stop_index {k} outside [0, {len(self.path) - 1}]")
        tail = self.path.values[k:]
        if np.any(tail != tail[0]):
            raise ValueError("values not constant after stop_index")

    @property
    def stopped(self) -> bool:
        return self.stop_index is not None

    @property
    def values(self) -> np.ndarray:
        return self.path.values

    @property
    def grid(self) -> TimeGrid:
        return self.path.grid

    def stop_time(self) -> float | None:
        """Grid time of the stop, or None when not stopped."""
        if self.stop_index is None:
            return None
        return float(self.grid.times[self.stop_index])


def freeze_after(values: np.ndarray, stop_index: int) -> np.ndarray:
    """Copy of ``values`` held constant at ``values[stop_index]`` from there on."""
    out = np.array(values, dtype=float)
    out[stop_index:] = out[stop_index]
    return out


def stop_path(path: Path, predicate: Callable[[float], bool], rule: str = "") -> StoppedPath:
    """Stop ``path`` at the first index whose value satisfies ``predicate``.

    Values are frozen at the stopped value from that index on.  A predicate
    that never triggers yields a non-stopped result with the path unchanged.
    """
    stop_index: int | None = None
    for j, v in enumerate(path.values):
        if predicate(float(v)):
            stop_index = j
            break
    if stop_index is None:
        return StoppedPath(path=path, stop_index=None, rule=rule)
    frozen = freeze_after(path.values, stop_index)
    return StoppedPath(path=path.with_values(frozen), stop_index=stop_index, rule=rule)


@dataclass(frozen=True, eq=False)
class Ensemble:
    """A collection of paths sharing one grid, with their generating seeds."""

    spec: object
    paths: tuple
    seeds: tuple

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        object.__setattr__(self, "seeds", tuple(self.seeds))
        if len(self.paths) != len(self.seeds):
            raise ValueError("one seed per path required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be pairwise distinct")
        grids = {id(p.grid) for p in self.paths}
        if len(grids) > 1:
            g0 = self.paths[0].grid
            for p in self.paths[1:]:
                if not np.array_equal(p.grid.times, g0.times):
                    raise ValueError("all paths in an ensemble must share one grid")

    def __len__(self) -> int:
        return len(self.paths)


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo mean with standard error of the mean."""

    mean: float
    stderr: float
    n_samples: int

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if not self.stderr >= 0:
            raise ValueError("stderr must be nonnegative")

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "McEstimate":
        x = np.asarray(samples, dtype=float)
        n = x.size
        if n < 2:
            raise ValueError("need at least 2 samples")
        return cls(mean=float(x.mean()), stderr=float(x.std(ddof=1) / np.sqrt(n)), n_samples=n)

    @classmethod
    def from_moments(cls, total: float, total_sq: float, n: int) -> "McEstimate":
        """Estimate from accumulated sum and sum of squares (batched reduction)."""
        if n < 2:
            raise ValueError("need at least 2 samples")
        mean = total / n
        var = max(total_sq / n - mean * mean, 0.0) * n / (n - 1)
        return cls(mean=float(mean), stderr=float(np.sqrt(var / n)), n_samples=n)

    def as_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n_samples": self.n_samples}


# ---------------------------------------------------------------------------
# CSV path format (long form): header "path_id,t,value", one row per grid
# point, values printed with 17 significant digits, LF line endings, UTF-8.


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_paths_csv(paths: Iterable[Path | StoppedPath], dest) -> None:
    """Write paths in long form CSV; ``dest`` is a path or text file object."""
    own = isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__")
    fh = open(dest, "w", encoding="utf-8", newline="\n") if own else dest
    try:
        fh.write("path_id,t,value\n")
        for i, p in enumerate(paths):
            values = p.values
            times = p.grid.times
            pid = (p.path.label if isinstance(p, StoppedPath) else p.label) or str(i)
            for t, v in zip(times, values):
                fh.write(f"{pid},{_fmt(t)},{_fmt(v)}\n")
    finally:
        if own:
            fh.close()


def read_paths_csv(src) -> list[Path]:
    """Read paths written by :func:`write_paths_csv` (grids reconstructed)."""
    own = isinstance(src, (str, bytes)) or hasattr(src, "__fspath__")
    fh = open(src, "r", encoding="utf-8", newline="") if own else src
    try:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["path_id", "t", "value"]:
            raise ValueError(f"unexpected CSV header: {header}")
        by_id: dict[str, list[tuple[float, float]]] = {}
        order: list[str] = []
        for pid, t, v in reader:
            if pid not in by_id:
                by_id[pid] = []
                order.append(pid)
            by_id[pid].append((float(t), float(v)))
    finally:
        if own:
            fh.close()
    out = []
    grid_cache: dict[tuple, TimeGrid] = {}
    for pid in order:
        rows = by_id[pid]
        times = np.array([r[0] for r in rows])
        values = np.array([r[1] for r in rows])
        key = (len(times), times[-1])
        grid = grid_cache.get(key)
        if grid is None:
            grid = make_grid(times[-1], len(times) - 1)
            grid_cache[key] = grid
        out.append(Path(grid, values, label=pid))
    return out
