"""Deterministic, splittable Gaussian increment streams.

Each ``(master_seed, path_index, substream)`` triple maps injectively to a
Philox counter-based key, so any worker can regenerate any path's increments
independently of scheduling order: the draw for a given key is a pure
function of the key.  The Gaussian transform is numpy's ziggurat, applied to
the keyed stream in one block per path; both choices are fixed and echoed
into report metadata so runs remain comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .grids import TimeGrid

__all__ = ["StreamKey", "gaussian_increments", "standard_normal_block", "RNG_INFO"]

#: Echoed into every report (design decision: fixed once, recorded).
RNG_INFO = {"bit_generator": "Philox4x64", "gaussian_transform": "ziggurat"}

_U32 = 1 << 32
_U64 = 1 << 64


@dataclass(frozen=True)
class StreamKey:
    """Identity of one Gaussian stream.

    ``path_index`` and ``substream`` must fit in 32 bits each; together with
    the 64-bit master seed they form the 128-bit Philox key, so distinct
    triples give distinct (independent) streams.
    """

    master_seed: int
    path_index: int = 0
    substream: int = 0

    def __post_init__(self):
        if not 0 <= self.path_index < _U32:
            raise ValueError(f"path_index out of range [0, 2^32): {self.path_index}")
        if not 0 <= self.substream < _U32:
            raise ValueError(f"substream out of range [0, 2^32): {self.substream}")

    def philox_key(self) -> np.ndarray:
        w0 = self.master_seed % _U64
        w1 = (self.path_index << 32) | self.substream
        return np.array([w0, w1], dtype=np.uint64)


def standard_normal_block(key: StreamKey, n: int) -> np.ndarray:
    """The first ``n`` standard normal draws of the stream ``key``."""
    gen = Generator(Philox(key=key.philox_key()))
    return gen.standard_normal(n)


def gaussian_increments(grid: TimeGrid, key: StreamKey) -> np.ndarray:
    """Brownian increments for ``grid``: n i.i.d. N(0, dt) draws.

    Fully reproducible: the same key always yields the same block, regardless
    of process, thread, or call order.
    """
    return standard_normal_block(key, grid.n_steps) * np.sqrt(grid.dt)
