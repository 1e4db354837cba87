"""Seeded generators of random piecewise-linear test functions.

Every draw is a pure function of ``(seed, index)``, so reports can cite the
pair and any single case can be replayed in isolation.  Functions produced
here have breakpoints separated by at least ``min_gap``, values inside
``[-2, 2]`` and slopes bounded by ``max_slope``; profiles with a minimum
absolute slope (used by differentiation-based checks, where flat pieces are
legitimate but uninformative) and profiles with deliberate flat pieces are
both available.
"""

from __future__ import annotations

import numpy as np

from .pl import PLFunction, IntervalSet


class PLSampler:
    """Deterministic stream of PL functions and related fixtures."""

    def __init__(self, seed: int, max_breaks: int = 12, min_gap: float = 0.04,
                 max_slope: float = 4.0, min_slope: float = 0.0,
                 flat_prob: float = 0.15):
        if max_breaks < 2:
            raise ValueError("need at least two breakpoints")
        self.seed = int(seed)
        self.max_breaks = int(max_breaks)
        self.min_gap = float(min_gap)
        self.max_slope = float(max_slope)
        self.min_slope = float(min_slope)
        self.flat_prob = float(flat_prob)

    def _rng(self, index: int, tag: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, int(index), tag])

    # -- function draws ----------------------------------------------------

    def _breakpoints(self, rng: np.random.Generator) -> np.ndarray:
        n_interior = int(rng.integers(1, self.max_breaks - 1))
        for _ in range(64):
            pts = np.sort(rng.uniform(0.0, 1.0, size=n_interior))
            grid = np.concatenate(([0.0], pts, [1.0]))
            if np.all(np.diff(grid) >= self.min_gap):
                return grid
            n_interior = max(1, n_interior - 1)
        return np.linspace(0.0, 1.0, n_interior + 2)

    def pl(self, index: int, allow_flat: bool | None = None) -> PLFunction:
        """Draw one PL function; slopes respect the configured bounds."""
        rng = self._rng(index, tag=1)
        x = self._breakpoints(rng)
        vals = np.empty_like(x)
        vals[0] = rng.uniform(-1.5, 1.5)
        flat_ok = (self.min_slope == 0.0) if allow_flat is None else allow_flat
        for i, dx in enumerate(np.diff(x)):
            if flat_ok and rng.uniform() < self.flat_prob:
                s = 0.0
            else:
                mag = rng.uniform(max(self.min_slope, 1e-3), self.max_slope)
                s = mag if rng.uniform() < 0.5 else -mag
            v = vals[i] + s * dx
            if abs(v) > 2.0:
                v = vals[i] - s * dx
            vals[i + 1] = np.clip(v, -2.0, 2.0)
        return PLFunction(x, vals)

    def pl_pair(self, index: int) -> tuple[PLFunction, PLFunction]:
        return self.pl(2 * index), self.pl(2 * index + 1)

    def nonzero_pl(self, index: int) -> PLFunction:
        """A draw rejected until it has positive energy (some nonflat piece)."""
        for k in range(32):
            f = self.pl(index * 37 + k, allow_flat=(k == 0 and self.flat_prob > 0))
            if np.any(np.abs(np.diff(f.values)) > 1e-9):
                return f
        raise RuntimeError("sampler failed to produce a nonflat function")

    def disjoint_support_pair(self, index: int) -> tuple[PLFunction, PLFunction]:
        """Two functions with supports separated by a gap around a split point."""
        rng = self._rng(index, tag=2)
        split = rng.uniform(0.35, 0.65)
        gap = rng.uniform(0.05, 0.1)
        left = self._bump(rng, 0.0, split - gap)
        right = self._bump(rng, split + gap, 1.0)
        return left, right

    def _bump(self, rng: np.random.Generator, lo: float, hi: float) -> PLFunction:
        width = hi - lo
        inner = np.sort(rng.uniform(lo + 0.15 * width, hi - 0.15 * width, size=3))
        heights = rng.uniform(-2.0, 2.0, size=3)
        x = np.concatenate(([0.0], [lo] if lo > 0 else [], inner,
                            [hi] if hi < 1 else [], [1.0]))
        y = np.concatenate(([0.0], [0.0] if lo > 0 else [], heights,
                            [0.0] if hi < 1 else [], [0.0]))
        if lo == 0.0:
            y[0] = 0.0
        x, idx = np.unique(x, return_index=True)
        return PLFunction(x, y[idx])

    # -- vertex-value draws for graph-type forms ----------------------------

    def vertex_values(self, index: int, n: int) -> np.ndarray:
        return self._rng(index, tag=3).uniform(-2.0, 2.0, size=n)

    def vertex_pair(self, index: int, n: int) -> tuple[np.ndarray, np.ndarray]:
        rng = self._rng(index, tag=4)
        return rng.uniform(-2, 2, size=n), rng.uniform(-2, 2, size=n)

    # -- sets ---------------------------------------------------------------

    def interval_union(self, index: int, max_components: int = 4) -> IntervalSet:
        rng = self._rng(index, tag=5)
        k = int(rng.integers(2, max_components + 1))
        cuts = np.sort(rng.uniform(0.0, 1.0, size=2 * k))
        return IntervalSet.from_pairs(zip(cuts[0::2], cuts[1::2]))

    def with_slope_floor(self, min_slope: float) -> "PLSampler":
        """A copy of this sampler whose draws avoid slopes below min_slope."""
        return PLSampler(self.seed, self.max_breaks, self.min_gap,
                         self.max_slope, min_slope, flat_prob=0.0)
