"""Exact calculus for continuous piecewise-linear functions on [0, 1].

Functions are stored as breakpoint/value arrays and every operation in this
module (combination, lattice min/max, level cuts, triangle folding, map
composition, sublevel sets) is exact up to floating-point rounding: new
breakpoints are obtained by solving the two relevant line segments, never by
bisection or sampling.  The only deliberately approximate operation is
``pl_product``, which returns a refined interpolant together with a sup-error
bound.

Conventions used throughout:

* breakpoints are strictly increasing, with first point 0.0 and last 1.0;
  nodes closer than ``GEOM_TOL`` are merged;
* after every constructive operation, collinear neighbours (slope difference
  below ``SLOPE_MERGE_TOL``) are pruned, so representations stay canonical;
* operations that can grow the breakpoint count accept a ``piece_cap``
  (default ``PIECE_CAP``) and raise :class:`PieceCapError` instead of
  allocating an oversized representation.

``PLMap`` is the companion type for piecewise-linear maps defined on an
arbitrary interval of the real line; it is what gets composed with functions
on [0, 1] (post-composition ``phiarowf``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

#: merge tolerance for breakpoints (geometry is considered degenerate below it)
GEOM_TOL = 1e-12

#: adjacent pieces whose slopes differ by less than this are merged
SLOPE_MERGE_TOL = 1e-12

#: default cap on the number of stored breakpoints of any constructed function
PIECE_CAP = 2_000_000

#: largest admissible triangle-fold level for materialised folds
MAX_FOLD_LEVEL = 40

#: deeper cap for cut maps, whose size does not grow with the level; the
#: bound keeps a + 2^-n strictly above a in floats everywhere on [0, 1)
MAX_CUT_LEVEL = 50


class PieceCapError(RuntimeError):
    """Raised when an operation would exceed the configured piece cap."""


class DomainMismatchError(ValueError):
    """Raised when composing with a map that does not cover the value range."""


def _as_float_array(a) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 1:
        raise ValueError("expected a one-dimensional array")
    return arr


def _check_cap(n: int, piece_cap: int | None) -> None:
    cap = PIECE_CAP if piece_cap is None else int(piece_cap)
    if n > cap:
        raise PieceCapError(f"operation needs {n} breakpoints, cap is {cap}")


def _merge_sorted_grids(*grids: np.ndarray) -> np.ndarray:
    """Union of sorted node arrays with GEOM_TOL deduplication."""
    merged = np.sort(np.concatenate(grids))
    if merged.size == 0:
        return merged
    keep = np.empty(merged.size, dtype=bool)
    keep[0] = True
    np.greater(np.diff(merged), GEOM_TOL, out=keep[1:])
    return merged[keep]


def _prune_collinear(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drop interior nodes where the two adjacent slopes agree."""
    if x.size <= 2:
        return x, y
    dx = np.diff(x)
    slopes = np.diff(y) / dx
    interior_redundant = np.abs(np.diff(slopes)) < SLOPE_MERGE_TOL
    keep = np.ones(x.size, dtype=bool)
    keep[1:-1] = ~interior_redundant
    return x[keep], y[keep]


class _PLBase:
    """Shared array plumbing for PLFunction and PLMap."""

    __slots__ = ("breakpoints", "values")

    def __init__(self, breakpoints, values):
        x = _as_float_array(breakpoints)
        y = _as_float_array(values)
        if x.size != y.size or x.size < 2:
            raise ValueError("need matching breakpoint/value arrays of length >= 2")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise ValueError("breakpoints and values must be finite")
        if np.any(np.diff(x) <= 0):
            x, idx = np.unique(x, return_index=True)
            y = y[idx]
            if np.any(np.diff(x) <= GEOM_TOL):
                raise ValueError("breakpoints must be strictly increasing")
        x = x.copy()
        y = y.copy()
        x.flags.writeable = False
        y.flags.writeable = False
        self.breakpoints = x
        self.values = y

    # -- basic queries ----------------------------------------------------

    def __call__(self, t):
        return self.evaluate(t)

    def evaluate(self, t):
        """Evaluate by linear interpolation; exact at stored breakpoints."""
        return np.interp(t, self.breakpoints, self.values)

    @property
    def piece_count(self) -> int:
        return self.breakpoints.size - 1

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.breakpoints)

    def value_range(self) -> tuple[float, float]:
        return float(self.values.min()), float(self.values.max())

    def __repr__(self):
        lo, hi = self.breakpoints[0], self.breakpoints[-1]
        return (f"{type(self).__name__}({self.piece_count} pieces on "
                f"[{lo:g}, {hi:g}])")


class PLMap(_PLBase):
    """Continuous piecewise-linear map on an interval [lo, hi] of the line.

    Used as the outer factor of compositions: breakpoints are the kink
    positions in value space of the inner function.
    """

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def piece_lipschitz(self) -> np.ndarray:
        """Per-piece Lipschitz constants, i.e. absolute slopes."""
        return np.abs(self.slopes)

    def lipschitz(self) -> float:
        return float(self.piece_lipschitz().max())

    @classmethod
    def identity(cls, lo: float, hi: float) -> "PLMap":
        return cls([lo, hi], [lo, hi])

    @classmethod
    def scaling(cls, c: float, lo: float, hi: float) -> "PLMap":
        return cls([lo, hi], [c * lo, c * hi])

    @classmethod
    def absolute(cls, lo: float, hi: float) -> "PLMap":
        """t -> |t| on [lo, hi]."""
        if lo < 0.0 < hi:
            return cls([lo, 0.0, hi], [-lo, 0.0, hi])
        return cls([lo, hi], [abs(lo), abs(hi)])

    @classmethod
    def cut_map(cls, a: float, b: float, lo: float, hi: float) -> "PLMap":
        """The normalised double cut t -> clip(t, a, b) - clip(0, a, b)."""
        if not a < b:
            raise ValueError("cut levels must satisfy a < b")
        offset = min(max(0.0, a), b)
        knots = [lo] + [v for v in (a, b) if lo < v < hi] + [hi]
        vals = [min(max(t, a), b) - offset for t in knots]
        return cls(knots, vals)

    @classmethod
    def triangle(cls, n: int, lo: float, hi: float) -> "PLMap":
        """Triangle wave of level n (period 2^(1-n), peak 2^-n) on [lo, hi]."""
        if n < 1 or n > MAX_FOLD_LEVEL:
            raise ValueError(f"fold level must lie in [1, {MAX_FOLD_LEVEL}]")
        eps = 2.0 ** (-n)
        k_lo = int(np.floor(lo / eps)) + 1
        k_hi = int(np.ceil(hi / eps)) - 1
        _check_cap(max(0, k_hi - k_lo + 1) + 2, None)
        interior = np.arange(k_lo, k_hi + 1, dtype=float) * eps
        knots = np.concatenate(([lo], interior, [hi]))
        vals = triangle_wave(knots, n)
        # interior knots have exact peak/valley values
        if interior.size:
            parity = np.arange(k_lo, k_hi + 1) % 2
            vals[1:-1] = np.where(parity == 1, eps, 0.0)
        return cls(knots, vals)


class PLFunction(_PLBase):
    """Continuous piecewise-linear function on [0, 1].

    Immutable.  Serialises to ``{"x": [...], "y": [...]}``.
    """

    def __init__(self, breakpoints, values, *, piece_cap: int | None = None):
        x = _as_float_array(breakpoints)
        if abs(x[0]) > GEOM_TOL or abs(x[-1] - 1.0) > GEOM_TOL:
            raise ValueError("domain must be exactly [0, 1]")
        _check_cap(x.size, piece_cap)
        super().__init__(x, values)
        # snap the endpoints so downstream arithmetic sees exactly [0, 1]
        if self.breakpoints[0] != 0.0 or self.breakpoints[-1] != 1.0:
            x = self.breakpoints.copy()
            x[0], x[-1] = 0.0, 1.0
            x.flags.writeable = False
            self.breakpoints = x

    # -- constructors ------------------------------------------------------

    @classmethod
    def identity(cls) -> "PLFunction":
        return cls([0.0, 1.0], [0.0, 1.0])

    @classmethod
    def constant(cls, c: float) -> "PLFunction":
        return cls([0.0, 1.0], [c, c])

    @classmethod
    def tent(cls, peak: float = 0.5, height: float | None = None) -> "PLFunction":
        """Tent through (0,0), (peak, height), (1,0); default slope +-1."""
        if not 0.0 < peak < 1.0:
            raise ValueError("peak must be interior")
        h = min(peak, 1.0 - peak) if height is None else height
        return cls([0.0, peak, 1.0], [0.0, h, 0.0])

    @classmethod
    def from_json(cls, text: str) -> "PLFunction":
        obj = json.loads(text)
        return cls(obj["x"], obj["y"])

    def to_json(self) -> str:
        return json.dumps({"x": self.breakpoints.tolist(),
                           "y": self.values.tolist()})

    # -- small conveniences (the named ops below are the real interface) ----

    def simplified(self) -> "PLFunction":
        x, y = _prune_collinear(self.breakpoints, self.values)
        return PLFunction(x, y)

    def restricted_nodes(self, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
        """Nodes of the restriction to [lo, hi], endpoints included."""
        if not (0.0 <= lo < hi <= 1.0):
            raise ValueError("need 0 <= lo < hi <= 1")
        inside = (self.breakpoints > lo + GEOM_TOL) & (self.breakpoints < hi - GEOM_TOL)
        xs = np.concatenate(([lo], self.breakpoints[inside], [hi]))
        ys = np.concatenate(([self.evaluate(lo)], self.values[inside],
                             [self.evaluate(hi)]))
        return xs, ys

    def __add__(self, other):
        if isinstance(other, PLFunction):
            return affine_combine(1.0, self, 1.0, other)
        return PLFunction(self.breakpoints, self.values + float(other))

    def __sub__(self, other):
        if isinstance(other, PLFunction):
            return affine_combine(1.0, self, -1.0, other)
        return PLFunction(self.breakpoints, self.values - float(other))

    def __neg__(self):
        return PLFunction(self.breakpoints, -self.values)

    def __mul__(self, c):
        return PLFunction(self.breakpoints, self.values * float(c))

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# scalar helpers


def triangle_wave(t, n: int):
    """T_n(t): distance from t to the nearest multiple of 2^(1-n).

    Peaks at 2^-n, valleys at 0; 1-Lipschitz.  The modulus uses a power of
    two, so the reduction is exact in binary floating point.
    """
    period = 2.0 ** (1 - n)
    m = np.mod(t, period)
    return np.minimum(m, period - m)


def shifted_cut_scalar(t, a: float, n: int):
    """S_n^a(t) = ((a + 2^-n - t) ^ 2^-n)^+ : 2^-n for t <= a, 0 past a + 2^-n."""
    eps = 2.0 ** (-n)
    return np.clip(a + eps - np.asarray(t, dtype=float), 0.0, eps)


# ---------------------------------------------------------------------------
# exact binary/unary operations


def _with_level_crossings(f: PLFunction, levels) -> tuple[np.ndarray, np.ndarray]:
    """Breakpoints of f enriched with exact preimages of the given levels."""
    x, y = f.breakpoints, f.values
    extra = []
    y0, y1 = y[:-1], y[1:]
    x0, x1 = x[:-1], x[1:]
    for lev in levels:
        if not np.isfinite(lev):
            continue
        d0, d1 = y0 - lev, y1 - lev
        hit = (d0 * d1) < 0.0
        if np.any(hit):
            t = d0[hit] / (d0[hit] - d1[hit])
            extra.append(x0[hit] + t * (x1[hit] - x0[hit]))
    if not extra:
        return x, y
    grid = _merge_sorted_grids(x, *extra)
    return grid, f.evaluate(grid)


def affine_combine(a: float, f: PLFunction, b: float, g: PLFunction,
                   piece_cap: int | None = None) -> PLFunction:
    """Exact a*f + b*g on the merged breakpoint grid."""
    grid = _merge_sorted_grids(f.breakpoints, g.breakpoints)
    _check_cap(grid.size, piece_cap)
    vals = a * f.evaluate(grid) + b * g.evaluate(grid)
    return PLFunction(*_prune_collinear(grid, vals), piece_cap=piece_cap)


def lattice(f: PLFunction, g: PLFunction, op: str = "min",
            piece_cap: int | None = None) -> PLFunction:
    """Pointwise min or max with crossings solved exactly segment by segment."""
    if op not in ("min", "max"):
        raise ValueError("op must be 'min' or 'max'")
    grid = _merge_sorted_grids(f.breakpoints, g.breakpoints)
    fv = f.evaluate(grid)
    gv = g.evaluate(grid)
    d0 = fv[:-1] - gv[:-1]
    d1 = fv[1:] - gv[1:]
    hit = (d0 * d1) < 0.0
    if np.any(hit):
        t = d0[hit] / (d0[hit] - d1[hit])
        cross = grid[:-1][hit] + t * np.diff(grid)[hit]
        grid = _merge_sorted_grids(grid, cross)
        fv = f.evaluate(grid)
        gv = g.evaluate(grid)
    _check_cap(grid.size, piece_cap)
    vals = np.minimum(fv, gv) if op == "min" else np.maximum(fv, gv)
    return PLFunction(*_prune_collinear(grid, vals), piece_cap=piece_cap)


def cut(f: PLFunction, a: float, b: float,
        piece_cap: int | None = None) -> PLFunction:
    """Normalised double cut: clip f between levels a < b, anchored at 0.

    Returns x -> clip(f(x), a, b) - clip(0, a, b); infinite levels are
    allowed and mean no cut on that side.
    """
    if not a < b:
        raise ValueError("cut levels must satisfy a < b")
    grid, vals = _with_level_crossings(f, (a, b))
    offset = min(max(0.0, a), b)
    vals = np.clip(vals, a, b) - offset
    return PLFunction(*_prune_collinear(grid, vals), piece_cap=piece_cap)


def triangle_fold(f: PLFunction, n: int,
                  piece_cap: int | None = None) -> PLFunction:
    """Compose f with the level-n triangle wave T_n, exactly.

    Each piece of f acquires a node at every preimage of a multiple of
    2^-n, so the count grows like 2^n times the total variation of f; the
    piece cap is checked before anything is allocated.
    """
    if not isinstance(n, (int, np.integer)) or n < 1 or n > MAX_FOLD_LEVEL:
        raise ValueError(f"fold level must be an integer in [1, {MAX_FOLD_LEVEL}]")
    eps = 2.0 ** (-n)
    x, y = f.breakpoints, f.values
    v0, v1 = y[:-1], y[1:]
    lo = np.minimum(v0, v1)
    hi = np.maximum(v0, v1)
    k_lo = np.floor(lo / eps).astype(np.int64) + 1
    k_hi = np.ceil(hi / eps).astype(np.int64) - 1
    counts = np.maximum(0, k_hi - k_lo + 1)
    _check_cap(int(counts.sum()) + x.size, piece_cap)

    xs_parts = [x[:1]]
    ys_parts = [triangle_wave(y[:1], n)]
    slopes = (v1 - v0) / np.diff(x)
    for i in range(x.size - 1):
        if counts[i] > 0:
            ks = np.arange(k_lo[i], k_hi[i] + 1)
            nodes = x[i] + (ks * eps - v0[i]) / slopes[i]
            tvals = np.where(ks % 2 == 1, eps, 0.0)
            if slopes[i] < 0:
                nodes = nodes[::-1]
                tvals = tvals[::-1]
            # guard against nodes colliding with the piece ends
            ok = (nodes > x[i] + GEOM_TOL) & (nodes < x[i + 1] - GEOM_TOL)
            xs_parts.append(nodes[ok])
            ys_parts.append(tvals[ok])
        xs_parts.append(x[i + 1:i + 2])
        ys_parts.append(triangle_wave(y[i + 1:i + 2], n))
    xs = np.concatenate(xs_parts)
    ys = np.concatenate(ys_parts)
    return PLFunction(*_prune_collinear(xs, ys), piece_cap=piece_cap)


def shifted_cut(g: PLFunction, a: float, n: int,
                piece_cap: int | None = None) -> PLFunction:
    """Compose g with the shifted ramp S_n^a.

    The result is 2^-n on {g <= a}, 0 on {g >= a + 2^-n} and ramps linearly
    (slope -g') in between; its range is contained in [0, 2^-n].
    """
    if n < 1 or n > MAX_CUT_LEVEL:
        raise ValueError(f"cut level must lie in [1, {MAX_CUT_LEVEL}]")
    eps = 2.0 ** (-n)
    grid, vals = _with_level_crossings(g, (a, a + eps))
    out = np.clip(a + eps - vals, 0.0, eps)
    return PLFunction(*_prune_collinear(grid, out), piece_cap=piece_cap)


def compose(phi: PLMap, f: PLFunction,
            piece_cap: int | None = None) -> PLFunction:
    """Exact post-composition phi(f(x)).

    Requires the domain of phi to cover the value range of f.  Nodes are
    inserted at every preimage of a kink of phi, after which phi is affine
    between consecutive nodes and the composition is exact.
    """
    lo, hi = f.value_range()
    dlo, dhi = phi.domain
    if lo < dlo - GEOM_TOL or hi > dhi + GEOM_TOL:
        raise DomainMismatchError(
            f"map domain [{dlo:g}, {dhi:g}] does not cover value range "
            f"[{lo:g}, {hi:g}]")
    grid, vals = _with_level_crossings(f, phi.breakpoints[1:-1])
    _check_cap(grid.size, piece_cap)
    out = phi.evaluate(np.clip(vals, dlo, dhi))
    return PLFunction(*_prune_collinear(grid, out), piece_cap=piece_cap)


@dataclass(frozen=True)
class ProductApprox:
    """A PL interpolant of a product f*g plus a sup-error bound.

    The bound is (h^2 / 4) * |f'| * |g'| per refined cell, the exact worst
    case for linear interpolation of a quadratic.
    """
    fn: PLFunction
    sup_error: float


def pl_product(f: PLFunction, g: PLFunction, refine: int = 8,
               piece_cap: int | None = None) -> ProductApprox:
    """Piecewise-linear interpolant of the product f*g.

    The merged grid is split ``refine``-fold per piece and the product is
    interpolated through the resulting nodes.  The true product is piecewise
    quadratic, so the interpolation error on a cell of width h is exactly
    |f'||g'| h^2 / 4 at the midpoint, which is what ``sup_error`` reports
    (maximised over cells).
    """
    if refine < 1:
        raise ValueError("refine must be >= 1")
    base = _merge_sorted_grids(f.breakpoints, g.breakpoints)
    _check_cap((base.size - 1) * refine + 1, piece_cap)
    if refine == 1:
        grid = base
    else:
        t = np.linspace(0.0, 1.0, refine + 1)[:-1]
        cells = base[:-1][:, None] + np.diff(base)[:, None] * t[None, :]
        grid = np.append(cells.ravel(), base[-1])
    fv = f.evaluate(grid)
    gv = g.evaluate(grid)
    prod = PLFunction(*_prune_collinear(grid, fv * gv), piece_cap=piece_cap)

    h = np.diff(base) / refine
    fs = np.diff(f.evaluate(base)) / np.diff(base)
    gs = np.diff(g.evaluate(base)) / np.diff(base)
    err = float(np.max(np.abs(fs * gs) * h * h / 4.0)) if base.size > 1 else 0.0
    return ProductApprox(prod, err)


def pl_power_interp(f: PLFunction, q: float, refine: int = 16,
                    piece_cap: int | None = None) -> ProductApprox:
    """PL interpolant of x -> |f(x)|^q with an empirical sup-error bound.

    Nodes are placed at the breakpoints of f, at its zero crossings (where
    |f|^q has a kink or a flat tangency) and ``refine``-fold within each
    resulting cell.  The error bound is measured on a 9-point probe per cell;
    it is a diagnostic, not a certificate, and is reported as such.
    """
    if q <= 0:
        raise ValueError("q must be positive")
    grid0, vals0 = _with_level_crossings(f, (0.0,))
    if refine > 1:
        t = np.linspace(0.0, 1.0, refine + 1)[:-1]
        cells = grid0[:-1][:, None] + np.diff(grid0)[:, None] * t[None, :]
        grid = np.append(cells.ravel(), grid0[-1])
    else:
        grid = grid0
    _check_cap(grid.size, piece_cap)
    vals = np.abs(f.evaluate(grid)) ** q
    approx = PLFunction(*_prune_collinear(grid, vals), piece_cap=piece_cap)
    probe_t = np.linspace(0.0, 1.0, 11)[1:-1]
    probes = (grid[:-1][:, None] + np.diff(grid)[:, None] * probe_t[None, :]).ravel()
    err = float(np.max(np.abs(np.abs(f.evaluate(probes)) ** q
                              - approx.evaluate(probes)))) if probes.size else 0.0
    return ProductApprox(approx, err)


# ---------------------------------------------------------------------------
# interval sets


_BRACKETS = {(True, True): "[]", (True, False): "[)",
             (False, True): "(]", (False, False): "()"}
_BRACKETS_INV = {v: k for k, v in _BRACKETS.items()}


class IntervalSet:
    """A finite union of disjoint subintervals of [0, 1].

    Components are stored sorted as (lo, hi, lo_closed, hi_closed) tuples;
    degenerate closed components [x, x] are allowed.  Components that touch
    and together cover the touching point are merged on construction.
    """

    __slots__ = ("components",)

    def __init__(self, components):
        comps = []
        for lo, hi, lc, hc in components:
            lo, hi = float(lo), float(hi)
            if not (0.0 - GEOM_TOL <= lo <= hi <= 1.0 + GEOM_TOL):
                raise ValueError(f"component [{lo}, {hi}] outside [0, 1]")
            lo, hi = min(max(lo, 0.0), 1.0), min(max(hi, 0.0), 1.0)
            if hi - lo < GEOM_TOL and not (lc and hc):
                continue  # degenerate open/half-open component is empty
            comps.append((lo, hi, bool(lc), bool(hc)))
        comps.sort()
        merged: list[tuple[float, float, bool, bool]] = []
        for c in comps:
            if merged:
                lo, hi, lc, hc = merged[-1]
                nlo, nhi, nlc, nhc = c
                touching = nlo <= hi + GEOM_TOL and (nlo < hi - GEOM_TOL
                                                     or hc or nlc)
                if touching:
                    if nhi > hi or (nhi == hi and nhc):
                        merged[-1] = (lo, max(hi, nhi), lc,
                                      nhc if nhi >= hi else hc)
                    continue
            merged.append(c)
        self.components = tuple(merged)

    # -- constructors ------------------------------------------------------

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls([])

    @classmethod
    def full(cls) -> "IntervalSet":
        return cls([(0.0, 1.0, True, True)])

    @classmethod
    def closed(cls, lo: float, hi: float) -> "IntervalSet":
        return cls([(lo, hi, True, True)])

    @classmethod
    def from_pairs(cls, pairs, closed: bool = True) -> "IntervalSet":
        return cls([(lo, hi, closed, closed) for lo, hi in pairs])

    @classmethod
    def from_json(cls, text: str) -> "IntervalSet":
        comps = []
        for lo, hi, kind in json.loads(text):
            lc, hc = _BRACKETS_INV[kind]
            comps.append((lo, hi, lc, hc))
        return cls(comps)

    def to_json(self) -> str:
        return json.dumps([[lo, hi, _BRACKETS[(lc, hc)]]
                           for lo, hi, lc, hc in self.components])

    # -- queries -----------------------------------------------------------

    def __bool__(self):
        return bool(self.components)

    def __iter__(self):
        return iter(self.components)

    def __len__(self):
        return len(self.components)

    def __repr__(self):
        parts = ", ".join(f"{_BRACKETS[(lc, hc)][0]}{lo:g}, {hi:g}{_BRACKETS[(lc, hc)][1]}"
                          for lo, hi, lc, hc in self.components)
        return f"IntervalSet({parts})"

    def measure(self) -> float:
        return float(sum(hi - lo for lo, hi, _, _ in self.components))

    def contains(self, x: float) -> bool:
        for lo, hi, lc, hc in self.components:
            if (lo < x < hi) or (x == lo and lc) or (x == hi and hc):
                return True
        return False

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        for alo, ahi, alc, ahc in self.components:
            for blo, bhi, blc, bhc in other.components:
                lo = max(alo, blo)
                hi = min(ahi, bhi)
                if lo > hi:
                    continue
                lc = (alc if alo == lo else True) and (blc if blo == lo else True)
                hc = (ahc if ahi == hi else True) and (bhc if bhi == hi else True)
                if lo < hi or (lc and hc):
                    out.append((lo, hi, lc, hc))
        return IntervalSet(out)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(list(self.components) + list(other.components))

    def issubset(self, other: "IntervalSet", tol: float = GEOM_TOL) -> bool:
        """Measure-based inclusion plus endpoint membership for closed ends.

        Adequate for the covering checks used here: a failure by more than a
        zero-measure boundary set is always detected.
        """
        for lo, hi, lc, hc in self.components:
            inter = other.intersect(IntervalSet([(lo, hi, lc, hc)]))
            if inter.measure() < (hi - lo) - tol:
                return False
            if lc and not other.contains(lo):
                return False
            if hc and not other.contains(hi):
                return False
            if hi - lo > tol and not other.contains(0.5 * (lo + hi)):
                return False
        return True


def sublevel_set(g: PLFunction, a: float) -> IntervalSet:
    """The exact sublevel set {x : g(x) <= a}, as closed components.

    Crossings are solved from the line segments; isolated touching points
    come out as degenerate closed components.
    """
    grid, vals = _with_level_crossings(g, (a,))
    comps = []
    # inserted crossing nodes reproduce the level only up to rounding
    tol = GEOM_TOL * max(1.0, abs(a), float(np.max(np.abs(vals))))
    below = vals <= a + tol
    i = 0
    n = grid.size
    while i < n:
        if below[i]:
            j = i
            while j + 1 < n and below[j + 1]:
                j += 1
            comps.append((grid[i], grid[j], True, True))
            i = j + 1
        else:
            i += 1
    return IntervalSet(comps)
