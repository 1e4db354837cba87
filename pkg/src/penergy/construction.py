"""Energy measures built from fold limits.

The route from a form to a measure goes through cell functions: fold the
function with a triangle wave of level n, cap it with a shifted cut of a
witness, and take energies.  As n grows the energies decrease to a limit
F_f^g(a) that behaves like the measure of the sublevel set {g <= a}.
Differencing those limits along a grid of levels yields a genuine measure
with a piecewise-constant density.

Evaluating the capped fold literally is hopeless at deep levels (the fold
has 2^n pieces), so the central routine here, :func:`folded_lid_energy`,
never materialises it.  On pieces where the cap sits at or above the fold's
peak the fold is the pointwise minimum and folding preserves the absolute
slope a.e., so the energy contribution is the plain local energy of f.
Where the cap is nonpositive the cap wins outright.  Only in the band where
the cap crosses (0, peak) do fold nodes get materialised, and their count
is set by the slope ratio of f to the witness, independent of n.  That
makes level 35 as cheap as level 5.

Everything here requires the strongly local interval model; graph forms
expose their measures directly by edge decomposition instead.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .forms import PLIntervalForm
from .pl import (
    GEOM_TOL,
    MAX_CUT_LEVEL,
    PIECE_CAP,
    IntervalSet,
    PieceCapError,
    PLFunction,
    _merge_sorted_grids,
    _with_level_crossings,
    lattice,
    shifted_cut,
    sublevel_set,
    triangle_fold,
    triangle_wave,
)

__all__ = [
    "FoldSchedule",
    "DEFAULT_SCHEDULE",
    "MEASURE_SCHEDULE",
    "LAW_SCHEDULE",
    "ConvergenceError",
    "EmptyFamilyError",
    "CoverHypothesisError",
    "InadmissibleWitnessWarning",
    "ConvergenceTrace",
    "DistributionSamples",
    "CoveringReport",
    "EnergyMeasure",
    "cell_function",
    "folded_lid_energy",
    "F_value",
    "two_sided_cut_limit",
    "distribution",
    "reflection_gap",
    "canonical_witnesses",
    "outer_measure_lb",
    "energy_measure",
    "reference_measure",
    "covering_check",
]


class ConvergenceError(RuntimeError):
    """A fold limit failed to stall within the level budget."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class EmptyFamilyError(ValueError):
    """No admissible witness pair survived filtering."""


class CoverHypothesisError(ValueError):
    """The claimed covering does not contain the covered sublevel set."""


class InadmissibleWitnessWarning(UserWarning):
    """A witness pair was skipped (level not negative, or set escapes U)."""


@dataclass(frozen=True)
class FoldSchedule:
    """Level range and stopping rule for fold limits.

    A limit is declared converged once the level energy changes by less
    than ``rel_tol`` (relative to the larger of the values compared and of
    the total energy E(f)) for ``stall_count`` consecutive steps.  Where
    the evaluator can split off the band contribution, a step only counts
    as quiet if that residual is below the same tolerance: the capped
    region {lid >= peak} does not move with the level, so the band part
    bounds the distance to the limit from above.  Without that extra
    condition a function with a flat piece can produce a dyadic staircase
    of equal level energies and stall arbitrarily far from the limit.
    """

    n_min: int = 4
    n_max: int = 18
    rel_tol: float = 1e-6
    stall_count: int = 2

    def __post_init__(self):
        if not (1 <= self.n_min <= self.n_max <= MAX_CUT_LEVEL):
            raise ValueError(
                f"need 1 <= n_min <= n_max <= {MAX_CUT_LEVEL}, "
                f"got [{self.n_min}, {self.n_max}]")
        if not (self.rel_tol > 0.0):
            raise ValueError("rel_tol must be positive")
        if self.stall_count < 1:
            raise ValueError("stall_count must be at least 1")

    @property
    def levels(self) -> range:
        return range(self.n_min, self.n_max + 1)


DEFAULT_SCHEDULE = FoldSchedule()
# Deeper schedules for measure construction: the residual band energy at
# level n is bounded by w_max * max(|slope|, 1)^p * 2^-n, so pointwise
# errors keep shrinking by half per level and the budget below leaves the
# differenced density a comfortable margin under a 1e-4 sup gap.  The
# max(., 1) floor comes from the cut ramp's own slope, so nearly flat
# functions stall only once 2^-n drops below rel_tol * E(f); n_max = 48
# covers energies down to about 1e-6 * w_max.
MEASURE_SCHEDULE = FoldSchedule(n_min=6, n_max=48, rel_tol=1e-8)
LAW_SCHEDULE = FoldSchedule(n_min=6, n_max=24, rel_tol=1e-5)


@dataclass(frozen=True)
class ConvergenceTrace:
    """Level-by-level energies of one fold limit."""

    levels: tuple
    energies: tuple
    converged: bool
    stalled_at: int | None = None

    @property
    def final(self) -> float:
        """The running infimum; energies decrease up to stopping noise."""
        return float(min(self.energies))

    @property
    def last(self) -> float:
        return float(self.energies[-1])

    def to_rows(self):
        """(n, energy, inf_so_far) rows for dumps."""
        rows = []
        inf_so_far = np.inf
        for n, e in zip(self.levels, self.energies):
            inf_so_far = min(inf_so_far, e)
            rows.append((n, e, inf_so_far))
        return rows


@dataclass(frozen=True)
class DistributionSamples:
    """F_f^g sampled along a grid of levels a."""

    a_values: np.ndarray
    values: np.ndarray
    traces: tuple
    converged: bool


@dataclass(frozen=True)
class CoveringReport:
    """Subadditivity slack of one covering; slack = sum of parts - whole."""

    covered_value: float
    cover_values: tuple
    slack: float
    tolerance: float
    converged: bool

    @property
    def passed(self) -> bool:
        return self.slack >= -self.tolerance


def _require_pl(form) -> PLIntervalForm:
    if not isinstance(form, PLIntervalForm):
        raise TypeError(
            "the fold construction needs the strongly local interval model; "
            "graph forms expose measures by edge decomposition instead")
    return form


# ---------------------------------------------------------------------------
# cell functions and their energies


def cell_function(f: PLFunction, g: PLFunction, a: float, n: int,
                  piece_cap: int | None = None) -> PLFunction:
    """The capped fold min(T_n o f, S_n^a o g), materialised literally.

    Exponential in n; useful for cross-checks at small levels and as the
    defining object.  Deep levels go through :func:`folded_lid_energy`.
    """
    folded = triangle_fold(f, n, piece_cap=piece_cap)
    lid = shifted_cut(g, a, n, piece_cap=piece_cap)
    return lattice(folded, lid, "min", piece_cap=piece_cap)


def _fold_segment_nodes(x0: float, x1: float, v0: float, v1: float,
                        n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes of T_n o f on [x0, x1] where f is affine from v0 to v1.

    Returns (x, y) arrays including both endpoints.  Interior nodes are the
    preimages of the half-period lattice k * 2^-n; their fold values are 0
    for even k and the peak for odd k.
    """
    eps = 2.0 ** (-n)
    if x1 <= x0:
        x = np.array([x0, x1])
        return x, triangle_wave(np.array([v0, v1]), n)
    if v1 == v0:
        x = np.array([x0, x1])
        yv = float(triangle_wave(v0, n))
        return x, np.array([yv, yv])
    lo, hi = (v0, v1) if v0 < v1 else (v1, v0)
    kmin = int(np.floor(lo / eps)) + 1
    kmax = int(np.ceil(hi / eps)) - 1
    count = max(kmax - kmin + 1, 0)
    if count > PIECE_CAP:
        raise PieceCapError(
            f"fold band would materialise {count} nodes on one piece")
    s = (v1 - v0) / (x1 - x0)
    ks = np.arange(kmin, kmin + count, dtype=np.int64)
    xi = x0 + (ks * eps - v0) / s
    yi = eps * (ks % 2).astype(float)
    if s < 0.0:
        xi = xi[::-1]
        yi = yi[::-1]
    x = np.concatenate(([x0], xi, [x1]))
    y = np.concatenate(([float(triangle_wave(v0, n))], yi,
                        [float(triangle_wave(v1, n))]))
    return x, y


def _min_segments_energy(x: np.ndarray, ya: np.ndarray, yb: np.ndarray,
                         p: float) -> float:
    """Energy of min(A, B) where A, B are PL with common nodes x.

    Splits each segment at the single crossing if the difference changes
    sign; on each part the winner's slope carries the |slope|^p density.
    """
    total = 0.0
    d = ya - yb
    for j in range(x.size - 1):
        ln = x[j + 1] - x[j]
        if ln <= 0.0:
            continue
        d0, d1 = d[j], d[j + 1]
        sa = (ya[j + 1] - ya[j]) / ln
        sb = (yb[j + 1] - yb[j]) / ln
        ea = abs(sa) ** p
        eb = abs(sb) ** p
        if d0 <= 0.0 and d1 <= 0.0:
            total += ea * ln
        elif d0 >= 0.0 and d1 >= 0.0:
            total += eb * ln
        else:
            t = d0 / (d0 - d1)
            la = t * ln
            if d0 < 0.0:
                total += ea * la + eb * (ln - la)
            else:
                total += eb * la + ea * (ln - la)
    return total


def folded_lid_energy(form: PLIntervalForm, f: PLFunction, lid: PLFunction,
                      n: int) -> float:
    """E(min(T_n o f, lid)) without materialising the fold.

    Pieces are classified against the fold's peak height 2^-n after
    refining the lid at its crossings of 0 and the peak:

    * lid at or above the peak: the fold wins; folding preserves |f'|, so
      the piece contributes its plain energy in the form.
    * lid at or below 0: the lid wins outright (the fold is nonnegative).
    * otherwise: a band piece; fold nodes are materialised locally and the
      pointwise min is integrated exactly.
    """
    plain, band = _folded_lid_parts(form, f, lid, n)
    return plain + band


def _folded_lid_parts(form: PLIntervalForm, f: PLFunction, lid: PLFunction,
                      n: int) -> tuple[float, float]:
    """(plain, band) split of the capped fold energy.

    The plain part integrates over {lid >= peak} and {lid <= 0}; for a
    shifted-cut lid those sets do not depend on n, so the band part is an
    upper bound for the excess over the fold limit.
    """
    p = form.p
    eps = 2.0 ** (-n)
    lx, lv = _with_level_crossings(lid, (0.0, eps))
    grid = _merge_sorted_grids(lx, f.breakpoints, form.weight_bounds)
    fv = f.evaluate(grid)
    cv = np.interp(grid, lx, lv)

    lens = np.diff(grid)
    live = lens > 0.0
    l0, l1 = cv[:-1], cv[1:]
    f0, f1 = fv[:-1], fv[1:]
    mids = 0.5 * (grid[:-1] + grid[1:])
    w = form.weight_at(mids)

    # crossing nodes reproduce the levels only up to rounding; the clip
    # arithmetic behind a shifted cut also leaves absolute residues of
    # order ulp(|a|), which dwarfs 1e-9 * eps once 2^-n nears float
    # granularity, so keep an absolute floor.  Blurring the classification
    # by 1e-14 moves at most that much energy between the plain and band
    # buckets, far below any stall tolerance in use.
    tol = 1e-9 * eps + 1e-14
    plateau = live & (np.minimum(l0, l1) >= eps - tol)
    sunk = live & (np.maximum(l0, l1) <= tol) & ~plateau
    band = live & ~plateau & ~sunk

    with np.errstate(divide="ignore", invalid="ignore"):
        fslope = np.where(live, (f1 - f0) / np.where(live, lens, 1.0), 0.0)
        lslope = np.where(live, (l1 - l0) / np.where(live, lens, 1.0), 0.0)

    plain = float(np.sum(w[plateau] * np.abs(fslope[plateau]) ** p
                         * lens[plateau]))
    plain += float(np.sum(w[sunk] * np.abs(lslope[sunk]) ** p * lens[sunk]))

    band_total = 0.0
    for i in np.nonzero(band)[0]:
        x, y = _fold_segment_nodes(grid[i], grid[i + 1],
                                   float(f0[i]), float(f1[i]), n)
        lidv = l0[i] + lslope[i] * (x - grid[i])
        band_total += w[i] * _min_segments_energy(x, y, lidv, p)
    return plain, band_total


# ---------------------------------------------------------------------------
# fold limits


def _run_levels(parts_at, reference: float,
                sched: FoldSchedule) -> ConvergenceTrace:
    """Drive a level -> (energy, band residual) callable to a stall.

    A step is quiet when the energy change is below tolerance and, if the
    evaluator reports one (band is None otherwise), the band residual is
    too; the residual bounds the remaining distance to the limit.
    """
    levels: list[int] = []
    energies: list[float] = []
    quiet_run = 0
    stalled_at = None
    for n in sched.levels:
        e, band = parts_at(n)
        e = float(e)
        levels.append(n)
        energies.append(e)
        if len(energies) >= 2:
            prev = energies[-2]
            scale = max(e, prev, reference, 1e-300)
            quiet = abs(e - prev) <= sched.rel_tol * scale
            if band is not None:
                quiet = quiet and band <= sched.rel_tol * scale
            quiet_run = quiet_run + 1 if quiet else 0
            if quiet_run >= sched.stall_count:
                stalled_at = n
                break
    return ConvergenceTrace(tuple(levels), tuple(energies),
                            stalled_at is not None, stalled_at)


def F_value(form: PLIntervalForm, f: PLFunction, g: PLFunction, a: float,
            sched: FoldSchedule = DEFAULT_SCHEDULE,
            materialized: bool = False) -> ConvergenceTrace:
    """The fold limit F_f^g(a), with its level trace.

    Runs levels n_min..n_max until the stall rule fires.  A trace that
    exhausts the budget comes back with ``converged=False``; callers that
    need a hard value decide whether to raise.  With ``materialized=True``
    the cell function is built literally at every level (cross-check path,
    exponential in n).
    """
    _require_pl(form)
    e_ref = form.energy(f)
    if materialized:
        # the literal route has no plain/band split to certify against
        def parts_at(n):
            return form.energy(cell_function(f, g, a, n)), None
    else:
        def parts_at(n):
            plain, band = _folded_lid_parts(form, f, shifted_cut(g, a, n), n)
            return plain + band, band
    return _run_levels(parts_at, e_ref, sched)


def two_sided_cut_limit(form: PLIntervalForm, f: PLFunction, g: PLFunction,
                        low: float, high: float,
                        sched: FoldSchedule = DEFAULT_SCHEDULE,
                        ) -> ConvergenceTrace:
    """Limit energy of the fold capped on both sides of a witness band.

    The cap is min(S_n^high o g, S_n^(-low) o (-g)): it opens only where
    low < g <= high, so the limit is a capacity-style upper bound for the
    measure of that slab, compared against F(high) - F(low) in tests.
    """
    _require_pl(form)
    e_ref = form.energy(f)
    neg_g = -g

    def parts_at(n):
        lid = lattice(shifted_cut(g, high, n),
                      shifted_cut(neg_g, -low, n), "min")
        plain, band = _folded_lid_parts(form, f, lid, n)
        return plain + band, band

    return _run_levels(parts_at, e_ref, sched)


def distribution(form: PLIntervalForm, f: PLFunction, g: PLFunction,
                 a_values, sched: FoldSchedule = DEFAULT_SCHEDULE,
                 ) -> DistributionSamples:
    """F_f^g along an increasing grid of levels.

    Asserts the structure the measure construction relies on: values are
    monotone nondecreasing up to the stall slack, vanish below min g, and
    reach E(f) at or above max g.  Non-convergent traces raise.
    """
    _require_pl(form)
    a_grid = np.asarray(a_values, dtype=float)
    if a_grid.ndim != 1 or a_grid.size < 1:
        raise ValueError("need a one-dimensional, nonempty level grid")
    if np.any(np.diff(a_grid) <= 0.0):
        raise ValueError("level grid must be strictly increasing")
    e_ref = form.energy(f)
    traces = []
    for a in a_grid:
        tr = F_value(form, f, g, float(a), sched)
        if not tr.converged:
            raise ConvergenceError(
                f"fold limit at level a={a:g} did not stall by "
                f"n={sched.n_max}", tr)
        traces.append(tr)
    vals = np.array([tr.final for tr in traces])

    slack = sched.rel_tol * max(e_ref, 1e-300)
    drops = np.diff(vals)
    if drops.size and float(drops.min()) < -slack:
        k = int(np.argmin(drops))
        raise AssertionError(
            f"distribution not monotone: F({a_grid[k + 1]:g}) < "
            f"F({a_grid[k]:g}) by {-drops[k]:.3e}")
    g_lo, g_hi = g.value_range()
    if a_grid[0] < g_lo and vals[0] > 4.0 * slack:
        raise AssertionError(
            f"distribution should vanish below min g: F({a_grid[0]:g}) = "
            f"{vals[0]:.3e}")
    if a_grid[-1] >= g_hi and abs(vals[-1] - e_ref) > 4.0 * slack:
        raise AssertionError(
            f"distribution should reach E(f) above max g: "
            f"F({a_grid[-1]:g}) = {vals[-1]:.6e} vs {e_ref:.6e}")
    return DistributionSamples(a_grid, vals, tuple(traces), True)


def reflection_gap(form: PLIntervalForm, f: PLFunction, g: PLFunction,
                   a: float, sched: FoldSchedule = DEFAULT_SCHEDULE,
                   shrink: float = 1e-9) -> float:
    """Signed defect of F_f^g(a) + F_f^(-g)(-a-shrink) - E(f).

    The reflected witness counts the strict superlevel set {g > a}; the
    small shrink keeps the two sublevel sets disjoint when g hits the
    level a on a set of positive measure.
    """
    _require_pl(form)
    below = F_value(form, f, g, a, sched).final
    above = F_value(form, f, -g, -a - shrink, sched).final
    return below + above - form.energy(f)


# ---------------------------------------------------------------------------
# outer measure from witness families


def canonical_witnesses(target: IntervalSet, ladder_depth: int = 10):
    """Witness pairs (g, a) with a < 0 and {g <= a} inside the target.

    Per component the distance-like hat max(lo - x, x - hi) carries a
    dyadic ladder of negative levels; components touching the domain ends
    get one-sided affine witnesses whose sublevel sets reach the boundary.
    A full-domain target gets the constant -1 at level -1/2, which is
    exact.  For several components the lattice min of the per-component
    witnesses joins them, so one level collects every component at once.
    Levels translate the sublevel sets strictly inside, so the supremum
    over the ladder approaches the measure from below.
    """
    pairs = []
    primaries = []  # (witness, level scale) with {g <= -s/2^j} in its comp
    for lo, hi, _, _ in target.components:
        width = hi - lo
        if width <= GEOM_TOL:
            continue  # no room for a nonempty strict sublevel set
        if lo <= GEOM_TOL and hi >= 1.0 - GEOM_TOL:
            pairs.append((PLFunction.constant(-1.0), -0.5))
            primaries.append((PLFunction.constant(-1.0), 1.0))
            continue
        if lo <= GEOM_TOL:
            primary = PLFunction([0.0, 1.0], [-hi, 1.0 - hi])
        elif hi >= 1.0 - GEOM_TOL:
            primary = PLFunction([0.0, 1.0], [lo, lo - 1.0])
        else:
            mid = 0.5 * (lo + hi)
            primary = PLFunction([0.0, mid, 1.0],
                                 [lo, -0.5 * width, 1.0 - hi])
        primaries.append((primary, 0.5 * width))
        for j in range(1, ladder_depth + 1):
            pairs.append((primary, -0.5 * width * 2.0 ** (-j)))
    if len(primaries) > 1:
        joint = primaries[0][0]
        for g, _ in primaries[1:]:
            joint = lattice(joint, g, "min")
        scale = min(s for _, s in primaries)
        for j in range(1, ladder_depth + 1):
            pairs.append((joint, -scale * 2.0 ** (-j)))
    return pairs


def outer_measure_lb(form: PLIntervalForm, f: PLFunction,
                     target: IntervalSet, family=None,
                     sched: FoldSchedule = DEFAULT_SCHEDULE) -> float:
    """Lower bound sup F_f^g(a) over admissible witnesses for the target.

    Admissible means a < 0 and {g <= a} contained in the target; other
    pairs are skipped with a warning.  Raises when nothing is admissible.
    """
    _require_pl(form)
    if family is None:
        family = canonical_witnesses(target)
    best = None
    for g, a in family:
        if not a < 0.0:
            warnings.warn(
                f"witness level a={a:g} is not negative; skipped",
                InadmissibleWitnessWarning, stacklevel=2)
            continue
        if not sublevel_set(g, a).issubset(target):
            warnings.warn(
                f"sublevel set at a={a:g} escapes the target; skipped",
                InadmissibleWitnessWarning, stacklevel=2)
            continue
        val = F_value(form, f, g, a, sched).final
        if best is None or val > best:
            best = val
    if best is None:
        raise EmptyFamilyError(
            "no admissible witness pair for the target set")
    return float(best)


# ---------------------------------------------------------------------------
# the energy measure


class EnergyMeasure:
    """A measure on [0, 1] with piecewise-constant density.

    Stored as cell masses over a strictly increasing node grid.  Cells are
    taken left-closed; single points carry no mass, so endpoint closure
    flags of queried interval sets are ignored.
    """

    __slots__ = ("nodes", "masses", "levels_used", "converged")

    def __init__(self, nodes, masses, levels_used=(), converged=True):
        nodes = np.asarray(nodes, dtype=float)
        masses = np.asarray(masses, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("need at least two nodes")
        if masses.shape != (nodes.size - 1,):
            raise ValueError("need one mass per cell")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("nodes must be strictly increasing")
        self.nodes = nodes
        self.masses = masses
        self.levels_used = tuple(levels_used)
        self.converged = bool(converged)

    @property
    def density(self) -> np.ndarray:
        return self.masses / np.diff(self.nodes)

    def total_mass(self) -> float:
        return float(self.masses.sum())

    def measure(self, target) -> float:
        """Mass of an IntervalSet (or a single (lo, hi) pair).

        Cells are prorated by overlap, exact for targets whose endpoints
        lie on the node grid and for any target once the density is
        constant on the straddled cells.
        """
        if isinstance(target, IntervalSet):
            comps = [(lo, hi) for lo, hi, _, _ in target.components]
        else:
            comps = [tuple(target)]
        dens = self.density
        total = 0.0
        for lo, hi in comps:
            left = np.maximum(self.nodes[:-1], lo)
            right = np.minimum(self.nodes[1:], hi)
            overlap = np.clip(right - left, 0.0, None)
            total += float(np.dot(dens, overlap))
        return total

    def cells(self):
        return zip(self.nodes[:-1], self.nodes[1:], self.density)

    def to_rows(self):
        """(cell_lo, cell_hi, density) rows for dumps."""
        return [(float(lo), float(hi), float(d)) for lo, hi, d in self.cells()]

    def __repr__(self):
        return (f"EnergyMeasure({self.nodes.size - 1} cells, "
                f"mass {self.total_mass():.6g})")


class _IdentityWitnessEvaluator:
    """Batched E(min(T_n o f, S_n^a o id)) over a whole grid of levels a.

    For the identity witness the cap is the fixed ramp a + 2^-n - x clipped
    to [0, 2^-n], so the band is the single x-interval [a, a + 2^-n].  The
    plateau part is read off the cumulative energy of f exactly; the band
    is evaluated with the vectorised winner logic below whenever it sits
    inside one f-piece and one weight cell with moderate slope, and falls
    back to the general evaluator otherwise.
    """

    # band node columns: entry ramp node, up to _MAX_INNER lattice
    # crossings (|slope| <= _SLOPE_CAP over a width-eps band), exit node
    _SLOPE_CAP = 6.0
    _MAX_INNER = 8

    def __init__(self, form: PLIntervalForm, f: PLFunction):
        self.form = form
        self.f = f
        self.p = form.p
        self.nodes, self.cum = form.cumulative_energy(f)
        self.e_ref = float(self.cum[-1])
        self.bx = f.breakpoints
        self.by = f.values
        self.slopes = f.slopes
        self.wb = form.weight_bounds
        self.wv = form.weight_values
        self.ident = PLFunction.identity()

    def energies(self, a_vec: np.ndarray, n: int
                 ) -> tuple[np.ndarray, np.ndarray]:
        """(energy, band residual) per grid level; plain part is exact."""
        eps = 2.0 ** (-n)
        plateau = np.interp(a_vec, self.nodes, self.cum)
        bands = np.zeros_like(plateau)
        b_vec = np.minimum(a_vec + eps, 1.0)
        blen = b_vec - a_vec
        active = blen > 0.0
        if not np.any(active):
            return plateau.copy(), bands

        piece = np.clip(np.searchsorted(self.bx, a_vec, side="right") - 1,
                        0, self.slopes.size - 1)
        wcell = np.clip(np.searchsorted(self.wb, a_vec, side="right") - 1,
                        0, self.wv.size - 1)
        one_piece = self.bx[piece + 1] >= b_vec
        one_wcell = self.wb[wcell + 1] >= b_vec
        slope = self.slopes[piece]
        fast = (active & one_piece & one_wcell
                & (np.abs(slope) <= self._SLOPE_CAP))
        slow = active & ~fast

        idx = np.nonzero(fast)[0]
        if idx.size:
            bands[idx] = self._band_fast(
                a_vec[idx], b_vec[idx], blen[idx], slope[idx],
                self.by[piece[idx]] + slope[idx] * (a_vec[idx]
                                                    - self.bx[piece[idx]]),
                self.wv[wcell[idx]], eps, n)
        energies = plateau + bands
        for i in np.nonzero(slow)[0]:
            lid = shifted_cut(self.ident, float(a_vec[i]), n)
            plain, band = _folded_lid_parts(self.form, self.f, lid, n)
            energies[i] = plain + band
            bands[i] = band
        return energies, bands

    def _band_fast(self, a, b, blen, s, v0, w, eps, n):
        """Band energies when f is a single affine piece across the band."""
        p = self.p
        rows = a.size
        cols = self._MAX_INNER + 2
        v1 = v0 + s * blen
        lo = np.minimum(v0, v1)
        hi = np.maximum(v0, v1)
        kmin = np.floor(lo / eps).astype(np.int64) + 1
        kmax = np.ceil(hi / eps).astype(np.int64) - 1
        count = np.maximum(kmax - kmin + 1, 0)

        x = np.repeat(b[:, None], cols, axis=1)
        y = np.repeat(triangle_wave(v1, n)[:, None], cols, axis=1)
        x[:, 0] = a
        y[:, 0] = triangle_wave(v0, n)
        with np.errstate(divide="ignore", invalid="ignore"):
            sdiv = np.where(s != 0.0, s, 1.0)
            for j in range(self._MAX_INNER):
                use = j < count
                kk = np.where(s > 0.0, kmin + j, kmax - j)
                xj = a + (kk * eps - v0) / sdiv
                x[:, j + 1] = np.where(use, xj, x[:, j + 1])
                y[:, j + 1] = np.where(use, eps * (kk % 2), y[:, j + 1])

        # the cap is the ramp a + eps - x, slope exactly -1
        lid = (a[:, None] + eps) - x
        d = y - lid
        out = np.zeros(rows)
        for j in range(cols - 1):
            ln = x[:, j + 1] - x[:, j]
            valid = ln > 0.0
            with np.errstate(divide="ignore", invalid="ignore"):
                st = np.where(valid, (y[:, j + 1] - y[:, j])
                              / np.where(valid, ln, 1.0), 0.0)
            ea = np.abs(st) ** p
            d0 = d[:, j]
            d1 = d[:, j + 1]
            fold_wins = (d0 <= 0.0) & (d1 <= 0.0)
            lid_wins = (d0 >= 0.0) & (d1 >= 0.0) & ~fold_wins
            crossing = ~(fold_wins | lid_wins)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(crossing, d0 / np.where(crossing, d0 - d1, 1.0),
                             0.0)
            la = t * ln
            seg = np.where(
                fold_wins, ea * ln,
                np.where(lid_wins, ln,
                         np.where(d0 < 0.0, ea * la + (ln - la),
                                  la + ea * (ln - la))))
            out += np.where(valid, seg, 0.0)
        return w * out


def _stalled_distribution(form: PLIntervalForm, f: PLFunction, a_vec,
                          sched: FoldSchedule,
                          safety: float = 0.25) -> tuple[np.ndarray, list]:
    """Batched identity-witness limits F_f^id(a) over the thresholds a_vec.

    Runs every point through the levels together and stops once each has
    stayed quiet (small observed delta AND small residual band energy) for
    stall_count consecutive levels; ``safety`` shrinks the per-point
    tolerance below sched.rel_tol.  Returns (values, levels_run) with
    values the running minimum over levels.  Raises ConvergenceError on
    budget exhaustion; a zero-energy f yields zeros and no levels.
    """
    a_vec = np.asarray(a_vec, dtype=float)
    ev = _IdentityWitnessEvaluator(form, f)
    e_ref = ev.e_ref
    if e_ref == 0.0:
        return np.zeros(a_vec.size), []

    quiet_tol = safety * sched.rel_tol
    history = []
    quiet_run = np.zeros(a_vec.size, dtype=int)
    levels_run = []
    stalled = False
    for n in sched.levels:
        vals, bands = ev.energies(a_vec, n)
        history.append(vals)
        levels_run.append(n)
        if len(history) >= 2:
            prev = history[-2]
            scale = np.maximum(np.maximum(vals, prev), e_ref)
            quiet = ((np.abs(vals - prev) <= quiet_tol * scale)
                     & (bands <= quiet_tol * scale))
            quiet_run = np.where(quiet, quiet_run + 1, 0)
            if np.all(quiet_run >= sched.stall_count):
                stalled = True
                break
    if not stalled:
        worst = int(np.argmin(quiet_run))
        raise ConvergenceError(
            f"fold limits did not stall by n={sched.n_max}; slowest "
            f"threshold a={a_vec[worst]:g}")
    return np.minimum.reduce(history), levels_run


def _density_grid(form: PLIntervalForm, f: PLFunction,
                  resolution: int) -> np.ndarray:
    """Thresholds for differencing: uniform points plus the density cells.

    w |f'|^p is constant between consecutive breakpoints of f and weight
    bounds, so those points enter verbatim; a uniform point within a
    quarter cell of one is dropped rather than kept as a near-duplicate,
    which would divide schedule-level mass error by a sliver width.
    """
    fixed = np.unique(np.concatenate((f.breakpoints, form.weight_bounds)))
    uniform = np.arange(resolution + 1, dtype=float) / resolution
    pos = np.searchsorted(fixed, uniform)
    left = uniform - fixed[np.clip(pos - 1, 0, fixed.size - 1)]
    right = fixed[np.clip(pos, 0, fixed.size - 1)] - uniform
    near = np.minimum(np.abs(left), np.abs(right)) < 0.25 / resolution
    return np.unique(np.concatenate((fixed, uniform[~near])))


def energy_measure(form: PLIntervalForm, f: PLFunction, resolution: int = 512,
                   sched: FoldSchedule = MEASURE_SCHEDULE) -> EnergyMeasure:
    """The energy measure of f, by differencing identity-witness limits.

    Evaluates F_f^id on the uniform grid k/resolution refined by f's
    breakpoints and the weight bounds (the density is constant between
    those, so the differenced masses recover it exactly), running all grid
    points through the levels together and stopping once every point has
    stalled (with a 1/4 safety factor on the per-point tolerance so the
    residual band energy stays within the slack granted to cell masses).
    The differences form the cell masses; dips below -rel_tol * E(f) and a
    total-mass mismatch beyond rel_tol raise, a budget exhaustion raises
    ConvergenceError.
    """
    _require_pl(form)
    if resolution < 1:
        raise ValueError("resolution must be at least 1")
    a_grid = _density_grid(form, f, resolution)
    e_ref = form.energy(f)
    if e_ref == 0.0:
        return EnergyMeasure(a_grid, np.zeros(a_grid.size - 1), (), True)

    dist, levels_run = _stalled_distribution(form, f, a_grid, sched)
    masses = np.diff(dist)
    slack = sched.rel_tol * e_ref
    if float(masses.min()) < -slack:
        k = int(np.argmin(masses))
        raise AssertionError(
            f"negative cell mass {masses[k]:.3e} on "
            f"[{a_grid[k]:g}, {a_grid[k + 1]:g}] beyond slack {slack:.1e}")
    total = float(masses.sum())
    if abs(total - e_ref) > slack:
        raise AssertionError(
            f"total mass {total:.9e} vs energy {e_ref:.9e} beyond "
            f"slack {slack:.1e}")
    return EnergyMeasure(a_grid, masses, tuple(levels_run), True)


def reference_measure(form: PLIntervalForm, f: PLFunction) -> EnergyMeasure:
    """The exact measure with density w |f'|^p, bypassing the fold limit."""
    _require_pl(form)
    grid, dens = form.density_cells(f)
    return EnergyMeasure(grid, dens * np.diff(grid), (), True)


def covering_check(form: PLIntervalForm, f: PLFunction, g: PLFunction,
                   a: float, cover,
                   sched: FoldSchedule = DEFAULT_SCHEDULE) -> CoveringReport:
    """Subadditivity of fold limits across a covering of {g <= a}.

    ``cover`` is an iterable of (h, b) pairs; their sublevel sets must
    jointly contain {g <= a} (checked exactly, hypothesis failure raises).
    Reports the slack sum_i F_f^h_i(b_i) - F_f^g(a), nonnegative up to
    rel_tol * E(f).
    """
    _require_pl(form)
    cover = list(cover)
    if not cover:
        raise CoverHypothesisError("empty cover")
    covered = sublevel_set(g, a)
    covering = IntervalSet.empty()
    for h, b in cover:
        covering = covering.union(sublevel_set(h, b))
    if not covered.issubset(covering):
        raise CoverHypothesisError(
            f"cover misses part of the sublevel set: {covered} is not "
            f"inside {covering}")
    base = F_value(form, f, g, a, sched)
    parts = [F_value(form, f, h, b, sched) for h, b in cover]
    lhs = base.final
    rhs = tuple(tr.final for tr in parts)
    converged = base.converged and all(tr.converged for tr in parts)
    return CoveringReport(lhs, rhs, float(sum(rhs) - lhs),
                          sched.rel_tol * form.energy(f), converged)
