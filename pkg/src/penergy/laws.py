"""Set-level laws of energy measures, checked on seeded samples.

Each law_* function draws its own fixtures, evaluates both sides of an
identity or inequality on a family of interval sets, and returns a LawReport
whose worst slack is a signed margin: negative means violation, and the
report passes iff the worst slack stays above -tolerance.  Equality laws use
slack = -gap (never positive); laws whose per-trial budget varies (product or
power interpolants) rescale the gap so a single tolerance line applies to the
whole report, with the budget recorded in the worst-case witness.

Masses flow through two routes.  The oracle route integrates the closed-form
density w |f'|^p exactly and is the reference; its slacks sit at roundoff.
The construction route differences identity-witness fold limits at component
endpoints, so its error budget comes from the level schedule alone, with no
proration involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .construction import (
    ConvergenceError,
    FoldSchedule,
    MEASURE_SCHEDULE,
    F_value,
    _require_pl,
    _stalled_distribution,
)
from .forms import PLIntervalForm, _clarkson_slacks, _signed_power
from .pl import (
    GEOM_TOL,
    IntervalSet,
    PLFunction,
    PLMap,
    _merge_sorted_grids,
    _with_level_crossings,
    compose,
    lattice,
    pl_power_interp,
    pl_product,
    sublevel_set,
)
from .sampler import PLSampler

# Tolerance ladder: closed-form identities are exact up to roundoff, the
# construction route is dominated by fold truncation, and differentiation
# pays for its step sizes.  Steps halve so order-2 Richardson applies.
ORACLE_TOL = 1e-9
CONSTRUCTION_TOL = 1e-4
DERIVATIVE_TOL = 1e-3
DERIVATIVE_STEPS = (1e-2, 5e-3, 2.5e-3)

# Atom probing differences four fold limits whose individual errors are
# bounded by the stall rule's band residual, rel_tol * E each; the second
# difference weights them 2+2+1+1, so 6e-9 of noise against an 1e-8 line.
# Levels below 30 can never be quiet at this tolerance, so skip them.
ATOM_TOL = 1e-8
ATOM_SCHEDULE = FoldSchedule(n_min=30, n_max=40, rel_tol=1e-9)

# p in (1, 2) makes |u'|^{p-2} blow up near flat pieces; derivative checks
# there use slope-floored samples and a wider budget.
SLOPE_FLOOR = 0.05


def _derivative_tol(p: float) -> float:
    return DERIVATIVE_TOL if p >= 2.0 else 1e-2


class ExtrapolationError(RuntimeError):
    """Richardson extrapolants disagree more than the raw differences."""


@dataclass(frozen=True)
class LawReport:
    """Outcome of one law over its sampled trials."""

    law: str
    form: dict
    seed: int
    trials: int
    worst_slack: float
    tolerance: float
    passed: bool
    worst_case: dict | None = None

    def __post_init__(self):
        if self.passed != (self.worst_slack >= -self.tolerance):
            raise ValueError("pass flag inconsistent with worst slack")


@dataclass(frozen=True)
class SignedMeasureSample:
    """nu_{u;v} on a set family by differentiation, closed form alongside."""

    sets: tuple
    values: np.ndarray
    closed_form: np.ndarray
    steps: tuple
    extrapolation_error: np.ndarray

    @property
    def mismatch(self) -> np.ndarray:
        return np.abs(self.values - self.closed_form)


class _Worst:
    """Running minimum of slacks plus the witness of where it happened."""

    def __init__(self):
        self.slack = math.inf
        self.case = None

    def push(self, slack: float, **case):
        if slack < self.slack:
            self.slack = float(slack)
            self.case = case or None

    @property
    def value(self) -> float:
        return 0.0 if self.slack is math.inf else self.slack


def _report(law: str, form, seed: int, trials: int, worst: _Worst,
            tol: float) -> LawReport:
    return LawReport(law, form.to_descriptor(), int(seed), int(trials),
                     worst.value, float(tol), worst.value >= -tol, worst.case)


# ---------------------------------------------------------------------------
# set families and mass routes


def dyadic_sets(levels: int = 5) -> tuple[IntervalSet, ...]:
    """All dyadic intervals [k/2^j, (k+1)/2^j] for j = 0..levels."""
    out = []
    for lev in range(levels + 1):
        m = 2 ** lev
        out.extend(IntervalSet.closed(k / m, (k + 1) / m) for k in range(m))
    return tuple(out)


def default_set_family(sampler: PLSampler, levels: int = 5,
                       unions: int = 8) -> tuple[IntervalSet, ...]:
    """Dyadic intervals of levels 0..levels plus seeded interval unions."""
    extra = tuple(sampler.interval_union(1000 + i) for i in range(unions))
    return dyadic_sets(levels) + extra


def _components(target) -> list[tuple[float, float]]:
    """Component intervals of an IntervalSet (or bare pair), clipped to [0,1]."""
    if isinstance(target, IntervalSet):
        raw = [(lo, hi) for lo, hi, _, _ in target.components]
    else:
        lo, hi = target
        raw = [(float(lo), float(hi))]
    out = []
    for lo, hi in raw:
        lo, hi = max(lo, 0.0), min(hi, 1.0)
        if hi > lo:
            out.append((lo, hi))
    return out


def set_mass_oracle(form: PLIntervalForm, f: PLFunction, target) -> float:
    """Exact mu_f(target) by integrating the closed-form density."""
    return float(sum(form.energy_between(f, lo, hi)
                     for lo, hi in _components(target)))


def set_masses(form: PLIntervalForm, f: PLFunction, targets,
               sched: FoldSchedule = MEASURE_SCHEDULE) -> np.ndarray:
    """Construction-route masses mu_f(A) for each target, via fold limits.

    All component endpoints go through one batched level run; the mass of a
    set is the sum of F(hi) - F(lo) over its components, so the error budget
    is per endpoint and no cell proration enters.
    """
    _require_pl(form)
    comps = [_components(t) for t in targets]
    points = sorted({e for cs in comps for c in cs for e in c})
    out = np.zeros(len(comps))
    if not points:
        return out
    vals, _ = _stalled_distribution(form, f, np.array(points), sched)
    lookup = {e: i for i, e in enumerate(points)}
    for i, cs in enumerate(comps):
        out[i] = sum(vals[lookup[hi]] - vals[lookup[lo]] for lo, hi in cs)
    return out


def _masses(form, f, sets, route: str,
            sched: FoldSchedule = MEASURE_SCHEDULE) -> np.ndarray:
    if route == "oracle":
        return np.array([set_mass_oracle(form, f, A) for A in sets])
    if route == "construction":
        return set_masses(form, f, sets, sched)
    raise ValueError(f"unknown mass route {route!r}")


def _route_tol(route: str) -> float:
    return ORACLE_TOL if route == "oracle" else CONSTRUCTION_TOL


# ---------------------------------------------------------------------------
# exact pairings (the closed forms every identity is checked against)


def signed_mass_oracle(form: PLIntervalForm, u: PLFunction, v: PLFunction,
                       target) -> float:
    """Exact nu_{u;v}(target) = int_target w sgn(u')|u'|^{p-1} v' dx."""
    grid = _merge_sorted_grids(u.breakpoints, v.breakpoints,
                               form.weight_bounds)
    ln = np.diff(grid)
    du = np.diff(u.evaluate(grid)) / ln
    dv = np.diff(v.evaluate(grid)) / ln
    w = form.weight_at(0.5 * (grid[:-1] + grid[1:]))
    dens = w * _signed_power(du, form.p - 1.0) * dv
    total = 0.0
    for lo, hi in _components(target):
        overlap = np.clip(np.minimum(grid[1:], hi)
                          - np.maximum(grid[:-1], lo), 0.0, None)
        total += float(np.sum(dens * overlap))
    return total


def _pairing(form: PLIntervalForm, f: PLFunction, terms,
             target=None) -> float:
    """Exact int_target w sgn(f')|f'|^{p-1} sum_i g_i h_i' dx.

    Each (g_i, h_i) contributes g_i * h_i'; with component endpoints merged
    into the grid the integrand is linear per piece, so the midpoint rule is
    exact.  ``target=None`` integrates over the whole domain.
    """
    grids = [f.breakpoints, form.weight_bounds]
    for g, h in terms:
        grids.extend((g.breakpoints, h.breakpoints))
    base = _merge_sorted_grids(*grids)
    total = 0.0
    comps = [(0.0, 1.0)] if target is None else _components(target)
    for lo, hi in comps:
        inside = base[(base > lo + GEOM_TOL) & (base < hi - GEOM_TOL)]
        grid = np.concatenate(([lo], inside, [hi]))
        ln = np.diff(grid)
        mid = 0.5 * (grid[:-1] + grid[1:])
        sp = _signed_power(np.diff(f.evaluate(grid)) / ln, form.p - 1.0)
        acc = np.zeros_like(mid)
        for g, h in terms:
            acc += g.evaluate(mid) * (np.diff(h.evaluate(grid)) / ln)
        total += float(np.sum(form.weight_at(mid) * sp * acc * ln))
    return total


def _density_pairing(form: PLIntervalForm, f: PLFunction, g: PLFunction,
                     target=None) -> float:
    """Exact int_target g dmu_f = int w |f'|^p g dx (midpoint rule, exact)."""
    base = _merge_sorted_grids(f.breakpoints, g.breakpoints,
                               form.weight_bounds)
    comps = [(0.0, 1.0)] if target is None else _components(target)
    total = 0.0
    for lo, hi in comps:
        inside = base[(base > lo + GEOM_TOL) & (base < hi - GEOM_TOL)]
        grid = np.concatenate(([lo], inside, [hi]))
        ln = np.diff(grid)
        mid = 0.5 * (grid[:-1] + grid[1:])
        slopes = np.diff(f.evaluate(grid)) / ln
        total += float(np.sum(form.weight_at(mid) * np.abs(slopes) ** form.p
                              * g.evaluate(mid) * ln))
    return total


# ---------------------------------------------------------------------------
# two-variable measure by differentiation


def two_variable_measure(form: PLIntervalForm, u: PLFunction, v: PLFunction,
                         sets, steps=DERIVATIVE_STEPS, route: str = "oracle",
                         sched: FoldSchedule = MEASURE_SCHEDULE
                         ) -> SignedMeasureSample:
    """nu_{u;v} on a set family by Richardson-extrapolated differences.

    D(t) = (mu_{u+tv}(A) - mu_{u-tv}(A)) / (2 p t) per step, then successive
    order-2 eliminations; the error estimate per set is the spread of the
    last two extrapolants.  The closed form int_A w sgn(u')|u'|^{p-1} v' dx
    rides along in ``closed_form`` for cross-checks.  Raises
    ExtrapolationError when extrapolants disagree beyond the raw deltas.
    """
    _require_pl(form)
    steps = tuple(float(t) for t in steps)
    if len(steps) < 2 or any(t <= 0.0 for t in steps) \
            or any(b >= a for a, b in zip(steps, steps[1:])):
        raise ValueError("need >= 2 positive, strictly decreasing steps")
    sets = tuple(sets)
    p = form.p
    rows = []
    for t in steps:
        plus = _masses(form, u + v * t, sets, route, sched)
        minus = _masses(form, u + v * (-t), sets, route, sched)
        rows.append((plus - minus) / (2.0 * p * t))
    d = np.vstack(rows)
    rich = []
    for i in range(len(steps) - 1):
        t1, t2 = steps[i], steps[i + 1]
        rich.append((d[i + 1] * t1 ** 2 - d[i] * t2 ** 2) / (t1 ** 2 - t2 ** 2))
    values = rich[-1]
    err = np.abs(rich[-1] - rich[-2]) if len(rich) >= 2 \
        else np.abs(rich[-1] - d[-1])
    closed = np.array([signed_mass_oracle(form, u, v, A) for A in sets])

    e_scale = max(form.energy(u) + form.energy(v), 1e-12)
    floor = 1e-12 * e_scale if route == "oracle" \
        else sched.rel_tol * e_scale / (p * steps[-1])
    raw = np.abs(d[-1] - d[-2])
    bad = err > 4.0 * raw + 16.0 * floor
    if np.any(bad):
        k = int(np.argmax(err - 4.0 * raw))
        raise ExtrapolationError(
            f"extrapolants spread {err[k]:.3e} on set {k} exceeds the raw "
            f"difference budget {4.0 * raw[k] + 16.0 * floor:.3e}")
    return SignedMeasureSample(sets, values, closed, steps, err)


# ---------------------------------------------------------------------------
# the laws


def law_total_mass(form: PLIntervalForm, sampler: PLSampler, trials: int = 24,
                   route: str = "oracle",
                   sched: FoldSchedule = MEASURE_SCHEDULE) -> LawReport:
    """mu_f(X) = E(f), and mu_f vanishes on the interior of {f = 0}.

    Sampled draws rarely hit exact zeros, so each trial also checks a
    plateaued variant (f - median)^+ whose zero set has genuine interior.
    """
    _require_pl(form)
    worst = _Worst()
    full = IntervalSet.full()
    for k in range(trials):
        f = sampler.pl(k)
        for name, fn in (("as_drawn", f), ("plateaued", _positive_part(f))):
            e = form.energy(fn)
            scale = e if e > 0.0 else 1.0
            total = _masses(form, fn, (full,), route, sched)[0]
            worst.push(-abs(total - e) / scale, trial=k, variant=name,
                       check="total_mass")
            zero = _flat_zero_interior(fn)
            if zero:
                mass = _masses(form, fn, (zero,), route, sched)[0]
                worst.push(-abs(mass) / scale, trial=k, variant=name,
                           check="zero_interior")
    return _report("total_mass", form, sampler.seed, trials, worst,
                   _route_tol(route))


def _positive_part(f: PLFunction) -> PLFunction:
    """(f - median value)^+, which is exactly zero on a fat sublevel set."""
    med = float(np.median(f.values))
    return lattice(f - med, PLFunction.constant(0.0), "max")


def _flat_zero_interior(f: PLFunction) -> IntervalSet:
    """The interior of {f = 0}: the union of pieces identically zero."""
    x, y = f.breakpoints, f.values
    flat = (y[:-1] == 0.0) & (y[1:] == 0.0)
    idx = np.nonzero(flat)[0]
    if idx.size == 0:
        return IntervalSet.empty()
    return IntervalSet.from_pairs((x[i], x[i + 1]) for i in idx)


def law_homogeneity_shift(form: PLIntervalForm, sampler: PLSampler,
                          trials: int = 16, route: str = "oracle", sets=None,
                          sched: FoldSchedule = MEASURE_SCHEDULE) -> LawReport:
    """mu_{af} = |a|^p mu_f and mu_{|f-a|-|a|} = mu_f on the set family."""
    _require_pl(form)
    sets = default_set_family(sampler) if sets is None else tuple(sets)
    p = form.p
    worst = _Worst()
    for k in range(trials):
        f = sampler.pl(k)
        e = form.energy(f)
        if e == 0.0:
            continue
        rng = sampler._rng(k, tag=11)
        a = float(rng.uniform(0.25, 3.0)) * (1.0 if rng.uniform() < 0.5
                                             else -1.0)
        base = _masses(form, f, sets, route, sched)
        scaled = _masses(form, f * a, sets, route, sched)
        gap = np.abs(scaled - abs(a) ** p * base)
        i = int(np.argmax(gap))
        worst.push(-float(gap[i]) / (abs(a) ** p * e), trial=k,
                   identity="scaling", a=a, set=i)
        for tag, s in (("random", float(rng.uniform(-1.0, 1.0))),
                       ("at_max", float(f.values.max()))):
            shifted = _masses(form, _reflected_abs(f, s), sets, route, sched)
            gap = np.abs(shifted - base)
            i = int(np.argmax(gap))
            worst.push(-float(gap[i]) / e, trial=k, identity="shift",
                       shift=tag, set=i)
    return _report("homogeneity_shift", form, sampler.seed, trials, worst,
                   _route_tol(route))


def _reflected_abs(f: PLFunction, s: float) -> PLFunction:
    """|f - s| - |s|, energy-measure preserving for every real s."""
    h = f - s
    lo, hi = h.value_range()
    if hi - lo <= GEOM_TOL:
        return PLFunction(f.breakpoints,
                          np.full(f.values.size, abs(lo) - abs(s)))
    return compose(PLMap.absolute(lo, hi), h) - abs(s)


def law_measure_clarkson(form: PLIntervalForm, sampler: PLSampler,
                         trials: int = 40, route: str = "oracle", sets=None,
                         sched: FoldSchedule = MEASURE_SCHEDULE) -> LawReport:
    """Clarkson inequalities for mu(A)^{1/p} over pairs and the set family.

    Slacks are normalised by the pair's total energy (the p-power scale), so
    sets of tiny mass do not amplify schedule noise.
    """
    _require_pl(form)
    sets = default_set_family(sampler) if sets is None else tuple(sets)
    p = form.p
    worst = _Worst()
    for k in range(trials):
        u, v = sampler.pl_pair(k)
        scale = max(form.energy(u) + form.energy(v), 1e-12)
        # schedule noise can leave a mass a hair below zero; clip before ^1/p
        mu = [np.maximum(_masses(form, fn, sets, route, sched), 0.0)
              ** (1.0 / p)
              for fn in (u, v, u + v, u - v)]
        for i in range(len(sets)):
            slacks = _clarkson_slacks(p, mu[0][i], mu[1][i], mu[2][i],
                                      mu[3][i])
            for name, s in slacks.items():
                worst.push(s / scale, trial=k, set=i, inequality=name)
    return _report("measure_clarkson", form, sampler.seed, trials, worst,
                   _route_tol(route))


def law_measure_triangle(form: PLIntervalForm, sampler: PLSampler,
                         trials: int = 40, route: str = "oracle", sets=None,
                         sched: FoldSchedule = MEASURE_SCHEDULE) -> LawReport:
    """mu_{f+g}(A)^{1/p} <= mu_f(A)^{1/p} + mu_g(A)^{1/p} on the family."""
    _require_pl(form)
    sets = default_set_family(sampler) if sets is None else tuple(sets)
    invp = 1.0 / form.p
    worst = _Worst()
    for k in range(trials):
        u, v = sampler.pl_pair(k)
        scale = max(form.energy(u) ** invp + form.energy(v) ** invp, 1e-9)
        su, sv, ssum = (np.maximum(_masses(form, fn, sets, route, sched),
                                   0.0) ** invp for fn in (u, v, u + v))
        margin = su + sv - ssum
        i = int(np.argmin(margin))
        worst.push(float(margin[i]) / scale, trial=k, set=i)
    return _report("measure_triangle", form, sampler.seed, trials, worst,
                   _route_tol(route))


def law_locality(form: PLIntervalForm, sampler: PLSampler, trials: int = 32,
                 route: str = "oracle",
                 sched: FoldSchedule = MEASURE_SCHEDULE) -> LawReport:
    """Pairs equal up to a constant on A have equal masses on A.

    Each trial draws A and f, then g = f + h with h constant on A and a
    wiggle confined to the widest gap of the complement.  The construction
    route runs at tolerance 1e-6 relative to E(f) + E(g): endpoint limits
    carry schedule-level error only, well under that line.
    """
    _require_pl(form)
    tol = ORACLE_TOL if route == "oracle" else 1e-6
    worst = _Worst()
    for k in range(trials):
        A = sampler.interval_union(4000 + k)
        f = sampler.pl(k)
        rng = sampler._rng(k, tag=12)
        h = _gap_bump(A, float(rng.uniform(-1.5, 1.5)),
                      float(rng.uniform(0.5, 2.0)))
        g = f + h
        m_f = _masses(form, f, (A,), route, sched)[0]
        m_g = _masses(form, g, (A,), route, sched)[0]
        scale = max(form.energy(f) + form.energy(g), 1e-12)
        worst.push(-abs(m_f - m_g) / scale, trial=k,
                   set_measure=A.measure())
    return _report("locality", form, sampler.seed, trials, worst, tol)


def _gap_bump(A: IntervalSet, c: float, amp: float) -> PLFunction:
    """Constant c everywhere except a PL wiggle inside the widest gap of A."""
    gaps = []
    prev = 0.0
    for lo, hi, _, _ in A.components:
        if lo > prev + 1e-9:
            gaps.append((prev, lo))
        prev = max(prev, hi)
    if prev < 1.0 - 1e-9:
        gaps.append((prev, 1.0))
    if not gaps:
        return PLFunction.constant(c)
    lo, hi = max(gaps, key=lambda g: g[1] - g[0])
    w = hi - lo
    if w < 0.02:
        return PLFunction.constant(c)
    xs = [0.0, lo, lo + 0.35 * w, lo + 0.7 * w, hi, 1.0]
    ys = [c, c, c + amp, c - 0.5 * amp, c, c]
    return PLFunction(xs, ys)


def law_minmax_bound(form: PLIntervalForm, sampler: PLSampler,
                     trials: int = 32, route: str = "oracle", sets=None,
                     sched: FoldSchedule = MEASURE_SCHEDULE) -> LawReport:
    """mu of f v (g-a) and f ^ (g+a) stay within c_p (mu_f + mu_g) setwise."""
    _require_pl(form)
    sets = default_set_family(sampler) if sets is None else tuple(sets)
    c_p = 2.0 ** abs(form.p - 2.0)
    worst = _Worst()
    for k in range(trials):
        f, g = sampler.pl_pair(k)
        a = float(sampler._rng(k, tag=13).uniform(0.0, 1.5))
        top = lattice(f, g - a, "max")
        bot = lattice(f, g + a, "min")
        mf, mg, mt, mb = (_masses(form, fn, sets, route, sched)
                          for fn in (f, g, top, bot))
        scale = max(form.energy(f) + form.energy(g), 1e-12)
        margin = c_p * (mf + mg) - np.maximum(mt, mb)
        i = int(np.argmin(margin))
        worst.push(float(margin[i]) / scale, trial=k, set=i, a=a)
    return _report("minmax_bound", form, sampler.seed, trials, worst,
                   _route_tol(route))


# ---------------------------------------------------------------------------
# chain rule


def default_map_family(lo: float, hi: float) -> tuple[PLMap, ...]:
    """Ten piecewise-affine maps on [lo, hi]: scalings, |.|, folds, cuts."""
    span = hi - lo
    zig_x = [lo, lo + 0.3 * span, lo + 0.55 * span, lo + 0.8 * span, hi]
    zig_y = [0.0, 0.6 * span, 0.6 * span, 0.2 * span, 0.45 * span]
    return (
        PLMap.identity(lo, hi),
        PLMap.scaling(2.0, lo, hi),
        PLMap.scaling(-1.5, lo, hi),
        PLMap.scaling(0.5, lo, hi),
        PLMap.absolute(lo, hi),
        PLMap.triangle(2, lo, hi),
        PLMap.triangle(3, lo, hi),
        PLMap.cut_map(lo + 0.25 * span, lo + 0.75 * span, lo, hi),
        PLMap.cut_map(lo + 0.1 * span, lo + 0.45 * span, lo, hi),
        PLMap(zig_x, zig_y),
    )


def _chain_cells(form, f, phi):
    """Cell partition on which both f and phi o f are affine."""
    grid, _ = _with_level_crossings(f, phi.breakpoints[1:-1])
    return _merge_sorted_grids(grid, form.weight_bounds)


def _cell_masses(form, fn, cells, route, sched):
    if route == "oracle":
        ln = np.diff(cells)
        slopes = np.diff(fn.evaluate(cells)) / ln
        w = form.weight_at(0.5 * (cells[:-1] + cells[1:]))
        return w * np.abs(slopes) ** form.p * ln
    vals, _ = _stalled_distribution(form, fn, cells, sched)
    return np.diff(vals)


def law_chain_rule(form: PLIntervalForm, sampler: PLSampler, map_family=None,
                   trials: int = 12, route: str = "construction", sets=None,
                   sched: FoldSchedule = MEASURE_SCHEDULE,
                   derivative_trials: int = 2) -> LawReport:
    """Cell-wise density identity mu_{phi o f} = |phi' o f|^p mu_f.

    Cells merge f's breakpoints with preimages of each map's kinks, so both
    sides are single-slope per cell; flat cells of f sitting exactly on a
    kink are excluded (phi' undefined there).  Relative gaps use a floor of
    1% of the largest cell mass so near-empty cells are judged absolutely.
    The first ``derivative_trials`` trials also check the signed weighting
    sgn(phi' o f)|phi' o f|^{p-1} through two_variable_measure, rescaled
    into this report's tolerance.
    """
    _require_pl(form)
    p = form.p
    worst = _Worst()
    deriv_sets = dyadic_sets(2) if sets is None else tuple(sets)
    dtol = _derivative_tol(p)
    dsteps = DERIVATIVE_STEPS if p >= 2.0 \
        else tuple(0.25 * t for t in DERIVATIVE_STEPS)
    for k in range(trials):
        f = sampler.nonzero_pl(k)
        lo, hi = f.value_range()
        if map_family is None:
            maps = default_map_family(lo, hi)
        elif callable(map_family):
            maps = tuple(map_family(lo, hi))
        else:
            maps = tuple(map_family)
        e_ref = max(form.energy(f), 1e-12)
        for j, phi in enumerate(maps):
            cells = _chain_cells(form, f, phi)
            mid = 0.5 * (cells[:-1] + cells[1:])
            ln = np.diff(cells)
            fs = np.diff(f.evaluate(cells)) / ln
            vmid = f.evaluate(mid)
            seg = np.clip(np.searchsorted(phi.breakpoints, vmid,
                                          side="right") - 1,
                          0, phi.piece_count - 1)
            pslope = phi.slopes[seg]
            kinks = phi.breakpoints[1:-1]
            if kinks.size:
                on_kink = np.min(np.abs(vmid[:, None] - kinks[None, :]),
                                 axis=1) <= GEOM_TOL
            else:
                on_kink = np.zeros(mid.size, dtype=bool)
            undefined = (fs == 0.0) & on_kink
            g = compose(phi, f)
            lhs = _cell_masses(form, g, cells, route, sched)
            rhs = np.abs(pslope) ** p * _cell_masses(form, f, cells, route,
                                                     sched)
            top = max(float(np.max(lhs)), float(np.max(rhs)), 0.0)
            denom = np.maximum(np.maximum(lhs, rhs),
                               max(0.01 * top, 1e-3 * e_ref))
            gap = np.where(undefined, 0.0, np.abs(lhs - rhs) / denom)
            i = int(np.argmax(gap))
            worst.push(-float(gap[i]), trial=k, map=j, cell=i)
        if k < derivative_trials:
            fd = f if p >= 2.0 \
                else sampler.with_slope_floor(SLOPE_FLOOR).pl(k)
            lo2, hi2 = fd.value_range()
            partner = sampler.pl(60000 + k)
            for phi in (PLMap.absolute(min(lo2, -1e-6), max(hi2, 1e-6)),
                        PLMap.triangle(2, lo2, hi2 + 1e-9)):
                u = compose(phi, fd)
                sample = two_variable_measure(form, u, partner, deriv_sets,
                                              steps=dsteps)
                rhs = np.array([_chain_weighted_mass(form, fd, phi, partner,
                                                     A)
                                for A in deriv_sets])
                scale = max(float(np.max(np.abs(rhs))),
                            form.energy(fd) + form.energy(partner), 1e-12)
                worst.push(-float(np.max(np.abs(sample.closed_form - rhs)))
                           / scale, trial=k, check="weighting_closed_form")
                rel = float(np.max(np.abs(sample.values - rhs))) / scale
                worst.push(-rel * CONSTRUCTION_TOL / dtol, trial=k,
                           check="weighting_derivative")
    return _report("chain_rule", form, sampler.seed, trials, worst,
                   CONSTRUCTION_TOL if route == "construction"
                   else ORACLE_TOL)


def _chain_weighted_mass(form, f, phi, v, target) -> float:
    """Exact int_target w sgn(phi'of)|phi'of|^{p-1} sgn(f')|f'|^{p-1} v' dx."""
    grid0, _ = _with_level_crossings(f, phi.breakpoints[1:-1])
    grid = _merge_sorted_grids(grid0, v.breakpoints, form.weight_bounds)
    ln = np.diff(grid)
    mid = 0.5 * (grid[:-1] + grid[1:])
    fs = np.diff(f.evaluate(grid)) / ln
    vs = np.diff(v.evaluate(grid)) / ln
    seg = np.clip(np.searchsorted(phi.breakpoints, f.evaluate(mid),
                                  side="right") - 1, 0, phi.piece_count - 1)
    e = form.p - 1.0
    dens = (form.weight_at(mid) * _signed_power(phi.slopes[seg], e)
            * _signed_power(fs, e) * vs)
    total = 0.0
    for lo, hi in _components(target):
        overlap = np.clip(np.minimum(grid[1:], hi)
                          - np.maximum(grid[:-1], lo), 0.0, None)
        total += float(np.sum(dens * overlap))
    return total


# ---------------------------------------------------------------------------
# Leibniz and the functional identity


def law_leibniz(form: PLIntervalForm, sampler: PLSampler, trials: int = 16,
                refine: int = 8, sets=None) -> LawReport:
    """Setwise nu_{f;gh}(A) = int_A w sp(f') (g h' + h g') dx, products PL.

    The left side evaluates nu_{f;P} for the interpolant P = pl_product(g,h);
    the right side is the exact pairing.  The budget bounds
    int w |f'|^{p-1} |(P - gh)'| from the per-cell curvature |g'h'| h_cell,
    and gaps are rescaled so the report tolerance stays at the oracle line.
    """
    _require_pl(form)
    sets = default_set_family(sampler) if sets is None else tuple(sets)
    worst = _Worst()
    for k in range(trials):
        f, g = sampler.pl_pair(k)
        h = sampler.pl(10_000 + k)
        prod = pl_product(g, h, refine)
        budget = _product_pairing_budget(form, f, g, h, refine)
        scale = max(_pairing_scale(form, f, g, h), 1e-12)
        allowed = ORACLE_TOL + budget / scale
        for i, A in enumerate(sets):
            lhs = signed_mass_oracle(form, f, prod.fn, A)
            rhs = _pairing(form, f, [(g, h), (h, g)], A)
            rel = abs(lhs - rhs) / scale
            worst.push(-rel * ORACLE_TOL / allowed, trial=k, set=i,
                       budget=budget / scale)
    return _report("leibniz", form, sampler.seed, trials, worst, ORACLE_TOL)


def _product_pairing_budget(form, f, g, h, refine: int) -> float:
    """Bound on |nu_{f;P} - nu_{f;gh}| from interpolant slope error.

    On a refined cell of width c inside a piece where g and h are affine,
    the chord slope of the quadratic gh deviates by at most |g'h'| c.
    """
    base = _merge_sorted_grids(g.breakpoints, h.breakpoints)
    grid = _merge_sorted_grids(base, f.breakpoints, form.weight_bounds)
    ln = np.diff(grid)
    mid = 0.5 * (grid[:-1] + grid[1:])
    fs = np.diff(f.evaluate(grid)) / ln
    gs = np.diff(g.evaluate(grid)) / ln
    hs = np.diff(h.evaluate(grid)) / ln
    cell = np.diff(base)[np.clip(np.searchsorted(base, mid) - 1, 0,
                                 base.size - 2)] / refine
    err = np.abs(gs * hs) * cell
    return float(np.sum(form.weight_at(mid) * np.abs(fs) ** (form.p - 1.0)
                        * err * ln))


def _pairing_scale(form, f, g, h) -> float:
    """Total-variation scale of the Leibniz pairing (midpoint estimate)."""
    grid = _merge_sorted_grids(f.breakpoints, g.breakpoints, h.breakpoints,
                               form.weight_bounds)
    ln = np.diff(grid)
    mid = 0.5 * (grid[:-1] + grid[1:])
    fs = np.diff(f.evaluate(grid)) / ln
    gs = np.diff(g.evaluate(grid)) / ln
    hs = np.diff(h.evaluate(grid)) / ln
    mag = (np.abs(g.evaluate(mid) * hs) + np.abs(h.evaluate(mid) * gs))
    return float(np.sum(form.weight_at(mid) * np.abs(fs) ** (form.p - 1.0)
                        * mag * ln))


def law_functional_identity(form: PLIntervalForm, sampler: PLSampler,
                            trials: int = 16, refine: int = 16) -> LawReport:
    """int g dmu_f = E(f;fg) - ((p-1)/p)^{p-1} E(|f|^{p/(p-1)};g).

    E(f;fg) expands exactly through the pairing (fg)' = f'g + fg'.  The
    power term uses the PL interpolant of |f|^{p/(p-1)}; its actual error
    against the exact form q^{p-1} int w sp(f') f g' dx is the recorded
    budget, and gaps are rescaled so one tolerance line applies.
    """
    _require_pl(form)
    p = form.p
    q = p / (p - 1.0)
    cfac = ((p - 1.0) / p) ** (p - 1.0)
    worst = _Worst()
    for k in range(trials):
        f, g = sampler.pl_pair(k)
        lhs = _density_pairing(form, f, g)
        term1 = _pairing(form, f, [(g, f), (f, g)], None)
        power = pl_power_interp(f, q, refine)
        term2 = form.energy_derivative(power.fn, g)
        term2_exact = q ** (p - 1.0) * _pairing(form, f, [(f, g)], None)
        budget = cfac * abs(term2 - term2_exact)
        rhs = term1 - cfac * term2
        scale = max(form.energy(f) * max(1.0,
                                         float(np.max(np.abs(g.values)))),
                    1e-12)
        allowed = ORACLE_TOL + budget / scale
        rel = abs(lhs - rhs) / scale
        worst.push(-rel * ORACLE_TOL / allowed, trial=k,
                   budget=budget / scale, interp_sup=power.sup_error)
    return _report("functional_identity", form, sampler.seed, trials, worst,
                   ORACLE_TOL)


# ---------------------------------------------------------------------------
# multivariable chain rule


class PolyMap:
    """Polynomial in up to three variables, vanishing at the origin.

    Coefficients are keyed by exponent tuples, e.g. {(1, 1): 2.0} for 2 x y.
    Total degree is capped at 3 so the closed-form side stays within exact
    Simpson quadrature.
    """

    def __init__(self, coeffs: dict, _origin_check: bool = True):
        items = sorted(coeffs.items())
        if not items:
            raise ValueError("polynomial needs at least one term")
        arity = len(items[0][0])
        if arity < 1 or arity > 3:
            raise ValueError("supported arities are 1 to 3")
        for expo, _ in items:
            if len(expo) != arity:
                raise ValueError("exponent tuples must share one arity")
            if any(e < 0 or e != int(e) for e in expo):
                raise ValueError("exponents must be nonnegative integers")
            if sum(expo) > 3:
                raise ValueError("total degree above 3 is not supported")
            if _origin_check and sum(expo) == 0:
                raise ValueError("constant term breaks phi(0) = 0")
        self.coeffs = {tuple(int(e) for e in expo): float(c)
                       for expo, c in items if c != 0.0}
        self.arity = arity

    def value(self, cols) -> np.ndarray:
        cols = [np.asarray(c, dtype=float) for c in cols]
        if len(cols) != self.arity:
            raise ValueError(f"expected {self.arity} argument columns")
        out = np.zeros_like(cols[0])
        for expo, c in self.coeffs.items():
            term = np.full_like(cols[0], c)
            for x, e in zip(cols, expo):
                if e:
                    term = term * x ** e
            out += term
        return out

    def partial(self, i: int) -> "PolyMap":
        out: dict = {}
        for expo, c in self.coeffs.items():
            if expo[i] == 0:
                continue
            dexpo = list(expo)
            dexpo[i] -= 1
            key = tuple(dexpo)
            out[key] = out.get(key, 0.0) + c * expo[i]
        if not out:
            out = {(0,) * self.arity: 0.0}
        poly = PolyMap.__new__(PolyMap)
        poly.coeffs = out
        poly.arity = self.arity
        return poly

    def __repr__(self):
        terms = " + ".join(f"{c:g}*x^{expo}" for expo, c in
                           sorted(self.coeffs.items()))
        return f"PolyMap({terms or '0'})"


DEFAULT_POLY = PolyMap({(1, 1, 0): 1.0, (3, 0, 0): 1.0, (0, 1, 2): -0.5})


def law_multivariable_chain(form: PLIntervalForm, sampler: PLSampler,
                            phi: PolyMap = DEFAULT_POLY, trials: int = 12,
                            refine: int = 16, sets=None) -> LawReport:
    """Setwise nu_{f; phi(g_1..g_n)}(A) = sum_i int_A d_i phi(g) dnu_{f;g_i}.

    The composition phi(g) is PL-interpolated on a refine-fold grid; the
    right side integrates w sp(f') sum_i d_i phi(g(x)) g_i'(x) by Simpson,
    exact for the degree involved.  The interpolation budget bounds the
    slope error from the (piecewise linear-in-x) second derivative.
    """
    _require_pl(form)
    sets = default_set_family(sampler) if sets is None else tuple(sets)
    n = phi.arity
    partials = [phi.partial(i) for i in range(n)]
    worst = _Worst()
    for k in range(trials):
        f = sampler.pl(k)
        gs = [sampler.pl(20_000 + n * k + j) for j in range(n)]
        base = _merge_sorted_grids(*[g.breakpoints for g in gs])
        t = np.linspace(0.0, 1.0, refine + 1)[:-1]
        grid = np.append((base[:-1][:, None]
                          + np.diff(base)[:, None] * t[None, :]).ravel(),
                         base[-1])
        comp = PLFunction(grid, phi.value([g.evaluate(grid) for g in gs]))
        budget = _poly_pairing_budget(form, f, phi, gs, base, refine)
        scale = max(form.energy(f) + sum(form.energy(g) for g in gs), 1e-12)
        allowed = ORACLE_TOL + budget / scale
        for i, A in enumerate(sets):
            lhs = signed_mass_oracle(form, f, comp, A)
            rhs = _poly_chain_rhs(form, f, partials, gs, A)
            rel = abs(lhs - rhs) / scale
            worst.push(-rel * ORACLE_TOL / allowed, trial=k, set=i,
                       budget=budget / scale)
    return _report("multivariable_chain", form, sampler.seed, trials, worst,
                   ORACLE_TOL)


def _poly_chain_rhs(form, f, partials, gs, target) -> float:
    """Exact int_target w sp(f') sum_i d_i phi(g(x)) g_i'(x) dx by Simpson."""
    grids = [f.breakpoints, form.weight_bounds]
    grids.extend(g.breakpoints for g in gs)
    base = _merge_sorted_grids(*grids)
    total = 0.0
    for lo, hi in _components(target):
        inside = base[(base > lo + GEOM_TOL) & (base < hi - GEOM_TOL)]
        grid = np.concatenate(([lo], inside, [hi]))
        ln = np.diff(grid)
        mid = 0.5 * (grid[:-1] + grid[1:])
        sp = _signed_power(np.diff(f.evaluate(grid)) / ln, form.p - 1.0)
        w = form.weight_at(mid)

        def integrand(x):
            cols = [g.evaluate(x) for g in gs]
            acc = np.zeros_like(np.asarray(x, dtype=float))
            for i, dphi in enumerate(partials):
                gs_slope = np.diff(gs[i].evaluate(grid)) / ln
                acc = acc + dphi.value(cols) * gs_slope
            return acc

        simpson = (integrand(grid[:-1]) + 4.0 * integrand(mid)
                   + integrand(grid[1:])) / 6.0
        total += float(np.sum(w * sp * simpson * ln))
    return total


def _poly_pairing_budget(form, f, phi, gs, base, refine: int) -> float:
    """Bound |nu_{f;interp} - nu_{f;phi(g)}| from second-derivative size.

    Per refined cell, (phi o g)'' is linear in x (degree <= 3), so its
    maximum sits at cell endpoints; the chord slope deviates by at most
    that maximum times half the cell width.
    """
    n = phi.arity
    second = [[phi.partial(i).partial(j) for j in range(n)] for i in range(n)]
    worst_err = 0.0
    for b in range(base.size - 1):
        width = (base[b + 1] - base[b]) / refine
        ends = np.array([base[b], base[b + 1]])
        cols = [g.evaluate(ends) for g in gs]
        slopes = [(g.evaluate(base[b + 1]) - g.evaluate(base[b]))
                  / (base[b + 1] - base[b]) for g in gs]
        m2 = np.zeros(2)
        for i in range(n):
            for j in range(n):
                m2 += second[i][j].value(cols) * slopes[i] * slopes[j]
        worst_err = max(worst_err, float(np.max(np.abs(m2))) * width / 2.0)
    grid = _merge_sorted_grids(f.breakpoints, form.weight_bounds)
    ln = np.diff(grid)
    fs = np.diff(f.evaluate(grid)) / ln
    w = form.weight_at(0.5 * (grid[:-1] + grid[1:]))
    return worst_err * float(np.sum(w * np.abs(fs) ** (form.p - 1.0) * ln))


# ---------------------------------------------------------------------------
# domination and the dominant measure


def law_domination(form_lo: PLIntervalForm, form_hi: PLIntervalForm,
                   sampler: PLSampler, trials: int = 24,
                   route: str = "oracle", sets=None,
                   sched: FoldSchedule = MEASURE_SCHEDULE) -> LawReport:
    """The smaller form's measure is dominated setwise by the larger's."""
    _require_pl(form_lo)
    _require_pl(form_hi)
    if form_lo.p != form_hi.p:
        raise ValueError("domination compares forms with one p")
    bounds = _merge_sorted_grids(form_lo.weight_bounds, form_hi.weight_bounds)
    mids = 0.5 * (bounds[:-1] + bounds[1:])
    w_lo, w_hi = form_lo.weight_at(mids), form_hi.weight_at(mids)
    if np.any(w_lo > w_hi + GEOM_TOL):
        i = int(np.argmax(w_lo - w_hi))
        raise ValueError(
            f"weights are not ordered: w_lo={w_lo[i]:g} > w_hi={w_hi[i]:g} "
            f"near x={mids[i]:g}; domination needs w_lo <= w_hi cell-wise")
    sets = default_set_family(sampler) if sets is None else tuple(sets)
    worst = _Worst()
    for k in range(trials):
        f = sampler.pl(k)
        mu = _masses(form_lo, f, sets, route, sched)
        nu = _masses(form_hi, f, sets, route, sched)
        scale = max(form_hi.energy(f), 1e-12)
        margin = nu - mu
        i = int(np.argmin(margin))
        worst.push(float(margin[i]) / scale, trial=k, set=i)
    return _report("domination", form_lo, sampler.seed, trials, worst,
                   _route_tol(route))


def dominant_measure(form: PLIntervalForm, basis) -> tuple[np.ndarray,
                                                           np.ndarray]:
    """Density of nu = sum_i 2^{-i} E(u_i)^{-1} mu_{u_i} on a merged grid."""
    _require_pl(form)
    basis = list(basis)
    if not basis:
        raise ValueError("basis must be nonempty")
    parts = []
    for i, u in enumerate(basis):
        e = form.energy(u)
        if e <= 0.0:
            raise ValueError(f"basis function {i} has zero energy")
        parts.append((2.0 ** (-i) / e, *form.density_cells(u)))
    grid = _merge_sorted_grids(*[g for _, g, _ in parts])
    mids = 0.5 * (grid[:-1] + grid[1:])
    dens = np.zeros(mids.size)
    for coef, g, d in parts:
        idx = np.clip(np.searchsorted(g, mids, side="right") - 1, 0,
                      d.size - 1)
        dens += coef * d[idx]
    return grid, dens


def law_minimal_dominant(form: PLIntervalForm, basis=None) -> LawReport:
    """nu = sum 2^{-i} E(u_i)^{-1} mu_{u_i} dominates measures from the span.

    Test functions are affine and lattice combinations of the basis, whose
    densities vanish wherever every basis density does.  Minimality is not
    asserted: it quantifies over all dominating measures.
    """
    _require_pl(form)
    basis = [PLFunction.identity(), PLFunction.tent()] if basis is None \
        else list(basis)
    grid, nu_dens = dominant_measure(form, basis)
    tests = list(basis)
    for i in range(len(basis)):
        for j in range(i + 1, len(basis)):
            u, v = basis[i], basis[j]
            tests.extend((u + v, u - v * 2.0, lattice(u, v, "min"),
                          lattice(u, v, "max")))
    tests.extend((basis[0] * 0.5, basis[0] - 0.3))
    worst = _Worst()
    for t, fn in enumerate(tests):
        cells = _merge_sorted_grids(grid, fn.breakpoints)
        mids = 0.5 * (cells[:-1] + cells[1:])
        slopes = np.diff(fn.evaluate(cells)) / np.diff(cells)
        mu_d = form.weight_at(mids) * np.abs(slopes) ** form.p
        nu_d = nu_dens[np.clip(np.searchsorted(grid, mids, side="right") - 1,
                               0, nu_dens.size - 1)]
        scale = max(float(np.max(mu_d)), 1e-12)
        dead = nu_d == 0.0
        if np.any(dead):
            i = int(np.argmax(np.where(dead, mu_d, -1.0)))
            worst.push(-float(mu_d[i]) / scale, test=t, cell=i)
        else:
            worst.push(0.0, test=t)
    return _report("minimal_dominant", form, 0, len(tests), worst,
                   ORACLE_TOL)


# ---------------------------------------------------------------------------
# image density


def pushforward_density(form: PLIntervalForm, f: PLFunction,
                        t: float) -> float:
    """Density of f_* mu_f at t: sum of w |f'|^{p-1} over the preimages.

    Defined for t that is not the image of a node or weight bound (the
    density is piecewise constant between such critical values).
    """
    _require_pl(form)
    grid = _merge_sorted_grids(f.breakpoints, form.weight_bounds)
    vals = f.evaluate(grid)
    ln = np.diff(grid)
    slopes = np.diff(vals) / ln
    w = form.weight_at(0.5 * (grid[:-1] + grid[1:]))
    inside = (np.minimum(vals[:-1], vals[1:]) < t) \
        & (t < np.maximum(vals[:-1], vals[1:]))
    return float(np.sum(w[inside] * np.abs(slopes[inside])
                        ** (form.p - 1.0)))


def law_image_density(form: PLIntervalForm, sampler: PLSampler,
                      trials: int = 12, probes: int = 50,
                      route: str = "oracle", delta: float = 1e-4,
                      sched: FoldSchedule = ATOM_SCHEDULE) -> LawReport:
    """The pushforward of mu_f under f carries no atoms, probed pointwise.

    Each sampled f is rescaled to unit energy (atoms scale with the measure
    and the tolerance is absolute).  Probes take every distinct critical
    value (node and weight-bound images, flat-piece values included), then
    pad with value-range quantiles.  Each probe shrinks its half-width until
    every other critical value stays out of the window, so the second
    difference 2 m(d/2) - m(d) cancels the locally linear mass exactly and
    the residue estimates the atom.
    """
    _require_pl(form)
    worst = _Worst()
    for k in range(trials):
        f0 = sampler.pl(k)
        e = form.energy(f0)
        if e == 0.0:
            worst.push(0.0, trial=k, note="zero energy, zero measure")
            continue
        f = f0 * e ** (-1.0 / form.p)
        crit = np.unique(np.concatenate((f.values,
                                         f.evaluate(form.weight_bounds))))
        crit = crit[np.concatenate(([True], np.diff(crit) > 1e-12))]
        lo, hi = f.value_range()
        pad = 0.05 * (hi - lo) + 1e-6
        fill = np.linspace(lo - pad, hi + pad, max(probes - crit.size, 0))
        targets = np.concatenate((crit, fill))[:probes]
        for t in targets:
            others = crit[np.abs(crit - t) > 1e-12]
            dmin = float(np.min(np.abs(others - t))) if others.size \
                else math.inf
            d = float(np.clip(0.4 * dmin, 1e-10, delta))
            m = [_sublevel_mass(form, f, s, route, sched)
                 for s in (t - d, t - d / 2.0, t + d / 2.0, t + d)]
            atom = 2.0 * (m[2] - m[1]) - (m[3] - m[0])
            worst.push(-abs(atom), trial=k, value=float(t), width=d)
    return _report("image_density", form, sampler.seed, trials, worst,
                   ATOM_TOL)


def _sublevel_mass(form, f, s: float, route: str,
                   sched: FoldSchedule) -> float:
    """mu_f({f <= s}) through the requested route."""
    if route == "oracle":
        return set_mass_oracle(form, f, sublevel_set(f, s))
    if route == "construction":
        trace = F_value(form, f, f, s, sched)
        if not trace.converged:
            raise ConvergenceError(
                f"sublevel mass at s={s:g} did not stall by n={sched.n_max}")
        return trace.final
    raise ValueError(f"unknown mass route {route!r}")


# ---------------------------------------------------------------------------
# continuity of t -> mu_{f+tg}(A)


def law_continuity(form: PLIntervalForm, sampler: PLSampler, trials: int = 8,
                   coarse: int = 24) -> LawReport:
    """Sweeps t -> mu_{f+tg}({h <= a}) show no isolated jumps.

    The sweep runs at a coarse resolution and at 10x; a continuous map's
    largest adjacent increment must shrink by at least the Hölder factor,
    asserted here as fine <= 0.7 coarse plus a roundoff floor.
    """
    _require_pl(form)
    worst = _Worst()
    for k in range(trials):
        f, g = sampler.pl_pair(k)
        h = sampler.pl(70_000 + k)
        a = float(np.median(h.values))
        A = sublevel_set(h, a)
        if A.measure() == 0.0 or form.energy(g) == 0.0:
            worst.push(0.0, trial=k, note="degenerate sweep")
            continue

        def sweep(ts):
            return np.array([set_mass_oracle(form, f + g * t, A)
                             for t in ts])

        vals_c = sweep(np.linspace(-1.0, 1.0, coarse + 1))
        vals_f = sweep(np.linspace(-1.0, 1.0, 10 * coarse + 1))
        d_c = float(np.max(np.abs(np.diff(vals_c))))
        d_f = float(np.max(np.abs(np.diff(vals_f))))
        floor = 1e-12 * max(float(np.max(np.abs(vals_c))), 1.0)
        margin = 0.7 * d_c + floor - d_f
        worst.push(margin / max(d_c, floor), trial=k, coarse_step=d_c,
                   fine_step=d_f)
    return _report("continuity", form, sampler.seed, trials, worst,
                   ORACLE_TOL)


# ---------------------------------------------------------------------------
# two-variable wrapper and the registry


def law_two_variable(form: PLIntervalForm, sampler: PLSampler,
                     trials: int = 8, sets=None) -> LawReport:
    """Differenced nu_{u;v} matches its closed form; nu_{u;u} = mu_u."""
    _require_pl(form)
    sets = dyadic_sets(2) if sets is None else tuple(sets)
    p = form.p
    tol = _derivative_tol(p)
    src = sampler if p >= 2.0 else sampler.with_slope_floor(SLOPE_FLOOR)
    steps = DERIVATIVE_STEPS if p >= 2.0 \
        else tuple(0.25 * t for t in DERIVATIVE_STEPS)
    worst = _Worst()
    for k in range(trials):
        u, v = src.pl_pair(k)
        sample = two_variable_measure(form, u, v, sets, steps=steps)
        scale = max(float(np.max(np.abs(sample.closed_form))),
                    form.energy(u), 1e-12)
        i = int(np.argmax(sample.mismatch))
        worst.push(-float(sample.mismatch[i]) / scale, trial=k, set=i,
                   check="closed_form")
        diag = two_variable_measure(form, u, u, sets, steps=steps)
        mu = _masses(form, u, sets, "oracle")
        j = int(np.argmax(np.abs(diag.values - mu)))
        worst.push(-float(np.abs(diag.values - mu)[j]) / scale, trial=k,
                   set=j, check="diagonal")
    return _report("two_variable", form, sampler.seed, trials, worst, tol)


def heavier_form(form: PLIntervalForm, bump: float = 1.0,
                 upto: float = 0.5) -> PLIntervalForm:
    """A copy of the form with the weight raised by ``bump`` on [0, upto]."""
    bounds = _merge_sorted_grids(form.weight_bounds, np.array([upto]))
    mids = 0.5 * (bounds[:-1] + bounds[1:])
    vals = form.weight_at(mids) + np.where(mids < upto, bump, 0.0)
    weight = [(bounds[i], bounds[i + 1], vals[i])
              for i in range(vals.size)]
    return PLIntervalForm(form.p, weight=weight)


# Registry entries share the signature (form, sampler, trials); laws whose
# third parameter is something else get keyword shims.
ALL_LAWS = {
    "total_mass": law_total_mass,
    "homogeneity_shift": law_homogeneity_shift,
    "measure_clarkson": law_measure_clarkson,
    "measure_triangle": law_measure_triangle,
    "locality": law_locality,
    "minmax_bound": law_minmax_bound,
    "two_variable": law_two_variable,
    "chain_rule": lambda form, sampler, trials: law_chain_rule(
        form, sampler, trials=trials),
    "leibniz": law_leibniz,
    "functional_identity": law_functional_identity,
    "multivariable_chain": lambda form, sampler, trials:
        law_multivariable_chain(form, sampler, trials=trials),
    "domination": lambda form, sampler, trials: law_domination(
        form, heavier_form(form), sampler, trials),
    "minimal_dominant": lambda form, sampler, trials: law_minimal_dominant(
        form),
    "image_density": law_image_density,
    "continuity": law_continuity,
}


def run_all_laws(form: PLIntervalForm, sampler: PLSampler,
                 trials: int = 12) -> dict[str, LawReport]:
    """Every registered law at the given trial count, keyed by law id."""
    return {name: ALL_LAWS[name](form, sampler, trials)
            for name in sorted(ALL_LAWS)}
