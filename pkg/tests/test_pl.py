import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from penergy.pl import (
    GEOM_TOL,
    DomainMismatchError,
    IntervalSet,
    PieceCapError,
    PLFunction,
    PLMap,
    affine_combine,
    compose,
    cut,
    lattice,
    pl_product,
    pl_power_interp,
    shifted_cut,
    shifted_cut_scalar,
    sublevel_set,
    triangle_fold,
    triangle_wave,
)
from penergy.sampler import PLSampler

SAMPLER = PLSampler(seed=20260819)
GRID = np.random.default_rng(7).uniform(0.0, 1.0, size=1000)


def oracle_gap(fn, oracle_vals):
    return float(np.max(np.abs(fn.evaluate(GRID) - oracle_vals)))


# ---------------------------------------------------------------------------
# exactness against pointwise oracles


@pytest.mark.parametrize("idx", range(8))
def test_affine_combine_pointwise(idx):
    f, g = SAMPLER.pl_pair(idx)
    h = affine_combine(2.0, f, -0.5, g)
    assert oracle_gap(h, 2.0 * f(GRID) - 0.5 * g(GRID)) <= 1e-12


@pytest.mark.parametrize("idx", range(8))
@pytest.mark.parametrize("op", ["min", "max"])
def test_lattice_pointwise(idx, op):
    f, g = SAMPLER.pl_pair(idx)
    h = lattice(f, g, op)
    ref = np.minimum(f(GRID), g(GRID)) if op == "min" else np.maximum(f(GRID), g(GRID))
    assert oracle_gap(h, ref) <= 1e-12


@pytest.mark.parametrize("idx", range(8))
def test_cut_pointwise(idx):
    f = SAMPLER.pl(idx)
    a, b = -0.75, 0.4
    offset = min(max(0.0, a), b)
    h = cut(f, a, b)
    assert oracle_gap(h, np.clip(f(GRID), a, b) - offset) <= 1e-12


def test_cut_infinite_levels():
    f = SAMPLER.pl(3)
    pos = cut(f, 0.0, np.inf)
    assert oracle_gap(pos, np.maximum(f(GRID), 0.0)) <= 1e-12
    neg = cut(f, -np.inf, 0.0)
    assert oracle_gap(neg, np.minimum(f(GRID), 0.0)) <= 1e-12
    with pytest.raises(ValueError):
        cut(f, 0.5, 0.5)


@pytest.mark.parametrize("idx", range(6))
@pytest.mark.parametrize("n", [1, 2, 3, 6])
def test_triangle_fold_pointwise(idx, n):
    f = SAMPLER.pl(idx)
    h = triangle_fold(f, n)
    assert oracle_gap(h, triangle_wave(f(GRID), n)) <= 1e-12


def test_triangle_fold_identity_level_one():
    # T_1 folds the identity into the distance to the nearest integer:
    # a single tent peaking at 1/2
    h = triangle_fold(PLFunction.identity(), 1)
    assert np.allclose(h.breakpoints, [0.0, 0.5, 1.0])
    assert np.allclose(h.values, [0.0, 0.5, 0.0])


def test_triangle_fold_slopes_preserved():
    f = SAMPLER.pl(11)
    base = set(np.round(np.abs(f.slopes), 9))
    folded = triangle_fold(f, 4)
    for s in np.abs(folded.slopes):
        assert any(abs(s - b) < 1e-6 for b in base)
    assert folded.values.min() >= 0.0
    assert folded.values.max() <= 2.0 ** -4 + 1e-15


@pytest.mark.parametrize("idx", range(6))
@pytest.mark.parametrize("a,n", [(0.3, 3), (-0.2, 5), (0.9, 2)])
def test_shifted_cut_pointwise(idx, a, n):
    g = SAMPLER.pl(idx)
    h = shifted_cut(g, a, n)
    assert oracle_gap(h, shifted_cut_scalar(g(GRID), a, n)) <= 1e-12
    assert h.values.min() >= 0.0
    assert h.values.max() <= 2.0 ** -n + 1e-15


def test_shifted_cut_explicit_ramp():
    # level 2 ramp anchored at 1/4: plateau 1/4, zero from 1/2 on
    h = shifted_cut(PLFunction.identity(), 0.25, 2)
    pts = np.array([0.0, 0.25, 0.375, 0.5, 0.8])
    assert np.allclose(h.evaluate(pts), [0.25, 0.25, 0.125, 0.0, 0.0])


def test_shifted_cut_constant_witness():
    g = PLFunction.constant(-1.0)
    h = shifted_cut(g, -1.0, 4)
    assert np.allclose(h.values, 2.0 ** -4)


@pytest.mark.parametrize("idx", range(6))
def test_compose_pointwise(idx):
    f = SAMPLER.pl(idx)
    lo, hi = f.value_range()
    phi = PLMap([lo - 1.0, -0.1, 0.2, hi + 1.0], [0.5, -0.3, 0.4, 1.0])
    h = compose(phi, f)
    assert oracle_gap(h, np.interp(f(GRID), phi.breakpoints, phi.values)) <= 1e-12


def test_compose_domain_check():
    f = PLFunction.identity()
    phi = PLMap([0.0, 0.5], [0.0, 1.0])
    with pytest.raises(DomainMismatchError):
        compose(phi, f)


def test_compose_matches_direct_fold_and_cut():
    f = SAMPLER.pl(5)
    lo, hi = f.value_range()
    pad = 0.5
    tri = compose(PLMap.triangle(3, lo - pad, hi + pad), f)
    assert oracle_gap(tri, triangle_fold(f, 3).evaluate(GRID)) <= 1e-12
    cm = compose(PLMap.cut_map(-0.5, 0.25, lo - pad, hi + pad), f)
    assert oracle_gap(cm, cut(f, -0.5, 0.25).evaluate(GRID)) <= 1e-12


# ---------------------------------------------------------------------------
# products


def test_product_of_identities():
    f = PLFunction.identity()
    approx = pl_product(f, f, refine=2)
    # interpolating x^2 with knots every half piece leaves a midpoint gap of
    # exactly h^2/4 = 1/16
    assert approx.sup_error == pytest.approx(1.0 / 16.0)
    probe = np.linspace(0, 1, 641)
    true_gap = np.max(np.abs(approx.fn.evaluate(probe) - probe * probe))
    assert true_gap == pytest.approx(1.0 / 16.0, rel=1e-9)
    fine = pl_product(f, f, refine=64)
    assert fine.sup_error <= 1.0 / (16.0 * 32.0 * 32.0) + 1e-15


@pytest.mark.parametrize("idx", range(4))
def test_product_error_bound_holds(idx):
    f, g = SAMPLER.pl_pair(idx + 50)
    approx = pl_product(f, g, refine=8)
    gap = np.max(np.abs(approx.fn.evaluate(GRID) - f(GRID) * g(GRID)))
    assert gap <= approx.sup_error + 1e-12


def test_power_interp_tracks_truth():
    f = SAMPLER.pl(9)
    approx = pl_power_interp(f, 1.5, refine=32)
    gap = np.max(np.abs(approx.fn.evaluate(GRID) - np.abs(f(GRID)) ** 1.5))
    assert gap <= approx.sup_error * 1.5 + 1e-9


# ---------------------------------------------------------------------------
# sublevel sets and the cell identity


def test_sublevel_simple_ramp():
    s = sublevel_set(PLFunction.identity(), 0.25)
    assert len(s) == 1
    lo, hi, lc, hc = s.components[0]
    assert (lo, hi, lc, hc) == (0.0, 0.25, True, True)
    assert s.measure() == pytest.approx(0.25)


def test_sublevel_touching_point():
    f = PLFunction.tent(0.5)  # min value 0 at the endpoints only
    s = sublevel_set(f, 0.0)
    assert s.contains(0.0) and s.contains(1.0) and not s.contains(0.5)


@pytest.mark.parametrize("idx", range(8))
def test_sublevel_monotone_in_level(idx):
    g = SAMPLER.pl(idx)
    levels = np.linspace(-1.5, 1.5, 9)
    prev = IntervalSet.empty()
    for a in levels:
        cur = sublevel_set(g, a)
        assert prev.issubset(cur)
        prev = cur


@pytest.mark.parametrize("idx", range(6))
def test_cell_identity(idx):
    f, g = SAMPLER.pl_pair(idx + 20)
    a, n = 0.15, 5
    cell = lattice(triangle_fold(f, n), shifted_cut(g, a, n), "min")
    inside = sublevel_set(g, a)
    outside_of = sublevel_set(g, a + 2.0 ** -n)
    folded = triangle_fold(f, n)
    for t in GRID[:300]:
        v = cell.evaluate(t)
        if inside.contains(t):
            assert abs(v - folded.evaluate(t)) <= 1e-12
        if not outside_of.contains(t):
            assert abs(v) <= 1e-12


# ---------------------------------------------------------------------------
# interval sets


def test_intervalset_json_roundtrip():
    s = IntervalSet([(0.0, 0.25, True, False), (0.5, 0.5, True, True),
                     (0.7, 1.0, False, True)])
    t = IntervalSet.from_json(s.to_json())
    assert t.components == s.components
    assert json.loads(s.to_json())[0][2] == "[)"


def test_intervalset_merge_and_measure():
    s = IntervalSet([(0.0, 0.5, True, True), (0.5, 0.8, True, False),
                     (0.9, 1.0, True, True)])
    assert len(s) == 2
    assert s.measure() == pytest.approx(0.9)


def test_intervalset_ops():
    a = IntervalSet.from_pairs([(0.0, 0.5)])
    b = IntervalSet.from_pairs([(0.25, 0.75)])
    inter = a.intersect(b)
    assert inter.measure() == pytest.approx(0.25)
    assert a.union(b).measure() == pytest.approx(0.75)
    assert inter.issubset(a) and inter.issubset(b)
    assert not a.issubset(b)


def test_intervalset_open_components_drop_points():
    s = IntervalSet([(0.3, 0.3, False, False)])
    assert not s
    p = IntervalSet([(0.3, 0.3, True, True)])
    assert p.contains(0.3) and p.measure() == 0.0


# ---------------------------------------------------------------------------
# caps and serialisation


def test_piece_cap_enforced():
    f = SAMPLER.pl(2)
    with pytest.raises(PieceCapError):
        triangle_fold(f, 14, piece_cap=1000)


def test_plfunction_json_roundtrip():
    f = SAMPLER.pl(4)
    g = PLFunction.from_json(f.to_json())
    assert np.array_equal(f.breakpoints, g.breakpoints)
    assert np.array_equal(f.values, g.values)


def test_domain_validation():
    with pytest.raises(ValueError):
        PLFunction([0.0, 0.5], [0.0, 1.0])
    with pytest.raises(ValueError):
        PLFunction([0.1, 1.0], [0.0, 1.0])


# ---------------------------------------------------------------------------
# property-based checks


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(-1.5, 1.4), st.floats(0.01, 1.0))
def test_cut_property(idx, a, width):
    f = PLSampler(seed=99).pl(idx % 64)
    b = a + width
    h = cut(f, a, b)
    offset = min(max(0.0, a), b)
    pts = np.linspace(0, 1, 257)
    assert np.max(np.abs(h.evaluate(pts) - (np.clip(f(pts), a, b) - offset))) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 8))
def test_fold_range_property(idx, n):
    f = PLSampler(seed=3).pl(idx % 64)
    h = triangle_fold(f, n)
    assert h.values.min() >= -1e-15
    assert h.values.max() <= 2.0 ** -n + 1e-15


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_lattice_commutes_property(idx):
    s = PLSampler(seed=5)
    f, g = s.pl_pair(idx % 64)
    pts = np.linspace(0, 1, 257)
    assert np.max(np.abs(lattice(f, g, "min").evaluate(pts)
                         - lattice(g, f, "min").evaluate(pts))) <= 1e-12
