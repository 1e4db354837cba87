"""Fold limits, the measures they produce, and their cross-checks.

The literal cell function is exponential in the fold level, so the tests
anchor the fast evaluators against it at small levels, then check the
deep-level behaviour against closed forms and the exact reference density.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from penergy.construction import (
    DEFAULT_SCHEDULE,
    LAW_SCHEDULE,
    MEASURE_SCHEDULE,
    ConvergenceError,
    CoverHypothesisError,
    EmptyFamilyError,
    EnergyMeasure,
    FoldSchedule,
    InadmissibleWitnessWarning,
    F_value,
    canonical_witnesses,
    cell_function,
    covering_check,
    distribution,
    energy_measure,
    folded_lid_energy,
    outer_measure_lb,
    reference_measure,
    reflection_gap,
    two_sided_cut_limit,
)
from penergy.construction import _IdentityWitnessEvaluator
from penergy.forms import PLIntervalForm
from penergy.pl import IntervalSet, PLFunction, shifted_cut, triangle_wave
from penergy.sampler import PLSampler

SAMPLER = PLSampler(seed=137)
IDENT = PLFunction.identity()
DEEP = FoldSchedule(n_min=6, n_max=36, rel_tol=1e-8)


# ---------------------------------------------------------------------------
# cell functions and the fast evaluator


def test_cell_function_small_level_grid_oracle():
    # f = g = id, a = 1/2, n = 3: the triangle wave survives up to 1/2,
    # then the cap ramps it to zero within one peak width 1/8
    cell = cell_function(IDENT, IDENT, 0.5, 3)
    x = np.linspace(0.0, 1.0, 2001)
    ramp = np.clip(0.5 + 0.125 - x, 0.0, 0.125)
    expected = np.minimum(triangle_wave(x, 3), ramp)
    assert np.max(np.abs(cell.evaluate(x) - expected)) <= 1e-12
    assert np.all(cell.evaluate(x[x >= 0.5 + 0.125 + 1e-9]) == 0.0)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_folded_energy_matches_materialized(p):
    form = PLIntervalForm(p, weight=[(0.0, 0.35, 0.5), (0.35, 1.0, 2.5)])
    for k in range(4):
        f, g = SAMPLER.pl_pair(k)
        glo, ghi = g.value_range()
        for a in (glo + 0.25 * (ghi - glo), glo + 0.7 * (ghi - glo)):
            for n in (5, 8, 11):
                lid = shifted_cut(g, a, n)
                fast = folded_lid_energy(form, f, lid, n)
                literal = form.energy(cell_function(f, g, a, n))
                assert fast == pytest.approx(literal, rel=1e-12, abs=1e-13)


def test_batched_identity_rows_match_general():
    form = PLIntervalForm(2.0, weight=[(0.0, 0.5, 1.0), (0.5, 1.0, 3.0)])
    for k in range(3):
        f = SAMPLER.pl(20 + k, allow_flat=False)
        ev = _IdentityWitnessEvaluator(form, f)
        a = np.arange(33) / 32.0
        for n in (6, 12):
            rows, bands = ev.energies(a, n)
            assert np.all(bands >= 0.0)
            for j in (0, 1, 7, 16, 31, 32):
                lid = shifted_cut(IDENT, float(a[j]), n)
                want = folded_lid_energy(form, f, lid, n)
                assert rows[j] == pytest.approx(want, rel=1e-12, abs=1e-14)


# ---------------------------------------------------------------------------
# fold limits: closed forms and trace structure


def test_limit_above_witness_range_is_energy_exactly():
    form = PLIntervalForm(2.0)
    f = SAMPLER.pl(1)
    tr = F_value(form, f, IDENT, 2.0)
    assert tr.converged
    # the cap sits at the peak everywhere, so every level is exact
    assert tr.final == pytest.approx(form.energy(f), rel=0, abs=0)
    assert set(tr.energies) == {tr.final}


def test_limit_below_witness_range_is_zero():
    form = PLIntervalForm(3.0)
    f = SAMPLER.pl(2)
    tr = F_value(form, f, IDENT, -2.5)
    assert tr.converged
    assert tr.final == 0.0


def test_identity_halfway_limit():
    # F_id^id(1/2) = 1/2; the level-n value is exactly 1/2 + 2^-n
    form = PLIntervalForm(2.0)
    shallow = F_value(form, IDENT, IDENT, 0.5)
    assert abs(shallow.final - 0.5) <= 2.0 ** (-17)
    deep = F_value(form, IDENT, IDENT, 0.5, DEEP)
    assert deep.converged
    assert abs(deep.final - 0.5) <= 1e-8
    for n, e in zip(deep.levels, deep.energies):
        assert e == pytest.approx(0.5 + 2.0 ** (-n), rel=1e-12)


def test_trace_final_is_running_infimum():
    form = PLIntervalForm(2.0)
    f, g = SAMPLER.pl_pair(3)
    a = float(np.mean(g.value_range()))
    tr = F_value(form, f, g, a, LAW_SCHEDULE)
    assert tr.final <= min(tr.energies) + 0.0
    rows = tr.to_rows()
    infs = [r[2] for r in rows]
    assert all(x >= y for x, y in zip(infs, infs[1:]))
    assert infs[-1] == tr.final


def test_unconverged_trace_returned_not_raised():
    form = PLIntervalForm(2.0)
    f, g = SAMPLER.pl_pair(4)
    a = float(np.mean(g.value_range()))
    strict = FoldSchedule(n_min=4, n_max=6, rel_tol=1e-15, stall_count=2)
    tr = F_value(form, f, g, a, strict)
    assert not tr.converged
    assert tr.stalled_at is None
    assert len(tr.energies) == 3
    with pytest.raises(ConvergenceError):
        distribution(form, f, g, [a], strict)


def test_materialized_route_agrees_at_small_levels():
    form = PLIntervalForm(1.5)
    f, g = SAMPLER.pl_pair(5)
    a = float(np.mean(g.value_range()))
    # tolerance none of the routes can meet: both run the full level range
    sched = FoldSchedule(n_min=4, n_max=9, rel_tol=1e-16)
    fast = F_value(form, f, g, a, sched)
    literal = F_value(form, f, g, a, sched, materialized=True)
    assert fast.levels == literal.levels
    assert np.allclose(fast.energies, literal.energies, rtol=1e-12)


def test_schedule_validation():
    with pytest.raises(ValueError):
        FoldSchedule(n_min=0)
    with pytest.raises(ValueError):
        FoldSchedule(n_min=10, n_max=5)
    with pytest.raises(ValueError):
        FoldSchedule(rel_tol=0.0)
    with pytest.raises(ValueError):
        FoldSchedule(stall_count=0)


# ---------------------------------------------------------------------------
# distribution along levels


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_distribution_monotone_and_endpoints(p):
    form = PLIntervalForm(p)
    f, g = SAMPLER.pl_pair(6)
    glo, ghi = g.value_range()
    grid = np.linspace(glo - 0.05, ghi + 0.05, 11)
    d = distribution(form, f, g, grid, LAW_SCHEDULE)
    assert d.converged
    e_ref = form.energy(f)
    assert d.values[0] <= 4e-5 * e_ref
    assert d.values[-1] == pytest.approx(e_ref, rel=4e-5)
    assert np.all(np.diff(d.values) >= -1e-5 * e_ref)


def test_distribution_rejects_bad_grid():
    form = PLIntervalForm(2.0)
    f, g = SAMPLER.pl_pair(6)
    with pytest.raises(ValueError):
        distribution(form, f, g, [0.5, 0.4], LAW_SCHEDULE)


def test_reflection_identity():
    form = PLIntervalForm(2.0)
    for k in range(3):
        f, g = SAMPLER.pl_pair(7 + k)
        glo, ghi = g.value_range()
        a = glo + 0.4 * (ghi - glo)
        gap = reflection_gap(form, f, g, a, LAW_SCHEDULE)
        assert abs(gap) <= 1e-4 * form.energy(f)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 40), st.floats(0.15, 0.45), st.floats(0.55, 0.85))
def test_limit_monotone_in_level(k, t1, t2):
    form = PLIntervalForm(2.0)
    f, g = SAMPLER.pl_pair(k)
    glo, ghi = g.value_range()
    a1 = glo + t1 * (ghi - glo)
    a2 = glo + t2 * (ghi - glo)
    f1 = F_value(form, f, g, a1, LAW_SCHEDULE).final
    f2 = F_value(form, f, g, a2, LAW_SCHEDULE).final
    assert f1 <= f2 + 4e-5 * max(form.energy(f), 1.0)


# ---------------------------------------------------------------------------
# outer measure lower bounds


def test_outer_full_domain_is_exact():
    form = PLIntervalForm(2.0)
    f = SAMPLER.pl(9)
    lb = outer_measure_lb(form, f, IntervalSet.full(), sched=LAW_SCHEDULE)
    # the constant witness caps the fold at its peak, no limit needed
    assert lb == pytest.approx(form.energy(f), rel=0, abs=0)


def test_outer_half_domain_identity():
    form = PLIntervalForm(2.0)
    lb = outer_measure_lb(form, IDENT, IntervalSet.closed(0.0, 0.5),
                          sched=LAW_SCHEDULE)
    assert lb == pytest.approx(0.5, abs=1e-3)
    assert lb <= 0.5 + 1e-9


def test_outer_lb_never_exceeds_measure():
    form = PLIntervalForm(2.0)
    f = SAMPLER.pl(10, allow_flat=False)
    meas = energy_measure(form, f)
    targets = [
        IntervalSet.closed(0.2, 0.7),
        IntervalSet.from_pairs([(0.0, 0.3), (0.6, 1.0)]),
        IntervalSet.from_pairs([(0.1, 0.25), (0.4, 0.55), (0.8, 0.95)]),
    ]
    for target in targets:
        lb = outer_measure_lb(form, f, target, sched=LAW_SCHEDULE)
        mu = meas.measure(target)
        assert lb <= mu + 1e-4 * max(1.0, form.energy(f))
        # the joint ladder should come close from below as well
        assert lb >= mu - 0.05 * max(form.energy(f), 1.0)


def test_outer_skips_inadmissible_and_raises_on_empty():
    form = PLIntervalForm(2.0)
    f = SAMPLER.pl(11)
    target = IntervalSet.closed(0.0, 0.5)
    with pytest.warns(InadmissibleWitnessWarning):
        with pytest.raises(EmptyFamilyError):
            # nonnegative level, and a sublevel set escaping the target
            outer_measure_lb(form, f, target,
                             family=[(IDENT, 0.3),
                                     (PLFunction.constant(-1.0), -0.5)])


def test_canonical_witnesses_are_admissible():
    target = IntervalSet.from_pairs([(0.0, 0.3), (0.45, 0.6), (0.9, 1.0)])
    fam = canonical_witnesses(target)
    assert fam
    from penergy.pl import sublevel_set
    for g, a in fam:
        assert a < 0.0
        assert sublevel_set(g, a).issubset(target)


# ---------------------------------------------------------------------------
# covering


def test_covering_self_cover_has_zero_slack():
    form = PLIntervalForm(2.0)
    f, g = SAMPLER.pl_pair(12)
    a = float(np.mean(g.value_range()))
    rep = covering_check(form, f, g, a, [(g, a)], LAW_SCHEDULE)
    assert rep.passed
    assert rep.slack == pytest.approx(0.0, abs=1e-12)


def test_covering_split_passes_and_bad_cover_raises():
    form = PLIntervalForm(2.0)
    f, g = SAMPLER.pl_pair(13)
    a = float(np.mean(g.value_range()))
    # lift g on one half: each piece covers half of the sublevel set
    left_block = PLFunction([0.0, 0.5, 0.500001, 1.0], [0.0, 0.0, 5.0, 5.0])
    right_block = PLFunction([0.0, 0.499999, 0.5, 1.0], [5.0, 5.0, 0.0, 0.0])
    rep = covering_check(form, f, g, a,
                         [(g + left_block, a), (g + right_block, a)],
                         LAW_SCHEDULE)
    assert rep.passed
    assert rep.converged
    with pytest.raises(CoverHypothesisError):
        covering_check(form, f, g, a, [(g + left_block, a)], LAW_SCHEDULE)
    with pytest.raises(CoverHypothesisError):
        covering_check(form, f, g, a, [], LAW_SCHEDULE)


def test_two_sided_cut_capacity_bound():
    form = PLIntervalForm(2.0)
    for k in range(3):
        f, g = SAMPLER.pl_pair(14 + k)
        glo, ghi = g.value_range()
        a = glo + 0.3 * (ghi - glo)
        b = glo + 0.7 * (ghi - glo)
        cap = two_sided_cut_limit(form, f, g, a, b, LAW_SCHEDULE)
        fa = F_value(form, f, g, a, LAW_SCHEDULE).final
        fb = F_value(form, f, g, b, LAW_SCHEDULE).final
        assert cap.final <= fb - fa + 4e-5 * max(form.energy(f), 1.0)


# ---------------------------------------------------------------------------
# the energy measure


def test_energy_measure_identity_has_unit_density():
    form = PLIntervalForm(2.0)
    m = energy_measure(form, IDENT)
    assert np.max(np.abs(m.density - 1.0)) <= 1e-6
    assert m.total_mass() == pytest.approx(1.0, rel=1e-8)


def test_energy_measure_constant_is_zero():
    form = PLIntervalForm(2.0)
    m = energy_measure(form, PLFunction.constant(0.7))
    assert m.total_mass() == 0.0
    assert np.all(m.masses == 0.0)


def test_energy_measure_tent_p3_unit_density():
    form = PLIntervalForm(3.0)
    m = energy_measure(form, PLFunction.tent())
    assert np.max(np.abs(m.density - 1.0)) <= 1e-6
    assert m.total_mass() == pytest.approx(1.0, rel=1e-8)


def test_energy_measure_affine_p2():
    form = PLIntervalForm(2.0)
    f = PLFunction([0.0, 1.0], [-1.0, 1.0])
    m = energy_measure(form, f)
    assert np.max(np.abs(m.density - 4.0)) <= 4e-6
    assert m.total_mass() == pytest.approx(4.0, rel=1e-8)
    r = reference_measure(form, f)
    assert r.total_mass() == pytest.approx(4.0, rel=0, abs=0)
    assert np.all(r.density == 4.0)


def test_energy_measure_weighted_identity_recovers_weight():
    w = [(0.0, 0.25, 0.5), (0.25, 0.75, 2.0), (0.75, 1.0, 1.0)]
    form = PLIntervalForm(2.0, weight=w)
    m = energy_measure(form, IDENT)
    mids = 0.5 * (m.nodes[:-1] + m.nodes[1:])
    assert np.max(np.abs(m.density - form.weight_at(mids))) <= 1e-5


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_energy_measure_matches_reference(p):
    form = PLIntervalForm(p)
    for k in range(3):
        f = SAMPLER.pl(30 + k, allow_flat=False)
        m = energy_measure(form, f)
        r = reference_measure(form, f)
        cell_ref = np.array([r.measure((lo, hi))
                             for lo, hi in zip(m.nodes[:-1], m.nodes[1:])])
        widths = np.diff(m.nodes)
        sup_gap = np.max(np.abs(m.masses - cell_ref) / widths)
        assert sup_gap <= 1e-4 * np.max(r.density)
        e_ref = form.energy(f)
        assert abs(m.total_mass() - e_ref) <= 1e-6 * e_ref


def test_energy_measure_deterministic():
    form = PLIntervalForm(2.0)
    f = SAMPLER.pl(33)
    m1 = energy_measure(form, f)
    m2 = energy_measure(form, f)
    assert np.array_equal(m1.masses, m2.masses)
    assert m1.levels_used == m2.levels_used


def test_energy_measure_shallow_schedule_raises():
    form = PLIntervalForm(2.0)
    f = SAMPLER.pl(34, allow_flat=False)
    with pytest.raises(ConvergenceError):
        energy_measure(form, f,
                       sched=FoldSchedule(n_min=4, n_max=6, rel_tol=1e-12))


def test_measure_query_prorates_cells():
    nodes = np.array([0.0, 0.25, 0.5, 1.0])
    masses = np.array([1.0, 2.0, 4.0])  # densities 4, 8, 8
    m = EnergyMeasure(nodes, masses)
    assert m.measure((0.0, 1.0)) == pytest.approx(7.0)
    assert m.measure((0.125, 0.375)) == pytest.approx(0.125 * 4 + 0.125 * 8)
    target = IntervalSet.from_pairs([(0.0, 0.125), (0.75, 1.0)])
    assert m.measure(target) == pytest.approx(0.5 + 2.0)
    rows = m.to_rows()
    assert rows[0] == (0.0, 0.25, 4.0)


def test_energy_measure_validation():
    with pytest.raises(ValueError):
        EnergyMeasure([0.0, 0.5, 0.5, 1.0], [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        EnergyMeasure([0.0, 1.0], [1.0, 2.0])
    with pytest.raises(TypeError):
        from penergy.forms import GraphForm
        g = GraphForm(2, [(0, 1, 1.0)], p=2.0)
        energy_measure(g, IDENT)
