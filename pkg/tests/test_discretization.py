from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coagfrag.discretization import (Grid, RhsAssembler, State, assemble_rhs,
                                     build_grid, moment)
from coagfrag.errors import DomainError, GridError
from coagfrag.kernels import CONSTANT, SMOLUCHOWSKI, power_law_fragmentation
from coagfrag.truncation import (TruncationParams, truncate_initial,
                                 truncate_kernel, truncate_selection)

_SQRT2 = math.sqrt(2.0)


def _model_callables(alpha: float, gamma: float):
    model = power_law_fragmentation(alpha, gamma)
    return model.selection, model.breakage, model.cell_integrals


def test_build_grid_edges_and_pivots():
    grid = build_grid(1.0, 4.0, 2)
    assert np.allclose(grid.edges, [1.0, 2.0, 4.0], rtol=1e-15)
    assert np.allclose(grid.pivots, [_SQRT2, 2.0 * _SQRT2], rtol=1e-15)
    assert grid.cells == 2
    assert grid.x_min == 1.0
    assert grid.x_max == 4.0
    assert np.allclose(grid.widths, [1.0, 2.0], rtol=1e-15)


def test_build_grid_ratio_is_uniform():
    grid = build_grid(1e-4, 1e3, 140)
    assert math.isclose(grid.ratio, 10.0 ** 0.05, rel_tol=1e-12)
    ratios = grid.edges[1:] / grid.edges[:-1]
    assert np.allclose(ratios, grid.ratio, rtol=1e-12)


def test_build_grid_collects_all_problems():
    with pytest.raises(GridError) as err:
        build_grid(-1.0, -2.0, 1)
    message = str(err.value)
    assert "x_min" in message
    assert "cells" in message


def test_grid_needs_at_least_two_cells():
    with pytest.raises(GridError):
        Grid(np.array([1.0, 2.0]))
    with pytest.raises(GridError):
        Grid(np.array([1.0, 2.0, 2.0]))
    with pytest.raises(GridError):
        Grid(np.array([0.0, 1.0, 2.0]))


def test_grid_equality_and_hash():
    a = build_grid(1.0, 4.0, 2)
    b = Grid(np.array([1.0, 2.0, 4.0]))
    assert a == b
    assert hash(a) == hash(b)
    assert a != build_grid(1.0, 8.0, 2)


def test_state_shape_check_and_copy():
    grid = build_grid(1.0, 4.0, 2)
    with pytest.raises(GridError):
        State(grid, 0.0, np.zeros(3))
    state = State(grid, 0.5, np.array([1.0, 2.0]))
    clone = state.copy()
    assert clone == state
    clone.counts[0] = 9.0
    assert state.counts[0] == 1.0


def test_moment_small_exact_example():
    grid = Grid(np.array([1.0, 4.0, 16.0]))  # pivots 2 and 8
    state = State(grid, 0.0, np.array([0.5, 0.25]))
    assert moment(state, lambda x: x) == 3.0
    assert moment(state, 1.0) == 0.75
    assert moment(state, lambda x: 1.0 / x) == 0.5 * 0.5 + 0.25 * 0.125


def test_moment_approximates_gamma_integral():
    # sum over pivots of x**-0.5 * cell integral of exp(-x) ~ Gamma(1/2)
    grid = build_grid(1e-12, 60.0, 2500)
    state = truncate_initial(lambda x: np.exp(-x), grid)
    got = moment(state, lambda x: x ** -0.5)
    assert math.isclose(got, 1.7724538509055159, rel_tol=1e-4)


def test_moment_rejects_misshapen_weight():
    grid = build_grid(1.0, 4.0, 2)
    state = State(grid, 0.0, np.array([1.0, 1.0]))
    with pytest.raises(DomainError):
        moment(state, lambda x: np.array([1.0]))


def test_single_parent_fragment_redistribution_by_hand():
    """Parent pivot 2*sqrt(2) under alpha=0 breakup on edges (1, 2, 4).

    Fragments land uniformly with density 2/parent.  The interval (0, 1]
    pairs with the zero-size ghost (cell 0 gets its mass over x_0, the
    remaining half count is the ghost share); the interval between the
    pivots splits evenly.
    """
    grid = build_grid(1.0, 4.0, 2)
    sel, brk, ci = _model_callables(0.0, 1.0)
    asm = RhsAssembler(grid, selection=sel, breakage=brk, cell_integrals=ci)
    table = asm.fragment_table
    ghost = asm.fragment_ghost
    assert np.allclose(table[:, 1], [1.0, 0.5], rtol=1e-13)
    assert math.isclose(ghost[1], 0.5, rel_tol=1e-13)
    # self-column: everything below the first pivot
    assert np.allclose(table[:, 0], [1.0, 0.0], rtol=1e-13)
    assert math.isclose(ghost[0], 1.0, rel_tol=1e-13)


def test_fragment_table_columns_balance_count_and_mass():
    grid = build_grid(1e-3, 50.0, 60)
    for alpha, gamma in ((0.0, 1.0), (0.5, 0.5), (2.0, 0.25)):
        sel, brk, ci = _model_callables(alpha, gamma)
        asm = RhsAssembler(grid, selection=sel, breakage=brk, cell_integrals=ci)
        table = asm.fragment_table
        ghost = asm.fragment_ghost
        count_per_event = table.sum(axis=0) + ghost
        expected = (alpha + 2.0) / (alpha + 1.0)
        assert np.allclose(count_per_event, expected, rtol=1e-12)
        mass_per_event = grid.pivots @ table
        assert np.allclose(mass_per_event, grid.pivots, rtol=1e-12)
        assert np.all(table >= -1e-15)
        assert np.all(ghost >= -1e-15)


def test_fragment_table_quadrature_fallback_matches_closed_form():
    grid = build_grid(0.01, 5.0, 12)
    sel, brk, ci = _model_callables(0.5, 0.5)
    exact = RhsAssembler(grid, selection=sel, breakage=brk, cell_integrals=ci)
    numeric = RhsAssembler(grid, selection=sel, breakage=brk)
    assert np.allclose(numeric.fragment_table, exact.fragment_table,
                       rtol=1e-8, atol=1e-12)
    assert np.allclose(numeric.fragment_ghost, exact.fragment_ghost,
                       rtol=1e-8, atol=1e-12)


def test_fines_weighted_gain_respects_continuum_bound():
    """Discrete fines gain per event stays below the integral bound
    C(s) * parent**(-2s) with C(s) = (a+2)/(a+1-2s), up to one factor of
    the cell ratio**(2s): two-point redistribution moves fragments at most
    one pivot toward zero, where the convex weight grows by that ratio."""
    grid = build_grid(1e-3, 50.0, 60)
    for alpha, s in ((0.0, 1.0 / 3.0), (0.8, 0.4)):
        sel, brk, ci = _model_callables(alpha, 0.5)
        asm = RhsAssembler(grid, selection=sel, breakage=brk, cell_integrals=ci)
        w = grid.pivots ** (-2.0 * s)
        discrete = w @ asm.fragment_table
        continuum = (alpha + 2.0) / (alpha + 1.0 - 2.0 * s) * grid.pivots ** (-2.0 * s)
        assert np.all(discrete <= grid.ratio ** (2.0 * s) * continuum * (1.0 + 1e-12))
        # the ghost pairing itself never overshoots: the below-grid share
        # always lands with weight at the first pivot, inside the interval
        p = grid.pivots[-1]
        x0 = grid.pivots[0]
        _, brk_mass = _model_callables(alpha, 0.5)[2](0.0, x0, p)
        ghost_gain = (brk_mass / x0) * x0 ** (-2.0 * s)
        fines_share = ((alpha + 2.0) / (alpha + 1.0 - 2.0 * s)
                       * x0 ** (alpha + 1.0 - 2.0 * s) / p ** (alpha + 1.0))
        assert ghost_gain <= fines_share * (1.0 + 1e-12)


def test_coagulation_balances_with_edge_tallies():
    # untruncated kernel: merged sizes can pass the top edge; the tallies
    # close both the count and the mass budget exactly
    grid = build_grid(0.1, 10.0, 24)
    rng = np.random.default_rng(7)
    counts = rng.uniform(0.0, 2.0, grid.cells)
    state = State(grid, 0.0, counts)
    parts = assemble_rhs(state, coagulation=CONSTANT.rate)
    x = grid.pivots
    events = 0.5 * math.fsum(np.outer(counts, counts).ravel())
    births = math.fsum(parts.birth_coag)
    deaths = math.fsum(parts.death_coag)
    assert math.isclose(births + parts.edge_count, events, rel_tol=1e-12)
    assert math.isclose(deaths, 2.0 * events, rel_tol=1e-12)
    mass_in = math.fsum(x * parts.birth_coag) + parts.edge_mass
    mass_out = math.fsum(x * parts.death_coag)
    assert math.isclose(mass_in, mass_out, rel_tol=1e-12)
    assert parts.edge_count > 0.0


def test_interior_support_leaves_the_edge_tally_empty():
    # merged sizes below the last pivot never touch the window edge
    grid = build_grid(0.1, 10.0, 24)
    rate = truncate_kernel(CONSTANT, TruncationParams(10.0))
    rng = np.random.default_rng(11)
    counts = np.where(grid.pivots <= 2.0, rng.uniform(0.0, 2.0, grid.cells), 0.0)
    parts = assemble_rhs(State(grid, 0.0, counts), coagulation=rate)
    assert parts.edge_count == 0.0
    assert parts.edge_mass == 0.0
    mass_in = math.fsum(grid.pivots * parts.birth_coag)
    mass_out = math.fsum(grid.pivots * parts.death_coag)
    assert math.isclose(mass_in, mass_out, rel_tol=1e-12)


def test_truncated_top_band_still_closes_the_mass_budget():
    # pairs whose merged size lands between the last pivot and the window
    # edge park the remainder in the edge tally; the budget stays exact
    grid = build_grid(0.1, 10.0, 24)
    rate = truncate_kernel(CONSTANT, TruncationParams(10.0))
    rng = np.random.default_rng(11)
    state = State(grid, 0.0, rng.uniform(0.0, 2.0, grid.cells))
    parts = assemble_rhs(state, coagulation=rate)
    assert parts.edge_count > 0.0
    mass_in = math.fsum(grid.pivots * parts.birth_coag) + parts.edge_mass
    mass_out = math.fsum(grid.pivots * parts.death_coag)
    assert math.isclose(mass_in, mass_out, rel_tol=1e-12)


def test_fragmentation_balances_mass_and_number():
    grid = build_grid(1e-3, 50.0, 50)
    sel, brk, ci = _model_callables(0.5, 0.5)
    rng = np.random.default_rng(3)
    state = State(grid, 0.0, rng.uniform(0.0, 1.0, grid.cells))
    parts = assemble_rhs(state, selection=sel, breakage=brk, cell_integrals=ci)
    x = grid.pivots
    mass_in = math.fsum(x * parts.birth_frag)
    mass_out = math.fsum(x * parts.death_frag)
    assert math.isclose(mass_in, mass_out, rel_tol=1e-12)
    n_events = math.fsum(parts.death_frag)
    n_births = math.fsum(parts.birth_frag) + parts.subpivot_count
    assert math.isclose(n_births, 2.5 / 1.5 * n_events, rel_tol=1e-12)
    assert parts.subpivot_count >= 0.0


def test_net_number_rate_matches_the_count_ode():
    # constant kernel with support far inside the window: dM0/dt = -M0^2/2
    grid = build_grid(1e-3, 1000.0, 80)
    rate = truncate_kernel(CONSTANT, TruncationParams(1000.0))
    counts = np.where(grid.pivots <= 1.0, 0.5, 0.0)
    state = State(grid, 0.0, counts)
    parts = assemble_rhs(state, coagulation=rate)
    m0 = math.fsum(counts)
    assert math.isclose(math.fsum(parts.total()), -0.5 * m0 * m0, rel_tol=1e-12)


def test_empty_cells_never_get_negative_rates():
    grid = build_grid(1e-3, 50.0, 40)
    rate = truncate_kernel(SMOLUCHOWSKI, TruncationParams(50.0, singularity=1.0 / 3.0))
    sel, brk, ci = _model_callables(0.5, 0.5)
    asm = RhsAssembler(grid, coagulation=rate, selection=sel, breakage=brk,
                       cell_integrals=ci)
    counts = np.zeros(grid.cells)
    counts[20] = 1.0
    net = asm.total_rate(counts)
    empty = counts == 0.0
    assert np.all(net[empty] >= 0.0)


def test_breakdown_total_combines_the_four_parts():
    grid = build_grid(1e-3, 50.0, 30)
    rate = truncate_kernel(CONSTANT, TruncationParams(50.0))
    sel, brk, ci = _model_callables(0.0, 1.0)
    asm = RhsAssembler(grid, coagulation=rate, selection=sel, breakage=brk,
                       cell_integrals=ci)
    rng = np.random.default_rng(5)
    state = State(grid, 0.0, rng.uniform(0.0, 1.0, grid.cells))
    parts = asm.assemble(state)
    expected = (parts.birth_coag - parts.death_coag
                + parts.birth_frag - parts.death_frag)
    assert np.array_equal(parts.total(), expected)
    assert np.allclose(asm.total_rate(state.counts), expected, rtol=1e-15)


def test_assembler_rejects_mismatched_grid():
    grid = build_grid(1e-3, 50.0, 30)
    other = build_grid(1e-3, 50.0, 31)
    asm = RhsAssembler(grid, coagulation=CONSTANT.rate)
    with pytest.raises(GridError):
        asm.assemble(State(other, 0.0, np.zeros(other.cells)))


def test_half_specified_breakup_model_is_rejected():
    grid = build_grid(1e-3, 50.0, 30)
    sel, brk, _ = _model_callables(0.0, 1.0)
    with pytest.raises(DomainError):
        RhsAssembler(grid, selection=sel)
    with pytest.raises(DomainError):
        RhsAssembler(grid, breakage=brk)


def test_assembler_rejects_invalid_rates():
    grid = build_grid(1e-3, 50.0, 30)
    with pytest.raises(DomainError):
        RhsAssembler(grid, coagulation=lambda x, y: -np.ones(
            np.broadcast_shapes(np.shape(x), np.shape(y))))
    sel_bad = lambda x: -np.asarray(x, dtype=float)  # noqa: E731
    _, brk, ci = _model_callables(0.0, 1.0)
    with pytest.raises(DomainError):
        RhsAssembler(grid, selection=sel_bad, breakage=brk, cell_integrals=ci)


_GRID = build_grid(1e-3, 50.0, 40)
_RATE = truncate_kernel(CONSTANT, TruncationParams(50.0))
_SEL, _BRK, _CI = _model_callables(0.5, 0.5)
_ASM = RhsAssembler(_GRID, coagulation=_RATE,
                    selection=truncate_selection(
                        power_law_fragmentation(0.5, 0.5),
                        TruncationParams(50.0)),
                    breakage=_BRK, cell_integrals=_CI)


@settings(max_examples=40, deadline=None)
@given(values=st.lists(st.floats(min_value=0.0, max_value=10.0),
                       min_size=40, max_size=40))
def test_balance_identities_hold_for_any_state(values: list[float]):
    counts = np.asarray(values)
    parts = _ASM.assemble(State(_GRID, 0.0, counts))
    x = _GRID.pivots
    scale = max(1.0, math.fsum(x * parts.death_coag),
                math.fsum(x * parts.death_frag))
    coag_gap = (math.fsum(x * parts.birth_coag) + parts.edge_mass
                - math.fsum(x * parts.death_coag))
    frag_gap = math.fsum(x * parts.birth_frag) - math.fsum(x * parts.death_frag)
    assert abs(coag_gap) <= 1e-10 * scale
    assert abs(frag_gap) <= 1e-10 * scale
    count_gap = (math.fsum(parts.birth_frag) + parts.subpivot_count
                 - 2.5 / 1.5 * math.fsum(parts.death_frag))
    assert abs(count_gap) <= 1e-10 * max(1.0, math.fsum(parts.death_frag))
