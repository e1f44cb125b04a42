from __future__ import annotations

import math

import numpy as np
import pytest

from coagfrag.discretization import build_grid
from coagfrag.errors import DomainError
from coagfrag.oracles import (ConstantKernelBenchmark, LinearBreakupBenchmark,
                              certify_benchmark, constant_kernel_number)


def test_constant_kernel_number_decay():
    assert constant_kernel_number(0.0) == 1.0
    assert constant_kernel_number(2.0) == 0.5
    assert math.isclose(constant_kernel_number(2.0, initial_number=2.0),
                        2.0 / 3.0, rel_tol=1e-15)
    with pytest.raises(DomainError):
        constant_kernel_number(-0.1)


def test_constant_kernel_benchmark_values():
    b = ConstantKernelBenchmark()
    assert b.number(2.0) == 0.5
    assert b.mass(7.0) == 1.0
    assert math.isclose(b.density(1.5, 0.0), math.exp(-1.5), rel_tol=1e-15)
    # at t = 2 the density is 0.25 exp(-x/2)
    assert math.isclose(b(3.0, 2.0), 0.25 * math.exp(-1.5), rel_tol=1e-15)


def test_constant_kernel_cell_counts_telescope():
    b = ConstantKernelBenchmark()
    grid = build_grid(1e-6, 200.0, 100)
    for t in (0.0, 1.0, 2.0):
        counts = b.cell_counts(grid, t)
        m = b.number(t)
        closed = m * (math.exp(-m * 1e-6) - math.exp(-m * 200.0))
        assert math.isclose(math.fsum(counts), closed, rel_tol=1e-12)
        assert math.isclose(math.fsum(counts), b.number(t), rel_tol=1e-4)
        assert np.all(counts >= 0.0)


def test_linear_breakup_benchmark_values():
    b = LinearBreakupBenchmark()
    assert b.number(1.0) == 2.0
    assert b.mass(3.0) == 1.0
    assert math.isclose(b.density(0.5, 1.0), 4.0 * math.exp(-1.0), rel_tol=1e-15)


def test_linear_breakup_cell_counts_telescope():
    b = LinearBreakupBenchmark()
    grid = build_grid(1e-6, 60.0, 80)
    counts = b.cell_counts(grid, 1.0)
    closed = 2.0 * (math.exp(-2e-6) - math.exp(-120.0))
    assert math.isclose(math.fsum(counts), closed, rel_tol=1e-12)
    assert math.isclose(math.fsum(counts), 2.0, rel_tol=1e-4)


def test_benchmarks_satisfy_their_balances():
    for benchmark in (ConstantKernelBenchmark(), LinearBreakupBenchmark()):
        report = certify_benchmark(benchmark)
        assert report.points == 40 * 4
        assert report.passed(1e-6), (report.benchmark, report.max_rel_residual)
        # the closed forms are exact; residuals sit at quadrature roundoff
        assert report.max_rel_residual <= 1e-10


def test_certify_benchmark_rejects_bad_sizes():
    with pytest.raises(DomainError):
        certify_benchmark(ConstantKernelBenchmark(), xs=np.array([0.0, 1.0]))


def test_balance_residual_pointwise():
    b = LinearBreakupBenchmark()
    lhs, rhs = b.balance_residual(0.5, 1.0)
    assert math.isclose(lhs, rhs, rel_tol=1e-10)
    c = ConstantKernelBenchmark()
    lhs, rhs = c.balance_residual(2.0, 0.5)
    assert math.isclose(lhs, rhs, rel_tol=1e-10)
