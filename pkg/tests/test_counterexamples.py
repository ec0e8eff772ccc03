import math

import numpy as np
import pytest

from motdual.costs import GridCost
from motdual.counterexamples import (_tangency, cr_diagnostic, fit_log_constant, gen_cr_cost, gen_linear_growth,
                                     gen_local_convexity, gen_nonintegrable, linear_growth_diagnostic,
                                     local_convexity_diagnostic, log_slope, xi, xi_prime)
from motdual.dual import verify_duality
from motdual.errors import BadParameters
from motdual.measures import check_convex_order
from motdual.primal import solve_primal


def test_linear_growth_cost_values():
    fam = gen_linear_growth(2)
    c = fam.cost
    assert [c.value(1, 0), c.value(1, 2), c.value(2, 1), c.value(2, 3)] == [0.0, 4.0, 1.0, 9.0]
    assert fam.triple.g_at([-1.0]).tolist() == [-1.0]
    assert fam.coupling.is_valid(fam.mu, fam.nu)


def test_linear_growth_triple_is_optimal():
    for N in (3, 6):
        fam = gen_linear_growth(N)
        rep = verify_duality(fam.triple, fam.mu, fam.nu, fam.cost, fam.coupling)
        assert rep.passes()
        assert solve_primal(fam.mu, fam.nu, fam.cost).value == pytest.approx(fam.coupling.value, abs=1e-12)


def test_local_convexity_small_level():
    fam = gen_local_convexity(2)
    np.testing.assert_allclose(fam.grid["y"], [0.0, 1.0, 1.25])
    np.testing.assert_allclose(fam.mu.positions, [0.5, 1.125, 1.25])
    np.testing.assert_allclose(fam.mu.weights, [1 / 3] * 3)
    assert fam.cost.value(0.5, 0.5) == 0.0
    assert fam.cost.value(0.5, 1.25) == -0.25
    assert fam.cost.value(1.125, 0.0) == -1.0


@pytest.mark.parametrize("bad", [
    lambda: gen_linear_growth(1),
    lambda: gen_local_convexity(1),
    lambda: gen_cr_cost(2.0, 1.2, 8),
    lambda: gen_cr_cost(1.5, 1.0, 8),
    lambda: gen_cr_cost(1.5, 1.4, 8),
    lambda: gen_nonintegrable(4),
])
def test_bad_parameters(bad):
    with pytest.raises(BadParameters):
        bad()


@pytest.mark.parametrize("make", [gen_linear_growth, gen_local_convexity, lambda N: gen_cr_cost(1.5, 1.2, N),
                                  lambda N: gen_nonintegrable(max(N, 8))])
def test_every_level_is_a_valid_instance(make):
    for N in (4, 8, 16):
        fam = make(N)
        assert check_convex_order(fam.mu, fam.nu).ordered
        assert fam.coupling.is_valid(fam.mu, fam.nu)


def test_staircase_levels_are_nested():
    a, b = gen_local_convexity(8), gen_local_convexity(16)
    np.testing.assert_array_equal(b.grid["y"][:9], a.grid["y"])
    np.testing.assert_array_equal(b.grid["x"][:8], a.grid["x"][:8])


@pytest.mark.parametrize("make", [gen_local_convexity, lambda N: gen_cr_cost(1.5, 1.2, N)])
def test_staircase_coupling_is_unique(make):
    fam = make(8)
    lp = solve_primal(fam.mu, fam.nu, fam.cost)
    np.testing.assert_allclose(lp.coupling.pi, fam.coupling.pi, atol=1e-12)


def test_xi_shape():
    assert float(xi(0.5)) == 0.0
    ys = np.linspace(0.01, 0.99, 99)
    assert np.all(xi(ys) <= 1e-15)
    assert np.all(np.diff(xi_prime(ys)) < 0)


def test_tangency_at_centre_is_symmetric():
    f, h, lo, hi = _tangency(0.5)
    assert h == pytest.approx(0.0, abs=1e-10)
    assert lo + hi == pytest.approx(1.0, abs=1e-10)
    assert f - abs(0.5 - lo) == pytest.approx(float(xi(lo)), abs=1e-12)


def test_nonintegrable_triple_verifies():
    fam = gen_nonintegrable(16)
    rep = verify_duality(fam.triple, fam.mu, fam.nu, fam.cost, fam.coupling)
    assert rep.max_ineq_violation <= 1e-10
    assert rep.max_support_residual <= 1e-10
    assert solve_primal(fam.mu, fam.nu, fam.cost).value == pytest.approx(fam.coupling.value, abs=1e-9)


def test_local_convexity_diagnostic_small():
    d = local_convexity_diagnostic(8)
    assert d["slope_decrease_ok"]
    assert d["statistic"] <= d["bound"] + 1e-9
    assert d["shape_violations"]


def test_cr_diagnostic_drops_are_positive():
    d = cr_diagnostic(1.5, 1.2, 16)
    assert np.all(d["drops"] > 0)
    assert d["expected_slope"] == pytest.approx(-0.6)
    assert d["cumulative"] < 0


def test_log_fit_helpers():
    levels = [2, 4, 8]
    values = [-math.log(n) + 3 for n in levels]
    assert fit_log_constant(levels, values, 1.0) == pytest.approx(3.0)
    assert log_slope(levels, values) == pytest.approx(-1.0)


def test_staircase_coupling_ignores_interior_cost_perturbation():
    fam = gen_local_convexity(8)
    x, y = fam.mu.positions, fam.nu.positions
    rng = np.random.default_rng(1)
    for _ in range(5):
        C = fam.cost.matrix(x, y) + rng.normal(scale=0.5, size=(len(x), len(y)))
        lp = solve_primal(fam.mu, fam.nu, GridCost(x, y, C))
        np.testing.assert_allclose(lp.coupling.pi, fam.coupling.pi, atol=1e-12)


def test_divergence_statistics_are_monotone_in_level():
    g = linear_growth_diagnostic((4, 8, 16))["g_at_minus_one"]
    local = [local_convexity_diagnostic(N)["statistic"] for N in (4, 8, 16)]
    cr = [cr_diagnostic(1.5, 1.2, N)["cumulative"] for N in (8, 16, 32)]
    for seq in (g, local, cr):
        assert all(b <= a for a, b in zip(seq, seq[1:]))
