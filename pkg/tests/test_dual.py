import numpy as np
import pytest
from scipy.optimize import linprog

from motdual.costs import PowerCost
from motdual.counterexamples import gen_local_convexity, linear_growth_diagnostic, lp_triple
from motdual.decomposition import decompose
from motdual.dual import (Affine, DualTriple, construct_dual, contact_set, envelope_g, glue,
                          halfinfinite_normalize, normalize_component, recover_component_dual,
                          truncation_chords, verify_duality)
from motdual.errors import ShapeViolation, SlacknessViolated
from motdual.measures import DiscreteMeasure
from motdual.primal import solve_primal

from _instances import kernel_instance, lp_data, multi_component_instance, touching_components_instance

DELTA0 = DiscreteMeasure.dirac(0.0)
SYM = DiscreteMeasure([-1.0, 1.0], [0.5, 0.5])
NEG_ABS = PowerCost(-1, 1)


@pytest.fixture
def canonical():
    return construct_dual(DELTA0, SYM, NEG_ABS)


def test_canonical_triple(canonical):
    t = canonical.triple
    assert canonical.method == "glued"
    assert t.f.tolist() == [1.0] and t.h.tolist() == [0.0]
    assert t.g_at([-1.0, 1.0]).tolist() == [0.0, 0.0]
    assert canonical.report.dual_value == canonical.report.primal_value == -1.0


def test_small_instance_gap():
    mu = DiscreteMeasure([-0.5, 0.0, 0.5], [0.3, 0.4, 0.3])
    nu = DiscreteMeasure([-2.0, -0.5, 0.5, 2.0], [0.125, 0.375, 0.375, 0.125])
    for cost in (PowerCost(1, 2), PowerCost(1, 1.5), NEG_ABS):
        sol = construct_dual(mu, nu, cost)
        assert sol.report.gap <= 1e-8
        assert sol.report.max_ineq_violation <= 1e-7


def test_corrupted_certificate_violates_slackness():
    mu, nu = DELTA0, SYM
    comp = decompose(mu, nu).components[0]
    coupling, _, cert = solve_primal(mu, nu, NEG_ABS)
    cert.alpha = cert.alpha + 0.5
    with pytest.raises(SlacknessViolated):
        recover_component_dual(comp, NEG_ABS, cert, coupling=coupling)


def test_envelope_single_atom_is_v():
    grid = np.linspace(-2, 2, 9)
    g = envelope_g([0.7], [-0.3], [0.25], PowerCost(1, 2), grid)
    assert np.array_equal(g, 0.7 - 0.3 * (grid - 0.25) + (0.25 - grid) ** 2)


def test_envelope_matches_double_loop():
    rng = np.random.default_rng(11)
    cost = PowerCost(1, 1.5)
    for _ in range(20):
        n = int(rng.integers(1, 6))
        atoms, f, h = np.sort(rng.uniform(-1, 1, n)), rng.normal(size=n), rng.normal(size=n)
        grid = np.sort(rng.uniform(-3, 3, 12))
        expect = [min(f[i] + h[i] * (y - atoms[i]) + cost.value(atoms[i], y) for i in range(n)) for y in grid]
        assert envelope_g(f, h, atoms, cost, grid).tolist() == expect


def test_normalize_idempotent_and_recovers_affine(canonical):
    comp = canonical.decomposition.components[0]
    t = canonical.triple
    raw = t.gauge(Affine(-2.0, -1.0))  # adds y + 2
    out, rep = normalize_component(raw, comp, 1)
    # -|x - y| is concave, so g sits above zero inside
    assert rep.max_inside == pytest.approx(1.0) and rep.endpoint_residual == 0.0
    L = out.normalization[1]
    assert L.intercept == pytest.approx(2.0) and L.slope == pytest.approx(1.0)
    np.testing.assert_allclose(out.g, t.g, atol=1e-14)
    again, _ = normalize_component(out, comp, 1)
    np.testing.assert_allclose(again.g, out.g, atol=1e-14)
    np.testing.assert_allclose(again.f, out.f, atol=1e-14)


def test_normalize_strict_shape_violation():
    fam = gen_local_convexity(8)
    comp = decompose(fam.mu, fam.nu).components[0]
    t, _ = lp_triple(fam)
    sub = t.subset(np.isin(t.atoms, comp.mu.positions))
    _, rep = normalize_component(sub, comp, 1)
    assert not rep.ok
    with pytest.raises(ShapeViolation):
        normalize_component(sub, comp, 1, strict=True)


def test_halfinfinite_repeated_compact_triple(canonical):
    v = halfinfinite_normalize([canonical.triple] * 4, NEG_ABS, left=-1.0)
    assert v.converged
    assert v.limit == v.profile[-1]


def _two_sided_ladder(N, q=0.5):
    x = np.arange(1, N + 1, dtype=float)
    y = np.arange(0, N + 2, dtype=float)
    w = q**x / np.sum(q**x)
    nw = np.zeros(N + 2)
    nw[:N] += w / 2
    nw[2:] += w / 2
    return DiscreteMeasure(x, w), DiscreteMeasure(y, nw)


def test_halfinfinite_converges_for_absolute_value():
    cost = PowerCost(1, 1)
    raws = [construct_dual(*_two_sided_ladder(N), cost).triple for N in (4, 8, 16, 32)]
    v = halfinfinite_normalize(raws, cost, left=0.0)
    assert v.converged
    assert abs(v.limit) <= 1e-12


def test_halfinfinite_linear_growth_does_not_converge():
    d = linear_growth_diagnostic()
    assert d["g_at_minus_one"] == [-3.0, -7.0, -15.0]
    assert not d["verdict"].converged


def test_glue_single_component_equals_component_triple(canonical):
    dec = canonical.decomposition
    glued, rep = glue(dec, [canonical.triple], NEG_ABS, DELTA0)
    assert rep.ok
    assert np.array_equal(glued.g, canonical.triple.g)
    assert np.array_equal(glued.f, canonical.triple.f)


def test_glue_identity_coupling():
    mu = DiscreteMeasure([0.0, 1.0, 3.0], [0.2, 0.5, 0.3])
    cost = PowerCost(1, 2)
    sol = construct_dual(mu, mu, cost)
    assert sol.method == "glued"
    assert sol.decomposition.components == []
    np.testing.assert_allclose(sol.triple.f, [-cost.value(x, x) for x in mu.positions], atol=0)
    np.testing.assert_allclose(sol.triple.g_at(mu.positions), 0.0, atol=1e-12)
    assert sol.report.gap <= 1e-12


def test_identity_coupling_concave_cost_falls_back():
    # v_x(y) < 0 = g(y) at the other diagonal atoms, so the diagonal triple alone is infeasible
    mu = DiscreteMeasure([0.0, 1.0, 3.0], [0.2, 0.5, 0.3])
    sol = construct_dual(mu, mu, NEG_ABS)
    assert sol.method == "lp-fallback"
    assert sol.glued_report.max_support_residual > 1
    assert sol.report.passes()


def test_glue_touching_components():
    mu, nu = touching_components_instance()
    sol = construct_dual(mu, nu, PowerCost(1, 1))
    assert len(sol.decomposition.components) == 2
    assert sol.method == "glued" and sol.glue_report.ok
    assert sol.report.gap <= 1e-8


def test_glue_multi_component_convex():
    rng = np.random.default_rng(5)
    for _ in range(10):
        mu, nu = multi_component_instance(rng, k=2, diagonal=1)
        sol = construct_dual(mu, nu, PowerCost(1, 2))
        assert sol.method == "glued"
        assert sol.report.passes()


def test_verify_canonical_and_perturbed(canonical):
    assert canonical.report.max_ineq_violation <= 1e-12
    assert canonical.report.gap <= 1e-12
    t = canonical.triple
    g = t.g.copy()
    g[t.grid_index([1.0])] += 1.0
    bad = DualTriple(t.atoms, t.f, t.h, t.grid, g)
    rep = verify_duality(bad, DELTA0, SYM, NEG_ABS, canonical.coupling)
    assert rep.max_ineq_violation >= 1 - 1e-9
    assert not rep.passes()


def test_contact_set_canonical(canonical):
    assert contact_set(canonical.triple, DELTA0, SYM, NEG_ABS).pairs == {(0, 0), (0, 1)}


def test_contact_set_contains_other_optimal_supports():
    rng = np.random.default_rng(8)
    for k in range(15):
        mu, nu, _ = kernel_instance(rng, 3, 5, grid_step=0.5)
        cost = PowerCost(1, 1) if k % 2 else NEG_ABS
        sol = construct_dual(mu, nu, cost)
        C = contact_set(sol.triple, mu, nu, cost, eq_tol=1e-7)
        A, b, c = lp_data(mu, nu, cost)
        for method in ("highs-ds", "highs-ipm"):
            res = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method=method)
            pi = res.x.reshape(len(mu), len(nu))
            for i, j in np.argwhere(pi > 1e-7):
                assert (int(i), int(j)) in C


def test_gauge_invariance_and_monotone_envelope():
    rng = np.random.default_rng(2)
    cost = PowerCost(1, 2)
    mu, nu, _ = kernel_instance(rng, 4, 6)
    sol = construct_dual(mu, nu, cost)
    base = sol.report
    moved = verify_duality(sol.triple.gauge(Affine(0.7, -1.3)), mu, nu, cost, sol.coupling)
    assert moved.max_ineq_violation == pytest.approx(base.max_ineq_violation, abs=1e-9)
    assert moved.gap == pytest.approx(base.gap, abs=1e-9)
    t = sol.triple
    bump = t.f + rng.uniform(0, 1, t.f.size)
    assert np.all(envelope_g(bump, t.h, t.atoms, cost, t.grid) >= envelope_g(t.f, t.h, t.atoms, cost, t.grid))


def test_truncation_chords_bounded_for_convex_costs():
    rng = np.random.default_rng(3)
    for k in range(20):
        mu, nu, _ = kernel_instance(rng, 5, 7)
        cost = PowerCost(1, 2) if k % 2 else PowerCost(1, 1.5)
        sol = construct_dual(mu, nu, cost)
        chords = truncation_chords(sol.triple, cost, sol.coupling)
        first = chords[0]
        a, b = first.lo, first.hi
        t = sol.triple
        inner = t.grid[(t.grid >= a) & (t.grid <= b)]
        M = np.abs(t.v(cost, inner)[first.atom]).max()
        for ch in chords:
            assert abs(float(ch.chord(a))) <= M + 1e-9
            assert abs(float(ch.chord(b))) <= M + 1e-9
