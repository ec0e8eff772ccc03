import numpy as np
import pytest

from motdual.errors import NotInConvexOrder
from motdual.measures import (DiscreteMeasure, Interval, check_convex_order, is_irreducible, positive_region,
                              potential)

from _instances import kernel_instance

SYM = DiscreteMeasure([-1.0, 1.0], [0.5, 0.5])
DELTA0 = DiscreteMeasure.dirac(0.0)


def test_construction_sorts_and_merges():
    m = DiscreteMeasure([2.0, -1.0, 2.0], [0.25, 0.5, 0.25])
    assert m.positions.tolist() == [-1.0, 2.0]
    assert m.weights.tolist() == [0.5, 0.5]
    with pytest.raises(AttributeError):
        m.positions = np.zeros(2)
    with pytest.raises(ValueError):
        m.positions[0] = 3.0


@pytest.mark.parametrize("pos, w", [([0.0, 1.0], [0.5, 0.6]), ([0.0], [0.0]), ([0.0, np.nan], [0.5, 0.5]),
                                    ([0.0, 1.0], [1.0]), ([], [])])
def test_construction_rejects_bad_input(pos, w):
    with pytest.raises(ValueError):
        DiscreteMeasure(pos, w)


def test_sub_measures():
    m = DiscreteMeasure.partial([0.0, 1.0, 2.0], [0.0, 0.2, 1e-20], drop_below=1e-12)
    assert m.atoms == [(1.0, 0.2)]
    assert len(DiscreteMeasure([], [], total=None)) == 0
    assert m.mass == pytest.approx(0.2)


def test_moments():
    assert SYM.mean == 0.0
    assert SYM.variance == 1.0
    assert SYM.second_moment == 1.0
    assert SYM.support_hull == Interval(-1.0, 1.0, True, True)
    assert SYM.weight_at(1.0) == 0.5 and SYM.weight_at(0.0) == 0.0


@pytest.mark.parametrize("m, x, expected", [(DELTA0, 2.0, 2.0), (SYM, 0.0, 1.0), (SYM, 3.0, 3.0)])
def test_potential_examples(m, x, expected):
    assert potential(m, x) == expected


def test_potential_shape():
    rng = np.random.default_rng(0)
    for _ in range(20):
        m = DiscreteMeasure(rng.normal(size=6), rng.dirichlet(np.ones(6)))
        far = float(np.max(np.abs(m.positions))) + 1.0
        # slopes -1 and +1 beyond the atoms
        assert potential(m, -far - 1) - potential(m, -far) == pytest.approx(1.0)
        assert potential(m, far + 1) - potential(m, far) == pytest.approx(1.0)
        xs = np.linspace(-far, far, 101)
        u = potential(m, xs)
        assert np.all(u >= np.abs(xs - m.mean) - 1e-12)
        outside = (xs < m.positions[0]) | (xs > m.positions[-1])
        assert np.allclose(u[outside], np.abs(xs[outside] - m.mean))
        assert np.all(np.diff(u, 2) >= -1e-12)


def test_convex_order_examples():
    assert check_convex_order(DELTA0, SYM).ordered
    rep = check_convex_order(SYM, DELTA0)
    assert not rep.ordered and rep.witness[0] in (-1.0, 0.0, 1.0)
    assert not check_convex_order(DELTA0, DiscreteMeasure.dirac(1.0)).ordered


def _hockey_stick_oracle(mu, nu, tol=1e-9):
    if abs(mu.mean - nu.mean) > tol:
        return False
    pts = np.union1d(mu.positions, nu.positions)
    return all(mu.integrate(np.abs(mu.positions - a)) <= nu.integrate(np.abs(nu.positions - a)) + tol
               for a in pts)


def test_convex_order_matches_hockey_stick_oracle():
    rng = np.random.default_rng(1)
    agree_true = 0
    for _ in range(300):
        n, m = rng.integers(1, 9, size=2)
        if rng.random() < 0.5:
            mu, nu, _ = kernel_instance(rng, n, m + 2)
            nu = DiscreteMeasure(nu.positions, nu.weights)
            if rng.random() < 0.5:
                mu, nu = nu, mu
        else:
            mu = DiscreteMeasure(rng.integers(-3, 4, n).astype(float), rng.dirichlet(np.ones(n)))
            nu = DiscreteMeasure(rng.integers(-3, 4, m).astype(float), rng.dirichlet(np.ones(m)))
        got = check_convex_order(mu, nu).ordered
        assert got == _hockey_stick_oracle(mu, nu)
        agree_true += got
    assert agree_true > 50


def test_convex_order_reflexive_and_transitive():
    rng = np.random.default_rng(2)
    for _ in range(30):
        a, b, _ = kernel_instance(rng, 4, 6)
        assert check_convex_order(a, a).ordered
        # spreading every atom of b by +-1/2 gives b <= c2
        c2 = DiscreteMeasure(np.concatenate([b.positions - 0.5, b.positions + 0.5]),
                             np.concatenate([b.weights, b.weights]) / 2)
        assert check_convex_order(a, b).ordered and check_convex_order(b, c2).ordered
        assert check_convex_order(a, c2).ordered


def test_irreducibility():
    ok, interval = is_irreducible(DELTA0, SYM)
    assert ok and interval == Interval.open(-1.0, 1.0)
    assert is_irreducible(DELTA0, DELTA0) == (False, None)
    mu = DiscreteMeasure([-2.0, 2.0], [0.5, 0.5])
    nu = DiscreteMeasure([-3.0, -1.0, 1.0, 3.0], [0.25] * 4)
    assert is_irreducible(mu, nu) == (False, None)
    assert positive_region(mu, nu) == [Interval.open(-3.0, -1.0), Interval.open(1.0, 3.0)]
    with pytest.raises(NotInConvexOrder):
        is_irreducible(SYM, DELTA0)


def test_interval():
    iv = Interval.open(0.0, 1.0)
    assert iv.contains(0.5) and not iv.contains(0.0)
    assert iv.contains(np.array([0.0, 0.5, 1.0])).tolist() == [False, True, False]
    assert str(iv) == "]0,1[" and str(Interval.closed(0.0, 1.0)) == "[0,1]"
    assert not Interval(0.0, np.inf, False, False).bounded
    with pytest.raises(ValueError):
        Interval.open(1.0, 0.0)
