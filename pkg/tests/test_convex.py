import numpy as np
import pytest

from gcilab import convex as cv
from gcilab.errors import DimensionError, InvalidInput, OriginNotInterior
from gcilab.symmat import Subspace, SymMatrix


def square():
    return cv.Polytope.box([-1.0, -1.0], [1.0, 1.0])


class TestMembership:
    def test_square_contains_origin(self):
        assert cv.contains(square(), [0.0, 0.0])

    def test_slab_excludes_outside_point(self):
        s = cv.Slab([1.0, 0.0], -1.0, 1.0)
        assert not cv.contains(s, [2.0, 0.0])

    def test_intersection_of_slabs(self):
        s1 = cv.Slab([1.0, 0.0], -1.0, 1.0)
        s2 = cv.Slab([0.0, 1.0], -1.0, 1.0)
        assert cv.contains(cv.intersect(s1, s2), [0.5, 0.5])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            cv.contains(square(), [0.0, 0.0, 0.0])

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(0)
        pts = rng.standard_normal((200, 2))
        k = cv.Ellipsoid.ball(2, 1.2)
        batch = cv.contains_batch(k, pts)
        assert all(batch[i] == cv.contains(k, pts[i]) for i in range(200))

    def test_ellipsoid_boundary(self):
        e = cv.Ellipsoid([0.0, 0.0], SymMatrix(np.diag([4.0, 1.0])))
        assert cv.contains(e, [2.0, 0.0])
        assert not cv.contains(e, [2.1, 0.0])

    def test_slab_unit_vector_required(self):
        with pytest.raises(InvalidInput):
            cv.Slab([2.0, 0.0], -1.0, 1.0)


class TestGauge:
    def test_unit_ball(self):
        r = cv.minkowski_gauge(cv.Ellipsoid.ball(2, 1.0), [2.0, 0.0], tol=1e-9)
        assert r == pytest.approx(2.0, abs=1e-7)

    def test_square(self):
        r = cv.minkowski_gauge(square(), [0.5, 0.25], tol=1e-9)
        assert r == pytest.approx(0.5, abs=1e-7)

    def test_recession_direction(self):
        s = cv.Slab([1.0, 0.0], -1.0, 1.0)
        assert cv.minkowski_gauge(s, [0.0, 5.0], tol=1e-9) == 0.0

    def test_origin(self):
        assert cv.minkowski_gauge(square(), [0.0, 0.0], tol=1e-9) == 0.0

    def test_origin_not_interior(self):
        shifted = cv.translate(square(), [10.0, 0.0])
        with pytest.raises(OriginNotInterior):
            cv.minkowski_gauge(shifted, [1.0, 0.0], tol=1e-9)

    def test_duality_random(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            normals = rng.standard_normal((8, 2))
            normals /= np.linalg.norm(normals, axis=1, keepdims=True)
            k = cv.Polytope(normals, np.ones(8))
            x = rng.standard_normal(2) * 2
            r = cv.minkowski_gauge(k, x, tol=1e-9)
            if 0 < r < 2**39:
                assert cv.contains(k, x / (r + 2e-7))
                assert not cv.contains(k, x / (r - 2e-7))


class TestTransforms:
    def test_translate_membership(self):
        k = cv.translate(square(), [3.0, 0.0])
        assert cv.contains(k, [3.0, 0.0]) and not cv.contains(k, [0.0, 0.0])

    def test_translate_inverse(self):
        rng = np.random.default_rng(2)
        k = square()
        back = cv.translate(cv.translate(k, [0.7, -0.3]), [-0.7, 0.3])
        pts = rng.standard_normal((1000, 2))
        assert np.array_equal(cv.contains_batch(k, pts), cv.contains_batch(back, pts))

    def test_translate_composes(self):
        k = cv.translate(cv.translate(square(), [1.0, 0.0]), [1.0, 0.0])
        assert isinstance(k, cv.Translate) and not isinstance(k.inner, cv.Translate)

    def test_intersect_with_fullspace(self):
        rng = np.random.default_rng(3)
        k = cv.intersect(square(), cv.FullSpace(2))
        pts = rng.standard_normal((500, 2))
        assert np.array_equal(cv.contains_batch(k, pts), cv.contains_batch(square(), pts))

    def test_disjoint_intersection_empty(self):
        a = cv.translate(square(), [5.0, 0.0])
        b = cv.translate(square(), [-5.0, 0.0])
        g = np.stack(np.meshgrid(np.linspace(-8, 8, 40), np.linspace(-8, 8, 40)), -1).reshape(-1, 2)
        assert not cv.contains_batch(cv.intersect(a, b), g).any()

    def test_convexity_probe(self):
        rng = np.random.default_rng(4)
        k = cv.Polytope(rng.standard_normal((6, 2)), np.ones(6) * 2)
        pts = rng.standard_normal((4000, 2))
        inside = pts[cv.contains_batch(k, pts)]
        mids = 0.5 * (inside[:-1] + inside[1:])
        assert cv.contains_batch(k, mids).all()


class TestProduct:
    def test_stripe_as_product(self):
        base = cv.Polytope.box([-1.0], [1.0])
        e = Subspace(2, np.eye(2)[:, 1:])
        k = cv.product_set(base, e)
        assert cv.contains(k, [0.5, 100.0])
        assert not cv.contains(k, [1.5, 0.0])

    def test_free_coordinate_irrelevant(self):
        rng = np.random.default_rng(5)
        base = cv.Polytope.box([-0.5], [0.5])
        k = cv.product_set(base, Subspace(2, np.eye(2)[:, 1:]))
        x = rng.standard_normal((300, 2))
        y = x.copy()
        y[:, 1] = rng.standard_normal(300) * 10
        assert np.array_equal(cv.contains_batch(k, x), cv.contains_batch(k, y))

    def test_zero_free_subspace(self):
        k = cv.product_set(square(), Subspace(2, np.zeros((2, 0))))
        rng = np.random.default_rng(6)
        pts = rng.standard_normal((300, 2))
        assert np.array_equal(cv.contains_batch(k, pts), cv.contains_batch(square(), pts))


class TestJson:
    @pytest.mark.parametrize(
        "k",
        [
            cv.Polytope.box([-1.0, -1.0], [1.0, 1.0]),
            cv.Ellipsoid.ball(3, 2.0),
            cv.Slab([0.0, 1.0], -0.5, 0.5),
            cv.Translate(cv.Ellipsoid.ball(2, 1.0), np.array([1.0, -1.0])),
            cv.Intersection([cv.Slab([1.0, 0.0], -1.0, 1.0), cv.Slab([0.0, 1.0], -1.0, 1.0)]),
            cv.Product(cv.Polytope.box([-1.0], [1.0]), Subspace(2, np.eye(2)[:, 1:])),
            cv.FullSpace(4),
        ],
    )
    def test_round_trip(self, k):
        back = cv.set_from_json(cv.set_to_json(k))
        rng = np.random.default_rng(7)
        pts = rng.standard_normal((500, k.dim))
        assert np.array_equal(cv.contains_batch(k, pts), cv.contains_batch(back, pts))

    def test_unknown_tag(self):
        with pytest.raises(InvalidInput):
            cv.set_from_json({"type": "torus"})
