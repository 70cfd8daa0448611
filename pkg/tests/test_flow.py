import math

import numpy as np
import pytest
from scipy.stats import norm

from gcilab import blconst as bl
from gcilab import flow
from gcilab.errors import (
    EmptyDensity,
    InvalidParameter,
    NotCentered,
)
from gcilab.symmat import SymMatrix


def gci_datum_1d():
    eye = SymMatrix.identity(1)
    return bl.gci_datum(eye, [eye, eye])


def centered_exponential(points=4097, half_width=8.0):
    """Density proportional to e^{-a(x+1)} on [-1, inf), with the rate a
    tuned so the grid barycenter vanishes exactly (a is 1 up to the
    histogram's truncation bias)."""
    x = np.linspace(-half_width, half_width, points)
    dx = x[1] - x[0]
    # place the jump exactly at the node x = -1
    assert abs(((x + 1.0) / dx) - np.round((x + 1.0) / dx)).min() < 1e-9

    def density(a):
        return np.where(x >= -1.0, np.exp(-a * (x + 1.0)), 0.0)

    lo, hi = 0.8, 1.2
    for _ in range(60):
        a = 0.5 * (lo + hi)
        v = density(a)
        if (x * v).sum() > 0:
            lo = a
        else:
            hi = a
    return flow.GridDensity(-half_width, dx, density(0.5 * (lo + hi)))


class TestGridDensity:
    def test_gaussian_mass(self):
        f = flow.gaussian_density()
        assert f.mass == pytest.approx(1.0, abs=1e-8)

    def test_uniform_exact_mass(self):
        f = flow.uniform_density()
        assert f.mass == 1.0

    def test_from_function_clips_negatives(self):
        f = flow.grid_from_function(lambda t: math.cos(t), 8.0, 129)
        assert np.all(f.values >= 0)

    def test_points_validation(self):
        with pytest.raises(InvalidParameter):
            flow.grid_from_function(lambda t: 1.0, 8.0, 64)

    def test_csv(self, tmp_path):
        p = tmp_path / "d.csv"
        flow.gaussian_density(points=65).to_csv(p)
        lines = p.read_text().strip().split("\n")
        assert lines[0] == "x,value" and len(lines) == 66


class TestCurvatureChecks:
    def test_gaussian_both_ways(self):
        f = flow.gaussian_density()
        assert flow.logconcavity_check(f, 1.0)
        assert flow.semilogconvexity_check(f, 1.0)

    def test_uniform_logconcave_not_uniformly(self):
        f = flow.uniform_density()
        assert flow.logconcavity_check(f, 0.0)
        assert not flow.logconcavity_check(f, 1.0)

    def test_uniform_not_semilogconvex(self):
        f = flow.uniform_density()
        assert not flow.semilogconvexity_check(f, 1.0)
        assert not flow.semilogconvexity_check(f, 100.0)

    def test_quartic(self):
        f = flow.grid_from_function(lambda t: math.exp(-t**4), 4.0, 1025)
        assert flow.logconcavity_check(f, 0.0)


class TestFradelizi:
    def test_gaussian(self):
        assert flow.fradelizi_check(flow.gaussian_density()).ok

    def test_uniform(self):
        assert flow.fradelizi_check(flow.uniform_density()).ok

    def test_extremal_exponential(self):
        f = centered_exponential()
        res = flow.fradelizi_check(f)
        assert res.ok
        # extremal case: max f is within one grid cell of e * f(0)
        ratio = float(f.values.max()) / (math.e * f.value_at_zero())
        assert abs(ratio - 1.0) < 5e-3

    def test_not_centered_rejected(self):
        g = flow.gaussian_density(points=257)
        shifted = flow.GridDensity(g.xmin + 0.5, g.dx, g.values)
        with pytest.raises(NotCentered):
            flow.fradelizi_check(shifted)

    def test_random_densities(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            f = flow.random_centered_logconcave(rng)
            assert flow.fradelizi_check(f).ok


class TestBallIteration:
    def test_step_one_is_triangle(self):
        # self-convolution of the uniform on [-1,1], rescaled by sqrt(2),
        # equals the order-2 Irwin-Hall (triangle) density on [-sqrt2, sqrt2]
        f = flow.uniform_density()
        g = flow.ball_step(f)
        tri = np.clip((math.sqrt(2.0) - np.abs(g.x)) / 2.0, 0.0, None)
        assert np.max(np.abs(g.values - tri)) < 1e-6

    def test_gaussian_fixed_point(self):
        gauss = flow.gaussian_density(points=2049)
        rep = flow.ball_iterate(gauss, gauss, 5, gci_datum_1d())
        target = (2 * math.pi) ** -0.5
        for s in rep.steps:
            assert abs(s.bl_value - target) < 1e-4

    def test_uniform_six_steps(self):
        f = flow.uniform_density()
        rep = flow.ball_iterate(f, f, 6, gci_datum_1d())
        masses = [s.mass for s in rep.steps]
        assert all(abs(m - masses[0]) <= 1e-6 * masses[0] for m in masses)
        l1 = [s.l1_to_gaussian for s in rep.steps]
        assert all(b < a for a, b in zip(l1, l1[1:]))
        assert l1[-1] < 0.01

    def test_one_step_inequality(self):
        f = flow.uniform_density()
        rep = flow.ball_iterate(f, f, 6, gci_datum_1d())
        target = (2 * math.pi) ** -0.5
        for prev, nxt in zip(rep.steps, rep.steps[1:]):
            assert prev.bl_value**2 >= target * nxt.bl_value - 1e-3

    def test_logconcavity_preserved(self):
        f = flow.uniform_density()
        g = flow.ball_step(flow.ball_step(f))
        assert flow.logconcavity_check(g, 0.0)

    def test_centering_preserved(self):
        rng = np.random.default_rng(1)
        f = flow.random_centered_logconcave(rng)
        g = flow.ball_step(f)
        assert abs(g.barycenter) <= 1e-5 * g.spread


class TestDiscreteBLValue:
    def test_gaussian_pair(self):
        gauss = flow.gaussian_density(points=2049)
        v = flow.discrete_bl_value([gauss, gauss], gci_datum_1d())
        assert v == pytest.approx((2 * math.pi) ** -0.5, abs=1e-5)


class TestFokkerPlanck:
    def test_small_time_identity(self):
        f = flow.gaussian_density(points=1025)
        g = flow.fokker_planck_step(f, 1.0, 1e-6)
        assert np.max(np.abs(g.at(f.x) - f.values)) < 1e-3

    def test_long_time_gaussian_limit(self):
        f = flow.uniform_density()
        g = flow.fokker_planck_step(f, 1.0, 10.0)
        gauss = np.exp(-0.5 * g.x**2) / math.sqrt(2 * math.pi)
        assert np.abs(g.values / g.mass - gauss).sum() * g.dx < 1e-3

    def test_contracts(self):
        rng = np.random.default_rng(2)
        for t in (0.1, 0.5, 2.0):
            f = flow.random_centered_logconcave(rng, points=1025)
            g = flow.fokker_planck_step(f, 1.0, t)
            assert abs(g.mass - f.mass) <= 1e-6 * f.mass
            assert abs(g.barycenter) <= 1e-5 * max(g.spread, 1e-12)
            h = 1.0 / (1.0 - math.exp(-2.0 * t))
            assert flow.semilogconvexity_check(g, h)

    def test_parameter_validation(self):
        f = flow.gaussian_density(points=257)
        with pytest.raises(InvalidParameter):
            flow.fokker_planck_step(f, -1.0, 0.5)
        with pytest.raises(InvalidParameter):
            flow.fokker_planck_step(f, 1.0, 0.0)


class TestTruncateRecenter:
    def test_symmetric_plain(self):
        f = flow.gaussian_density(points=1025)
        out = flow.truncate_recenter(f, 4.0, 0.1)
        assert abs(out.barycenter) <= 1e-8

    def test_domination_bound(self):
        rng = np.random.default_rng(3)
        f = flow.random_centered_logconcave(rng)
        eps = 0.1
        out = flow.truncate_recenter(f, 8.0 * f.spread, eps)
        bound = (2.0 * math.e) ** eps
        slack = float(np.abs(np.diff(f.values)).max())
        assert np.all(out.values <= bound * f.values + bound * slack)

    def test_empty_truncation(self):
        # all mass sits outside the truncation radius
        vals = np.zeros(17)
        vals[0] = vals[-1] = 1.0
        f = flow.GridDensity(-4.0, 0.5, vals)
        with pytest.raises(EmptyDensity):
            flow.truncate_recenter(f, 1.0, 0.1)


class TestCltDistance:
    def test_gaussian_is_zero(self):
        assert flow.clt_distance(flow.gaussian_density()) < 1e-6

    def test_uniform_gap(self):
        # L1 gap between the uniform on [-1,1] and N(0, 1/3): the curves
        # cross at +-x0 with exp(-1.5 x0^2) = 0.5/g(0), giving ~0.3957
        g0 = math.sqrt(3.0 / (2.0 * math.pi))
        x0 = math.sqrt(-math.log(0.5 / g0) / 1.5)
        phi3 = lambda x: norm.cdf(x * math.sqrt(3.0))
        exact = 2.0 * (
            (phi3(x0) - 0.5 - 0.5 * x0)
            + (0.5 * (1.0 - x0) - (phi3(1.0) - phi3(x0)))
            + (1.0 - phi3(1.0))
        )
        assert flow.clt_distance(flow.uniform_density()) == pytest.approx(exact, abs=2e-3)


class Test2D:
    def test_gaussian_pair_value(self):
        n = 129
        x = np.linspace(-8, 8, n)
        xx, yy = np.meshgrid(x, x, indexing="ij")
        vals = np.exp(-0.5 * (xx**2 + yy**2)) / (2 * math.pi)
        g = flow.Grid2Density(-8.0, x[1] - x[0], vals)
        eye = SymMatrix.identity(2)
        d = bl.gci_datum(eye, [eye, eye])
        v = flow.discrete_bl_value_2d([g, g], d)
        assert v == pytest.approx((2 * math.pi) ** -1.0, rel=1e-3)
