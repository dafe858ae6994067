import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from stepscat import numerics as N
from stepscat.potentials import sech2


def beta_moment(k: int, singularity: str) -> float:
    """int_0^1 x^k w(x) dx for the inverse square root weights."""
    if singularity == "inverse-sqrt-both":
        return float(special.beta(k + 0.5, 0.5))
    if singularity == "inverse-sqrt-left":
        return 1.0 / (k + 0.5)
    if singularity == "inverse-sqrt-right":
        return float(special.beta(k + 1, 0.5))
    return 1.0 / (k + 1)


class TestRealGrid:
    def test_uniform_and_chebyshev(self):
        g = N.RealGrid.uniform(0, 1, 5)
        assert g.kind == "uniform" and len(g) == 5
        c = N.RealGrid.chebyshev(-1, 3, 9)
        assert c.band == (-1, 3)
        assert np.all(np.diff(c.points) > 0)
        assert c.points.min() > -1 and c.points.max() < 3

    @pytest.mark.parametrize("pts", [[0.0], [0.0, 0.0], [1.0, 0.5]])
    def test_rejects_bad_points(self, pts):
        with pytest.raises(ValueError):
            N.RealGrid(np.array(pts))

    def test_chebyshev_needs_band(self):
        with pytest.raises(ValueError):
            N.RealGrid(np.array([0.0, 1.0]), "chebyshev-mapped")


class TestPropagateODE:
    def test_plane_wave(self):
        y, dy = N.propagate_ode(lambda x: 0.0, 1.0, 0.0, (1.0, 1j), math.pi)
        assert abs(y - (-1)) < 1e-8
        assert abs(dy - (-1j)) < 1e-8

    def test_decaying_exponential(self):
        y, dy = N.propagate_ode(lambda x: 0.0, -1.0, 0.0, (1.0, -1.0), 1.0)
        assert abs(y - math.exp(-1)) < 1e-9
        assert abs(dy + math.exp(-1)) < 1e-9

    def test_sech_bound_state(self):
        # y = sech x solves -y'' - 2 sech^2 x y = -y
        q = lambda x: -2.0 / math.cosh(x) ** 2
        y0 = (1 / math.cosh(5.0), -math.tanh(5.0) / math.cosh(5.0))
        y, dy = N.propagate_ode(q, -1.0, 5.0, y0, 0.0)
        assert abs(y - 1.0) < 1e-8
        assert abs(dy) < 1e-8

    def test_wronskian_preserved(self):
        # relative to the size of the products forming W; for z below the spectrum both
        # solutions grow like exp(sqrt(2) * 5) and W is a cancellation of O(1e6) terms
        q = lambda x: 0.7 * math.exp(-x * x) + 0.3 * math.sin(3 * x)
        z = np.array([0.4 + 0.3j, 5.0 + 0.01j, 30.0 + 0j, -2.0 + 0j])
        a = N.propagate_ode(q, z, -2.0, (np.ones(4), np.zeros(4)), 3.0)
        b = N.propagate_ode(q, z, -2.0, (np.zeros(4), np.ones(4)), 3.0)
        W = a[0] * b[1] - a[1] * b[0]
        scale = np.abs(a[0] * b[1]) + np.abs(a[1] * b[0])
        assert np.max(np.abs(W - 1.0) / scale) < 1e-10
        # bounded (oscillatory) cases hold without the normalization
        assert np.max(np.abs(W[1:3] - 1.0)) < 1e-10

    def test_x_eval_and_square_integral(self):
        y, dy, sq = N.propagate_ode(lambda x: 0.0, -1.0, 0.0, (1.0, -1.0), 2.0,
                                    x_eval=[0.5, 1.0, 2.0], square_integral=True)
        assert np.allclose(y, np.exp(-np.array([0.5, 1.0, 2.0])), atol=1e-9)
        assert abs(sq[-1] - 0.5 * (1 - math.exp(-4))) < 1e-9

    def test_non_finite_coefficient(self):
        with pytest.raises(ValueError):
            N.propagate_ode(lambda x: float("nan"), 1.0, 0.0, (1.0, 0.0), 1.0)

    def test_backwards_direction(self):
        fwd = N.propagate_ode(lambda x: 0.0, 4.0, 0.0, (1.0, 2j), 1.3)
        back = N.propagate_ode(lambda x: 0.0, 4.0, 1.3, fwd, 0.0)
        assert abs(back[0] - 1) < 1e-9 and abs(back[1] - 2j) < 1e-9


class TestBandQuadrature:
    def test_arcsine_weight_gives_pi(self):
        r = N.band_quadrature((0.0, 1.0), "inverse-sqrt-both", 8)
        assert abs(r.integrate(np.ones(len(r))) - math.pi) < 1e-12
        assert r.nodes.min() > 0 and r.nodes.max() < 1

    def test_plain_weight(self):
        r = N.band_quadrature((0.0, 1.0), "none", 4)
        assert abs(r.integrate(r.nodes) - 0.5) < 1e-14

    @pytest.mark.parametrize("mapping", ["polynomial", "sqrt"])
    def test_semi_infinite_gaussian_integral(self, mapping):
        r = N.band_quadrature((0.0, np.inf), "inverse-sqrt-left", 48, cutoff=60.0, mapping=mapping)
        assert abs(r.integrate(np.exp(-r.nodes)) - math.sqrt(math.pi)) < 1e-8
        assert r.tail_bound == pytest.approx(1 / math.sqrt(60.0))

    @pytest.mark.parametrize("singularity", list(N.SINGULARITIES))
    def test_beta_moments_to_degree_eight(self, singularity):
        r = N.band_quadrature((0.0, 1.0), singularity, 9)
        for k in range(9):
            assert abs(r.integrate(r.nodes ** k) - beta_moment(k, singularity)) < 1e-10 * beta_moment(k, singularity)

    def test_errors(self):
        with pytest.raises(ValueError):
            N.band_quadrature((0.0, 1.0), "log", 8)
        with pytest.raises(ValueError):
            N.band_quadrature((0.0, 1.0), "none", 3)
        with pytest.raises(ValueError):
            N.band_quadrature((1.0, np.inf), "inverse-sqrt-left", 8, cutoff=0.5)

    @settings(max_examples=40, deadline=None)
    @given(coef=st.lists(st.floats(-3, 3), min_size=1, max_size=9),
           a=st.floats(-5, 5), width=st.floats(0.1, 10))
    def test_polynomial_exactness_property(self, coef, a, width):
        b = a + width
        r = N.band_quadrature((a, b), "inverse-sqrt-both", 9)
        # reference via the unit-interval moments after the affine map
        p = np.polynomial.Polynomial(coef)
        t = np.polynomial.Polynomial([a, width])
        pu = p(t)
        exact = sum(c * beta_moment(k, "inverse-sqrt-both") for k, c in enumerate(pu.coef))
        got = r.integrate(p(r.nodes))
        assert abs(got - exact) <= 1e-10 * (1 + sum(abs(c) * beta_moment(k, "inverse-sqrt-both")
                                                    for k, c in enumerate(pu.coef)))


class TestFredholm:
    def test_zero_kernel(self):
        sol = N.solve_fredholm2(lambda s, t: 0.0 * s * t, lambda s: np.sin(s), (0.0, 2.0), 32)
        assert np.max(np.abs(sol.values + np.sin(sol.nodes))) < 1e-14

    def test_rank_one_half_line(self):
        t0 = 0.3
        sol = N.solve_fredholm2(lambda s, t: 2 * np.exp(-(s + t)),
                                lambda s: 2 * np.exp(-(s + t0)), (0.0, np.inf), 64)
        exact = -np.exp(-(sol.nodes + t0))
        assert np.max(np.abs(sol.values - exact)) < 1e-10
        assert sol.residual < 1e-12

    def test_self_convergence(self):
        kern = lambda s, t: 0.5 * np.exp(-np.abs(s - t)) * np.cos(s + t)
        rhs = lambda s: np.exp(-s * s)
        coarse = N.solve_fredholm2(kern, rhs, (-1.0, 2.0), 64, panels=8)
        fine = N.solve_fredholm2(kern, rhs, (-1.0, 2.0), 128, panels=16)
        mid = N.solve_fredholm2(kern, rhs, (-1.0, 2.0), 96, panels=12)
        x = np.linspace(-1, 2, 31)
        estimate = np.max(np.abs(coarse(x) - mid(x)))
        assert np.max(np.abs(fine(x) - coarse(x))) <= 2 * estimate + 1e-13

    def test_singular_system_reported(self):
        # f + int_0^1 (-1) f dt = 0 has the constant solution: I + K is singular
        with pytest.raises(N.SingularSystemError):
            N.solve_fredholm2(lambda s, t: -1.0 + 0 * s * t, lambda s: 0 * s + 1.0, (0.0, 1.0), 16,
                              panels=1)


class TestRoots:
    def test_quadratic(self):
        assert N.bracket_roots(lambda x: x * x - 1, (-2.0, 0.0)) == pytest.approx([-1.0], abs=1e-10)

    def test_sine(self):
        assert N.bracket_roots(math.sin, (1.0, 7.0)) == pytest.approx([math.pi, 2 * math.pi], abs=1e-10)

    def test_max_roots(self):
        with pytest.raises(N.IncompleteScanError) as exc:
            N.bracket_roots(math.sin, (0.5, 40.0), max_roots=3)
        assert len(exc.value.roots) == 3

    def test_bound_state_of_sech_well(self):
        from stepscat.direct import _wtilde_real

        q = sech2()
        roots = N.bracket_roots(lambda t: float(_wtilde_real(q, [t])[0]), (-4.0, -1e-3))
        assert roots == pytest.approx([-1.0], abs=1e-8)


class TestDifferences:
    @pytest.mark.parametrize("order,expected_rate", [(4, 4), (6, 6)])
    def test_convergence_rate(self, order, expected_rate):
        errs = []
        for h in (0.1, 0.05):
            x = np.arange(-2, 2 + h / 2, h)
            d = N.fd_derivative(np.sin(x), h, order)
            inner = slice(order, -order)
            errs.append(np.max(np.abs(d[inner] - np.cos(x[inner]))))
        rate = math.log2(errs[0] / errs[1])
        assert rate > expected_rate - 0.3

    def test_linear_exact(self):
        x = np.linspace(0, 1, 11)
        assert np.allclose(N.fd_derivative(3 * x + 1, 0.1, 6), 3.0, atol=1e-12)


class TestNystrom:
    def test_solves_discrete_system(self, rng):
        n = 20
        A = 0.1 * rng.standard_normal((n, n))
        w = rng.uniform(0.5, 1.0, n)
        b = rng.standard_normal(n)
        f, res, cond = N.nystrom_solve(A, w, b)
        assert np.max(np.abs(f + A @ (w * f) + b)) < 1e-13
        assert res < 1e-13 and cond < 10

    def test_composite_gauss_integrates(self):
        nodes, w = N.composite_gauss(np.linspace(0, 2, 5), 4)
        assert abs(np.sum(w * nodes ** 7) - 2 ** 8 / 8) < 1e-12
