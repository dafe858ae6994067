import numpy as np
import pytest

from stepscat import background as B
from stepscat import direct as D
from stepscat import potentials as P
from stepscat import transform as T


def sech_kernel(x, y):
    """Transformation kernel of -2 sech^2 x toward +infinity."""
    return -2 * np.exp(-(x + y)) / (1 + np.exp(-2 * x))


@pytest.fixture(scope="module")
def wide_sech():
    # wide enough that the cut tail (sech^2 12 ~ 1.5e-10) is below the tested accuracy
    return P.sech2(window=(-12.0, 12.0))


class TestEdgeResidues:
    @pytest.mark.parametrize("side", [1, -1])
    @pytest.mark.parametrize("c", [0.0, 1.0])
    def test_constant_background_quarter(self, side, c):
        r = T.edge_residue_kernel(B.build_constant_background(side, c))
        pts = np.linspace(-3, 3, 7)
        assert np.allclose(r.D(pts, pts[::-1], 0.7, -2.0), -side * 0.25, atol=1e-14)
        assert r.weights == pytest.approx([1.0])

    @pytest.mark.parametrize("side", [1, -1])
    def test_sum_rule_periodic(self, side, rng):
        prof, period = P.lame_profile(0.5)
        bg = B.build_periodic_background(side, prof, period, z_scan=(-1.0, 450.0))
        r = T.edge_residue_kernel(bg)
        x, y = rng.uniform(-3, 3, (2, 30))
        assert r.sum_rule_error(x, y) < 1e-8
        t, s = rng.uniform(-3, 3, (2, 30))
        assert r.symmetry_error(x, y, t, s) < 1e-12
        assert r.extrapolation_error < 1e-7

    def test_edges_match_background(self, cache):
        q = cache.potential("lame_bump")
        r = T.edge_residue_kernel(q.right)
        assert np.allclose(r.edges, [0.5, 1.0, 1.5], atol=1e-8)


class TestKernelOracles:
    def test_free_kernel_vanishes(self, cache):
        K = cache.kernel("free", 1)
        assert np.max(np.abs(K.H)) == 0.0

    def test_sech_closed_form(self, wide_sech):
        K = T.solve_transformation_kernel(wide_sech, 1)
        x = np.array([-3.0, -1.0, 0.0, 1.0, 2.5])
        y = x + np.array([0.0, 0.5, 1.0, 2.0, 0.5])
        assert np.max(np.abs(K(x, y) - sech_kernel(x, y))) < 1e-8
        assert float(K(0.0, 0.0)) == pytest.approx(-1.0, abs=1e-8)

    def test_sech_left_kernel_mirrors(self, wide_sech):
        # the well is even, so K-(x, y) = K+(-x, -y)
        K = T.solve_transformation_kernel(wide_sech, -1)
        x = np.array([-1.0, 0.0, 2.0])
        y = x - np.array([0.0, 1.5, 0.25])
        assert np.max(np.abs(K(x, y) - sech_kernel(-x, -y))) < 1e-8

    def test_default_window_truncation_level(self, cache):
        # the cut at |x| = 8 perturbs the kernel at the level of sech^2(8)
        K = cache.kernel("sech2", 1)
        assert abs(float(K(0.0, 0.0)) + 1.0) < 4 / np.cosh(8.0) ** 2

    def test_zero_below_diagonal(self, cache):
        K = cache.kernel("sech2", 1)
        assert float(K(1.0, 0.5)) == 0.0
        Km = cache.kernel("sech2", -1)
        assert float(Km(0.5, 1.0)) == 0.0

    def test_lattice_value(self, cache):
        K = cache.kernel("sech2", 1)
        assert K.lattice_value(0.0, 0.0) == pytest.approx(float(K(0.0, 0.0)), abs=1e-12)
        with pytest.raises(ValueError):
            K.lattice_value(0.0123, 0.3)


class TestChecks:
    @pytest.mark.parametrize("name", ["sech2", "step", "lame_bump", "bump"])
    def test_diagonal_identity(self, cache, name):
        q = cache.potential(name)
        for side in (1, -1):
            assert T.diagonal_identity_check(cache.kernel(name, side), q) < 1e-6

    def test_step_diagonal_tracks_tail(self, cache):
        # q - 1 < 0 everywhere and decays to the right, so K+(x, x) rises monotonically to 0
        K = cache.kernel("step", 1)
        d = K.diagonal(np.array([-4.0, 0.0, 6.0]))
        assert d[0] < d[1] < d[2] <= 0 and abs(d[2]) < 1e-4

    @pytest.mark.parametrize("name", ["sech2", "lame_bump", "step"])
    def test_reconstructs_jost(self, cache, name):
        q = cache.potential(name)
        z = np.array([2.0 + 0.5j, -0.5 + 0.2j, 0.8 + 0.05j])
        xs = np.array([-2.0, 0.0, 1.0])
        for side in (1, -1):
            K = cache.kernel(name, side)
            got = T.reconstruct_jost(K, q, z, xs)
            ref = D.jost(q, side, z, xs).value
            assert np.max(np.abs(got - ref)) < 1e-6

    @pytest.mark.parametrize("name", ["sech2", "step", "bump", "lame_bump"])
    def test_estimate_structure(self, cache, name):
        q = cache.potential(name)
        for side in (1, -1):
            rep = T.estimate_structure(cache.kernel(name, side), q)
            assert rep.passed, (side, rep.C)
            toward_infinity = rep.envelope if side > 0 else rep.envelope[::-1]
            assert np.all(np.diff(toward_infinity) <= 0)
            assert np.all(rep.envelope >= rep.C)
            assert np.max(rep.envelope) < 100 and np.max(rep.derivative_envelope) < 1e3

    @pytest.mark.parametrize("name", ["sech2", "step"])
    def test_ratio_monotone_for_tail_dominated_wells(self, cache, name):
        q = cache.potential(name)
        for side in (1, -1):
            assert T.estimate_structure(cache.kernel(name, side), q).nonincreasing

    def test_bump_ratio_rises_to_half(self, cache):
        # beyond a positive bump K+(x, y) ~ Q(x + y) / 2, so the pointwise ratio climbs to 1/2
        q = cache.potential("bump")
        rep = T.estimate_structure(cache.kernel("bump", 1), q)
        assert not rep.nonincreasing
        assert rep.C[-1] == pytest.approx(0.5, abs=0.02)

    def test_error_estimate_small(self, cache):
        K = cache.kernel("lame_bump", 1)
        assert np.nanmax(K.error) < 1e-6
        assert K.contraction >= 0
