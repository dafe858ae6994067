import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stepscat import background as B
from stepscat.potentials import lame_profile

# first gap of p = 0.3 cos(2 pi x), period 1: monodromy root-finding at n_scan = 1200 and
# ODE tolerance 1e-12 (differs from the default resolution by 1.2e-9)
COSINE_GAP = (9.7193199762888032, 10.019318893545329)


@pytest.fixture(scope="module")
def lame_right():
    prof, period = lame_profile(0.5)
    return B.build_periodic_background(1, prof, period, z_scan=(-1.0, 450.0))


@pytest.fixture(scope="module")
def lame_left():
    prof, period = lame_profile(0.5)
    return B.build_periodic_background(-1, prof, period, z_scan=(-1.0, 450.0))


@pytest.fixture(scope="module")
def cosine():
    return B.build_periodic_background(
        1, lambda x: 0.3 * np.cos(2 * np.pi * np.asarray(x, float)), 1.0, z_scan=(-1.0, 60.0),
        n_scan=600)


def upper_half_plane(rng, n=20):
    return rng.uniform(-3, 6, n) + 1j * rng.uniform(0.05, 3, n)


class TestConstantBackground:
    def test_spectrum_and_g(self):
        m = B.build_constant_background(1, 0.0)
        assert m.bands() == [(0.0, np.inf)]
        assert m.g(np.array([-1.0 + 0j]))[0] == pytest.approx(0.5)

    def test_g_on_the_band(self):
        m = B.build_constant_background(1, 0.0)
        g1 = m.g(np.array([1.0 + 0j]))[0]
        assert g1 == pytest.approx(0.5j)
        assert (g1 / 1j).real > 0
        assert m.g(np.array([4.0 + 0j]))[0] == pytest.approx(0.25j)

    def test_shifted_plane_wave(self):
        m = B.build_constant_background(1, 1.0)
        x = np.linspace(-2, 2, 9)
        psi, dpsi = m.weyl(np.array([2.0 + 0j]), x)
        assert np.allclose(psi[:, 0], np.exp(1j * x), atol=1e-14)
        assert np.allclose(dpsi[:, 0], 1j * np.exp(1j * x), atol=1e-14)

    def test_weyl_pair_free(self):
        m = B.build_constant_background(1, 0.0)
        z = np.array([2.0 + 0.5j])
        x = np.array([-1.0, 0.3, 2.0])
        k = np.sqrt(z[0])
        assert np.allclose(m.weyl(z, x)[0][:, 0], np.exp(1j * k * x))
        assert np.allclose(m.weyl(z, x, "breve")[0][:, 0], np.exp(-1j * k * x))


class TestPeriodicBackground:
    def test_zero_profile_single_band(self):
        m = B.build_periodic_background(1, lambda x: 0 * np.asarray(x, float), 1.3, z_scan=(-1.0, 40.0),
                                        n_scan=400)
        assert m.r == 0 and m.edges[0] == pytest.approx(0.0, abs=1e-8)

    def test_constant_profile_shifted_band(self):
        m = B.build_periodic_background(1, lambda x: 1 + 0 * np.asarray(x, float), 1.0,
                                        z_scan=(-1.0, 40.0), n_scan=400)
        assert m.r == 0 and m.edges[0] == pytest.approx(1.0, abs=1e-8)

    def test_cosine_first_gap(self, cosine):
        (a, b), = cosine.gaps()
        assert a < np.pi ** 2 < b
        assert b - a == pytest.approx(0.3, abs=5e-3)  # first-order perturbation theory
        assert (a, b) == pytest.approx(COSINE_GAP, abs=1e-7)

    def test_cosine_discriminant_at_edges(self, cosine):
        d = B.discriminant(cosine, cosine.edges.astype(complex))
        assert np.max(np.abs(np.abs(d) - 2)) < 1e-8

    def test_lame_edges_and_divisor(self, lame_right, lame_left):
        for m in (lame_right, lame_left):
            assert np.allclose(m.edges, [0.5, 1.0, 1.5], atol=1e-8)
            assert m.gaps()[0][0] <= m.mu[0] <= m.gaps()[0][1]
            assert set(m.mu_class) <= {"M", "breve", "hat"}

    def test_degenerate_period(self):
        with pytest.raises(ValueError):
            B.build_periodic_background(1, np.cos, 0.0)

    def test_normalization(self, lame_right, rng):
        z = upper_half_plane(rng, 6)
        psi, dpsi = lame_right.weyl(z, [0.0])
        m, _ = lame_right.m_functions(z)
        assert np.allclose(psi[0], 1.0, atol=1e-12)
        assert np.allclose(dpsi[0], m, atol=1e-10)

    @pytest.mark.parametrize("side_fixture", ["lame_right", "lame_left"])
    def test_weyl_wronskian(self, side_fixture, request, rng):
        model = request.getfixturevalue(side_fixture)
        z = upper_half_plane(rng)
        xs = np.array([-1.3, 0.4, 2.9])
        p, dp = model.weyl(z, xs, "psi")
        b, db = model.weyl(z, xs, "breve")
        W = b * dp - db * p  # W(psi_breve, psi)
        target = -model.side / model.g(z)
        assert np.max(np.abs(W - target[None]) / np.abs(target[None])) < 1e-8
        assert np.max(np.abs(W - W[0][None]) / np.abs(W[0][None])) < 1e-10

    def test_conjugation_on_bands(self, lame_right):
        lam = np.array([0.7, 0.9, 2.0, 17.0]).astype(complex)
        x = np.linspace(-3, 3, 7)
        up = lame_right.weyl(lam, x, rim="upper")[0]
        lo = lame_right.weyl(lam, x, rim="lower")[0]
        assert np.max(np.abs(up - np.conj(lo))) < 1e-10

    def test_high_energy_asymptotics(self, lame_right):
        lam = np.array([1e3 + 0j])
        x = np.linspace(-1, 1, 9)
        psi = lame_right.weyl(lam, x)[0][:, 0]
        assert np.max(np.abs(psi * np.exp(-1j * np.sqrt(1e3) * x) - 1)) < 0.1

    def test_herglotz(self, lame_right, lame_left, rng):
        z = upper_half_plane(rng, 40)
        assert np.all(lame_right.g(z).imag > 0)
        assert np.all(lame_left.g(z).imag > 0)

    def test_g_positive_on_bands(self, lame_right):
        lam = np.concatenate([np.linspace(0.52, 0.98, 9), np.linspace(1.52, 30, 9)]).astype(complex)
        assert np.all((lame_right.g(lam) / 1j).real > 0)

    def test_product_formula_agrees(self, lame_right, rng):
        z = upper_half_plane(rng, 10)
        assert np.max(np.abs(lame_right.g(z) - lame_right.g_product(z))) < 1e-8


class TestSpectralTransform:
    def test_fourier_pair(self):
        m = B.build_constant_background(1, 0.0)
        f = lambda x: np.exp(-4 * np.asarray(x, float) ** 2)
        assert B.spectral_transform_pair(m, f, (-3.0, 3.0)) < 1e-6

    def test_zero_function(self):
        m = B.build_constant_background(1, 0.0)
        assert B.spectral_transform_pair(m, lambda x: 0 * np.asarray(x, float), (-1.0, 1.0)) == 0.0

    def test_one_gap_bump(self, lame_right):
        L = lame_right.period
        f = lambda x: np.exp(-8 * (np.asarray(x, float) - L / 2) ** 2)
        assert B.spectral_transform_pair(lame_right, f, (0.0, L)) < 1e-4

    def test_residual_shrinks_under_doubling(self, lame_right):
        L = lame_right.period
        f = lambda x: np.exp(-8 * (np.asarray(x, float) - L / 2) ** 2)
        coarse = B.spectral_transform_pair(lame_right, f, (0.0, L), n_lambda=40, cutoff=100.0)
        fine = B.spectral_transform_pair(lame_right, f, (0.0, L), n_lambda=80, cutoff=200.0)
        assert fine < coarse


def intervals(*pairs):
    return [(float(a), float(b)) for a, b in pairs]


class TestPartition:
    def test_figure_one_configuration(self):
        P = B.partition_bands(intervals((0, 1), (3, np.inf)), intervals((0, 1), (2, 3), (4, np.inf)))
        assert P.sigma == intervals((0, 1), (2, np.inf))
        assert P.sigma1_plus == intervals((3, 4))
        assert P.sigma1_minus == intervals((2, 3))
        assert P.sigma2 == intervals((0, 1), (4, np.inf))

    def test_identical_backgrounds(self):
        b = intervals((0.5, 1), (1.5, np.inf))
        P = B.partition_bands(b, b)
        assert P.sigma2 == b and P.sigma1_plus == [] and P.sigma1_minus == []

    def test_steplike_constants(self):
        P = B.partition_spectra(B.build_constant_background(-1, 1.0), B.build_constant_background(1, 0.0))
        assert P.sigma1_plus == intervals((0, 1))
        assert P.sigma2 == intervals((1, np.inf))
        assert P.omega3 == [] and P.boundary == [0.0]

    def test_dict_round_trip(self):
        P = B.partition_bands(intervals((0, 1), (3, np.inf)), intervals((0, 1), (2, 3), (4, np.inf)))
        Q = B.SpectrumPartition.from_dict(P.to_dict())
        assert Q == P

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(0, 12), min_size=1, max_size=5, unique=True),
           st.lists(st.integers(0, 12), min_size=1, max_size=5, unique=True))
    def test_set_algebra(self, ep, em):
        def bands(edges):
            e = sorted(edges)
            out = [(e[i], e[i + 1]) for i in range(0, len(e) - 1, 2)]
            out.append((e[-1] + 0.5 if len(e) % 2 == 0 else e[-1], np.inf))
            return intervals(*out)

        sp, sm = bands(ep), bands(em)
        P = B.partition_bands(sp, sm)
        probe = np.linspace(-0.25, 14, 229) + 1e-3

        def member(x, ints):
            return any(a <= x <= b for a, b in ints)

        for x in probe:
            in_p, in_m = member(x, sp), member(x, sm)
            assert member(x, P.sigma) == (in_p or in_m)
            assert member(x, P.sigma2) == (in_p and in_m)
            assert member(x, P.sigma1_plus) == (in_p and not in_m)
            assert member(x, P.sigma1_minus) == (in_m and not in_p)
        assert set(P.omega3) == set(P.boundary_plus) & set(P.boundary_minus)
