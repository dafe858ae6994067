"""Background operators: constant and periodic (Floquet) half-axis backgrounds.

A background is the operator ``-d^2/dx^2 + p(x)`` that the full potential approaches on one
half-axis.  ``side = +1`` means the right half-axis, ``side = -1`` the left one.  The Weyl
solution ``psi`` of a model is the one that decays toward its own infinity, normalized by
``psi(z, 0) = 1``; ``psi_breve`` is the other Floquet branch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import interpolate, optimize

from .numerics import ODE_TOL, NumericsError, bracket_roots, propagate_ode

GAP_MERGE_WIDTH = 1e-9
GAP_MERGE_HEIGHT = 1e-7
EDGE_MU_TOL = 1e-8
# the in-period solutions feed every Weyl solution; the Wronskian W(c, s) = 1 must hold to
# 1e-10 relative along x, which the default ODE tolerance misses by a small factor
FUNDAMENTAL_TOL_FACTOR = 1e-2


class ScanError(NumericsError):
    """The energy scan does not cover the band structure."""


def side_sign(side) -> int:
    if side in (1, "+", "right", "plus"):
        return 1
    if side in (-1, "-", "left", "minus"):
        return -1
    raise ValueError(f"unknown side {side!r}")


def herglotz_sqrt(w, rim: str = "upper"):
    """Square root with ``Im >= 0``; on the positive axis the rim picks the sign.

    ``rim="upper"`` gives the boundary value from ``w + i0`` (positive root) and
    ``rim="lower"`` the one from ``w - i0`` (negative root).
    """
    w = np.asarray(w, dtype=complex)
    r = np.sqrt(w)
    r = np.where(r.imag < 0, -r, r)
    if rim == "lower":
        on_axis = (w.imag == 0) & (w.real > 0)
        r = np.where(on_axis, -r, r)
    return r


@dataclass
class FloquetData:
    """Monodromy entries and Weyl data of a background at a set of energies."""

    z: np.ndarray
    c: np.ndarray
    s: np.ndarray
    cp: np.ndarray
    sp: np.ndarray
    rho: np.ndarray  # multiplier of the branch decaying at +infinity
    m_dec: np.ndarray  # m-function of the branch decaying at +infinity
    m_grow: np.ndarray  # m-function of the branch decaying at -infinity

    @property
    def discriminant(self):
        return self.c + self.sp


@dataclass
class BackgroundModel:
    side: int
    kind: str
    c: float = 0.0
    period: float | None = None
    profile: Callable | None = field(default=None, repr=False)
    edges: np.ndarray = field(default_factory=lambda: np.zeros(1))
    mu: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mu_class: tuple = ()
    tol: float = ODE_TOL
    touch_points: np.ndarray = field(default_factory=lambda: np.zeros(0))
    scan_top: float = np.inf
    mean_potential: float = 0.0

    # ------------------------------------------------------------------ basics
    @property
    def r(self) -> int:
        return (len(self.edges) - 1) // 2

    @property
    def sheet_signs(self) -> np.ndarray:
        """+1 for Dirichlet points carried by ``psi`` (poles of m), -1 for ``psi_breve``, 0 at edges."""
        table = {"M": 1, "breve": -1, "hat": 0}
        return np.array([table[k] for k in self.mu_class], dtype=int)

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.c, dtype=float) if x.ndim else float(self.c)
        return self.profile(x)

    def bands(self) -> list[tuple[float, float]]:
        e = list(self.edges)
        out = [(e[2 * j], e[2 * j + 1]) for j in range(self.r)]
        out.append((e[-1], np.inf))
        return out

    def gaps(self) -> list[tuple[float, float]]:
        e = list(self.edges)
        return [(e[2 * j + 1], e[2 * j + 2]) for j in range(self.r)]

    def band_index(self, lam) -> np.ndarray:
        """Index of the band containing each real ``lam`` (-1 outside the spectrum)."""
        lam = np.asarray(lam, dtype=float)
        idx = np.full(lam.shape, -1, dtype=int)
        for j, (a, b) in enumerate(self.bands()):
            idx = np.where((lam >= a) & (lam <= b), j, idx)
        return idx

    def in_spectrum(self, lam) -> np.ndarray:
        return self.band_index(lam) >= 0

    def P(self, z):
        z = np.asarray(z, dtype=complex)
        return np.prod([z - e for e in self.edges], axis=0)

    def dP(self, k: int) -> float:
        e = self.edges
        return float(np.prod([e[k] - e[j] for j in range(len(e)) if j != k]))

    def _mu_of(self, kind: str) -> np.ndarray:
        return np.array([m for m, k in zip(self.mu, self.mu_class) if k == kind])

    @property
    def M(self):
        return self._mu_of("M")

    @property
    def M_breve(self):
        return self._mu_of("breve")

    @property
    def M_hat(self):
        return self._mu_of("hat")

    def delta(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.ones_like(z)
        for m in self.M:
            out = out * (z - m)
        return out

    def delta_hat(self, z, rim: str = "upper"):
        out = self.delta(z)
        for m in self.M_hat:
            out = out * herglotz_sqrt(np.asarray(z, complex) - m, rim)
        return out

    def delta_breve(self, z, rim: str = "upper"):
        z = np.asarray(z, dtype=complex)
        out = np.ones_like(z)
        for m in self.M_breve:
            out = out * (z - m)
        for m in self.M_hat:
            out = out * herglotz_sqrt(z - m, rim)
        return out

    # ------------------------------------------------------------------ Floquet
    def fundamental(self, z, x):
        """Cosine/sine-type solutions ``c, s`` and derivatives at ``x`` (arrays ``len(x) x z.shape``)."""
        z = np.asarray(z, dtype=complex)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.kind == "constant":
            k = np.sqrt(z - self.c + 0j)
            kx = x.reshape((-1,) + (1,) * z.ndim) * k
            small = np.abs(k) < 1e-12
            ks = np.where(small, 1.0, k)
            c = np.cos(kx)
            s = np.where(small, x.reshape((-1,) + (1,) * z.ndim) + 0 * kx, np.sin(kx) / ks)
            cp = -k * np.sin(kx)
            sp = np.cos(kx)
            return c, s, cp, sp
        x_all = x
        x, inverse = np.unique(x_all, return_inverse=True)
        zz = np.concatenate([z.ravel(), z.ravel()])
        n = z.size
        y0 = (np.r_[np.ones(n), np.zeros(n)], np.r_[np.zeros(n), np.ones(n)])
        order = np.argsort(x)
        xs = x[order]
        out_v = np.empty((x.size, 2 * n), complex)
        out_d = np.empty((x.size, 2 * n), complex)
        pos = xs >= 0
        for mask, sgn in ((pos, 1), (~pos, -1)):
            if not mask.any():
                continue
            pts = xs[mask] if sgn > 0 else xs[mask][::-1]
            end = pts[-1]
            if end == 0.0:
                v = np.broadcast_to(y0[0], (pts.size, 2 * n))
                d = np.broadcast_to(y0[1], (pts.size, 2 * n))
            else:
                v, d = propagate_ode(self.potential, zz, 0.0, y0, end,
                                     self.tol * FUNDAMENTAL_TOL_FACTOR, x_eval=pts)
            idx = order[mask] if sgn > 0 else order[mask][::-1]
            out_v[idx] = v
            out_d[idx] = d
        out_v, out_d = out_v[inverse], out_d[inverse]
        shape = (x_all.size,) + z.shape
        c = out_v[:, :n].reshape(shape)
        s = out_v[:, n:].reshape(shape)
        cp = out_d[:, :n].reshape(shape)
        sp = out_d[:, n:].reshape(shape)
        return c, s, cp, sp

    def floquet(self, z, rim: str = "upper") -> FloquetData:
        """Multipliers and m-functions at ``z``; real ``z`` on a band uses the requested rim."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "constant":
            k = herglotz_sqrt(z - self.c, rim)
            one = np.ones_like(z)
            return FloquetData(z, one, 0 * one, 0 * one, one, np.exp(1j * k), 1j * k, -1j * k)
        mono = self.monodromy(z)
        return self._floquet_from_monodromy(z, *mono, rim)

    def monodromy(self, z):
        """Monodromy entries ``c, s, c', s'`` after one period.

        Results are memoized per energy, so every caller sees identical values for the same
        ``z`` regardless of how the energies were batched.  This keeps quantities built from
        different calls (``T`` and ``g`` near a band edge, say) mutually consistent.
        """
        z = np.asarray(z, dtype=complex)
        cache = self.__dict__.setdefault("_mono_cache", {})
        flat = z.ravel()
        missing = np.array([v for v in dict.fromkeys(flat.tolist()) if v not in cache], dtype=complex)
        if missing.size:
            n = missing.size
            zz = np.concatenate([missing, missing])
            y0 = (np.r_[np.ones(n), np.zeros(n)], np.r_[np.zeros(n), np.ones(n)])
            v, d = propagate_ode(self.potential, zz, 0.0, y0, self.period, self.tol)
            for i, key in enumerate(missing.tolist()):
                cache[key] = (v[i], v[n + i], d[i], d[n + i])
        vals = np.array([cache[v] for v in flat.tolist()], dtype=complex).reshape(flat.size, 4)
        return tuple(vals[:, k].reshape(z.shape) for k in range(4))

    def _floquet_from_monodromy(self, z, c, s, cp, sp, rim):
        half = 0.5 * (c + sp)
        disc = np.sqrt(half * half - 1 + 0j)
        r1, r2 = half + disc, half - disc
        rho = np.where(np.abs(r1) <= np.abs(r2), r1, r2)
        real = z.imag == 0
        j = self.band_index(z.real)
        on_band = real & (j >= 0)
        if on_band.any():
            hb = half.real
            root = np.sqrt(np.clip(1 - hb * hb, 0.0, None))
            sgn = self.rim_sign(z.real)
            if rim == "lower":
                sgn = -sgn
            rho = np.where(on_band, hb + 1j * sgn * root, rho)
        m_dec = _m_from_multiplier(rho, c, s, cp, sp)
        m_grow = _m_from_multiplier(1.0 / rho, c, s, cp, sp)
        return FloquetData(z, c, s, cp, sp, rho, m_dec, m_grow)

    def rim_sign(self, lam) -> np.ndarray:
        """Sign of ``Im rho`` of the branch decaying at +infinity on the upper rim.

        It flips across every open gap and at every closed-gap touch point (interior extremum
        of the discriminant).  Above the scanned range the touch points are counted from the
        asymptotic quasi-momentum ``sqrt(lam - mean(p))``.
        """
        lam = np.asarray(lam, dtype=float)
        flips = np.zeros(lam.shape, dtype=int)
        for a, b in self.gaps():
            flips += lam >= b
        for t in self.touch_points:
            flips += lam > t
        if np.isfinite(self.scan_top):
            ell = self.period
            top = np.floor(ell * np.sqrt(max(self.scan_top - self.mean_potential, 0.0)) / np.pi)
            zone = np.floor(ell * np.sqrt(np.clip(lam - self.mean_potential, 0.0, None)) / np.pi)
            flips += np.where(lam > self.scan_top, np.maximum(zone - top, 0).astype(int), 0)
        return np.where(flips % 2 == 0, 1.0, -1.0)

    def m_functions(self, z, rim: str = "upper", fl: FloquetData | None = None):
        """``(m, m_breve)`` of this side's Weyl solutions."""
        fl = fl or self.floquet(z, rim)
        if self.side > 0:
            return fl.m_dec, fl.m_grow
        return fl.m_grow, fl.m_dec

    def g(self, z, rim: str = "upper", fl: FloquetData | None = None):
        """Spectral weight function; Herglotz in the upper half-plane."""
        fl = fl or self.floquet(z, rim)
        return -1.0 / (fl.m_dec - fl.m_grow)

    def g_product(self, z):
        """Product formula for ``g`` (branch fixed by ``Im g > 0`` for ``Im z > 0``)."""
        z = np.asarray(z, dtype=complex)
        num = np.ones_like(z)
        for m in self.mu:
            num = num * (z - m)
        val = num / (2 * np.sqrt(-self.P(z)))
        return np.where(val.imag < 0, -val, val)

    def weyl(self, z, x, branch: str = "psi", rim: str = "upper", fl: FloquetData | None = None):
        """Values and derivatives of ``psi`` (``branch="psi"``) or ``psi_breve`` at ``x``.

        Returns arrays of shape ``(len(x),) + z.shape``.
        """
        z = np.asarray(z, dtype=complex)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        fl = fl or self.floquet(z, rim)
        use_dec = (branch == "psi") == (self.side > 0)
        if branch not in ("psi", "breve"):
            raise ValueError(f"unknown branch {branch!r}")
        m = fl.m_dec if use_dec else fl.m_grow
        if self.kind == "constant":
            k = -1j * fl.m_dec  # herglotz square root of z - c
            kk = k if use_dec else -k
            ph = np.exp(1j * np.multiply.outer(x, kk))
            return ph, 1j * kk * ph
        rho = fl.rho if use_dec else 1.0 / fl.rho
        ell = self.period
        nper = np.floor(x / ell)
        xi = x - nper * ell
        uniq, inv = np.unique(xi, return_inverse=True)
        c, s, cp, sp = self.fundamental(z, uniq)
        c, s, cp, sp = c[inv], s[inv], cp[inv], sp[inv]
        powr = rho[None, ...] ** nper.reshape((-1,) + (1,) * z.ndim)
        return powr * (c + m * s), powr * (cp + m * sp)

    # ------------------------------------------------------------------ derived
    def mirrored(self) -> "BackgroundModel":
        """Background seen from the reflected axis ``x -> -x`` (side flips)."""
        if self.kind == "constant":
            return build_constant_background(-self.side, self.c)
        prof = self.profile
        return _periodic_model(-self.side, lambda x: prof(-np.asarray(x, float)), self.period,
                               self.edges.copy(), self.tol, self)

    def translated(self, shift: float) -> "BackgroundModel":
        """Background with profile ``p(x - shift)``."""
        if self.kind == "constant":
            return build_constant_background(self.side, self.c)
        prof = self.profile
        return _periodic_model(self.side, lambda x: prof(np.asarray(x, float) - shift),
                               self.period, self.edges.copy(), self.tol, self)

    def to_dict(self) -> dict:
        d = {"side": self.side, "kind": self.kind, "edges": [float(e) for e in self.edges],
             "mu": [float(m) for m in self.mu], "mu_class": list(self.mu_class)}
        if self.kind == "constant":
            d["c"] = float(self.c)
        else:
            d["period"] = float(self.period)
        return d


def _m_from_multiplier(rho, c, s, cp, sp):
    d1 = s
    d2 = rho - sp
    with np.errstate(divide="ignore", invalid="ignore"):
        a = (rho - c) / d1
        b = cp / d2
    return np.where(np.abs(d1) >= np.abs(d2), a, b)


# ---------------------------------------------------------------------- builders


def build_constant_background(side, c: float) -> BackgroundModel:
    if not np.isfinite(c):
        raise ValueError("background constant must be finite")
    return BackgroundModel(side_sign(side), "constant", c=float(c), edges=np.array([float(c)]))


def _periodic_model(side, profile, period, edges_hint, tol, ref):
    """Rebuild the Dirichlet data of a periodic profile whose band structure is already known."""
    model = BackgroundModel(side_sign(side), "periodic", period=float(period), profile=profile,
                            edges=np.asarray(edges_hint, float), tol=tol,
                            touch_points=ref.touch_points.copy(), scan_top=ref.scan_top,
                            mean_potential=ref.mean_potential)
    _attach_dirichlet(model)
    return model


def build_periodic_background(side, profile, period: float, z_scan=(None, 450.0), n_scan: int = 2400,
                              tol: float = ODE_TOL) -> BackgroundModel:
    """Band structure and Dirichlet data of a periodic background.

    ``profile`` is either a callable ``p(x)`` valid on the whole axis or an array of samples on
    ``[0, period)`` (interpolated by a periodic cubic spline).  Band edges are located as sign
    changes of ``4 - Delta^2`` on ``z_scan``; gaps narrower than ``GAP_MERGE_WIDTH`` or whose
    discriminant excess stays below ``GAP_MERGE_HEIGHT`` are treated as closed.  Gaps above the
    scan are not resolved.
    """
    if not period > 0:
        raise ValueError("degenerate period")
    if not callable(profile):
        samples = np.asarray(profile, dtype=float)
        if samples.ndim != 1 or samples.size < 4:
            raise ValueError("periodic profile needs at least 4 samples")
        xs = np.linspace(0.0, period, samples.size + 1)
        spline = interpolate.CubicSpline(xs, np.r_[samples, samples[0]], bc_type="periodic")
        profile = lambda x, _s=spline, _l=period: _s(np.mod(x, _l))  # noqa: E731
    probe = np.linspace(0.0, period, 257)
    pvals = np.asarray(profile(probe), dtype=float)
    if not np.all(np.isfinite(pvals)):
        raise ValueError("periodic profile has non-finite values")
    lo, hi = z_scan
    if lo is None:
        lo = float(pvals.min()) - 1.0
    model = BackgroundModel(side_sign(side), "periodic", period=float(period), profile=profile,
                            tol=tol)
    zs = np.linspace(lo, hi, n_scan)
    fl = model.floquet(zs.astype(complex))
    half = 0.5 * np.real(fl.c + fl.sp)
    h = 1.0 - half * half
    if h[0] > 0:
        raise ScanError(f"z_scan starts inside a band (z = {lo:g}); lower the scan start")

    def hfun(zv):
        f = model.floquet(np.array([zv], complex))
        hv = 0.5 * np.real(f.c + f.sp)[0]
        return 1.0 - hv * hv

    # sign pattern -> alternating band/gap intervals
    sign = h > 0
    changes = np.nonzero(sign[1:] != sign[:-1])[0]
    edges = []
    for i in changes:
        edges.append(optimize.brentq(hfun, zs[i], zs[i + 1], xtol=1e-13, rtol=1e-14))
    if len(edges) % 2 == 0:
        raise ScanError("z_scan ends inside a gap; extend the scan upward")
    edges = np.array(edges)
    # merge numerically closed gaps: gap k lies between edges[2k+1] and edges[2k+2]
    keep = [edges[0]]
    k = 1
    while k < len(edges):
        a, b = edges[k], edges[k + 1]
        inside = (zs > a) & (zs < b)
        excess = float(np.max(-h[inside])) if inside.any() else 0.0
        if b - a < GAP_MERGE_WIDTH or excess < GAP_MERGE_HEIGHT:
            pass  # closed gap: drop both edges
        else:
            keep.extend([a, b])
        k += 2
    model.edges = np.array(keep)
    model.touch_points = _touch_points(model, zs, 2 * half)
    model.scan_top = float(hi)
    model.mean_potential = float(np.mean(pvals[:-1]))
    _attach_dirichlet(model)
    return model


def _touch_points(model, zs, delta):
    """Interior extrema of the discriminant inside the spectrum (closed gaps)."""
    out = []
    for i in range(1, zs.size - 1):
        d0, d1, d2 = delta[i - 1], delta[i], delta[i + 1]
        is_max = d1 >= d0 and d1 >= d2
        is_min = d1 <= d0 and d1 <= d2
        if not (is_max or is_min) or abs(d1) < 1.5:
            continue
        sgn = -1.0 if is_max else 1.0

        def f(zv, _s=sgn):
            fl = model.floquet(np.array([zv], complex))
            return _s * np.real(fl.c + fl.sp)[0]

        res = optimize.minimize_scalar(f, bounds=(zs[i - 1], zs[i + 1]), method="bounded",
                                       options={"xatol": 1e-12})
        t = float(res.x)
        if any(a < t < b for a, b in model.gaps()):
            continue
        out.append(t)
    return np.array(sorted(out))


def _attach_dirichlet(model: BackgroundModel) -> None:
    ell = model.period
    mus, kinds = [], []

    def sfun(zv):
        c, s, cp, sp = _monodromy_scalar(model, zv)
        return s

    for a, b in model.gaps():
        sa, sb = sfun(a), sfun(b)
        if sa == 0 or abs(sa) < 1e-14:
            mu = a
        elif sb == 0 or abs(sb) < 1e-14:
            mu = b
        elif sa * sb < 0:
            mu = optimize.brentq(sfun, a, b, xtol=1e-13, rtol=1e-14)
        else:
            mu = a if abs(sa) < abs(sb) else b
        if min(mu - a, b - mu) < EDGE_MU_TOL:
            mus.append(a if mu - a < b - mu else b)
            kinds.append("hat")
            continue
        _, _, _, sp = _monodromy_scalar(model, mu)
        decaying = abs(sp) < 1.0  # the pole-carrying solution decays toward +infinity
        carried_by_psi = decaying if model.side > 0 else not decaying
        mus.append(mu)
        kinds.append("M" if carried_by_psi else "breve")
    model.mu = np.array(mus, dtype=float)
    model.mu_class = tuple(kinds)
    del ell


def _monodromy_scalar(model, zv):
    v, d = propagate_ode(model.potential, np.array([zv, zv], complex), 0.0,
                         (np.array([1, 0]), np.array([0, 1])), model.period, model.tol)
    return v[0].real, v[1].real, d[0].real, d[1].real


def discriminant(model: BackgroundModel, z):
    fl = model.floquet(np.asarray(z, complex))
    return fl.c + fl.sp


# ---------------------------------------------------------------------- partition


@dataclass
class SpectrumPartition:
    sigma_plus: list
    sigma_minus: list
    sigma: list
    sigma2: list
    sigma1_plus: list
    sigma1_minus: list
    boundary_plus: list
    boundary_minus: list
    boundary: list
    omega1_plus: list
    omega1_minus: list
    omega2_plus: list
    omega2_minus: list
    omega3: list

    def segments(self, side: int) -> list[tuple[float, float, str]]:
        """Elementary pieces of ``sigma_side`` labelled ``"sigma2"`` or ``"sigma1"``."""
        own = self.sigma1_plus if side > 0 else self.sigma1_minus
        out = [(a, b, "sigma2") for a, b in self.sigma2] + [(a, b, "sigma1") for a, b in own]
        return sorted(out, key=lambda t: t[0])

    def to_dict(self) -> dict:
        def enc(ints):
            return [[float(a), "inf" if np.isinf(b) else float(b)] for a, b in ints]

        return {"sigma": enc(self.sigma), "sigma2": enc(self.sigma2),
                "sigma1_plus": enc(self.sigma1_plus), "sigma1_minus": enc(self.sigma1_minus),
                "sigma_plus": enc(self.sigma_plus), "sigma_minus": enc(self.sigma_minus)}

    @classmethod
    def from_dict(cls, d: dict) -> "SpectrumPartition":
        def dec(ints):
            return [(float(a), np.inf if b == "inf" else float(b)) for a, b in ints]

        return partition_bands(dec(d["sigma_plus"]), dec(d["sigma_minus"]))


def _member(x, bands, tol=0.0):
    return any(a - tol <= x <= b + tol for a, b in bands)


def _merge(intervals):
    out = []
    for a, b in sorted(intervals):
        if b - a <= 0:
            continue
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def _boundary(intervals):
    pts = []
    for a, b in intervals:
        pts.append(a)
        if np.isfinite(b):
            pts.append(b)
    return sorted(set(pts))


def partition_bands(sp: list, sm: list, tol: float = 1e-12) -> SpectrumPartition:
    """Interval algebra for two band lists (each a list of ``(a, b)``, ``b`` may be ``inf``)."""
    pts = sorted(set([p for a, b in sp + sm for p in (a, b) if np.isfinite(p)]))
    pieces = []
    for i in range(len(pts)):
        a = pts[i]
        b = pts[i + 1] if i + 1 < len(pts) else np.inf
        mid = a + 1.0 if np.isinf(b) else 0.5 * (a + b)
        pieces.append((a, b, _member(mid, sp), _member(mid, sm)))
    s2 = _merge([(a, b) for a, b, ip, im in pieces if ip and im])
    s1p = _merge([(a, b) for a, b, ip, im in pieces if ip and not im])
    s1m = _merge([(a, b) for a, b, ip, im in pieces if im and not ip])
    sig = _merge([(a, b) for a, b, ip, im in pieces if ip or im])
    bp, bm, bs = _boundary(sp), _boundary(sm), _boundary(sig)

    def close(x, lst):
        return any(abs(x - y) <= tol * (1 + abs(x)) for y in lst)

    def interior(x, bands):
        return any(a + tol < x < b - tol for a, b in bands)

    b2 = _boundary(s2)
    om1p = [e for e in b2 if interior(e, sm)]
    om1m = [e for e in b2 if interior(e, sp)]
    om2p = [e for e in _boundary(s1p) if close(e, bs)]
    om2m = [e for e in _boundary(s1m) if close(e, bs)]
    om3 = [e for e in bp if close(e, bm)]
    return SpectrumPartition(list(sp), list(sm), sig, s2, s1p, s1m, bp, bm, bs,
                             om1p, om1m, om2p, om2m, om3)


def partition_spectra(left: BackgroundModel, right: BackgroundModel) -> SpectrumPartition:
    return partition_bands(right.bands(), left.bands())


# ---------------------------------------------------------------------- transform pair


def spectral_transform_pair(model: BackgroundModel, f: Callable, support: tuple[float, float],
                            x_test=None, n_lambda: int = 160, cutoff: float = 400.0,
                            n_y: int = 200) -> float:
    """Sup-norm residual of the forward/inverse Weyl transform of ``f`` on ``x_test``.

    Forward: ``F(lam) = int psi(lam, y) f(y) dy`` over ``support``; inverse:
    ``f(x) = oint F(lam) conj(psi(lam, x)) drho(lam)``, evaluated with the two-rim rule
    ``(1/pi) int Re[F conj(psi)] Im g dlam`` over every band.
    """
    from .numerics import composite_gauss, sine_map_rule, sqrt_map_rule

    a, b = support
    if x_test is None:
        x_test = np.linspace(a, b, 21)
    x_test = np.asarray(x_test, float)
    yb = np.linspace(a, b, max(2, n_y // 8) + 1)
    yn, yw = composite_gauss(yb, 8)
    yn, yw = yn.ravel(), yw.ravel()
    fy = np.asarray(f(yn), float)
    if not np.any(fy):
        return 0.0
    rules = []
    for lo, hi in model.bands():
        if np.isinf(hi):
            rules.append(sqrt_map_rule(lo, cutoff, n_lambda))
        else:
            rules.append(sine_map_rule(lo, hi, max(24, n_lambda // 4)))
    lam = np.concatenate([r.nodes for r in rules])
    wts = np.concatenate([r.weights for r in rules])
    z = lam.astype(complex)
    fl = model.floquet(z)
    psi_y, _ = model.weyl(z, yn, fl=fl)
    fhat = (yw * fy) @ psi_y
    psi_x, _ = model.weyl(z, x_test, fl=fl)
    G = model.g(z, fl=fl).imag
    rec = (np.real(fhat[None, :] * np.conj(psi_x)) * (G * wts)[None, :]).sum(axis=1) / np.pi
    return float(np.max(np.abs(rec - f(x_test))))
