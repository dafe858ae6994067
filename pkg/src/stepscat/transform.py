"""Transformation-operator kernels computed directly from the potential.

The kernel ``K+(x, y)`` (``y >= x``) of the transformation operator

    phi+(z, x) = psi+(z, x) + int_x^inf K+(x, y) psi+(z, y) dy

satisfies a Volterra-type integral equation whose kernel is built from the background's
band-edge data.  In the rotated variables ``u = (x + y)/2``, ``v = (y - x)/2`` it reads

    H(u, v) = sum_E c_E a_E(u - v) a_E(u + v) [ Q_E(u) / 2 + I_E(u, v) ],
    Q_E(u)  = int_u^X q+(s) a_E(s)^2 ds,
    I_E     = int_u^X d alpha int_0^v q+(alpha - beta) a_E(alpha - beta) a_E(alpha + beta)
                  H(alpha, beta) d beta,

with ``q+ = q - p+`` vanishing beyond ``X = X+``.  Here ``a_E`` is the band-edge Floquet
eigenfunction normalized through the edge residue ``f(E, x, y) = lambda_E a_E(x) a_E(y)``, and
``c_E = lambda_E^2 / P'(E)``.  For a constant background there is one edge with ``a = 1`` and
``c = 1``, and the equation reduces to the classical Marchenko form.

The equation is marched from ``u = X`` downward; each new row is itself a small Volterra
problem in ``v`` that is solved by fixed-point iteration.  Three trapezoid levels are
combined by Romberg extrapolation.  The left kernel is obtained from the mirrored problem,
``K-(x, y) = K^(-x, -y)``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate

from .background import BackgroundModel
from .numerics import NumericsError
from .potentials import GridPotential

RICHARDSON_TAUS = (1e-2, 5e-3, 2.5e-3)
PICARD_TOL = 1e-10
ROMBERG_STEPS = (0.05, 0.025, 0.0125)


class LimitExtractionError(NumericsError):
    """The tau -> 0 extrapolation of the edge residue did not settle."""


class DivergentIteration(NumericsError):
    def __init__(self, message: str, contraction: float):
        super().__init__(f"{message} (contraction estimate {contraction:.3e})")
        self.contraction = contraction


# ---------------------------------------------------------------------- edge residues


def _richardson(values: np.ndarray) -> tuple[np.ndarray, float]:
    """Extrapolate samples at tau, tau/2, tau/4 to tau = 0 (linear leading error)."""
    f0, f1, f2 = values
    r01 = 2 * f1 - f0
    r12 = 2 * f2 - f1
    best = (4 * r12 - r01) / 3
    err = float(np.max(np.abs(best - r12)))
    return best, err


@dataclass
class EdgeResidueKernel:
    """Band-edge residue data of one background and the evaluator for ``D``.

    ``D(x, y, t, s) = -+ 1/4 sum_E f(E, x, y) f(E, t, s) / P'(E)`` with
    ``f(E, x, y) = lam_E a_E(x) a_E(y)``.
    """

    model: BackgroundModel = field(repr=False)
    edges: np.ndarray
    dP: np.ndarray
    lam: np.ndarray
    vec: np.ndarray  # (n_edges, 2): a_E(x) = vec . (c(E, x), s(E, x))
    extrapolation_error: float = 0.0

    @property
    def side(self) -> int:
        return self.model.side

    @property
    def weights(self) -> np.ndarray:
        """``c_E = lam_E^2 / P'(E)``."""
        return self.lam ** 2 / self.dP

    def a(self, x) -> np.ndarray:
        """Edge eigenfunctions ``a_E(x)``, shape ``(n_edges,) + x.shape``."""
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        if flat.size == 0:
            return np.zeros((len(self.edges),) + x.shape)
        c, s, _, _ = self.model.fundamental(self.edges.astype(complex), flat)
        vals = c.real * self.vec[:, 0] + s.real * self.vec[:, 1]  # (len(x), n_edges)
        return vals.T.reshape((len(self.edges),) + x.shape)

    def f(self, x, y) -> np.ndarray:
        """``f(E, x, y)`` for every edge, shape ``(n_edges,) + broadcast shape``."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        ax, ay = self.a(x), self.a(y)
        return self.lam.reshape((-1,) + (1,) * x.ndim) * ax * ay

    def D(self, x, y, t, s) -> np.ndarray:
        x, y, t, s = np.broadcast_arrays(*(np.asarray(v, float) for v in (x, y, t, s)))
        sh = (-1,) + (1,) * x.ndim
        prod = self.a(x) * self.a(y) * self.a(t) * self.a(s)
        return -self.side * 0.25 * np.sum(self.weights.reshape(sh) * prod, axis=0)

    def sum_rule_error(self, x, y) -> float:
        """Max of ``|D(x, y, y, x) +- 1/4|`` over the given samples."""
        d = self.D(x, y, y, x)
        return float(np.max(np.abs(d + self.side * 0.25)))

    def symmetry_error(self, x, y, t, s) -> float:
        return float(np.max(np.abs(self.D(x, y, t, s) - self.D(y, x, t, s))))


def edge_residue_kernel(model: BackgroundModel, taus=RICHARDSON_TAUS,
                        limit_tol: float = 1e-7) -> EdgeResidueKernel:
    """Edge residues ``f(E, x, y)`` as limits of the regularized Weyl products.

    Near an edge ``psi(z, x) psi_breve(z, y) prod(z - mu)`` has the symmetric part
    ``u(x)^T S(z) u(y)`` with ``u = (c, s)`` and

        S(z) = prod(z - mu) [[1, (m + m_breve)/2], [(m + m_breve)/2, m m_breve]],

    while the antisymmetric part vanishes like ``sqrt(z - E)``.  ``S`` is evaluated at real
    points in the adjacent gap, extrapolated to ``z = E`` and factored as ``lam v v^T``.
    """
    edges = np.asarray(model.edges, dtype=float)
    dP = np.array([model.dP(k) for k in range(len(edges))])
    lam = np.empty(len(edges))
    vec = np.empty((len(edges), 2))
    worst = 0.0
    for k, E in enumerate(edges):
        direction = -1.0 if k % 2 == 0 else 1.0
        others = [abs(E - e) for j, e in enumerate(edges) if j != k]
        others += [abs(E - m) for m in model.mu if abs(E - m) > 0]
        scale = min([1.0] + [0.1 * d for d in others])
        z = E + direction * scale * np.asarray(taus)
        fl = model.floquet(z.astype(complex))
        with np.errstate(divide="ignore", invalid="ignore"):
            pm = np.ones_like(z, dtype=complex)
            for m in model.mu:
                pm = pm * (z - m)
            if model.kind == "constant":
                half_sum = 0.5 * (fl.m_dec + fl.m_grow)
                prod = fl.m_dec * fl.m_grow
            else:  # symmetric functions of m, m_breve are meromorphic: no branch choice
                half_sum = 0.5 * (fl.sp - fl.c) / fl.s
                prod = -fl.cp / fl.s
        mats = np.stack([np.stack([pm, pm * half_sum], -1),
                         np.stack([pm * half_sum, pm * prod], -1)], -2).real
        S, err = _richardson(mats)
        scale_S = max(1.0, float(np.max(np.abs(S))))
        if not np.all(np.isfinite(S)) or err > limit_tol * scale_S:
            raise LimitExtractionError(f"edge E={E:.12g}: extrapolation error {err:.2e}")
        worst = max(worst, err / scale_S)
        w, V = np.linalg.eigh(0.5 * (S + S.T))
        i = int(np.argmax(np.abs(w)))
        v = V[:, i]
        if v[0] < 0 or (v[0] == 0 and v[1] < 0):
            v = -v
        lam[k] = w[i]
        vec[k] = v
    return EdgeResidueKernel(model, edges, dP, lam, vec, worst)


# ---------------------------------------------------------------------- kernel solve


@dataclass
class TriangularKernel:
    """``K(x, y)`` on the rotated grid ``u = X - i h``, ``v = j h`` (``H[i, j]``).

    For ``side = -1`` the stored grid belongs to the mirrored problem and evaluation maps
    ``K-(x, y) = H-grid kernel at (-x, -y)``.
    """

    side: int
    window: tuple[float, float]
    h: float
    H: np.ndarray
    error: np.ndarray | None = None
    levels: list = field(default_factory=list, repr=False)  # full grids per step size
    iterations: int = 0
    max_update: float = 0.0
    contraction: float = 0.0
    seconds: float = 0.0
    _spline: object = field(default=None, repr=False)

    @property
    def top(self) -> float:
        """``X`` of the (possibly mirrored) + problem."""
        return self.window[1] if self.side > 0 else -self.window[0]

    @property
    def u(self) -> np.ndarray:
        return self.top - self.h * np.arange(self.H.shape[0])

    @property
    def v(self) -> np.ndarray:
        return self.h * np.arange(self.H.shape[1])

    def _plus_eval(self, x, y):
        if self._spline is None:
            self._spline = interpolate.RectBivariateSpline(self.u[::-1], self.v, self.H[::-1], kx=5, ky=5)
        uu = 0.5 * (x + y)
        vv = 0.5 * (y - x)
        inside = (vv >= -1e-14) & (uu <= self.top + 1e-14) & (vv <= self.v[-1] + 1e-12) \
            & (uu >= self.u[-1] - 1e-12)
        out = np.zeros(np.broadcast(x, y).shape)
        if np.any(inside):
            ui = np.clip(np.broadcast_to(uu, out.shape)[inside], self.u[-1], self.top)
            vi = np.clip(np.broadcast_to(vv, out.shape)[inside], 0.0, self.v[-1])
            out[inside] = self._spline.ev(ui, vi)
        return out

    def __call__(self, x, y) -> np.ndarray:
        """``K(x, y)``; zero for ``+-y < +-x`` and beyond the support ``x + y > 2 X+``."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        if self.side > 0:
            return self._plus_eval(x, y)
        return self._plus_eval(-x, -y)

    def lattice_value(self, x: float, y: float) -> float:
        """Exact grid value (no interpolation) when ``(u, v)`` falls on a grid node."""
        if self.side < 0:
            x, y = -x, -y
        i = (self.top - 0.5 * (x + y)) / self.h
        j = 0.5 * (y - x) / self.h
        ii, jj = int(round(i)), int(round(j))
        if abs(i - ii) > 1e-6 or abs(j - jj) > 1e-6:
            raise ValueError("point is not on the kernel lattice")
        if ii < 0:
            return 0.0
        return float(self.H[ii, jj])

    def diagonal(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        return self(x, x)

    def samples(self):
        """``(x, y, K)`` on the lattice, mapped back to the original variables."""
        uu, vv = np.meshgrid(self.u, self.v, indexing="ij")
        x, y = uu - vv, uu + vv
        if self.side < 0:
            x, y = -x, -y
        return x, y, self.H.copy()


def _solve_level(qp_vals, a_vals, cE, n_u, n_v, h, max_inner=200):
    """Trapezoid marching for one step size.

    ``qp_vals`` and ``a_vals`` are sampled on ``t_k = X - (k - off) h`` with ``off = n_v - 1``
    so that ``u - v`` has index ``i + j + off`` and ``u + v`` has index ``i - j + off``.
    """
    off = n_v - 1
    nE = len(cE)
    H = np.zeros((n_u, n_v))
    acc = np.zeros((nE, n_v))  # trapezoid sum of J over completed rows (without the last half)
    last_J = np.zeros((nE, n_v))
    qa2 = qp_vals * a_vals ** 2  # (nE, n_t)
    Q = np.zeros(nE)
    j = np.arange(n_v)
    iters = 0
    worst_update = 0.0
    for i in range(n_u):
        xm = i + j + off  # index of u - v
        xp = i - j + off  # index of u + v
        A = a_vals[:, xm] * a_vals[:, xp]  # (nE, n_v)
        g_w = qp_vals[xm] * A  # weight multiplying H inside the beta integral
        if i > 0:
            k = i + off
            Q = Q + 0.5 * h * (qa2[:, k - 1] + qa2[:, k])
            acc = acc + 0.5 * h * last_J if i == 1 else acc + h * last_J
        base = cE[:, None] * A
        # acc now holds h (J_0/2 + J_1 + ... + J_{i-1}); the current row enters the
        # alpha trapezoid with weight h/2, which makes each row a small Volterra problem.
        known = np.sum(base * (0.5 * Q[:, None] + acc), axis=0)
        row = known.copy()
        w_self = 0.0 if i == 0 else 0.5 * h
        if w_self > 0:
            for it in range(max_inner):
                J = integrate.cumulative_trapezoid(g_w * row, dx=h, axis=1, initial=0.0)
                new = known + w_self * np.sum(base * J, axis=0)
                upd = float(np.max(np.abs(new - row)))
                row = new
                iters += 1
                if upd < 1e-15 * max(1.0, float(np.max(np.abs(row)))):
                    break
            else:
                raise DivergentIteration(f"row u-index {i} did not converge", upd)
            worst_update = max(worst_update, upd)
        if not np.all(np.isfinite(row)):
            raise DivergentIteration(f"non-finite kernel at row {i}", np.inf)
        H[i] = row
        last_J = integrate.cumulative_trapezoid(g_w * row, dx=h, axis=1, initial=0.0)
    return H, iters, worst_update


def _plus_problem(q: GridPotential, side: int) -> tuple[GridPotential, BackgroundModel]:
    if side > 0:
        return q, q.right
    qm = q.mirrored()
    return qm, qm.right


def solve_transformation_kernel(q: GridPotential, side: int = 1, steps=ROMBERG_STEPS,
                                residue: EdgeResidueKernel | None = None) -> TriangularKernel:
    """Kernel ``K+-`` of the transformation operator from ``q`` alone.

    The rows are marched from ``u = X+`` down to ``u = X-`` on three step sizes and combined by
    Romberg extrapolation on the coarsest lattice.  ``error`` holds the difference between
    the last two extrapolation orders.
    """
    t0 = time.perf_counter()
    side = 1 if side > 0 else -1
    qq, bg = _plus_problem(q, side)
    res = residue or edge_residue_kernel(bg)
    xl, xr = qq.window
    L = xr - xl
    n0 = int(round(L / steps[0]))
    hs = [L / (n0 * 2 ** k) for k in range(len(steps))]
    cE = res.weights
    levels = []
    full = []
    total_iters = 0
    worst_update = 0.0
    # contraction estimate of the successive approximations: C * int |q+| * length
    xs = np.linspace(2 * xl - xr, xr, 4001)
    qpa = np.abs(qq(xs) - bg.potential(xs))
    bound = 2 * float(np.max(np.abs(res.D(xs[::40], xs[::40], xs[::40], xs[::40]))))
    contraction = 4 * bound * float(integrate.trapezoid(qpa, xs)) * L
    for h in hs:
        n = int(round(L / h)) + 1
        off = n - 1
        t = xr - (np.arange(3 * n - 2) - off) * h  # indices 0..3n-3 cover [2xl - xr, 2xr - xl]
        qp_vals = qq(t) - bg.potential(t)
        # the lattice triangle u - v >= X- only sees q+ inside the window
        qp_vals = np.where((t > xr) | (t < xl), 0.0, qp_vals)
        a_vals = res.a(t)
        H, it, upd = _solve_level(qp_vals, a_vals, cE, n, n, h)
        ii, jj = np.indices(H.shape)
        H[ii + jj > n - 1] = 0.0  # outside the window triangle
        total_iters += it
        worst_update = max(worst_update, upd)
        full.append(H)
        stride = 2 ** len(levels)
        levels.append(H[::stride, ::stride])
    if len(levels) == 3:
        r1a = (4 * levels[1] - levels[0]) / 3
        r1b = (4 * levels[2] - levels[1]) / 3
        best = (16 * r1b - r1a) / 15
        err = np.abs(best - r1b)
    elif len(levels) == 2:
        best = (4 * levels[1] - levels[0]) / 3
        err = np.abs(best - levels[1])
    else:
        best, err = levels[0], np.full(levels[0].shape, np.nan)
    return TriangularKernel(side, tuple(q.window), hs[0], best, err, full, total_iters,
                            worst_update, contraction, time.perf_counter() - t0)


# ---------------------------------------------------------------------- checks


def _tail_integral(q: GridPotential, side: int, x) -> np.ndarray:
    """``+-int_x^{+-inf} (q - p+-) dt`` by adaptive quadrature (perturbation vanishes off-window)."""
    bg = q.right if side > 0 else q.left
    xl, xr = q.window
    out = []
    for xv in np.atleast_1d(x):
        if side > 0:
            a, b = xv, xr
        else:
            a, b = xl, xv
        if b <= a:
            out.append(0.0)
            continue
        pts = [q.jump] if q.jump is not None and a < q.jump < b else None
        val, _ = integrate.quad(lambda t: float(q(t) - bg.potential(t)), a, b, limit=400,
                                epsabs=1e-13, epsrel=1e-12, points=pts)
        out.append(val)
    return np.array(out)


def diagonal_identity_check(K, q: GridPotential, x=None) -> float:
    """Max over ``x`` of ``|K(x, x) -+ 1/2 int_x^{+-inf} (q - p) dt|``.

    ``K`` may be a :class:`TriangularKernel` or any callable returning the diagonal
    ``K(x, x)`` when given ``(x, x)``.
    """
    side = K.side
    if x is None:
        xl, xr = q.window
        x = np.linspace(xl, xr, 161)
    x = np.asarray(x, float)
    diag = np.asarray(K(x, x), float)
    expected = 0.5 * _tail_integral(q, side, x)
    return float(np.max(np.abs(diag - expected)))


def q_profile(q: GridPotential, side: int):
    """``Q(s) = +-int_{s/2}^{+-inf} |q - p+-|`` as a callable (via a cumulative table)."""
    bg = q.right if side > 0 else q.left
    xl, xr = q.window
    t = np.linspace(2 * xl - xr, 2 * xr - xl, 24001)
    vals = np.abs(q(t) - bg.potential(t))
    if side > 0:
        vals = np.where(t > xr, 0.0, vals)
        cum = integrate.cumulative_trapezoid(vals[::-1], t[::-1], initial=0.0)[::-1] * -1
    else:
        vals = np.where(t < xl, 0.0, vals)
        cum = integrate.cumulative_trapezoid(vals, t, initial=0.0)

    def Q(s):
        return np.interp(0.5 * np.asarray(s, float), t, cum)

    return Q


@dataclass
class EstimateReport:
    """Measured constants of the kernel estimates along the window.

    ``C`` is the pointwise ratio, which need not itself be monotone: a perturbation with a
    single bump already makes it rise toward 1/2 far from the bump.  ``envelope`` is the
    smallest admissible constant that decreases toward the kernel's infinity, the running
    supremum of ``C``; ``nonincreasing`` records whether the raw ratio happens to be monotone.
    """

    x: np.ndarray
    C: np.ndarray  # sup_y |K(x,y)| / Q(x+y)
    C_derivative: np.ndarray  # sup_y (|K_x| + |K_y|) / (|q((x+y)/2)| + Q(x+y))
    bounded: bool
    nonincreasing: bool
    derivative_bounded: bool
    envelope: np.ndarray | None = None
    derivative_envelope: np.ndarray | None = None

    @property
    def passed(self) -> bool:
        """Both estimates hold with finite constants that decrease toward the kernel's infinity."""
        return self.bounded and self.derivative_bounded


def estimate_structure(K: TriangularKernel, q: GridPotential, n_x: int = 33, n_y: int = 120,
                       floor: float = 1e-6, slack: float = 1e-3) -> EstimateReport:
    """Check ``|K(x,y)| <= C(x) Q(x+y)`` with ``C`` non-increasing toward the kernel's infinity.

    Points where ``Q(x+y)`` falls below ``floor`` times its value at the diagonal are skipped
    because both sides vanish there and the ratio is pure round-off.  ``slack`` is the relative
    tolerance allowed for the monotonicity test.
    """
    side = K.side
    bg = q.right if side > 0 else q.left
    Q = q_profile(q, side)
    xl, xr = q.window
    xs = np.linspace(xl, xr, n_x)[:-1] if side > 0 else np.linspace(xl, xr, n_x)[1:]
    C = np.zeros(xs.size)
    Cd = np.zeros(xs.size)
    eps = 1e-4
    for k, x in enumerate(xs):
        far = 2 * xr - x if side > 0 else 2 * xl - x
        y = np.linspace(x, far, n_y)
        Qv = Q(x + y)
        ok = Qv > floor * max(Q(2 * x), 1e-300)
        if not np.any(ok) or Q(2 * x) == 0:
            continue
        Kv = np.abs(K(x, y))
        C[k] = float(np.max(Kv[ok] / Qv[ok]))
        Kx = (K(x + eps, y) - K(x - eps, y)) / (2 * eps)
        Ky = (K(x, y + eps) - K(x, y - eps)) / (2 * eps)
        qm = np.abs(q(0.5 * (x + y)) - bg.potential(0.5 * (x + y)))
        den = qm + Qv
        inner = ok & (np.abs(y - x) > 2 * eps) & (np.abs(y - far) > 2 * eps)
        if np.any(inner):
            Cd[k] = float(np.max((np.abs(Kx) + np.abs(Ky))[inner] / den[inner]))
    order = C if side > 0 else C[::-1]
    scale = max(float(np.max(C)), 1e-300)
    nonincreasing = bool(np.all(np.diff(order) <= slack * scale))

    def running_sup(c):
        # sup over x' beyond x in the direction of the kernel's infinity
        return np.maximum.accumulate(c[::-1])[::-1] if side > 0 else np.maximum.accumulate(c)

    return EstimateReport(xs, C, Cd, bool(np.all(np.isfinite(C))), nonincreasing,
                          bool(np.all(np.isfinite(Cd))), running_sup(C), running_sup(Cd))


def reconstruct_jost(K: TriangularKernel, q: GridPotential, z, x) -> np.ndarray:
    """``phi(z, x) = psi(z, x) + int K(x, y) psi(z, y) dy`` (over ``+-y >= +-x``).

    The ``y`` integral runs along the lattice line through ``(x, x)`` with a trapezoid rule
    at each step size; the level results are Romberg-combined like the kernel itself.
    ``x`` must lie on the coarse lattice.  Returns shape ``(len(x), len(z))``.
    """
    side = K.side
    bg = q.right if side > 0 else q.left
    z = np.atleast_1d(np.asarray(z, complex))
    xs = np.atleast_1d(np.asarray(x, float))
    out = np.zeros((xs.size, z.size), complex)
    for ix, xv in enumerate(xs):
        xp = xv if side > 0 else -xv
        vals = [_line_integral(K, lev, xp, bg, z, side) for lev in range(len(K.levels))]
        if len(vals) == 3:
            r1a = (4 * vals[1] - vals[0]) / 3
            r1b = (4 * vals[2] - vals[1]) / 3
            integral = (16 * r1b - r1a) / 15
        elif len(vals) == 2:
            integral = (4 * vals[1] - vals[0]) / 3
        else:
            integral = vals[0]
        out[ix] = bg.weyl(z, [xv])[0][0] + integral
    return out


def _line_integral(K: TriangularKernel, lev: int, xp: float, bg, z, side):
    H = K.levels[lev]
    h = K.h / 2 ** lev
    n = (K.top - xp) / h
    if abs(n - round(n)) > 1e-6:
        raise ValueError("x must lie on the coarse lattice")
    n = int(round(n))
    j = np.arange(0, min(n, H.shape[1] - 1) + 1)
    i = n - j
    keep = (i >= 0) & (i < H.shape[0])
    j, i = j[keep], i[keep]
    y = xp + 2 * j * h
    psi = bg.weyl(z, y if side > 0 else -y)[0]  # (len(y), nz)
    return integrate.trapezoid(H[i, j][:, None] * psi, dx=2 * h, axis=0)
