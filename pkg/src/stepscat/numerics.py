"""Shared numerical kernels: ODE propagation, band quadrature, Nystrom solves, root bracketing."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, linalg, optimize, special

ODE_TOL = 1e-10
QUAD_TOL = 1e-8
ROOT_TOL = 1e-10

SINGULARITIES = ("none", "inverse-sqrt-left", "inverse-sqrt-right", "inverse-sqrt-both")


class NumericsError(RuntimeError):
    """Base class for failures of the numerical kernels."""


class PropagationError(NumericsError):
    def __init__(self, message: str, x: float):
        super().__init__(f"{message} (at x = {x:.6g})")
        self.x = x


class SingularSystemError(NumericsError):
    def __init__(self, cond: float):
        super().__init__(f"discrete Fredholm operator is singular (condition number {cond:.3e})")
        self.cond = cond


class IncompleteScanError(NumericsError):
    def __init__(self, roots: list[float]):
        super().__init__(f"root scan stopped after {len(roots)} roots (max_roots reached)")
        self.roots = roots


@dataclass(frozen=True)
class RealGrid:
    points: np.ndarray
    kind: str = "uniform"
    band: tuple[float, float] | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("a grid needs at least 2 points")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if self.kind not in ("uniform", "chebyshev-mapped"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.kind == "chebyshev-mapped" and self.band is None:
            raise ValueError("chebyshev-mapped grids must record their band")
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, a: float, b: float, n: int) -> "RealGrid":
        return cls(np.linspace(a, b, n), "uniform")

    @classmethod
    def chebyshev(cls, a: float, b: float, n: int) -> "RealGrid":
        theta = (2 * np.arange(n, 0, -1) - 1) * np.pi / (2 * n)
        return cls(0.5 * (a + b) + 0.5 * (b - a) * np.cos(theta), "chebyshev-mapped", (a, b))

    def __len__(self) -> int:
        return self.points.size


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights for the integral of ``f(x) * w(x)`` over a band.

    ``w`` is the declared endpoint weight (``singularity``).  ``mapping`` records how the
    nodes were produced: ``"polynomial"`` rules are Gauss rules exact for polynomials times
    the weight, ``"sqrt"`` rules come from the substitution ``x = E + s**2`` at each singular
    end and are exact for polynomials in ``sqrt(x - E)``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    singularity: str = "none"
    band: tuple[float, float] = (0.0, 1.0)
    mapping: str = "polynomial"
    tail_bound: float = 0.0
    param: np.ndarray | None = field(default=None, repr=False)

    def integrate(self, values) -> complex | float | np.ndarray:
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))

    def __len__(self) -> int:
        return self.nodes.size


# --------------------------------------------------------------------------- ODE


def propagate_ode(
    coeff: Callable[[float], float],
    z,
    x0: float,
    y0,
    x1: float,
    tol: float = ODE_TOL,
    x_eval: Sequence[float] | None = None,
    square_integral: bool = False,
):
    """Integrate ``-y'' + coeff(x) y = z y`` from ``x0`` to ``x1``.

    ``z`` may be a scalar or an array; ``y0`` is a pair ``(y, y')`` broadcastable to ``z``.
    Returns ``(y, dy)`` at ``x1``.  With ``x_eval`` the values at those abscissas are returned
    instead (arrays of shape ``(len(x_eval),) + z.shape``).  With ``square_integral`` a third
    array holding ``int_{x0}^{x1} y**2 dx`` is appended.
    """
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    zf = z.ravel()
    n = zf.size
    ya = np.broadcast_to(np.asarray(y0[0], dtype=complex), shape).ravel()
    yb = np.broadcast_to(np.asarray(y0[1], dtype=complex), shape).ravel()
    if tol <= 0:
        raise ValueError("tol must be positive")
    if x1 == x0:
        out = (ya.reshape(shape).copy(), yb.reshape(shape).copy())
        if x_eval is not None:
            out = tuple(np.broadcast_to(o, (len(x_eval),) + shape).copy() for o in out)
        if square_integral:
            out = out + (np.zeros((len(x_eval),) + shape if x_eval is not None else shape, complex),)
        return out

    def rhs(x, y):
        p = coeff(x)
        if not np.isfinite(p):
            raise ValueError(f"non-finite coefficient value at x = {x:.6g}")
        u = y[:n]
        v = y[n : 2 * n]
        out = [v, (p - zf) * u]
        if square_integral:
            out.append(u * u)
        return np.concatenate(out)

    init = [ya, yb]
    if square_integral:
        init.append(np.zeros(n, complex))
    y_init = np.concatenate(init)
    t_eval = None
    if x_eval is not None:
        t_eval = np.asarray(x_eval, dtype=float)
        if np.any(np.diff(t_eval) * np.sign(x1 - x0) < 0):
            raise ValueError("x_eval must be ordered in the direction of integration")
    sol = integrate.solve_ivp(
        rhs, (x0, x1), y_init, method="DOP853", rtol=tol, atol=tol * 1e-3, t_eval=t_eval
    )
    if sol.status != 0:
        raise PropagationError(f"ODE integration failed: {sol.message}", float(sol.t[-1]))
    if x_eval is None:
        yend = sol.y[:, -1]
        res = (yend[:n].reshape(shape), yend[n : 2 * n].reshape(shape))
        if square_integral:
            res = res + (yend[2 * n :].reshape(shape),)
        return res
    ys = sol.y.T
    m = ys.shape[0]
    res = (ys[:, :n].reshape((m,) + shape), ys[:, n : 2 * n].reshape((m,) + shape))
    if square_integral:
        res = res + (ys[:, 2 * n :].reshape((m,) + shape),)
    return res


# --------------------------------------------------------------------------- quadrature


def _gauss_legendre(n: int, a: float, b: float):
    x, w = special.roots_legendre(n)
    return 0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w


def band_quadrature(
    band: tuple[float, float],
    singularity: str = "none",
    n: int = 32,
    cutoff: float | None = None,
    mapping: str = "polynomial",
    tail_decay: float | None = None,
) -> QuadratureRule:
    """Quadrature rule for ``int_band f(x) w(x) dx`` with ``w`` an inverse square root weight.

    ``band = (a, b)``; ``b = inf`` requires ``cutoff``.  For semi-infinite bands the rule lives on
    ``[a, cutoff]`` and ``tail_bound`` reports ``C/sqrt(cutoff - a)`` with ``C = tail_decay`` (the
    scattering-data decay constant, default 1).  ``mapping="sqrt"`` uses the substitution
    ``x = E + s**2`` (or ``x = a + (b-a) sin(phi)**2`` on doubly singular finite bands) with
    Gauss-Legendre nodes in the new variable; the default ``"polynomial"`` uses Gauss-Jacobi
    rules exact for polynomials times the weight.
    """
    if singularity not in SINGULARITIES:
        raise ValueError(f"unknown singularity {singularity!r}")
    if mapping not in ("polynomial", "sqrt"):
        raise ValueError(f"unknown mapping {mapping!r}")
    if n < 4:
        raise ValueError("band_quadrature needs n >= 4")
    a, b = float(band[0]), float(band[1])
    tail = 0.0
    if np.isinf(b):
        if cutoff is None or cutoff <= a:
            raise ValueError("semi-infinite band needs cutoff > band start")
        if singularity in ("inverse-sqrt-right", "inverse-sqrt-both"):
            raise ValueError("no right-end singularity on a semi-infinite band")
        tail = (1.0 if tail_decay is None else tail_decay) / np.sqrt(cutoff - a)
        b_eff = float(cutoff)
    else:
        if not a < b:
            raise ValueError("band must satisfy a < b")
        b_eff = b
    h = b_eff - a
    param = None

    if mapping == "polynomial":
        if singularity == "none":
            x, w = _gauss_legendre(n, a, b_eff)
        elif singularity == "inverse-sqrt-both":
            k = np.arange(n, 0, -1)
            x = 0.5 * (a + b_eff) + 0.5 * h * np.cos((2 * k - 1) * np.pi / (2 * n))
            w = np.full(n, np.pi / n)
        elif singularity == "inverse-sqrt-left":
            # Jacobi weight (1-t)^0 (1+t)^(-1/2) on [-1, 1] -> (x-a)^(-1/2) on [a, b]
            t, wt = special.roots_jacobi(n, 0.0, -0.5)
            x = a + 0.5 * h * (t + 1)
            w = wt * np.sqrt(0.5 * h) / (0.5 * h) * 0.5 * h
            w = wt * np.sqrt(h / 2.0)
        else:
            t, wt = special.roots_jacobi(n, -0.5, 0.0)
            x = a + 0.5 * h * (t + 1)
            w = wt * np.sqrt(h / 2.0)
        # weights above integrate f*w; record them as such
        return QuadratureRule(np.asarray(x), np.asarray(w), singularity, (a, b), mapping, tail)

    # sqrt mapping: weights include the Jacobian and divide out the declared weight so that
    # rule.integrate(f) approximates int f(x) w(x) dx with w the declared singular weight.
    if singularity == "none" and not np.isinf(b):
        x, w = _gauss_legendre(n, a, b_eff)
        return QuadratureRule(x, w, singularity, (a, b), mapping, tail, param=x)
    if np.isinf(b) or singularity == "inverse-sqrt-left":
        s, ws = _gauss_legendre(n, 0.0, np.sqrt(h))
        x = a + s**2
        # int f(x) (x-a)^(-1/2) dx = int 2 f(a+s^2) ds
        if singularity == "inverse-sqrt-left":
            w = 2.0 * ws
        else:
            w = 2.0 * s * ws
        return QuadratureRule(x, w, singularity, (a, b), mapping, tail, param=s)
    if singularity == "inverse-sqrt-right":
        s, ws = _gauss_legendre(n, 0.0, np.sqrt(h))
        x = b_eff - s[::-1] ** 2
        w = 2.0 * ws[::-1]
        return QuadratureRule(x, w, singularity, (a, b), mapping, tail, param=s[::-1])
    phi, wp = _gauss_legendre(n, 0.0, 0.5 * np.pi)
    x = a + h * np.sin(phi) ** 2
    # dx / sqrt((x-a)(b-x)) = 2 dphi
    w = 2.0 * wp
    return QuadratureRule(x, w, singularity, (a, b), mapping, tail, param=phi)


def sine_map_rule(a: float, b: float, n: int) -> QuadratureRule:
    """Plain-measure rule on a finite band from ``x = a + (b-a) sin^2(phi)``.

    The Jacobian vanishes like a square root at both ends, so integrands carrying
    ``1/sqrt`` edge behavior at either end are integrated spectrally.
    """
    phi, wp = _gauss_legendre(n, 0.0, 0.5 * np.pi)
    h = b - a
    x = a + h * np.sin(phi) ** 2
    w = h * np.sin(2 * phi) * wp
    return QuadratureRule(x, w, "none", (a, b), "sqrt", 0.0, param=phi)


def sqrt_map_rule(a: float, cutoff: float, n: int, tail_decay: float = 1.0) -> QuadratureRule:
    """Plain-measure rule on ``[a, cutoff]`` from ``x = a + s^2`` (semi-infinite band truncation)."""
    s, ws = _gauss_legendre(n, 0.0, np.sqrt(cutoff - a))
    x = a + s**2
    return QuadratureRule(
        x, 2.0 * s * ws, "none", (a, np.inf), "sqrt", tail_decay / np.sqrt(cutoff - a), param=s
    )


def composite_gauss(breaks: np.ndarray, order: int):
    """Gauss-Legendre nodes/weights on every panel ``[breaks[i], breaks[i+1]]``.

    Returns ``(nodes, weights)`` as arrays of shape ``(len(breaks)-1, order)``.
    """
    t, w = special.roots_legendre(order)
    lo = breaks[:-1, None]
    width = np.diff(breaks)[:, None]
    return lo + 0.5 * width * (t + 1), 0.5 * width * w


# --------------------------------------------------------------------------- Fredholm


@dataclass
class FredholmSolution:
    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    residual: float
    cond: float
    kernel: Callable | None = field(default=None, repr=False)
    rhs: Callable | None = field(default=None, repr=False)

    def __call__(self, s):
        """Nystrom interpolation of the solution at arbitrary points."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        k = self.kernel(s[:, None], self.nodes[None, :])
        return -self.rhs(s) - k @ (self.weights * self.values)


def nystrom_solve(matrix: np.ndarray, weights: np.ndarray, rhs: np.ndarray, cond_max: float = 1e12):
    """Solve ``f_i + sum_j matrix_ij w_j f_j = -rhs_i``; return (f, relative residual, cond)."""
    a = np.eye(len(weights)) + matrix * weights[None, :]
    lu, piv = linalg.lu_factor(a, check_finite=False)
    # cheap 1-norm condition estimate from the LU factors
    anorm = np.linalg.norm(a, 1)
    rcond = _lu_rcond(lu, piv, anorm)
    cond = np.inf if rcond == 0 else 1.0 / rcond
    if not np.isfinite(cond) or cond > cond_max:
        raise SingularSystemError(cond)
    f = linalg.lu_solve((lu, piv), -rhs, check_finite=False)
    res = np.linalg.norm(a @ f + rhs, np.inf) / max(np.linalg.norm(rhs, np.inf), 1e-300)
    return f, res, cond


def _lu_rcond(lu, piv, anorm):
    gecon = linalg.get_lapack_funcs("gecon", (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    return rcond


def solve_fredholm2(
    kernel: Callable,
    rhs: Callable,
    domain: tuple[float, float],
    n: int,
    panels: int | None = None,
    cond_max: float = 1e12,
) -> FredholmSolution:
    """Nystrom solution of ``f(s) + int_domain kernel(s,t) f(t) dt = -rhs(s)``.

    A semi-infinite domain ``(x, inf)`` is mapped to ``(0, 1)`` by ``t = x + u/(1-u)``.
    Finite domains use composite Gauss-Legendre with ``panels`` panels of ``n // panels`` nodes.
    """
    a, b = domain
    if np.isinf(b):
        u, wu = special.roots_legendre(n)
        u = 0.5 * (u + 1)
        wu = 0.5 * wu
        t = a + u / (1 - u)
        w = wu / (1 - u) ** 2
    else:
        p = panels or max(1, n // 16)
        order = max(2, n // p)
        nodes, weights = composite_gauss(np.linspace(a, b, p + 1), order)
        t, w = nodes.ravel(), weights.ravel()
    kmat = kernel(t[:, None], t[None, :])
    kmat = np.broadcast_to(kmat, (t.size, t.size))
    g = np.broadcast_to(rhs(t), t.shape)
    f, res, cond = nystrom_solve(np.asarray(kmat, float), w, np.asarray(g, float), cond_max)
    return FredholmSolution(t, w, f, res, cond, kernel, rhs)


# --------------------------------------------------------------------------- roots


def bracket_roots(
    f: Callable[[float], float],
    interval: tuple[float, float],
    max_roots: int = 64,
    samples: int = 200,
    tol: float = ROOT_TOL,
    grid: np.ndarray | None = None,
) -> list[float]:
    """Sign-change roots of ``f`` on ``interval``, refined by Brent's method.

    The interval is sampled on ``samples`` points (or the supplied ``grid``); every sign change
    is refined.  Exact zeros at sample points are kept.  Raises :class:`IncompleteScanError`
    when more than ``max_roots`` roots are found.
    """
    a, b = interval
    xs = np.linspace(a, b, samples) if grid is None else np.asarray(grid, float)
    vals = np.array([f(x) for x in xs], dtype=float)
    roots: list[float] = []
    for i in range(xs.size - 1):
        fa, fb = vals[i], vals[i + 1]
        if fa == 0.0:
            roots.append(float(xs[i]))
        elif fa * fb < 0:
            r = optimize.brentq(f, xs[i], xs[i + 1], xtol=tol, rtol=4 * np.finfo(float).eps)
            roots.append(float(r))
        if len(roots) > max_roots:
            raise IncompleteScanError(roots[:max_roots])
    if vals[-1] == 0.0:
        roots.append(float(xs[-1]))
    if len(roots) > max_roots:
        raise IncompleteScanError(roots[:max_roots])
    return sorted(roots)


# --------------------------------------------------------------------------- differences


def fd_derivative(values: np.ndarray, h: float, order: int = 4) -> np.ndarray:
    """Finite-difference derivative on a uniform grid.

    ``order=4`` uses the five-point central stencil with one-sided fourth-order stencils at the
    ends.  ``order=6`` switches the points at least three steps from either end to the
    seven-point central stencil.
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    if n < 5:
        raise ValueError("need at least 5 samples for the 4th-order stencil")
    if order not in (4, 6):
        raise ValueError("order must be 4 or 6")
    d = np.empty(n)
    d[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
    d[0] = (-25 * v[0] + 48 * v[1] - 36 * v[2] + 16 * v[3] - 3 * v[4]) / (12 * h)
    d[1] = (-3 * v[0] - 10 * v[1] + 18 * v[2] - 6 * v[3] + v[4]) / (12 * h)
    d[-1] = (25 * v[-1] - 48 * v[-2] + 36 * v[-3] - 16 * v[-4] + 3 * v[-5]) / (12 * h)
    d[-2] = (3 * v[-1] + 10 * v[-2] - 18 * v[-3] + 6 * v[-4] - v[-5]) / (12 * h)
    if order == 6 and n >= 7:
        d[3:-3] = (-v[:-6] + 9 * v[1:-5] - 45 * v[2:-4] + 45 * v[4:-2] - 9 * v[5:-1]
                   + v[6:]) / (60 * h)
    return d
