"""Steplike potentials on a finite window, plus the built-in test set."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, interpolate, special

from .background import (BackgroundModel, build_constant_background,
                         build_periodic_background)


@dataclass
class GridPotential:
    """Potential ``q`` equal to the right/left background beyond ``X+``/``X-``.

    ``func`` is evaluated inside the window only; outside it the background profiles are
    used, which is the matching rule that makes Jost solutions start from exact Weyl data.
    ``jump`` marks an optional discontinuity (Jost solutions are matched there).
    """

    func: Callable = field(repr=False)
    left: BackgroundModel = field(repr=False)
    right: BackgroundModel = field(repr=False)
    window: tuple[float, float] = (-8.0, 8.0)
    name: str = "custom"
    jump: float | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.window[0] < self.window[1]:
            raise ValueError("window must satisfy X- < X+")
        if self.left.side != -1 or self.right.side != 1:
            raise ValueError("left background must have side -1, right side +1")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        xl, xr = self.window
        inside = np.asarray(self.func(np.clip(x, xl, xr)), dtype=float)
        out = np.where(x > xr, self.right.potential(x), inside)
        out = np.where(x < xl, self.left.potential(x), out)
        return out if out.ndim else float(out)

    def coefficient(self, side: int) -> Callable[[float], float]:
        """Scalar coefficient for ODE integration; at ``jump`` the one-sided limit of ``side``."""
        j = self.jump
        if j is None:
            return lambda x: float(self(x))
        eps = 1e-12 * (1 + abs(j))
        return lambda x: float(self(j + side * eps)) if x == j else float(self(x))

    @property
    def matching_point(self) -> float:
        if self.jump is not None:
            return float(self.jump)
        xl, xr = self.window
        return float(min(max(0.0, xl), xr))

    def perturbation(self, side: int):
        """``q - p_side`` as a callable."""
        bg = self.right if side > 0 else self.left
        return lambda x: self(x) - bg.potential(x)

    def samples(self, n: int = 1601):
        x = np.linspace(*self.window, n)
        return x, self(x)

    def moment(self, side: int, order: int = 2) -> float:
        """``+-int |q - p_side| (1 + x^order)`` over the half of the window on that side."""
        xl, xr = self.window
        a, b = (self.matching_point, xr) if side > 0 else (xl, self.matching_point)
        pert = self.perturbation(side)
        x = np.linspace(a, b, 4001)
        return float(integrate.trapezoid(np.abs(pert(x)) * (1 + np.abs(x) ** order), x))

    def mirrored(self) -> "GridPotential":
        """The reflected potential ``q(-x)`` with backgrounds exchanged."""
        f = self.func
        return GridPotential(lambda x: f(-np.asarray(x, float)), self.right.mirrored(),
                             self.left.mirrored(), (-self.window[1], -self.window[0]),
                             self.name + "-mirrored", None if self.jump is None else -self.jump,
                             dict(self.params))


def from_samples(x, q, left: BackgroundModel, right: BackgroundModel, name="samples") -> GridPotential:
    """Potential from samples on a window, interpolated by a cubic spline."""
    x = np.asarray(x, float)
    spline = interpolate.CubicSpline(x, np.asarray(q, float))
    return GridPotential(lambda t: spline(t), left, right, (float(x[0]), float(x[-1])), name)


# ---------------------------------------------------------------------- built-ins


def lame_profile(m: float = 0.5, shift: float | None = None):
    """One-gap Lame profile ``2 m sn^2(x + shift | m)`` and its period ``2K(m)``.

    Band edges are ``m, 1, 1 + m``.  The default shift ``K/2`` keeps the Dirichlet point away
    from the gap edges.
    """
    kk = float(special.ellipk(m))
    x0 = 0.5 * kk if shift is None else shift

    def prof(x):
        return 2 * m * special.ellipj(np.asarray(x, float) + x0, m)[0] ** 2

    return prof, 2 * kk


def free(window=(-8.0, 8.0), c: float = 0.0) -> GridPotential:
    return GridPotential(lambda x: np.full_like(np.asarray(x, float), c),
                         build_constant_background(-1, c), build_constant_background(1, c),
                         window, "free", params={"c": c})


def sech2(window=(-8.0, 8.0), depth: float = 2.0) -> GridPotential:
    """``-depth sech^2 x``; ``depth = 2`` is reflectionless with one level at ``-1``."""
    return GridPotential(lambda x: -depth / np.cosh(np.asarray(x, float)) ** 2,
                         build_constant_background(-1, 0.0), build_constant_background(1, 0.0),
                         window, "sech2", params={"depth": depth})


def smooth_step(window=(-8.0, 8.0), c_left: float = 0.0, c_right: float = 1.0,
                steepness: float = 2.0) -> GridPotential:
    """``c_left + (c_right - c_left) (1 + tanh(steepness x)) / 2``."""

    def f(x):
        return c_left + (c_right - c_left) * 0.5 * (1 + np.tanh(steepness * np.asarray(x, float)))

    return GridPotential(f, build_constant_background(-1, c_left),
                         build_constant_background(1, c_right), window, "step",
                         params={"c_left": c_left, "c_right": c_right, "steepness": steepness})


def sharp_step(window=(-8.0, 8.0), c_left: float = 0.0, c_right: float = 1.0) -> GridPotential:
    def f(x):
        return np.where(np.asarray(x, float) > 0, c_right, c_left).astype(float)

    return GridPotential(f, build_constant_background(-1, c_left),
                         build_constant_background(1, c_right), window, "sharp_step", jump=0.0,
                         params={"c_left": c_left, "c_right": c_right})


def gaussian_bump(window=(-8.0, 8.0), amplitude: float = 0.5, width: float = 1.0) -> GridPotential:
    return GridPotential(lambda x: amplitude * np.exp(-(np.asarray(x, float) / width) ** 2),
                         build_constant_background(-1, 0.0), build_constant_background(1, 0.0),
                         window, "bump", params={"amplitude": amplitude, "width": width})


def lame_bump(window=(-8.0, 8.0), m: float = 0.5, amplitude: float = 0.5,
              steepness: float = 2.0) -> GridPotential:
    """Lame one-gap background on the right, zero on the left, joined smoothly, plus a bump."""
    prof, period = lame_profile(m)
    right = build_periodic_background(1, prof, period, z_scan=(-1.0, 450.0))
    left = build_constant_background(-1, 0.0)

    def f(x):
        x = np.asarray(x, float)
        return 0.5 * (1 + np.tanh(steepness * x)) * prof(x) + amplitude * np.exp(-x * x)

    return GridPotential(f, left, right, window, "lame_bump",
                         params={"m": m, "amplitude": amplitude, "steepness": steepness})


BUILTINS = {
    "free": free,
    "sech2": sech2,
    "step": smooth_step,
    "sharp_step": sharp_step,
    "bump": gaussian_bump,
    "lame_bump": lame_bump,
}


def builtin(name: str, **params) -> GridPotential:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown builtin potential {name!r}; choose from {sorted(BUILTINS)}")
    return factory(**params)
