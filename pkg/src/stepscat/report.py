"""Run reports and the self-convergence study.

A report lists every checked invariant once, with its measured value, tolerance and verdict.
The self-convergence study repeats a computation with every node count doubled (band grids,
Gauss nodes per GLM panel, the KdV phase quadrature) and checks that each reported quantity
moves by less than the error estimate reported alongside it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .background import BackgroundModel
from .direct import ScatteringData
from .glm import assemble_kernel, solve_glm_rows
from .numerics import ROOT_TOL, fd_derivative


class DuplicateEntry(KeyError):
    """An invariant was recorded twice in one report."""


@dataclass
class RunReport:
    command: str
    config_digest: str
    entries: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def add(self, name: str, value: float, tol: float | None):
        """Record an invariant; ``tol=None`` records a measurement without a verdict."""
        if name in self.entries:
            raise DuplicateEntry(name)
        value = float(value)
        passed = None if tol is None else bool(np.isfinite(value) and value <= tol)
        self.entries[name] = {"value": value, "tol": None if tol is None else float(tol),
                              "passed": passed}

    def add_failure(self, name: str, message: str):
        if name in self.entries:
            raise DuplicateEntry(name)
        self.entries[name] = {"value": float("nan"), "tol": None, "passed": False,
                              "message": message}

    @property
    def failures(self) -> list[str]:
        return [k for k, e in self.entries.items() if e["passed"] is False]

    @property
    def passed(self) -> bool:
        return not self.failures

    def timed(self, name: str):
        report = self

        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                report.timings[name] = time.perf_counter() - self.t0
                return False

        return _Timer()

    def to_dict(self) -> dict:
        return {"command": self.command, "config_sha256": self.config_digest,
                "entries": self.entries, "outputs": list(self.outputs),
                "timings": self.timings, "info": self.info, "passed": self.passed}


# ---------------------------------------------------------------------- error estimates


ROUNDOFF_ULPS = 100.0
STENCIL_GAIN = 110.0 / 60.0  # sum of |coefficients| of the sixth-order first-derivative stencil


def reconstruction_error_estimate(diagonal, h: float, order: int = 6) -> np.ndarray:
    """Error estimate of ``q~ = p -+ 2 dK(x,x)/dx``.

    The truncation part is twice the difference between the derivative stencil in use and the
    next lower order.  A rounding floor covers kernels that are (nearly) zero, where that
    difference is itself pure round-off: ``ROUNDOFF_ULPS`` units of ``max(1, |K|)`` amplified by
    the stencil.
    """
    diagonal = np.asarray(diagonal, float)
    d_hi = fd_derivative(diagonal, h, order)
    d_lo = fd_derivative(diagonal, h, 4 if order > 4 else 2)
    floor = 2.0 * STENCIL_GAIN / h * ROUNDOFF_ULPS * np.finfo(float).eps \
        * max(1.0, float(np.max(np.abs(diagonal))))
    return 2.0 * np.abs(d_hi - d_lo) + floor


def central_rows(x, count: int = 9, pad: int = 3) -> np.ndarray:
    """Indices of ``count`` lattice rows around the window centre plus ``pad`` on each side for
    the derivative stencil."""
    n = len(x)
    half = count // 2 + pad
    mid = n // 2
    lo, hi = max(0, mid - half), min(n, mid + half + 1)
    return np.arange(lo, hi)


@dataclass
class ConvergenceItem:
    name: str
    change: float
    estimate: float

    @property
    def ratio(self) -> float:
        if self.change == 0.0:
            return 0.0
        return self.change / self.estimate if self.estimate > 0 else np.inf


def _diag_qtilde(F, x, spacing, order, model, side):
    dg = solve_glm_rows(F, x, spacing, order)
    return dg, model.potential(x) - side * 2.0 * fd_derivative(dg, spacing, 6)


def reconstruction_convergence(data: ScatteringData, data2: ScatteringData,
                               left: BackgroundModel, right: BackgroundModel, window,
                               spacing: float, order: int, sides=(1, -1),
                               count: int = 9) -> list[ConvergenceItem]:
    """Change of ``q~+-`` on central rows when the band grids and the Gauss order double.

    ``data2`` must be the scattering data on doubled grids (it may be ``data`` itself when only
    the panel order can be doubled, e.g. for a stored data file).
    """
    items = []
    for side in sides:
        model = right if side > 0 else left
        F = assemble_kernel(data, left, right, side, window)
        F2 = assemble_kernel(data2, left, right, side, window)
        xl, xr = F.window
        top, bottom = (xr, xl) if side > 0 else (-xl, -xr)
        n_rows = int(round((top - bottom) / spacing)) + 1
        plus_rows = bottom + spacing * np.arange(n_rows)
        idx = central_rows(plus_rows, count)
        x = side * plus_rows[idx]
        dg, qt = _diag_qtilde(F, x, spacing, order, model, side)
        _, qt2 = _diag_qtilde(F2, x, spacing, 2 * order, model, side)
        est = reconstruction_error_estimate(dg, spacing)
        inner = slice(3, -3)
        tag = "+" if side > 0 else "-"
        items.append(ConvergenceItem(f"q_tilde{tag}", float(np.max(np.abs(qt2 - qt)[inner])),
                                     float(np.max(est[inner]))))
    return items


def bound_state_convergence(data: ScatteringData, data2: ScatteringData) -> list[ConvergenceItem]:
    """Eigenvalues and norming constants at base and doubled resolution."""
    items = []
    ev, ev2 = np.asarray(data.eigenvalues, float), np.asarray(data2.eigenvalues, float)
    if ev.size != ev2.size:
        return [ConvergenceItem("eigenvalue_count", float(abs(ev.size - ev2.size)), 0.0)]
    if ev.size == 0:
        return items
    states = data.meta.get("bound_states", [])
    ident = np.array([s.get("identity_error", 0.0) for s in states]) if states else np.zeros(ev.size)
    ident = np.maximum(ident, 1e-9)
    items.append(ConvergenceItem("eigenvalues", float(np.max(np.abs(ev2 - ev))),
                                 float(max(ROOT_TOL, 10 * ROOT_TOL * np.max(np.abs(ev))))))
    for key in ("gamma_plus", "gamma_minus"):
        g, g2 = np.asarray(getattr(data, key)) ** 2, np.asarray(getattr(data2, key)) ** 2
        items.append(ConvergenceItem(f"{key}^2", float(np.max(np.abs(g2 - g) / np.abs(g))),
                                     float(np.min(ident))))
    return items


def record_convergence(report: RunReport, items: list[ConvergenceItem], prefix: str = ""):
    """One entry per quantity: value = change / estimate, tolerance 1."""
    details = report.info.setdefault("self_convergence", {})
    for it in items:
        name = f"self_convergence:{prefix}{it.name}"
        report.add(name, it.ratio, 1.0)
        details[prefix + it.name] = {"change": it.change, "estimate": it.estimate}
