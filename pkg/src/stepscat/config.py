"""Run configuration: flat INI sections parsed with :mod:`configparser`.

Example::

    [potential]
    name = step            ; a built-in, or ``file = samples.csv`` with columns x,q
    c_right = 1.0          ; remaining keys are parameters of the built-in
    window = -8, 8

    [background.right]     ; required for file potentials, checked against built-ins
    kind = periodic
    profile = lame
    m = 0.5

    [grid]
    spacing = 0.1
    order = 4

    [tolerances]
    I(c)+ = 1e-6

    [kdv]
    times = 0, 0.05, 0.1

Relative file paths are resolved against the directory of the configuration file.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import interpolate

from .background import BackgroundModel, build_constant_background, build_periodic_background
from .direct import GridSpec
from .glm import PANEL_ORDER, PANEL_SPACING
from .potentials import BUILTINS, GridPotential, builtin, from_samples, lame_profile

WINDOW_TOL = 1e-6
GRID_KEYS = {"omega": float, "cutoff": float, "density": float, "base": int}


class ConfigError(ValueError):
    """The configuration or a file it references is invalid."""


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _number(section: str, key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {text!r} is not a number") from None


def _read_columns(path: Path, needed) -> dict:
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    try:
        raw = np.genfromtxt(path, delimiter=",", names=True, dtype=float, encoding="utf-8")
    except (ValueError, OSError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    raw = np.atleast_1d(raw)
    names = raw.dtype.names or ()
    missing = [c for c in needed if c not in names]
    if missing:
        raise ConfigError(f"{path} lacks column(s) {missing}; has {list(names)}")
    cols = {c: np.asarray(raw[c], float) for c in needed}
    if any(not np.all(np.isfinite(v)) for v in cols.values()):
        raise ConfigError(f"{path} contains non-finite values")
    return cols


@dataclass
class RunConfig:
    path: Path | None
    digest: str
    potential: dict
    backgrounds: dict  # "left"/"right" -> dict of section keys
    window: tuple[float, float] | None
    grid: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    times: list = field(default_factory=list)
    n_s: int = 16

    # -------------------------------------------------------------- construction

    @classmethod
    def from_text(cls, text: str, path: Path | None = None) -> "RunConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        parser.optionxform = str  # keep key case: tolerance names are case sensitive
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed configuration: {exc}") from exc
        if not parser.has_section("potential"):
            raise ConfigError("configuration needs a [potential] section")
        pot = dict(parser["potential"])
        window = None
        if "window" in pot:
            w = _floats(pot.pop("window"))
            if len(w) != 2 or not w[0] < w[1]:
                raise ConfigError("window must be two increasing numbers")
            window = (w[0], w[1])
        if ("name" in pot) == ("file" in pot):
            raise ConfigError("[potential] needs exactly one of name = <builtin> or file = <csv>")
        bgs = {}
        for side in ("left", "right"):
            sec = f"background.{side}"
            if parser.has_section(sec):
                bgs[side] = dict(parser[sec])
        grid = {}
        if parser.has_section("grid"):
            for k, v in parser["grid"].items():
                if k in GRID_KEYS:
                    grid[k] = GRID_KEYS[k](float(v))
                elif k == "spacing":
                    grid[k] = _number("grid", k, v)
                elif k == "order":
                    grid[k] = int(_number("grid", k, v))
                else:
                    raise ConfigError(f"unknown [grid] key {k!r}")
        tols = {}
        if parser.has_section("tolerances"):
            tols = {k: _number("tolerances", k, v) for k, v in parser["tolerances"].items()}
        times, n_s = [], 16
        if parser.has_section("kdv"):
            kd = parser["kdv"]
            if "times" in kd:
                times = _floats(kd["times"])
            if "n_s" in kd:
                n_s = int(_number("kdv", "n_s", kd["n_s"]))
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return cls(path, digest, pot, bgs, window, grid, tols, times, n_s)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"configuration file not found: {path}")
        return cls.from_text(path.read_text(encoding="utf-8"), path)

    def _resolve(self, name: str) -> Path:
        p = Path(name)
        if not p.is_absolute() and self.path is not None:
            p = self.path.parent / p
        return p

    # -------------------------------------------------------------- objects

    def background(self, side: str) -> BackgroundModel:
        spec = self.backgrounds.get(side)
        sign = 1 if side == "right" else -1
        if spec is None:
            raise ConfigError(f"[background.{side}] is required for a file potential")
        kind = spec.get("kind", "constant")
        sec = f"background.{side}"
        if kind == "constant":
            return build_constant_background(sign, _number(sec, "c", spec.get("c", "0")))
        if kind == "periodic":
            prof_name = spec.get("profile", "lame")
            if prof_name == "lame":
                m = _number(sec, "m", spec.get("m", "0.5"))
                shift = _number(sec, "shift", spec["shift"]) if "shift" in spec else None
                prof, period = lame_profile(m, shift)
            else:
                cols = _read_columns(self._resolve(prof_name), ("x", "p"))
                x, p = cols["x"], cols["p"]
                period = float(x[-1] - x[0])
                if period <= 0 or abs(p[-1] - p[0]) > 1e-9 * max(1.0, np.max(np.abs(p))):
                    raise ConfigError(f"{prof_name} must sample one full period with p(end) = p(start)")
                spline = interpolate.CubicSpline(x - x[0], p, bc_type="periodic")
                x0 = float(x[0])

                def prof(t, _s=spline, _x0=x0, _L=period):
                    return _s(np.mod(np.asarray(t, float) - _x0, _L))
            if "period" in spec and abs(_number(sec, "period", spec["period"]) - period) > 1e-9:
                raise ConfigError(f"[{sec}] period disagrees with the profile's period {period}")
            return build_periodic_background(sign, prof, period)
        raise ConfigError(f"[{sec}] kind must be constant or periodic, got {kind!r}")

    def build_potential(self) -> GridPotential:
        pot = dict(self.potential)
        if "name" in pot:
            name = pot.pop("name")
            if name not in BUILTINS:
                raise ConfigError(f"unknown built-in potential {name!r}; choose from {sorted(BUILTINS)}")
            params = {k: _number("potential", k, v) for k, v in pot.items()}
            if self.window is not None:
                params["window"] = self.window
            try:
                q = builtin(name, **params)
            except TypeError as exc:
                raise ConfigError(f"bad parameters for {name}: {exc}") from exc
            for side, model in (("left", q.left), ("right", q.right)):
                if side in self.backgrounds:
                    self._check_same(side, model)
        else:
            cols = _read_columns(self._resolve(pot.pop("file")), ("x", "q"))
            left, right = self.background("left"), self.background("right")
            x, qs = cols["x"], cols["q"]
            if np.any(np.diff(x) <= 0):
                raise ConfigError("sample abscissae must be strictly increasing")
            if self.window is not None and (x[0] > self.window[0] + 1e-12 or x[-1] < self.window[1] - 1e-12):
                raise ConfigError("samples do not cover the configured window")
            q = from_samples(x, qs, left, right, name="samples")
            if self.window is not None:
                q.window = self.window
        self._check_window(q)
        return q

    def _check_same(self, side: str, model: BackgroundModel):
        given = self.background(side)
        xs = np.linspace(0.0, 3.0, 7) * (1 if side == "right" else -1)
        if given.kind != model.kind or np.max(np.abs(given.potential(xs) - model.potential(xs))) > 1e-9:
            raise ConfigError(f"[background.{side}] disagrees with the built-in potential's background")

    @staticmethod
    def _check_window(q: GridPotential):
        xl, xr = q.window
        scale = max(1.0, float(np.max(np.abs(q(np.linspace(xl, xr, 201))))))
        for x, model in ((xl, q.left), (xr, q.right)):
            gap = abs(float(q.func(np.array([x]))[0]) - float(model.potential(np.array([x]))[0]))
            if gap > WINDOW_TOL * scale:
                raise ConfigError(f"window does not bracket the perturbation: |q - p| = {gap:.3g} at x = {x}")

    def grid_spec(self, window) -> GridSpec:
        kw = {k: v for k, v in self.grid.items() if k in GRID_KEYS}
        spec = GridSpec.for_window(window)
        for k, v in kw.items():
            setattr(spec, k, v)
        return spec

    @property
    def spacing(self) -> float:
        return float(self.grid.get("spacing", PANEL_SPACING))

    @property
    def order(self) -> int:
        return int(self.grid.get("order", PANEL_ORDER))
