"""Command-line front end: ``scatter direct|inverse|roundtrip|kdv``.

Exit status is 0 when every recorded invariant passes, 2 when one fails (including numerical
breakdowns) and 3 for configuration or input errors.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import io
from .config import ConfigError, RunConfig
from .direct import DEFAULT_TOLERANCES, InvariantViolation, build_scattering_data, unitarity_checks
from .glm import reconstruct
from .kdv import evolve_data, recomputed_eigenvalues, solve_kdv_ist
from .numerics import NumericsError
from .report import (RunReport, bound_state_convergence, reconstruction_convergence,
                     record_convergence)

EXIT_OK, EXIT_INVARIANT, EXIT_INPUT = 0, 2, 3

# tolerances used by the commands on top of the direct-problem defaults
COMMAND_TOLERANCES = {
    "W_x_independence": 1e-10,
    "F_symmetry+": 1e-9, "F_symmetry-": 1e-9,
    "glm_residual+": 1e-8, "glm_residual-": 1e-8,
    "roundtrip+": 1e-3, "roundtrip-": 1e-3, "consistency": 1e-3,
    "isospectrality": 1e-5,
    "R_bound_sigma2": 1e-10,
}
NECESSARY = ("I(b)+", "I(b)-", "I(c)+", "I(c)-", "I(e)+", "I(e)-", "II")


def _tolerances(cfg: RunConfig) -> dict:
    tols = dict(DEFAULT_TOLERANCES)
    tols.update(COMMAND_TOLERANCES)
    tols.update(cfg.tolerances)
    return tols


def _add_checks(report: RunReport, checks: dict, tols: dict, prefix: str = ""):
    for name in sorted(checks):
        report.add(prefix + name, checks[name], tols.get(name))


def _report_path(out: str | None, given: str | None, stem: str) -> Path:
    if given:
        return Path(given)
    if out:
        p = Path(out)
        return p.with_name(p.stem + ".report.json")
    return Path(stem + ".report.json")


# ---------------------------------------------------------------------- commands


def cmd_direct(cfg: RunConfig, out: str, report_path: str | None = None,
               convergence: bool = True) -> RunReport:
    tols = _tolerances(cfg)
    report = RunReport("direct", cfg.digest)
    with report.timed("setup"):
        q = cfg.build_potential()
        spec = cfg.grid_spec(q.window)
    with report.timed("direct"):
        data = build_scattering_data(q, spec, strict=False, edges=True)
    _add_checks(report, data.checks, tols)
    report.info["eigenvalues"] = [float(v) for v in data.eigenvalues]
    report.info["virtual_levels"] = data.virtual_levels
    if convergence:
        with report.timed("self_convergence"):
            data2 = build_scattering_data(q, spec.doubled(), strict=False, edges=False)
            record_convergence(report, bound_state_convergence(data, data2))
    report.outputs.append(str(io.save_data(data, out)))
    _write_report(report, _report_path(out, report_path, "direct"))
    return report


def validate_data(data, left, right, tols: dict, report: RunReport) -> bool:
    """Re-check the necessary conditions on loaded data; failures are named in the report."""
    checks = unitarity_checks(data, SimpleNamespace(left=left, right=right))
    ok = True
    for name in NECESSARY:
        if name in checks:
            report.add(name, checks[name], tols.get(name, 1e-6))
            ok &= report.entries[name]["passed"]
    if "R_bound_sigma2" in checks:
        report.add("R_bound_sigma2", checks["R_bound_sigma2"], tols["R_bound_sigma2"])
        ok &= report.entries["R_bound_sigma2"]["passed"]
    return bool(ok)


def _inverse_outputs(rep, out):
    disc = np.abs(rep.q_plus - rep.q_minus)
    return io.write_csv(out, ["x", "q_plus", "q_minus", "discrepancy"],
                        [rep.x, rep.q_plus, rep.q_minus, disc])


def _add_reconstruction(report: RunReport, rep, tols):
    for name, e in rep.entries.items():
        report.add(name, e["value"], tols.get(name, e["tol"]))
    for k, v in rep.moments.items():
        report.info[f"moment{k}"] = v


def cmd_inverse(cfg: RunConfig, data_path: str, out: str, report_path: str | None = None,
                convergence: bool = True) -> RunReport:
    tols = _tolerances(cfg)
    report = RunReport("inverse", cfg.digest)
    with report.timed("setup"):
        q = cfg.build_potential()  # supplies backgrounds and window
        try:
            data = io.load_data(data_path)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read scattering data {data_path}: {exc}") from exc
    rpath = _report_path(out, report_path, "inverse")
    if not validate_data(data, q.left, q.right, tols, report):
        _write_report(report, rpath)
        return report
    with report.timed("inverse"):
        rep = reconstruct(data, q.left, q.right, window=q.window, spacing=cfg.spacing,
                          order=cfg.order)
    _add_reconstruction(report, rep, tols)
    if convergence:
        with report.timed("self_convergence"):
            record_convergence(report, reconstruction_convergence(
                data, data, q.left, q.right, q.window, cfg.spacing, cfg.order))
    report.outputs.append(str(_inverse_outputs(rep, out)))
    _write_report(report, rpath)
    return report


def cmd_roundtrip(cfg: RunConfig, report_path: str, out: str | None = None,
                  convergence: bool = True) -> RunReport:
    tols = _tolerances(cfg)
    report = RunReport("roundtrip", cfg.digest)
    with report.timed("setup"):
        q = cfg.build_potential()
        spec = cfg.grid_spec(q.window)
    with report.timed("direct"):
        data = build_scattering_data(q, spec, strict=False, edges=False)
    _add_checks(report, data.checks, tols)
    with report.timed("inverse"):
        rep = reconstruct(data, q.left, q.right, window=q.window, q_ref=q,
                          tol=tols["roundtrip+"], spacing=cfg.spacing, order=cfg.order)
    _add_reconstruction(report, rep, tols)
    report.info["sup_error"] = max(report.entries["roundtrip+"]["value"],
                                   report.entries["roundtrip-"]["value"])
    if convergence:
        with report.timed("self_convergence"):
            data2 = build_scattering_data(q, spec.doubled(), strict=False, edges=False)
            items = bound_state_convergence(data, data2)
            items += reconstruction_convergence(data, data2, q.left, q.right, q.window,
                                                cfg.spacing, cfg.order)
            record_convergence(report, items)
    if out:
        report.outputs.append(str(_inverse_outputs(rep, out)))
    _write_report(report, Path(report_path))
    return report


def cmd_kdv(cfg: RunConfig, times, out: str, report_path: str | None = None,
            convergence: bool = True) -> RunReport:
    tols = _tolerances(cfg)
    report = RunReport("kdv", cfg.digest)
    times = list(times if times is not None else cfg.times)
    if not times:
        raise ConfigError("no times given (use --times or [kdv] times)")
    with report.timed("setup"):
        q = cfg.build_potential()
        spec = cfg.grid_spec(q.window)
    with report.timed("direct"):
        data = build_scattering_data(q, spec, strict=False, edges=False)
    _add_checks(report, data.checks, tols, prefix="direct:")
    with report.timed("kdv"):
        sol = solve_kdv_ist(q, times, data=data, n_s=cfg.n_s)
    for t, msg in sol.failures.items():
        report.add_failure(f"t={t:g}:reconstruction", msg)
    ev0 = np.asarray(data.eigenvalues, float)
    drift = 0.0
    # Dirichlet points of the evolved backgrounds; a class change between times marks a sign flip
    dirichlet = report.info.setdefault("dirichlet", {})
    for k, t in enumerate(sol.times):
        ev = sol.evolved[k]
        if ev is not None:
            dirichlet[f"t={t:g}"] = {
                side: [{"mu": float(m), "class": str(c)} for m, c in zip(bg.mu, bg.mu_class)]
                for side, bg in (("left", ev.left), ("right", ev.right))}
    with report.timed("isospectrality"):
        for k, t in enumerate(sol.times):
            ev = sol.evolved[k]
            if ev is None:
                continue
            for name in NECESSARY[:6]:
                report.add(f"t={t:g}:{name}", ev.checks[name], tols.get(name))
            report.add(f"t={t:g}:consistency", sol.discrepancy[k], tols["consistency"])
            lam = recomputed_eigenvalues(sol.x, sol.u[k], ev.left, ev.right)
            if lam.size != ev0.size:
                drift = np.inf
            elif lam.size:
                drift = max(drift, float(np.max(np.abs(np.sort(lam) - np.sort(ev0)))))
    report.add("isospectrality", drift, tols["isospectrality"])
    if convergence and sol.evolved[-1] is not None:
        with report.timed("self_convergence"):
            t_last = float(sol.times[-1])
            data2 = build_scattering_data(q, spec.doubled(), strict=False, edges=False)
            ev1 = sol.evolved[-1]
            ev2 = evolve_data(data2, t_last, q.left, q.right, 2 * cfg.n_s, strict=False)
            record_convergence(report, reconstruction_convergence(
                ev1.data, ev2.data, ev1.left, ev1.right, q.window, cfg.spacing, cfg.order),
                prefix=f"t={t_last:g}:")
    tt = np.repeat(sol.times, sol.x.size)
    xx = np.tile(sol.x, sol.times.size)
    report.outputs.append(str(io.write_csv(out, ["t", "x", "u"], [tt, xx, sol.u.ravel()])))
    _write_report(report, _report_path(out, report_path, "kdv"))
    return report


def _write_report(report: RunReport, path: Path):
    report.outputs.append(str(path))
    io.save_json(report.to_dict(), path)


# ---------------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scatter", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    d = sub.add_parser("direct", help="compute scattering data")
    d.add_argument("--config", required=True)
    d.add_argument("--out", required=True, help="scattering-data JSON")
    d.add_argument("--report")
    i = sub.add_parser("inverse", help="reconstruct the potential from a data file")
    i.add_argument("--data", required=True)
    i.add_argument("--config", required=True)
    i.add_argument("--out", required=True, help="CSV with x, q_plus, q_minus, discrepancy")
    i.add_argument("--report")
    r = sub.add_parser("roundtrip", help="direct followed by inverse, compared with the input")
    r.add_argument("--config", required=True)
    r.add_argument("--report", required=True)
    r.add_argument("--out", help="optional CSV of the reconstruction")
    k = sub.add_parser("kdv", help="solve the KdV equation by the inverse scattering transform")
    k.add_argument("--config", required=True)
    k.add_argument("--times", help="comma-separated times (default: [kdv] times)")
    k.add_argument("--out", required=True, help="CSV with t, x, u")
    k.add_argument("--report")
    for sp in (d, i, r, k):
        sp.add_argument("--no-convergence", action="store_true",
                        help="skip the doubled-resolution self-convergence study")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    conv = not args.no_convergence
    t0 = time.perf_counter()
    try:
        cfg = RunConfig.load(args.config)
        if args.command == "direct":
            report = cmd_direct(cfg, args.out, args.report, conv)
        elif args.command == "inverse":
            report = cmd_inverse(cfg, args.data, args.out, args.report, conv)
        elif args.command == "roundtrip":
            report = cmd_roundtrip(cfg, args.report, args.out, conv)
        else:
            times = None
            if args.times:
                try:
                    times = [float(s) for s in args.times.split(",") if s.strip()]
                except ValueError:
                    raise ConfigError(f"--times must be comma-separated numbers, got {args.times!r}")
            report = cmd_kdv(cfg, times, args.out, args.report, conv)
    except ConfigError as exc:
        print(f"scatter: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InvariantViolation, NumericsError) as exc:
        print(f"scatter: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    elapsed = time.perf_counter() - t0
    for name in report.failures:
        e = report.entries[name]
        print(f"FAIL {name}: value {e['value']:.3g} tol {e['tol']}", file=sys.stderr)
    print(f"scatter {args.command}: {'pass' if report.passed else 'FAIL'} "
          f"({len(report.entries)} entries, {elapsed:.1f} s)")
    return EXIT_OK if report.passed else EXIT_INVARIANT


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
