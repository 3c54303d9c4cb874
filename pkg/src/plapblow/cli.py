"""Command line: ``plapblow {validate|rate|solve|oracle} --config <path>``.

Exit codes: 0 ok, 2 hypothesis or validation failure, 3 solver divergence,
64 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import plot_script, write_csv, write_json, write_text
from .asymptotics import (
    AsymptoticsError,
    corollary_constant,
    exact_profile,
    rate_point,
    residual_1d,
)
from .config import ConfigError, RunConfig, load
from .discretization import Radial, build_grid
from .hypotheses import rate_inputs, validate
from .ladder import (
    FitError,
    LambdaGateError,
    MonotonicityError,
    compare_rate,
    default_L0,
    fit_rate,
    profile_guess,
    run_ladder,
)
from .solver import DirichletProblem

EXIT_OK = 0
EXIT_HYPOTHESIS = 2
EXIT_DIVERGED = 3
EXIT_CONFIG = 64

log = logging.getLogger("plapblow")


def _threads() -> int:
    raw = os.environ.get("PLAPBLOW_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def _manifest(cfg: RunConfig, command: str, **sections) -> dict:
    out = {
        "tool": "plapblow",
        "version": __version__,
        "command": command,
        "config_sha256": cfg.sha256(),
        "config": {k: v for k, v in cfg.values},
    }
    out.update(sections)
    return out


def _strict(cfg: RunConfig, relaxed_flag: bool) -> bool:
    return cfg["mode.strict_hypotheses"] and not relaxed_flag


def _corollary_printed(p: float, q: float, Q: float) -> float:
    try:
        return corollary_constant(p, q, Q)[0]
    except AsymptoticsError:
        return math.nan


# -- commands ----------------------------------------------------------------

def cmd_validate(cfg: RunConfig, out: Path, relaxed: bool = False) -> int:
    spec = cfg.problem_spec()
    report = validate(spec, strict=_strict(cfg, relaxed))
    write_json(out / "manifest.json", _manifest(cfg, "validate", hypotheses=report.to_dict()))
    for d in report.diagnostics:
        print(f"[{d['hypothesis']}] witness={d['witness']!r}: {d['message']}")
    print("hypotheses: " + ("pass" if report.passed else "FAIL"))
    return EXIT_OK if report.passed else EXIT_HYPOTHESIS


def boundary_points(cfg: RunConfig) -> list[float]:
    if cfg["rate.points"]:
        return list(cfg["rate.points"])
    geo = cfg.geometry()
    if isinstance(geo, Radial):
        return [geo.r_hi]
    return [x for x, flag in zip(geo.bounds, geo.blowup) if flag]


def rate_rows(cfg: RunConfig) -> list[list]:
    spec = cfg.problem_spec()
    inputs = rate_inputs(spec)

    def row(x0):
        rp = rate_point(inputs.p, inputs.q, inputs.m, inputs.gamma, inputs.Q, inputs.R,
                        inputs.lam, inputs.f_inf, inputs.g_inf)
        printed = _corollary_printed(inputs.p, inputs.q, inputs.Q * inputs.f_inf)
        return [x0, inputs.gamma, inputs.Q, inputs.R, rp.alpha, rp.eta, rp.A, printed]

    points = boundary_points(cfg)
    with ThreadPoolExecutor(max_workers=min(_threads(), max(1, len(points)))) as pool:
        return list(pool.map(row, points))


RATE_HEADER = ["x0", "gamma", "Q", "R", "alpha", "eta", "A", "A_corollary_printed"]


def cmd_rate(cfg: RunConfig, out: Path) -> int:
    try:
        rows = rate_rows(cfg)
    except AsymptoticsError as exc:
        print(f"rate: {exc}", file=sys.stderr)
        write_json(out / "manifest.json", _manifest(cfg, "rate", error=str(exc)))
        return EXIT_HYPOTHESIS
    write_csv(out / "rate.csv", RATE_HEADER, rows)
    write_json(out / "manifest.json", _manifest(
        cfg, "rate", rate=[dict(zip(RATE_HEADER, r)) for r in rows]))
    for r in rows:
        print(", ".join(f"{k}={v:.10g}" for k, v in zip(RATE_HEADER, r)))
    return EXIT_OK


def cmd_oracle(cfg: RunConfig, out: Path) -> int:
    """Residual of ``A x^-alpha`` in the one-dimensional model equation on a log grid."""
    try:
        inputs = rate_inputs(cfg.problem_spec())
        rp = rate_point(inputs.p, inputs.q, inputs.m, inputs.gamma, inputs.Q, inputs.R,
                        inputs.lam, inputs.f_inf, inputs.g_inf)
    except AsymptoticsError as exc:
        print(f"oracle: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    A = rp.A * cfg["oracle.a_scale"]
    xs = np.geomspace(cfg["oracle.x_min"], cfg["oracle.x_max"], cfg["oracle.n_points"])
    # the balance absorbs f_inf and lam g_inf into the coefficients
    Q = inputs.Q * inputs.f_inf
    R = inputs.R * inputs.lam * inputs.g_inf
    res = [residual_1d(inputs.p, inputs.q, inputs.m, inputs.gamma, rp.eta, Q, R, A, rp.alpha, float(x))
           for x in xs]
    worst = float(np.max(np.abs(res)))
    ok = worst <= 1e-10
    write_csv(out / "oracle.csv", ["x", "relative_residual"], zip(xs, res))
    write_json(out / "manifest.json", _manifest(
        cfg, "oracle", oracle={"A": A, "alpha": rp.alpha, "eta": rp.eta,
                               "max_relative_residual": worst, "ok": ok}))
    print(f"A={A:.12g} alpha={rp.alpha:.12g} max relative residual={worst:.3e}")
    return EXIT_OK if ok else EXIT_HYPOTHESIS


def build_template(cfg: RunConfig, L0: float) -> DirichletProblem:
    spec = cfg.problem_spec()
    geo = spec.geometry
    grid = build_grid(geo, cfg["grid.n_cells"], cfg["grid.grading_ratio"])
    lo = None if isinstance(geo, Radial) and geo.symmetric_origin else L0
    return DirichletProblem(grid=grid, p=spec.p, lam=spec.lam, a=spec.a, b=spec.b, f=spec.f,
                            g=spec.g, boundary=(lo, L0), positivity_floor=1e-8 * L0)


def cmd_solve(cfg: RunConfig, out: Path, force: bool = False, relaxed: bool = False) -> int:
    spec = cfg.problem_spec()
    hyp = validate(spec, strict=_strict(cfg, relaxed))
    sections: dict = {"hypotheses": hyp.to_dict()}
    if not hyp.passed and not force:
        sections["exit_code"] = EXIT_HYPOTHESIS
        write_json(out / "manifest.json", _manifest(cfg, "solve", **sections))
        print("solve: hypotheses fail (use --force to run anyway)", file=sys.stderr)
        return EXIT_HYPOTHESIS

    lcfg = cfg.ladder_config()
    rp = None
    try:
        inputs = rate_inputs(spec)
        rp = rate_point(inputs.p, inputs.q, inputs.m, inputs.gamma, inputs.Q, inputs.R,
                        inputs.lam, inputs.f_inf, inputs.g_inf)
        sections["rate_inputs"] = inputs.to_dict()
        sections["analytic"] = {"alpha": rp.alpha, "eta": rp.eta, "A": rp.A,
                                "A_corollary_printed": _corollary_printed(spec.p, inputs.q, inputs.Q * inputs.f_inf)}
    except AsymptoticsError as exc:
        sections["analytic"] = {"error": str(exc)}
    if lcfg.L0 is not None:
        L0 = lcfg.L0
    elif rp is not None:
        L0 = default_L0(rp.A, rp.alpha, lcfg.interior_margin)
    else:
        raise ConfigError("ladder.L0 = auto needs a power-law tail for f", key="ladder.L0")
    sections["L0"] = L0

    template = build_template(cfg, L0)
    init = profile_guess(template, rp.A, rp.alpha, L0) if rp is not None else None
    try:
        report = run_ladder(template, lcfg, cfg.solve_options(), L0=L0,
                            lambda_star=hyp.lambda_star, init=init)
    except LambdaGateError as exc:
        sections["exit_code"] = EXIT_HYPOTHESIS
        sections["error"] = str(exc)
        write_json(out / "manifest.json", _manifest(cfg, "solve", **sections))
        print(f"solve: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except MonotonicityError as exc:
        sections["exit_code"] = EXIT_DIVERGED
        sections["error"] = str(exc)
        write_json(out / "manifest.json", _manifest(cfg, "solve", **sections))
        print(f"solve: {exc}", file=sys.stderr)
        return EXIT_DIVERGED

    fld = report.final_field
    gamma = sections.get("rate_inputs", {}).get("gamma", 0.0)
    if fld is not None and rp is not None:
        try:
            report.rate_fit = fit_rate(fld, gamma, spec.p, inputs.q,
                                       interior_margin=lcfg.interior_margin,
                                       cap_fraction=cfg["rate.cap_fraction"],
                                       asymptotic_factor=cfg["rate.asymptotic_factor"])
            a_err, A_err = compare_rate(report.rate_fit, rp)
            sections["compare"] = {"alpha_rel_err": a_err, "A_rel_err": A_err}
        except FitError as exc:
            sections["fit_error"] = str(exc)
    sections["ladder"] = report.to_dict()
    code = EXIT_OK if report.converged else EXIT_DIVERGED
    sections["exit_code"] = code

    write_csv(out / "rungs.csv",
              ["rung", "L", "sup_delta", "ordering_slack", "iterations", "converged"],
              [[i, r.L, r.sup_delta, r.ordering_slack, r.report.iterations, r.report.converged]
               for i, r in enumerate(report.rungs)])
    if fld is not None:
        x = fld.grid.nodes
        d = fld.grid.distance
        prof = exact_profile(rp.A, rp.alpha, d) if rp is not None else np.full_like(d, math.nan)
        write_csv(out / "field.csv", ["x", "d", "u", "u_analytic_profile"],
                  zip(x, d, fld.values, prof))
    write_json(out / "manifest.json", _manifest(cfg, "solve", **sections))
    if cfg["output.emit_plot_script"]:
        write_text(out / "plot.gp", plot_script("field.csv", "computed field vs A d^-alpha"))

    fit = report.rate_fit
    print(f"rungs={len(report.rungs)} converged={report.converged} L_final={report.rungs[-1].L:.6g}"
          if report.rungs else "no rung completed")
    if fit is not None:
        print(f"alpha_hat={fit.alpha_hat:.6g} A_hat={fit.A_hat:.6g} "
              f"(analytic alpha={rp.alpha:.6g} A={rp.A:.6g}; "
              f"errors {sections['compare']['alpha_rel_err']:.3e}, {sections['compare']['A_rel_err']:.3e})")
    return code


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plapblow",
                                 description="Boundary blow-up solutions of p-Laplacian logistic problems.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("command", choices=("validate", "rate", "solve", "oracle"))
    ap.add_argument("--config", required=True, help="flat key = value configuration file")
    ap.add_argument("--out", help="output directory (default: output.directory)")
    ap.add_argument("--force", action="store_true", help="solve even when hypotheses fail")
    ap.add_argument("--relaxed", action="store_true",
                    help="accept a finite lim f(s)/s^(p-1) at 0 (bounded by 1/sup b when a0 < 0)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load(args.config)
        out = Path(args.out or cfg["output.directory"])
        if args.command == "validate":
            return cmd_validate(cfg, out, args.relaxed)
        if args.command == "rate":
            return cmd_rate(cfg, out)
        if args.command == "oracle":
            return cmd_oracle(cfg, out)
        return cmd_solve(cfg, out, args.force, args.relaxed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
