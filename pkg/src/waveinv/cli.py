"""Command line front end.

    waveinv simulate    --config run.json [--preset desk] [--set key=value ...]
    waveinv invert      --config run.json [--data data.wvtr] [--exact c_exact.wvcf]
    waveinv gradcheck   --config run.json
    waveinv postprocess field.wvcf P --out post.wvcf
    waveinv report      run_dir [run_dir ...]

Exit status: 0 on success, 1 on numerical failure, 2 on I/O or config errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import io as wio
from .adjoint import CutoffSpec
from .config import RunConfig, load_config, thread_count
from .errors import (
    ConfigError,
    FormatError,
    GridError,
    HistoryMismatch,
    LineSearchFailed,
    SolverError,
    TraceMismatch,
)
from .fields import CoefficientField, add_noise, phantom, refine_grid, restrict_to_coarse
from .forward import InitialCondition, SourceSpec, TimeAxis, forward_solve
from .geometry import BoxDomain, Grid, build_grid
from .objective import TikhonovSpec, postprocess
from .optimizer import CgConfig, InversionProblem, gradient_check, monotone, run

log = logging.getLogger("waveinv")

EXIT_OK, EXIT_NUMERIC, EXIT_IO = 0, 1, 2


# ---------------------------------------------------------------- builders


def make_grid(cfg: RunConfig) -> Grid:
    return build_grid(
        BoxDomain(cfg.domain_lo, cfg.domain_hi), BoxDomain(cfg.inner_lo, cfg.inner_hi), cfg.h
    )


def make_phantom(cfg: RunConfig, grid: Grid) -> CoefficientField:
    kw = {"upper": cfg.upper}
    if cfg.phantom == "balls":
        kw["balls"] = cfg.ball_list()
    elif cfg.phantom == "uniform":
        kw["value"] = cfg.phantom_value
    return phantom(grid, cfg.phantom, **kw)


def make_problem(cfg: RunConfig, grid: Grid, data) -> InversionProblem:
    ta = TimeAxis(cfg.tau, cfg.T)
    c0 = CoefficientField.uniform(grid, cfg.c0, cfg.upper)
    c0.values[~grid.inner_cells] = 1.0
    spec = TikhonovSpec(cfg.gamma_value, c0, CutoffSpec(cfg.window))
    return InversionProblem(grid, data, SourceSpec(cfg.omega), InitialCondition(cfg.ic), ta, spec)


def make_cg(cfg: RunConfig) -> CgConfig:
    return CgConfig(
        theta=cfg.theta,
        max_iter=cfg.max_iter,
        alpha=cfg.alpha if cfg.alpha_rule == "fixed" else None,
        alpha0=cfg.alpha0,
        alpha0_scale=cfg.alpha0_scale,
        alpha0_floor=cfg.alpha0_floor,
    )


def simulate_data(cfg: RunConfig, grid: Grid):
    """Exact coefficient on ``grid`` and the noisy FRONT trace it produces."""
    ta = TimeAxis(cfg.tau, cfg.T)
    src, ic = SourceSpec(cfg.omega), InitialCondition(cfg.ic)
    if cfg.refine == 2:
        fine = refine_grid(grid)
        trace, _ = forward_solve(fine, make_phantom(cfg, fine), src, ic, ta.refined())
        trace = restrict_to_coarse(trace, grid, ta.tau)
    else:
        trace, _ = forward_solve(grid, make_phantom(cfg, grid), src, ic, ta)
    return make_phantom(cfg, grid), add_noise(trace, cfg.noise())


def summarize(c: CoefficientField, c_star_max: float) -> dict:
    i = np.unravel_index(int(np.argmax(c.values)), c.values.shape)
    return {
        "max_c": c.max(),
        "argmax": [float(v) for v in c.grid.cell_centers()[i]],
        "c_star_max": c_star_max,
        "error_pct": contrast_error(c.max(), c_star_max),
    }


def contrast_error(max_c: float, max_c_star: float) -> float:
    return abs(max_c - max_c_star) / max_c_star * 100.0


# ---------------------------------------------------------------- commands


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    grid = make_grid(cfg)
    t0 = time.perf_counter()
    c_exact, data = simulate_data(cfg, grid)
    out.mkdir(parents=True, exist_ok=True)
    wio.save_trace(data, out / "data.wvtr")
    wio.save_field(c_exact, out / "c_exact.wvcf")
    wio.write_vtk(c_exact, out / "c_exact.vtk")
    (out / "config.json").write_text(cfg.dumps(), encoding="utf-8")
    log.info("wrote %d trace levels on %s nodes in %.1fs", data.nt + 1, grid.n, time.perf_counter() - t0)
    print(f"simulate: {data.nt + 1} levels x {data.n_face} FRONT nodes -> {out}")
    return EXIT_OK


def cmd_invert(cfg: RunConfig, out: Path, data_path: Path, exact_path: Path | None) -> int:
    grid = make_grid(cfg)
    data = wio.load_trace(data_path, grid)
    c_star = wio.load_field(exact_path, grid) if exact_path is not None else None
    problem = make_problem(cfg, grid, data)
    bound = (cfg.sigma / 100.0, cfg.bound_nu, cfg.bound_xi) if c_star is not None and cfg.sigma > 0 else None

    t0 = time.perf_counter()
    state, report = run(make_cg(cfg), problem, c_star=c_star, bound_params=bound)
    wall = time.perf_counter() - t0

    out.mkdir(parents=True, exist_ok=True)
    wio.save_field(state.c, out / "c_final.wvcf")
    wio.write_vtk(state.c, out / "c_final.vtk")
    post = postprocess(state.c, cfg.P)
    wio.write_vtk(post, out / "c_post.vtk")
    (out / "iterations.csv").write_text(report.to_csv(), encoding="utf-8")
    if report.error_bound:
        lines = ["m,lhs,rhs"] + [f"{m},{a!r},{b!r}" for m, a, b in report.error_bound]
        (out / "error_bound.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    summary = {
        "phantom": cfg.phantom,
        "sigma": cfg.sigma,
        "n_iter": report.n_iter,
        "stop_reason": report.stop_reason,
        "monotone": monotone(report.rows),
        "J_final": state.J,
        "gnorm_final": state.gnorm,
        "wall": wall,
        "flags": report.flags,
    }
    summary.update(summarize(state.c, cfg.phantom_peak()))
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(
        f"invert: {report.stop_reason} after {report.n_iter} iterations, "
        f"max c = {summary['max_c']:.4f} ({wall:.1f}s) -> {out}"
    )
    return EXIT_OK


def cmd_gradcheck(cfg: RunConfig) -> int:
    grid = make_grid(cfg)
    rng = np.random.default_rng(cfg.seed)
    inner = grid.inner_cells
    c = CoefficientField.uniform(grid, 1.0, cfg.upper)
    c.values[inner] = rng.uniform(1.0, 2.0, size=int(inner.sum()))
    dc = np.zeros(grid.cell_shape)
    dc[inner] = rng.uniform(-1.0, 1.0, size=int(inner.sum()))
    ta = TimeAxis(cfg.tau, cfg.T)
    data, _ = forward_solve(grid, make_phantom(cfg, grid), SourceSpec(cfg.omega), InitialCondition(cfg.ic), ta)
    problem = make_problem(cfg, grid, data)
    rows = gradient_check(problem, c, dc)
    print(f"{'eps':>8}  {'finite diff':>16}  {'adjoint':>16}  {'rel err':>10}")
    for eps, fd, adj, err in rows:
        print(f"{eps:8.0e}  {fd:16.9e}  {adj:16.9e}  {err:10.2e}")
    best = min(r[3] for r in rows)
    print(f"best relative error {best:.2e}")
    return EXIT_OK if best < 0.01 else EXIT_NUMERIC


def cmd_postprocess(field_path: Path, P: float, out: Path) -> int:
    c = wio.load_field(field_path)
    post = postprocess(c, P)
    if out.suffix == ".vtk":
        wio.write_vtk(post, out)
    else:
        wio.save_field(post, out)
    print(f"postprocess: P={P} max c = {post.max():.4f} -> {out}")
    return EXIT_OK


def report_rows(paths: list[Path]) -> list[dict]:
    rows = []
    for p in paths:
        f = p / "summary.json" if p.is_dir() else p
        try:
            s = json.loads(f.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{f}: invalid summary ({exc})") from exc
        if not {"max_c", "c_star_max", "n_iter"} <= set(s):
            raise FormatError(f"{f}: summary lacks max_c, c_star_max or n_iter")
        err = contrast_error(float(s["max_c"]), float(s["c_star_max"]))
        rows.append({"case": p.name or str(p), "max_c": float(s["max_c"]), "error_pct": err, "n_iter": int(s["n_iter"])})
    return rows


def format_report(rows: list[dict]) -> str:
    lines = [f"{'case':<20} {'max c':>8} {'error, %':>9} {'N':>4}"]
    for r in rows:
        lines.append(f"{r['case']:<20} {r['max_c']:8.2f} {r['error_pct']:9.2f} {r['n_iter']:4d}")
    return "\n".join(lines)


def cmd_report(paths: list[Path]) -> int:
    print(format_report(report_rows(paths)))
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--preset", help="start from a named parameter set (full, desk)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", help="output directory (default: output_dir from the config)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="waveinv", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    _config_args(sub.add_parser("simulate", help="generate noisy FRONT data for the exact phantom"))
    p = sub.add_parser("invert", help="reconstruct the coefficient from a trace file")
    _config_args(p)
    p.add_argument("--data", help="trace file (default: <out>/data.wvtr)")
    p.add_argument("--exact", help="exact field for the error diagnostics (default: <out>/c_exact.wvcf if present)")
    _config_args(sub.add_parser("gradcheck", help="compare the adjoint gradient with finite differences"))
    p = sub.add_parser("postprocess", help="threshold a field at P times its inner maximum")
    p.add_argument("field")
    p.add_argument("P", type=float)
    p.add_argument("--out", required=True)
    p = sub.add_parser("report", help="tabulate max c, contrast error and iterations of finished runs")
    p.add_argument("runs", nargs="+")
    return ap


def _dispatch(args) -> int:
    if args.command == "postprocess":
        return cmd_postprocess(Path(args.field), args.P, Path(args.out))
    if args.command == "report":
        return cmd_report([Path(r) for r in args.runs])

    cfg = load_config(args.config, args.preset, args.overrides)
    out = Path(args.out or cfg.output_dir)
    with threadpool_limits(limits=thread_count(cfg)):
        if args.command == "simulate":
            return cmd_simulate(cfg, out)
        if args.command == "gradcheck":
            return cmd_gradcheck(cfg)
        data = Path(args.data) if args.data else out / "data.wvtr"
        if not data.is_file():
            raise FileNotFoundError(f"trace file {data} not found")
        if args.exact:
            exact = Path(args.exact)
        else:
            exact = out / "c_exact.wvcf" if (out / "c_exact.wvcf").is_file() else None
        return cmd_invert(cfg, out, data, exact)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except (SolverError, LineSearchFailed, HistoryMismatch) as exc:
        print(f"waveinv: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, FormatError, GridError, TraceMismatch, ValueError, OSError) as exc:
        print(f"waveinv: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
