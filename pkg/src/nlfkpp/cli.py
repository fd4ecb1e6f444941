"""Command-line driver: simulate, sweep, oracle, analyze, classify."""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .analysis import build_report
from .grid import RadialGrid
from .model import (InfeasibleConstants, ModelError, ModelParams, blowup_time_bound, classify_regime,
                    compute_constants)
from .persist import (REPORT_FILE, SNAPSHOTS_FILE, SWEEP_AXES, TRACE_FILE, ConfigError, ExperimentConfig,
                      IoFailure, SchemaMismatch, dumps_json, header, load_config, read_snapshots, read_trace,
                      write_columns, write_json, write_snapshots, write_trace)
from .solver import Status, run, run_homogeneous_ode, run_local_comparison

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_INVARIANT = 4


class MissingPairedRun(ValueError):
    pass


def _constants_or_none(params: ModelParams):
    try:
        return compute_constants(params)
    except InfeasibleConstants:
        return None


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create output directory {out}: {exc}") from exc
    return out


def _run_header(cfg: ExperimentConfig, params: ModelParams, outcome) -> dict:
    resolved = cfg.resolved()
    resolved = {**resolved, "model": params.as_dict(), "sweep": {}}
    return header(resolved, status=outcome.status.value, t_final=outcome.t_final, steps=outcome.steps,
                  reason=outcome.reason)


def _config_from_header(hdr: dict, base_dir: Path) -> ExperimentConfig:
    from .persist import parse_config

    try:
        return parse_config(hdr["config"], base_dir)
    except (ConfigError, KeyError, TypeError) as exc:
        raise SchemaMismatch(f"header does not hold a usable configuration: {exc}") from exc


def report_from_trace(trace_path) -> dict:
    """Rebuild the report from a persisted run; sidecar files are optional."""
    trace_path = Path(trace_path)
    hdr, trace = read_trace(trace_path)
    cfg = _config_from_header(hdr, trace_path.parent)
    params = cfg.params()
    grid = cfg.build_grid(params.N)
    final = None
    snap_path = trace_path.parent / SNAPSHOTS_FILE
    if snap_path.exists():
        snaps = read_snapshots(snap_path)
        if "final" in snaps and snaps["final"][0] == float(trace.t[-1]) and len(snaps["final"][1]) == len(grid):
            final = snaps["final"][1]
    report = build_report(hdr.get("status", "unknown"), trace, params, grid, final, _constants_or_none(params))
    return {"header": {k: hdr[k] for k in ("tool", "version", "config")}, **report.as_dict()}


def _report_exit(report: dict) -> int:
    if report["status"] == Status.STEP_COLLAPSE.value:
        return EXIT_RUNTIME
    hard = [k for k, v in report["audit"].items() if v.get("hard") and v.get("passed") is False]
    return EXIT_INVARIANT if hard else EXIT_OK


def simulate(cfg: ExperimentConfig, out, **overrides) -> tuple[object, dict]:
    """Run one simulation, persist trace/snapshots/report and return (outcome, report)."""
    params = cfg.params(**overrides)
    grid = cfg.build_grid(params.N)
    u0 = cfg.initial_field(params, grid)
    outcome = run(params, grid, u0, cfg.step_control())
    out = _out_dir(out)
    hdr = _run_header(cfg, params, outcome)
    write_trace(out, outcome.trace, hdr)
    write_snapshots(out, outcome.snapshots, grid, hdr)
    # the report is built from the files so that ``analyze`` reproduces it byte for byte
    report = report_from_trace(out / TRACE_FILE)
    write_json(out / REPORT_FILE, report)
    return outcome, report


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    _, report = simulate(cfg, args.out)
    print(f"{report['status']} t_final={report['t_final']:.6g} T_est={report['T_est']} "
          f"rate={report['rate_exponent']}")
    return _report_exit(report)


SWEEP_COLUMNS = ("index",) + SWEEP_AXES + ("regime", "status", "t_final", "T_tilde", "T_est", "rate_exponent",
                                          "exit", "detail")


def _sweep_points(cfg: ExperimentConfig) -> list[dict]:
    axes = list(cfg.sweep)
    grids = [sorted(cfg.sweep[a]) for a in axes]
    return [dict(zip(axes, combo)) for combo in itertools.product(*grids)]


def _sweep_worker(cfg: ExperimentConfig, point: dict, index: int, out: str) -> dict:
    overrides = {k: v for k, v in point.items()}
    row = {"index": index, **{a: cfg.model[a] for a in SWEEP_AXES}, **overrides}
    try:
        params = cfg.params(**overrides)
    except ConfigError as exc:
        return {**row, "regime": "", "status": "Skipped", "exit": EXIT_CONFIG, "detail": str(exc)}
    row.update(regime=classify_regime(params).tag.value, T_tilde=blowup_time_bound(params))
    try:
        _, report = simulate(cfg, Path(out) / f"point_{index:04d}", **overrides)
    except (ConfigError, IoFailure, ValueError) as exc:
        return {**row, "status": "Failed", "exit": EXIT_RUNTIME, "detail": str(exc)}
    return {**row, "status": report["status"], "t_final": report["t_final"], "T_est": report["T_est"],
            "rate_exponent": report["rate_exponent"], "exit": _report_exit(report), "detail": ""}


def run_sweep(cfg: ExperimentConfig, out, workers: int | None = None) -> list[dict]:
    """Run every sweep point; rows come back in lexicographic axis order."""
    out = _out_dir(out)
    points = _sweep_points(cfg)
    workers = workers or cfg.workers
    if workers == 1:
        rows = [_sweep_worker(cfg, pt, i, str(out)) for i, pt in enumerate(points)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_sweep_worker, cfg, pt, i, str(out)) for i, pt in enumerate(points)]
            rows = [f.result() for f in futures]
    rows.sort(key=lambda r: r["index"])
    hdr = header(cfg.resolved())
    with open(out / "sweep.csv", "w") as fh:
        fh.write("".join(f"# {k}: {json.dumps(v, sort_keys=True)}\n" for k, v in hdr.items()))
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join(_cell(r.get(c)) for c in SWEEP_COLUMNS) + "\n")
    regimes: dict = {}
    for r in rows:
        regimes.setdefault(r["regime"] or "Invalid", {}).setdefault(r["status"], 0)
        regimes[r["regime"] or "Invalid"][r["status"]] += 1
    write_json(out / "regime_map.json", {"header": hdr, "regimes": regimes,
                                         "points": [{k: r.get(k) for k in SWEEP_COLUMNS} for r in rows]})
    return rows


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    s = str(v)
    return '"' + s.replace('"', "'") + '"' if ("," in s or '"' in s) else s


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if not cfg.sweep:
        return cmd_simulate(args)
    rows = run_sweep(cfg, args.out, args.workers)
    for r in rows:
        print(f"{r['index']:4d} {r['regime'] or '-':14s} {r['status']:16s} t_final={r.get('t_final')}")
    return max((r["exit"] for r in rows if r["status"] != "Skipped"), default=EXIT_OK)


def _monotone(U: np.ndarray, rtol: float = 1e-12) -> bool:
    """Monotone up to the integrator's rounding."""
    d = np.diff(U)
    tol = rtol * max(float(np.max(np.abs(U))), 1.0)
    return bool(np.all(d >= -tol) or np.all(d <= tol))


def oracle_ode(cfg: ExperimentConfig, out) -> dict:
    m, o = cfg.model, cfg.oracle
    U0 = float(o["U0"]) if o["U0"] is not None else None
    if U0 is None:
        raise ConfigError("oracle: 'U0' is required for the ode oracle")
    traj = run_homogeneous_ode(float(m["p"]), float(m["beta"]), float(m["sigma"]), U0, float(o["t_end"]),
                               n_out=int(o["n_out"]))
    out = _out_dir(out)
    hdr = header(cfg.resolved(), kind="ode")
    write_columns(out / "ode.csv", hdr, ("t", "U"), np.column_stack([traj.t, traj.U]))
    summary = {"header": hdr, "U0": U0, "U_final": float(traj.U[-1]), "limit_gap": traj.limit_gap,
               "blowup_time": traj.blowup_time,
               "monotone": _monotone(traj.U)}
    write_json(out / "ode_summary.json", summary)
    return summary


def compare_paired(local_snaps: dict, paired_dir) -> list[tuple[float, float, float]]:
    """``(t, min_i (u - v), sup u)`` at every snapshot time present in both runs."""
    paired_dir = Path(paired_dir)
    path = paired_dir / SNAPSHOTS_FILE
    if not path.exists():
        raise MissingPairedRun(f"no {SNAPSHOTS_FILE} in {paired_dir}")
    other = read_snapshots(path)
    rows = []
    for label, (t, v) in sorted(local_snaps.items(), key=lambda kv: kv[1][0]):
        if not label.startswith("time:") or label not in other:
            continue
        tu, u = other[label]
        if tu != t or len(u) != len(v):
            continue
        rows.append((t, float(np.min(u - v)), float(np.max(u))))
    return rows


def oracle_local(cfg: ExperimentConfig, out, paired=None) -> dict:
    params = cfg.params()
    if cfg.oracle["D"] is not None:
        D = float(cfg.oracle["D"])
    else:
        try:
            D = compute_constants(params).D
        except InfeasibleConstants as exc:
            raise ConfigError(f"oracle: no D given and the constants are infeasible: {exc}") from exc
    if paired is not None:
        if not (Path(paired) / TRACE_FILE).exists():
            raise MissingPairedRun(f"no {TRACE_FILE} in {paired}")
        phdr, _ = read_trace(Path(paired) / TRACE_FILE)
        pm, pg = phdr["config"]["model"], phdr["config"]["grid"]
        if pm != params.as_dict() or pg != cfg.grid:
            raise MissingPairedRun(f"paired run in {paired} used a different model or grid")
    grid: RadialGrid = cfg.build_grid(params.N)
    u0 = cfg.initial_field(params, grid)
    outcome = run_local_comparison(params, grid, u0, D, cfg.step_control())
    out = _out_dir(out)
    hdr = header(cfg.resolved(), kind="local", D=D, status=outcome.status.value, t_final=outcome.t_final)
    write_trace(out, outcome.trace, hdr)
    write_snapshots(out, outcome.snapshots, grid, hdr)
    summary = {"header": hdr, "D": D, "status": outcome.status.value, "t_final": outcome.t_final,
               "T_tilde": blowup_time_bound(params)}
    if paired is not None:
        snaps = {s.label: (s.t, s.values) for s in outcome.snapshots}
        rows = compare_paired(snaps, paired)
        if not rows:
            raise MissingPairedRun(f"no snapshot times shared with {paired}")
        write_columns(out / "comparison.csv", hdr, ("t", "min_u_minus_v", "sup_u"), rows)
        eps = grid.h_min
        summary["comparison"] = {"matched_times": len(rows),
                                 "worst_scaled_gap": min(g / max(s, 1.0) for _, g, s in rows),
                                 "tolerance": -eps,
                                 "ordered": all(g >= -eps * max(s, 1.0) for _, g, s in rows)}
    write_json(out / "oracle_summary.json", summary)
    return summary


def cmd_oracle(args) -> int:
    cfg = load_config(args.config)
    if args.kind == "ode":
        s = oracle_ode(cfg, args.out)
        print(f"U_final={s['U_final']:.12g} limit_gap={s['limit_gap']}")
        return EXIT_OK
    try:
        s = oracle_local(cfg, args.out, args.paired)
    except MissingPairedRun as exc:
        print(f"error: MissingPairedRun: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{s['status']} t_final={s['t_final']:.6g} D={s['D']:.6g}")
    if s["status"] == Status.STEP_COLLAPSE.value:
        return EXIT_RUNTIME
    if "comparison" in s and not s["comparison"]["ordered"]:
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_analyze(args) -> int:
    report = report_from_trace(args.trace)
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        _out_dir(out.parent)
    write_json(out, report)
    print(dumps_json({k: v for k, v in report.items() if k not in ("header", "audit")}), end="")
    return _report_exit(report)


def cmd_classify(args) -> int:
    try:
        params = ModelParams(N=args.N, p=args.p, beta=args.beta, sigma=1.0, lam=1.0, delta=0.5)
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc
    regime = classify_regime(params)
    print(json.dumps({"regime": regime.tag.value, "q": regime.q, "bound_global": regime.bound_global,
                      "bound_blowup": regime.bound_blowup}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlfkpp", description="Radial non-local Fisher-KPP blow-up experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", help="run one simulation")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)
    s = sub.add_parser("sweep", help="run a parameter sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_sweep)
    s = sub.add_parser("oracle", help="run the homogeneous ODE or the local comparison problem")
    s.add_argument("--kind", choices=("ode", "local"), required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--paired", default=None, help="directory of a non-local run to compare against")
    s.set_defaults(func=cmd_oracle)
    s = sub.add_parser("analyze", help="rebuild the report from a trace CSV")
    s.add_argument("--trace", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_analyze)
    s = sub.add_parser("classify", help="print the regime of (N, p, beta)")
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--beta", type=float, required=True)
    s.set_defaults(func=cmd_classify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SchemaMismatch) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IoFailure, FloatingPointError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
