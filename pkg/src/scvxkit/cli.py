"""Command-line front end: solve one config, bench a directory, re-check a run.

Configs are strict JSON: unknown keys are rejected with their path, and the
schema_version field must match SCHEMA_VERSION.  The trace is JSON Lines
with one fixed-field record per iteration; iterate vectors go to a separate
sidecar file so trace size stays bounded.  Identical configs (seeds
included) produce byte-identical traces.

Exit codes: 0 converged, 1 config or parse error, 2 iteration limit,
3 assumption violation (level set or norm budget), 4 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import diagnostics as diag
from .composite import CompositeError, CompositeObjective
from .loop import (
    STATUS_CONVERGED,
    STATUS_ITERATIONS,
    STATUS_LEVEL_SET,
    STATUS_SUBPROBLEM,
    IterationRecord,
    SolveResult,
    TrustRegionParams,
    check_stationarity,
    run_scvx,
)
from .problems import BUILTIN_NAMES, DiscretizedProblem, builtin

SCHEMA_VERSION = 1
SEED_ENV_VAR = "SCVX_SEED"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ITERATIONS = 2
EXIT_ASSUMPTION = 3
EXIT_SOLVER = 4

_STATUS_EXIT = {
    STATUS_CONVERGED: EXIT_OK,
    STATUS_ITERATIONS: EXIT_ITERATIONS,
    STATUS_LEVEL_SET: EXIT_ASSUMPTION,
    STATUS_SUBPROBLEM: EXIT_SOLVER,
}

BENCH_COLUMNS = (
    "name", "status", "iterations", "accepted", "J_final",
    "stationarity_residual", "beta_hat", "gamma_hat", "small_step_pass",
    "rate_order", "superlinear", "error",
)


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class DiagnosticsConfig:
    enabled: bool = True
    seed: Optional[int] = None
    delta: float = 0.1
    n_samples: int = 64
    n_directions: int = 64
    n_probes: int = 64
    m_tail: int = 5
    norm: str = "inf"
    small_step: bool = True
    epsilon: Optional[float] = None


@dataclass(frozen=True)
class OutputConfig:
    trace: Optional[str] = None
    iterates: Optional[str] = None
    summary: Optional[str] = None
    report: Optional[str] = None
    plot_dir: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    problem_name: str
    overrides: dict = field(default_factory=dict)
    penalty_weight: Optional[float] = None
    seed: int = 0
    start_jitter: float = 0.0
    trust_region: TrustRegionParams = field(default_factory=TrustRegionParams)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


def _require_keys(data: dict, allowed: set, path: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown config key '{path}{key}'")


def _number(data: dict, key: str, path: str, default=None, required: bool = False):
    if key not in data or data[key] is None:
        if required:
            raise ConfigError(f"missing config key '{path}{key}'")
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"config key '{path}{key}' must be a number")
    return float(value)


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    _require_keys(data, {"schema_version", "problem", "lambda", "seed", "start_jitter",
                         "trust_region", "diagnostics", "output"}, "")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")

    problem = data.get("problem")
    if not isinstance(problem, dict):
        raise ConfigError("config key 'problem' must be an object")
    _require_keys(problem, {"name", "overrides"}, "problem.")
    name = problem.get("name")
    if not isinstance(name, str):
        raise ConfigError("config key 'problem.name' must be a string")
    overrides = problem.get("overrides") or {}
    if not isinstance(overrides, dict):
        raise ConfigError("config key 'problem.overrides' must be an object")

    seed = data.get("seed", 0)
    if seed is None:
        seed = 0
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("config key 'seed' must be an integer")

    tr_data = data.get("trust_region") or {}
    if not isinstance(tr_data, dict):
        raise ConfigError("config key 'trust_region' must be an object")
    tr_fields = {f.name for f in fields(TrustRegionParams)}
    _require_keys(tr_data, tr_fields, "trust_region.")
    try:
        trust = TrustRegionParams(**tr_data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad trust_region settings: {exc}") from None

    dg_data = data.get("diagnostics") or {}
    if not isinstance(dg_data, dict):
        raise ConfigError("config key 'diagnostics' must be an object")
    dg_fields = {f.name for f in fields(DiagnosticsConfig)}
    _require_keys(dg_data, dg_fields, "diagnostics.")
    norm = dg_data.get("norm", "inf")
    if norm not in diag.NORMS:
        raise ConfigError(f"diagnostics.norm must be one of {diag.NORMS}")
    diagnostics = DiagnosticsConfig(
        enabled=bool(dg_data.get("enabled", True)),
        seed=dg_data.get("seed"),
        delta=_number(dg_data, "delta", "diagnostics.", default=0.1),
        n_samples=int(_number(dg_data, "n_samples", "diagnostics.", default=64)),
        n_directions=int(_number(dg_data, "n_directions", "diagnostics.", default=64)),
        n_probes=int(_number(dg_data, "n_probes", "diagnostics.", default=64)),
        m_tail=int(_number(dg_data, "m_tail", "diagnostics.", default=5)),
        norm=norm,
        small_step=bool(dg_data.get("small_step", True)),
        epsilon=_number(dg_data, "epsilon", "diagnostics."),
    )

    out_data = data.get("output") or {}
    if not isinstance(out_data, dict):
        raise ConfigError("config key 'output' must be an object")
    out_fields = {f.name for f in fields(OutputConfig)}
    _require_keys(out_data, out_fields, "output.")
    for key in out_fields:
        value = out_data.get(key)
        if value is not None and not isinstance(value, str):
            raise ConfigError(f"config key 'output.{key}' must be a string path")
    output = OutputConfig(**{k: out_data.get(k) for k in out_fields})

    return RunConfig(
        problem_name=name,
        overrides=overrides,
        penalty_weight=_number(data, "lambda", ""),
        seed=seed,
        start_jitter=_number(data, "start_jitter", "", default=0.0),
        trust_region=trust,
        diagnostics=diagnostics,
        output=output,
    )


def load_config(path: str) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config {path} is not valid JSON: {exc.msg} at line {exc.lineno} column {exc.colno}"
        ) from None
    config = parse_config(data)
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            config = replace(config, seed=int(env_seed))
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}") from None
    return config


def _record_dict(rec: IterationRecord) -> dict:
    return {
        "k": rec.k,
        "J": rec.J,
        "L": rec.model_value,
        "rho": rec.rho,
        "radius": rec.radius,
        "step_norm": rec.step_norm,
        "accepted": rec.accepted,
        "predicted_decrease": rec.predicted_decrease,
        "actual_decrease": rec.actual_decrease,
    }


def write_trace(path: str, trace: List[IterationRecord]) -> None:
    with open(path, "w") as handle:
        for rec in trace:
            handle.write(json.dumps(_record_dict(rec)) + "\n")


def write_iterates(path: str, trace: List[IterationRecord]) -> None:
    with open(path, "w") as handle:
        for rec in trace:
            handle.write(json.dumps({"k": rec.k, "z": list(rec.z)}) + "\n")


def read_trace(trace_path: str, iterates_path: Optional[str] = None) -> List[IterationRecord]:
    """Rebuild iteration records from a trace file plus optional sidecar."""
    iterates = {}
    if iterates_path and Path(iterates_path).exists():
        with open(iterates_path) as handle:
            for line in handle:
                row = json.loads(line)
                iterates[row["k"]] = np.asarray(row["z"], dtype=float)
    records = []
    with open(trace_path) as handle:
        for line in handle:
            row = json.loads(line)
            records.append(IterationRecord(
                k=row["k"], z=iterates.get(row["k"]), J=row["J"],
                step_norm=row["step_norm"], model_value=row["L"],
                predicted_decrease=row["predicted_decrease"],
                actual_decrease=row["actual_decrease"], rho=row["rho"],
                radius=row["radius"], accepted=row["accepted"],
            ))
    return records


def write_plot_data(plot_dir: str, trace: List[IterationRecord]) -> None:
    """Two-column text files: iteration index against J, step norm, ratio."""
    root = Path(plot_dir)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "objective.dat", "w") as handle:
        for rec in trace:
            handle.write(f"{rec.k} {rec.J!r}\n")
    with open(root / "step_norm.dat", "w") as handle:
        for rec in trace:
            handle.write(f"{rec.k} {rec.step_norm!r}\n")
    with open(root / "ratio.dat", "w") as handle:
        for rec in trace:
            if rec.rho is not None:
                handle.write(f"{rec.k} {rec.rho!r}\n")


def _prepare(config: RunConfig):
    try:
        bench = builtin(config.problem_name, **config.overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    composite, disc = bench.build(config.penalty_weight)
    start = np.asarray(bench.default_start, dtype=float).copy()
    if config.start_jitter > 0.0:
        rng = np.random.default_rng(config.seed)
        start = start + config.start_jitter * rng.uniform(-1.0, 1.0, start.size)
    return bench, composite, disc, start


def _certificate_dict(cert: diag.SharpMinimumCertificate) -> dict:
    worst = int(np.argmin(cert.sample_ratios))
    return {
        "beta_hat": cert.beta_hat,
        "gamma_hat": cert.gamma_hat,
        "delta": cert.delta,
        "norm": cert.norm,
        "seed": cert.seed,
        "n_samples": cert.n_samples,
        "worst_ratio": float(cert.sample_ratios[worst]),
        "worst_point": list(cert.sample_points[worst]),
    }


def run_diagnostics(composite: CompositeObjective, disc: Optional[DiscretizedProblem],
                    result: SolveResult, config: RunConfig, j0: float) -> dict:
    """Assemble the full diagnostics report for one finished run."""
    cfg = config.diagnostics
    seed = config.seed if cfg.seed is None else cfg.seed
    z_bar = result.final_z
    report: dict = {"status": result.status}

    level = diag.check_level_set(result.trace, j0, norm_budget=config.trust_region.norm_budget)
    report["level_set"] = {
        "passed": level.passed, "verdict": level.verdict,
        "max_objective": level.max_objective, "j0": level.j0,
        "max_norm": level.max_norm, "norm_budget": level.norm_budget,
    }

    ratio = diag.check_ratio_limit(result.trace, m_tail=cfg.m_tail)
    report["ratio_tail"] = {
        "tail_rho": list(ratio.tail_rho), "trending_to_one": ratio.trending_to_one,
        "sufficient": ratio.sufficient, "n_defined": ratio.n_defined,
        "note": "observational only; no assertion is attached to this limit",
    }

    if result.status != STATUS_CONVERGED:
        report["skipped"] = "minimizer-centric probes need a converged run"
        return report

    sharp = diag.estimate_sharp_minimum(composite, z_bar, cfg.delta,
                                        n_samples=cfg.n_samples, norm=cfg.norm, seed=seed)
    growth = diag.estimate_growth_constant(composite, z_bar,
                                           d_samples=cfg.n_samples, norm=cfg.norm, seed=seed)
    report["sharp_minimum"] = _certificate_dict(sharp)
    report["model_growth"] = _certificate_dict(growth)

    strong = diag.check_strong_convergence(result.trace, z_bar, sharp.beta_hat,
                                           m_tail=cfg.m_tail, norm=cfg.norm)
    report["strong_convergence"] = {
        "label": strong.label, "cauchy_ok": strong.cauchy_ok, "bound_ok": strong.bound_ok,
        "beta_hat": strong.beta_hat, "m_tail": strong.m_tail,
        "tail_errors": list(strong.tail_errors),
    }

    rate = diag.estimate_rate(result.trace, z_bar, m_tail=cfg.m_tail, norm=cfg.norm)
    report["rate"] = {
        "order_q": rate.order_q, "defined": rate.defined, "reason": rate.reason,
        "superlinear_evidence": rate.superlinear_evidence,
        "error_ratios": list(rate.error_ratios),
    }

    sub = diag.check_subdifferential_inequality(composite, z_bar,
                                                n_directions=cfg.n_directions,
                                                norm=cfg.norm, seed=seed)
    report["subdifferential"] = {
        "passed": sub.passed, "min_estimate": sub.min_estimate,
        "n_directions": sub.n_directions, "steps": list(sub.steps),
    }

    if cfg.small_step:
        epsilon = cfg.epsilon if cfg.epsilon is not None else cfg.delta / 2.0
        small = diag.find_small_step_eta(composite, z_bar, epsilon,
                                         n_probes=cfg.n_probes, seed=seed)
        report["small_step"] = {
            "passed": small.passed, "eta": small.eta, "epsilon": small.epsilon,
            "max_step_norm": small.max_step_norm, "n_probes": small.n_probes,
            "failures": list(small.failures),
        }

    if disc is not None:
        active = diag.active_set_report(disc, z_bar)
        report["active_set"] = {
            "active_count": active.active_count, "threshold": active.threshold,
            "verdict": active.verdict, "tolerance": active.tolerance,
            "active_labels": list(active.active_labels),
        }
    return report


def execute_run(config: RunConfig, trace_path: Optional[str] = None,
                report_path: Optional[str] = None, quiet: bool = False) -> tuple[int, dict]:
    """Solve one configured instance and write every requested artifact."""
    bench, composite, disc, start = _prepare(config)
    j0 = composite.value(start)
    t0 = time.perf_counter()
    result = run_scvx(composite, start, config.trust_region)
    runtime = time.perf_counter() - t0
    exit_code = _STATUS_EXIT[result.status]

    last_radius = result.trace[-1].radius if result.trace else config.trust_region.r_init
    probe_radius = min(1.0, last_radius)
    residual = check_stationarity(composite, result.final_z, probe_radius)

    summary = {
        "problem": config.problem_name,
        "status": result.status,
        "message": result.message,
        "exit_code": exit_code,
        "iterations": result.iterations,
        "accepted": result.accepted_count,
        "J0": j0,
        "J_final": result.J_final,
        "stationarity_residual": residual,
        "stationarity_probe_radius": probe_radius,
        "penalty_weight": config.penalty_weight if config.penalty_weight is not None
                          else bench.default_penalty_weight,
        "seed": config.seed,
        "max_equality_violation": composite.max_equality_violation(result.final_z),
        "max_inequality_violation": composite.max_inequality_violation(result.final_z),
        "final_radius": last_radius,
        "final_z": list(result.final_z),
        "runtime_s": runtime,
    }

    trace_target = trace_path or config.output.trace
    if trace_target:
        Path(trace_target).parent.mkdir(parents=True, exist_ok=True)
        write_trace(trace_target, result.trace)
    if config.output.iterates:
        Path(config.output.iterates).parent.mkdir(parents=True, exist_ok=True)
        write_iterates(config.output.iterates, result.trace)
    if config.output.summary:
        Path(config.output.summary).parent.mkdir(parents=True, exist_ok=True)
        with open(config.output.summary, "w") as handle:
            json.dump(summary, handle, indent=2)
            handle.write("\n")
    if config.output.plot_dir:
        write_plot_data(config.output.plot_dir, result.trace)

    report = None
    if config.diagnostics.enabled:
        report = run_diagnostics(composite, disc, result, config, j0)
        summary["diagnostics"] = report
        report_target = report_path or config.output.report
        if report_target:
            Path(report_target).parent.mkdir(parents=True, exist_ok=True)
            with open(report_target, "w") as handle:
                json.dump(report, handle, indent=2)
                handle.write("\n")

    if not quiet:
        print(f"{config.problem_name}: status={result.status} iterations={result.iterations} "
              f"accepted={result.accepted_count} J={result.J_final:.9g} "
              f"stationarity={residual:.3g}")
    return exit_code, summary


def cmd_solve(args) -> int:
    config = load_config(args.config)
    exit_code, _ = execute_run(config, trace_path=args.trace, report_path=args.report)
    return exit_code


def _bench_row(name: str, summary: Optional[dict], error: str = "") -> dict:
    row = {key: "" for key in BENCH_COLUMNS}
    row["name"] = name
    row["error"] = error
    if summary is None:
        row["status"] = "error"
        return row
    row["status"] = summary["status"]
    row["iterations"] = summary["iterations"]
    row["accepted"] = summary["accepted"]
    row["J_final"] = repr(summary["J_final"])
    row["stationarity_residual"] = repr(summary["stationarity_residual"])
    report = summary.get("diagnostics") or {}
    sharp = report.get("sharp_minimum")
    if sharp is not None:
        row["beta_hat"] = repr(sharp["beta_hat"])
    growth = report.get("model_growth")
    if growth is not None:
        row["gamma_hat"] = repr(growth["gamma_hat"])
    small = report.get("small_step")
    if small is not None:
        row["small_step_pass"] = "true" if small["passed"] else "false"
    rate = report.get("rate")
    if rate is not None and rate["defined"]:
        row["rate_order"] = repr(rate["order_q"])
        row["superlinear"] = "true" if rate["superlinear_evidence"] else "false"
    return row


def cmd_bench(args) -> int:
    directory = Path(args.dir)
    if not directory.is_dir():
        print(f"bench directory not found: {directory}", file=sys.stderr)
        return EXIT_CONFIG
    rows = []
    for config_path in sorted(directory.glob("*.json")):
        name = config_path.stem
        try:
            config = load_config(str(config_path))
            _, summary = execute_run(config, quiet=True)
            rows.append(_bench_row(name, summary))
        except ConfigError as exc:
            rows.append(_bench_row(name, None, error=str(exc)))
        except Exception as exc:  # keep the batch alive
            rows.append(_bench_row(name, None, error=f"{type(exc).__name__}: {exc}"))
        print(f"bench {name}: {rows[-1]['status']}")
    out_path = Path(args.out)
    if out_path.parent != Path(""):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(BENCH_COLUMNS))
        writer.writeheader()
        writer.writerows(rows)
    return EXIT_OK


def cmd_check(args) -> int:
    config = load_config(args.config)
    if not config.output.trace or not config.output.summary:
        raise ConfigError("check needs output.trace and output.summary in the config")
    trace_file = Path(config.output.trace)
    summary_file = Path(config.output.summary)
    if not trace_file.exists() or not summary_file.exists():
        raise ConfigError("check needs an existing solve run; run solve first")
    with open(summary_file) as handle:
        summary = json.load(handle)
    trace = read_trace(str(trace_file), config.output.iterates)
    _, composite, disc, _ = _prepare(config)

    result = SolveResult(
        final_z=np.asarray(summary["final_z"], dtype=float),
        status=summary["status"], trace=trace, J_final=summary["J_final"],
    )
    report = run_diagnostics(composite, disc, result, config, summary["J0"])
    report_target = args.report or config.output.report
    if report_target:
        Path(report_target).parent.mkdir(parents=True, exist_ok=True)
        with open(report_target, "w") as handle:
            json.dump(report, handle, indent=2)
            handle.write("\n")
    print(f"check {config.problem_name}: status={summary['status']} "
          f"report={'written' if report_target else 'stdout only'}")
    if not report_target:
        json.dump(report, sys.stdout, indent=2)
        print()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scvxkit",
        description="Penalty trust-region solver and convergence diagnostics",
        epilog="built-in problems: " + ", ".join(BUILTIN_NAMES),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve one configured instance")
    solve.add_argument("--config", required=True, help="path to a JSON run config")
    solve.add_argument("--trace", default=None, help="override the trace output path")
    solve.add_argument("--report", default=None, help="override the diagnostics report path")

    bench = sub.add_parser("bench", help="run every config in a directory")
    bench.add_argument("--dir", required=True, help="directory of JSON run configs")
    bench.add_argument("--out", required=True, help="CSV summary output path")

    check = sub.add_parser("check", help="re-run diagnostics on a saved solve")
    check.add_argument("--config", required=True, help="path to the JSON run config")
    check.add_argument("--report", default=None, help="override the report output path")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"solve": cmd_solve, "bench": cmd_bench, "check": cmd_check}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CompositeError as exc:
        print(f"evaluation error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
