"""Command-line interface: ``sipm {solve,check,bench,synth}``.

Exit codes::

    0  success
    1  an audit suite failed (check) or a bench cell failed
    2  invalid flags or configuration
    3  unreadable or malformed data
    4  starting point not strictly feasible
    5  numerical failure inside the solver
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import checks
from .data import save_cluster_csv, save_multitask_csv, save_regression_csv, synth_cluster_observations, synth_generate
from .errors import (
    ConfigurationError,
    DataError,
    IllPosedConstraintsError,
    InternalConsistencyError,
    InvariantViolation,
)
from .experiments import (
    DEFAULT_SYNTH,
    PROBLEMS,
    VARIANT_NAMES,
    ExperimentConfig,
    InfeasibleStart,
    default_output,
    parse_spec,
    run_config,
)
from .solver import RECORD_FIELDS, Trace

EXIT_OK, EXIT_FAILED, EXIT_FLAGS, EXIT_DATA, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 1, 2, 3, 4, 5

log = logging.getLogger("sipm")


# -- trace files -------------------------------------------------------------


def trace_lines(trace: Trace, cfg: ExperimentConfig) -> list[str]:
    """JSON lines: one per recorded iteration, then a summary line."""
    lines = []
    for rec in trace.records:
        d = rec.to_dict()
        if not cfg.record_wall_time:
            d["wall_ms"] = 0.0
        lines.append(json.dumps(d))
    drawn = trace.draw_output()
    summary = {
        "summary": {
            "status": trace.status,
            "iterations": trace.iterations,
            "samples": trace.final().samples,
            "final": {k: getattr(trace.final(), k) for k in ("k", "f_rel", "stat_rel")},
            "drawn": {k: getattr(drawn, k) for k in ("k", "epoch", "f_rel", "stat_rel")},
            "config": cfg.to_dict(),
        }
    }
    lines.append(json.dumps(summary))
    return lines


def write_trace(path: Path, lines: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def read_trace(path) -> tuple[list[dict], dict | None]:
    """Records and the summary (None if absent) of a trace file."""
    records, summary = [], None
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        if "summary" in obj:
            summary = obj["summary"]
        else:
            missing = set(RECORD_FIELDS) - set(obj)
            if missing:
                raise DataError(f"trace record lacks {sorted(missing)}")
            records.append(obj)
    return records, summary


# -- argument parsing --------------------------------------------------------


def _add_experiment_args(p: argparse.ArgumentParser, variant_list: bool = False) -> None:
    p.add_argument("--problem", required=True, choices=PROBLEMS)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data", help="CSV file with the problem data")
    src.add_argument("--synth", help="synthetic data spec, e.g. d=10,p=2000")
    p.add_argument("--param", action="append", default=[], help="model parameter key=value (repeatable)")
    if not variant_list:
        p.add_argument("--variant", default="rm", choices=VARIANT_NAMES)
    p.add_argument("--s-eta", type=float, default=0.5)
    p.add_argument("--epsilon", type=float, default=1e-3)
    budget = p.add_mutually_exclusive_group()
    budget.add_argument("--epochs", type=float)
    budget.add_argument("--iterations", type=int)
    p.add_argument("--batch-size", type=int, help="fixed batch size (me1, pm, em, rm)")
    p.add_argument("--batch-init", type=int, help="initial batch size (me+)")
    p.add_argument("--batch-increment", type=int, help="batch growth per iteration (me+)")
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--no-early-stop", action="store_true", help="ignore the tolerance and spend the whole budget")
    p.add_argument("--record-wall-time", action="store_true", help="store elapsed time (breaks byte-identical traces)")
    p.add_argument("--eta-scale", type=float, help="constant in front of s_eta (default: the default one)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sipm", description="Stochastic interior-point methods for conic problems.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one configuration and write a JSON-lines trace")
    _add_experiment_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eta-exponent", type=float)
    p.add_argument("--gamma-exponent", type=float)
    p.add_argument("--mu-exponent", type=float)
    p.add_argument("--x0", help="starting point file (default: the problem's standard start)")
    p.add_argument("--out", help="trace path (default: $SIPM_OUTPUT_DIR/<problem>-<variant>-seed<seed>.jsonl)")
    p.add_argument("--check-invariants", action="store_true")

    p = sub.add_parser("check", help="run the numerical audit suites")
    p.add_argument("--suite", action="append", choices=sorted(checks.SUITES), help="suite to run (repeatable)")
    p.add_argument("--kmax", type=int, default=10**6)
    p.add_argument("--perturb-hessian", type=float, default=None, help=argparse.SUPPRESS)

    p = sub.add_parser("bench", help="variant x seed grid with a summary table")
    _add_experiment_args(p, variant_list=True)
    p.add_argument("--variants", default="me1,me+,pm,em,rm,fg")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--eta-exponents", default="", help="comma list of eta exponents to sweep")
    p.add_argument("--gamma-exponents", default="")
    p.add_argument("--mu-exponents", default="")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", help="write one trace per cell here")

    p = sub.add_parser("synth", help="write a synthetic dataset as CSV")
    p.add_argument("--problem", required=True, choices=PROBLEMS)
    p.add_argument("--synth", help="generator spec, e.g. d=10,p=2000")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return parser


def _config_from_args(args, **overrides) -> ExperimentConfig:
    synth = parse_spec(args.synth)
    params = {}
    for item in args.param:
        params.update(parse_spec(item))
    epochs, iterations = args.epochs, args.iterations
    if epochs is None and iterations is None:
        epochs = 200.0
    fields = dict(
        problem=args.problem,
        variant=getattr(args, "variant", "rm"),
        s_eta=args.s_eta,
        epsilon=args.epsilon,
        seed=getattr(args, "seed", 0),
        epochs=epochs,
        iterations=iterations,
        data=args.data,
        synth=synth,
        params=params,
        batch_size=args.batch_size,
        batch_init=args.batch_init,
        batch_increment=args.batch_increment,
        eta_exponent=getattr(args, "eta_exponent", None),
        gamma_exponent=getattr(args, "gamma_exponent", None),
        mu_exponent=getattr(args, "mu_exponent", None),
        eta_scale=args.eta_scale,
        record_every=args.record_every,
        stop_at_tolerance=not args.no_early_stop,
        record_wall_time=args.record_wall_time,
        x0=getattr(args, "x0", None),
    )
    fields.update(overrides)
    return ExperimentConfig(**fields)


def _load(cfg: ExperimentConfig):
    problem = cfg.load_problem()
    if not problem.is_feasible(problem.x0.x):
        raise InfeasibleStart(
            f"starting point is not strictly feasible (equality drift {problem.constraints.drift(problem.x0.x):.3e})"
        )
    return problem


# -- commands ----------------------------------------------------------------


def cmd_solve(args) -> int:
    cfg = _config_from_args(args)
    problem = _load(cfg)
    trace = run_config(cfg, problem, check_invariants=args.check_invariants)
    out = Path(args.out) if args.out else default_output(cfg)
    write_trace(out, trace_lines(trace, cfg))
    fin = trace.final()
    print(f"{trace.status}: {trace.iterations} iterations, f_rel={fin.f_rel:.6g}, stat_rel={fin.stat_rel:.6g} -> {out}")
    return EXIT_OK


def cmd_check(args) -> int:
    reports = checks.run_suites(args.suite, kmax=args.kmax, perturb=args.perturb_hessian)
    for r in reports:
        print(f"{r.line()} ({r.seconds:.1f}s)")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


@dataclass(frozen=True)
class CellResult:
    variant: str
    seed: int
    label: str
    f_rel: float = float("nan")
    stat_rel: float = float("nan")
    status: str = ""
    error: str | None = None


def _run_cell(cfg: ExperimentConfig, label: str, out_dir: str | None) -> CellResult:
    try:
        problem = _load(cfg)
        trace = run_config(cfg, problem)
    except Exception as exc:  # recorded in the table, the sweep goes on
        return CellResult(cfg.variant, cfg.seed, label, error=f"{type(exc).__name__}: {exc}")
    if out_dir:
        name = f"{cfg.problem}-{cfg.variant.replace('+', 'plus')}-{label}-seed{cfg.seed}.jsonl"
        write_trace(Path(out_dir) / name, trace_lines(trace, cfg))
    fin = trace.final()
    return CellResult(cfg.variant, cfg.seed, label, fin.f_rel, fin.stat_rel, trace.status)


def _floats(text: str) -> list[float | None]:
    vals = [float(v) for v in text.split(",") if v.strip()]
    return vals or [None]


def bench_grid(args) -> list[tuple[ExperimentConfig, str]]:
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    except ValueError:
        raise ConfigurationError(f"seeds must be integers: {args.seeds!r}") from None
    if not variants or not seeds:
        raise ConfigurationError("empty grid: give at least one variant and one seed")
    cells = []
    for v in variants:
        for ee in _floats(args.eta_exponents):
            for ge in _floats(args.gamma_exponents):
                for me in _floats(args.mu_exponents):
                    label = "-".join(f"{n}{x:g}" for n, x in (("eta", ee), ("gamma", ge), ("mu", me)) if x is not None)
                    for s in seeds:
                        cfg = _config_from_args(
                            args, variant=v, seed=s, eta_exponent=ee, gamma_exponent=ge, mu_exponent=me
                        )
                        cells.append((cfg, label or "default"))
    return cells


def format_table(results: list[CellResult]) -> str:
    groups: dict[tuple[str, str], list[CellResult]] = {}
    for r in results:
        groups.setdefault((r.variant, r.label), []).append(r)
    head = f"{'variant':<8} {'schedule':<26} {'f_rel mean [min, max]':<34} {'stat_rel mean [min, max]':<34} failed"
    rows = [head, "-" * len(head)]
    for (v, label), rs in groups.items():
        ok = [r for r in rs if r.error is None]
        failed = len(rs) - len(ok)

        def cell(name):
            if not ok:
                return "n/a"
            a = np.array([getattr(r, name) for r in ok])
            return f"{a.mean():.4e} [{a.min():.3e}, {a.max():.3e}]"

        mark = f"{failed}" + (" *" if failed else "")
        rows.append(f"{v:<8} {label:<26} {cell('f_rel'):<34} {cell('stat_rel'):<34} {mark}")
    for r in results:
        if r.error:
            rows.append(f"* {r.variant} {r.label} seed {r.seed}: {r.error}")
    return "\n".join(rows)


def cmd_bench(args) -> int:
    cells = bench_grid(args)
    if args.workers < 1:
        raise ConfigurationError("workers must be at least 1")
    if args.workers == 1:
        results = [_run_cell(c, lab, args.out_dir) for c, lab in cells]
    else:
        with ProcessPoolExecutor(args.workers) as ex:
            futs = [ex.submit(_run_cell, c, lab, args.out_dir) for c, lab in cells]
            results = [f.result() for f in futs]
    print(format_table(results))
    return EXIT_FAILED if any(r.error for r in results) else EXIT_OK


def cmd_synth(args) -> int:
    spec = {**DEFAULT_SYNTH[args.problem], **parse_spec(args.synth)}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.problem == "cluster":
        keys = ("d", "k", "p", "q", "drift")
        obs, _ = synth_cluster_observations(seed=args.seed, **{k: spec[k] for k in keys if k in spec})
        save_cluster_csv(out, obs)
    else:
        try:
            data = synth_generate(args.problem, spec, args.seed)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc
        (save_regression_csv if args.problem == "robust" else save_multitask_csv)(out, data)
    print(f"wrote {out}")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "check": cmd_check, "bench": cmd_bench, "synth": cmd_synth}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InfeasibleStart as exc:
        print(f"error: infeasible start: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DataError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConfigurationError as exc:
        print(f"error: configuration: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    except (InvariantViolation, IllPosedConstraintsError, InternalConsistencyError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
