"""``seqmon`` command line: simulate, replay and assign.

Exit codes: 0 ok, 2 configuration, 3 I/O, 4 data, 5 checkpoint.
"""

import argparse
import csv
import math
import os
import sys

import numpy as np

from . import checkpoint as ckpt_io
from .config import ConfigError, RunConfig
from .config import load as load_config
from .policies import assign, propensity
from .qte import MonitorTerminated
from .simlab import aggregate, run_trials

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DATA, EXIT_CHECKPOINT = 0, 2, 3, 4, 5

AGGREGATE_COLUMNS = ["method", "design", "scenario", "n", "K", "delta",
                     "rej_prob", "se", "mean_stop", "se_stop"]
DECISION_COLUMNS = ["method", "stage", "n", "statistic", "boundary",
                    "spend_target", "survivors", "verdict", "argmax"]
TRACE_COLUMNS = ["method", "design", "scenario", "n", "K", "delta", "rep"] + DECISION_COLUMNS[1:]


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def real(x):
    """Decimal text that round-trips a double exactly."""
    return format(float(x), ".17g")


def _open_out(path):
    if path is None or path == "-":
        return _Stdout()
    try:
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc.strerror or exc}") from exc


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()
        return False


def _config(args, required=True):
    if args.config is None:
        if required:
            raise CliError(EXIT_CONFIG, "--config is required")
        return RunConfig()
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc
    run = dict(cfg.section("run"))
    if args.seed is not None:
        run["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        if args.threads < 1:
            raise CliError(EXIT_CONFIG, "--threads must be positive")
        run["threads"] = args.threads
    cfg.doc["run"] = run
    return cfg


def decision_row(d):
    argmax = "" if d.argmax_x is None else ";".join(real(v) for v in d.argmax_x)
    return [d.method, d.stage, d.n, real(d.statistic), real(d.boundary), real(d.spend_target),
            d.survivors, d.verdict.value, argmax]


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args):
    cfg = _config(args)
    try:
        threads = cfg.threads
        cells = cfg.cells()
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc
    R = cfg.replications
    out_path = args.out or cfg.section("run").get("out")
    trace_path = args.trace or cfg.section("run").get("trace")

    rows, trace = [], []
    for cell in cells:
        results = run_trials(cell, R, threads=threads, keep_decisions=trace_path is not None)
        agg = aggregate(results)
        key = [cell.method, cell.design, cell.scenario, cell.batch, cell.stages, real(cell.delta)]
        rows.append(key + [real(agg.rej_prob), real(agg.se_rej), real(agg.mean_stop), real(agg.se_stop)])
        if trace_path is not None:
            for r, res in enumerate(results):
                for d in res.decisions:
                    trace.append(key + [r] + decision_row(d)[1:])
        print(f"{cell.method} {cell.design} S{cell.scenario} ({cell.batch},{cell.stages}) "
              f"delta={cell.delta:g}: rej={agg.rej_prob:.3f} stop={agg.mean_stop:.1f}", file=sys.stderr)

    with _open_out(out_path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_COLUMNS)
        w.writerows(rows)
    if trace_path is not None:
        with _open_out(trace_path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            w.writerows(trace)
    return EXIT_OK


# ---------------------------------------------------------------------------
# replay


def read_log(path):
    """Parse an observation log into ``(d, batches)``.

    ``batches`` is a list of ``(stage label, X, arms, y)`` in file order; rows
    sharing a stage label form one batch.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            lines = list(csv.reader(fh))
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from exc
    except (UnicodeDecodeError, csv.Error) as exc:
        raise CliError(EXIT_DATA, f"{path}: unreadable log ({exc})") from exc
    if not lines:
        raise CliError(EXIT_DATA, f"{path}: line 1: missing header")
    header = [h.strip() for h in lines[0]]
    d = len(header) - 3
    expected = ["stage"] + [f"x{j}" for j in range(1, d + 1)] + ["a", "y"]
    if d < 0 or header != expected:
        raise CliError(EXIT_DATA, f"{path}: line 1: header must be stage,x1..xd,a,y")

    batches = []
    prev = None
    for lineno, row in enumerate(lines[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != d + 3:
            raise CliError(EXIT_DATA, f"{path}: line {lineno}: expected {d + 3} fields, got {len(row)}")
        try:
            stage = int(row[0])
            x = [float(v) for v in row[1:d + 1]]
            a = int(row[d + 1])
            y = float(row[d + 2])
        except ValueError as exc:
            raise CliError(EXIT_DATA, f"{path}: line {lineno}: {exc}") from exc
        if a not in (0, 1):
            raise CliError(EXIT_DATA, f"{path}: line {lineno}: arm must be 0 or 1, got {a}")
        if not (math.isfinite(y) and all(math.isfinite(v) for v in x)):
            raise CliError(EXIT_DATA, f"{path}: line {lineno}: non-finite value")
        if prev is not None and stage < prev:
            raise CliError(EXIT_DATA, f"{path}: line {lineno}: stage {stage} after stage {prev}")
        if prev is None or stage != prev:
            batches.append((stage, [], [], [], lineno))
        batches[-1][1].append(x)
        batches[-1][2].append(a)
        batches[-1][3].append(y)
        prev = stage
    out = []
    for stage, X, arms, y, lineno in batches:
        out.append((stage, np.array(X, dtype=float).reshape(len(y), d),
                    np.array(arms, dtype=np.int64), np.array(y, dtype=float), lineno))
    return d, out


def _load_checkpoint(path):
    try:
        return ckpt_io.load(path)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read checkpoint {path}: {exc.strerror or exc}") from exc
    except (ckpt_io.CheckpointError, UnicodeDecodeError) as exc:
        raise CliError(EXIT_CHECKPOINT, f"checkpoint parse error: {path}: {exc}") from exc


def _covariate_dim(ck):
    basis = ck.monitor.basis
    return None if basis is None else basis.dim_x


def cmd_replay(args):
    d, batches = read_log(args.log)
    resume = args.checkpoint is not None and os.path.exists(args.checkpoint)
    cfg = _config(args, required=not resume)
    if resume:
        ck = _load_checkpoint(args.checkpoint)
        dim = _covariate_dim(ck)
        if dim is not None and dim != d:
            raise CliError(EXIT_DATA, f"log has {d} covariates, checkpoint basis expects {dim}")
    else:
        try:
            ck = ckpt_io.Checkpoint(cfg.make_monitor(d), cfg.make_policy())
        except (ConfigError, ValueError) as exc:
            raise CliError(EXIT_CONFIG, str(exc)) from exc

    monitor = ck.monitor
    rows = []
    for stage, X, arms, y, lineno in batches:
        if ck.log_stage is not None and stage <= ck.log_stage:
            continue
        if monitor.terminated:
            break
        try:
            decision = monitor.interim(X, arms, y)
        except MonitorTerminated:
            break
        except ValueError as exc:
            raise CliError(EXIT_DATA, f"{args.log}: stage {stage} (line {lineno}): {exc}") from exc
        ck.log_stage = stage
        rows.append(decision_row(decision))

    with _open_out(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DECISION_COLUMNS)
        w.writerows(rows)
    if args.checkpoint is not None:
        try:
            ckpt_io.save(args.checkpoint, ck)
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot write checkpoint {args.checkpoint}: {exc.strerror or exc}") from exc
    return EXIT_OK


# ---------------------------------------------------------------------------
# assign


def cmd_assign(args):
    ck = _load_checkpoint(args.checkpoint)
    x = np.asarray(args.covariates, dtype=float)
    dim = _covariate_dim(ck)
    if dim is not None and x.size != dim:
        raise CliError(EXIT_CONFIG, f"expected {dim} covariates, got {x.size}")
    try:
        snapshot = ck.snapshot()
        if args.deterministic:
            p = propensity(ck.policy, x, snapshot)
            arm = 1 if p > 0.5 else 0
        else:
            rng = np.random.default_rng(args.seed if args.seed is not None else None)
            arm, p = assign(ck.policy, x, snapshot, rng)
    except ValueError as exc:
        raise CliError(EXIT_DATA, str(exc)) from exc
    print(f"arm={arm} propensity={p!r}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="seqmon", description="Sequential monitoring of treatment effects.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run Monte-Carlo simulation cells from a config")
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--out", help="aggregate CSV path (default: stdout)")
    p.add_argument("--trace", help="per-stage decision CSV path")
    p.add_argument("--threads", type=int, help="worker processes (default: run.threads or SEQMON_THREADS)")
    p.add_argument("--seed", type=int, help="override run.seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", help="run a monitor over a CSV observation log")
    p.add_argument("log", help="CSV with header stage,x1..xd,a,y")
    p.add_argument("--config", help="TOML run configuration (optional when resuming)")
    p.add_argument("--out", help="decision CSV path (default: stdout)")
    p.add_argument("--checkpoint", help="resume from this file if it exists; always written at the end")
    p.add_argument("--seed", type=int, help="override run.seed")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("assign", help="query the assignment policy stored in a checkpoint")
    p.add_argument("covariates", nargs="+", type=float, help="covariate values x1..xd")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--deterministic", action="store_true", help="report the greedy arm without sampling")
    p.add_argument("--seed", type=int, help="seed for the assignment draw")
    p.set_defaults(func=cmd_assign)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        return args.func(args)
    except CliError as exc:
        print(f"seqmon: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
