#!/usr/bin/env python3
"""
weakcoin - command-line front end

Features:
- bounds: certified cheating bounds alpha, beta and the honest constraint
- optimize: constraint-exact parameters minimizing the bias bound
- sweep: bounds along the reciprocal schedules, plot-ready CSV
- verify-cert: build, verify, export and re-verify dual certificates
- simulate: sample honest executions
- cheat / gap: ascent lower bounds against the dual upper bounds
- CSV (12 significant digits) or JSON (round-trip floats) on stdout or --out
- Exit codes: 0 success, 2 validation, 3 certificate rejected, 4 resource limit
"""

import argparse
import csv
import io
import json
import logging
import math
import re
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

try:
    from weakcoin import __version__
except ImportError:
    __version__ = "0.0.0"

from weakcoin.certificates import (
    build_certificate,
    certificate_from_dict,
    verify_certificate,
)
from weakcoin.cheating import ascend, gap_report, upper_bound
from weakcoin.config import Config
from weakcoin.errors import (
    EXIT_OK,
    EXIT_VALIDATION,
    CertificateRejectedError,
    DegenerateProtocolError,
    InvalidArgumentError,
    WeakCoinError,
)
from weakcoin.protocol import ProtocolParams, simulate_honest_runs
from weakcoin.trees import bounds
from weakcoin.tuner import (
    TuneConfig,
    default_params,
    optimize_bias,
    sweep_reciprocal,
    sweep_reciprocal_odd,
)

# Optional rich library for status output and logging
try:
    from rich.console import Console
    from rich.logging import RichHandler
    RICH_AVAILABLE = True
    console = Console(stderr=True)
except ImportError:
    RICH_AVAILABLE = False
    console = None

logger = logging.getLogger(__name__)


# ============================================================================
# Constants
# ============================================================================

CSV_FLOAT = "%.12g"
DUAL_TOL = 1e-9
TOKEN_SPLIT = re.compile(r"[,\s]+")


# ============================================================================
# Helper Functions
# ============================================================================

def print_styled(text: str, style: str = ""):
    """Print a status line to stderr with optional rich styling"""
    if RICH_AVAILABLE and console:
        console.print(text, style=style)
    else:
        print(text, file=sys.stderr)


def setup_logging(verbosity: int):
    """WARNING by default, INFO with -v, DEBUG with -vv"""
    level = max(logging.DEBUG, logging.WARNING - 10 * verbosity)
    if RICH_AVAILABLE:
        handler: logging.Handler = RichHandler(console=console, show_path=False)
        fmt = "%(message)s"
    else:
        handler = logging.StreamHandler(sys.stderr)
        fmt = "%(levelname)s %(name)s: %(message)s"
    logging.basicConfig(level=level, format=fmt, handlers=[handler], force=True)


def parse_weights(text: str) -> List[float]:
    """Comma (or whitespace) separated weights; the first bad token is named"""
    tokens = [t for t in TOKEN_SPLIT.split(text.strip()) if t]
    if not tokens:
        raise InvalidArgumentError("empty weight list")
    weights = []
    for token in tokens:
        try:
            value = float(token)
        except ValueError:
            raise InvalidArgumentError(f"malformed weight token {token!r}") from None
        if not math.isfinite(value):
            raise InvalidArgumentError(f"malformed weight token {token!r}")
        weights.append(value)
    return weights


def params_from_args(args: argparse.Namespace) -> ProtocolParams:
    """ProtocolParams from --n with --a or --a-file; optimized weights when neither is given"""
    if args.a is not None and args.a_file is not None:
        raise InvalidArgumentError("give either --a or --a-file, not both")
    if args.a is not None:
        return ProtocolParams(args.n, tuple(parse_weights(args.a)), args.c)
    if args.a_file is not None:
        path = Path(args.a_file)
        if not path.exists():
            raise InvalidArgumentError(f"weight file not found: {path}")
        return ProtocolParams(args.n, tuple(parse_weights(path.read_text())), args.c)
    if args.n < 2:
        raise InvalidArgumentError("--a is required for n < 2")
    print_styled(f"no --a given; optimizing weights for n={args.n}", "dim")
    return default_params(args.n, args.c)


# ============================================================================
# Output
# ============================================================================

def _csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return CSV_FLOAT % value
    if isinstance(value, (list, tuple)):
        return ",".join(_csv_cell(v) for v in value)
    return str(value)


def _json_safe(value: Any) -> Any:
    """Non-finite floats become null; numpy scalars become Python numbers"""
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def dumps(payload: Any) -> str:
    return json.dumps(_json_safe(payload), indent=2) + "\n"


def render(rows: Sequence[Dict[str, Any]], columns: Sequence[str], fmt: str, single: bool = False) -> str:
    """CSV with a header row, or JSON (one object when single)"""
    if fmt == "json":
        return dumps(rows[0] if single else list(rows))
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row.get(col)) for col in columns])
    return buffer.getvalue()


def write_output(text: str, out: Optional[str]):
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise InvalidArgumentError(f"cannot write {out}: {exc}") from exc
        print_styled(f"wrote {out}", "green")
    else:
        sys.stdout.write(text)


def _format(args: argparse.Namespace, config: Config) -> str:
    return config.resolve("output.format", args.format)


# ============================================================================
# Commands
# ============================================================================

def cmd_bounds(args: argparse.Namespace, config: Config) -> int:
    p = params_from_args(args)
    report = bounds(p, cross_check=args.check)
    row = report.to_dict()
    columns = ["n", "alpha", "beta", "constraint", "bias_bound"]
    if args.check:
        row["dense_residual"] = report.dense_residual
        columns.append("dense_residual")
    write_output(render([row], columns, _format(args, config), single=True), args.out)
    if not math.isclose(report.constraint, p.c, rel_tol=0.0, abs_tol=1e-9):
        print_styled(
            f"constraint {report.constraint:.12g} differs from c={p.c:.12g}; "
            "bias_bound is not a certified bias",
            "yellow",
        )
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace, config: Config) -> int:
    cfg = TuneConfig(
        n=args.n,
        restarts=int(config.resolve("tuner.restarts", args.restarts)),
        max_evals=int(config.resolve("tuner.max_evals", args.max_evals)),
        seed=int(config.resolve("tuner.seed", args.seed)),
        tol=float(config.get("tuner.tol", 1e-10)),
        c=args.c,
        polish_rounds=int(config.get("tuner.polish_rounds", 12)),
    )
    result = optimize_bias(cfg)
    columns = ["n", "bias", "alpha", "beta", "constraint", "alpha_beta_residual", "evals", "a"]
    write_output(render([result.to_dict()], columns, _format(args, config), single=True), args.out)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, config: Config) -> int:
    if args.parity == "even":
        rows = sweep_reciprocal(args.n_max)
    else:
        rows = sweep_reciprocal_odd(args.n_max)
    payload = [row.to_dict() for row in rows]
    write_output(render(payload, ["n", "alpha", "beta"], _format(args, config)), args.out)
    return EXIT_OK


def cmd_verify_cert(args: argparse.Namespace, config: Config) -> int:
    if args.from_file:
        path = Path(args.from_file)
        if not path.exists():
            raise InvalidArgumentError(f"certificate file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InvalidArgumentError(f"cannot parse {path}: {exc}") from exc
        cert = certificate_from_dict(doc)
    else:
        if args.n is None:
            raise InvalidArgumentError("--n is required unless --from is given")
        p = params_from_args(args)
        try:
            cert = build_certificate(p, args.side)
        except DegenerateProtocolError as exc:
            raise CertificateRejectedError(f"degenerate certificate: {exc.message}", exc.details) from exc

    try:
        report = verify_certificate(cert, config.get("certificate.oracle_max_qubits", 8))
    except DegenerateProtocolError as exc:
        raise CertificateRejectedError(f"degenerate certificate: {exc.message}", exc.details) from exc
    if args.export:
        write_output(dumps(cert.to_dict(report)), args.export)

    row = {
        "n": cert.params.n,
        "side": cert.side,
        "bound": cert.bound,
        "K": cert.K,
        **report.to_dict(),
    }
    row["diagnostics"] = "; ".join(report.diagnostics)
    columns = [
        "n", "side", "bound", "K", "accepted", "domination_margin",
        "balance_residual", "tree_match_residual", "psd_min_eig", "diagnostics",
    ]
    write_output(render([row], columns, _format(args, config), single=True), args.out)
    if not report.accepted:
        raise CertificateRejectedError("certificate rejected: " + "; ".join(report.diagnostics))
    print_styled(f"certificate accepted: bound {cert.bound:.12g}", "green")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace, config: Config) -> int:
    p = params_from_args(args)
    runs = config.resolve("simulate.runs", args.runs)
    seed = config.resolve("simulate.seed", args.seed)
    summary = simulate_honest_runs(p, runs, seed)
    row = {"n": p.n, **summary.to_dict()}
    columns = [
        "n", "runs", "bob_wins", "alice_wins", "bob_win_frequency", "constraint",
        "disagreements", "verification_failures", "seed",
    ]
    write_output(render([row], columns, _format(args, config), single=True), args.out)
    return EXIT_OK


def cmd_cheat(args: argparse.Namespace, config: Config) -> int:
    p = params_from_args(args)
    result = ascend(
        p,
        args.side,
        config.resolve("ascent.ancilla", args.ancilla),
        config.resolve("ascent.iters", args.iters),
        config.resolve("ascent.seed", args.seed),
    )
    upper = upper_bound(p, args.side)
    row = {"n": p.n, **result.to_dict(), "lower": result.value, "upper": upper, "gap": upper - result.value}
    columns = ["n", "side", "lower", "upper", "gap", "iterations", "ancilla_qubits", "accepted_kicks"]
    write_output(render([row], columns, _format(args, config), single=True), args.out)
    if result.value > upper + DUAL_TOL:
        raise CertificateRejectedError(
            f"ascent value {result.value:.12g} exceeds the dual bound {upper:.12g}",
            {"side": args.side, "lower": result.value, "upper": upper},
        )
    return EXIT_OK


def cmd_gap(args: argparse.Namespace, config: Config) -> int:
    p = params_from_args(args)
    rows = gap_report(
        p,
        ancilla_qubits=config.resolve("ascent.ancilla", args.ancilla),
        iters=config.resolve("ascent.iters", args.iters),
        seed=config.resolve("ascent.seed", args.seed),
    )
    payload = [{"n": p.n, **row.to_dict()} for row in rows]
    write_output(render(payload, ["n", "side", "lower", "upper", "gap", "note"], _format(args, config)), args.out)
    crossed = [row for row in rows if row.gap < -DUAL_TOL]
    if crossed:
        raise CertificateRejectedError(
            "ascent exceeds the dual bound for side " + ",".join(row.side for row in crossed),
            {row.side: row.to_dict() for row in crossed},
        )
    return EXIT_OK


# ============================================================================
# Main Entry Point
# ============================================================================

def _add_params(parser: argparse.ArgumentParser, required: bool = True):
    parser.add_argument("--n", type=int, required=required, help="number of coin-determining messages")
    parser.add_argument("--a", help="comma-separated weights a_1..a_n")
    parser.add_argument("--a-file", dest="a_file", help="file with the weights a_1..a_n")
    parser.add_argument("--c", type=float, default=0.5, help="honest probability of Bob winning (default: 0.5)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["csv", "json"], default=None, help="output format (default: csv)")
    common.add_argument("--out", help="write results to this file instead of stdout")
    common.add_argument("--config", type=Path, help="YAML or JSON settings file")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr (-vv for debug)")

    parser = argparse.ArgumentParser(
        prog="weakcoin",
        description="weakcoin - bounds, certificates and cheating searches for weak coin flipping",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  weakcoin bounds --n 3 --a 0.74094,0.479696,0.186312
  weakcoin optimize --n 8 --restarts 8 --seed 1 --format json
  weakcoin sweep --n-max 10000 --parity even --out reciprocal.csv
  weakcoin verify-cert --n 3 --a 0.74094,0.479696,0.186312 --side B --export cert.json
  weakcoin verify-cert --from cert.json
  weakcoin simulate --n 3 --a 0.74094,0.479696,0.186312 --runs 1000000 --seed 7
  weakcoin cheat --n 2 --side B --ancilla 2 --iters 500
  weakcoin gap --n 2 --a 0.70710678,0.29289322
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("bounds", parents=[common], help="alpha, beta, constraint and bias bound")
    _add_params(p)
    p.add_argument("--check", action="store_true", help="cross-check against the dense evaluator (n <= 14)")
    p.set_defaults(handler=cmd_bounds)

    p = sub.add_parser("optimize", parents=[common], help="minimize the bias bound")
    p.add_argument("--n", type=int, required=True, help="number of coin-determining messages")
    p.add_argument("--c", type=float, default=0.5, help="honest probability of Bob winning (default: 0.5)")
    p.add_argument("--restarts", type=int, help="multi-start count (default: 8)")
    p.add_argument("--seed", type=int, help="seed for the restart generators (default: 0)")
    p.add_argument("--max-evals", dest="max_evals", type=int, help="evaluations per simplex run (default: 20000)")
    p.set_defaults(handler=cmd_optimize)

    p = sub.add_parser("sweep", parents=[common], help="bounds along a_k = 1/k (even) or 1/(k+1) (odd)")
    p.add_argument("--n-max", dest="n_max", type=int, required=True, help="largest n in the table")
    p.add_argument("--parity", choices=["even", "odd"], default="even", help="which family (default: even)")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("verify-cert", parents=[common], help="build and verify a dual certificate")
    _add_params(p, required=False)
    p.add_argument("--side", choices=["A", "B"], default="B", help="cheating party (default: B)")
    p.add_argument("--export", help="write the certificate document to this JSON file")
    p.add_argument("--from", dest="from_file", help="re-verify an exported certificate document")
    p.set_defaults(handler=cmd_verify_cert)

    p = sub.add_parser("simulate", parents=[common], help="sample honest executions")
    _add_params(p)
    p.add_argument("--runs", type=int, help="number of runs (default: 100000)")
    p.add_argument("--seed", type=int, help="generator seed (default: 0)")
    p.set_defaults(handler=cmd_simulate)

    for name, handler, text in (
        ("cheat", cmd_cheat, "ascent lower bound for one cheating party"),
        ("gap", cmd_gap, "lower and upper bounds for both parties"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        _add_params(p)
        if name == "cheat":
            p.add_argument("--side", choices=["A", "B"], default="B", help="cheating party (default: B)")
        p.add_argument("--ancilla", type=int, help="cheater's ancilla qubits (default: 1)")
        p.add_argument("--iters", type=int, help="ascent iterations (default: 300)")
        p.add_argument("--seed", type=int, help="generator seed (default: 0)")
        p.set_defaults(handler=handler)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "handler", None):
        parser.print_help(sys.stderr)
        return EXIT_VALIDATION

    setup_logging(args.verbose)
    config: Optional[Config] = None
    try:
        config = Config(args.config)
        return args.handler(args, config)
    except WeakCoinError as exc:
        logger.debug("details: %s", exc.details)
        fmt = _format(args, config) if config is not None else args.format
        if fmt == "json":
            # stdout may already hold the command's result document
            sys.stderr.write(dumps(exc.to_dict()))
        else:
            print_styled(f"Error: {exc.message}", "bold red")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
