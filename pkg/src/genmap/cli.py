"""Unified command line: file loading, dispatch, and serialization.

Exit codes: 0 on success, 1 on domain errors (bad parameter values,
infeasible points, degenerate estimates), 2 on usage errors (unknown
flags, missing or unparseable input files).  Every referenced file is
read and parsed before any computation starts.  Outputs are written
atomically (temporary file in the target directory, then rename).
All randomness flows from --seed/--stream; there is no wall-clock
entropy, so identical invocations produce identical output bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import __version__
from .errors import GenmapError, DomainError
from .parallel import default_threads
from .schedules import geometric


class UsageError(Exception):
    """Bad invocation: missing files, unparseable inputs."""


@dataclass(frozen=True)
class RunConfig:
    """A parsed invocation: the subcommand, its input files (already
    validated), numeric options, and the output destination."""

    command: str
    args: argparse.Namespace

    @property
    def out(self) -> Optional[str]:
        return getattr(self.args, "out", None)


def _read_text(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"file not found: {path}")
    try:
        return p.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _parse_json_file(parse, path: str):
    text = _read_text(path)
    try:
        return parse(text)
    except GenmapError:
        raise  # semantically invalid content: a domain error
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"cannot parse {path}: {exc}") from exc


def _write_output(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    target = Path(out)
    fd, tmp = tempfile.mkstemp(dir=str(target.parent) or ".", prefix=target.name + ".")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header: str, rows) -> str:
    lines = [header]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommand handlers (modules are imported lazily to keep startup fast)
# ---------------------------------------------------------------------------


def _cmd_sample(args) -> str:
    from .sequence_core import WeightSequence
    from .uniform_prior import RngSpec, sample_prior

    gamma = _parse_json_file(WeightSequence.from_json, args.gamma)
    trunc = args.trunc if args.trunc is not None else max(len(gamma), 1)
    point = sample_prior(gamma, trunc, RngSpec(args.seed, args.stream))
    return point.to_json() + "\n"


def _cmd_ballprob(args) -> str:
    from .sequence_core import SeqPoint, WeightSequence
    from .uniform_prior import RngSpec, ball_prob_exact, ball_prob_mc

    gamma = _parse_json_file(WeightSequence.from_json, args.gamma)
    center = _parse_json_file(SeqPoint.from_json, args.center)
    if not args.radius > 0:
        raise DomainError("radius must be positive")
    if args.mc:
        est = ball_prob_mc(
            gamma,
            center,
            args.radius,
            n=args.samples,
            rng=RngSpec(args.seed, args.stream),
            threads=args.threads,
        )
    else:
        est = ball_prob_exact(gamma, center, args.radius)
    return est.to_json() + "\n"


def _cmd_classify(args) -> str:
    from .sequence_core import SeqPoint, WeightSequence
    from .uniform_prior import classify_generalized_mode

    gamma = _parse_json_file(WeightSequence.from_json, args.gamma)
    point = _parse_json_file(SeqPoint.from_json, args.point)
    return json.dumps({"generalized_mode": classify_generalized_mode(point, gamma)}) + "\n"


def _cmd_mode_curve(args) -> str:
    from .sequence_core import SeqPoint, WeightSequence
    from .uniform_prior import strong_mode_diagnostic

    gamma = _parse_json_file(WeightSequence.from_json, args.gamma)
    point = _parse_json_file(SeqPoint.from_json, args.point)
    deltas = geometric(args.delta_start, args.delta_factor, args.steps)
    curve = strong_mode_diagnostic(point, gamma, deltas)
    return _csv("delta,ratio", curve)


def _cmd_modelab(args) -> str:
    from .mode_lab import PiecewiseDensity1D, builtin_density, mode_curve_rows

    if args.density is not None:
        density = _parse_json_file(PiecewiseDensity1D.from_json, args.density)
    else:
        density = builtin_density(args.example)
    deltas = geometric(args.delta_start, args.delta_factor, args.steps)
    rows = mode_curve_rows(density, args.point, deltas, grid=args.grid)
    return _csv("delta,argmax,ratio,ratio_to_w", rows)


def _cmd_solve(args) -> str:
    from .posterior import PosteriorSpec
    from .sequence_core import SeqPoint
    from .map_solver import solve_map_pg

    spec = _parse_json_file(PosteriorSpec.from_json, args.spec)
    x0 = None
    if args.x0 is not None:
        x0 = _parse_json_file(SeqPoint.from_json, args.x0)
    report = solve_map_pg(
        spec, x0=x0, step0=args.step0, tol=args.tol, max_iter=args.max_iter
    )
    if args.trace_csv is not None:
        trace = _csv(
            "iteration,objective", list(enumerate(report.objective_trace))
        )
        _write_output(trace, args.trace_csv)
    return report.to_json() + "\n"


def _cmd_om_check(args) -> str:
    from .posterior import PosteriorSpec, om_ratio_check
    from .sequence_core import SeqPoint
    from .uniform_prior import RngSpec

    spec = _parse_json_file(PosteriorSpec.from_json, args.spec)
    x1 = _parse_json_file(SeqPoint.from_json, args.x1)
    x2 = _parse_json_file(SeqPoint.from_json, args.x2)
    deltas = geometric(args.delta_start, args.delta_factor, args.steps)
    points = om_ratio_check(
        spec,
        x1,
        x2,
        deltas,
        n=args.samples,
        rng=RngSpec(args.seed, args.stream),
        threads=args.threads,
    )
    rows = [
        (p.delta, p.empirical_ratio, p.predicted_ratio, p.std_error) for p in points
    ]
    return _csv("delta,empirical_ratio,predicted_ratio,std_error", rows)


def _cmd_consistency(args) -> str:
    from .consistency import (
        LARGE_SAMPLE,
        SMALL_NOISE,
        ExperimentPlan,
        run_large_sample,
        run_small_noise,
    )

    plan = _parse_json_file(ExperimentPlan.from_json, args.plan)
    mode = args.mode or plan.mode
    if mode != plan.mode:
        raise DomainError(f"plan declares mode {plan.mode!r} but --mode is {mode!r}")
    try:
        eps_list = [float(e) for e in args.eps.split(",") if e]
    except ValueError as exc:
        raise UsageError(f"cannot parse --eps {args.eps!r}: {exc}") from exc
    runner = run_small_noise if mode == SMALL_NOISE else run_large_sample
    table = runner(
        plan, eps_list, tol=args.tol, max_iter=args.max_iter, threads=args.threads
    )
    return table.to_csv()


_HANDLERS = {
    "sample": _cmd_sample,
    "ballprob": _cmd_ballprob,
    "classify": _cmd_classify,
    "mode-curve": _cmd_mode_curve,
    "modelab": _cmd_modelab,
    "solve": _cmd_solve,
    "om-check": _cmd_om_check,
    "consistency": _cmd_consistency,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="genmap",
        description="Generalized modes and MAP estimation for uniform series priors.",
    )
    parser.add_argument("--version", action="version", version=f"genmap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument(
            "--threads",
            type=int,
            default=default_threads(),
            help="worker threads (results are thread-count independent); "
            "env GENMAP_THREADS is the fallback default",
        )
        if seed:
            p.add_argument("--seed", type=int, default=42)
            p.add_argument("--stream", type=int, default=0)

    def schedule_opts(p):
        p.add_argument("--delta-start", type=float, required=True)
        p.add_argument("--delta-factor", type=float, required=True)
        p.add_argument("--steps", type=int, required=True)

    p = sub.add_parser("sample", help="draw one point from the prior")
    p.add_argument("--gamma", required=True)
    p.add_argument("--trunc", type=int, default=None)
    common(p)

    p = sub.add_parser("ballprob", help="prior probability of a sup-norm ball")
    p.add_argument("--gamma", required=True)
    p.add_argument("--center", required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--mc", action="store_true", help="Monte Carlo instead of exact product")
    p.add_argument("--samples", type=int, default=10**6)
    common(p)

    p = sub.add_parser("classify", help="is the point a generalized mode of the prior?")
    p.add_argument("--gamma", required=True)
    p.add_argument("--point", required=True)
    common(p, seed=False)

    p = sub.add_parser("mode-curve", help="strong-mode ratio curve under the prior")
    p.add_argument("--gamma", required=True)
    p.add_argument("--point", required=True)
    schedule_opts(p)
    common(p, seed=False)

    p = sub.add_parser("modelab", help="1-d density mode diagnostics")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--example", choices=["standard", "cluster", "gaussian"])
    group.add_argument("--density", help="custom density JSON {breakpoints, pieces}")
    p.add_argument("--point", type=float, required=True)
    p.add_argument("--grid", type=int, default=4097)
    schedule_opts(p)
    common(p, seed=False)

    p = sub.add_parser("solve", help="projected-gradient MAP solve")
    p.add_argument("--spec", required=True, help="posterior spec JSON")
    p.add_argument("--x0", help="initial point JSON (default: origin)")
    p.add_argument("--step0", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=10**4)
    p.add_argument("--trace-csv", help="also write the objective trace as CSV")
    common(p, seed=False)

    p = sub.add_parser("om-check", help="posterior ball-probability ratio vs prediction")
    p.add_argument("--spec", required=True)
    p.add_argument("--x1", required=True)
    p.add_argument("--x2", required=True)
    p.add_argument("--samples", type=int, default=10**6)
    schedule_opts(p)
    common(p)

    p = sub.add_parser("consistency", help="small-noise / large-sample experiment")
    p.add_argument("--plan", required=True)
    p.add_argument("--mode", choices=["small-noise", "large-sample"])
    p.add_argument("--eps", default="0.05", help="comma-separated error thresholds")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=10**4)
    common(p, seed=False)

    return parser


def dispatch(config: RunConfig) -> int:
    """Run the mapped operation and write its output atomically."""
    handler = _HANDLERS[config.command]
    text = handler(config.args)
    _write_output(text, config.out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return dispatch(RunConfig(command=args.command, args=args))
    except UsageError as exc:
        print(f"genmap: {exc}", file=sys.stderr)
        return 2
    except GenmapError as exc:
        print(f"genmap: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
