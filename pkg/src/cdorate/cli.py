"""Command-line entry point; every subcommand writes one CSV table.

The first output line is a ``#`` comment echoing the full configuration,
the second the header.  Exit codes: 0 success, 2 bad configuration,
3 some solver point did not converge (the table is still written),
4 a simulation exceeded its codebook budget.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys

import numpy as np

from .cdo_model import (CdoSource, Mode, coin_ensemble, erasure_bound, mi_lower_bound,
                        outcome_entropy_bound, read_ensemble, state_entropy_bound)
from .codebook_sim import BudgetError, simulate
from .distortion import DistortionMeasure
from .prob_core import Channel
from .rd_solver import SolverOptions, grid_oracle, solve_curve, solve_point

EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_BUDGET = 2, 3, 4


class ConfigError(ValueError):
    pass


def fmt(x) -> str:
    """Shortest ``%g`` text with at least 12 significant digits that reads
    back as the same float."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x) + 0.0
    if not np.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    for digits in range(12, 18):
        text = f"{x:.{digits}g}"
        if float(text) == x:
            return text
    return repr(x)


def parse_list(text: str) -> list[float]:
    """Comma-separated numbers; an item ``a:b:c`` expands to a, a+c, ... <= b."""
    out: list[float] = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" in item:
            out.extend(parse_range(item))
        else:
            try:
                out.append(float(item))
            except ValueError:
                raise ConfigError(f"not a number: {item!r}") from None
    if not out:
        raise ConfigError(f"empty list {text!r}")
    return out


def parse_range(text: str) -> list[float]:
    try:
        start, stop, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise ConfigError(f"range must look like start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"bad range {text!r}")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    # round away the accumulated float error so 0:1:0.1 gives 0.3, not 0.30000000000000004
    return [float(np.round(start + i * step, 12)) for i in range(n)]


def _source(args, mode: str | None = None) -> CdoSource:
    mode = Mode(mode or args.mode)
    if args.ensemble:
        try:
            return read_ensemble(args.ensemble, mode)
        except OSError as exc:
            raise ConfigError(str(exc)) from None
    return coin_ensemble(args.p, args.alpha1, args.alpha2, mode)


def _options(args) -> SolverOptions:
    return SolverOptions(max_iters=args.max_iters, obj_tol=args.obj_tol,
                         restarts=args.restarts, seed=args.seed)


class _Table:
    def __init__(self, args, header):
        self.buf = io.StringIO()
        # where the table goes and how chatty the run is do not change its contents
        skip = ("func", "out", "verbose")
        cfg = " ".join(f"{k}={v}" for k, v in sorted(vars(args).items()) if k not in skip)
        self.buf.write(f"# cdorate {args.command} {cfg}\n")
        self.writer = csv.writer(self.buf, lineterminator="\n")
        self.writer.writerow(header)

    def row(self, *values):
        self.writer.writerow([fmt(v) for v in values])

    def emit(self, out):
        text = self.buf.getvalue()
        if out in (None, "-"):
            sys.stdout.write(text)
        else:
            with open(out, "w", newline="\n") as fh:
                fh.write(text)


def cmd_rd_curve(args) -> int:
    s = _source(args)
    curve = solve_curve(s, DistortionMeasure.from_name(args.measure),
                        parse_list(args.delta or "0:0.3:0.01"), _options(args))
    t = _Table(args, ["delta", "rate", "lambda"])
    for pt in curve.points:
        t.row(pt.delta, pt.rate, pt.lam)
    t.emit(args.out)
    ok = curve.converged and all(pt.feasible for pt in curve.points)
    return 0 if ok else EXIT_CONVERGENCE


def cmd_fig_hidden(args) -> int:
    if args.ensemble:
        raise ConfigError("fig-hidden sweeps the coin family; --ensemble does not apply")
    deltas = parse_list(args.delta or "1e-2,1e-3,1e-4")
    alphas = parse_range(args.alpha2_grid)
    # the dip sits exactly at alpha2 == alpha1, so make sure the grid hits it
    if alphas[0] <= args.alpha1 <= alphas[-1] and not np.any(np.isclose(alphas, args.alpha1,
                                                                           rtol=0, atol=1e-12)):
        alphas = sorted(alphas + [args.alpha1])
    m = DistortionMeasure.from_name(args.measure)
    opts = _options(args)
    t = _Table(args, ["alpha2", "delta", "rate"])
    ok = True
    for a2 in alphas:
        s = coin_ensemble(args.p, args.alpha1, a2, Mode.HIDDEN)
        curve = solve_curve(s, m, deltas, opts)
        ok &= curve.converged and all(pt.feasible for pt in curve.points)
        by_delta = {pt.delta: pt for pt in curve.points}
        for d in deltas:
            t.row(a2, d, by_delta[float(d)].rate)
    t.emit(args.out)
    return 0 if ok else EXIT_CONVERGENCE


def cmd_bounds(args) -> int:
    s = _source(args)
    t = _Table(args, ["state_entropy", "outcome_entropy", "erasure_bound", "mi_lower_bound"])
    t.row(state_entropy_bound(s), outcome_entropy_bound(s), erasure_bound(s), mi_lower_bound(s))
    t.emit(args.out)
    return 0


def cmd_simulate(args) -> int:
    s = _source(args)
    m = DistortionMeasure.from_name(args.measure)
    ok = True
    if args.delta is not None:
        d = parse_list(args.delta)
        if len(d) != 1:
            raise ConfigError("simulate takes a single --delta")
        pt = solve_point(s, m, d[0], _options(args))
        ok = pt.converged and pt.feasible
        channel = pt.channel
    elif s.mode is Mode.VISIBLE:
        channel = s.measurement
    else:
        channel = Channel.identity(s.num_outcomes)
    t = _Table(args, ["L", "R", "trials", "mean_distortion", "overlap_fail_rate"])
    for L in parse_list(args.block_len):
        if L != int(L) or L < 1:
            raise ConfigError(f"block length must be a positive integer, got {L:g}")
        for r in parse_list(args.rate):
            rep = simulate(s, m, channel, int(L), r, args.trials, args.epsilon, args.seed,
                           sub_block=args.sub_block)
            t.row(rep.block_len, rep.rate_bits, rep.trials, rep.mean_distortion,
                  rep.overlap_fail_rate)
    t.emit(args.out)
    return 0 if ok else EXIT_CONVERGENCE


def cmd_oracle(args) -> int:
    base = _source(args, "visible")
    if (base.num_states, base.num_outcomes) != (2, 2):
        raise ConfigError("oracle needs a 2x2 ensemble")
    modes = ["visible", "hidden"] if args.mode_given is None else [args.mode_given]
    m = DistortionMeasure.from_name(args.measure)
    deltas = parse_list(args.delta or "0:0.2:0.02")
    opts = _options(args)
    t = _Table(args, ["mode", "delta", "rate_solver", "rate_oracle", "abs_diff"])
    ok = True
    for mode in modes:
        s = base.with_mode(mode)
        curve = solve_curve(s, m, deltas, opts)
        ok &= curve.converged
        for pt in curve.points:
            oracle = grid_oracle(s, m, pt.delta, step=args.step)
            t.writer.writerow([mode] + [fmt(v) for v in
                                        (pt.delta, pt.rate, oracle, abs(pt.rate - oracle))])
    t.emit(args.out)
    return 0 if ok else EXIT_CONVERGENCE


def _common(p: argparse.ArgumentParser, alpha1: float = 0.1, alpha2: float = 0.9):
    p.add_argument("--p", type=float, default=0.5, help="prior of state 0 (coin family)")
    p.add_argument("--alpha1", type=float, default=alpha1, help="heads probability of state 0")
    p.add_argument("--alpha2", type=float, default=alpha2, help="heads probability of state 1")
    p.add_argument("--ensemble", help="text file: 'M N', prior, then M measurement rows")
    p.add_argument("--measure", choices=["bw", "id"], default="bw")
    p.add_argument("--delta", help="comma list of distortions; items may be start:stop:step")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--max-iters", type=int, default=20000)
    p.add_argument("--obj-tol", type=float, default=1e-10)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cdorate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rd-curve", help="R(delta) on a distortion grid")
    _common(p)
    p.add_argument("--mode", choices=["visible", "hidden"], default="visible")
    p.set_defaults(func=cmd_rd_curve)

    p = sub.add_parser("fig-hidden", help="hidden-source R(delta) across alpha2")
    _common(p, alpha1=1 / 3)
    p.add_argument("--alpha2-grid", default="0:1:0.02", help="start:stop:step")
    p.set_defaults(func=cmd_fig_hidden, mode="hidden")

    p = sub.add_parser("bounds", help="entropy, erasure and mutual-information bounds")
    _common(p)
    p.add_argument("--mode", choices=["visible", "hidden"], default="visible")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", help="random-code Monte Carlo")
    _common(p)
    p.add_argument("--mode", choices=["visible", "hidden"], default="visible")
    p.add_argument("--block-len", default="400", help="comma list of block lengths")
    p.add_argument("--rate", default="0.3,0.45,0.64,0.8", help="comma list of code rates")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--sub-block", type=int, default=None,
                   help="length of the independently coded pieces (default: whole block)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="solver against a brute-force grid search (2x2 only)")
    _common(p)
    p.add_argument("--mode", dest="mode_given", choices=["visible", "hidden"], default=None,
                   help="one mode only (default: both)")
    p.add_argument("--step", type=float, default=1e-3)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BudgetError as exc:
        print(f"cdorate: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, ValueError) as exc:
        print(f"cdorate: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
