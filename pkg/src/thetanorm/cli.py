"""Command-line entry point: ``thetanorm <subcommand> ...``.

Every output begins with a ``#`` block echoing the resolved configuration.
Thread count and memory budget are left out of the echo because they never
change results, which keeps outputs byte-identical across ``--threads``.
"""
from __future__ import annotations

import argparse
import contextlib
import logging
import math
import sys

import numpy as np

from . import __version__
from .additive import DEFAULT_MEMORY_BUDGET, iter_segments, load_spec, write_values_csv
from .blocks import Block, census_chunks, chi_square, count_formula, write_census_csv, write_count_csv
from .classify import DEFAULT_DELTA, DEFAULT_EPS_GRID, bias_demo, classify, ek_stats, write_classify_csv, write_ek_csv
from .digits import STREAM_MAGIC, LengthSchedule, check_base, from_binary, from_text, iter_stream, stream_length, to_binary, to_text
from .errors import ConfigError, NumericError, PreconditionError, ResourceBudgetError
from .expsum import decay_profile, exp_sum, phase_prediction, sd_main_term, write_expsum_csv

log = logging.getLogger("thetanorm")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
_NOT_ECHOED = {"threads", "memory_budget", "out", "func", "verbose"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def number(text: str) -> int:
    """Integer flag that also accepts scientific notation such as ``1e8``."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v) or v != int(v):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(v)


def int_list(text: str) -> list[int]:
    return [number(t) for t in text.split(",") if t.strip()]


def float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def decades(text: str) -> list[int]:
    lo, _, hi = text.partition(":")
    return [10 ** e for e in range(int(lo), int(hi) + 1)]


def _grid(args) -> list[int]:
    if getattr(args, "decades", None):
        return args.decades
    if getattr(args, "grid", None):
        return args.grid
    if getattr(args, "max", None) is not None:
        return [args.max]
    raise ConfigError("give --max, --grid or --decades")


def config_header(args) -> str:
    items = {k: v for k, v in vars(args).items() if k not in _NOT_ECHOED}
    items["version"] = __version__
    lines = []
    for k in sorted(items):
        v = items[k]
        if isinstance(v, (list, tuple)):
            v = ",".join(str(t) for t in v)
        lines.append(f"# {k}={v}")
    return "\n".join(lines) + "\n"


@contextlib.contextmanager
def _output(path, binary=False):
    if path in (None, "-"):
        if binary:
            yield sys.stdout.buffer
        else:
            yield sys.stdout
        return
    with open(path, "wb" if binary else "w", newline=None if binary else "") as fh:
        yield fh


def _schedule(args) -> LengthSchedule:
    return LengthSchedule(args.y, check_base(args.base), args.force_K)


def _synthetic_note(args) -> str:
    return "# synthetic_K=true\n" if getattr(args, "force_K", None) else ""


def cmd_sieve(args):
    spec = load_spec(args.f)
    hi = args.max + 1
    with _output(args.out) as fh:
        fh.write(config_header(args))
        if spec.c_estimated:
            fh.write(f"# c_estimated={spec.c}\n")
        write_values_csv(fh, iter_segments(spec, args.lo, hi, threads=args.threads,
                                           memory_budget=args.memory_budget))


def cmd_stream(args):
    spec = load_spec(args.f)
    sched = _schedule(args)
    n = stream_length(sched, args.max)
    if n > args.memory_budget:
        raise ResourceBudgetError(f"stream of {n} digits exceeds budget {args.memory_budget}")
    chunks = iter_stream(spec, sched, args.max, threads=args.threads)
    header = config_header(args) + _synthetic_note(args)
    if args.format == "binary":
        digits = np.concatenate(list(chunks))
        with _output(args.out, binary=True) as fh:
            fh.write(to_binary(digits, sched.base))
        if args.out not in (None, "-"):
            with open(args.out + ".cfg", "w") as fh:
                fh.write(header)
    else:
        with _output(args.out) as fh:
            fh.write(header)
            for chunk in chunks:
                fh.write(to_text(chunk))
            fh.write("\n")


def read_stream(path, base=None):
    """Digits and base from a text stream (``#`` lines skipped) or a binary stream."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:2] == STREAM_MAGIC:
        digits, b = from_binary(blob)
        if base is not None and base != b:
            raise ConfigError(f"--base {base} disagrees with the file's base {b}")
        return digits, b
    if base is None:
        raise ConfigError("--base is required for text streams")
    text = "".join(line for line in blob.decode("ascii", errors="replace").splitlines()
                   if not line.startswith("#"))
    return from_text(text, base), base


def cmd_census(args):
    digits, base = read_stream(args.input, args.base)
    chunk = 1 << 24
    c = census_chunks((digits[i:i + chunk] for i in range(0, len(digits), chunk)), args.k, base)
    with _output(args.out) as fh:
        fh.write(config_header(args))
        if c.positions:
            fh.write(f"# chi2_per_position={chi_square(c) / c.positions!r}\n")
        write_census_csv(fh, c)


def cmd_count(args):
    spec = load_spec(args.f)
    sched = _schedule(args)
    block = Block.parse(args.block, sched.base)
    reports = [count_formula(spec, sched, block, x, eps=args.eps, threads=args.threads) for x in _grid(args)]
    with _output(args.out) as fh:
        fh.write(config_header(args) + _synthetic_note(args))
        write_count_csv(fh, reports)


def cmd_expsum(args):
    spec = load_spec(args.f)
    grid = _grid(args)
    rec = exp_sum(spec, args.a, args.m, args.base, grid, threads=args.threads)
    extra = []
    if args.predict == "sd":
        pred = sd_main_term(spec, args.a, args.m, args.base, grid, P=args.P)
        preds = pred.main_terms
        extra.append(f"# c_prime={pred.c_prime!r}")
        extra.append(f"# euler_last_increment={pred.last_increment!r}")
        extra.append(f"# euler_tail_estimate={pred.tail_estimate!r}")
        if not pred.converged:
            extra.append("# warning=euler product tail above tolerance")
    else:
        preds = phase_prediction(spec.c, args.a, args.m, args.base, grid)
    prof = decay_profile(rec)
    extra.append(f"# decay_verdict={prof.verdict}")
    if prof.slope is not None:
        extra.append(f"# decay_slope_loglog={prof.slope!r}")
    with _output(args.out) as fh:
        fh.write(config_header(args) + "\n".join(extra) + "\n")
        write_expsum_csv(fh, rec, preds)


def cmd_classify(args):
    spec = load_spec(args.f)
    rep = classify(spec, c=args.c, delta=args.delta, eps_grid=args.eps_grid, x_grid=_grid(args))
    with _output(args.out) as fh:
        fh.write(config_header(args))
        fh.write(f"# acp_verdict={rep.acp_verdict}\n# weak_verdict={rep.weak_verdict}\n")
        fh.write("# note=verdicts are finite-grid consistency checks, not proofs of the limit properties\n")
        write_classify_csv(fh, rep)


def cmd_ekstats(args):
    spec = load_spec(args.f)
    rep = ek_stats(spec, args.max, threads=args.threads)
    with _output(args.out) as fh:
        fh.write(config_header(args))
        write_ek_csv(fh, rep)


def cmd_biasdemo(args):
    spec = load_spec(args.f)
    c = bias_demo(spec, check_base(args.base), args.max, args.window, threads=args.threads)
    with _output(args.out) as fh:
        fh.write(config_header(args))
        write_census_csv(fh, c)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="thetanorm", description="Truncated-digit concatenations of additive functions.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, spec=True):
        if spec:
            sp.add_argument("--f", required=True, help="built-in name (Omega, omega) or spec file path")
        sp.add_argument("--out", default="-", help="output path, '-' for standard output")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
        sp.add_argument("--memory-budget", type=number, default=DEFAULT_MEMORY_BUDGET, help="bytes")
        sp.add_argument("-v", "--verbose", action="store_true")

    def schedule(sp):
        sp.add_argument("--base", type=int, default=10)
        sp.add_argument("--y", type=float, default=0.5)
        sp.add_argument("--force-K", dest="force_K", type=int, default=None,
                        help="synthetic constant truncation length")

    def grid(sp, required_max=False):
        sp.add_argument("--max", type=number, required=required_max)
        if not required_max:
            sp.add_argument("--grid", type=int_list, help="comma-separated x values")
            sp.add_argument("--decades", type=decades, help="LO:HI gives 10^LO .. 10^HI")

    sp = sub.add_parser("sieve", help="emit n,f(n) CSV")
    common(sp)
    sp.add_argument("--lo", type=number, default=1)
    grid(sp, required_max=True)
    sp.set_defaults(func=cmd_sieve)

    sp = sub.add_parser("stream", help="emit a prefix of theta_{f,y}")
    common(sp)
    schedule(sp)
    grid(sp, required_max=True)
    sp.add_argument("--format", choices=("text", "binary"), default="text")
    sp.set_defaults(func=cmd_stream)

    sp = sub.add_parser("census", help="block statistics of a stream file")
    common(sp, spec=False)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--base", type=int, default=None)
    sp.add_argument("--k", type=int, default=1)
    sp.set_defaults(func=cmd_census)

    sp = sub.add_parser("count", help="N* versus the indicator-sum count for one block")
    common(sp)
    schedule(sp)
    grid(sp)
    sp.add_argument("--block", required=True)
    sp.add_argument("--eps", type=float, default=0.1)
    sp.set_defaults(func=cmd_count)

    sp = sub.add_parser("expsum", help="exponential sums with Selberg-Delange or phase predictions")
    common(sp)
    grid(sp)
    sp.add_argument("--base", type=int, default=10)
    sp.add_argument("--a", type=int, default=1)
    sp.add_argument("--m", type=int, default=1)
    sp.add_argument("--P", type=number, default=10**6, help="Euler product prime bound")
    sp.add_argument("--predict", choices=("sd", "phase"), default="sd")
    sp.set_defaults(func=cmd_expsum)

    sp = sub.add_parser("classify", help="almost-constant-on-primes and weak-additivity diagnostics")
    common(sp)
    grid(sp)
    sp.add_argument("--c", type=float, default=None)
    sp.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    sp.add_argument("--eps-grid", type=float_list, default=list(DEFAULT_EPS_GRID))
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("ekstats", help="histogram and Erdos-Kac concentration of f(n)")
    common(sp)
    grid(sp, required_max=True)
    sp.set_defaults(func=cmd_ekstats)

    sp = sub.add_parser("biasdemo", help="digit census at fixed high positions of f(n)")
    common(sp)
    grid(sp, required_max=True)
    sp.add_argument("--base", type=int, default=2)
    sp.add_argument("--window", type=int_list, default=[4], help="digit positions, 1 = least significant")
    sp.set_defaults(func=cmd_biasdemo)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        args.func(args)
    except (ConfigError, PreconditionError, argparse.ArgumentTypeError) as exc:
        print(f"thetanorm: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ResourceBudgetError, NumericError, MemoryError, OverflowError) as exc:
        print(f"thetanorm: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main():
    sys.exit(run())
