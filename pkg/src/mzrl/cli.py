"""Command-line front end.

Exit status: 0 on success, 1 for a corrupt container or an unreadable file,
2 for invalid arguments (including count rates outside the solver interval).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import re
import sys
from dataclasses import asdict
from typing import List, Optional, Sequence

from . import __version__
from .codec import CorruptStreamError
from .container import (
    bits_to_bytes,
    bytes_to_bits,
    decode_stream,
    encode_stream,
    read_stream,
    write_stream,
)
from .optimizer import solve_constrained, solve_unconstrained
from .recommend import RowError, default_systems, load_systems, recommend
from .sifter import fibre_latency, simulate_session
from .sweep import sweep, write_csv
from .theory import (
    Q_MAX,
    Q_MIN,
    CodeParams,
    DomainError,
    LinkBudget,
    binary_entropy,
    buffer_occupancy,
    count_rate,
    expected_codelength,
    key_consumption,
)

EXIT_CORRUPT = 1
EXIT_USAGE = 2
SEED_ENV = "MZRL_SEED"

_POWER = re.compile(r"^\s*(\d+)\s*(?:\^|\*\*)\s*(\d+)\s*$")


class UsageError(Exception):
    pass


def count_arg(text: str) -> int:
    """Parse a pulse count: ``1000000``, ``1e8`` or ``2^30``."""
    match = _POWER.match(text)
    if match:
        return int(match.group(1)) ** int(match.group(2))
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a count: {text!r}") from None
    if not value.is_integer() or value < 0:
        raise argparse.ArgumentTypeError(f"not a non-negative integer: {text!r}")
    return int(value)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _print_table(rows: List[dict], out=None) -> None:
    out = out or sys.stdout
    if not rows:
        return
    keys = list(rows[0])
    cells = [[_fmt(r[k]) for k in keys] for r in rows]
    widths = [max(len(k), *(len(c[i]) for c in cells)) for i, k in enumerate(keys)]
    print("  ".join(k.rjust(w) for k, w in zip(keys, widths)), file=out)
    for c in cells:
        print("  ".join(v.rjust(w) for v, w in zip(c, widths)), file=out)


def _print_pairs(pairs: dict, out=None) -> None:
    out = out or sys.stdout
    width = max(map(len, pairs))
    for key, value in pairs.items():
        print(f"{key.ljust(width)}  {_fmt(value)}", file=out)


def _write_dict_csv(rows: List[dict], path: str) -> None:
    fh = sys.stdout if path == "-" else open(path, "w", newline="")
    try:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v
                             for k, v in row.items()})
    finally:
        if fh is not sys.stdout:
            fh.close()


# -- solve ------------------------------------------------------------------

def cmd_solve(args) -> int:
    if args.n_max is None:
        res = solve_unconstrained(args.q)
    else:
        res = solve_constrained(args.q, args.n_max)
    if args.json:
        print(json.dumps(res.to_dict(), indent=2))
    else:
        _print_pairs({
            "q": res.q,
            "k_opt": res.k_opt,
            "n_opt": res.n_opt,
            "k": res.params.k,
            "L_opt": res.L_opt,
            "h_q": res.entropy,
            "f": res.efficiency,
            "iterations": res.iterations,
        })
    return 0


# -- encode / decode --------------------------------------------------------

def cmd_encode(args) -> int:
    if args.n is not None:
        params = CodeParams(args.n)
    elif args.q is not None:
        params = solve_unconstrained(args.q).params
    else:
        raise UsageError("encode needs --n or --q")
    with open(args.input, "rb") as fh:
        bits = bytes_to_bits(fh.read())
    stream = encode_stream(bits, params)
    write_stream(args.output, stream)
    print(f"{bits.size} source bits -> {stream.codeword_count} codewords "
          f"x {params.k} bits (n={params.n})", file=sys.stderr)
    return 0


def cmd_decode(args) -> int:
    stream = read_stream(args.input)
    bits = decode_stream(stream)
    with open(args.output, "wb") as fh:
        fh.write(bits_to_bytes(bits))
    return 0


# -- simulate ---------------------------------------------------------------

def _link_from_args(args) -> Optional[LinkBudget]:
    physical = (args.mu, args.loss_db, args.distance)
    if args.mu is None:
        if any(v is not None for v in physical[1:]):
            raise UsageError("link parameters need --mu")
        if args.fibre_latency or any(t for t in (args.t2, args.t3, args.t4, args.t5)):
            return LinkBudget(mu=0.0, d=args.distance or 0.0, t_rf=args.t_rf,
                              t2=args.t2, t3=args.t3, t4=args.t4, t5=args.t5)
        return None
    d = args.distance or 0.0
    t2, t4 = args.t2, args.t4
    if args.fibre_latency:
        t2 = t4 = fibre_latency(d)
    common = dict(eta_d=args.eta_d, p_dark=args.p_dark, t_rf=args.t_rf,
                  t2=t2, t3=args.t3, t4=t4, t5=args.t5)
    if args.loss_db is not None:
        return LinkBudget(mu=args.mu, d=d, combined_loss_db=args.loss_db, **common)
    return LinkBudget(mu=args.mu, alpha=args.alpha, d=d, gamma_bob=args.gamma_bob, **common)


def cmd_simulate(args) -> int:
    link = _link_from_args(args)
    if args.q is not None:
        q = args.q
    elif link is not None and args.mu is not None:
        q = count_rate(link)
    else:
        raise UsageError("simulate needs --q or link parameters (--mu ...)")
    if args.n is not None:
        params = CodeParams(args.n)
    else:
        params = solve_unconstrained(q).params
    if args.analytic:
        L = expected_codelength(params, q)
        f = L / binary_entropy(q)
        row = {
            "mode": "analytic",
            "n": params.n,
            "q": q,
            "source_bits": args.m,
            "code_bits": L * args.m,
            "codelength": L,
            "efficiency": f,
            "key_consumption": key_consumption(args.m, q, f),
            "buffer_bound": buffer_occupancy(params, link or LinkBudget(mu=0.0)),
        }
    else:
        outcome = simulate_session(
            args.m, q, params, link, args.seed,
            driver=args.driver, channel=args.channel, batch=args.batch,
            key_width=args.key_width, collect=False,
        )
        row = {"mode": "simulated", "seed": args.seed, **outcome.report.to_dict()}
    if args.csv:
        _write_dict_csv([row], args.csv)
    if args.json:
        print(json.dumps(row, indent=2))
    elif args.csv != "-":
        _print_pairs(row)
    return 0


# -- sweep ------------------------------------------------------------------

def cmd_sweep(args) -> int:
    rows = sweep(args.q_min, args.q_max, args.points)
    if args.out == "-":
        write_csv(rows, sys.stdout)
    else:
        with open(args.out, "w", newline="") as fh:
            write_csv(rows, fh)
    if args.plot:
        from .plotting import plot_sweep
        plot_sweep(rows, args.plot)
    if args.out != "-":
        its = [r.iterations for r in rows]
        _print_pairs({
            "points": len(rows),
            "max_f": max(r.f for r in rows),
            "max_iterations": max(its),
            "mean_iterations": sum(its) / len(its),
            "csv": args.out,
            **({"figure": args.plot} if args.plot else {}),
        })
    return 0


# -- recommend --------------------------------------------------------------

def cmd_recommend(args) -> int:
    specs = load_systems(args.systems) if args.systems else default_systems()
    recs = [recommend(s) for s in specs]
    rows = [r.row() for r in recs]
    if args.csv:
        _write_dict_csv(rows, args.csv)
    if args.json:
        print(json.dumps(rows, indent=2))
    elif args.csv != "-":
        _print_table(rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mzrl",
        description="MZRL bit-sifting codec, parameter solver and session simulator.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="optimal alphabet size for a count rate")
    p.add_argument("--q", type=float, required=True, help=f"count rate in [{Q_MIN:g}, {Q_MAX:g}]")
    p.add_argument("--n-max", type=count_arg, help="storage cap on the alphabet size")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("encode", help="encode a file, read as a bit string, to a container")
    p.add_argument("input")
    p.add_argument("output")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--n", type=count_arg, help="alphabet size")
    g.add_argument("--q", type=float, help="pick the optimal n for this count rate")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a container back to the original file")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("simulate", help="run a two-party sifting session")
    p.add_argument("--m", type=count_arg, required=True, help="pulses, e.g. 1e8 or 2^30")
    p.add_argument("--q", type=float, help="count rate (otherwise computed from --mu ...)")
    p.add_argument("--n", type=count_arg, help="alphabet size (default: optimal for q)")
    p.add_argument("--seed", type=int, default=int(os.environ.get(SEED_ENV, "0")),
                   help=f"random seed (default ${SEED_ENV} or 0)")
    p.add_argument("--mu", type=float, help="mean photon number")
    p.add_argument("--alpha", type=float, default=0.2, help="fibre loss, dB/km")
    p.add_argument("--distance", type=float, help="fibre length, km")
    p.add_argument("--gamma-bob", type=float, default=0.0, help="receiver loss, dB")
    p.add_argument("--loss-db", type=float, help="combined loss replacing alpha*d + gamma")
    p.add_argument("--eta-d", type=float, default=0.1, help="detector efficiency")
    p.add_argument("--p-dark", type=float, default=0.0, help="dark count probability")
    p.add_argument("--t-rf", type=float, default=1e-9, help="pulse period, s")
    for name in ("t2", "t3", "t4", "t5"):
        p.add_argument(f"--{name}", type=float, default=0.0, help="pipeline latency, s")
    p.add_argument("--fibre-latency", action="store_true",
                   help="set t2 = t4 = distance / (2e8 m/s)")
    p.add_argument("--key-width", type=int, default=1, choices=(1, 2))
    p.add_argument("--driver", choices=("interleaved", "threaded"), default="interleaved")
    p.add_argument("--channel", choices=("memory", "bytes"), default="memory")
    p.add_argument("--batch", action="store_true", help="one message per block of pulses")
    p.add_argument("--analytic", action="store_true",
                   help="report closed-form values instead of simulating")
    p.add_argument("--csv", help="write the report as CSV ('-' for stdout)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="optimal parameters over log-spaced count rates")
    p.add_argument("--q-min", type=float, default=1e-6)
    p.add_argument("--q-max", type=float, default=0.1)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--out", default="-", help="CSV path ('-' for stdout)")
    p.add_argument("--plot", help="also render k_opt, L and f against q to this image")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("recommend", help="storage-aware recommendations per system")
    p.add_argument("--systems", help="parameter CSV (default: bundled reference systems)")
    p.add_argument("--csv", help="write the table as CSV ('-' for stdout)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_recommend)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CorruptStreamError as exc:
        print(f"mzrl: corrupt container: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except OSError as exc:
        print(f"mzrl: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except (DomainError, RowError, UsageError, ValueError) as exc:
        print(f"mzrl: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
