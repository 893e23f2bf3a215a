"""Command-line driver.

    qlga converge   --config run.cfg --out results/
    qlga equiv      [--corrupt-sign]
    qlga complexity --variant basic --L 2,4,8
    qlga evolve     --config run.cfg --out snaps/

Exit codes: 0 success, 1 usage or configuration error, 2 acceptance failure.
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

from . import bench
from .evolution import Variant, evolve, norm_observer, step_duration
from .spinor import total_norm, write_snapshot

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _int_list(text):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qlga", description="Quantum lattice-gas Dirac simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", type=Path, help="run configuration file")
        p.add_argument("--threads", type=int, help="worker threads (overrides config)")
        p.add_argument("--out", type=Path, help="output directory (overrides config)")
        p.add_argument("--format", choices=("csv", "svg", "both"), help="output format")

    p = sub.add_parser("converge", help="convergence sweep against the exact solution")
    common(p)
    p.add_argument("--variant", action="append", choices=[v.value for v in Variant],
                   help="variant(s) to sweep; repeat to overlay several (default: config)")
    p.add_argument("--L", type=_int_list, help="override the L sweep, e.g. 64,128,256")

    p = sub.add_parser("equiv", help="second-quantized equivalence suite")
    common(p)
    p.add_argument("--L", type=int, default=8, help="one-particle lattice size")
    p.add_argument("--steps", type=int, default=100, help="two-particle steps")
    p.add_argument("--corrupt-sign", action="store_true",
                   help="flip the collision sign convention (negative control)")

    p = sub.add_parser("complexity", help="operation-count table")
    common(p)
    p.add_argument("--variant", action="append", choices=[v.value for v in Variant])
    p.add_argument("--L", type=_int_list, default=(2, 4, 8, 16, 32))

    p = sub.add_parser("evolve", help="single run with snapshots")
    common(p)
    p.add_argument("--L", type=int, help="lattice size (default: first config value)")
    return parser


def _config(args) -> bench.RunConfig:
    config = bench.load_config(args.config) if args.config else bench.RunConfig()
    updates = {}
    if args.threads is not None:
        updates["threads"] = args.threads
    if args.out is not None:
        updates["out"] = str(args.out)
    if args.format is not None:
        updates["format"] = args.format
    return replace(config, **updates).validate()


def cmd_converge(args) -> int:
    config = _config(args)
    if args.L:
        config = replace(config, L=args.L).validate()
    variants = [Variant(v) for v in args.variant] if args.variant else [config.variant]
    results = [bench.run_convergence(replace(config, variant=v)) for v in variants]
    for res in results:
        print(f"# {res.variant.value}: op counts are "
              f"{'3D' if config.dimensionality == 3 else '1D (2 rho_c L + rho_s (L-1))'}")
        print(bench.convergence_csv(res), end="")
        print(f"# slope {res.slope:.4f}" + (f"  ({res.note})" if res.note else ""))
    bench.write_convergence(results, config.out, config.format)
    return EXIT_OK if all(r.converged for r in results) else EXIT_FAILED


def cmd_equiv(args) -> int:
    report = bench.run_equivalence(L=args.L, steps=args.steps, corrupt_sign=args.corrupt_sign)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_complexity(args) -> int:
    variants = [Variant(v) for v in args.variant] if args.variant else list(Variant)
    rows = bench.report_complexity(variants, args.L)
    text = bench.complexity_csv(rows)
    print(text, end="")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "complexity.csv").write_text(text)
    return EXIT_OK


def cmd_evolve(args) -> int:
    config = _config(args)
    L = args.L or config.L[0]
    params = bench.lattice_params(config, L)
    psi = bench.initial_field(config, L)
    steps = max(1, round(config.end_time / step_duration(config.variant, params)))
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    every = config.cadence if config.cadence > 0 else steps
    done = 0
    norms = [(0, total_norm(psi))]
    write_snapshot(psi, out / f"snapshot_{0:07d}.qlga")
    while done < steps:
        chunk = min(every, steps - done)
        psi, _ = evolve(psi, params, config.variant, chunk, pairing=config.pairing,
                        phase=config.phase, threads=config.threads)
        done += chunk
        write_snapshot(psi, out / f"snapshot_{done:07d}.qlga")
        norms.append((done, total_norm(psi)))
    with open(out / "norms.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("step", "time", "norm"))
        for n, value in norms:
            writer.writerow((n, repr(n * step_duration(config.variant, params)), repr(value)))
    print(f"{config.variant.value} L={L}: {steps} steps, final norm {norms[-1][1]:.15f}")
    return EXIT_OK


COMMANDS = {"converge": cmd_converge, "equiv": cmd_equiv, "complexity": cmd_complexity,
            "evolve": cmd_evolve}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except (UsageError, bench.ConfigError, OSError) as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:   # --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
