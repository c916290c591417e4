"""Command-line entry points.

Exit codes: 0 success, 1 configuration/IO error, 2 runtime failure,
3 oracle/acceptance failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import harness, kernels, oracles


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # config-style errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="batchmpc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario, write log + summary")
    run.add_argument("config", type=Path)
    run.add_argument("--out", type=Path, default=None, help="output directory (default runs/<config-stem>)")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--emit-candidates", action="store_true", help="log candidate trajectories per cycle")
    run.add_argument("--progress", action="store_true")

    bench = sub.add_parser("bench-batch", help="batch-size scaling sweep, writes timing.csv")
    bench.add_argument("config", type=Path)
    bench.add_argument("--sizes", default="11,22,44")
    bench.add_argument("--cycles", type=int, default=30, help="MPC cycles per size")
    bench.add_argument("--out", type=Path, default=None)
    bench.add_argument("--seed", type=int, default=None)

    oracle = sub.add_parser("oracle", help="run brute-force oracle comparisons")
    oracle.add_argument("suite", choices=sorted(oracles.SUITES))

    summ = sub.add_parser("summarize", help="recompute the summary of a run log")
    summ.add_argument("log", type=Path)
    summ.add_argument("--out", type=Path, default=None, help="write JSON here instead of stdout")

    kern = sub.add_parser("bench-kernels", help="compare compiled and numpy kernel backends")
    kern.add_argument("--repeats", type=int, default=5)
    kern.add_argument("--iters", type=int, default=100)
    kern.add_argument("--out", type=Path, default=None, help="optional CSV output")
    return parser


def _cmd_run(args) -> int:
    cfg = harness.load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = args.out or Path("runs") / args.config.stem
    try:
        log = harness.run_scenario(cfg, emit_candidates=args.emit_candidates, progress=args.progress)
    except harness.ScenarioAborted as exc:
        if exc.log.records:
            harness.write_log(exc.log, out)
            print(f"flushed partial log ({len(exc.log.records)} cycles) to {out}", file=sys.stderr)
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    paths = harness.write_log(log, out)
    summary = harness.summarize(log)
    print(f"wrote {paths['run']}, {paths['times']}, {paths['summary']}")
    print(
        f"cycles={summary.cycles} collisions={summary.collision_count} "
        f"meta_cost mean/min/max = {summary.meta_cost.mean:.4f}/{summary.meta_cost.min:.4f}/{summary.meta_cost.max:.4f} "
        f"solve_time mean = {summary.solve_time.mean:.4f}s"
    )
    return 0


def _cmd_bench_batch(args) -> int:
    cfg = harness.load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s]
    except ValueError:
        print(f"error: --sizes must be comma-separated integers, got {args.sizes!r}", file=sys.stderr)
        return 1
    if not sizes:
        print("error: --sizes is empty", file=sys.stderr)
        return 1
    rows = harness.bench_batch(cfg, sizes, cycles=args.cycles)
    out = args.out or Path("runs") / f"{args.config.stem}-bench"
    out.mkdir(parents=True, exist_ok=True)
    path = out / "timing.csv"
    harness.write_timing_csv(rows, path)
    print(f"wrote {path}")
    for row in rows:
        print(
            f"l={row['l']:>3}  mean={row['mean']*1e3:8.2f} ms  "
            f"min={row['min']*1e3:8.2f} ms  max={row['max']*1e3:8.2f} ms"
        )
    return 0


def _cmd_oracle(args) -> int:
    ok, lines = oracles.run_suite(args.suite)
    for line in lines:
        print(line)
    return 0 if ok else 3


def _cmd_summarize(args) -> int:
    log = harness.read_log(args.log)
    summary = harness.summarize(log).to_dict()
    text = json.dumps(summary, indent=2, sort_keys=True)
    if args.out:
        args.out.write_text(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def _cmd_bench_kernels(args) -> int:
    from .oracles import demo_solver, make_demo_batch

    solver = demo_solver()
    batch = make_demo_batch(solver, l=11, seed=0)
    rows = []
    for backend in kernels.available_backends():
        with kernels.use_backend(backend):
            best = float("inf")
            for _ in range(args.repeats):
                start = time.perf_counter()
                solver.solve(batch, max_iter=args.iters, tol=0.0)
                best = min(best, time.perf_counter() - start)
        per_iter = best / args.iters
        rows.append({"backend": backend, "solve_s": best, "per_iter_ms": per_iter * 1e3})
        print(f"{backend:>9}: {best:.4f} s / {args.iters} iters  ({per_iter*1e3:.3f} ms per iteration)")
    if len(rows) == 2:
        ratio = rows[0]["solve_s"] / rows[1]["solve_s"]
        faster, slower = ("numpy", "compiled") if ratio < 1 else ("compiled", "numpy")
        print(f"speedup: {max(ratio, 1/ratio):.2f}x ({faster} over {slower})")
    if args.out:
        import csv

        with open(args.out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["backend", "solve_s", "per_iter_ms"])
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "bench-batch": _cmd_bench_batch,
    "oracle": _cmd_oracle,
    "summarize": _cmd_summarize,
    "bench-kernels": _cmd_bench_kernels,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - unexpected runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
