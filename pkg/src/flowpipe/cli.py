"""Command-line entry point: generate, verify, bench, and cost subcommands."""

from __future__ import annotations

import argparse
import sys

from .bench import BenchCase, emit_csv, predict_times, run_benchmark
from .config import (
    build_conditioning,
    build_costs,
    build_runner,
    build_schedule,
    latent_dtype,
    load_config,
)
from .errors import FlowPipeError
from .pipeline import run_stream
from .verify import run_verification

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowpipe",
        description="Streaming batched sampling for windowed rectified-flow models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="run the streaming pipeline and emit latents")
    gen.add_argument("--config", default=None, help="config file path")
    gen.add_argument("--num-images", type=int, default=None, help="generations to produce")
    gen.add_argument("--steps", type=int, default=None, help="denoising steps per image")
    gen.add_argument("--seed", type=int, default=None, help="root seed")
    gen.add_argument("--guidance", type=float, default=None, help="guidance scale w")
    gen.add_argument(
        "--engine", choices=("none", "compiled"), default=None,
        help="serve model calls through the compiled engine",
    )
    gen.add_argument("--out", default=None, help="output CSV path (default: stdout)")

    ver = sub.add_parser("verify", help="run the equivalence self-checks")
    ver.add_argument("--config", default=None, help="config file path")

    ben = sub.add_parser("bench", help="measure both loops against the cost model")
    ben.add_argument("--config", default=None, help="config file path")
    ben.add_argument("--reps", type=int, default=None, help="repetitions per case")
    ben.add_argument("--csv", default=None, help="write the report to this CSV path")

    cost = sub.add_parser("cost", help="print the closed-form time predictions")
    cost.add_argument("--config", default=None, help="config file path")
    cost.add_argument("--m", type=int, required=True, help="number of generations")
    cost.add_argument("--n", type=int, required=True, help="steps per generation")
    return parser


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.num_images is not None:
        cfg.pipeline.num_images = args.num_images
    if args.steps is not None:
        cfg.pipeline.steps = args.steps
    if args.seed is not None:
        cfg.pipeline.seed = args.seed
    if args.guidance is not None:
        cfg.pipeline.guidance = args.guidance
    if args.engine is not None:
        cfg.engine.engine = args.engine
    sched = build_schedule(cfg)
    runner = build_runner(cfg)
    model = runner.inner if hasattr(runner, "inner") else runner
    cond = build_conditioning(cfg, model)
    results, _ = run_stream(
        cfg.pipeline.num_images,
        cfg.pipeline.steps,
        runner,
        cond,
        cfg.pipeline.seed,
        sched,
        dtype=latent_dtype(cfg),
    )
    lines = ["id,dim,values..."]
    for r in results:
        values = ",".join(repr(float(v)) for v in r.latent)
        lines.append(f"{r.id},{len(r.latent)},{values}")
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    checks = run_verification(cfg)
    width = max(len(c.name) for c in checks) + 2
    for c in checks:
        status = "pass" if c.passed else "FAIL"
        print(f"{c.name:<{width}}{status}  {c.detail}")
    if all(c.passed for c in checks):
        print("all checks passed")
        return EXIT_OK
    print("verification failed")
    return EXIT_CHECK_FAILED


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.reps is not None:
        cfg.bench.reps = args.reps
    costs = build_costs(cfg)
    cases = [BenchCase(label=f"{m}x{n}", m=m, n=n) for m, n in cfg.bench.cases]
    report = run_benchmark(cases, costs, repetitions=cfg.bench.reps, seed=cfg.pipeline.seed)
    for row in report.rows:
        print(
            f"{row.label}: measured {row.meas_vanilla_us / 1e3:.1f} ms vanilla / "
            f"{row.meas_ours_us / 1e3:.1f} ms ours, speedup {row.speedup:.2f}x "
            f"(predicted {row.pred_vanilla_us / row.pred_ours_us:.2f}x)"
        )
    if args.csv is not None:
        emit_csv(report, args.csv)
        print(f"report written to {args.csv}")
    return EXIT_OK


def cmd_cost(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    costs = build_costs(cfg)
    t_vanilla, t_ours = predict_times(args.m, args.n, costs)
    print(f"m={args.m} n={args.n}")
    print(f"predicted vanilla: {t_vanilla:.1f} us")
    print(f"predicted ours:    {t_ours:.1f} us")
    print(f"predicted speedup: {t_vanilla / t_ours:.4f}x")
    return EXIT_OK


_COMMANDS = {
    "generate": cmd_generate,
    "verify": cmd_verify,
    "bench": cmd_bench,
    "cost": cmd_cost,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except FlowPipeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
