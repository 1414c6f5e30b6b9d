"""Self-check suites: the three equivalence properties the design rests on.

Each check compares an optimized path against its reference on freshly
drawn random inputs: the batched stepper against the scalar stepper, the
streaming pipeline against the sequential loop, and the dispatched engine
against the unconstrained model. All three must agree for the stack to be
trustworthy, so the CLI exposes them as one command.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import (
    RunConfig,
    build_conditioning,
    build_model,
    build_schedule,
)
from .engine import CompiledEngine, adaptive_forward
from .models import AnalyticLinearModel, make_conditioning
from .pipeline import run_stream, run_vanilla
from .velocity import LatentBatch, batched_velocity_step, sequential_velocity_step

_CHECK_SEED = 1234


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.maximum(np.abs(b), 1e-300)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def check_scheduler_equivalence(cfg: RunConfig, batches: int = 50) -> CheckResult:
    """Batched stepping must match per-sample scalar stepping."""
    sched = build_schedule(cfg)
    dim = cfg.model.dim
    rng = np.random.default_rng(_CHECK_SEED)
    worst = 0.0
    for _ in range(batches):
        b = int(rng.integers(1, 17))
        ts = rng.choice(sched.inference_grid, size=b)
        batch = LatentBatch(
            data=rng.standard_normal((b, dim)),
            timesteps=ts,
            ids=np.arange(b, dtype=np.int64),
        )
        model_out = rng.standard_normal((b, dim))
        stepped = batched_velocity_step(model_out, batch, sched)
        for i in range(b):
            row, t_next = sequential_velocity_step(
                model_out[i], batch.data[i], float(ts[i]), sched
            )
            worst = max(worst, _rel_err(stepped.data[i], row))
            if t_next != stepped.timesteps[i]:
                return CheckResult(
                    "scheduler batched vs sequential",
                    False,
                    f"successor time mismatch at t={ts[i]}",
                )
    passed = worst <= 1e-9
    return CheckResult(
        "scheduler batched vs sequential",
        passed,
        f"{batches} batches, max rel err {worst:.2e}",
    )


def check_pipeline_equivalence(cfg: RunConfig) -> CheckResult:
    """Streaming and sequential loops must produce the same samples."""
    sched = build_schedule(cfg)
    model = build_model(cfg)
    cond = build_conditioning(cfg, model)
    m, n = cfg.pipeline.num_images, cfg.pipeline.steps
    seed = cfg.pipeline.seed
    runner = model
    if cfg.engine.engine == "compiled":
        runner = CompiledEngine(
            inner=model,
            per_call_overhead_us=cfg.engine.trt_overhead_us,
            speed_factor=cfg.engine.trt_speed_factor,
            eps=cfg.schedule.eps,
        )
    stream_res, stream_stats = run_stream(m, n, runner, cond, seed, sched)
    vanilla_res, vanilla_stats = run_vanilla(m, n, model, cond, seed, sched)
    by_id = {r.id: r.latent for r in vanilla_res}
    worst = max(_rel_err(r.latent, by_id[r.id]) for r in stream_res)
    if stream_stats.model_calls != m + n - 1:
        return CheckResult(
            "pipeline stream vs vanilla",
            False,
            f"stream made {stream_stats.model_calls} model calls, expected {m + n - 1}",
        )
    if vanilla_stats.model_calls != m * n:
        return CheckResult(
            "pipeline stream vs vanilla",
            False,
            f"vanilla made {vanilla_stats.model_calls} model calls, expected {m * n}",
        )
    passed = worst <= 1e-9
    return CheckResult(
        "pipeline stream vs vanilla",
        passed,
        f"m={m} n={n}, {stream_stats.model_calls} vs {vanilla_stats.model_calls} "
        f"model calls, max rel err {worst:.2e}",
    )


def check_dispatch_equivalence(cfg: RunConfig, batches: int = 100) -> CheckResult:
    """Dispatched engine output must be bit-identical to the plain model."""
    sched = build_schedule(cfg)
    model = build_model(cfg)
    engine = CompiledEngine(
        inner=model,
        per_call_overhead_us=0.0,
        speed_factor=cfg.engine.trt_speed_factor,
        eps=cfg.schedule.eps,
    )
    cond = make_conditioning(embedding=np.zeros(model.embed_dim))
    rng = np.random.default_rng(_CHECK_SEED + 1)
    for _ in range(batches):
        b = int(rng.integers(1, 9))
        if rng.random() < 0.5:
            ts = np.full(b, float(rng.choice(sched.inference_grid)))
        else:
            ts = rng.choice(sched.inference_grid, size=b)
        batch = LatentBatch(
            data=rng.standard_normal((b, model.dim)),
            timesteps=ts,
            ids=np.arange(b, dtype=np.int64),
        )
        before = engine.invocations
        out = adaptive_forward(engine, batch, cond)
        made = engine.invocations - before
        expect = 1 if float(ts.max() - ts.min()) <= engine.eps else b
        if made != expect:
            return CheckResult(
                "engine adaptive dispatch",
                False,
                f"{made} engine calls for batch of {b}, expected {expect}",
            )
        direct = model._compute(batch, cond)
        if not np.array_equal(out.epsilon, direct.epsilon):
            return CheckResult(
                "engine adaptive dispatch", False, "output differs from plain model"
            )
    # secondary-output concatenation through the decomposed path
    aux_model = AnalyticLinearModel(dim=cfg.model.dim, aux_scales=(0.5,))
    aux_engine = CompiledEngine(inner=aux_model, per_call_overhead_us=0.0)
    aux_cond = make_conditioning(embedding=np.zeros(aux_model.embed_dim))
    ts = sched.inference_grid[: min(3, sched.num_steps)]
    batch = LatentBatch(
        data=rng.standard_normal((len(ts), aux_model.dim)),
        timesteps=np.array(ts),
        ids=np.arange(len(ts), dtype=np.int64),
    )
    out = adaptive_forward(aux_engine, batch, aux_cond)
    direct = aux_model._compute(batch, aux_cond)
    aux_ok = (
        out.aux is not None
        and len(out.aux) == 1
        and np.array_equal(out.aux[0], direct.aux[0])
    )
    if not aux_ok:
        return CheckResult(
            "engine adaptive dispatch", False, "secondary outputs mangled by dispatch"
        )
    return CheckResult(
        "engine adaptive dispatch",
        True,
        f"{batches} batches bit-identical, secondary outputs preserved",
    )


def run_verification(cfg: RunConfig) -> list[CheckResult]:
    return [
        check_scheduler_equivalence(cfg),
        check_pipeline_equivalence(cfg),
        check_dispatch_equivalence(cfg),
    ]
