"""Streaming generation pipeline and its sequential reference loop.

`run_stream` keeps up to N - 1 in-flight latents in a buffer, admits one
fresh noise sample per iteration, and advances the whole mixed-timestep
batch with a single model call and a single batched scheduler step. After
an N - 1 iteration warmup, exactly one finished generation leaves the
buffer per iteration, so M generations of N steps each complete in
M + N - 1 model calls instead of M * N.

`run_vanilla` generates the same samples one at a time with the scalar
stepping path. Both draw a generation's initial noise from a sub-seed
derived from (run seed, generation index), so the two loops are directly
comparable: the pipeline reorders computation, never changes it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .engine import CompiledEngine, adaptive_forward
from .errors import ParameterError
from .models import Conditioning, ModelOutput, VelocityModel, apply_cfg, handle_cfg
from .schedule import TimeWindowSchedule
from .timing import busy_wait_us
from .velocity import LatentBatch, StepStats, batched_velocity_step, sequential_velocity_step


@dataclass
class BufferEntry:
    """One in-flight generation: latent row, identity, steps taken so far."""

    latent: np.ndarray
    gen_id: int
    stage: int


@dataclass
class PipelineState:
    """Snapshot of the streaming loop, newest buffer entry first.

    Once warmed up, the entry at buffer position p has stage p + 1.
    """

    buffer: list[BufferEntry]
    stage_times: np.ndarray
    emitted: int
    iteration: int


@dataclass(frozen=True)
class DecodedPayload:
    """Stand-in for a decoded image: carries the latent through unchanged."""

    latent: np.ndarray


@dataclass(frozen=True)
class GenerationResult:
    id: int
    latent: np.ndarray
    decoded: DecodedPayload
    iterations_spanned: int


@dataclass
class RunStats:
    """Call and cost accounting for one generation run."""

    model_calls: int = 0
    scheduler_calls: int = 0
    decodes: int = 0
    decode_time_us: float = 0.0
    step_stats: StepStats = field(default_factory=StepStats)

    def merge(self, other: RunStats) -> None:
        self.model_calls += other.model_calls
        self.scheduler_calls += other.scheduler_calls
        self.decodes += other.decodes
        self.decode_time_us += other.decode_time_us
        self.step_stats.merge(other.step_stats)


def decode_stub(latent: np.ndarray, cost_us: float = 0.0) -> DecodedPayload:
    """Identity decode with injected busy-work of `cost_us` microseconds."""
    busy_wait_us(cost_us)
    return DecodedPayload(latent=np.array(latent, copy=True))


def generation_noise(seed: int, gen_id: int, dim: int) -> np.ndarray:
    """Initial noise for one generation, derived from (run seed, id).

    Both generation loops draw from this, which is what makes their
    outputs comparable sample-for-sample.
    """
    return np.random.default_rng([seed, gen_id]).standard_normal(dim)


def _forward(
    model: VelocityModel | CompiledEngine, batch: LatentBatch, cond: Conditioning
) -> ModelOutput:
    if isinstance(model, CompiledEngine):
        return adaptive_forward(model, batch, cond)
    return model.forward(batch, cond)


def _guided_forward(
    model: VelocityModel | CompiledEngine,
    batch: LatentBatch,
    cond: Conditioning,
    stats: RunStats,
) -> np.ndarray:
    if cond.guidance_scale != 1.0:
        doubled, paired = apply_cfg(batch, cond)
        out = handle_cfg(_forward(model, doubled, paired), cond.guidance_scale)
    else:
        out = _forward(model, batch, cond)
    stats.model_calls += 1
    return out.epsilon


def _model_dim(model: VelocityModel | CompiledEngine) -> int:
    return model.inner.dim if isinstance(model, CompiledEngine) else model.dim


def _check_run_args(m: int, n: int, sched: TimeWindowSchedule) -> None:
    if m < 1:
        raise ParameterError(f"need at least one generation, got m={m}")
    if n < 1:
        raise ParameterError(f"need at least one denoising step, got n={n}")
    if sched.num_steps < n:
        raise ParameterError(
            f"inference grid has {sched.num_steps} points, fewer than n={n} steps"
        )


def run_stream(
    m: int,
    n: int,
    model: VelocityModel | CompiledEngine,
    cond: Conditioning,
    seed: int,
    sched: TimeWindowSchedule,
    sched_cost_us: float = 0.0,
    decode_cost_us: float = 0.0,
    dtype: np.dtype | type = np.float64,
    on_iteration: Callable[[PipelineState], None] | None = None,
) -> tuple[list[GenerationResult], RunStats]:
    """Generate `m` samples of `n` steps each through the streaming buffer.

    Runs exactly m + n - 1 iterations. Each iteration admits one fresh
    entrant while any remain, batches it with the buffer (newest first),
    runs one guided model call and one batched scheduler step, then
    retires the oldest entry once it has taken n steps. No new noise is
    admitted during the final drain iterations; the batch simply shrinks.

    `sched_cost_us` and `decode_cost_us` inject busy-work per scheduler
    call and per decode for benchmark runs. `dtype` selects the latent
    arithmetic width (timesteps always stay 64-bit). `on_iteration`
    receives a state snapshot after every iteration.
    """
    _check_run_args(m, n, sched)
    dim = _model_dim(model)
    stage_times = sched.inference_grid[:n].copy()
    stats = RunStats()
    buffer: list[BufferEntry] = []
    results: list[GenerationResult] = []
    next_id = 0
    for j in range(m + n - 1):
        if next_id < m:
            buffer.insert(
                0,
                BufferEntry(
                    latent=generation_noise(seed, next_id, dim).astype(dtype, copy=False),
                    gen_id=next_id,
                    stage=0,
                ),
            )
            next_id += 1
        batch = LatentBatch(
            data=np.stack([e.latent for e in buffer], axis=0),
            timesteps=stage_times[[e.stage for e in buffer]],
            ids=np.asarray([e.gen_id for e in buffer], dtype=np.int64),
        )
        epsilon = _guided_forward(model, batch, cond, stats)
        if sched_cost_us > 0.0:
            busy_wait_us(sched_cost_us)
        stepped = batched_velocity_step(epsilon, batch, sched, stats.step_stats)
        stats.scheduler_calls += 1
        for i, entry in enumerate(buffer):
            entry.latent = stepped.data[i]
            entry.stage += 1
        if buffer[-1].stage == n:
            done = buffer.pop()
            decoded = decode_stub(done.latent, decode_cost_us)
            stats.decodes += 1
            stats.decode_time_us += decode_cost_us
            results.append(
                GenerationResult(
                    id=done.gen_id,
                    latent=done.latent,
                    decoded=decoded,
                    iterations_spanned=j - done.gen_id + 1,
                )
            )
        if on_iteration is not None:
            on_iteration(
                PipelineState(
                    buffer=[
                        BufferEntry(latent=e.latent, gen_id=e.gen_id, stage=e.stage)
                        for e in buffer
                    ],
                    stage_times=stage_times,
                    emitted=len(results),
                    iteration=j,
                )
            )
    return results, stats


def run_vanilla(
    m: int,
    n: int,
    model: VelocityModel | CompiledEngine,
    cond: Conditioning,
    seed: int,
    sched: TimeWindowSchedule,
    sched_cost_us: float = 0.0,
    decode_cost_us: float = 0.0,
) -> tuple[list[GenerationResult], RunStats]:
    """Sequential reference loop: one generation at a time, scalar steps.

    Costs m * n model calls. Noise per generation matches `run_stream`,
    so final latents agree sample-for-sample.
    """
    _check_run_args(m, n, sched)
    dim = _model_dim(model)
    stats = RunStats()
    results: list[GenerationResult] = []
    for g in range(m):
        latent = generation_noise(seed, g, dim)
        t = float(sched.inference_grid[0])
        for _ in range(n):
            batch = LatentBatch(
                data=latent[None, :],
                timesteps=np.asarray([t]),
                ids=np.asarray([g], dtype=np.int64),
            )
            epsilon = _guided_forward(model, batch, cond, stats)
            if sched_cost_us > 0.0:
                busy_wait_us(sched_cost_us)
            latent, t = sequential_velocity_step(
                epsilon[0], latent, t, sched, stats.step_stats
            )
            stats.scheduler_calls += 1
        decoded = decode_stub(latent, decode_cost_us)
        stats.decodes += 1
        stats.decode_time_us += decode_cost_us
        results.append(
            GenerationResult(
                id=g, latent=latent, decoded=decoded, iterations_spanned=n
            )
        )
    return results, stats
