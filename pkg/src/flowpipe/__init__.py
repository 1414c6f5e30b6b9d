"""Streaming batched sampling for time-windowed rectified-flow models.

The package turns per-sample sequential denoising into a pipelined batch
computation: samples at different timesteps advance together through one
model call and one vectorized scheduler step per iteration, and a
dispatcher keeps the whole thing servable by an engine that only accepts
uniform-timestep batches. A benchmark harness ties measured wall time
back to the closed-form throughput model.
"""

from .bench import (
    BenchCase,
    BenchReport,
    BenchRow,
    CostParams,
    emit_csv,
    load_csv,
    predict_times,
    run_benchmark,
)
from .engine import CompiledEngine, EngineStats, adaptive_forward, is_homogeneous
from .errors import (
    ConfigError,
    EngineRefusalError,
    FlowPipeError,
    InvariantError,
    ParameterError,
    StateError,
    TimeDomainError,
)
from .models import (
    AnalyticLinearModel,
    Conditioning,
    ModelOutput,
    SeededMockModel,
    VelocityModel,
    apply_cfg,
    handle_cfg,
    make_conditioning,
)
from .pipeline import (
    DecodedPayload,
    GenerationResult,
    PipelineState,
    RunStats,
    decode_stub,
    generation_noise,
    run_stream,
    run_vanilla,
)
from .schedule import (
    NoiseSchedule,
    TimeWindowSchedule,
    WindowParams,
    build_noise_schedule,
    build_time_window_schedule,
    next_timestep,
    uniform_inference_grid,
    window_lookup,
    window_params,
)
from .velocity import (
    LatentBatch,
    StepStats,
    batched_velocity_step,
    make_latent_batch,
    sequential_velocity_step,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyticLinearModel",
    "BenchCase",
    "BenchReport",
    "BenchRow",
    "CompiledEngine",
    "Conditioning",
    "ConfigError",
    "CostParams",
    "DecodedPayload",
    "EngineRefusalError",
    "EngineStats",
    "FlowPipeError",
    "GenerationResult",
    "InvariantError",
    "LatentBatch",
    "ModelOutput",
    "NoiseSchedule",
    "ParameterError",
    "PipelineState",
    "RunStats",
    "SeededMockModel",
    "StateError",
    "StepStats",
    "TimeDomainError",
    "TimeWindowSchedule",
    "VelocityModel",
    "WindowParams",
    "adaptive_forward",
    "apply_cfg",
    "batched_velocity_step",
    "build_noise_schedule",
    "build_time_window_schedule",
    "decode_stub",
    "emit_csv",
    "generation_noise",
    "handle_cfg",
    "is_homogeneous",
    "load_csv",
    "make_conditioning",
    "make_latent_batch",
    "next_timestep",
    "predict_times",
    "run_benchmark",
    "run_stream",
    "run_vanilla",
    "sequential_velocity_step",
    "uniform_inference_grid",
    "window_lookup",
    "window_params",
]
