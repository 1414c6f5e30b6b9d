"""Run configuration: a small line-oriented key = value format.

Files hold ``key = value`` lines grouped under ``[section]`` headers, with
``#`` comments and blank lines ignored. Every key must belong to a known
section and every section to the known set; anything else is rejected
with the offending line number, since a silently ignored typo in a cost
or seed would corrupt a benchmark without any visible failure.

Example::

    [schedule]
    num_windows = 4
    eps = 1e-6

    [pipeline]
    num_images = 8
    steps = 4
    seed = 7

Omitted keys and sections keep their defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bench import CostParams, DEFAULT_O_TRT_US, DEFAULT_TRT_SPEED_FACTOR
from .engine import DEFAULT_OVERHEAD_US, DEFAULT_SPEED_FACTOR, CompiledEngine
from .errors import ConfigError
from .models import (
    AnalyticLinearModel,
    Conditioning,
    SeededMockModel,
    VelocityModel,
    make_conditioning,
)
from .schedule import (
    DEFAULT_BETA_END,
    DEFAULT_BETA_START,
    DEFAULT_EPS,
    DEFAULT_NUM_WINDOWS,
    DEFAULT_T_MAX,
    TimeWindowSchedule,
    build_noise_schedule,
    build_time_window_schedule,
)

# sub-seed stream for the conditioning embedding; generation noise uses
# [seed, g] with g < num_images, so this must stay out of that range
_CONDITIONING_STREAM = 2**32 - 1


@dataclass
class ScheduleConfig:
    t_max: int = DEFAULT_T_MAX
    beta_start: float = DEFAULT_BETA_START
    beta_end: float = DEFAULT_BETA_END
    num_windows: int = DEFAULT_NUM_WINDOWS
    boundaries: list[float] | None = None
    eps: float = DEFAULT_EPS
    inference_steps: int | None = None


@dataclass
class ModelConfig:
    model: str = "mock"
    dim: int = 16
    cost_us_per_call: float = 0.0


@dataclass
class EngineConfig:
    engine: str = "none"
    trt_overhead_us: float = DEFAULT_OVERHEAD_US
    trt_speed_factor: float = DEFAULT_SPEED_FACTOR


@dataclass
class PipelineConfig:
    num_images: int = 4
    steps: int = 4
    seed: int = 0
    guidance: float = 1.0
    dtype: str = "float64"


@dataclass
class BenchConfig:
    c_unet_us: float = 10_000.0
    c_sched_us: float = 1_000.0
    c_vae_us: float = 5_000.0
    o_trt_us: float = DEFAULT_O_TRT_US
    trt_speed_factor: float = DEFAULT_TRT_SPEED_FACTOR
    reps: int = 5
    cases: list[tuple[int, int]] = field(default_factory=lambda: [(10, 4), (50, 4)])


@dataclass
class RunConfig:
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)


def _parse_float_list(raw: str, line: int) -> list[float]:
    try:
        return [float(tok) for tok in raw.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {raw!r}", line) from exc


def _parse_cases(raw: str, line: int) -> list[tuple[int, int]]:
    cases = []
    for tok in raw.split(","):
        tok = tok.strip()
        if not tok:
            continue
        parts = tok.lower().split("x")
        if len(parts) != 2:
            raise ConfigError(f"expected MxN case syntax, got {tok!r}", line)
        try:
            cases.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise ConfigError(f"expected MxN case syntax, got {tok!r}", line) from exc
    if not cases:
        raise ConfigError("cases list is empty", line)
    return cases


def _conv_int(raw: str, line: int) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {raw!r}", line) from exc


def _conv_float(raw: str, line: int) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"expected a number, got {raw!r}", line) from exc


def _conv_choice(options: tuple[str, ...]):
    def conv(raw: str, line: int) -> str:
        if raw not in options:
            raise ConfigError(f"expected one of {'|'.join(options)}, got {raw!r}", line)
        return raw

    return conv


# section -> key -> (attribute, converter)
_SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "schedule": {
        "t_max": ("t_max", _conv_int),
        "beta_start": ("beta_start", _conv_float),
        "beta_end": ("beta_end", _conv_float),
        "num_windows": ("num_windows", _conv_int),
        "boundaries": ("boundaries", _parse_float_list),
        "eps": ("eps", _conv_float),
        "inference_steps": ("inference_steps", _conv_int),
    },
    "model": {
        "model": ("model", _conv_choice(("analytic", "mock"))),
        "dim": ("dim", _conv_int),
        "cost_us_per_call": ("cost_us_per_call", _conv_float),
    },
    "engine": {
        "engine": ("engine", _conv_choice(("none", "compiled"))),
        "trt_overhead_us": ("trt_overhead_us", _conv_float),
        "trt_speed_factor": ("trt_speed_factor", _conv_float),
    },
    "pipeline": {
        "num_images": ("num_images", _conv_int),
        "steps": ("steps", _conv_int),
        "seed": ("seed", _conv_int),
        "guidance": ("guidance", _conv_float),
        "dtype": ("dtype", _conv_choice(("float64", "float32"))),
    },
    "bench": {
        "c_unet_us": ("c_unet_us", _conv_float),
        "c_sched_us": ("c_sched_us", _conv_float),
        "c_vae_us": ("c_vae_us", _conv_float),
        "o_trt_us": ("o_trt_us", _conv_float),
        "trt_speed_factor": ("trt_speed_factor", _conv_float),
        "reps": ("reps", _conv_int),
        "cases": ("cases", _parse_cases),
    },
}


def parse_config(text: str) -> RunConfig:
    """Parse config text, rejecting unknown sections and keys."""
    cfg = RunConfig()
    section: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SCHEMA:
                raise ConfigError(f"unknown section [{name}]", lineno)
            section = name
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {line!r}", lineno)
        if section is None:
            raise ConfigError("key outside any [section]", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        schema = _SCHEMA[section]
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} in section [{section}]", lineno)
        attr, conv = schema[key]
        setattr(getattr(cfg, section), attr, conv(value, lineno))
    return cfg


def load_config(path: str | None) -> RunConfig:
    """Read and parse a config file; None yields all defaults."""
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def build_schedule(cfg: RunConfig) -> TimeWindowSchedule:
    """Realize the TimeWindowSchedule a config describes.

    The inference grid defaults to one uniform point per pipeline step
    when `inference_steps` is not given explicitly.
    """
    steps = cfg.schedule.inference_steps
    if steps is None:
        steps = cfg.pipeline.steps
    noise = build_noise_schedule(
        t_max=cfg.schedule.t_max,
        beta_start=cfg.schedule.beta_start,
        beta_end=cfg.schedule.beta_end,
    )
    return build_time_window_schedule(
        noise_schedule=noise,
        num_windows=cfg.schedule.num_windows,
        boundaries=cfg.schedule.boundaries,
        eps=cfg.schedule.eps,
        inference_steps=steps,
    )


def build_model(cfg: RunConfig) -> VelocityModel:
    if cfg.model.model == "analytic":
        return AnalyticLinearModel(dim=cfg.model.dim, cost_us=cfg.model.cost_us_per_call)
    return SeededMockModel(
        dim=cfg.model.dim,
        cost_us=cfg.model.cost_us_per_call,
        seed=cfg.pipeline.seed,
    )


def build_runner(cfg: RunConfig) -> VelocityModel | CompiledEngine:
    """Model, optionally wrapped in the compiled engine, per config."""
    model = build_model(cfg)
    if cfg.engine.engine == "compiled":
        return CompiledEngine(
            inner=model,
            per_call_overhead_us=cfg.engine.trt_overhead_us,
            speed_factor=cfg.engine.trt_speed_factor,
            eps=cfg.schedule.eps,
        )
    return model


def build_conditioning(cfg: RunConfig, model: VelocityModel) -> Conditioning:
    """Seed-derived conditioning embedding of the model's declared width."""
    embedding = np.random.default_rng(
        [cfg.pipeline.seed, _CONDITIONING_STREAM]
    ).standard_normal(model.embed_dim)
    return make_conditioning(embedding=embedding, guidance_scale=cfg.pipeline.guidance)


def build_costs(cfg: RunConfig) -> CostParams:
    costs = CostParams(
        c_unet_us=cfg.bench.c_unet_us,
        c_sched_us=cfg.bench.c_sched_us,
        c_vae_us=cfg.bench.c_vae_us,
        o_trt_us=cfg.bench.o_trt_us,
        trt_speed_factor=cfg.bench.trt_speed_factor,
    )
    costs.validate()
    return costs


def latent_dtype(cfg: RunConfig) -> type:
    return np.float32 if cfg.pipeline.dtype == "float32" else np.float64
