"""Analytic throughput model and wall-clock benchmark harness.

The closed forms compare the two generation loops for M samples at N
steps: the sequential loop pays per-sample cost, the streaming loop
amortizes model calls across samples,

    t_vanilla = M * (N * c_unet + N * c_sched + c_vae)
    t_ours    = (M + N - 1) * (c_unet + c_sched) + M * c_vae

so with c_unet dominant the speedup approaches N as M grows. The harness
injects the same costs as busy-work into real runs and reports measured
medians next to the predictions.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field

from .errors import ParameterError
from .models import SeededMockModel, make_conditioning
from .pipeline import run_stream, run_vanilla
from .schedule import build_noise_schedule, build_time_window_schedule
from .timing import now_us

DEFAULT_O_TRT_US = 10.0
DEFAULT_TRT_SPEED_FACTOR = 0.3


@dataclass(frozen=True)
class CostParams:
    """Per-operation simulated costs, all in microseconds."""

    c_unet_us: float
    c_sched_us: float
    c_vae_us: float
    o_trt_us: float = DEFAULT_O_TRT_US
    trt_speed_factor: float = DEFAULT_TRT_SPEED_FACTOR

    def validate(self) -> None:
        for name in ("c_unet_us", "c_sched_us", "c_vae_us", "o_trt_us"):
            if getattr(self, name) < 0.0:
                raise ParameterError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0.0 < self.trt_speed_factor <= 1.0:
            raise ParameterError(
                f"trt_speed_factor must be in (0, 1], got {self.trt_speed_factor}"
            )


@dataclass(frozen=True)
class BenchCase:
    """One benchmark configuration: a label and the (m, n) pair."""

    label: str
    m: int
    n: int


@dataclass(frozen=True)
class BenchRow:
    label: str
    m: int
    n: int
    pred_vanilla_us: float
    pred_ours_us: float
    meas_vanilla_us: float
    meas_ours_us: float
    speedup: float


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)


def predict_times(m: int, n: int, costs: CostParams) -> tuple[float, float]:
    """Closed-form (t_vanilla_us, t_ours_us) for m generations of n steps."""
    if m < 1 or n < 1:
        raise ParameterError(f"m and n must be >= 1, got ({m}, {n})")
    t_vanilla = m * (n * costs.c_unet_us + n * costs.c_sched_us + costs.c_vae_us)
    t_ours = (m + n - 1) * (costs.c_unet_us + costs.c_sched_us) + m * costs.c_vae_us
    return t_vanilla, t_ours


def run_benchmark(
    cases: list[BenchCase],
    costs: CostParams,
    repetitions: int = 5,
    seed: int = 0,
    dim: int = 8,
) -> BenchReport:
    """Measure both loops for each case with `costs` injected as busy-work.

    Per case: build a mock model whose per-call cost is c_unet, run the
    sequential and streaming loops `repetitions` times each, and record
    the median wall-clock time of each loop beside the closed-form
    predictions. Guidance stays disabled so one iteration means one
    model call, matching the cost model's accounting.
    """
    if repetitions < 1:
        raise ParameterError(f"repetitions must be >= 1, got {repetitions}")
    costs.validate()
    report = BenchReport()
    noise = build_noise_schedule()
    for case in cases:
        if case.m < 1 or case.n < 1:
            raise ParameterError(f"case {case.label}: m and n must be >= 1")
        sched = build_time_window_schedule(
            noise_schedule=noise, inference_steps=case.n
        )
        model = SeededMockModel(dim=dim, cost_us=costs.c_unet_us, seed=seed)
        cond = make_conditioning(embedding=[0.0] * model.embed_dim)
        vanilla_times = []
        stream_times = []
        for _ in range(repetitions):
            t0 = now_us()
            run_vanilla(
                case.m, case.n, model, cond, seed, sched,
                sched_cost_us=costs.c_sched_us, decode_cost_us=costs.c_vae_us,
            )
            t1 = now_us()
            run_stream(
                case.m, case.n, model, cond, seed, sched,
                sched_cost_us=costs.c_sched_us, decode_cost_us=costs.c_vae_us,
            )
            t2 = now_us()
            vanilla_times.append(t1 - t0)
            stream_times.append(t2 - t1)
        meas_vanilla = statistics.median(vanilla_times)
        meas_ours = statistics.median(stream_times)
        pred_vanilla, pred_ours = predict_times(case.m, case.n, costs)
        report.rows.append(
            BenchRow(
                label=case.label,
                m=case.m,
                n=case.n,
                pred_vanilla_us=pred_vanilla,
                pred_ours_us=pred_ours,
                meas_vanilla_us=meas_vanilla,
                meas_ours_us=meas_ours,
                speedup=meas_vanilla / meas_ours,
            )
        )
    return report


CSV_HEADER = "label,m,n,pred_vanilla_us,pred_ours_us,meas_vanilla_us,meas_ours_us,speedup"


def emit_csv(report: BenchReport, path: str) -> None:
    """Write the report as CSV, one row per case, in report order.

    Floats are written with full repr precision so a parse of the file
    reproduces the report exactly.
    """
    lines = [CSV_HEADER]
    for r in report.rows:
        if "," in r.label or "\n" in r.label:
            raise ParameterError(f"case label {r.label!r} must not contain , or newline")
        lines.append(
            f"{r.label},{r.m},{r.n},{r.pred_vanilla_us!r},{r.pred_ours_us!r},"
            f"{r.meas_vanilla_us!r},{r.meas_ours_us!r},{r.speedup!r}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_csv(path: str) -> BenchReport:
    """Parse a file written by emit_csv back into a BenchReport."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    if not lines or lines[0] != CSV_HEADER:
        raise ParameterError(f"{path}: missing or unexpected CSV header")
    report = BenchReport()
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 8:
            raise ParameterError(f"{path}: malformed row {ln!r}")
        report.rows.append(
            BenchRow(
                label=parts[0],
                m=int(parts[1]),
                n=int(parts[2]),
                pred_vanilla_us=float(parts[3]),
                pred_ours_us=float(parts[4]),
                meas_vanilla_us=float(parts[5]),
                meas_ours_us=float(parts[6]),
                speedup=float(parts[7]),
            )
        )
    return report
