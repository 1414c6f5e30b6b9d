"""Homogeneous-batch engine simulation and runtime dispatch.

A statically compiled inference engine fixes one computation path for the
whole batch, so it can only serve batches whose samples share a timestep.
`CompiledEngine` models that constraint around an ordinary model: it
refuses mixed-timestep batches outright, runs faster than the wrapped
model by `speed_factor`, and charges a fixed overhead per call.
`adaptive_forward` is the dispatcher that makes the constraint invisible:
homogeneous batches go through whole, anything else is split into
single-sample calls and reassembled in input order.

No code generation happens here; the speedup and overhead are simulated
by busy-waiting, which preserves every measurable property (call counts,
overhead trade-offs) without a compiler toolchain.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .errors import EngineRefusalError, InvariantError, ParameterError
from .models import Conditioning, ModelOutput, VelocityModel
from .schedule import DEFAULT_EPS
from .timing import busy_wait_us
from .velocity import LatentBatch

DEFAULT_SPEED_FACTOR = 0.3
DEFAULT_OVERHEAD_US = 10.0


@dataclass
class EngineStats:
    """Dispatch accounting.

    `calls_homogeneous` and `calls_decomposed` count dispatch events by
    kind (a decomposed event spans B engine invocations, counted once
    here). `total_simulated_time_us` accumulates the analytic cost of
    every engine call; counts never decrease.
    """

    calls_homogeneous: int = 0
    calls_decomposed: int = 0
    total_simulated_time_us: float = 0.0


def is_homogeneous(ts: np.ndarray, eps: float = DEFAULT_EPS) -> bool:
    """True iff all timesteps agree within `eps` (max - min <= eps)."""
    ts = np.asarray(ts)
    if ts.size == 0:
        raise ParameterError("timestep vector must be non-empty")
    return float(ts.max()) - float(ts.min()) <= eps


class CompiledEngine:
    """Model wrapper enforcing the homogeneous-batch contract.

    `forward` serves a uniform-timestep batch at `speed_factor` times the
    wrapped model's cost plus `per_call_overhead_us`, and raises
    EngineRefusalError for anything else. Counter updates are
    lock-protected; `forward` itself is reentrant.
    """

    def __init__(
        self,
        inner: VelocityModel,
        per_call_overhead_us: float = DEFAULT_OVERHEAD_US,
        speed_factor: float = DEFAULT_SPEED_FACTOR,
        eps: float = DEFAULT_EPS,
    ):
        if per_call_overhead_us < 0.0:
            raise ParameterError(
                f"per_call_overhead_us must be >= 0, got {per_call_overhead_us}"
            )
        if not 0.0 < speed_factor <= 1.0:
            raise ParameterError(f"speed_factor must be in (0, 1], got {speed_factor}")
        self.inner = inner
        self.per_call_overhead_us = per_call_overhead_us
        self.speed_factor = speed_factor
        self.eps = eps
        self.invocations = 0
        self.rejected = 0
        self.stats = EngineStats()
        self._lock = threading.Lock()

    @property
    def call_cost_us(self) -> float:
        return self.per_call_overhead_us + self.speed_factor * self.inner.cost_us

    def forward(self, batch: LatentBatch, cond: Conditioning) -> ModelOutput:
        if batch.batch_size == 0:
            raise ParameterError("batch must be non-empty")
        if not is_homogeneous(batch.timesteps, self.eps):
            with self._lock:
                self.rejected += 1
            raise EngineRefusalError(
                "compiled engine requires a uniform timestep across the batch; "
                f"got spread {float(batch.timesteps.max() - batch.timesteps.min())}"
            )
        cost = self.call_cost_us
        with self._lock:
            self.invocations += 1
            self.stats.total_simulated_time_us += cost
        busy_wait_us(cost)
        return self.inner._compute(batch, cond)


def _row_slice(batch: LatentBatch, cond: Conditioning, i: int) -> tuple[LatentBatch, Conditioning]:
    sub = LatentBatch(
        data=batch.data[i : i + 1],
        timesteps=batch.timesteps[i : i + 1],
        ids=batch.ids[i : i + 1],
    )
    if cond.row_embeddings is None:
        return sub, cond
    sub_cond = Conditioning(
        embedding=cond.embedding,
        guidance_scale=cond.guidance_scale,
        negative_embedding=cond.negative_embedding,
        row_embeddings=cond.row_embeddings[i : i + 1],
    )
    return sub, sub_cond


def adaptive_forward(
    engine: CompiledEngine, batch: LatentBatch, cond: Conditioning
) -> ModelOutput:
    """Serve any batch through the homogeneous-only engine.

    Uniform-timestep batches pass through in one engine call; mixed
    batches are decomposed into B single-sample calls whose outputs are
    concatenated in input order, secondary outputs field-wise. For
    per-sample-independent models the result is identical to calling the
    unconstrained model on the whole batch.
    """
    if batch.batch_size == 0:
        raise ParameterError("batch must be non-empty")
    if is_homogeneous(batch.timesteps, engine.eps):
        try:
            out = engine.forward(batch, cond)
        except EngineRefusalError as exc:
            raise InvariantError(
                "engine refused a batch the dispatcher judged homogeneous"
            ) from exc
        with engine._lock:
            engine.stats.calls_homogeneous += 1
        return out
    outs = [engine.forward(*_row_slice(batch, cond, i)) for i in range(batch.batch_size)]
    with engine._lock:
        engine.stats.calls_decomposed += 1
    epsilon = np.concatenate([o.epsilon for o in outs], axis=0)
    aux = None
    if outs[0].aux is not None:
        aux = [
            np.concatenate([o.aux[k] for o in outs], axis=0)
            for k in range(len(outs[0].aux))
        ]
    return ModelOutput(epsilon=epsilon, aux=aux)
