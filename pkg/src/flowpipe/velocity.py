"""Velocity-field Euler stepping for batches at mixed timesteps.

`batched_velocity_step` advances every sample of a batch by one grid step
in a single vectorized pass, even when the samples sit at different flow
times. `sequential_velocity_step` is the single-sample reference path,
written with plain Python scalars and per-coordinate loops so the two
implementations share no array code; tests hold them equal.

Both paths evaluate the window algebra in the same literal expression
order, so results agree bit-for-bit, not merely to tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .schedule import (
    TimeWindowSchedule,
    next_timestep,
    scalar_alpha_bar,
    scalar_next_timestep,
    scalar_window_bounds,
    window_params,
)


@dataclass(frozen=True)
class LatentBatch:
    """B latent rows with a parallel timestep vector and generation ids."""

    data: np.ndarray
    timesteps: np.ndarray
    ids: np.ndarray

    @property
    def batch_size(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def validate(self) -> None:
        if self.data.ndim != 2:
            raise ParameterError(f"data must be 2-D, got shape {self.data.shape}")
        b = self.data.shape[0]
        if len(self.timesteps) != b or len(self.ids) != b:
            raise ParameterError(
                f"row mismatch: {b} latents, {len(self.timesteps)} timesteps, "
                f"{len(self.ids)} ids"
            )
        if np.any(self.timesteps < 0.0) or np.any(self.timesteps > 1.0):
            raise ParameterError("timesteps must lie in [0, 1]")


def make_latent_batch(
    data: np.ndarray, timesteps: np.ndarray, ids: np.ndarray
) -> LatentBatch:
    batch = LatentBatch(
        data=np.asarray(data, dtype=np.float64),
        timesteps=np.asarray(timesteps, dtype=np.float64),
        ids=np.asarray(ids, dtype=np.int64),
    )
    batch.validate()
    return batch


@dataclass
class StepStats:
    """Operation counts for the stepping path.

    `param_evals` counts per-sample window-parameter computations (B per
    batched call). `elementwise_ops` counts full elementwise passes over
    the B x D latent block (three per step: endpoint prediction, velocity,
    Euler update). Both only ever grow; merge run-local instances
    explicitly rather than sharing one across threads.
    """

    param_evals: int = 0
    elementwise_ops: int = 0
    scheduler_calls: int = field(default=0)

    def merge(self, other: StepStats) -> None:
        self.param_evals += other.param_evals
        self.elementwise_ops += other.elementwise_ops
        self.scheduler_calls += other.scheduler_calls


def batched_velocity_step(
    model_out: np.ndarray,
    batch: LatentBatch,
    sched: TimeWindowSchedule,
    stats: StepStats | None = None,
) -> LatentBatch:
    """Advance every sample one grid step using its own window parameters.

    Per sample: predict the window-endpoint state
    ``x_pred = lambda_t * x + eta_t * eps``, convert it to a velocity
    ``v = (x_pred - x) / (t_e - t)``, and take an Euler step to the next
    grid time. A sample sitting at its window end (within `eps`) has
    ``v = 0``; its latent is carried forward unchanged.

    Raises ParameterError on shape mismatch and TimeDomainError for
    timesteps off the inference grid.
    """
    if model_out.shape != batch.data.shape:
        raise ParameterError(
            f"model output shape {model_out.shape} != batch shape {batch.data.shape}"
        )
    ts = batch.timesteps
    t_next = next_timestep(ts, sched)
    params = window_params(ts, sched)
    x = batch.data
    # elementwise arithmetic follows the latent dtype; the casts are no-ops
    # in the 64-bit reference path and real downcasts in 32-bit mode
    lam = params.lambda_t.astype(x.dtype, copy=False)
    eta = params.eta_t.astype(x.dtype, copy=False)
    eps_hat = model_out.astype(x.dtype, copy=False)
    span64 = params.t_e - ts
    at_end = span64 <= sched.eps
    x_pred = lam[:, None] * x + eta[:, None] * eps_hat
    span = span64.astype(x.dtype, copy=False)
    v = np.zeros_like(x)
    np.divide(x_pred - x, span[:, None], out=v, where=~at_end[:, None])
    dt = (t_next - ts).astype(x.dtype, copy=False)
    x_next = x + dt[:, None] * v
    if stats is not None:
        stats.param_evals += batch.batch_size
        stats.elementwise_ops += 3
        stats.scheduler_calls += 1
    return LatentBatch(data=x_next, timesteps=t_next, ids=batch.ids)


def sequential_velocity_step(
    model_out: np.ndarray,
    latent: np.ndarray,
    t: float,
    sched: TimeWindowSchedule,
    stats: StepStats | None = None,
) -> tuple[np.ndarray, float]:
    """Single-sample reference step over plain scalars.

    `latent` and `model_out` are single rows of equal length. Returns the
    updated row and the successor grid time. Window lookup, the noise-table
    read, and the grid successor all go through the linear-scan scalar
    helpers, independent of the vectorized machinery.
    """
    x_row = np.asarray(model_out, dtype=np.float64).reshape(-1)
    lat_row = np.asarray(latent, dtype=np.float64).reshape(-1)
    if x_row.shape != lat_row.shape:
        raise ParameterError(
            f"model output length {x_row.shape[0]} != latent length {lat_row.shape[0]}"
        )
    t_s, t_e = scalar_window_bounds(t, sched)
    a_s = scalar_alpha_bar(t_s, sched)
    a_e = scalar_alpha_bar(t_e, sched)
    gamma = math.sqrt(a_s / a_e)
    lambda_s = 1.0 / gamma
    eta_s = -math.sqrt(1.0 - gamma * gamma) / gamma
    denom = lambda_s * (t - t_s) + (t_e - t)
    lambda_t = lambda_s * (t_e - t_s) / denom
    eta_t = eta_s * (t_e - t) / denom
    t_next = scalar_next_timestep(t, sched)
    span = t_e - t
    dt = t_next - t
    out = []
    for j in range(len(lat_row)):
        xj = float(lat_row[j])
        ej = float(x_row[j])
        x_pred = lambda_t * xj + eta_t * ej
        v = 0.0 if span <= sched.eps else (x_pred - xj) / span
        out.append(xj + dt * v)
    if stats is not None:
        stats.param_evals += 1
        stats.elementwise_ops += 3
        stats.scheduler_calls += 1
    return np.asarray(out, dtype=np.float64), t_next
