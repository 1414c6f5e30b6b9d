"""Noise schedule, time-window partition, and per-timestep window parameters.

All public APIs speak normalized flow time ``t`` in ``[0, 1]``, ascending
from pure noise (``t = 0``) to data (``t = 1``). The diffusion-style noise
table is indexed the opposite way (index 0 is the cleanest train step), so
flow time maps to a table index via ``idx(t) = round((1 - t) * (t_max - 1))``
with round-half-up. This is the only orientation under which the window
denominators stay positive and ``gamma <= 1`` holds with a standard
decreasing alpha-bar table.

The unit interval is partitioned into ``K`` non-overlapping windows by an
ascending boundary vector ``[e_0 .. e_K]`` with ``e_0 = 0`` and ``e_K = 1``.
A timestep within ``eps`` of a boundary belongs to the lower window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvariantError, ParameterError, TimeDomainError

DEFAULT_T_MAX = 1000
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02
DEFAULT_NUM_WINDOWS = 4
DEFAULT_EPS = 1e-6
DEFAULT_INFERENCE_STEPS = 4


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-train-step diffusion rates and their running product.

    ``alphas_cumprod[i]`` is the product of ``1 - betas[j]`` for ``j <= i``.
    Schedules produced by :func:`build_noise_schedule` always have strictly
    decreasing ``alphas_cumprod``; direct construction skips validation so
    degenerate tables (e.g. constant alpha-bar) can be built for testing.
    """

    betas: np.ndarray
    alphas_cumprod: np.ndarray
    t_max: int

    def validate(self) -> None:
        if self.t_max < 2:
            raise ParameterError(f"t_max must be >= 2, got {self.t_max}")
        if len(self.betas) != self.t_max or len(self.alphas_cumprod) != self.t_max:
            raise ParameterError(
                "betas and alphas_cumprod must both have length t_max "
                f"({self.t_max}); got {len(self.betas)} and {len(self.alphas_cumprod)}"
            )
        if np.any(self.betas <= 0.0) or np.any(self.betas >= 1.0):
            raise ParameterError("all betas must lie in (0, 1)")
        if np.any(self.alphas_cumprod <= 0.0) or np.any(self.alphas_cumprod > 1.0):
            raise ParameterError("alphas_cumprod must lie in (0, 1]")
        if np.any(np.diff(self.alphas_cumprod) >= 0.0):
            raise ParameterError("alphas_cumprod must be strictly decreasing")


def build_noise_schedule(
    t_max: int = DEFAULT_T_MAX,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> NoiseSchedule:
    """Linear beta schedule from `beta_start` to `beta_end` over `t_max` steps.

    Raises ParameterError unless ``t_max >= 2`` and
    ``0 < beta_start <= beta_end < 1``.
    """
    if t_max < 2:
        raise ParameterError(f"t_max must be >= 2, got {t_max}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ParameterError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    betas = np.linspace(beta_start, beta_end, t_max, dtype=np.float64)
    sched = NoiseSchedule(
        betas=betas, alphas_cumprod=np.cumprod(1.0 - betas), t_max=t_max
    )
    sched.validate()
    return sched


@dataclass(frozen=True)
class TimeWindowSchedule:
    """Window partition of flow time plus the inference timestep grid.

    ``boundaries`` holds ``K + 1`` ascending values with first 0 and last 1;
    window ``k`` spans ``[boundaries[k], boundaries[k + 1]]``.
    ``inference_grid`` holds the strictly increasing flow times at which
    sampling steps are taken; the successor of the last grid point is the
    terminal time 1.0.
    """

    boundaries: np.ndarray
    eps: float
    noise_schedule: NoiseSchedule
    inference_grid: np.ndarray

    @property
    def num_windows(self) -> int:
        return len(self.boundaries) - 1

    @property
    def num_steps(self) -> int:
        return len(self.inference_grid)

    def validate(self) -> None:
        b = self.boundaries
        if len(b) < 2:
            raise ParameterError("need at least one window (two boundaries)")
        if b[0] != 0.0 or b[-1] != 1.0:
            raise ParameterError("boundaries must start at 0 and end at 1")
        widths = np.diff(b)
        if np.any(widths <= 0.0):
            raise ParameterError("boundaries must be strictly increasing")
        if self.eps <= 0.0:
            raise ParameterError(f"eps must be > 0, got {self.eps}")
        if self.eps >= float(widths.min()) / 2.0:
            raise ParameterError(
                f"eps ({self.eps}) must be smaller than half the narrowest "
                f"window ({float(widths.min()) / 2.0})"
            )
        g = self.inference_grid
        if len(g) < 1:
            raise ParameterError("inference grid must not be empty")
        if np.any(g < 0.0) or np.any(g > 1.0):
            raise ParameterError("inference grid values must lie in [0, 1]")
        if len(g) > 1 and np.any(np.diff(g) <= 0.0):
            raise ParameterError("inference grid must be strictly increasing")


def uniform_inference_grid(num_steps: int) -> np.ndarray:
    """Evenly spaced stepping times ``i / num_steps`` for ``i = 0 .. num_steps - 1``."""
    if num_steps < 1:
        raise ParameterError(f"num_steps must be >= 1, got {num_steps}")
    return np.arange(num_steps, dtype=np.float64) / float(num_steps)


def build_time_window_schedule(
    noise_schedule: NoiseSchedule | None = None,
    num_windows: int = DEFAULT_NUM_WINDOWS,
    boundaries: np.ndarray | list[float] | None = None,
    eps: float = DEFAULT_EPS,
    inference_steps: int = DEFAULT_INFERENCE_STEPS,
    inference_grid: np.ndarray | list[float] | None = None,
) -> TimeWindowSchedule:
    """Assemble a validated TimeWindowSchedule.

    Explicit `boundaries` override `num_windows` (which produces equal-width
    windows); an explicit `inference_grid` overrides `inference_steps`
    (which produces the uniform grid).
    """
    if noise_schedule is None:
        noise_schedule = build_noise_schedule()
    if boundaries is None:
        if num_windows < 1:
            raise ParameterError(f"num_windows must be >= 1, got {num_windows}")
        bounds = np.linspace(0.0, 1.0, num_windows + 1, dtype=np.float64)
    else:
        bounds = np.asarray(boundaries, dtype=np.float64)
    if inference_grid is None:
        grid = uniform_inference_grid(inference_steps)
    else:
        grid = np.asarray(inference_grid, dtype=np.float64)
    sched = TimeWindowSchedule(
        boundaries=bounds, eps=eps, noise_schedule=noise_schedule, inference_grid=grid
    )
    sched.validate()
    return sched


@dataclass(frozen=True)
class WindowParams:
    """Window coefficients for a batch of timesteps, one entry per sample.

    ``lambda_s = 1 / gamma`` and ``eta_s = -sqrt(1 - gamma^2) / gamma`` map a
    latent and a model output to the predicted state at the window end when
    evaluated at the window start; ``lambda_t`` and ``eta_t`` interpolate
    those coefficients to the actual timestep each sample sits at.
    """

    t_s: np.ndarray
    t_e: np.ndarray
    gamma: np.ndarray
    lambda_s: np.ndarray
    eta_s: np.ndarray
    lambda_t: np.ndarray
    eta_t: np.ndarray


def _check_time_range(ts: np.ndarray) -> None:
    if np.any(ts < 0.0) or np.any(ts > 1.0):
        bad = ts[(ts < 0.0) | (ts > 1.0)]
        raise TimeDomainError(f"timesteps outside [0, 1]: {bad[:4]}")


def alpha_bar_index(ts: np.ndarray, t_max: int) -> np.ndarray:
    """Map flow times to noise-table indices, round-half-up, clamped."""
    raw = (1.0 - ts) * float(t_max - 1)
    idx = np.floor(raw + 0.5).astype(np.int64)
    return np.clip(idx, 0, t_max - 1)


def window_lookup(ts: np.ndarray | list[float], sched: TimeWindowSchedule) -> np.ndarray:
    """Window index for each timestep, boundary values going to the lower window.

    Vectorized as a masked count: ``k_i`` is the number of interior
    boundaries strictly below ``t_i`` (beyond the `eps` tolerance), which
    lands every ``t`` in ``[0, K - 1]``.
    """
    ts = np.asarray(ts, dtype=np.float64)
    _check_time_range(ts)
    interior = sched.boundaries[1:-1]
    if interior.size == 0:
        return np.zeros(ts.shape, dtype=np.int64)
    mask = ts[..., None] > (interior + sched.eps)
    return mask.sum(axis=-1).astype(np.int64)


def window_params(ts: np.ndarray | list[float], sched: TimeWindowSchedule) -> WindowParams:
    """Vectorized window coefficients for a batch of flow times.

    Per sample: find the containing window ``[t_s, t_e]``, form
    ``gamma = sqrt(abar[idx(t_s)] / abar[idx(t_e)])``, then interpolate

        denom    = lambda_s * (t - t_s) + (t_e - t)
        lambda_t = lambda_s * (t_e - t_s) / denom
        eta_t    = eta_s * (t_e - t) / denom

    elementwise across the batch.
    """
    ts = np.asarray(ts, dtype=np.float64)
    k = window_lookup(ts, sched)
    t_s = sched.boundaries[k]
    t_e = sched.boundaries[k + 1]
    abar = sched.noise_schedule.alphas_cumprod
    t_max = sched.noise_schedule.t_max
    a_s = abar[alpha_bar_index(t_s, t_max)]
    a_e = abar[alpha_bar_index(t_e, t_max)]
    gamma = np.sqrt(a_s / a_e)
    lambda_s = 1.0 / gamma
    eta_s = -np.sqrt(1.0 - gamma * gamma) / gamma
    denom = lambda_s * (ts - t_s) + (t_e - ts)
    if np.any(denom <= 0.0):
        raise InvariantError(
            "window parameter denominator is non-positive; the window "
            "partition or noise table violates its invariants"
        )
    lambda_t = lambda_s * (t_e - t_s) / denom
    eta_t = eta_s * (t_e - ts) / denom
    return WindowParams(
        t_s=t_s,
        t_e=t_e,
        gamma=gamma,
        lambda_s=lambda_s,
        eta_s=eta_s,
        lambda_t=lambda_t,
        eta_t=eta_t,
    )


def grid_indices(ts: np.ndarray | list[float], sched: TimeWindowSchedule) -> np.ndarray:
    """Index of each timestep on the inference grid, within `eps`.

    Raises TimeDomainError for any timestep that is not a grid member.
    """
    ts = np.asarray(ts, dtype=np.float64)
    _check_time_range(ts)
    grid = sched.inference_grid
    pos = np.searchsorted(grid, ts)
    # nearest of grid[pos - 1] and grid[pos], guarding the array ends
    lo = np.clip(pos - 1, 0, len(grid) - 1)
    hi = np.clip(pos, 0, len(grid) - 1)
    idx = np.where(np.abs(grid[hi] - ts) <= np.abs(grid[lo] - ts), hi, lo)
    off = np.abs(grid[idx] - ts) > sched.eps
    if np.any(off):
        raise TimeDomainError(
            f"timesteps not on the inference grid: {np.asarray(ts)[off][:4]}"
        )
    return idx.astype(np.int64)


def next_timestep(ts: np.ndarray | list[float], sched: TimeWindowSchedule) -> np.ndarray:
    """Successor of each timestep on the inference grid.

    The successor of the last grid point is the terminal time 1.0. Inputs
    must already sit on the grid (within `eps`).
    """
    idx = grid_indices(ts, sched)
    grid_ext = np.append(sched.inference_grid, 1.0)
    return grid_ext[idx + 1]


def scalar_window_bounds(t: float, sched: TimeWindowSchedule) -> tuple[float, float]:
    """Containing window of a single timestep via a plain linear scan.

    Reference path, deliberately independent of the vectorized lookup.
    """
    if not 0.0 <= t <= 1.0:
        raise TimeDomainError(f"timestep outside [0, 1]: {t}")
    bounds = sched.boundaries
    k = 0
    for j in range(1, len(bounds) - 1):
        if t > float(bounds[j]) + sched.eps:
            k += 1
    return float(bounds[k]), float(bounds[k + 1])


def scalar_alpha_bar(t: float, sched: TimeWindowSchedule) -> float:
    """Noise-table value at a single flow time, scalar round-half-up path."""
    t_max = sched.noise_schedule.t_max
    raw = (1.0 - t) * float(t_max - 1)
    idx = int(math.floor(raw + 0.5))
    idx = min(max(idx, 0), t_max - 1)
    return float(sched.noise_schedule.alphas_cumprod[idx])


def scalar_next_timestep(t: float, sched: TimeWindowSchedule) -> float:
    """Grid successor of a single timestep via a plain linear scan."""
    grid = sched.inference_grid
    for i in range(len(grid)):
        if abs(float(grid[i]) - t) <= sched.eps:
            return float(grid[i + 1]) if i + 1 < len(grid) else 1.0
    raise TimeDomainError(f"timestep not on the inference grid: {t}")
