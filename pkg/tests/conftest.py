import numpy as np
import pytest

from flowpipe import NoiseSchedule, build_time_window_schedule


@pytest.fixture
def sched():
    """Default schedule: K=4 equal windows, 4-point uniform grid."""
    return build_time_window_schedule(inference_steps=4)


@pytest.fixture
def flat_sched():
    """Constant alpha-bar table, so gamma = 1 in every window.

    Built by direct construction: the validated builder rejects
    non-decreasing tables, and that is the point of this fixture.
    """
    noise = NoiseSchedule(
        betas=np.full(1000, 1e-3),
        alphas_cumprod=np.full(1000, 0.5),
        t_max=1000,
    )
    return build_time_window_schedule(noise_schedule=noise, inference_steps=4)
