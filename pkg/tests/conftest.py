import numpy as np
import pytest

from trajassess.core import Trajectory, Trajlet


def finite_diff_velocities(positions: np.ndarray, dt: float) -> np.ndarray:
    v = np.gradient(positions, dt, axis=0)
    return v


def make_trajlet(positions, dt=0.4, n_obs=8, trajlet_id="t0", agent_id="a0",
                 velocities=None, t0=0.0, is_static=False) -> Trajlet:
    positions = np.asarray(positions, dtype=float)
    n = len(positions)
    if velocities is None:
        velocities = finite_diff_velocities(positions, dt)
    return Trajlet(
        trajlet_id=trajlet_id,
        agent_id=agent_id,
        timestamps=t0 + dt * np.arange(n),
        positions=positions,
        velocities=np.asarray(velocities, dtype=float),
        n_obs=n_obs,
        n_pred=n - n_obs,
        is_static=is_static,
    )


def make_trajectory(agent_id, timestamps, positions, velocities=None) -> Trajectory:
    return Trajectory(agent_id, np.asarray(timestamps, float),
                      np.asarray(positions, float),
                      None if velocities is None else np.asarray(velocities, float))


def rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def transform_trajlet(trajlet: Trajlet, angle=0.0, shift=(0.0, 0.0)) -> Trajlet:
    r = rotation(angle)
    return Trajlet(
        trajlet_id=trajlet.trajlet_id,
        agent_id=trajlet.agent_id,
        timestamps=trajlet.timestamps,
        positions=trajlet.positions @ r.T + np.asarray(shift),
        velocities=trajlet.velocities @ r.T,
        n_obs=trajlet.n_obs,
        n_pred=trajlet.n_pred,
        is_static=trajlet.is_static,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
