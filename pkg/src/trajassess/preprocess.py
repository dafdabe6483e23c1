"""Downsampling, constant-acceleration RTS smoothing, trajlet splitting and
static filtering."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import DataError, Dataset, Trajectory, Trajlet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SmootherConfig:
    """Noise model of the constant-acceleration smoother.

    ``process_noise`` is the white-jerk spectral density q (m^2/s^5);
    ``measurement_std`` the annotation noise (m).  Defaults assume
    decimeter-scale annotation noise.
    """

    process_noise: float = 0.5
    measurement_std: float = 0.1
    init_cov_scale: float = 10.0

    def __post_init__(self):
        if not (self.process_noise > 0 and self.measurement_std > 0):
            raise DataError("smoother noise parameters must be positive")


@dataclass(frozen=True)
class TrajletConfig:
    delta: float = 4.8
    stride: float = 4.8
    obs_duration: float = 3.2
    min_path_len: float = 1.0
    target_fps: float = 2.5

    def __post_init__(self):
        if not (0 < self.obs_duration < self.delta):
            raise DataError("require 0 < obs_duration < delta")
        if not self.stride > 0:
            raise DataError("stride must be > 0")
        if self.min_path_len < 0:
            raise DataError("min_path_len must be >= 0")

    @property
    def samples_per_trajlet(self) -> int:
        return int(round(self.delta * self.target_fps))

    @property
    def n_obs(self) -> int:
        return int(round(self.obs_duration * self.target_fps))


def downsample(traj: Trajectory, target_fps: float) -> Trajectory:
    """Resample to a uniform grid at target_fps anchored at the first sample.

    Positions are taken from the nearest source sample (no interpolation);
    grid points without a source sample within half a source period are
    dropped (gappy sources).
    """
    if len(traj) < 2:
        return traj
    ts = traj.timestamps
    src_period = float(np.median(np.diff(ts)))
    dt = 1.0 / target_fps
    if dt <= src_period * (1 + 1e-9) and abs(dt - src_period) / dt < 1e-6:
        return traj  # already on the target grid

    n_grid = int(np.floor((ts[-1] - ts[0]) / dt + 1e-9)) + 1
    grid = ts[0] + dt * np.arange(n_grid)
    if n_grid < 2:
        log.warning("trajectory %s shorter than one target period, kept unchanged",
                    traj.agent_id)
        return traj

    idx = np.searchsorted(ts, grid)
    idx = np.clip(idx, 1, len(ts) - 1)
    left_closer = (grid - ts[idx - 1]) <= (ts[idx] - grid)
    nearest = np.where(left_closer, idx - 1, idx)
    ok = np.abs(ts[nearest] - grid) <= src_period / 2 + 1e-9
    if not np.all(ok):
        log.warning("trajectory %s: %d grid point(s) without a nearby source sample",
                    traj.agent_id, int(np.sum(~ok)))
    return Trajectory(traj.agent_id, grid[ok], traj.positions[nearest[ok]])


def _smooth_axis(z: np.ndarray, dt: float, cfg: SmootherConfig) -> np.ndarray:
    """Forward Kalman filter + RTS smoother on one axis.

    State is [position, velocity, acceleration] under a constant-acceleration
    model driven by white jerk.  Returns the smoothed states, shape (n, 3).
    """
    n = z.size
    f = np.array([[1, dt, dt**2 / 2], [0, 1, dt], [0, 0, 1]])
    q = cfg.process_noise * np.array(
        [
            [dt**5 / 20, dt**4 / 8, dt**3 / 6],
            [dt**4 / 8, dt**3 / 3, dt**2 / 2],
            [dt**3 / 6, dt**2 / 2, dt],
        ]
    )
    h = np.array([[1.0, 0.0, 0.0]])
    r = cfg.measurement_std**2

    v0 = (z[1] - z[0]) / dt
    a0 = (z[2] - 2 * z[1] + z[0]) / dt**2 if n >= 3 else 0.0
    x = np.array([z[0], v0, a0])
    p = cfg.init_cov_scale * np.eye(3)

    xs_post = np.empty((n, 3))
    ps_post = np.empty((n, 3, 3))
    xs_prior = np.empty((n, 3))
    ps_prior = np.empty((n, 3, 3))
    xs_post[0], ps_post[0] = x, p
    xs_prior[0], ps_prior[0] = x, p

    for k in range(1, n):
        x = f @ x
        p = f @ p @ f.T + q
        xs_prior[k], ps_prior[k] = x, p
        innov = z[k] - h @ x
        s = h @ p @ h.T + r
        gain = (p @ h.T) / s
        x = x + (gain * innov).ravel()
        p = (np.eye(3) - gain @ h) @ p
        xs_post[k], ps_post[k] = x, p

    xs = np.empty_like(xs_post)
    xs[-1] = xs_post[-1]
    p_next = ps_post[-1]
    for k in range(n - 2, -1, -1):
        c = ps_post[k] @ f.T @ np.linalg.inv(ps_prior[k + 1])
        xs[k] = xs_post[k] + c @ (xs[k + 1] - xs_prior[k + 1])
        p_next = ps_post[k] + c @ (p_next - ps_prior[k + 1]) @ c.T
    return xs


def kalman_smooth(traj: Trajectory, cfg: SmootherConfig | None = None) -> Trajectory:
    """Smooth positions and populate velocities (requires uniform spacing)."""
    cfg = cfg or SmootherConfig()
    if len(traj) < 2:
        raise DataError(f"trajectory {traj.agent_id}: need >= 2 samples to smooth")
    dts = np.diff(traj.timestamps)
    dt = float(np.median(dts))
    if np.max(np.abs(dts - dt)) > 0.1 * dt:
        raise DataError(
            f"trajectory {traj.agent_id}: non-uniform sampling, downsample first"
        )
    sx = _smooth_axis(traj.positions[:, 0], dt, cfg)
    sy = _smooth_axis(traj.positions[:, 1], dt, cfg)
    positions = np.column_stack([sx[:, 0], sy[:, 0]])
    velocities = np.column_stack([sx[:, 1], sy[:, 1]])
    return Trajectory(traj.agent_id, traj.timestamps, positions, velocities)


def split_trajlets(traj: Trajectory, cfg: TrajletConfig | None = None) -> list[Trajlet]:
    """Cut windows of duration delta at multiples of the stride.

    Each trajlet carries round(delta * fps) samples: the window covers
    [start, start + delta) on the sampling grid, so its timestamp span is
    delta minus one sample period.
    """
    cfg = cfg or TrajletConfig()
    if traj.velocities is None:
        raise DataError(f"trajectory {traj.agent_id}: smooth before splitting")
    n_total = cfg.samples_per_trajlet
    if len(traj) < 2 or traj.duration < cfg.delta:
        return []
    n_windows = int(np.floor((traj.duration - cfg.delta) / cfg.stride + 1e-9)) + 1
    stride_idx = int(round(cfg.stride * cfg.target_fps))
    if stride_idx < 1:
        raise DataError("stride below one sample period")

    trajlets = []
    for m in range(n_windows):
        i0 = m * stride_idx
        i1 = i0 + n_total
        if i1 > len(traj):
            break
        trajlets.append(
            Trajlet(
                trajlet_id=f"{traj.agent_id}#{m}",
                agent_id=traj.agent_id,
                timestamps=traj.timestamps[i0:i1],
                positions=traj.positions[i0:i1],
                velocities=traj.velocities[i0:i1],
                n_obs=cfg.n_obs,
                n_pred=n_total - cfg.n_obs,
            )
        )
    return trajlets


def filter_static(trajlets: list[Trajlet], cfg: TrajletConfig | None = None) -> list[Trajlet]:
    """Flag trajlets whose polyline path length is below the minimum."""
    cfg = cfg or TrajletConfig()
    return [t.with_static(t.path_length() < cfg.min_path_len) for t in trajlets]


def preprocess_dataset(
    dataset: Dataset,
    smoother: SmootherConfig | None = None,
    trajlets: TrajletConfig | None = None,
) -> tuple[list[Trajectory], list[Trajlet]]:
    """Full preprocessing chain: downsample, smooth, split, flag statics.

    Returns the processed trajectories (for frame-level indicators) and all
    trajlets with their is_static flags set.
    """
    smoother = smoother or SmootherConfig()
    trajlet_cfg = trajlets or TrajletConfig()
    processed: list[Trajectory] = []
    out: list[Trajlet] = []
    for traj in dataset.trajectories:
        if len(traj) < 2:
            continue
        ds = downsample(traj, trajlet_cfg.target_fps)
        if len(ds) < 2:
            continue
        try:
            sm = kalman_smooth(ds, smoother)
        except DataError as exc:
            log.warning("skipping trajectory %s: %s", traj.agent_id, exc)
            continue
        processed.append(sm)
        out.extend(split_trajlets(sm, trajlet_cfg))
    return processed, filter_static(out, trajlet_cfg)
