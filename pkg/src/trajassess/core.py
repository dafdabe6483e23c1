"""Shared domain types: agent states, trajectories, frames, trajlets, datasets."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

# Timestamps are floats on a common grid; keying frames on a rounded value
# avoids spurious splits from last-bit noise.
TIME_DECIMALS = 6


class TrajAssessError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TrajAssessError):
    """Invalid configuration or schema."""


class DataError(TrajAssessError):
    """Invalid or inconsistent input data."""


def time_key(t: float) -> float:
    return round(float(t), TIME_DECIMALS)


@dataclass(frozen=True)
class AgentState:
    """State of one agent at one timestamp (position in meters, velocity in m/s)."""

    agent_id: str
    timestamp: float
    position: np.ndarray
    velocity: np.ndarray | None = None

    def __post_init__(self):
        if not np.isfinite(self.timestamp):
            raise DataError(f"non-finite timestamp for agent {self.agent_id}")
        if not np.all(np.isfinite(self.position)):
            raise DataError(f"non-finite position for agent {self.agent_id}")


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered observations of one agent.

    Positions (and optional velocities) are stored as arrays of shape (n, 2);
    velocities are absent until the smoothing stage populates them.
    """

    agent_id: str
    timestamps: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray | None = None

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=float)
        ps = np.asarray(self.positions, dtype=float)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "positions", ps)
        if self.velocities is not None:
            object.__setattr__(self, "velocities", np.asarray(self.velocities, dtype=float))
        if ts.ndim != 1 or ps.shape != (ts.size, 2):
            raise DataError(f"trajectory {self.agent_id}: inconsistent array shapes")
        if ts.size > 1 and not np.all(np.diff(ts) > 0):
            raise DataError(f"trajectory {self.agent_id}: timestamps not strictly increasing")
        if not (np.all(np.isfinite(ts)) and np.all(np.isfinite(ps))):
            raise DataError(f"trajectory {self.agent_id}: non-finite values")

    def __len__(self) -> int:
        return self.timestamps.size

    @property
    def start_time(self) -> float:
        return float(self.timestamps[0])

    @property
    def duration(self) -> float:
        return float(self.timestamps[-1] - self.timestamps[0])

    def state(self, i: int) -> AgentState:
        vel = None if self.velocities is None else self.velocities[i]
        return AgentState(self.agent_id, float(self.timestamps[i]), self.positions[i], vel)

    def path_length(self) -> float:
        if len(self) < 2:
            return 0.0
        return float(np.sum(np.linalg.norm(np.diff(self.positions, axis=0), axis=1)))


@dataclass(frozen=True)
class Frame:
    """All agents observed at one timestamp."""

    timestamp: float
    agent_ids: tuple[str, ...]
    positions: np.ndarray
    velocities: np.ndarray | None = None

    @property
    def count(self) -> int:
        return len(self.agent_ids)


@dataclass(frozen=True)
class Trajlet:
    """Fixed-duration resampled segment of one trajectory.

    The first ``n_obs`` samples are the observed part, the remaining
    ``n_pred`` the future part.  Static trajlets (short path) are kept but
    excluded from indicator statistics.
    """

    trajlet_id: str
    agent_id: str
    timestamps: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    n_obs: int
    n_pred: int
    is_static: bool = False

    def __post_init__(self):
        n = self.timestamps.size
        if self.n_obs + self.n_pred != n:
            raise DataError(f"trajlet {self.trajlet_id}: obs/pred split does not cover samples")
        if self.positions.shape != (n, 2) or self.velocities.shape != (n, 2):
            raise DataError(f"trajlet {self.trajlet_id}: inconsistent array shapes")

    def __len__(self) -> int:
        return self.timestamps.size

    @property
    def span(self) -> float:
        return float(self.timestamps[-1] - self.timestamps[0])

    @property
    def obs_positions(self) -> np.ndarray:
        return self.positions[: self.n_obs]

    @property
    def pred_positions(self) -> np.ndarray:
        return self.positions[self.n_obs :]

    def path_length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.positions, axis=0), axis=1)))

    def with_static(self, flag: bool) -> "Trajlet":
        return replace(self, is_static=flag)


@dataclass(frozen=True)
class Extent:
    """Axis-aligned bounding box over all positions, in meters."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def degenerate(self) -> bool:
        return self.area <= 0.0


@dataclass(frozen=True)
class Dataset:
    """Immutable container: trajectories, frame index, spatial extent, metadata."""

    name: str
    trajectories: tuple[Trajectory, ...]
    frames: tuple[Frame, ...]
    extent: Extent
    source_fps: float
    flags: tuple[str, ...] = ()

    @property
    def n_agents(self) -> int:
        return len(self.trajectories)

    @property
    def area(self) -> float:
        return self.extent.area

    @property
    def duration(self) -> float:
        if not self.frames:
            return 0.0
        return self.frames[-1].timestamp - self.frames[0].timestamp

    def total_trajectory_duration(self) -> float:
        return float(sum(t.duration for t in self.trajectories))


def build_frames(trajectories: Sequence[Trajectory]) -> list[Frame]:
    """Group all states by timestamp into time-sorted frames.

    Raises DataError on duplicate (agent_id, timestamp) pairs.
    """
    by_time: dict[float, list[tuple[str, int, Trajectory]]] = {}
    for traj in trajectories:
        for i, t in enumerate(traj.timestamps):
            key = time_key(t)
            entries = by_time.setdefault(key, [])
            if any(e[0] == traj.agent_id for e in entries):
                raise DataError(
                    f"duplicate state for agent {traj.agent_id!r} at t={key}"
                )
            entries.append((traj.agent_id, i, traj))

    frames = []
    for key in sorted(by_time):
        entries = by_time[key]
        ids = tuple(e[0] for e in entries)
        pos = np.array([e[2].positions[e[1]] for e in entries])
        vels = [e[2].velocities[e[1]] if e[2].velocities is not None else None for e in entries]
        vel = np.array(vels) if all(v is not None for v in vels) else None
        frames.append(Frame(key, ids, pos, vel))
    return frames


def bounding_area(trajectories: Iterable[Trajectory]) -> Extent:
    """Bounding box over every position of every trajectory."""
    all_pos = [t.positions for t in trajectories if len(t) > 0]
    if not all_pos:
        raise DataError("bounding_area: no positions")
    pos = np.vstack(all_pos)
    return Extent(
        float(pos[:, 0].min()),
        float(pos[:, 0].max()),
        float(pos[:, 1].min()),
        float(pos[:, 1].max()),
    )
