"""Geometric regularity indicators: speed and acceleration statistics, path
efficiency, and angular deviation from linear motion."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DataError, Trajlet

MIN_SPEED = 1e-6  # below this the initial heading is undefined
MIN_RADIUS = 1e-6  # aligned points this close to the origin have no angle


@dataclass(frozen=True)
class RegularityRecord:
    trajlet_id: str
    speed_avg: float
    speed_range: float
    accel_avg: float
    accel_max: float
    efficiency: float
    deviation_series: np.ndarray | None
    deviation_avg: float | None
    deviation_abs_avg_deg: float | None


def speed_stats(trajlet: Trajlet) -> tuple[float, float]:
    """Mean speed and largest speed deviation (max - min) along the trajlet."""
    speeds = _speeds(trajlet)
    return float(np.mean(speeds)), float(np.max(speeds) - np.min(speeds))


def accel_stats(trajlet: Trajlet) -> tuple[float, float]:
    """Average and maximal |acceleration|, acceleration being the finite
    difference of scalar speed.

    Note this differs from the norm of the velocity derivative: a curving
    walk at constant speed has zero acceleration by this measure.
    """
    speeds = _speeds(trajlet)
    if speeds.size < 2:
        raise DataError(f"trajlet {trajlet.trajlet_id}: need >= 2 samples")
    acc = np.abs(np.diff(speeds) / np.diff(trajlet.timestamps))
    return float(np.mean(acc)), float(np.max(acc))


def path_efficiency(trajlet: Trajlet) -> float:
    """Endpoint displacement over polyline length; 1 for a straight path."""
    length = trajlet.path_length()
    if length <= 0:
        raise DataError(f"trajlet {trajlet.trajlet_id}: zero path length")
    chord = float(np.linalg.norm(trajlet.positions[-1] - trajlet.positions[0]))
    return min(chord / length, 1.0)


def align_trajlet(trajlet: Trajlet) -> np.ndarray:
    """Translate the start to the origin and rotate the initial velocity
    onto the +x axis; returns the aligned positions, shape (n, 2)."""
    v0 = trajlet.velocities[0]
    if np.linalg.norm(v0) < MIN_SPEED:
        raise DataError(
            f"trajlet {trajlet.trajlet_id}: initial velocity too small to align"
        )
    ang = np.arctan2(v0[1], v0[0])
    c, s = np.cos(-ang), np.sin(-ang)
    rot = np.array([[c, -s], [s, c]])
    return (trajlet.positions - trajlet.positions[0]) @ rot.T


def angular_deviation(trajlet: Trajlet) -> tuple[np.ndarray, float]:
    """Per-sample angle of the aligned positions and its signed mean.

    Samples too close to the origin (including the first) are excluded.
    """
    aligned = align_trajlet(trajlet)
    radii = np.linalg.norm(aligned, axis=1)
    keep = radii >= MIN_RADIUS
    if not np.any(keep):
        raise DataError(f"trajlet {trajlet.trajlet_id}: all samples at the origin")
    angles = np.arctan2(aligned[keep, 1], aligned[keep, 0])
    return angles, float(np.mean(angles))


def compute_regularity(trajlet: Trajlet) -> RegularityRecord:
    """All regularity indicators for one non-static trajlet.

    Deviation fields are absent when the initial heading is undefined.
    """
    s_avg, s_rg = speed_stats(trajlet)
    a_avg, a_max = accel_stats(trajlet)
    eff = path_efficiency(trajlet)
    try:
        dev_series, dev_avg = angular_deviation(trajlet)
        dev_abs_deg = float(np.degrees(np.mean(np.abs(dev_series))))
    except DataError:
        dev_series, dev_avg, dev_abs_deg = None, None, None
    return RegularityRecord(
        trajlet_id=trajlet.trajlet_id,
        speed_avg=s_avg,
        speed_range=s_rg,
        accel_avg=a_avg,
        accel_max=a_max,
        efficiency=eff,
        deviation_series=dev_series,
        deviation_avg=dev_avg,
        deviation_abs_avg_deg=dev_abs_deg,
    )


def _speeds(trajlet: Trajlet) -> np.ndarray:
    if trajlet.velocities is None:
        raise DataError(f"trajlet {trajlet.trajlet_id}: velocities missing")
    return np.linalg.norm(trajlet.velocities, axis=1)
