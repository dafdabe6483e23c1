"""Context-complexity indicators: distance of closest approach, time to
collision and its interaction energy, global density over the dataset extent,
and nearest-neighbor local density."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .core import DataError, Frame, Trajlet, time_key

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class InteractionParams:
    agent_radius: float = 0.3
    energy_scale: float = 1.0
    ttc_upper: float = 3.0
    density_smoothing: float = 1.0
    bin_width: float = 0.2
    significance: float = 0.05
    neighbor_radius: float = 20.0
    nn_floor: float = 0.05
    n_scrambles: int = 20
    seed: int = 0

    def __post_init__(self):
        if not (self.agent_radius > 0 and self.ttc_upper > 0
                and self.density_smoothing > 0 and self.bin_width > 0):
            raise DataError("interaction parameters must be positive")


@dataclass(frozen=True)
class ContextRecord:
    trajlet_id: str
    min_dca: float | None
    min_ttc: float | None
    energy: float | None
    max_local_density: float | None


@dataclass(frozen=True)
class FrameIndicator:
    timestamp: float
    global_density: float


def dca_pair(pos_i, vel_i, pos_j, vel_j) -> float:
    """Distance of closest approach under constant velocities.

    Diverging pairs (closest approach in the past) keep their current
    distance; approaching pairs get the perpendicular miss distance.
    """
    dx = np.asarray(pos_i, dtype=float) - np.asarray(pos_j, dtype=float)
    dv = np.asarray(vel_i, dtype=float) - np.asarray(vel_j, dtype=float)
    dist = float(np.linalg.norm(dx))
    dv_norm = float(np.linalg.norm(dv))
    if dv_norm < 1e-9:
        return dist
    proj = float(np.dot(dv, dx)) / dv_norm
    if proj >= 0:  # diverging
        return dist
    return float(np.sqrt(max(dist**2 - proj**2, 0.0)))


def ttc_pair(pos_i, vel_i, pos_j, vel_j, agent_radius: float) -> float | None:
    """Time until two disks of the given radius first touch, or None.

    Returns 0 for already-overlapping pairs.  A collision requires the pair
    to be approaching and the quadratic ||dx + tau dv|| = 2R to have a real
    positive root; the smaller root is returned.
    """
    dx = np.asarray(pos_i, dtype=float) - np.asarray(pos_j, dtype=float)
    dv = np.asarray(vel_i, dtype=float) - np.asarray(vel_j, dtype=float)
    dist2 = float(np.dot(dx, dx))
    four_r2 = 4 * agent_radius**2
    if dist2 <= four_r2:
        log.debug("ttc_pair: overlapping agents")
        return 0.0
    dv2 = float(np.dot(dv, dv))
    if dv2 < 1e-18:
        return None
    delta = float(np.dot(dv, dx))
    if delta >= 0:  # not approaching
        return None
    disc = delta**2 - dv2 * (dist2 - four_r2)
    if disc < 0:
        return None
    return float((-delta - np.sqrt(disc)) / dv2)


def interaction_energy(tau: float, params: InteractionParams | None = None) -> float:
    """Collision-urgency energy (k / tau^2) * exp(-tau / tau_plus)."""
    params = params or InteractionParams()
    if tau <= 0:
        raise DataError("interaction_energy: tau must be > 0")
    return params.energy_scale / tau**2 * float(np.exp(-tau / params.ttc_upper))


def index_frames(frames: Sequence[Frame]) -> dict[float, Frame]:
    return {time_key(f.timestamp): f for f in frames}


def _neighbors(frame: Frame, agent_id: str, radius: float):
    """Positions and velocities of co-present agents within the radius."""
    if frame.velocities is None:
        raise DataError(f"frame at t={frame.timestamp}: velocities missing")
    try:
        own = frame.agent_ids.index(agent_id)
    except ValueError:
        return None
    mask = np.ones(frame.count, dtype=bool)
    mask[own] = False
    if np.isfinite(radius):
        dists = np.linalg.norm(frame.positions - frame.positions[own], axis=1)
        mask &= dists <= radius
    return frame.positions[own], frame.velocities[own], \
        frame.positions[mask], frame.velocities[mask]


def min_dca_trajlet(trajlet: Trajlet, frame_index: dict[float, Frame],
                    params: InteractionParams | None = None) -> float | None:
    """Minimum DCA over the trajlet's timestamps and co-present agents."""
    params = params or InteractionParams()
    best = None
    for k, t in enumerate(trajlet.timestamps):
        frame = frame_index.get(time_key(t))
        if frame is None:
            continue
        found = _neighbors(frame, trajlet.agent_id, params.neighbor_radius)
        if found is None:
            continue
        pos, vel, npos, nvel = found
        for j in range(len(npos)):
            d = dca_pair(pos, vel, npos[j], nvel[j])
            if best is None or d < best:
                best = d
    return best


def ttc_energy_trajlet(trajlet: Trajlet, frame_index: dict[float, Frame],
                       params: InteractionParams | None = None
                       ) -> tuple[float | None, float | None]:
    """Minimum TTC over the trajlet and its energy; absent when no pair ever
    predicts a collision."""
    params = params or InteractionParams()
    best = None
    for t in trajlet.timestamps:
        frame = frame_index.get(time_key(t))
        if frame is None:
            continue
        found = _neighbors(frame, trajlet.agent_id, params.neighbor_radius)
        if found is None:
            continue
        pos, vel, npos, nvel = found
        for j in range(len(npos)):
            tau = ttc_pair(pos, vel, npos[j], nvel[j], params.agent_radius)
            if tau is not None and (best is None or tau < best):
                best = tau
    if best is None:
        return None, None
    energy = interaction_energy(best, params) if best > 0 else None
    return best, energy


def global_density(frame: Frame, area: float) -> float:
    """Agents per unit area over the dataset extent."""
    if area <= 0:
        raise DataError("global_density: degenerate extent")
    return frame.count / area


def local_density(point: np.ndarray, frame: Frame,
                  params: InteractionParams | None = None) -> float | None:
    """Adaptive-bandwidth kernel density of agents around a point.

    Each agent contributes an isotropic Gaussian whose width is its
    nearest-neighbor distance (floored) times the smoothing parameter.
    Absent when fewer than two agents are present.
    """
    params = params or InteractionParams()
    if frame.count < 2:
        return None
    pos = frame.positions
    diff = pos[:, None, :] - pos[None, :, :]
    dists = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(dists, np.inf)
    nn = np.maximum(dists.min(axis=1), params.nn_floor)
    widths = params.density_smoothing * nn
    sq = np.sum((pos - np.asarray(point, dtype=float)) ** 2, axis=1)
    return float(np.sum(np.exp(-sq / (2 * widths**2)) / widths**2) / (2 * np.pi))


def local_density_trajlet(trajlet: Trajlet, frame_index: dict[float, Frame],
                          params: InteractionParams | None = None) -> float | None:
    """Maximum local density at the agent's own position along the trajlet."""
    params = params or InteractionParams()
    best = None
    for t in trajlet.timestamps:
        frame = frame_index.get(time_key(t))
        if frame is None or trajlet.agent_id not in frame.agent_ids:
            continue
        own = frame.agent_ids.index(trajlet.agent_id)
        rho = local_density(frame.positions[own], frame, params)
        if rho is not None and (best is None or rho > best):
            best = rho
    return best


def _ttc_batch(dx: np.ndarray, dv: np.ndarray, agent_radius: float) -> np.ndarray:
    """Vectorized ttc_pair over difference arrays of shape (m, 2).

    Returns taus with NaN where no collision is predicted and 0 for
    already-overlapping pairs.
    """
    dist2 = np.einsum("ij,ij->i", dx, dx)
    dv2 = np.einsum("ij,ij->i", dv, dv)
    delta = np.einsum("ij,ij->i", dv, dx)
    four_r2 = 4 * agent_radius**2
    disc = delta**2 - dv2 * (dist2 - four_r2)
    with np.errstate(invalid="ignore", divide="ignore"):
        tau = (-delta - np.sqrt(disc)) / dv2
    out = np.where(
        (dv2 >= 1e-18) & (delta < 0) & (disc >= 0), tau, np.nan
    )
    return np.where(dist2 <= four_r2, 0.0, out)


def pairwise_ttc_values(frames: Sequence[Frame],
                        params: InteractionParams | None = None) -> np.ndarray:
    """All defined pairwise TTC values in (0, ttc_upper], over all frames."""
    params = params or InteractionParams()
    values = []
    for frame in frames:
        if frame.count < 2 or frame.velocities is None:
            continue
        i, j = np.triu_indices(frame.count, k=1)
        dx = frame.positions[i] - frame.positions[j]
        if np.isfinite(params.neighbor_radius):
            near = np.einsum("ij,ij->i", dx, dx) <= params.neighbor_radius**2
            i, j, dx = i[near], j[near], dx[near]
        taus = _ttc_batch(dx, frame.velocities[i] - frame.velocities[j],
                          params.agent_radius)
        good = np.isfinite(taus) & (taus > 0) & (taus <= params.ttc_upper)
        values.append(taus[good])
    if not values:
        return np.array([])
    return np.concatenate(values)


def _scrambled_ttc_values(frames: Sequence[Frame], n_pairs: int,
                          params: InteractionParams,
                          rng: np.random.Generator) -> np.ndarray:
    """No-interaction baseline: TTCs of agent states re-paired across
    different timestamps (marginal state distributions preserved)."""
    pool_pos, pool_vel, pool_t = [], [], []
    for frame in frames:
        if frame.velocities is None:
            continue
        pool_pos.append(frame.positions)
        pool_vel.append(frame.velocities)
        pool_t.append(np.full(frame.count, frame.timestamp))
    pos = np.vstack(pool_pos)
    vel = np.vstack(pool_vel)
    ts = np.concatenate(pool_t)
    n = len(pos)
    values = []
    got = 0
    attempts = 0
    budget = 500 * n_pairs  # most random re-pairings are not on collision course
    while got < n_pairs and attempts < budget:
        batch = min(8 * n_pairs, budget - attempts)
        i = rng.integers(0, n, size=batch)
        j = rng.integers(0, n, size=batch)
        attempts += batch
        keep = (i != j) & (ts[i] != ts[j])
        i, j = i[keep], j[keep]
        taus = _ttc_batch(pos[i] - pos[j], vel[i] - vel[j], params.agent_radius)
        good = np.isfinite(taus) & (taus > 0) & (taus <= params.ttc_upper)
        if np.any(good):
            values.append(taus[good])
            got += int(np.sum(good))
    if not values:
        return np.array([])
    return np.concatenate(values)[:n_pairs]


def estimate_tau_lower_bound(frames: Sequence[Frame],
                             params: InteractionParams | None = None) -> float:
    """Lower bound of reliable TTC values from observed-vs-scrambled histograms.

    Bins the observed pairwise TTCs and a time-scrambled baseline into
    bin_width intervals over (0, ttc_upper], forms per-replicate bin ratios,
    and walks consecutive bins with Welch t-tests (family-wise corrected).
    Returns the left edge of the later bin of the first significantly
    differing pair, or 0 when nothing is significant or data are too sparse.
    """
    params = params or InteractionParams()
    observed = pairwise_ttc_values(frames, params)
    edges = np.arange(0.0, params.ttc_upper + params.bin_width / 2, params.bin_width)
    obs_hist, _ = np.histogram(observed, bins=edges)

    populated = obs_hist[obs_hist > 0]
    if len(populated) < 2 or np.median(obs_hist) < 30:
        log.warning("estimate_tau_lower_bound: insufficient TTC pairs, returning 0")
        return 0.0

    rng = np.random.default_rng(params.seed)
    n_bins = len(obs_hist)
    obs_density = obs_hist / observed.size
    ratios = np.full((params.n_scrambles, n_bins), np.nan)
    for r in range(params.n_scrambles):
        scr = _scrambled_ttc_values(frames, observed.size, params, rng)
        if scr.size == 0:
            continue
        scr_hist, _ = np.histogram(scr, bins=edges)
        scr_density = scr_hist / scr.size
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios[r] = np.where(scr_hist > 0, obs_density / scr_density, np.nan)

    testable = [b for b in range(n_bins - 1)
                if np.sum(np.isfinite(ratios[:, b])) >= 2
                and np.sum(np.isfinite(ratios[:, b + 1])) >= 2]
    if not testable:
        log.warning("estimate_tau_lower_bound: no testable bin pairs, returning 0")
        return 0.0
    # Bonferroni over the walked pairs keeps the family-wise false-positive
    # rate at the configured significance.
    threshold = params.significance / len(testable)
    for b in testable:
        a = ratios[:, b]
        c = ratios[:, b + 1]
        a = a[np.isfinite(a)]
        c = c[np.isfinite(c)]
        if np.allclose(a, a[0]) and np.allclose(c, c[0]) and np.isclose(a[0], c[0]):
            continue
        t_stat, p = stats.ttest_ind(a, c, equal_var=False)
        if np.isfinite(p) and p < threshold:
            return float(edges[b + 1])
    return 0.0


def compute_context(trajlet: Trajlet, frame_index: dict[float, Frame],
                    params: InteractionParams | None = None) -> ContextRecord:
    params = params or InteractionParams()
    ttc, energy = ttc_energy_trajlet(trajlet, frame_index, params)
    return ContextRecord(
        trajlet_id=trajlet.trajlet_id,
        min_dca=min_dca_trajlet(trajlet, frame_index, params),
        min_ttc=ttc,
        energy=energy,
        max_local_density=local_density_trajlet(trajlet, frame_index, params),
    )


def global_density_series(frames: Sequence[Frame], area: float) -> list[FrameIndicator]:
    return [FrameIndicator(f.timestamp, global_density(f, area)) for f in frames]
