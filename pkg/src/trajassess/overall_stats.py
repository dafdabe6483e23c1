"""Whole-dataset descriptors of the trajlet distribution: spline-resampled
position samples over progression time, GMM cluster counts selected by BIC,
and positional entropy from a leave-one-out kernel density estimate."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import logsumexp
from sklearn.mixture import GaussianMixture

from .core import DataError, Trajlet

log = logging.getLogger(__name__)

PROGRESSION_SPAN = 4.8
DEFAULT_N_TIMES = 50
DEFAULT_K_MAX = 21
DEFAULT_BANDWIDTH = 0.5


class SplineTrajlet:
    """Natural cubic interpolating spline of a trajlet, one per axis,
    reparametrized to progression time t in [0, 4.8]."""

    def __init__(self, trajlet: Trajlet):
        if len(trajlet) < 4:
            raise DataError(
                f"trajlet {trajlet.trajlet_id}: need >= 4 samples for a cubic spline"
            )
        self.trajlet_id = trajlet.trajlet_id
        u = trajlet.timestamps - trajlet.timestamps[0]
        self._scale = u[-1] / PROGRESSION_SPAN
        self._sx = CubicSpline(u, trajlet.positions[:, 0], bc_type="natural")
        self._sy = CubicSpline(u, trajlet.positions[:, 1], bc_type="natural")

    def __call__(self, t) -> np.ndarray:
        """Evaluate at progression time(s) t in [0, 4.8]; returns (..., 2)."""
        u = np.asarray(t, dtype=float) * self._scale
        return np.stack([self._sx(u), self._sy(u)], axis=-1)


@dataclass(frozen=True)
class ProgressionSampleSet:
    """Positions of every non-static trajlet at one progression time."""

    t: float
    points: np.ndarray

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise DataError("progression samples must have shape (n, 2)")


def fit_spline(trajlet: Trajlet) -> SplineTrajlet:
    return SplineTrajlet(trajlet)


def progression_samples(
    splines: list[SplineTrajlet], n_times: int = DEFAULT_N_TIMES
) -> list[ProgressionSampleSet]:
    """Evaluate all splines on a uniform grid of progression times."""
    if not splines:
        raise DataError("progression_samples: no splines")
    times = np.linspace(0.0, PROGRESSION_SPAN, n_times)
    return [
        ProgressionSampleSet(float(t), np.array([s(t) for s in splines]))
        for t in times
    ]


def cluster_count(samples: ProgressionSampleSet, k_max: int = DEFAULT_K_MAX,
                  seed: int = 0, patience: int | None = 5) -> int:
    """Number of GMM components minimizing BIC (full covariance, EM).

    k_max is lowered to n // 2 when the sample set is small.  The scan stops
    early once BIC has not improved for ``patience`` consecutive component
    counts (BIC grows steadily past the minimum); pass None to scan all k.
    """
    points = samples.points
    n = len(points)
    if n < 2:
        raise DataError("cluster_count: need >= 2 points")
    k_max = min(k_max, max(1, n // 2))

    best_k, best_bic = None, np.inf
    for k in range(1, k_max + 1):
        if patience is not None and best_k is not None and k - best_k > patience:
            break
        gmm = GaussianMixture(
            n_components=k,
            covariance_type="full",
            reg_covar=1e-6,
            n_init=5,
            max_iter=200,
            tol=1e-6,
            init_params="k-means++",
            random_state=seed,
        )
        try:
            gmm.fit(points)
            bic = gmm.bic(points)
        except (ValueError, np.linalg.LinAlgError) as exc:
            log.warning("GMM fit failed for k=%d: %s", k, exc)
            continue
        if bic < best_bic:
            best_k, best_bic = k, bic
    if best_k is None:
        raise DataError("cluster_count: every GMM fit failed")
    return best_k


def positional_entropy(samples: ProgressionSampleSet,
                       bandwidth: float = DEFAULT_BANDWIDTH) -> float:
    """Leave-one-out entropy (nats) of an isotropic 2-D Gaussian KDE."""
    points = samples.points
    n = len(points)
    if n < 2:
        raise DataError("positional_entropy: need >= 2 points")
    h2 = bandwidth**2
    diff = points[:, None, :] - points[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    logk = -sq / (2 * h2)
    np.fill_diagonal(logk, -np.inf)  # leave-one-out
    log_dens = logsumexp(logk, axis=1) - np.log((n - 1) * 2 * np.pi * h2)
    return float(-np.mean(log_dens))


def overall_curves(
    trajlets: list[Trajlet],
    n_times: int = DEFAULT_N_TIMES,
    k_max: int = DEFAULT_K_MAX,
    bandwidth: float = DEFAULT_BANDWIDTH,
    seed: int = 0,
) -> dict:
    """H_t and M_t over the progression-time grid, for non-static trajlets."""
    splines = [fit_spline(t) for t in trajlets if not t.is_static]
    if len(splines) < 2:
        raise DataError("overall_curves: need >= 2 non-static trajlets")
    sets = progression_samples(splines, n_times)
    entropy = [positional_entropy(s, bandwidth) for s in sets]
    clusters = [cluster_count(s, k_max, seed) for s in sets]
    return {
        "t": [s.t for s in sets],
        "entropy": entropy,
        "clusters": clusters,
    }
