"""Trajlet-wise conditional entropy of the future part given the observed
part, under a Gaussian-kernel mixture over the whole trajlet set.

All kernel evaluations are carried out in log space: the normalization
constant (2*pi*h^2)^(-N) alone under/overflows for typical N.
"""
from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import DataError, Trajlet

log = logging.getLogger(__name__)

# References whose observed part is farther than this many bandwidths
# (in the 2*N_obs-dimensional norm) carry relative weight < e^-36.
PRUNE_SIGMAS = 6.0


@dataclass(frozen=True)
class KernelConfig:
    bandwidth: float = 0.5
    n_samples: int = 30
    seed: int = 0
    prune: bool = True

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise DataError("bandwidth must be > 0")
        if self.n_samples < 1:
            raise DataError("n_samples must be >= 1")


@dataclass(frozen=True)
class PosteriorWeights:
    """Normalized mixture weights of one query over the reference trajlets."""

    query_id: str
    reference_ids: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self):
        if len(self.weights) != len(self.reference_ids):
            raise DataError("weights/reference_ids length mismatch")


def log_trajlet_kernel(x: np.ndarray, x_ref: np.ndarray, bandwidth: float) -> float:
    """Log of the Gaussian trajlet kernel between two point sequences.

    Both arguments have shape (N, 2); the kernel is an isotropic Gaussian in
    R^(2N): -N log(2 pi h^2) - ||x - x_ref||^2 / (2 h^2).
    """
    x = np.asarray(x, dtype=float)
    x_ref = np.asarray(x_ref, dtype=float)
    if x.shape != x_ref.shape:
        raise DataError(f"kernel arguments differ in shape: {x.shape} vs {x_ref.shape}")
    n = x.shape[0]
    h2 = bandwidth**2
    sq = float(np.sum((x - x_ref) ** 2))
    return -n * np.log(2 * np.pi * h2) - sq / (2 * h2)


def trajlet_kernel(x: np.ndarray, x_ref: np.ndarray, bandwidth: float) -> float:
    return float(np.exp(log_trajlet_kernel(x, x_ref, bandwidth)))


def _sq_dists(query: np.ndarray, refs: np.ndarray) -> np.ndarray:
    diff = refs - query[None, :, :]
    return np.einsum("lij,lij->l", diff, diff)


def posterior_weights(query: Trajlet, references: list[Trajlet],
                      cfg: KernelConfig | None = None) -> PosteriorWeights:
    """Mixture weights over references from observed-part kernel values.

    The query itself is excluded from the reference set (leave-one-out).
    """
    cfg = cfg or KernelConfig()
    refs = [r for r in references if r.trajlet_id != query.trajlet_id]
    if len(refs) < 2:
        raise DataError("posterior_weights: need >= 2 references besides the query")
    n_obs = query.n_obs
    if any(r.n_obs != n_obs for r in refs):
        raise DataError("posterior_weights: all trajlets must share n_obs")

    ref_obs = np.stack([r.obs_positions for r in refs])
    sq = _sq_dists(query.obs_positions, ref_obs)
    logk = -sq / (2 * cfg.bandwidth**2)  # shared constant cancels on normalizing
    if not np.any(np.isfinite(logk)):
        log.warning("posterior_weights: all kernels underflowed, using uniform weights")
        w = np.full(len(refs), 1.0 / len(refs))
    else:
        w = np.exp(logk - logsumexp(logk))
    return PosteriorWeights(
        query_id=query.trajlet_id,
        reference_ids=tuple(r.trajlet_id for r in refs),
        weights=w,
    )


def _trajlet_rng(seed: int, trajlet_id: str) -> np.random.Generator:
    # Stable per-trajlet stream regardless of scheduling order.
    return np.random.default_rng([seed, zlib.crc32(trajlet_id.encode())])


def sample_futures(weights: PosteriorWeights, references: list[Trajlet],
                   cfg: KernelConfig | None = None,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw M futures from the kernel mixture, shape (M, N_pred, 2).

    Each draw picks a reference by its weight and perturbs its future part
    with i.i.d. Gaussian noise of std equal to the bandwidth.
    """
    cfg = cfg or KernelConfig()
    if rng is None:
        rng = _trajlet_rng(cfg.seed, weights.query_id)
    by_id = {r.trajlet_id: r for r in references}
    ref_pred = np.stack([by_id[i].pred_positions for i in weights.reference_ids])
    picks = rng.choice(len(ref_pred), size=cfg.n_samples, p=weights.weights)
    noise = rng.normal(0.0, cfg.bandwidth, size=(cfg.n_samples,) + ref_pred.shape[1:])
    return ref_pred[picks] + noise


def conditional_entropy(query: Trajlet, references: list[Trajlet],
                        cfg: KernelConfig | None = None) -> float:
    """Monte-Carlo conditional entropy (nats) of the query's future.

    Deterministic for a fixed config seed: the RNG stream is derived from
    (seed, trajlet id).
    """
    cfg = cfg or KernelConfig()
    if query.is_static:
        raise DataError(f"trajlet {query.trajlet_id} is static")
    refs = [r for r in references if r.trajlet_id != query.trajlet_id]
    if len(refs) < 2:
        raise DataError("conditional_entropy: need >= 2 references besides the query")

    if cfg.prune:
        n_obs = query.n_obs
        cutoff = (PRUNE_SIGMAS * cfg.bandwidth) ** 2 * 2 * n_obs
        ref_obs = np.stack([r.obs_positions for r in refs])
        sq = _sq_dists(query.obs_positions, ref_obs)
        keep = sq <= cutoff
        if np.sum(keep) >= 2:
            refs = [r for r, k in zip(refs, keep) if k]

    w = posterior_weights(query, refs, cfg)
    rng = _trajlet_rng(cfg.seed, query.trajlet_id)
    futures = sample_futures(w, refs, cfg, rng)

    by_id = {r.trajlet_id: r for r in refs}
    ref_pred = np.stack([by_id[i].pred_positions for i in w.reference_ids])
    n_pred = ref_pred.shape[1]
    h2 = cfg.bandwidth**2
    log_const = -n_pred * np.log(2 * np.pi * h2)
    with np.errstate(divide="ignore"):
        log_w = np.log(w.weights)

    diff = futures[:, None, :, :] - ref_pred[None, :, :, :]
    sq = np.einsum("mlij,mlij->ml", diff, diff)
    log_mix = logsumexp(log_w[None, :] + log_const - sq / (2 * h2), axis=1)
    return float(-np.mean(log_mix))
