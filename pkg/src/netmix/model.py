"""
Measurement-error likelihood and stochastic-block-model prior.

Every observed network is a noisy copy of its cluster representative: an
absent representative edge shows up with probability ``p`` (false positive)
and a present one goes missing with probability ``q`` (false negative).
Representatives follow an SBM.  Labels (blocks, clusters) are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy.special import betaln, gammaln

from .graph import NetworkPopulation, to_edge_vector, upper_indices


@dataclass(frozen=True)
class NoiseParams:
    p: float
    q: float

    def __post_init__(self):
        for name in ("p", "q"):
            v = getattr(self, name)
            if not 0.0 < v < 0.5:
                raise ValueError(f"{name} must lie in (0, 0.5), got {v}")


@dataclass(frozen=True)
class SbmParams:
    """Block labels ``b`` (length n, values in 0..K-1), weights ``w`` and
    the symmetric K x K edge-probability matrix ``theta``."""

    b: np.ndarray
    w: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=np.int64)
        w = np.asarray(self.w, dtype=np.float64)
        theta = np.atleast_2d(np.asarray(self.theta, dtype=np.float64))
        K = len(w)
        if theta.shape != (K, K):
            raise ValueError(f"theta must be {K}x{K}, got {theta.shape}")
        if np.any(w <= 0) or not np.isclose(w.sum(), 1.0):
            raise ValueError("w must be a positive probability vector")
        if not np.allclose(theta, theta.T):
            raise ValueError("theta must be symmetric")
        if np.any(theta <= 0) or np.any(theta >= 1):
            raise ValueError("theta entries must lie in (0, 1)")
        if b.size and (b.min() < 0 or b.max() >= K):
            raise ValueError("block labels out of range")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "theta", theta)

    @property
    def K(self) -> int:
        return len(self.w)


@dataclass(frozen=True)
class ClusterModel:
    representative: np.ndarray
    noise: NoiseParams
    sbm: SbmParams


@dataclass(frozen=True)
class Hyperparams:
    """Prior hyperparameters.

    ``alpha0, beta0`` : Beta prior on p.  ``gamma0, delta0`` : Beta prior on q.
    ``psi`` : symmetric Dirichlet on tau.  ``chi`` : symmetric Dirichlet on w.
    ``epsilon, zeta`` : Beta prior on every theta entry.
    """

    alpha0: float = 0.5
    beta0: float = 0.5
    gamma0: float = 0.5
    delta0: float = 0.5
    psi: float = 1.0
    chi: float = 1.0
    epsilon: float = 0.5
    zeta: float = 0.5

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not v > 0:
                raise ValueError(f"hyperparameter {k} must be positive, got {v}")

    def to_dict(self):
        return asdict(self)


def agreement_counts(obs_edges, rep_edges):
    """Counts ``(n11, n10, n01, n00)`` where the first digit is the
    representative's edge state and the second the observation's."""
    obs = np.asarray(obs_edges, dtype=np.int64)
    rep = np.asarray(rep_edges, dtype=np.int64)
    n11 = int(np.sum(obs & rep))
    n10 = int(np.sum(rep)) - n11
    n01 = int(np.sum(obs)) - n11
    n00 = obs.size - n11 - n10 - n01
    return n11, n10, n01, n00


def loglik_from_counts(n11, n10, n01, n00, p, q):
    """Measurement-error log-likelihood given agreement counts.  Vectorised
    over array-valued counts."""
    return (n11 * np.log1p(-q) + n10 * np.log(q)
            + n01 * np.log(p) + n00 * np.log1p(-p))


def network_log_likelihood(obs, rep, noise: NoiseParams) -> float:
    obs = np.asarray(obs)
    rep = np.asarray(rep)
    if obs.shape != rep.shape:
        raise ValueError(f"dimension mismatch: {obs.shape} vs {rep.shape}")
    counts = agreement_counts(to_edge_vector(obs), to_edge_vector(rep))
    return float(loglik_from_counts(*counts, noise.p, noise.q))


def population_log_likelihood(pop: NetworkPopulation, z, models) -> float:
    """Sum of per-network log-likelihoods, network ``k`` scored against
    cluster ``z[k]``."""
    z = np.asarray(z, dtype=np.int64)
    if z.shape != (pop.N,):
        raise ValueError(f"z must have length {pop.N}")
    if z.min() < 0 or z.max() >= len(models):
        raise ValueError("cluster label out of range")
    return float(sum(network_log_likelihood(pop[k], models[c].representative, models[c].noise)
                     for k, c in enumerate(z)))


def sbm_log_prob(rep, sbm: SbmParams) -> float:
    """log P(rep | b, theta) over pairs i < j.  The Multinomial(w) term for
    ``b`` is not included."""
    rep = np.asarray(rep)
    n = rep.shape[0]
    if sbm.b.shape != (n,):
        raise ValueError("block labels do not match the representative size")
    iu, ju = upper_indices(n)
    th = sbm.theta[sbm.b[iu], sbm.b[ju]]
    r = rep[iu, ju]
    return float(np.sum(np.where(r == 1, np.log(th), np.log1p(-th))))


def log_beta_density(x, a, b):
    x = np.asarray(x, dtype=np.float64)
    return (a - 1.0) * np.log(x) + (b - 1.0) * np.log1p(-x) - betaln(a, b)


def log_dirichlet_density(x, alpha):
    x = np.asarray(x, dtype=np.float64)
    alpha = np.broadcast_to(np.asarray(alpha, dtype=np.float64), x.shape)
    return float(np.sum((alpha - 1.0) * np.log(x)) + gammaln(alpha.sum()) - np.sum(gammaln(alpha)))


def log_prior_noise(noise: NoiseParams, h: Hyperparams) -> float:
    """Untruncated Beta log densities of p and q.  The truncation to
    (0, 0.5) only shifts a constant that cancels in every MH ratio."""
    return float(log_beta_density(noise.p, h.alpha0, h.beta0)
                 + log_beta_density(noise.q, h.gamma0, h.delta0))


def log_prior_sbm(sbm: SbmParams, h: Hyperparams) -> float:
    """log P(b | w) + log P(w | chi) + sum over k <= l of log P(theta_kl)."""
    K = sbm.K
    out = float(np.sum(np.log(sbm.w[sbm.b])))
    out += log_dirichlet_density(sbm.w, h.chi)
    ku, lu = np.triu_indices(K)
    out += float(np.sum(log_beta_density(sbm.theta[ku, lu], h.epsilon, h.zeta)))
    return out
