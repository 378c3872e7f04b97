"""
Synthetic network populations.

Each cluster gets an SBM representative; every network in the cluster is an
independent noisy copy of it.  Presets ``sim1`` .. ``sim12`` are the twelve
21-node, three-cluster regimes (60 networks per cluster, two blocks).
"""

from __future__ import annotations

from dataclasses import dataclass, asdict, replace

import numpy as np

from .graph import NetworkPopulation, edge_list, from_edge_vector, upper_indices

SBM1 = dict(w=[(0.5, 0.5)] * 3, theta=[[[0.8, 0.2], [0.2, 0.8]]] * 3)
SBM2 = dict(w=[(0.7, 0.3), (0.5, 0.5), (0.3, 0.7)],
            theta=[[[0.7, 0.05], [0.05, 0.8]]] * 3)

# regime -> (p for all clusters, q for all clusters, SBM structure)
_REGIMES = {
    1: (0.1, 0.2, SBM1), 2: (0.1, 0.2, SBM2),
    3: (0.1, 0.3, SBM1), 4: (0.1, 0.3, SBM2),
    5: (0.2, 0.1, SBM1), 6: (0.2, 0.1, SBM2),
    7: (0.2, 0.3, SBM1), 8: (0.2, 0.3, SBM2),
    9: (0.3, 0.1, SBM1), 10: (0.3, 0.1, SBM2),
    11: (0.3, 0.2, SBM1), 12: (0.3, 0.2, SBM2),
}


@dataclass
class RegimeSpec:
    """Everything needed to generate a population.

    ``w[c]`` and ``theta[c]`` are cluster c's block weights and K x K edge
    probabilities; ``p[c]``, ``q[c]`` its noise levels.
    """

    n: int
    N: int
    C: int
    sizes: tuple
    K: int
    w: tuple
    theta: tuple
    p: tuple
    q: tuple
    seed: int = 0
    name: str = "custom"

    def __post_init__(self):
        self.sizes = tuple(int(s) for s in self.sizes)
        self.w = tuple(tuple(float(x) for x in wc) for wc in self.w)
        self.theta = tuple(np.asarray(t, dtype=np.float64).tolist() for t in self.theta)
        self.theta = tuple(tuple(tuple(row) for row in t) for t in self.theta)
        self.p = tuple(float(x) for x in self.p)
        self.q = tuple(float(x) for x in self.q)
        self.validate()

    def validate(self):
        if self.n < 2 or self.N < 1 or self.C < 1 or self.K < 1:
            raise ValueError("n >= 2, N >= 1, C >= 1 and K >= 1 are required")
        if len(self.sizes) != self.C or sum(self.sizes) != self.N:
            raise ValueError(f"cluster sizes {self.sizes} must have C={self.C} entries summing to N={self.N}")
        if any(s < 0 for s in self.sizes):
            raise ValueError("cluster sizes must be nonnegative")
        for name in ("w", "theta", "p", "q"):
            if len(getattr(self, name)) != self.C:
                raise ValueError(f"{name} needs one entry per cluster")
        for c in range(self.C):
            w = np.asarray(self.w[c])
            th = np.asarray(self.theta[c])
            if w.shape != (self.K,) or np.any(w < 0) or not np.isclose(w.sum(), 1.0):
                raise ValueError(f"w[{c}] must be a probability vector of length K")
            if th.shape != (self.K, self.K) or not np.allclose(th, th.T) or np.any((th < 0) | (th > 1)):
                raise ValueError(f"theta[{c}] must be a symmetric KxK matrix in [0, 1]")
            if not (0 <= self.p[c] <= 1 and 0 <= self.q[c] <= 1):
                raise ValueError("noise probabilities must lie in [0, 1]")
        return self

    def to_dict(self):
        d = asdict(self)
        d["theta"] = [[list(r) for r in t] for t in self.theta]
        d["w"] = [list(x) for x in self.w]
        for k in ("sizes", "p", "q"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def preset(name: str, seed: int = 0) -> RegimeSpec:
    """Named regime: ``sim1`` .. ``sim12``."""
    if not name.startswith("sim") or not name[3:].isdigit() or int(name[3:]) not in _REGIMES:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    p, q, sbm = _REGIMES[int(name[3:])]
    return RegimeSpec(n=21, N=180, C=3, sizes=(60, 60, 60), K=2, w=sbm["w"], theta=sbm["theta"],
                      p=(p,) * 3, q=(q,) * 3, seed=seed, name=name)


def preset_names():
    return [f"sim{i}" for i in sorted(_REGIMES)]


def noise_curve_spec(p: float, q: float, seed: int = 0) -> RegimeSpec:
    """SBM-1 regime with all clusters at noise (p, q), for noise sweeps."""
    return replace(preset("sim1", seed), p=(p,) * 3, q=(q,) * 3, name=f"noise-p{p}-q{q}")


def scaling_spec(n: int, N: int, seed: int = 0, p: float = 0.08, q: float = 0.08) -> RegimeSpec:
    """Three equal clusters of n-node networks, noise fixed at 0.08.

    SBM-1 edge probabilities are taken as the n = 25 baseline and scaled by
    ``24 / (n - 1)`` so that expected degrees stay constant across n.
    """
    if N % 3:
        raise ValueError("N must be divisible by 3")
    scale = min(1.0, 24.0 / (n - 1))
    theta = (np.array(SBM1["theta"][0]) * scale).tolist()
    return RegimeSpec(n=n, N=N, C=3, sizes=(N // 3,) * 3, K=2, w=SBM1["w"], theta=[theta] * 3,
                      p=(p,) * 3, q=(q,) * 3, seed=seed, name=f"scale-n{n}-N{N}")


def sample_block_labels(n, w, rng) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    return rng.choice(len(w), size=n, p=w / w.sum()).astype(np.int64)


def sample_sbm_representative(b, theta, rng) -> np.ndarray:
    b = np.asarray(b)
    theta = np.asarray(theta, dtype=np.float64)
    n = len(b)
    iu, ju = upper_indices(n)
    v = (rng.random(len(iu)) < theta[b[iu], b[ju]]).astype(np.uint8)
    return from_edge_vector(v, n)


def perturb_representative(rep, p, q, rng) -> np.ndarray:
    """One noisy observation: representative edges survive with probability
    ``1 - q``, absent pairs appear with probability ``p``."""
    rep = np.asarray(rep)
    n = rep.shape[0]
    iu, ju = upper_indices(n)
    r = rep[iu, ju]
    u = rng.random(len(iu))
    obs = np.where(r == 1, u >= q, u < p).astype(np.uint8)
    return from_edge_vector(obs, n)


@dataclass
class GroundTruth:
    reps: np.ndarray
    b: np.ndarray
    z: np.ndarray
    spec: RegimeSpec

    def to_dict(self):
        return {"representatives": [[list(e) for e in edge_list(r)] for r in self.reps],
                "b": self.b.tolist(), "z": self.z.tolist(), "regime": self.spec.to_dict(),
                "n": self.spec.n}


def generate_population(spec: RegimeSpec, rng=None):
    """Returns ``(population, truth)``."""
    spec.validate()
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    reps, bs, nets, z = [], [], [], []
    for c in range(spec.C):
        b = sample_block_labels(spec.n, spec.w[c], rng)
        rep = sample_sbm_representative(b, spec.theta[c], rng)
        reps.append(rep)
        bs.append(b)
        for _ in range(spec.sizes[c]):
            nets.append(perturb_representative(rep, spec.p[c], spec.q[c], rng))
            z.append(c)
    pop = NetworkPopulation(np.array(nets))
    return pop, GroundTruth(np.array(reps), np.array(bs), np.array(z, dtype=np.int64), spec)


def generate_outlier_population(n, n_major, n_outlier, p=(0.016, 0.025), q=(0.37, 0.2),
                                K=2, w=(0.5, 0.5), theta=((0.6, 0.1), (0.1, 0.6)), seed=0):
    """One shared representative; a majority and an outlier group that differ
    only in their noise levels.  Cluster 0 is the majority."""
    rng = np.random.default_rng(seed)
    b = sample_block_labels(n, w, rng)
    rep = sample_sbm_representative(b, theta, rng)
    nets, z = [], []
    for c, size in enumerate((n_major, n_outlier)):
        for _ in range(size):
            nets.append(perturb_representative(rep, p[c], q[c], rng))
            z.append(c)
    spec = RegimeSpec(n=n, N=n_major + n_outlier, C=2, sizes=(n_major, n_outlier), K=K,
                      w=(w, w), theta=(theta, theta), p=p, q=q, seed=seed, name="outlier")
    return NetworkPopulation(np.array(nets)), GroundTruth(rep[None], b[None], np.array(z), spec)


def empirical_noise(rep, obs):
    """Observed false-positive and false-negative rates of ``obs`` against ``rep``."""
    iu = np.triu_indices(np.asarray(rep).shape[0], k=1)
    r = np.asarray(rep)[iu]
    o = np.asarray(obs)[..., iu[0], iu[1]]
    fp = np.mean(o[..., r == 0]) if np.any(r == 0) else np.nan
    fn = 1.0 - np.mean(o[..., r == 1]) if np.any(r == 1) else np.nan
    return float(fp), float(fn)

