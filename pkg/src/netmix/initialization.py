"""
Starting values for the sampler.

Cluster memberships come from k-medoids runs under several network
distances combined by majority vote; representatives are drawn edge by
edge from within-cluster edge frequencies; block labels come from spectral
clustering of each initial representative.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graph import METRICS, NetworkPopulation, distance_matrix, edge_frequency, to_edge_vector
from .sampler import ChainState


@dataclass
class InitPlan:
    C: int
    K: int
    seed: int = 0
    metrics: tuple = METRICS
    max_kmedoids_iters: int = 100

    def __post_init__(self):
        self.metrics = tuple(self.metrics)
        if not self.metrics:
            raise ValueError("at least one metric is required")
        bad = [m for m in self.metrics if m not in METRICS]
        if bad:
            raise ValueError(f"unsupported metric(s): {', '.join(bad)}")
        if self.C < 1 or self.K < 1:
            raise ValueError("C and K must be positive")

    def to_dict(self):
        d = asdict(self)
        d["metrics"] = list(self.metrics)
        return d


def kmedoids_cost(d, medoids, labels) -> float:
    return float(np.sum(d[np.arange(len(labels)), np.asarray(medoids)[labels]]))


def k_medoids(d, C, seed=0, max_iters=100, return_history=False):
    """Partitioning around medoids on a precomputed distance matrix.

    The first medoid is picked at random from ``seed``; the remaining ones
    greedily maximise the distance to the nearest chosen medoid.  The
    algorithm then alternates nearest-medoid assignment (ties go to the
    lowest medoid slot) and medoid update (the member with the smallest
    distance sum, ties to the lowest network index) until a fixpoint.

    Returns labels in ``0..C-1`` (slot of the assigned medoid), and the
    objective after every iteration if ``return_history``.
    """
    d = np.asarray(d, dtype=np.float64)
    N = d.shape[0]
    if C > N:
        raise ValueError(f"cannot form {C} medoids from {N} networks")
    if C < 1:
        raise ValueError("C must be positive")
    rng = np.random.default_rng(seed)
    medoids = [int(rng.integers(N))]
    while len(medoids) < C:
        gap = d[:, medoids].min(axis=1)
        gap[medoids] = -np.inf
        medoids.append(int(np.argmax(gap)))
    medoids = np.array(medoids)
    history = []
    labels = np.argmin(d[:, medoids], axis=1)
    for _ in range(max_iters):
        labels = np.argmin(d[:, medoids], axis=1)
        history.append(kmedoids_cost(d, medoids, labels))
        new = medoids.copy()
        for c in range(C):
            members = np.flatnonzero(labels == c)
            if len(members) == 0:
                continue
            within = d[np.ix_(members, members)].sum(axis=1)
            new[c] = members[np.argmin(within)]
        if np.array_equal(new, medoids):
            break
        medoids = new
    labels = np.argmin(d[:, medoids], axis=1)
    if return_history:
        history.append(kmedoids_cost(d, medoids, labels))
        return labels, history
    return labels


def align_labels(labels, reference, n_labels=None):
    """Relabel ``labels`` to agree with ``reference`` as much as possible
    (optimal one-to-one assignment of label values)."""
    labels = np.asarray(labels, dtype=np.int64)
    reference = np.asarray(reference, dtype=np.int64)
    L = n_labels or int(max(labels.max(), reference.max())) + 1
    agree = np.zeros((L, L))
    np.add.at(agree, (labels, reference), 1)
    rows, cols = linear_sum_assignment(-agree)
    mapping = np.empty(L, dtype=np.int64)
    mapping[rows] = cols
    return mapping[labels]


def majority_vote(labelings, reference=0):
    """Combine several clusterings of the same networks.

    Each labeling is first aligned to ``labelings[reference]``; every network
    then takes its most frequent aligned label.  Without a unique winner the
    reference label is kept.
    """
    labelings = [np.asarray(x, dtype=np.int64) for x in labelings]
    if not labelings:
        raise ValueError("need at least one labeling")
    N = len(labelings[0])
    if any(len(x) != N for x in labelings):
        raise ValueError("all labelings must have the same length")
    ref = labelings[reference]
    if len(labelings) == 1:
        return ref.copy()
    L = int(max(x.max() for x in labelings)) + 1
    aligned = np.stack([ref if i == reference else align_labels(x, ref, L)
                        for i, x in enumerate(labelings)])
    votes = np.zeros((N, L), dtype=np.int64)
    np.add.at(votes, (np.repeat(np.arange(N), len(aligned)), aligned.T.ravel()), 1)
    top = votes.max(axis=1)
    unique = (votes == top[:, None]).sum(axis=1) == 1
    return np.where(unique, votes.argmax(axis=1), ref)


def init_representative(pop: NetworkPopulation, z, c, rng) -> np.ndarray:
    """Draw each pair of a representative from the within-cluster edge
    frequency; an empty cluster falls back to the whole population."""
    members = np.flatnonzero(np.asarray(z) == c)
    freq = edge_frequency(pop, members if len(members) else None)
    iu = np.triu_indices(pop.n, k=1)
    draw = (rng.random(len(iu[0])) < freq[iu]).astype(np.uint8)
    a = np.zeros((pop.n, pop.n), dtype=np.uint8)
    a[iu] = draw
    return a + a.T


def _kmeans(x, K, rng, restarts=20, max_iter=100):
    """Lloyd's algorithm with k-means++ seeding; best of ``restarts`` runs
    (ties keep the earlier run), nearest-centre ties go to the lower index."""
    best_labels, best_inertia = None, np.inf
    n = len(x)
    for _ in range(restarts):
        centres = [x[rng.integers(n)]]
        for _ in range(1, K):
            d2 = np.min(((x[:, None, :] - np.array(centres)[None]) ** 2).sum(-1), axis=1)
            total = d2.sum()
            if total <= 0:
                centres.append(x[rng.integers(n)])
            else:
                centres.append(x[min(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"), n - 1)])
        centres = np.array(centres)
        labels = None
        for _ in range(max_iter):
            d2 = ((x[:, None, :] - centres[None]) ** 2).sum(-1)
            new = np.argmin(d2, axis=1)
            if labels is not None and np.array_equal(new, labels):
                break
            labels = new
            for k in range(K):
                if np.any(labels == k):
                    centres[k] = x[labels == k].mean(axis=0)
        inertia = ((x - centres[labels]) ** 2).sum()
        if inertia < best_inertia - 1e-12:
            best_labels, best_inertia = labels, inertia
    return best_labels


def canonical_labels(labels):
    """Renumber labels in order of first appearance."""
    labels = np.asarray(labels)
    _, first = np.unique(labels, return_index=True)
    order = labels[np.sort(first)]
    mapping = {int(v): i for i, v in enumerate(order)}
    return np.array([mapping[int(v)] for v in labels], dtype=np.int64)


def spectral_block_init(rep, K, seed=0) -> np.ndarray:
    """Spectral clustering of one representative into ``K`` blocks.

    Uses the bottom-K eigenvectors of the normalised Laplacian (degrees
    floored at 1), row-normalised, clustered by seeded k-means.  Labels are
    numbered by first appearance.
    """
    a = np.asarray(rep, dtype=np.float64)
    n = a.shape[0]
    if K > n:
        raise ValueError(f"cannot split {n} nodes into {K} blocks")
    if K == 1:
        return np.zeros(n, dtype=np.int64)
    deg = np.maximum(a.sum(axis=1), 1.0)
    dinv = 1.0 / np.sqrt(deg)
    lap = np.eye(n) - dinv[:, None] * a * dinv[None, :]
    _, vecs = np.linalg.eigh(lap)
    emb = vecs[:, :K]
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = emb / np.where(norms > 0, norms, 1.0)
    rng = np.random.default_rng(seed)
    return canonical_labels(_kmeans(emb, K, rng))


def initial_noise(pop: NetworkPopulation, rep_edges, members):
    """Moment estimates of (p, q) for the given members against a
    representative, kept inside (0, 0.5)."""
    lo, hi = 0.01, 0.49
    if len(members) == 0:
        return 0.1, 0.1
    x = pop.edges[members].astype(np.float64)
    r = np.asarray(rep_edges, dtype=np.float64)
    absent, present = (1 - r).sum(), r.sum()
    p = (x @ (1 - r)).sum() / (len(members) * absent) if absent else 0.1
    q = ((1 - x) @ r).sum() / (len(members) * present) if present else 0.1
    return float(np.clip(p, lo, hi)), float(np.clip(q, lo, hi))


def initial_sbm(rep, b, K, hyper):
    """Posterior-mean style starting values for w and theta given labels."""
    n = len(b)
    sizes = np.bincount(b, minlength=K).astype(np.float64)
    w = (sizes + hyper.chi) / (n + K * hyper.chi)
    theta = np.empty((K, K))
    rep = np.asarray(rep)
    for k in range(K):
        for l in range(k, K):
            block = rep[np.ix_(b == k, b == l)]
            if k == l:
                edges = block.sum() / 2
                pairs = sizes[k] * (sizes[k] - 1) / 2
            else:
                edges = block.sum()
                pairs = sizes[k] * sizes[l]
            theta[k, l] = theta[l, k] = (edges + hyper.epsilon) / (pairs + hyper.epsilon + hyper.zeta)
    return w, theta


@dataclass
class InitSummary:
    metrics: list
    labelings: dict
    agreement_rate: float
    z: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def initial_memberships(pop: NetworkPopulation, plan: InitPlan):
    """k-medoids per metric, combined by majority vote (first metric is the
    reference).  Returns ``(z, summary)``."""
    if plan.C == 1:
        z = np.zeros(pop.N, dtype=np.int64)
        return z, InitSummary(list(plan.metrics), {}, 1.0, z.tolist())
    seeds = np.random.SeedSequence(plan.seed).spawn(len(plan.metrics))
    labelings = {}
    for metric, ss in zip(plan.metrics, seeds):
        d = distance_matrix(pop, metric)
        labelings[metric] = k_medoids(d, plan.C, int(ss.generate_state(1)[0]), plan.max_kmedoids_iters)
    z = majority_vote(list(labelings.values()), reference=0)
    aligned = [align_labels(x, z, plan.C) for x in labelings.values()]
    agreement = float(np.mean([np.all([a[k] == z[k] for a in aligned]) for k in range(pop.N)]))
    summary = InitSummary(list(plan.metrics), {m: x.tolist() for m, x in labelings.items()},
                          agreement, z.tolist())
    return z.astype(np.int64), summary


def initialize_state(pop: NetworkPopulation, plan: InitPlan, hyper, outlier=False):
    """Build a :class:`ChainState` from the initialisation pipeline.

    In outlier mode there is a single representative drawn from the
    whole-population edge frequencies.
    """
    if outlier and plan.C != 2:
        raise ValueError("the outlier model needs C = 2")
    rng = np.random.default_rng(np.random.SeedSequence(plan.seed).spawn(2)[1])
    z, summary = initial_memberships(pop, plan)
    slots = 1 if outlier else plan.C
    reps, bs, ws, thetas = [], [], [], []
    for r in range(slots):
        rep = (init_representative(pop, np.zeros(pop.N), 0, rng) if outlier
               else init_representative(pop, z, r, rng))
        b = spectral_block_init(rep, plan.K, seed=int(rng.integers(2 ** 32)))
        w, theta = initial_sbm(rep, b, plan.K, hyper)
        reps.append(to_edge_vector(rep))
        bs.append(b)
        ws.append(w)
        thetas.append(theta)
    rep_index = np.zeros(plan.C, np.int64) if outlier else np.arange(plan.C)
    p, q = zip(*[initial_noise(pop, reps[rep_index[c]], np.flatnonzero(z == c)) for c in range(plan.C)])
    counts = np.bincount(z, minlength=plan.C)
    tau = (counts + hyper.psi) / (pop.N + plan.C * hyper.psi)
    state = ChainState(reps=np.array(reps), p=p, q=q, z=z, tau=tau, w=np.array(ws),
                       theta=np.array(thetas), b=np.array(bs), rep_index=rep_index)
    state.validate(pop)
    return state, summary
