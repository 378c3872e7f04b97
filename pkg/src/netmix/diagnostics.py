"""
Posterior summaries: thinning, credible intervals, posterior-mode
representatives, Hamming-proportion tables, clustering entropy and purity,
allocation proportions and label-switch realignment.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graph import edge_list, from_edge_vector, to_edge_vector
from .sampler import PosteriorSamples


def thin_indices(total: int, burn_in: int, lag: int) -> np.ndarray:
    """Iteration numbers kept after burn-in and thinning: ``burn_in + lag``,
    ``burn_in + 2 lag``, ... up to ``total`` (iterations count from 1)."""
    if lag < 1:
        raise ValueError("lag must be at least 1")
    if not 0 <= burn_in < total:
        raise ValueError(f"need 0 <= burn_in < total, got burn_in={burn_in}, total={total}")
    return np.arange(burn_in + lag, total + 1, lag, dtype=np.int64)


def thin(samples, burn_in: int, lag: int):
    """Burn-in and thinning.

    For :class:`PosteriorSamples` the draws whose recorded iteration is kept
    by :func:`thin_indices` are selected.  For an array, row ``t - 1`` is
    taken to be iteration ``t``.
    """
    if isinstance(samples, PosteriorSamples):
        if len(samples) == 0:
            raise ValueError("no draws to thin")
        total = int(samples.iterations.max())
        keep = np.isin(samples.iterations, thin_indices(total, burn_in, lag))
        return samples.select(np.flatnonzero(keep))
    arr = np.asarray(samples)
    return arr[thin_indices(len(arr), burn_in, lag) - 1]


def credible_interval(draws, level: float = 0.95):
    """Equal-tailed interval from empirical quantiles with linear
    interpolation between order statistics."""
    x = np.asarray(draws, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("credible_interval needs at least one draw")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    a = (1.0 - level) / 2.0
    lo, hi = np.quantile(x, [a, 1.0 - a], method="linear")
    return float(lo), float(hi)


def posterior_mode_representative(draws, n=None):
    """Most frequent representative among ``draws`` and its relative frequency.

    ``draws`` holds edge vectors ``(D, n(n-1)/2)`` or adjacency matrices
    ``(D, n, n)``.  Ties go to the lexicographically smallest edge vector.
    Returns ``(adjacency matrix, mass)``.
    """
    d = np.asarray(draws, dtype=np.uint8)
    if d.ndim == 3:
        n = d.shape[1]
        d = np.stack([to_edge_vector(a) for a in d])
    if d.ndim != 2 or len(d) == 0:
        raise ValueError("need at least one draw")
    if n is None:
        n = int(round((1 + np.sqrt(1 + 8 * d.shape[1])) / 2))
    uniq, counts = np.unique(d, axis=0, return_counts=True)
    best = int(np.argmax(counts))  # np.unique sorts rows, so the first maximum is the smallest
    return from_edge_vector(uniq[best], n), float(counts[best] / len(d))


def hamming_proportions(draws, truth, thresholds=(1, 5, 10)):
    """Fraction of draws within Hamming distance ``t`` of ``truth`` for each
    threshold ``t``.  Edge vectors or adjacency matrices are accepted."""
    d = np.asarray(draws, dtype=np.int64)
    t = np.asarray(truth, dtype=np.int64)
    if d.ndim == 3:
        iu = np.triu_indices(d.shape[1], k=1)
        d = d[:, iu[0], iu[1]]
        t = t[iu]
    if d.shape[1:] != t.shape:
        raise ValueError(f"dimension mismatch: draws {d.shape[1:]} vs truth {t.shape}")
    dist = np.sum(d != t, axis=1)
    return tuple(float(np.mean(dist <= th)) for th in thresholds)


def _contingency(z, truth):
    z = np.asarray(z, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if z.shape != truth.shape:
        raise ValueError("z and truth must have equal length")
    _, zi = np.unique(z, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    table = np.zeros((zi.max() + 1, ti.max() + 1), dtype=np.int64)
    np.add.at(table, (zi, ti), 1)
    return table


def clustering_entropy(z, truth, C: int) -> float:
    """Size-weighted entropy of the true classes inside each inferred cluster,
    in nats, divided by ``log C``.  Zero means every inferred cluster is pure;
    ``C = 1`` gives 0."""
    table = _contingency(z, truth)
    if C <= 1:
        return 0.0
    N = table.sum()
    sizes = table.sum(axis=1, keepdims=True)
    p = table / sizes
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.sum(np.where(p > 0, p * np.log(p), 0.0), axis=1)
    return float(np.sum(sizes.ravel() / N * h) / np.log(C))


def clustering_purity(z, truth) -> float:
    """Fraction of networks that belong to the majority true class of their
    inferred cluster."""
    table = _contingency(z, truth)
    return float(table.max(axis=1).sum() / table.sum())


def allocation_proportions(z_draws, C: int) -> np.ndarray:
    """(N, C) frequency of each cluster label per network across draws."""
    z = np.asarray(z_draws, dtype=np.int64)
    if z.ndim != 2 or len(z) == 0:
        raise ValueError("need at least one draw of shape (draws, N)")
    out = np.zeros((z.shape[1], C))
    for c in range(C):
        out[:, c] = np.mean(z == c, axis=0)
    return out


def block_allocation_proportions(b_draws, slot: int, K: int) -> np.ndarray:
    """(n, K) frequency of each block label per node for representative
    ``slot``; ``b_draws`` has shape (draws, slots, n)."""
    b = np.asarray(b_draws, dtype=np.int64)
    return allocation_proportions(b[:, slot, :], K)


def _assignment(cost):
    """Optimal assignment ``perm`` (draw label i -> reference label perm[i]).
    Ties go to the permutation with the most fixed points; the tie-break
    weight keeps the total below one unit of integer cost."""
    C = cost.shape[0]
    tie = (1.0 / (C + 1)) * (1.0 - np.eye(C))
    rows, cols = linear_sum_assignment(cost + tie)
    perm = np.empty(C, dtype=np.int64)
    perm[rows] = cols
    return perm


def permute_draw(samples: PosteriorSamples, d: int, perm):
    """Apply the relabeling ``old label i -> perm[i]`` to draw ``d`` in place."""
    perm = np.asarray(perm, dtype=np.int64)
    inv = np.argsort(perm)
    samples.z[d] = perm[samples.z[d]]
    for name in ("tau", "p", "q"):
        getattr(samples, name)[d] = getattr(samples, name)[d][inv]
    if not samples.outlier:
        for name in ("w", "theta", "b", "reps_packed"):
            getattr(samples, name)[d] = getattr(samples, name)[d][inv]


def relabel_samples(samples: PosteriorSamples) -> tuple[PosteriorSamples, np.ndarray]:
    """Undo label switching against the draw with the highest log posterior.

    Each draw's clusters are matched to the reference clusters by the
    assignment minimising total Hamming distance between representatives.
    In the outlier model the representative is shared, so clusters are
    matched on the distance between their (p, q) pairs instead.  Returns
    the relabeled copy and the (draws, C) permutations that were applied.
    """
    if len(samples) == 0:
        raise ValueError("need at least one draw")
    out = replace(samples, **{k: getattr(samples, k).copy() for k in
                              ("z", "tau", "p", "q", "w", "theta", "b", "reps_packed")})
    ref = int(np.argmax(samples.log_posterior))
    C = samples.C
    perms = np.empty((len(samples), C), dtype=np.int64)
    if samples.outlier:
        ref_pq = np.stack([samples.p[ref], samples.q[ref]], axis=1)
    else:
        reps = samples.reps.astype(np.int64)
        ref_reps = reps[ref]
    for d in range(len(samples)):
        if samples.outlier:
            pq = np.stack([samples.p[d], samples.q[d]], axis=1)
            cost = np.abs(pq[:, None, :] - ref_pq[None, :, :]).sum(axis=2)
            # scale so that the identity tie-break only matters for exact ties
            cost = cost * 1e6
        else:
            cost = (reps[d][:, None, :] != ref_reps[None, :, :]).sum(axis=2).astype(np.float64)
        perms[d] = _assignment(cost)
        permute_draw(out, d, perms[d])
    return out, perms


def align_to_truth(z_draws, truth_z, C: int) -> np.ndarray:
    """Map inferred cluster labels to true labels by maximum total overlap
    across all draws.  Returns ``perm`` with inferred label i -> true label
    perm[i], of length ``max(C, number of true labels)``."""
    z = np.atleast_2d(np.asarray(z_draws, dtype=np.int64))
    t = np.asarray(truth_z, dtype=np.int64)
    C_true = int(t.max()) + 1
    size = max(C, C_true)
    overlap = np.zeros((size, size))
    for row in z:
        np.add.at(overlap, (row, t), 1)
    rows, cols = linear_sum_assignment(-overlap)
    perm = np.empty(size, dtype=np.int64)
    perm[rows] = cols
    return perm


def _parameter_rows(samples: PosteriorSamples, level):
    rows = []

    def add(name, idx, draws):
        lo, hi = credible_interval(draws, level)
        rows.append({"parameter": name, "cluster_index": idx, "mean": float(np.mean(draws)),
                     "lower": lo, "upper": hi})

    for name in ("tau", "p", "q"):
        vals = getattr(samples, name)
        for c in range(samples.C):
            add(name, c, vals[:, c])
    for r in range(samples.n_slots):
        for k in range(samples.K):
            add(f"w_{k}", r, samples.w[:, r, k])
        for k in range(samples.K):
            for l in range(k, samples.K):
                add(f"theta_{k}_{l}", r, samples.theta[:, r, k, l])
    add("log_posterior", None, samples.log_posterior)
    return rows


def summarize(samples: PosteriorSamples, truth_z=None, truth_reps=None, level: float = 0.95,
              thresholds=(1, 5, 10), relabel: bool = False) -> dict:
    """Build the summary report as a JSON-ready dict.

    ``truth_z`` (length N) and ``truth_reps`` (one edge vector or adjacency
    matrix per true cluster, or a single one for the outlier model) are
    optional; the truth-dependent sections are omitted without them.
    """
    if len(samples) == 0:
        raise ValueError("no draws to summarize")
    perms = None
    if relabel:
        samples, perms = relabel_samples(samples)
    reps = samples.reps
    report = {
        "n_draws": len(samples), "C": samples.C, "K": samples.K, "n": samples.n,
        "N": int(samples.z.shape[1]), "outlier": bool(samples.outlier), "level": level,
        "relabeled": bool(relabel),
        "parameters": _parameter_rows(samples, level),
        "representatives": [],
        "allocation": allocation_proportions(samples.z, samples.C).tolist(),
        "block_allocation": [block_allocation_proportions(samples.b, r, samples.K).tolist()
                             for r in range(samples.n_slots)],
    }
    if perms is not None:
        report["switched_draws"] = int(np.sum(np.any(perms != np.arange(samples.C), axis=1)))
    for r in range(samples.n_slots):
        mode, mass = posterior_mode_representative(reps[:, r], samples.n)
        report["representatives"].append({"slot": r, "mass": mass,
                                          "edges": [list(e) for e in edge_list(mode)]})
    if truth_z is not None:
        truth_z = np.asarray(truth_z, dtype=np.int64)
        ent = np.array([clustering_entropy(z, truth_z, samples.C) for z in samples.z])
        pur = np.array([clustering_purity(z, truth_z) for z in samples.z])
        report["clustering"] = {
            "mean_entropy": float(ent.mean()), "mean_purity": float(pur.mean()),
            "perfect_fraction": float(np.mean((ent == 0) & (pur == 1))),
        }
    if truth_reps is not None:
        t = np.asarray(truth_reps, dtype=np.uint8)
        if t.ndim == 3:
            t = np.stack([to_edge_vector(a) for a in t])
        t = np.atleast_2d(t)
        if samples.outlier:
            match = np.zeros(len(t), dtype=np.int64)
        elif truth_z is not None:
            if len(t) > samples.C:
                raise ValueError("more true representatives than inferred clusters")
            match = np.argsort(align_to_truth(samples.z, truth_z, samples.C))[: len(t)]
        else:
            match = np.arange(len(t))
        report["hamming"] = [
            {"truth_index": j, "slot": int(match[j]), "thresholds": list(thresholds),
             "proportions": list(hamming_proportions(reps[:, match[j]], t[j], thresholds))}
            for j in range(len(t))]
    return report
