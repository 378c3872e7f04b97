"""Compiled inner loops.  Randomness comes in as pre-drawn uniforms so that
the caller's ``numpy.random.Generator`` stays the only source of entropy."""

import numpy as np
from numba import njit


@njit(cache=True)
def block_logits(adj, b, i, logw, logth, log1mth):
    """Unnormalised log P(b_i = k | rest) for every block k."""
    n = adj.shape[0]
    K = logw.shape[0]
    edges = np.zeros(K)
    sizes = np.zeros(K)
    for j in range(n):
        if j == i:
            continue
        l = b[j]
        sizes[l] += 1.0
        if adj[i, j]:
            edges[l] += 1.0
    out = np.empty(K)
    for k in range(K):
        acc = logw[k]
        for l in range(K):
            acc += edges[l] * logth[k, l] + (sizes[l] - edges[l]) * log1mth[k, l]
        out[k] = acc
    return out


@njit(cache=True)
def sample_categorical_log(logits, u):
    """Inverse-CDF draw from normalised ``exp(logits)`` using uniform ``u``."""
    K = logits.shape[0]
    m = logits.max()
    total = 0.0
    probs = np.empty(K)
    for k in range(K):
        probs[k] = np.exp(logits[k] - m)
        total += probs[k]
    target = u * total
    acc = 0.0
    for k in range(K):
        acc += probs[k]
        if target < acc:
            return k
    return K - 1


@njit(cache=True)
def sweep_blocks(adj, b, logw, logth, log1mth, uniforms):
    """Sequential single-site update of every node's block label, in node
    order, each conditioned on the latest labels of the others.  ``b`` is
    modified in place."""
    n = adj.shape[0]
    for i in range(n):
        logits = block_logits(adj, b, i, logw, logth, log1mth)
        b[i] = sample_categorical_log(logits, uniforms[i])
    return b
