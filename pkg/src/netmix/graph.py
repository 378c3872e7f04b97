"""
Binary undirected networks on a shared node set.

Adjacency matrices are plain ``numpy`` arrays of shape ``(n, n)`` that are
symmetric, binary and have a zero diagonal.  A :class:`NetworkPopulation`
stacks ``N`` of them and keeps the upper-triangle edge vectors that the
likelihood code works with.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

METRICS = ("hamming", "jaccard", "l2")


class AdjacencyError(ValueError):
    """Raised when an array is not a valid undirected simple graph."""

    def __init__(self, message, network=None, i=None, j=None):
        super().__init__(message)
        self.network = network
        self.i = i
        self.j = j


def check_adjacency(a, network=None) -> np.ndarray:
    """Validate ``a`` and return it as a read-only ``uint8`` array.

    The first violating entry (row-major order) is reported in the error.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise AdjacencyError(f"expected a square matrix, got shape {a.shape}", network)
    where = "" if network is None else f"network {network}: "
    bad = np.argwhere((a != 0) & (a != 1))
    if len(bad):
        i, j = map(int, bad[0])
        raise AdjacencyError(f"{where}entry ({i},{j}) is not 0/1", network, i, j)
    bad = np.argwhere(np.diag(np.diag(a)) != 0)
    if len(bad):
        i = int(bad[0, 0])
        raise AdjacencyError(f"{where}self-loop at ({i},{i})", network, i, i)
    bad = np.argwhere(a != a.T)
    if len(bad):
        i, j = map(int, bad[0])
        raise AdjacencyError(f"{where}asymmetric entry ({i},{j})", network, i, j)
    out = a.astype(np.uint8, copy=True)
    out.setflags(write=False)
    return out


def n_pairs(n: int) -> int:
    return n * (n - 1) // 2


def upper_indices(n: int):
    """Row/column indices of the pairs ``i < j`` in row-major order."""
    return np.triu_indices(n, k=1)


def to_edge_vector(a) -> np.ndarray:
    a = np.asarray(a)
    return a[upper_indices(a.shape[0])].astype(np.uint8)


def from_edge_vector(v, n: int) -> np.ndarray:
    v = np.asarray(v)
    if v.shape[-1] != n_pairs(n):
        raise ValueError(f"edge vector of length {v.shape[-1]} does not match n={n}")
    a = np.zeros(v.shape[:-1] + (n, n), dtype=np.uint8)
    iu, ju = upper_indices(n)
    a[..., iu, ju] = v
    a[..., ju, iu] = v
    return a


def edge_list(a) -> list[tuple[int, int]]:
    a = np.asarray(a)
    iu, ju = upper_indices(a.shape[0])
    sel = a[iu, ju] != 0
    return list(zip(iu[sel].tolist(), ju[sel].tolist()))


def from_edge_list(edges, n: int) -> np.ndarray:
    a = np.zeros((n, n), dtype=np.uint8)
    for i, j in edges:
        if i == j:
            raise AdjacencyError(f"self-loop at ({i},{i})", None, i, i)
        a[i, j] = a[j, i] = 1
    return a


@dataclass(frozen=True)
class NetworkPopulation:
    """An ordered collection of networks sharing the same ``n`` nodes.

    Parameters
    ----------
    networks : array of shape (N, n, n)
        Adjacency matrices.  Validated on construction.
    """

    networks: np.ndarray
    edges: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nets = np.asarray(self.networks)
        if nets.ndim == 2:
            nets = nets[None]
        if nets.ndim != 3 or len(nets) < 1:
            raise AdjacencyError("a population needs at least one (n, n) network")
        checked = np.stack([check_adjacency(a, k) for k, a in enumerate(nets)])
        checked.setflags(write=False)
        object.__setattr__(self, "networks", checked)
        iu, ju = upper_indices(checked.shape[1])
        edges = np.ascontiguousarray(checked[:, iu, ju])
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

    @property
    def N(self) -> int:
        return self.networks.shape[0]

    @property
    def n(self) -> int:
        return self.networks.shape[1]

    @property
    def n_pairs(self) -> int:
        return self.edges.shape[1]

    def __len__(self):
        return self.N

    def __getitem__(self, k):
        return self.networks[k]

    def subset(self, index) -> "NetworkPopulation":
        return NetworkPopulation(self.networks[np.asarray(index)])


def _check_pair(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def hamming_distance(a, b) -> int:
    """Number of unordered node pairs on which ``a`` and ``b`` disagree."""
    a, b = _check_pair(a, b)
    iu = upper_indices(a.shape[0])
    return int(np.count_nonzero(a[iu] != b[iu]))


def jaccard_distance(a, b) -> float:
    """``1 - |E_a & E_b| / |E_a | E_b|``; two empty graphs are at distance 0."""
    a, b = _check_pair(a, b)
    iu = upper_indices(a.shape[0])
    ea, eb = a[iu] != 0, b[iu] != 0
    union = np.count_nonzero(ea | eb)
    if union == 0:
        return 0.0
    return 1.0 - np.count_nonzero(ea & eb) / union


def l2_distance(a, b) -> float:
    """Frobenius norm of ``a - b`` over the full matrix (each pair counted twice)."""
    a, b = _check_pair(a, b)
    diff = a.astype(np.float64) - b.astype(np.float64)
    return float(np.sqrt(np.sum(diff * diff)))


def distance_matrix(pop: NetworkPopulation, metric: str = "hamming") -> np.ndarray:
    """Pairwise distances between all networks of ``pop``.

    Computed from the edge vectors in one shot; the results agree with the
    scalar functions above.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; supported: {', '.join(METRICS)}")
    if pop.N < 2:
        raise ValueError("distance_matrix needs at least two networks")
    x = pop.edges.astype(np.float64)
    inter = x @ x.T
    size = x.sum(axis=1)
    # hamming = |E_a| + |E_b| - 2 |E_a & E_b|
    ham = size[:, None] + size[None, :] - 2.0 * inter
    if metric == "hamming":
        d = ham
    elif metric == "l2":
        d = np.sqrt(2.0 * ham)
    else:
        union = size[:, None] + size[None, :] - inter
        with np.errstate(invalid="ignore", divide="ignore"):
            d = np.where(union > 0, 1.0 - inter / np.where(union > 0, union, 1.0), 0.0)
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


def edge_frequency(pop: NetworkPopulation, subset=None) -> np.ndarray:
    """Proportion of (selected) networks containing each edge, as an n x n matrix."""
    nets = pop.networks
    if subset is not None:
        subset = np.asarray(subset, dtype=np.int64)
        if subset.size == 0:
            raise ValueError("edge_frequency needs a nonempty subset")
        nets = nets[subset]
    return nets.mean(axis=0, dtype=np.float64)


def classical_mds(d, dim: int = 2) -> np.ndarray:
    """Classical (Torgerson) multidimensional scaling.

    Parameters
    ----------
    d : array of shape (N, N)
        Symmetric distance matrix.
    dim : int
        Number of output dimensions, at most ``N - 1``.

    Returns
    -------
    coords : array of shape (N, dim)
        Columns ordered by decreasing eigenvalue.  Each column is scaled by
        the square root of its (clipped at zero) eigenvalue and its sign is
        fixed so that the first nonzero coordinate is positive.
    """
    d = np.asarray(d, dtype=np.float64)
    N = d.shape[0]
    if d.shape != (N, N):
        raise ValueError("distance matrix must be square")
    if dim < 1 or dim > N - 1:
        raise ValueError(f"dim must be in [1, {N - 1}], got {dim}")
    centre = np.eye(N) - np.full((N, N), 1.0 / N)
    b = -0.5 * centre @ (d * d) @ centre
    b = 0.5 * (b + b.T)
    evals, evecs = np.linalg.eigh(b)
    order = np.argsort(evals)[::-1][:dim]
    evals = np.clip(evals[order], 0.0, None)
    coords = evecs[:, order] * np.sqrt(evals)
    tol = 1e-12 * max(1.0, float(np.abs(coords).max(initial=0.0)))
    for k in range(dim):
        nz = np.flatnonzero(np.abs(coords[:, k]) > tol)
        if len(nz) == 0:
            coords[:, k] = 0.0
        elif coords[nz[0], k] < 0:
            coords[:, k] = -coords[:, k]
    return coords
