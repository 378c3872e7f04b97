"""
Metropolis-Hastings-within-Gibbs sampler for the mixture of measurement-error
models, and its outlier variant with a single shared representative.

One iteration:

1. tau  ~ Dirichlet(psi + cluster counts)
2. for each cluster c: one MH move on either the representative, p_c or
   q_c (chosen by ``kernel_weights``), then Gibbs updates of w, theta and b
   for that cluster's representative
3. z_k ~ Categorical(tau_c * P(network k | cluster c)) for every network

Representatives are held as upper-triangle edge vectors.  Per (network,
representative) the sampler caches the number of shared edges; together
with the edge totals this gives all four agreement counts, so likelihood
changes cost a handful of multiplies.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, asdict

import numpy as np

from . import _kernels
from .graph import NetworkPopulation, from_edge_vector, n_pairs, upper_indices
from .model import (ClusterModel, Hyperparams, NoiseParams, SbmParams, log_beta_density,
                    log_dirichlet_density, log_prior_noise, log_prior_sbm,
                    loglik_from_counts, population_log_likelihood, sbm_log_prob)

KERNELS = ("representative", "p", "q")
_THETA_EPS = 2.0 ** -53


class ConfigError(ValueError):
    pass


@dataclass
class McmcConfig:
    """Sampler settings.

    ``omega`` defaults to ``4 / (n (n - 1))`` (two expected pair flips per
    local proposal) when left as ``None``.  ``u_weights`` defaults to equal
    weights over ``u_ladder``.
    """

    C: int
    K: int
    iterations: int
    burn_in: int
    thin: int = 1
    seed: int = 0
    omega: float | None = None
    rep_kernel_mix: float = 0.8
    u_ladder: tuple = (0.01, 0.05, 0.1)
    u_weights: tuple | None = None
    kernel_weights: tuple = (1 / 3, 1 / 3, 1 / 3)
    hyper: Hyperparams = field(default_factory=Hyperparams)
    debug: bool = False

    def __post_init__(self):
        if isinstance(self.hyper, dict):
            self.hyper = Hyperparams(**self.hyper)
        self.u_ladder = tuple(float(u) for u in self.u_ladder)
        if self.u_weights is None:
            self.u_weights = tuple(1.0 / len(self.u_ladder) for _ in self.u_ladder)
        self.u_weights = tuple(float(x) for x in self.u_weights)
        self.kernel_weights = tuple(float(x) for x in self.kernel_weights)

    def validate(self):
        if self.C < 1 or self.K < 1:
            raise ConfigError("C and K must be positive")
        if not 0 < self.burn_in < self.iterations:
            raise ConfigError(f"need 0 < burn_in < iterations, got burn_in={self.burn_in}, "
                              f"iterations={self.iterations}")
        if self.thin < 1:
            raise ConfigError("thin must be at least 1")
        if self.omega is not None and not 0 < self.omega < 1:
            raise ConfigError("omega must lie in (0, 1)")
        if not 0 <= self.rep_kernel_mix <= 1:
            raise ConfigError("rep_kernel_mix must lie in [0, 1]")
        if not self.u_ladder or any(not 0 < u < 0.5 for u in self.u_ladder):
            raise ConfigError("every u_ladder entry must lie in (0, 0.5)")
        if len(self.u_weights) != len(self.u_ladder):
            raise ConfigError("u_weights must match u_ladder")
        for name in ("u_weights", "kernel_weights"):
            wts = np.asarray(getattr(self, name))
            if np.any(wts < 0) or not np.isclose(wts.sum(), 1.0):
                raise ConfigError(f"{name} must be nonnegative and sum to 1")
        if len(self.kernel_weights) != 3:
            raise ConfigError("kernel_weights needs one weight per kernel (representative, p, q)")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        return self

    @property
    def n_draws(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    def to_dict(self):
        d = asdict(self)
        d["u_ladder"] = list(self.u_ladder)
        d["u_weights"] = list(self.u_weights)
        d["kernel_weights"] = list(self.kernel_weights)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["hyper"] = Hyperparams(**d.get("hyper", {}))
        return cls(**d)


@dataclass
class ChainState:
    """Full sampler state.

    ``reps`` has one row per representative *slot*: C slots for the mixture
    model and a single shared slot for the outlier model.  ``rep_index[c]``
    is the slot used by cluster c.  ``w``, ``theta`` and ``b`` are per slot.
    """

    reps: np.ndarray
    p: np.ndarray
    q: np.ndarray
    z: np.ndarray
    tau: np.ndarray
    w: np.ndarray
    theta: np.ndarray
    b: np.ndarray
    rep_index: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        self.reps = np.array(self.reps, dtype=np.uint8, ndmin=2)
        self.p = np.array(self.p, dtype=np.float64, ndmin=1)
        self.q = np.array(self.q, dtype=np.float64, ndmin=1)
        self.z = np.array(self.z, dtype=np.int64)
        self.tau = np.array(self.tau, dtype=np.float64, ndmin=1)
        self.w = np.array(self.w, dtype=np.float64, ndmin=2)
        self.theta = np.array(self.theta, dtype=np.float64, ndmin=3)
        self.b = np.array(self.b, dtype=np.int64, ndmin=2)
        self.rep_index = np.array(self.rep_index, dtype=np.int64, ndmin=1)

    @property
    def C(self):
        return len(self.p)

    @property
    def K(self):
        return self.w.shape[1]

    @property
    def outlier(self):
        return self.reps.shape[0] == 1 and self.C > 1

    def copy(self):
        return copy.deepcopy(self)

    def models(self, n):
        """Per-cluster :class:`ClusterModel` views (shared slots repeat)."""
        out = []
        for c in range(self.C):
            r = self.rep_index[c]
            out.append(ClusterModel(from_edge_vector(self.reps[r], n),
                                    NoiseParams(self.p[c], self.q[c]),
                                    SbmParams(self.b[r], self.w[r], self.theta[r])))
        return out

    def validate(self, pop: NetworkPopulation):
        C, R = self.C, self.reps.shape[0]
        P = pop.n_pairs
        problems = []
        if self.reps.shape[1] != P or np.any(self.reps > 1):
            problems.append("representatives must be binary edge vectors of length n(n-1)/2")
        if len(self.q) != C or len(self.tau) != C or len(self.rep_index) != C:
            problems.append("per-cluster arrays must have length C")
        if np.any((self.p <= 0) | (self.p >= 0.5)) or np.any((self.q <= 0) | (self.q >= 0.5)):
            problems.append("p and q must lie in (0, 0.5)")
        if np.any(self.tau < 0) or not np.isclose(self.tau.sum(), 1.0):
            problems.append("tau must lie on the simplex")
        if self.z.shape != (pop.N,) or self.z.min() < 0 or self.z.max() >= C:
            problems.append("z must hold N labels in 0..C-1")
        if np.any((self.rep_index < 0) | (self.rep_index >= R)):
            problems.append("rep_index out of range")
        if self.w.shape[0] != R or self.theta.shape != (R, self.K, self.K) or self.b.shape != (R, pop.n):
            problems.append("SBM arrays must have one entry per representative slot")
        else:
            if np.any(self.w <= 0) or not np.allclose(self.w.sum(axis=1), 1.0):
                problems.append("w must be a positive probability vector")
            if np.any((self.theta <= 0) | (self.theta >= 1)):
                problems.append("theta entries must lie in (0, 1)")
            if not np.allclose(self.theta, np.swapaxes(self.theta, 1, 2)):
                problems.append("theta must be symmetric")
            if self.b.min() < 0 or self.b.max() >= self.K:
                problems.append("block labels out of range")
        if problems:
            raise ValueError("invalid chain state: " + "; ".join(problems))
        return self


@dataclass
class PosteriorSamples:
    """Thinned draws.  Representative edge vectors are stored bit-packed
    (``numpy.packbits`` along the pair axis)."""

    iterations: np.ndarray
    z: np.ndarray
    tau: np.ndarray
    p: np.ndarray
    q: np.ndarray
    w: np.ndarray
    theta: np.ndarray
    b: np.ndarray
    reps_packed: np.ndarray
    log_posterior: np.ndarray
    n: int
    outlier: bool = False
    config: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.iterations)

    @property
    def C(self):
        return self.p.shape[1]

    @property
    def K(self):
        return self.w.shape[2]

    @property
    def n_slots(self):
        return self.reps_packed.shape[1]

    @property
    def rep_index(self):
        return np.zeros(self.C, dtype=np.int64) if self.outlier else np.arange(self.C)

    @property
    def reps(self) -> np.ndarray:
        """Edge vectors of shape (draws, slots, n(n-1)/2)."""
        return np.unpackbits(self.reps_packed, axis=-1, count=n_pairs(self.n))

    def state(self, d) -> ChainState:
        return ChainState(reps=self.reps[d], p=self.p[d], q=self.q[d], z=self.z[d],
                          tau=self.tau[d], w=self.w[d], theta=self.theta[d], b=self.b[d],
                          rep_index=self.rep_index, iteration=int(self.iterations[d]))

    def select(self, index) -> "PosteriorSamples":
        index = np.asarray(index)
        return PosteriorSamples(
            iterations=self.iterations[index], z=self.z[index], tau=self.tau[index],
            p=self.p[index], q=self.q[index], w=self.w[index], theta=self.theta[index],
            b=self.b[index], reps_packed=self.reps_packed[index],
            log_posterior=self.log_posterior[index], n=self.n, outlier=self.outlier,
            config=dict(self.config))


def reflect_half(y: float) -> float:
    """Fold a random-walk candidate back into (0, 0.5)."""
    if y < 0:
        return -y
    if y > 0.5:
        return 1.0 - y
    return y


def log_posterior(pop: NetworkPopulation, state: ChainState, hyper: Hyperparams) -> float:
    """Unnormalised log joint posterior, recomputed from scratch."""
    models = state.models(pop.n)
    out = population_log_likelihood(pop, state.z, models)
    for c in range(state.C):
        out += log_prior_noise(models[c].noise, hyper)
    for r in range(state.reps.shape[0]):
        sbm = SbmParams(state.b[r], state.w[r], state.theta[r])
        out += sbm_log_prob(from_edge_vector(state.reps[r], pop.n), sbm)
        out += log_prior_sbm(sbm, hyper)
    out += float(np.sum(np.log(state.tau[state.z])))
    out += log_dirichlet_density(state.tau, hyper.psi)
    return out


class MixtureSampler:
    """Runs the chain on a fixed population.

    The sampler owns a private ``numpy.random.Generator`` and mutates
    ``self.state`` in place; hand it a copy if the initial state matters.
    """

    def __init__(self, pop: NetworkPopulation, config: McmcConfig, state: ChainState, rng=None):
        self.pop = pop
        self.config = config
        self.hyper = config.hyper
        self.state = state
        state.validate(pop)
        if state.C != config.C or state.K != config.K:
            raise ConfigError("initial state does not match C/K of the configuration")
        self.rng = np.random.default_rng(config.seed) if rng is None else rng

        n, P = pop.n, pop.n_pairs
        self.P = P
        self.omega = config.omega if config.omega is not None else 4.0 / (n * (n - 1)) if n > 1 else 0.5
        self.omega = min(self.omega, 1.0)
        self.X = pop.edges.astype(np.float64)
        self.s = self.X.sum(axis=1)
        self._iu, self._ju = upper_indices(n)
        self._ku, self._lu = np.triu_indices(state.K)
        self._adj = np.zeros((n, n), dtype=np.uint8)
        freq = self.X.mean(axis=0)
        lo = 1.0 / (2 * pop.N)
        f = np.clip(freq, lo, 1.0 - lo)
        self._logf, self._log1mf = np.log(f), np.log1p(-f)
        self._f = f
        self._kernel_cdf = np.cumsum(config.kernel_weights)
        self._u_cdf = np.cumsum(config.u_weights)
        self.refresh_cache()

        self.accepted = {k: 0 for k in KERNELS}
        self.proposed = {k: 0 for k in KERNELS}

    # ------------------------------------------------------------------ caches

    def refresh_cache(self):
        st = self.state
        self.A = self.X @ st.reps.T.astype(np.float64)
        self.e = st.reps.sum(axis=1).astype(np.float64)

    def _slot_clusters(self, r):
        return np.flatnonzero(self.state.rep_index == r)

    def cluster_loglik(self, c, p=None, q=None, A_col=None, e=None):
        """Log-likelihood of the networks currently in cluster ``c``."""
        st = self.state
        r = st.rep_index[c]
        p = st.p[c] if p is None else p
        q = st.q[c] if q is None else q
        A_col = self.A[:, r] if A_col is None else A_col
        e = self.e[r] if e is None else e
        mask = st.z == c
        m = np.count_nonzero(mask)
        if m == 0:
            return 0.0
        sa = A_col[mask].sum()
        ss = self.s[mask].sum()
        return float(loglik_from_counts(sa, m * e - sa, ss - sa, m * (self.P - e) - ss + sa, p, q))

    def loglik_matrix(self):
        """(N, C) log-likelihood of every network under every cluster."""
        st = self.state
        A = self.A[:, st.rep_index]
        e = self.e[st.rep_index]
        s = self.s[:, None]
        return loglik_from_counts(A, e - A, s - A, self.P - e - s + A, st.p, st.q)

    def _pair_log_odds(self, r):
        """Per-pair log theta and log(1 - theta) for slot ``r``."""
        st = self.state
        b = st.b[r]
        th = st.theta[r][b[self._iu], b[self._ju]]
        return np.log(th), np.log1p(-th)

    def sbm_logp(self, r, rep=None):
        rep = self.state.reps[r] if rep is None else rep
        lt, l1t = self._pair_log_odds(r)
        return float(np.sum(np.where(rep == 1, lt, l1t)))

    # ------------------------------------------------------------- Gibbs steps

    def update_tau(self):
        st = self.state
        eta = np.bincount(st.z, minlength=st.C)
        st.tau = self.rng.dirichlet(self.hyper.psi + eta)
        return st.tau

    def z_probabilities(self):
        st = self.state
        with np.errstate(divide="ignore"):
            logits = np.log(st.tau)[None, :] + self.loglik_matrix()
        mx = logits.max(axis=1, keepdims=True)
        if not np.all(np.isfinite(mx)):
            raise FloatingPointError("all cluster log-probabilities are -inf for some network")
        probs = np.exp(logits - mx)
        return probs / probs.sum(axis=1, keepdims=True)

    def update_z(self):
        st = self.state
        cdf = np.cumsum(self.z_probabilities(), axis=1)
        u = self.rng.random(len(st.z))
        st.z = np.minimum((u[:, None] >= cdf).sum(axis=1), st.C - 1).astype(np.int64)
        return st.z

    def update_w(self, r):
        st = self.state
        h = np.bincount(st.b[r], minlength=st.K)
        w = self.rng.dirichlet(self.hyper.chi + h)
        st.w[r] = w
        return w

    def block_pair_counts(self, r):
        """Edge counts and pair counts per unordered block pair (K x K, symmetric)."""
        st = self.state
        K = st.K
        b = st.b[r]
        M = np.bincount(b[self._iu] * K + b[self._ju], weights=st.reps[r],
                        minlength=K * K).reshape(K, K)
        edges = M + M.T - np.diag(np.diag(M))
        sizes = np.bincount(b, minlength=K).astype(np.float64)
        pairs = np.outer(sizes, sizes)
        np.fill_diagonal(pairs, sizes * (sizes - 1) / 2)
        return edges, pairs

    def update_theta(self, r):
        st = self.state
        K = st.K
        edges, pairs = self.block_pair_counts(r)
        ku, lu = self._ku, self._lu
        a = edges[ku, lu] + self.hyper.epsilon
        bb = self.hyper.zeta + pairs[ku, lu] - edges[ku, lu]
        draw = np.clip(self.rng.beta(a, bb), _THETA_EPS, 1.0 - _THETA_EPS)
        th = np.empty((K, K))
        th[ku, lu] = draw
        th[lu, ku] = draw
        st.theta[r] = th
        return th

    def update_b(self, r):
        st = self.state
        adj = self._adj
        adj[self._iu, self._ju] = st.reps[r]
        adj[self._ju, self._iu] = st.reps[r]
        u = self.rng.random(self.pop.n)
        with np.errstate(divide="ignore"):
            logw = np.log(st.w[r])
        b = st.b[r].copy()
        _kernels.sweep_blocks(adj, b, logw, np.log(st.theta[r]), np.log1p(-st.theta[r]), u)
        st.b[r] = b
        return b

    # --------------------------------------------------------------- MH steps

    def propose_representative(self, r):
        """Draw a candidate for slot ``r``.

        Returns ``(proposal, log_q_ratio, flipped)`` where ``flipped`` holds the
        changed pair indices for the local kernel and ``None`` for the
        independence kernel.
        """
        cur = self.state.reps[r]
        if self.rng.random() < self.config.rep_kernel_mix:
            k = self.rng.binomial(self.P, self.omega)
            flipped = np.sort(self.rng.choice(self.P, size=k, replace=False)) if k else np.empty(0, np.int64)
            prop = cur.copy()
            prop[flipped] ^= 1
            return prop, 0.0, flipped
        prop = (self.rng.random(self.P) < self._f).astype(np.uint8)
        return prop, self.proposal_log_ratio(cur, prop), None

    def proposal_log_ratio(self, cur, prop):
        """log Q(cur | prop) - log Q(prop | cur) for the independence kernel."""
        lq_cur = np.sum(np.where(cur == 1, self._logf, self._log1mf))
        lq_prop = np.sum(np.where(prop == 1, self._logf, self._log1mf))
        return float(lq_cur - lq_prop)

    def mh_update_representative(self, c):
        """One MH move on the representative used by cluster ``c``."""
        st = self.state
        r = st.rep_index[c]
        cur = st.reps[r]
        prop, log_q, flipped = self.propose_representative(r)
        self.proposed["representative"] += 1
        if flipped is not None:
            if len(flipped) == 0:
                self.accepted["representative"] += 1
                return True
            sign = 1.0 - 2.0 * cur[flipped]
            A_new = self.A[:, r] + self.X[:, flipped] @ sign
            e_new = self.e[r] + sign.sum()
            lt, l1t = self._pair_log_odds(r)
            d_prior = float(np.sum(sign * (lt[flipped] - l1t[flipped])))
        else:
            A_new = self.X @ prop.astype(np.float64)
            e_new = float(prop.sum())
            d_prior = self.sbm_logp(r, prop) - self.sbm_logp(r)
        d_lik = 0.0
        for cc in self._slot_clusters(r):
            d_lik += self.cluster_loglik(cc, A_col=A_new, e=e_new) - self.cluster_loglik(cc)
        log_alpha = d_lik + d_prior + log_q
        if np.log(self.rng.random()) < log_alpha:
            st.reps[r] = prop
            self.A[:, r] = A_new
            self.e[r] = e_new
            self.accepted["representative"] += 1
            return True
        return False

    def mh_update_noise(self, c, which):
        """Reflected random-walk MH move on ``p_c`` or ``q_c``."""
        if which not in ("p", "q"):
            raise ValueError("which must be 'p' or 'q'")
        st = self.state
        vec = st.p if which == "p" else st.q
        a0, b0 = ((self.hyper.alpha0, self.hyper.beta0) if which == "p"
                  else (self.hyper.gamma0, self.hyper.delta0))
        u = self.config.u_ladder[int(np.searchsorted(self._u_cdf, self.rng.random(), side="right"))
                                 if len(self._u_cdf) > 1 else 0]
        cur = vec[c]
        prop = reflect_half(cur + self.rng.uniform(-u, u))
        self.proposed[which] += 1
        accept_u = self.rng.random()
        if not 0.0 < prop < 0.5:
            return False
        kw = {which: prop}
        d = (self.cluster_loglik(c, **kw) - self.cluster_loglik(c)
             + log_beta_density(prop, a0, b0) - log_beta_density(cur, a0, b0))
        if np.log(accept_u) < d:
            vec[c] = prop
            self.accepted[which] += 1
            return True
        return False

    def sbm_updates(self, r):
        self.update_w(r)
        self.update_theta(r)
        self.update_b(r)

    def choose_kernel(self):
        k = int(np.searchsorted(self._kernel_cdf, self.rng.random(), side="right"))
        return KERNELS[min(k, 2)]

    # ---------------------------------------------------------------- driver

    def step(self):
        st = self.state
        self.update_tau()
        for c in range(st.C):
            kernel = self.choose_kernel()
            if kernel == "representative":
                self.mh_update_representative(c)
            else:
                self.mh_update_noise(c, kernel)
            if not st.outlier:
                self.sbm_updates(st.rep_index[c])
        if st.outlier:
            self.sbm_updates(0)
        self.update_z()
        st.iteration += 1
        if self.config.debug:
            st.validate(self.pop)

    def current_log_posterior(self):
        """Log joint posterior from the cached counts."""
        st, h = self.state, self.hyper
        L = self.loglik_matrix()
        out = float(L[np.arange(len(st.z)), st.z].sum())
        out += float(np.sum(log_beta_density(st.p, h.alpha0, h.beta0)))
        out += float(np.sum(log_beta_density(st.q, h.gamma0, h.delta0)))
        ku, lu = self._ku, self._lu
        for r in range(st.reps.shape[0]):
            out += self.sbm_logp(r)
            out += float(np.sum(np.log(st.w[r][st.b[r]])))
            out += log_dirichlet_density(st.w[r], h.chi)
            out += float(np.sum(log_beta_density(st.theta[r][ku, lu], h.epsilon, h.zeta)))
        out += float(np.sum(np.log(st.tau[st.z])))
        out += log_dirichlet_density(st.tau, h.psi)
        return out

    def run(self, progress=None) -> PosteriorSamples:
        cfg = self.config.validate()
        st = self.state
        D = cfg.n_draws
        N, C, K, n = self.pop.N, st.C, st.K, self.pop.n
        R = st.reps.shape[0]
        nbytes = (self.P + 7) // 8
        out = dict(
            iterations=np.zeros(D, np.int64), z=np.zeros((D, N), np.int64),
            tau=np.zeros((D, C)), p=np.zeros((D, C)), q=np.zeros((D, C)),
            w=np.zeros((D, R, K)), theta=np.zeros((D, R, K, K)), b=np.zeros((D, R, n), np.int64),
            reps_packed=np.zeros((D, R, nbytes), np.uint8), log_posterior=np.zeros(D))
        d = 0
        for t in range(1, cfg.iterations + 1):
            self.step()
            if t > cfg.burn_in and (t - cfg.burn_in) % cfg.thin == 0 and d < D:
                out["iterations"][d] = t
                out["z"][d] = st.z
                out["tau"][d] = st.tau
                out["p"][d] = st.p
                out["q"][d] = st.q
                out["w"][d] = st.w
                out["theta"][d] = st.theta
                out["b"][d] = st.b
                out["reps_packed"][d] = np.packbits(st.reps, axis=-1)
                out["log_posterior"][d] = self.current_log_posterior()
                d += 1
            if progress is not None:
                progress(t)
        return PosteriorSamples(**out, n=n, outlier=st.outlier, config=cfg.to_dict())


def run_chain(pop: NetworkPopulation, config: McmcConfig, init: ChainState, progress=None) -> PosteriorSamples:
    """Run the mixture sampler from ``init`` (which is not modified)."""
    config.validate()
    if init.outlier or len(np.unique(init.rep_index)) != init.C:
        raise ConfigError("run_chain needs one representative per cluster")
    return MixtureSampler(pop, config, init.copy()).run(progress)


def run_outlier_chain(pop: NetworkPopulation, config: McmcConfig, init: ChainState, progress=None) -> PosteriorSamples:
    """Run the two-cluster outlier sampler with one shared representative."""
    config.validate()
    if config.C != 2 or init.C != 2:
        raise ConfigError("the outlier model needs exactly C = 2 clusters")
    if init.reps.shape[0] != 1:
        raise ConfigError("the outlier model needs a single shared representative")
    return MixtureSampler(pop, config, init.copy()).run(progress)
