import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import gammaln

from netmix import _kernels
from netmix.graph import NetworkPopulation, from_edge_list, from_edge_vector, to_edge_vector
from netmix.model import Hyperparams, NoiseParams, network_log_likelihood
from netmix.sampler import (ConfigError, McmcConfig, MixtureSampler, log_posterior,
                            reflect_half, run_chain, run_outlier_chain)

from conftest import make_state, random_adjacency


def config(C=1, K=1, **kw):
    kw.setdefault("iterations", 10)
    kw.setdefault("burn_in", 1)
    return McmcConfig(C=C, K=K, **kw)


# ------------------------------------------------------------------ config

@pytest.mark.parametrize("kw", [dict(burn_in=0), dict(burn_in=10), dict(thin=0), dict(omega=1.5),
                                dict(u_ladder=(0.6,)), dict(kernel_weights=(0.5, 0.5, 0.5)),
                                dict(seed=-1), dict(u_weights=(1.0, 0.0))])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        config(**kw).validate()


def test_config_draw_count_and_round_trip():
    cfg = config(iterations=500_000, burn_in=150_000, thin=50)
    assert cfg.n_draws == 7000
    assert config(iterations=12, burn_in=9, thin=3).n_draws == 1
    assert McmcConfig.from_dict(cfg.to_dict()) == cfg


def test_reflect_half_examples():
    assert reflect_half(0.3) == 0.3
    assert reflect_half(-0.05) == 0.05
    assert reflect_half(0.55) == pytest.approx(0.45)


# ----------------------------------------------------------- Gibbs conditionals

def test_update_z_single_edge_example():
    pop = NetworkPopulation([from_edge_list([(0, 1)], 2)])
    st_ = make_state(pop, [from_edge_list([(0, 1)], 2), np.zeros((2, 2), np.uint8)],
                     p=[0.1, 0.1], q=[0.1, 0.1], z=[0], tau=[0.5, 0.5])
    s = MixtureSampler(pop, config(C=2), st_)
    assert s.z_probabilities()[0] == pytest.approx([0.9, 0.1])


def test_update_z_symmetric_clusters():
    rep = from_edge_list([(0, 1)], 3)
    pop = NetworkPopulation([rep, np.zeros((3, 3), np.uint8)])
    s = MixtureSampler(pop, config(C=2), make_state(pop, [rep, rep], [0.2, 0.2], [0.3, 0.3], [0, 1]))
    assert np.array_equal(s.z_probabilities(), np.full((2, 2), 0.5))


def test_z_probabilities_match_enumeration(rng):
    pop = NetworkPopulation([random_adjacency(rng, 3) for _ in range(4)])
    reps = [random_adjacency(rng, 3), random_adjacency(rng, 3)]
    p, q, tau = [0.15, 0.3], [0.2, 0.05], [0.35, 0.65]
    s = MixtureSampler(pop, config(C=2), make_state(pop, reps, p, q, [0, 1, 0, 1], tau=tau))
    for k in range(pop.N):
        un = [tau[c] * math.exp(network_log_likelihood(pop[k], reps[c], NoiseParams(p[c], q[c])))
              for c in range(2)]
        assert s.z_probabilities()[k] == pytest.approx(np.array(un) / sum(un), rel=1e-12)


def test_update_tau_concentration(rng):
    pop = NetworkPopulation([np.zeros((2, 2), np.uint8)] * 6)
    s = MixtureSampler(pop, config(C=3), make_state(pop, [np.zeros((2, 2), np.uint8)] * 3,
                                                    [0.1] * 3, [0.1] * 3, [0, 0, 0, 1, 1, 2]))
    draws = np.array([s.update_tau() for _ in range(20000)])
    alpha = np.array([4.0, 3.0, 2.0])  # psi = 1 plus counts (3, 2, 1)
    assert draws.mean(axis=0) == pytest.approx(alpha / alpha.sum(), abs=0.01)
    assert np.allclose(draws.sum(axis=1), 1.0)


def test_update_w_counts():
    n = 21
    pop = NetworkPopulation([np.zeros((n, n), np.uint8)])
    s = MixtureSampler(pop, config(K=2), make_state(pop, [np.zeros((n, n), np.uint8)], [0.1], [0.1], [0],
                                                    K=2, b=np.zeros((1, n), np.int64)))
    draws = np.array([s.update_w(0) for _ in range(20000)])
    assert draws.mean(axis=0) == pytest.approx([22 / 23, 1 / 23], abs=0.01)


def _brute_block_counts(rep, b, K):
    n = len(b)
    edges, pairs = np.zeros((K, K)), np.zeros((K, K))
    for i in range(n):
        for j in range(i + 1, n):
            k, l = sorted((b[i], b[j]))
            pairs[k, l] += 1
            edges[k, l] += rep[i, j]
    return edges + np.triu(edges, 1).T, pairs + np.triu(pairs, 1).T


@given(st.integers(2, 8), st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_block_pair_counts_match_enumeration(n, K, seed):
    rng = np.random.default_rng(seed)
    rep = random_adjacency(rng, n)
    b = rng.integers(K, size=n)
    pop = NetworkPopulation([rep])
    s = MixtureSampler(pop, config(K=K), make_state(pop, [rep], [0.1], [0.1], [0], K=K, b=b[None]))
    edges, pairs = s.block_pair_counts(0)
    e_ref, p_ref = _brute_block_counts(rep, b, K)
    assert np.array_equal(edges, e_ref) and np.array_equal(pairs, p_ref)


def test_update_theta_shapes(rng):
    # one block of 5 nodes with 5 edges among its 10 pairs -> Beta(5.5, 5.5)
    rep = from_edge_list([(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)], 5)
    pop = NetworkPopulation([rep])
    s = MixtureSampler(pop, config(K=2), make_state(pop, [rep], [0.1], [0.1], [0], K=2))
    draws = np.array([s.update_theta(0) for _ in range(20000)])
    assert draws[:, 0, 0].mean() == pytest.approx(0.5, abs=0.01)
    assert draws[:, 0, 0].var() == pytest.approx(0.25 / 12, rel=0.05)
    # block 1 is empty: prior Beta(0.5, 0.5) for theta_01 and theta_11
    assert draws[:, 1, 1].mean() == pytest.approx(0.5, abs=0.01)
    assert draws[:, 1, 1].var() == pytest.approx(0.125, rel=0.05)
    assert np.array_equal(draws[:, 0, 1], draws[:, 1, 0])


def _block_probs_by_hand(adj, b, i, w, theta):
    K = len(w)
    un = []
    for k in range(K):
        v = w[k]
        for j in range(len(b)):
            if j != i:
                t = theta[k, b[j]]
                v *= t if adj[i, j] else 1 - t
        un.append(v)
    return np.array(un) / sum(un)


def test_block_conditional_matches_direct_evaluation(rng):
    for _ in range(20):
        n, K = 3, 2
        adj = random_adjacency(rng, n)
        b = rng.integers(K, size=n)
        w = rng.dirichlet(np.ones(K))
        th = rng.uniform(0.05, 0.95, (K, K))
        th = (th + th.T) / 2
        for i in range(n):
            logits = _kernels.block_logits(adj, b, i, np.log(w), np.log(th), np.log1p(-th))
            probs = np.exp(logits - logits.max())
            assert probs / probs.sum() == pytest.approx(_block_probs_by_hand(adj, b, i, w, th), rel=1e-10)


def test_block_sweep_matches_sequential_reference(rng):
    for _ in range(20):
        n, K = 7, 3
        adj = random_adjacency(rng, n)
        b = rng.integers(K, size=n)
        w = rng.dirichlet(np.ones(K))
        th = rng.uniform(0.05, 0.95, (K, K))
        th = (th + th.T) / 2
        u = rng.random(n)
        ref = b.copy()
        for i in range(n):  # each node sees the labels already updated in this sweep
            cdf = np.cumsum(_block_probs_by_hand(adj, ref, i, w, th))
            ref[i] = min(int(np.searchsorted(cdf, u[i], side="right")), K - 1)
        out = b.copy()
        _kernels.sweep_blocks(adj, out, np.log(w), np.log(th), np.log1p(-th), u)
        assert out.tolist() == ref.tolist()


def test_categorical_draw_is_inverse_cdf():
    logits = np.log([0.2, 0.3, 0.5])
    assert [_kernels.sample_categorical_log(logits, u) for u in (0.0, 0.19, 0.21, 0.49, 0.51, 0.999)] == \
        [0, 0, 1, 1, 2, 2]


def test_update_b_single_block_and_symmetric_case(rng):
    n = 6
    rep = random_adjacency(rng, n)
    pop = NetworkPopulation([rep])
    s = MixtureSampler(pop, config(K=1), make_state(pop, [rep], [0.1], [0.1], [0]))
    assert s.update_b(0).tolist() == [0] * n
    theta = np.full((3, 3), 0.4)
    s = MixtureSampler(pop, config(K=3), make_state(pop, [rep], [0.1], [0.1], [0], K=3, theta=theta))
    draws = np.array([s.update_b(0) for _ in range(3000)])
    assert np.bincount(draws.ravel(), minlength=3) / draws.size == pytest.approx([1 / 3] * 3, abs=0.02)


# --------------------------------------------------------------- MH kernels

def test_independence_proposal_ratio_by_hand():
    # three networks on three nodes; frequencies 1/3, 2/3 and 0 (clamped to 1/6)
    nets = [from_edge_list(e, 3) for e in ([(0, 1), (0, 2)], [(0, 2)], [])]
    pop = NetworkPopulation(nets)
    s = MixtureSampler(pop, config(), make_state(pop, [nets[0]], [0.1], [0.1], [0, 0, 0]))
    f = {0: 1 / 3, 1: 2 / 3, 2: 1 / 6}  # pair order (0,1), (0,2), (1,2)
    cur, prop = np.array([1, 0, 1], np.uint8), np.array([0, 1, 1], np.uint8)

    def mass(x):
        return math.prod(f[e] if x[e] else 1 - f[e] for e in range(3))

    assert s.proposal_log_ratio(cur, prop) == pytest.approx(math.log(mass(cur) / mass(prop)))


def test_independence_proposal_ratio_zero_at_half():
    nets = [from_edge_list([(0, 1), (0, 2), (1, 2)], 3), np.zeros((3, 3), np.uint8)]
    pop = NetworkPopulation(nets)
    s = MixtureSampler(pop, config(), make_state(pop, [nets[0]], [0.1], [0.1], [0, 0]))
    for a, b in itertools.product(itertools.product((0, 1), repeat=3), repeat=2):
        assert s.proposal_log_ratio(np.array(a), np.array(b)) == 0.0


def test_local_proposal_with_tiny_omega_keeps_current(rng):
    rep = random_adjacency(rng, 8)
    pop = NetworkPopulation([rep])
    s = MixtureSampler(pop, config(omega=1e-12, rep_kernel_mix=1.0), make_state(pop, [rep], [0.1], [0.1], [0]))
    for _ in range(100):
        prop, log_q, flipped = s.propose_representative(0)
        assert log_q == 0.0 and len(flipped) == 0 and np.array_equal(prop, s.state.reps[0])
        assert s.mh_update_representative(0)


def test_improving_symmetric_move_always_accepted():
    # every network equals the truth; flipping a wrong pair back is always accepted
    truth = from_edge_list([(0, 1), (1, 2)], 4)
    pop = NetworkPopulation([truth] * 5)
    start = from_edge_list([(0, 1), (1, 2), (2, 3)], 4)
    cfg = config(omega=1 / 6, rep_kernel_mix=1.0)
    s = MixtureSampler(pop, cfg, make_state(pop, [start], [0.1], [0.1], [0] * 5))
    s.propose_representative = lambda r: (to_edge_vector(truth), 0.0, np.array([5]))
    assert s.mh_update_representative(0)
    assert np.array_equal(s.state.reps[0], to_edge_vector(truth))


def test_noise_proposals_stay_inside_open_interval(rng, monkeypatch):
    import netmix.sampler as sampler_mod
    pop = NetworkPopulation([random_adjacency(rng, 4)])
    s = MixtureSampler(pop, config(u_ladder=(0.4,)), make_state(pop, [pop[0]], [0.01], [0.49], [0]))
    seen = []

    def spy(y):
        out = reflect_half(y)
        seen.append(out)
        return out

    monkeypatch.setattr(sampler_mod, "reflect_half", spy)
    for _ in range(2000):
        s.mh_update_noise(0, "p")
        s.mh_update_noise(0, "q")
        assert 0 < s.state.p[0] < 0.5 and 0 < s.state.q[0] < 0.5
    assert len(seen) == 4000 and all(0 < v < 0.5 for v in seen)
    with pytest.raises(ValueError):
        s.mh_update_noise(0, "r")


def test_noise_chain_matches_quadrature_posterior():
    # cluster of two 5-node networks against an empty representative:
    # p | data is Beta(alpha0 + n01, beta0 + n00) truncated to (0, 0.5)
    nets = [from_edge_list([(0, 1), (2, 3), (1, 4)], 5), from_edge_list([(0, 2)], 5)]
    pop = NetworkPopulation(nets)
    n01, n00 = 4, 16
    s = MixtureSampler(pop, config(seed=7), make_state(pop, [np.zeros((5, 5), np.uint8)], [0.3], [0.2], [0, 0]))
    draws = np.empty(100_000)
    for t in range(2000):
        s.mh_update_noise(0, "p")
    for t in range(len(draws)):
        s.mh_update_noise(0, "p")
        draws[t] = s.state.p[0]

    def dens(x):
        return x ** (0.5 + n01 - 1) * (1 - x) ** (0.5 + n00 - 1)

    Z = integrate.quad(dens, 0, 0.5)[0]
    xs = np.sort(draws)
    grid = np.unique(np.quantile(xs, np.linspace(0, 1, 401)))
    cdf = np.array([integrate.quad(dens, 0, g)[0] / Z for g in grid])
    emp = np.searchsorted(xs, grid, side="right") / len(xs)
    assert np.max(np.abs(emp - cdf)) <= 0.05


# --------------------------------------------------------------- full chain

@pytest.fixture(scope="module")
def small_problem():
    rng = np.random.default_rng(3)
    reps = [random_adjacency(rng, 6, 0.5), random_adjacency(rng, 6, 0.3)]
    nets = []
    for c in range(2):
        for _ in range(5):
            flip = np.triu(rng.random((6, 6)) < 0.1, 1)
            a = reps[c] ^ (flip | flip.T).astype(np.uint8)
            nets.append(a)
    pop = NetworkPopulation(nets)
    z = np.repeat([0, 1], 5)
    theta = np.array([[0.6, 0.3], [0.3, 0.5]])
    b = np.array([[0, 0, 1, 1, 0, 1], [1, 0, 1, 0, 1, 0]])
    state = make_state(pop, reps, [0.1, 0.2], [0.15, 0.1], z, K=2, theta=theta, b=b,
                       w=np.array([0.5, 0.5]))
    return pop, state


def test_cache_consistency_through_a_run(small_problem):
    pop, state = small_problem
    s = MixtureSampler(pop, config(C=2, K=2, debug=True, seed=5, rep_kernel_mix=0.5), state.copy())
    for _ in range(300):
        s.step()
        assert np.array_equal(s.A, s.X @ s.state.reps.T.astype(float))
        assert np.array_equal(s.e, s.state.reps.sum(axis=1))
    assert s.current_log_posterior() == pytest.approx(log_posterior(pop, s.state, s.config.hyper), abs=1e-9)


def test_recorded_log_posterior_matches_recomputation(small_problem):
    pop, state = small_problem
    samples = run_chain(pop, config(C=2, K=2, iterations=200, burn_in=100, thin=20, seed=9), state)
    assert len(samples) == 5
    assert samples.iterations.tolist() == [120, 140, 160, 180, 200]
    for d in range(len(samples)):
        lp = log_posterior(pop, samples.state(d), Hyperparams())
        assert samples.log_posterior[d] == pytest.approx(lp, abs=1e-9)


def test_run_chain_single_draw_and_determinism(small_problem):
    pop, state = small_problem
    cfg = config(C=2, K=2, iterations=60, burn_in=50, thin=10, seed=2024)
    a, b = run_chain(pop, cfg, state), run_chain(pop, cfg, state)
    assert len(a) == 1
    for name in ("z", "tau", "p", "q", "w", "theta", "b", "reps_packed", "log_posterior"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    c = run_chain(pop, config(C=2, K=2, iterations=60, burn_in=50, thin=10, seed=2025), state)
    assert not np.array_equal(a.tau, c.tau)


def test_run_chain_does_not_modify_init(small_problem):
    pop, state = small_problem
    before = state.copy()
    run_chain(pop, config(C=2, K=2, iterations=20, burn_in=10, seed=1), state)
    assert np.array_equal(before.reps, state.reps) and np.array_equal(before.p, state.p)


def test_run_chain_rejects_mismatched_state(small_problem):
    pop, state = small_problem
    with pytest.raises(ConfigError):
        run_chain(pop, config(C=3, K=2, iterations=20, burn_in=10), state)
    with pytest.raises(ConfigError):
        run_outlier_chain(pop, config(C=2, K=2, iterations=20, burn_in=10), state)
    bad = state.copy()
    bad.p[0] = 0.7
    with pytest.raises(ValueError):
        run_chain(pop, config(C=2, K=2, iterations=20, burn_in=10), bad)


def test_samples_select_and_unpack(small_problem):
    pop, state = small_problem
    s = run_chain(pop, config(C=2, K=2, iterations=40, burn_in=10, thin=10, seed=4), state)
    sub = s.select([0, 2])
    assert sub.iterations.tolist() == [20, 40]
    assert sub.reps.shape == (2, 2, 15) and set(np.unique(sub.reps)) <= {0, 1}


# ---------------------------------------------------------------- outlier model

def _outlier_state(pop, rep, p, q, K=1):
    return make_state(pop, [rep], p, q, np.zeros(pop.N, np.int64), K=K, rep_index=np.zeros(2, np.int64))


def test_outlier_identical_noise_gives_prior_allocation(rng):
    rep = random_adjacency(rng, 5)
    pop = NetworkPopulation([random_adjacency(rng, 5) for _ in range(4)])
    state = _outlier_state(pop, rep, [0.2, 0.2], [0.3, 0.3])
    cfg = config(C=2, iterations=8000, burn_in=500, seed=3, kernel_weights=(1.0, 0.0, 0.0))
    s = run_outlier_chain(pop, cfg, state)
    assert np.array_equal(s.p[:, 0], s.p[:, 1])
    assert np.mean(s.z) == pytest.approx(0.5, abs=0.03)
    assert s.w.shape[1] == 1 and s.reps.shape[1] == 1


def _outlier_exact_rep_marginal(pop, p, q, theta):
    """P(rep | data) with z and tau (Dirichlet(1, 1)) summed/integrated out."""
    n = pop.n
    post = []
    for bits in itertools.product((0, 1), repeat=n * (n - 1) // 2):
        rep = from_edge_vector(np.array(bits, np.uint8), n)
        prior = math.prod(theta if x else 1 - theta for x in bits)
        total = 0.0
        for z in itertools.product((0, 1), repeat=pop.N):
            lik = math.prod(math.exp(network_log_likelihood(pop[k], rep, NoiseParams(p[c], q[c])))
                            for k, c in enumerate(z))
            m1 = sum(z)
            m0 = pop.N - m1
            # integral of tau0^m0 tau1^m1 under Dirichlet(1, 1)
            total += lik * math.exp(gammaln(m0 + 1) + gammaln(m1 + 1) - gammaln(pop.N + 2)) * 1.0
        post.append(prior * total)
    post = np.array(post)
    return post / post.sum()


def test_outlier_tiny_instance_matches_enumeration():
    nets = [from_edge_list([(0, 1)], 3), from_edge_list([(0, 1), (1, 2)], 3)]
    pop = NetworkPopulation(nets)
    p, q, theta = [0.1, 0.3], [0.25, 0.1], 0.4
    exact = _outlier_exact_rep_marginal(pop, p, q, theta)
    state = _outlier_state(pop, np.zeros((3, 3), np.uint8), p, q)
    state.theta[:] = theta
    s = MixtureSampler(pop, config(C=2, seed=11), state)
    counts = np.zeros(8)
    weights = 2 ** np.arange(2, -1, -1)
    for t in range(101_000):
        s.update_tau()
        s.mh_update_representative(0)
        s.update_z()
        if t >= 1000:
            counts[int(s.state.reps[0] @ weights)] += 1
    tv = 0.5 * np.abs(counts / counts.sum() - exact).sum()
    assert tv <= 0.05
