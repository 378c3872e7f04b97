import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from netmix.graph import to_edge_vector
from netmix.sampler import ChainState

settings.register_profile("netmix", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("netmix")


@st.composite
def adjacency(draw, n=None, min_n=1, max_n=7):
    """Random valid adjacency matrix."""
    if n is None:
        n = draw(st.integers(min_n, max_n))
    bits = draw(st.lists(st.integers(0, 1), min_size=n * (n - 1) // 2, max_size=n * (n - 1) // 2))
    a = np.zeros((n, n), dtype=np.uint8)
    iu = np.triu_indices(n, k=1)
    a[iu] = bits
    return a + a.T


def random_adjacency(rng, n, density=0.5):
    a = np.triu((rng.random((n, n)) < density).astype(np.uint8), k=1)
    return a + a.T


def make_state(pop, reps, p, q, z, K=1, theta=None, b=None, w=None, tau=None, rep_index=None):
    reps = np.array([to_edge_vector(r) for r in reps])
    R, C = len(reps), len(p)
    theta = np.full((R, K, K), 0.5) if theta is None else np.broadcast_to(theta, (R, K, K))
    return ChainState(reps=reps, p=p, q=q, z=z, tau=np.full(C, 1 / C) if tau is None else tau,
                      w=np.full((R, K), 1 / K) if w is None else np.broadcast_to(w, (R, K)),
                      theta=theta.copy(), b=np.zeros((R, pop.n), np.int64) if b is None else b,
                      rep_index=np.arange(C) if rep_index is None else rep_index)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Reduced run length shared by every test that fits a regime preset.
REGIME_RUN = dict(iterations=30_000, burn_in=20_000, thin=10, data_seed=1, fit_seed=11)


@functools.lru_cache(maxsize=None)
def fit_regime(name, p=None, q=None):
    """Simulate a preset (optionally with overridden noise) and fit it once per session."""
    from netmix.pipeline import fit
    from netmix.simulate import generate_population, noise_curve_spec, preset

    if p is None:
        spec = preset(name, seed=REGIME_RUN["data_seed"])
    else:
        spec = noise_curve_spec(p, q, seed=REGIME_RUN["data_seed"])
    pop, truth = generate_population(spec)
    result = fit(pop, C=spec.C, K=spec.K, iterations=REGIME_RUN["iterations"],
                 burn_in=REGIME_RUN["burn_in"], thin=REGIME_RUN["thin"],
                 seed=REGIME_RUN["fit_seed"])
    return pop, truth, result.chains[0]


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion; printed at the end of the run."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(number, title, passed, detail):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
        lines.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
