"""
End-to-end fitting: seed splitting, initialisation and one or more chains.

One user seed feeds ``numpy.random.SeedSequence(seed)``; its three spawned
children drive simulation, initialisation and the chains respectively.
Chain ``i`` uses child ``i`` of the chain stream, so adding chains never
changes the earlier ones.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .graph import METRICS, NetworkPopulation
from .initialization import InitPlan, InitSummary, initialize_state
from .sampler import ChainState, McmcConfig, run_chain, run_outlier_chain

PURPOSES = ("simulate", "init", "chain")


def _as_int(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def seed_streams(seed: int, chains: int = 1) -> dict:
    """Derived 64-bit seeds: ``simulate``, ``init`` and ``chains`` (a list)."""
    sim, init, chain = np.random.SeedSequence(int(seed)).spawn(len(PURPOSES))
    return {"simulate": _as_int(sim), "init": _as_int(init),
            "chains": [_as_int(s) for s in chain.spawn(chains)]}


def max_workers(requested: int) -> int:
    """Concurrency cap from ``NETMIX_THREADS`` (default: CPU count)."""
    env = os.environ.get("NETMIX_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(requested, cap))


@dataclass
class FitResult:
    chains: list  # PosteriorSamples per chain
    init_state: ChainState
    init_summary: InitSummary
    configs: list  # McmcConfig per chain
    plan: InitPlan
    seeds: dict


def _run_one(args):
    pop, cfg, state, outlier = args
    return (run_outlier_chain if outlier else run_chain)(pop, cfg, state)


def fit(pop: NetworkPopulation, C: int, K: int, iterations: int, burn_in: int, thin: int = 1,
        seed: int = 0, chains: int = 1, outlier: bool = False, metrics=METRICS,
        workers: int | None = None, **mcmc_options) -> FitResult:
    """Initialise from the population and run ``chains`` seed-split chains.

    ``mcmc_options`` are passed through to :class:`McmcConfig`.
    """
    if outlier and C != 2:
        raise ValueError("the outlier model needs exactly C = 2 clusters")
    if chains < 1:
        raise ValueError("chains must be at least 1")
    seeds = seed_streams(seed, chains)
    configs = [McmcConfig(C=C, K=K, iterations=iterations, burn_in=burn_in, thin=thin, seed=s,
                          **mcmc_options).validate() for s in seeds["chains"]]
    plan = InitPlan(C=C, K=K, seed=seeds["init"], metrics=tuple(metrics))
    state, summary = initialize_state(pop, plan, configs[0].hyper, outlier=outlier)
    jobs = [(pop, cfg, state, outlier) for cfg in configs]
    n_workers = max_workers(chains if workers is None else workers)
    if n_workers == 1 or chains == 1:
        results = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as ex:
            results = list(ex.map(_run_one, jobs))
    return FitResult(results, state, summary, configs, plan, seeds)


def samples_manifest(result: FitResult, chain: int, user_seed: int, data_path=None) -> dict:
    """Manifest fields that together with the data reproduce chain ``chain``."""
    return {"kind": "netmix-samples", "seed": int(user_seed), "chain": chain,
            "chains": len(result.chains), "derived_seeds": {
                "init": result.seeds["init"], "chain": result.seeds["chains"][chain]},
            "init_plan": result.plan.to_dict(), "init": result.init_summary.to_dict(),
            "data": None if data_path is None else str(data_path)}
