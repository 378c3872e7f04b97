"""netmix: Bayesian clustering of populations of networks observed with
measurement error, with stochastic-block-model priors on the cluster
representatives."""

__version__ = "0.1.0"

from .graph import (METRICS, AdjacencyError, NetworkPopulation, check_adjacency, classical_mds,
                    distance_matrix, edge_frequency, edge_list, from_edge_list, from_edge_vector,
                    hamming_distance, jaccard_distance, l2_distance, to_edge_vector)
from .model import ClusterModel, Hyperparams, NoiseParams, SbmParams
from .sampler import (ChainState, ConfigError, McmcConfig, MixtureSampler, PosteriorSamples,
                      log_posterior, run_chain, run_outlier_chain)
from .initialization import InitPlan, initialize_state, k_medoids, majority_vote
from .simulate import (RegimeSpec, generate_outlier_population, generate_population, preset,
                       preset_names)
from .diagnostics import (allocation_proportions, block_allocation_proportions,
                          clustering_entropy, clustering_purity, credible_interval,
                          hamming_proportions, posterior_mode_representative, relabel_samples,
                          summarize, thin)
from .pipeline import fit, seed_streams
