"""
Distances between networks and the k-medoids starting point
===========================================================

The sampler starts from clusterings built on pairwise network distances.
This walk-through computes the three distance matrices, embeds one of them
with classical multidimensional scaling and runs k-medoids on each.
"""

import numpy as np

import netmix
from netmix.initialization import align_labels

pop, truth = netmix.generate_population(netmix.preset("sim7", seed=2))

labelings = {}
for metric in netmix.METRICS:
    d = netmix.distance_matrix(pop, metric)
    labels = netmix.k_medoids(d, 3, seed=0)
    labelings[metric] = labels
    purity = netmix.clustering_purity(labels, truth.z)
    print(f"{metric:8s} mean distance {d.mean():8.3f}  k-medoids purity {purity:.3f}")

# Two-dimensional embedding of the Hamming distances; the clusters separate
# along the leading coordinates.
coords = netmix.classical_mds(netmix.distance_matrix(pop, "hamming"), 2)
for c in range(3):
    centre = coords[truth.z == c].mean(axis=0)
    print(f"true cluster {c}: MDS centre ({centre[0]:.2f}, {centre[1]:.2f})")

# The initial memberships are the majority vote over the metrics after
# aligning their labels.
votes = netmix.majority_vote(list(labelings.values()))
print("majority-vote purity:", netmix.clustering_purity(votes, truth.z))
print("labels agree with the Hamming clustering after alignment:",
      np.array_equal(align_labels(labelings["jaccard"], labelings["hamming"], 3),
                     labelings["hamming"]))
