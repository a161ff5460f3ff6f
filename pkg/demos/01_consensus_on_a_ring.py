"""Consensus averaging on the four-agent ring.

Builds the communication graph, looks at its Laplacian and Metropolis mixing
matrix, and watches a random vector converge to its mean.
"""

#%% Topology
import numpy as np

from dlstm.graph import contraction_factor, laplacian, metropolis_weights, named_topology
from dlstm.trainer import consensus_round, disagreement

g = named_topology("ring", 4)
print("edges:", g.edges)
print("Laplacian:\n", laplacian(g))
print("L @ 1 =", laplacian(g) @ np.ones(4, dtype=int))

#%% Mixing matrix
# Every neighbour gets 1/3 and each agent keeps 1/3 of its own value.
W = metropolis_weights(g)
print("Metropolis weights:\n", W)
lam = contraction_factor(W)
print(f"contraction factor: {lam:.6f}")

#%% Averaging a random vector
rng = np.random.default_rng(0)
x = [rng.normal(size=3) for _ in range(4)]
print("target mean:", np.mean(x, axis=0))
d0 = disagreement(x)
for K in (1, 2, 5, 10, 20):
    y = consensus_round(x, W, K)
    print(f"K={K:2d}  disagreement {disagreement(y):.3e}  bound {lam ** K * d0:.3e}")

#%% Slower graphs
# A path of 8 agents mixes much more slowly than a complete graph.
for name in ("complete", "ring", "star", "path"):
    print(f"{name:9s} N=8  contraction {contraction_factor(metropolis_weights(named_topology(name, 8))):.4f}")
