#!/usr/bin/env python3
"""Tour of skeleton topologies and graph-convolution partition strategies.

Builds the built-in skeletons, shows how directed edges turn into an
adjacency matrix, and compares the four ways of splitting a joint's
neighborhood into weight-sharing subsets.
"""

import numpy as np

from ddgcn import graph

np.set_printoptions(precision=3, suppress=True)

print("=== Built-in topologies ===")
for name in ("toy2", "toy5", "chain3", "ntu25"):
    topo = graph.get_topology(name)
    print(f"{name}: {topo.num_joints} joints, {len(topo.edges)} edges, root {topo.root}")

print()
print("=== Directed adjacency (edge i->j means j moves around i) ===")
star = graph.get_topology("toy5")
print("toy5 star, hub drives four tips:")
print(graph.build_adjacency(star))

print()
print("out-degrees:", star.out_degrees(), "(the hub is the only active joint)")

print()
print("=== Partition strategies on the 3-joint chain 0 -> 1 -> 2 ===")
chain = graph.get_topology("chain3")
for strategy in graph.STRATEGIES:
    labeling = graph.make_partition(chain, strategy)
    pairs = ", ".join(f"({i},{j})->{k}" for (i, j), k in sorted(labeling.labels.items()))
    print(f"{strategy:>9} (K={labeling.num_subsets}): {pairs}")

print()
print("The activity strategy keys on the neighbor's out-degree: leaves (hands,")
print("feet, the head) land in subset 0, chain joints in subset 1, and joints")
print("driving several others (spine, shoulders) in subset 2.")

ntu = graph.get_topology("ntu25")
labeling = graph.activity_partition(ntu)
deg = ntu.out_degrees()
for k in range(3):
    members = sorted({j for (_, j), lab in labeling.labels.items() if lab == k})
    names = [ntu.names[j] for j in members]
    print(f"  subset {k}: {names}")

print()
print("=== Masked + normalized adjacency stack (chain3, distance strategy) ===")
labeling = graph.distance_partition(chain)
a = graph.build_adjacency(chain)
for k in range(labeling.num_subsets):
    masked = graph.partition_adjacency(a, labeling, k)
    print(f"subset {k} raw:")
    print(masked)
    print(f"subset {k} after D^(-1/2) A D^(-1/2):")
    print(graph.normalize_adjacency(masked))

total = sum(graph.partition_adjacency(a, labeling, k) for k in range(labeling.num_subsets))
print("masks sum back to A + I:", np.array_equal(total, a + np.eye(3)))
