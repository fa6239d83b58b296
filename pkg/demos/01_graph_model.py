"""Tour of the temporal multi-relational graph data model.

Builds a tiny four-node graph by hand, slices it in time, and augments it
with inverse relations the way bidirectional TKG evaluation does.
"""

import chronolink as cl

# Five timestamped edges over nodes {0..3} and relations {0, 1}.
# The same (subject, relation, object) triple may recur at several times.
quads = [
    (0, 0, 1, 0),
    (0, 0, 1, 1),
    (2, 1, 3, 1),
    (0, 0, 1, 3),
    (2, 1, 3, 3),
]
graph = cl.from_quadruples(quads, node_count=4, relation_count=2, granularity="year")
print(graph)
print("time range:", graph.t_min, "..", graph.t_max)
print("distinct timestamps:", graph.distinct_timestamps().tolist())

# Slicing is how splits, snapshots, and history windows are expressed.
print("\nedges at t=1:")
for quad in graph.time_slice(1, 1):
    print(" ", quad)
print("slice outside the range is empty:", len(graph.time_slice(10, 20)))

# Duplicate rows are dropped at construction: a graph is a *set* of quadruples.
noisy = cl.from_quadruples(quads + quads[:2], node_count=4, relation_count=2)
print("\nduplicates removed at construction:", noisy.duplicates_removed)

# Bidirectional evaluation introduces one inverse relation per relation:
# (s, r, o, t) gains the mirrored (o, r + R, s, t).
augmented = cl.add_inverse_relations(graph)
print("\nafter inverse augmentation:", augmented)
print("objects of relation 2 (= inverse of 0) at t=0:", augmented.objects_at(1, 2, 0).tolist())

# Augmenting twice is rejected; the flag travels with every slice.
try:
    cl.add_inverse_relations(augmented)
except cl.DataError as exc:
    print("second augmentation rejected:", exc)
