"""Dataset characterization metrics and distribution reports.

All statistics are pure functions over immutable graphs. Recurrence metrics
look the test triples up in the *entire* dataset restricted to earlier
timestamps, matching the universe used by the time-aware filter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .graph import TemporalMultiGraph

NODES_PER_TS_METHOD = "distinct-endpoint-union"


@dataclass(frozen=True)
class StatsReport:
    """Fixed-order summary of one dataset (see :func:`dataset_report`)."""

    quadruple_count: int
    node_count: int
    edge_type_count: int
    node_type_count: int
    timestep_count: int  # distinct timestamps with >= 1 edge
    span: int  # t_max - t_min + 1
    granularity: str
    inductive_test_nodes: float
    direct_recurrency: float
    recurrency: float
    consecutiveness: float
    mean_edges_per_ts: float
    mean_nodes_per_ts: float
    relation_histogram: tuple  # ((relation-id, share), ...) top-k by share
    others_share: float

    def to_text(self) -> str:
        lines = [
            f"quadruple_count = {self.quadruple_count}",
            f"node_count = {self.node_count}",
            f"edge_type_count = {self.edge_type_count}",
            f"node_type_count = {self.node_type_count}",
            f"timestep_count = {self.timestep_count}",
            f"span = {self.span}",
            f"granularity = {self.granularity}",
            f"inductive_test_nodes = {_fmt(self.inductive_test_nodes)}",
            f"direct_recurrency = {_fmt(self.direct_recurrency)}",
            f"recurrency = {_fmt(self.recurrency)}",
            f"consecutiveness = {_fmt(self.consecutiveness)}",
            f"mean_edges_per_ts = {_fmt(self.mean_edges_per_ts)}",
            f"mean_nodes_per_ts = {_fmt(self.mean_nodes_per_ts)}",
            f"nodes_per_ts_method = {NODES_PER_TS_METHOD}",
            "relation_histogram =",
        ]
        for relation, share in self.relation_histogram:
            lines.append(f"  {relation}\t{_fmt(share)}")
        lines.append(f"others_share = {_fmt(self.others_share)}")
        return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _triple_times(graph: TemporalMultiGraph) -> dict:
    """Map (s, r, o) -> ascending array of its timestamps."""
    out = {}
    order = np.lexsort((graph.timestamps, graph.objects, graph.relations, graph.subjects))
    s = graph.subjects[order]
    r = graph.relations[order]
    o = graph.objects[order]
    t = graph.timestamps[order]
    n = len(t)
    if n == 0:
        return out
    change = np.empty(n, dtype=bool)
    change[0] = True
    change[1:] = (s[1:] != s[:-1]) | (r[1:] != r[:-1]) | (o[1:] != o[:-1])
    starts = np.flatnonzero(change)
    ends = np.append(starts[1:], n)
    for lo, hi in zip(starts, ends):
        out[(int(s[lo]), int(r[lo]), int(o[lo]))] = t[lo:hi]
    return out


def recurrency_degree(full_graph: TemporalMultiGraph, test: TemporalMultiGraph) -> float:
    """Fraction of test quadruples whose triple occurred at any earlier time."""
    if test.is_empty:
        raise DataError("recurrency degree is undefined on an empty test set")
    times = _triple_times(full_graph)
    hits = 0
    for s, r, o, t in test:
        seen = times.get((s, r, o))
        if seen is not None and int(seen[0]) < t:
            hits += 1
    return hits / len(test)


def direct_recurrency_degree(full_graph: TemporalMultiGraph, test: TemporalMultiGraph) -> float:
    """Fraction of test quadruples whose triple occurred at exactly t - 1."""
    if test.is_empty:
        raise DataError("direct recurrency degree is undefined on an empty test set")
    times = _triple_times(full_graph)
    hits = 0
    for s, r, o, t in test:
        seen = times.get((s, r, o))
        if seen is not None:
            i = int(np.searchsorted(seen, t - 1))
            if i < len(seen) and int(seen[i]) == t - 1:
                hits += 1
    return hits / len(test)


def consecutiveness(graph: TemporalMultiGraph) -> float:
    """Mean over distinct triples of their longest consecutive-timestamp run."""
    if graph.is_empty:
        raise DataError("consecutiveness is undefined on an empty graph")
    total = 0
    times = _triple_times(graph)
    for seen in times.values():
        gaps = np.flatnonzero(np.diff(seen) != 1)
        run_starts = np.concatenate(([0], gaps + 1))
        run_ends = np.concatenate((gaps, [len(seen) - 1]))
        total += int((run_ends - run_starts).max()) + 1
    return total / len(times)


def inductive_node_proportion(train: TemporalMultiGraph, test: TemporalMultiGraph) -> float:
    """Share of test nodes never seen as an endpoint during training."""
    if test.is_empty:
        raise DataError("inductive node proportion is undefined on an empty test set")
    test_nodes = np.union1d(test.subjects, test.objects)
    train_nodes = np.union1d(train.subjects, train.objects)
    fresh = np.setdiff1d(test_nodes, train_nodes, assume_unique=True)
    return len(fresh) / len(test_nodes)


def density_per_timestep(graph: TemporalMultiGraph):
    """(mean edges per timestep, mean nodes per timestep) over the full span.

    The denominator is ``t_max - t_min + 1`` including zero-edge timestamps;
    active nodes per timestep are counted as the distinct union of endpoints.
    """
    if graph.is_empty:
        raise DataError("density is undefined on an empty graph")
    span = graph.span()
    mean_edges = len(graph) / span
    node_total = 0
    t = graph.timestamps
    change = np.empty(len(t), dtype=bool)
    change[0] = True
    change[1:] = t[1:] != t[:-1]
    starts = np.flatnonzero(change)
    ends = np.append(starts[1:], len(t))
    for lo, hi in zip(starts, ends):
        node_total += len(np.union1d(graph.subjects[lo:hi], graph.objects[lo:hi]))
    return mean_edges, node_total / span


def relation_histogram(graph: TemporalMultiGraph, top_k: int):
    """Top-k relation shares plus an "Others" bucket summing to exactly 1.

    Returns (((relation-id, share), ...), others_share), sorted by share
    descending with ties broken by relation id ascending.
    """
    if graph.is_empty:
        return (), 0.0
    rels, counts = np.unique(graph.relations, return_counts=True)
    order = np.lexsort((rels, -counts))
    top = order[:top_k]
    shares = tuple((int(rels[i]), counts[i] / len(graph)) for i in top)
    others = float(counts[order[top_k:]].sum() / len(graph)) if len(order) > top_k else 0.0
    return shares, others


def edges_over_time(graph: TemporalMultiGraph, bins: int = 20):
    """Per-bin (mean, min, max) of per-timestep edge counts over [t_min, t_max].

    Bins partition the span into equal-width intervals; timestamps without
    edges contribute zero counts. The default of twenty bins matches the
    reporting convention used throughout the toolkit.
    """
    if graph.is_empty:
        raise DataError("edge histogram is undefined on an empty graph")
    if bins < 1:
        raise DataError("bins must be >= 1")
    span = graph.span()
    bins = min(bins, span)
    t0 = graph.t_min
    distinct, counts = np.unique(graph.timestamps, return_counts=True)
    per_ts = np.zeros(span, dtype=np.int64)
    per_ts[distinct - t0] = counts
    bin_of = ((np.arange(span)) * bins) // span
    out = []
    for b in range(bins):
        chunk = per_ts[bin_of == b]
        out.append((float(chunk.mean()), int(chunk.min()), int(chunk.max())))
    return out


def dataset_report(
    full: TemporalMultiGraph,
    train: TemporalMultiGraph,
    test: TemporalMultiGraph,
    top_k: int = 10,
) -> StatsReport:
    """Assemble the full characterization of a dataset and its split."""
    histogram, others = relation_histogram(full, top_k)
    mean_edges, mean_nodes = density_per_timestep(full)
    return StatsReport(
        quadruple_count=len(full),
        node_count=full.node_count,
        edge_type_count=full.relation_count,
        node_type_count=(
            int(full.node_types.max()) + 1 if full.is_heterogeneous and full.node_count else 0
        ),
        timestep_count=len(full.distinct_timestamps()),
        span=full.span(),
        granularity=full.granularity.value,
        inductive_test_nodes=inductive_node_proportion(train, test),
        direct_recurrency=direct_recurrency_degree(full, test),
        recurrency=recurrency_degree(full, test),
        consecutiveness=consecutiveness(full),
        mean_edges_per_ts=mean_edges,
        mean_nodes_per_ts=mean_nodes,
        relation_histogram=histogram,
        others_share=others,
    )
