"""Deterministic heuristic scorers: EdgeBank and the recurrence baseline.

EdgeBank memorizes previously seen keys — (source, destination) pairs by
default, optionally (source, relation, destination) triples — and scores 1
for any key still inside its memory window. The recurrence baseline mixes a
time-decayed strict-recurrence term with a relation-level object-frequency
term:

    strict(c)  = 2 ** (-lambda * (t - k))   for the latest k < t at which
                 (s, r, c, k) was observed, subject to the window; else 0
    relaxed(c) = freq_r(c) / max_c' freq_r(c')  over past (*, r, c, k), k < t
    score(c)   = alpha * strict(c) + (1 - alpha) * relaxed(c)

A window of 0 means unbounded history; a positive window truncates both the
strict and the relaxed term. The exact functional form is versioned in
:data:`RECURRENCY_FORMULA` so emitted numbers are never conflated with other
implementations of the same idea.
"""

from __future__ import annotations

import itertools
from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ProtocolError
from .evaluation import DEFAULT_KS, Scorer, evaluate_single_step
from .graph import TemporalMultiGraph
from .negatives import EvalQuery, NegativeSampleSet

RECURRENCY_FORMULA = "strict-exp2-decay+relaxed-relfreq/v1"

DEFAULT_LAMBDA_GRID = (0.01, 0.1, 1.0)
DEFAULT_ALPHA_GRID = (0.9, 0.99, 0.999)
DEFAULT_WINDOW_GRID = (0, 100, 500)

_EMPTY = np.empty(0, dtype=np.int64)


# -- EdgeBank --------------------------------------------------------------------


class EdgeBankMemory:
    """Key membership with per-key last-seen timestamps.

    In window mode a key is active iff ``last_seen >= t_now - window``; with
    ``window=None`` every key ever seen stays active.
    """

    def __init__(self, key_mode: str = "pair", window: int | None = None):
        if key_mode not in ("pair", "triple"):
            raise ConfigError(f"key_mode must be pair or triple, got {key_mode!r}")
        if window is not None and window < 0:
            raise ConfigError("window must be non-negative")
        self.key_mode = key_mode
        self.window = window
        self._store = {}  # source key -> {destination: last seen}
        self._arrays = {}  # source key -> (destinations, last seen) as arrays

    def _source_key(self, subject: int, relation: int):
        return subject if self.key_mode == "pair" else (subject, relation)

    def update(self, subject: int, relation: int, destination: int, timestamp: int) -> None:
        key = self._source_key(subject, relation)
        bucket = self._store.get(key)
        if bucket is None:
            bucket = self._store[key] = {}
        bucket[destination] = timestamp  # re-observation refreshes last_seen
        self._arrays.pop(key, None)

    def active_destinations(self, subject: int, relation: int, t_now: int) -> np.ndarray:
        key = self._source_key(subject, relation)
        bucket = self._store.get(key)
        if not bucket:
            return _EMPTY
        cached = self._arrays.get(key)
        if cached is None:
            cached = (
                np.fromiter(bucket.keys(), dtype=np.int64, count=len(bucket)),
                np.fromiter(bucket.values(), dtype=np.int64, count=len(bucket)),
            )
            self._arrays[key] = cached
        destinations, seen = cached
        if self.window is None:
            return destinations
        return destinations[seen >= t_now - self.window]


def edgebank_observe(memory: EdgeBankMemory, quads: TemporalMultiGraph) -> EdgeBankMemory:
    """Insert every quadruple's key with its timestamp as last_seen."""
    for s, r, o, t in quads:
        memory.update(s, r, o, t)
    return memory


def edgebank_score(
    memory: EdgeBankMemory, query: EvalQuery, candidates: np.ndarray, t_now: int
) -> np.ndarray:
    """1.0 for candidates whose key is active at t_now, else 0.0."""
    active = memory.active_destinations(query.source, query.relation, t_now)
    if active.size == 0:
        return np.zeros(len(candidates), dtype=np.float64)
    return np.isin(candidates, active).astype(np.float64)


class EdgeBankScorer(Scorer):
    """EdgeBank as an evaluation-engine scorer.

    The default pair keying deliberately omits edge-type information; triple
    keying is exposed for ablation. ``window=None`` is the unbounded variant.
    """

    def __init__(self, key_mode: str = "pair", window: int | None = None):
        self.memory = EdgeBankMemory(key_mode, window)
        self.name = "edgebank-inf" if window is None else "edgebank-tw"

    def fit(self, history, static_context=None):
        edgebank_observe(self.memory, history)

    def observe(self, quads):
        edgebank_observe(self.memory, quads)

    def score_query(self, query, candidates):
        return edgebank_score(self.memory, query, candidates, query.timestamp)

    def params_manifest(self):
        return {
            "scorer": self.name,
            "key_mode": self.memory.key_mode,
            "window": self.memory.window,
        }


def validation_window(boundaries) -> int:
    """Default EdgeBank time window: the duration of the validation split."""
    return boundaries.valid_end - boundaries.train_end


# -- recurrence baseline -----------------------------------------------------------


@dataclass(frozen=True)
class RecurrencyParams:
    """Decay rate, strict/relaxed mixing weight, and history window (0 = unbounded)."""

    lam: float = 0.1
    alpha: float = 0.99
    window: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must be in [0, 1]")
        if self.window < 0:
            raise ConfigError("window must be >= 0")


class HistoryIndex:
    """Incrementally updatable record of past (s, r, o, t) occurrences.

    Append-only with non-decreasing timestamps. Scoring at time t demands
    ``high_water < t``, which makes it impossible for a score to depend on
    facts at or after the query timestamp.
    """

    def __init__(self):
        self._pair_last = {}  # (s, r) -> {o: latest timestamp}
        self._rel_times = {}  # r -> {o: ascending list of timestamps}
        self._rel_max = {}  # r -> max occurrence count (unbounded window)
        self._window_max_cache = {}  # (r, t, window) -> max windowed count
        self.high_water = None

    def observe(self, quads: TemporalMultiGraph) -> None:
        for s, r, o, t in quads:
            if self.high_water is not None and t < self.high_water:
                raise ProtocolError(
                    f"observations must arrive in ascending time order "
                    f"({t} after {self.high_water})"
                )
            self.high_water = t
            pair = self._pair_last.get((s, r))
            if pair is None:
                pair = self._pair_last[(s, r)] = {}
            pair[o] = t
            rel = self._rel_times.get(r)
            if rel is None:
                rel = self._rel_times[r] = {}
            times = rel.get(o)
            if times is None:
                times = rel[o] = []
            times.append(t)
            count = len(times)
            if count > self._rel_max.get(r, 0):
                self._rel_max[r] = count
        self._window_max_cache.clear()

    def latest_pair_time(self, subject: int, relation: int, destination: int):
        bucket = self._pair_last.get((subject, relation))
        return None if bucket is None else bucket.get(destination)

    def relation_frequency(self, relation: int, destination: int, t_now: int, window: int) -> int:
        rel = self._rel_times.get(relation)
        if rel is None:
            return 0
        times = rel.get(destination)
        if not times:
            return 0
        if window <= 0:
            return len(times)
        return len(times) - bisect_left(times, t_now - window)

    def relation_max_frequency(self, relation: int, t_now: int, window: int) -> int:
        if window <= 0:
            return self._rel_max.get(relation, 0)
        key = (relation, t_now, window)
        cached = self._window_max_cache.get(key)
        if cached is None:
            rel = self._rel_times.get(relation, {})
            cached = max(
                (len(times) - bisect_left(times, t_now - window) for times in rel.values()),
                default=0,
            )
            self._window_max_cache[key] = cached
        return cached


def recurrency_score(
    index: HistoryIndex,
    params: RecurrencyParams,
    query: EvalQuery,
    candidates: np.ndarray,
) -> np.ndarray:
    """Mix strict (recency-decayed) and relaxed (frequency) recurrence scores.

    With nothing observed for any candidate the result is all zeros, a full
    tie resolved by the engine's average-rank rule.
    """
    t = query.timestamp
    if index.high_water is not None and index.high_water >= t:
        raise ProtocolError(
            f"causality: index high-water {index.high_water} >= query time {t}"
        )
    lam, alpha, window = params.lam, params.alpha, params.window
    denom = index.relation_max_frequency(query.relation, t, window)
    scores = np.zeros(len(candidates), dtype=np.float64)
    for i, candidate in enumerate(candidates.tolist()):
        strict = 0.0
        last = index.latest_pair_time(query.source, query.relation, candidate)
        if last is not None:
            delta = t - last
            if window <= 0 or delta <= window:
                strict = 2.0 ** (-lam * delta)
        relaxed = 0.0
        if denom > 0:
            relaxed = index.relation_frequency(query.relation, candidate, t, window) / denom
        scores[i] = alpha * strict + (1.0 - alpha) * relaxed
    return scores


class RecurrencyScorer(Scorer):
    """The recurrence baseline as an evaluation-engine scorer."""

    name = "recurrency"

    def __init__(self, params: RecurrencyParams | None = None):
        self.params = params or RecurrencyParams()
        self.index = HistoryIndex()

    def fit(self, history, static_context=None):
        self.index.observe(history)

    def observe(self, quads):
        self.index.observe(quads)

    def score_query(self, query, candidates):
        return recurrency_score(self.index, self.params, query, candidates)

    def params_manifest(self):
        return {
            "scorer": self.name,
            "formula": RECURRENCY_FORMULA,
            "lambda": self.params.lam,
            "alpha": self.params.alpha,
            "window": self.params.window,
        }


def grid_search_recurrency(
    train: TemporalMultiGraph,
    valid: TemporalMultiGraph,
    negatives: NegativeSampleSet,
    full_graph: TemporalMultiGraph,
    lam_grid=DEFAULT_LAMBDA_GRID,
    alpha_grid=DEFAULT_ALPHA_GRID,
    window_grid=DEFAULT_WINDOW_GRID,
    ks=DEFAULT_KS,
    kind: str | None = None,
) -> RecurrencyParams:
    """Pick the validation-MRR argmax over the parameter grid.

    Every combination runs the full single-step protocol on the validation
    split. Exact MRR ties break toward smaller lambda, then larger alpha,
    then smaller window.
    """
    combos = sorted(
        itertools.product(lam_grid, alpha_grid, window_grid),
        key=lambda c: (c[0], -c[1], c[2]),
    )
    if not combos:
        raise ConfigError("parameter grid is empty")
    best_params = None
    best_mrr = -1.0
    for lam, alpha, window in combos:
        params = RecurrencyParams(lam, alpha, window)
        result = evaluate_single_step(
            RecurrencyScorer(params), train, valid, negatives, full_graph, ks, kind
        )
        if result.mrr > best_mrr:
            best_mrr = result.mrr
            best_params = params
    return best_params
