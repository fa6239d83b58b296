import itertools

import numpy as np
import pytest

from chronolink import (
    ConfigError,
    EvalQuery,
    HistoryIndex,
    ProtocolError,
    RecurrencyParams,
    RecurrencyScorer,
    SynthConfig,
    add_inverse_relations,
    brute_force_evaluate,
    chronological_split,
    evaluate_single_step,
    expand_queries,
    from_quadruples,
    generate,
    generate_type_aware,
    grid_search_recurrency,
    merge,
    validation_window,
)
from chronolink.baselines import (
    EdgeBankMemory,
    EdgeBankScorer,
    edgebank_observe,
    edgebank_score,
    recurrency_score,
)
from chronolink.graph import SplitBoundaries


# -- EdgeBank ---------------------------------------------------------------------------


def test_edgebank_pair_key_activation():
    memory = EdgeBankMemory("pair")
    g = from_quadruples([(0, 0, 1, 5)], node_count=3, relation_count=1)
    edgebank_observe(memory, g)
    scores = edgebank_score(memory, EvalQuery(0, 0, 9, 1), np.array([1, 2]), 9)
    assert scores.tolist() == [1.0, 0.0]


def test_edgebank_window_expiry():
    memory = EdgeBankMemory("pair", window=2)
    g = from_quadruples([(0, 0, 1, 5)], node_count=3, relation_count=1)
    edgebank_observe(memory, g)
    at_7 = edgebank_score(memory, EvalQuery(0, 0, 7, 1), np.array([1]), 7)
    at_8 = edgebank_score(memory, EvalQuery(0, 0, 8, 1), np.array([1]), 8)
    assert at_7.tolist() == [1.0]  # 7 - 5 = 2 <= window
    assert at_8.tolist() == [0.0]  # 8 - 5 = 3 > window


def test_edgebank_reobservation_refreshes():
    memory = EdgeBankMemory("pair", window=2)
    edgebank_observe(memory, from_quadruples([(0, 0, 1, 5)], node_count=2, relation_count=1))
    edgebank_observe(memory, from_quadruples([(0, 0, 1, 7)], node_count=2, relation_count=1))
    assert edgebank_score(memory, EvalQuery(0, 0, 9, 1), np.array([1]), 9).tolist() == [1.0]


def test_edgebank_g4_pair_mode(g4):
    memory = EdgeBankMemory("pair")
    edgebank_observe(memory, g4.time_slice(0, 1))
    scores = edgebank_score(memory, EvalQuery(0, 0, 3, 1), np.array([1, 2]), 3)
    assert scores.tolist() == [1.0, 0.0]


def test_edgebank_triple_mode_distinguishes_relations():
    memory = EdgeBankMemory("triple")
    edgebank_observe(memory, from_quadruples([(0, 0, 1, 2)], node_count=2, relation_count=2))
    same_rel = edgebank_score(memory, EvalQuery(0, 0, 5, 1), np.array([1]), 5)
    other_rel = edgebank_score(memory, EvalQuery(0, 1, 5, 1), np.array([1]), 5)
    assert same_rel.tolist() == [1.0]
    assert other_rel.tolist() == [0.0]
    pair = EdgeBankMemory("pair")
    edgebank_observe(pair, from_quadruples([(0, 0, 1, 2)], node_count=2, relation_count=2))
    assert edgebank_score(pair, EvalQuery(0, 1, 5, 1), np.array([1]), 5).tolist() == [1.0]


def test_edgebank_infinite_is_monotone():
    memory = EdgeBankMemory("pair", window=None)
    edgebank_observe(memory, from_quadruples([(0, 0, 1, 0)], node_count=3, relation_count=1))
    for t in (1, 10, 1000):
        edgebank_observe(
            memory, from_quadruples([(0, 0, 2, t)], node_count=3, relation_count=1)
        )
        assert edgebank_score(memory, EvalQuery(0, 0, t + 1, 1), np.array([1]), t + 1)[0] == 1.0


@pytest.mark.parametrize("seed", range(4))
def test_edgebank_window_covering_span_equals_infinite(seed):
    cfg = SynthConfig(node_count=25, relation_count=2, timestep_count=30, rate=5,
                      p_rep=0.4, seed=seed)
    g = generate(cfg)
    train, valid, test, _ = chronological_split(g)
    universe = add_inverse_relations(g)
    queries = expand_queries(test, "tkg")
    negatives = generate_type_aware(universe, queries, q=6, seed=seed)
    history = merge(train, valid)
    inf = evaluate_single_step(EdgeBankScorer("pair", None), history, test, negatives, g)
    wide = evaluate_single_step(EdgeBankScorer("pair", g.span()), history, test, negatives, g)
    assert inf == wide


def test_edgebank_scorer_matches_module_ops():
    cfg = SynthConfig(node_count=20, relation_count=2, timestep_count=20, rate=5, seed=1)
    g = generate(cfg)
    scorer = EdgeBankScorer("pair", window=4)
    scorer.fit(g.time_slice(0, 15))
    memory = EdgeBankMemory("pair", window=4)
    edgebank_observe(memory, g.time_slice(0, 15))
    query = EvalQuery(int(g.subjects[0]), int(g.relations[0]), 17, int(g.objects[0]))
    candidates = np.arange(g.node_count)
    assert scorer.score_query(query, candidates).tolist() == edgebank_score(
        memory, query, candidates, 17
    ).tolist()


def test_validation_window_default():
    assert validation_window(SplitBoundaries(train_end=10, valid_end=25)) == 15


def test_edgebank_memory_validation():
    with pytest.raises(ConfigError):
        EdgeBankMemory("nonsense")
    with pytest.raises(ConfigError):
        EdgeBankMemory("pair", window=-1)


# -- recurrence scorer --------------------------------------------------------------------


def _index_for(quads, node_count=10, relation_count=2):
    index = HistoryIndex()
    index.observe(from_quadruples(quads, node_count=node_count, relation_count=relation_count))
    return index


def test_strict_term_decay_value():
    index = _index_for([(0, 0, 1, 9)])
    params = RecurrencyParams(lam=0.1, alpha=1.0, window=0)
    scores = recurrency_score(index, params, EvalQuery(0, 0, 10, 1), np.array([1]))
    assert scores[0] == pytest.approx(2.0 ** -0.1)
    assert scores[0] == pytest.approx(0.933, abs=5e-4)


def test_strict_term_zero_decay_rate():
    index = _index_for([(0, 0, 1, 2)])
    params = RecurrencyParams(lam=0.0, alpha=1.0, window=0)
    scores = recurrency_score(index, params, EvalQuery(0, 0, 30, 1), np.array([1]))
    assert scores[0] == 1.0


def test_strict_term_strictly_decreasing_in_gap():
    params = RecurrencyParams(lam=0.5, alpha=1.0, window=0)
    values = []
    for gap in (1, 2, 5, 11):
        index = _index_for([(0, 0, 1, 20 - gap)])
        values.append(recurrency_score(index, params, EvalQuery(0, 0, 20, 1), np.array([1]))[0])
    assert all(a > b for a, b in zip(values, values[1:]))


def test_mixing_endpoints():
    quads = [(0, 0, 1, 5), (2, 0, 1, 0), (2, 0, 1, 1), (2, 0, 3, 2)]
    index = _index_for(quads)
    query = EvalQuery(0, 0, 6, 1)
    pure_strict = recurrency_score(index, RecurrencyParams(0.1, 1.0, 0), query, np.array([1, 3]))
    assert pure_strict[0] == pytest.approx(2.0 ** -0.1)
    assert pure_strict[1] == 0.0  # (0, 0, 3) never observed
    pure_relaxed = recurrency_score(index, RecurrencyParams(0.1, 0.0, 0), query, np.array([1, 3]))
    # freq_0(1) = 3 (max), freq_0(3) = 1
    assert pure_relaxed[0] == 1.0
    assert pure_relaxed[1] == pytest.approx(1.0 / 3.0)


def test_unseen_everything_scores_zero():
    index = _index_for([(0, 0, 1, 5)])
    scores = recurrency_score(
        index, RecurrencyParams(), EvalQuery(7, 1, 9, 2), np.array([2, 3, 4])
    )
    assert scores.tolist() == [0.0, 0.0, 0.0]


def test_window_truncates_strict_and_relaxed():
    quads = [(0, 0, 1, 0), (0, 0, 1, 1), (5, 0, 1, 1), (0, 0, 2, 9)]
    index = _index_for(quads)
    query = EvalQuery(0, 0, 10, 1)
    windowed = RecurrencyParams(lam=0.0, alpha=0.5, window=3)
    scores = recurrency_score(index, windowed, query, np.array([1, 2]))
    # (0,0,1) last seen at t=1: gap 9 > window -> strict 0; its relation
    # frequency inside [7, 10) is 0 as well
    assert scores[0] == 0.0
    # (0,0,2) seen at t=9: strict 1 (lam=0), relaxed 1 (only in-window entry)
    assert scores[1] == 1.0
    unbounded = RecurrencyParams(lam=0.0, alpha=0.5, window=0)
    full = recurrency_score(index, unbounded, query, np.array([1, 2]))
    assert full[0] == pytest.approx(0.5 * 1.0 + 0.5 * 1.0)  # freq 3/3
    assert full[1] == pytest.approx(0.5 * 1.0 + 0.5 * (1.0 / 3.0))


def test_params_validation():
    with pytest.raises(ConfigError):
        RecurrencyParams(lam=-0.1)
    with pytest.raises(ConfigError):
        RecurrencyParams(alpha=1.5)
    with pytest.raises(ConfigError):
        RecurrencyParams(window=-3)
    defaults = RecurrencyParams()
    assert (defaults.lam, defaults.alpha, defaults.window) == (0.1, 0.99, 0)


# -- causality ---------------------------------------------------------------------------


def test_score_at_or_before_high_water_rejected():
    index = _index_for([(0, 0, 1, 5)])
    with pytest.raises(ProtocolError, match="causality"):
        recurrency_score(index, RecurrencyParams(), EvalQuery(0, 0, 5, 1), np.array([1]))
    with pytest.raises(ProtocolError, match="causality"):
        recurrency_score(index, RecurrencyParams(), EvalQuery(0, 0, 4, 1), np.array([1]))


def test_observe_out_of_order_rejected():
    index = _index_for([(0, 0, 1, 5)])
    with pytest.raises(ProtocolError, match="ascending"):
        index.observe(from_quadruples([(0, 0, 1, 3)], node_count=2, relation_count=1))


@pytest.mark.parametrize("seed", range(5))
def test_causality_fuzz_scores_ignore_future(seed):
    # scores computed after observing extra future facts at >= t must equal
    # scores from an index that never saw anything at >= t
    rng = np.random.default_rng(seed)
    past = [(int(rng.integers(6)), int(rng.integers(2)), int(rng.integers(6)), int(t))
            for t in range(8) for _ in range(3)]
    g_past = from_quadruples(past, node_count=6, relation_count=2)
    full_index = HistoryIndex()
    full_index.observe(g_past)
    clean_index = HistoryIndex()
    clean_index.observe(g_past)
    query = EvalQuery(int(rng.integers(6)), int(rng.integers(2)), 8, 0)
    candidates = np.arange(6)
    params = RecurrencyParams(0.2, 0.7, 0)
    a = recurrency_score(full_index, params, query, candidates)
    b = recurrency_score(clean_index, params, query, candidates)
    assert a.tolist() == b.tolist()
    # and once t=8 facts are observed, scoring at 8 must fail
    full_index.observe(from_quadruples([(0, 0, 1, 8)], node_count=6, relation_count=2))
    with pytest.raises(ProtocolError):
        recurrency_score(full_index, params, query, candidates)


# -- ranking invariance through the engine ----------------------------------------------


def test_positive_scaling_leaves_result_unchanged():
    class Scaled(RecurrencyScorer):
        def score_query(self, query, candidates):
            return 17.5 * super().score_query(query, candidates)

    cfg = SynthConfig(node_count=25, relation_count=2, timestep_count=30, rate=5,
                      p_rep=0.5, seed=3)
    g = generate(cfg)
    train, valid, test, _ = chronological_split(g)
    universe = add_inverse_relations(g)
    queries = expand_queries(test, "tkg")
    negatives = generate_type_aware(universe, queries, q=6, seed=3)
    history = merge(train, valid)
    plain = evaluate_single_step(RecurrencyScorer(), history, test, negatives, g)
    scaled = evaluate_single_step(Scaled(), history, test, negatives, g)
    assert plain == scaled


# -- grid search ---------------------------------------------------------------------------


def _grid_fixture():
    cfg = SynthConfig(node_count=30, relation_count=2, timestep_count=36, rate=6,
                      p_rep=0.45, run_length=0.5, seed=8)
    g = generate(cfg)
    train, valid, test, _ = chronological_split(g)
    universe = add_inverse_relations(g)
    valid_queries = expand_queries(valid, "tkg")
    negatives = generate_type_aware(universe, valid_queries, q=10, seed=7)
    return g, train, valid, negatives


def test_singleton_grid_returned_verbatim():
    g, train, valid, negatives = _grid_fixture()
    best = grid_search_recurrency(
        train, valid, negatives, g, lam_grid=(0.3,), alpha_grid=(0.8,), window_grid=(2,)
    )
    assert best == RecurrencyParams(0.3, 0.8, 2)


def test_empty_grid_is_config_error():
    g, train, valid, negatives = _grid_fixture()
    with pytest.raises(ConfigError):
        grid_search_recurrency(train, valid, negatives, g, lam_grid=())


def test_grid_search_recovers_brute_forced_optimum():
    # expected argmax frozen from the independent oracle evaluator
    # (brute_force_evaluate over every combo): strict winner, no ties
    g, train, valid, negatives = _grid_fixture()
    lam_grid = (0.01, 0.1, 1.0)
    alpha_grid = (0.5, 0.9, 0.99)
    window_grid = (0, 4)
    best = grid_search_recurrency(
        train, valid, negatives, g, lam_grid, alpha_grid, window_grid
    )
    assert best == RecurrencyParams(lam=0.1, alpha=0.9, window=0)

    rows = []
    for lam, alpha, window in itertools.product(lam_grid, alpha_grid, window_grid):
        params = RecurrencyParams(lam, alpha, window)
        result = brute_force_evaluate(
            RecurrencyScorer(params), train, valid, negatives, g, kind="tkg"
        )
        rows.append((result.mrr, params))
    top_mrr = max(mrr for mrr, _ in rows)
    oracle_best = [p for mrr, p in rows if mrr == top_mrr]
    assert oracle_best == [best]


def test_grid_search_tie_break_preference():
    # a scorer-free tie: on an empty-history validation set every combo
    # scores all-zero, so the preferred corner of the grid must win
    quads = [(0, 0, 1, t) for t in range(3)]
    g = from_quadruples(quads + [(2, 1, 3, 0), (2, 1, 3, 1), (2, 1, 3, 2)],
                        node_count=6, relation_count=2)
    train = g.time_slice(0, 0)
    valid = g.time_slice(1, 2)
    universe = add_inverse_relations(g)
    queries = expand_queries(valid, "tkg")
    from chronolink import generate_random

    negatives = generate_random(universe, queries, q=3, seed=0)
    best = grid_search_recurrency(
        train, valid, negatives, g,
        lam_grid=(1.0, 0.1), alpha_grid=(0.9, 0.99), window_grid=(5, 1),
    )
    # identical MRR everywhere is impossible here (history exists), but the
    # preference order still resolves exact ties deterministically
    rows = {}
    for lam, alpha, window in itertools.product((1.0, 0.1), (0.9, 0.99), (5, 1)):
        params = RecurrencyParams(lam, alpha, window)
        result = evaluate_single_step(
            RecurrencyScorer(params), train, valid, negatives, g, kind="tkg"
        )
        rows[params] = result.mrr
    top = max(rows.values())
    tied = [p for p, mrr in rows.items() if mrr == top]
    expected = min(tied, key=lambda p: (p.lam, -p.alpha, p.window))
    assert best == expected


def test_scorer_manifests_are_reproducible():
    scorer = RecurrencyScorer(RecurrencyParams(0.2, 0.8, 7))
    manifest = scorer.params_manifest()
    assert manifest["lambda"] == 0.2 and manifest["alpha"] == 0.8 and manifest["window"] == 7
    assert "formula" in manifest
    bank = EdgeBankScorer("triple", window=9)
    assert bank.params_manifest() == {"scorer": "edgebank-tw", "key_mode": "triple", "window": 9}
