from pathlib import Path

import numpy as np
import pytest

from chronolink import Scorer, from_quadruples

DATA_DIR = Path(__file__).parent / "data"

# canonical desk-scale fixture used across the suite
G4_QUADS = [(0, 0, 1, 0), (0, 0, 1, 1), (2, 1, 3, 1), (0, 0, 1, 3), (2, 1, 3, 3)]


@pytest.fixture
def g4():
    return from_quadruples(G4_QUADS, node_count=4, relation_count=2, granularity="year")


@pytest.fixture
def g4_path():
    return DATA_DIR / "g4.csv"


class HashScorer(Scorer):
    """Stateless pseudo-random scorer; pure in (source, relation, candidate, time).

    Useful for tie-free ranking laws: scores depend on nothing but the query
    and candidate ids, so scorer state cannot confound protocol properties.
    """

    name = "hash"

    def __init__(self, salt: int = 0):
        self.salt = salt

    def score_query(self, query, candidates):
        mixed = (
            candidates * 2654435761
            + query.source * 40503
            + query.relation * 9973
            + query.timestamp * 31
            + self.salt
        ) % 104729
        return mixed.astype(np.float64) / 104729.0
