import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xcal.errors import CorpusError, NotFoundError
from xcal.store import Corpus, RankedList, cosine_similarity, initial_retrieval, normalize

from oracles import exhaustive_ranking


def make_corpus(n=50, d=8, seed=0, prefix="rec"):
    rng = np.random.default_rng(seed)
    ids = [f"{prefix}-{i:05d}" for i in range(n)]
    return Corpus(d, ids, rng.normal(size=(n, d)))


class TestNormalize:
    def test_analytic(self):
        np.testing.assert_allclose(normalize([3.0, 4.0]), [0.6, 0.8], atol=1e-12)

    def test_unit_vector_unchanged(self):
        u = np.array([1.0, 0.0, 0.0])
        np.testing.assert_allclose(normalize(u), u, atol=1e-7)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            normalize([0.0, 0.0])

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            normalize([1.0, np.nan])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=32))
    def test_norm_and_direction(self, values):
        v = np.asarray(values)
        if np.linalg.norm(v) < 1e-9:
            return
        u = normalize(v)
        assert abs(np.linalg.norm(u) - 1.0) < 1e-5
        assert cosine_similarity(u, v) > 1.0 - 1e-9


class TestCosineSimilarity:
    def test_identity(self):
        u = normalize([0.3, -0.4, 0.5])
        assert cosine_similarity(u, u) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0, abs=1e-12)

    def test_analytic(self):
        assert cosine_similarity([1.0, 0.0], [0.6, 0.8]) == pytest.approx(0.6, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cosine_similarity([1.0, 0.0], [1.0, 0.0, 0.0])

    def test_symmetry_random_pairs(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            a = rng.normal(size=16)
            b = rng.normal(size=16)
            assert cosine_similarity(a, b) == pytest.approx(cosine_similarity(b, a), abs=1e-7)

    def test_clamped(self):
        v = normalize(np.ones(4))
        assert -1.0 <= cosine_similarity(v, -v) <= 1.0


class TestCorpus:
    def test_vectors_normalized_at_ingest(self):
        corpus = make_corpus(n=30, d=6)
        norms = np.linalg.norm(corpus.matrix, axis=1)
        assert np.all(np.abs(norms - 1.0) < 1e-5)

    def test_duplicate_id_rejected(self):
        with pytest.raises(CorpusError, match="dup"):
            Corpus(2, ["dup", "dup"], [[1.0, 0.0], [0.0, 1.0]])

    def test_zero_vector_rejected_naming_id(self):
        with pytest.raises(CorpusError, match="bad-one"):
            Corpus(2, ["ok", "bad-one"], [[1.0, 0.0], [0.0, 0.0]])

    def test_dimension_mismatch_names_both(self):
        with pytest.raises(CorpusError, match="4"):
            Corpus(4, ["a"], [[1.0, 0.0]])

    def test_matrix_immutable(self):
        corpus = make_corpus()
        with pytest.raises(ValueError):
            corpus.matrix[0, 0] = 5.0

    def test_unknown_id(self):
        corpus = make_corpus()
        with pytest.raises(NotFoundError):
            corpus.vector("nope")

    def test_label_join(self):
        corpus = Corpus(2, ["a", "b"], [[1.0, 0.0], [0.0, 1.0]], labels=["x", None])
        assert corpus.label("a") == "x"
        assert corpus.label("b") is None
        assert corpus.label_map() == {"a": "x"}


class TestInitialRetrieval:
    def test_self_query_ranks_first_with_score_one(self):
        corpus = make_corpus(n=40, d=8, seed=3)
        result = initial_retrieval(corpus.vector("rec-00007"), corpus, 10)
        assert result.entries[0][0] == "rec-00007"
        assert result.entries[0][1] == pytest.approx(1.0, abs=1e-9)

    def test_limit_clamped_to_corpus_size(self):
        corpus = make_corpus(n=20)
        result = initial_retrieval(np.ones(8), corpus, 2500)
        assert len(result) == 20

    def test_scores_non_increasing_and_ids_unique(self):
        corpus = make_corpus(n=100, seed=5)
        result = initial_retrieval(np.ones(8), corpus, 100)
        scores = [s for _, s in result.entries]
        assert all(a >= b for a, b in zip(scores, scores[1:]))
        assert len(set(result.ids)) == len(result.ids)

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(11)
        corpus = make_corpus(n=2000, d=64, seed=12)
        for _ in range(5):
            query = rng.normal(size=64)
            mine = initial_retrieval(query, corpus, 2000)
            oracle = exhaustive_ranking(corpus, query, 2000)
            assert mine.ids == [i for i, _ in oracle]

    def test_tie_break_by_ascending_id(self):
        # duplicate vectors force exact score ties
        v = normalize(np.arange(1.0, 7.0))
        corpus = Corpus(6, ["z-last", "a-first", "m-mid"], [v, v, v])
        result = initial_retrieval(v, corpus, 3)
        assert result.ids == ["a-first", "m-mid", "z-last"]

    def test_empty_corpus_gives_empty_list(self):
        corpus = Corpus(4, [], np.empty((0, 4)))
        assert initial_retrieval(np.ones(4), corpus, 5).entries == []

    def test_dimension_mismatch(self):
        corpus = make_corpus(d=8)
        with pytest.raises(ValueError):
            initial_retrieval(np.ones(9), corpus, 5)

    def test_permutation_prefix_of_corpus(self):
        corpus = make_corpus(n=64, seed=9)
        result = initial_retrieval(np.ones(8), corpus, 30)
        assert len(result) == 30
        assert set(result.ids) <= set(corpus.ids)


class TestRankedList:
    def test_ids_property(self):
        ranked = RankedList([("a", 2.0), ("b", 1.0)], "initial-cosine")
        assert ranked.ids == ["a", "b"]
        assert len(ranked) == 2
