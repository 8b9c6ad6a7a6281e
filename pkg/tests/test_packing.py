"""Context retrieval against an independent pure-Python ranking oracle."""

import math
import random

import numpy as np
import pytest

from icforge.errors import (
    DimensionMismatchError,
    EmptyStoreError,
    SingletonPoolError,
    UnknownIdError,
    ZeroVectorError,
)
from icforge.packing import (
    ContextPolicy,
    EmbeddingStore,
    HashedEmbeddingProvider,
    clip_vector,
    cosine,
    load_store,
    pair_most_similar,
    retrieve_context,
    save_store,
)


# --- oracle: exhaustive ranking without numpy ---


def oracle_cosine(a, b) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    return dot / (na * nb)


def oracle_ranking(vectors: dict[str, list[float]], query_id: str) -> list[str]:
    query = vectors[query_id]
    scored = [(oracle_cosine(query, vec), other) for other, vec in vectors.items()
              if other != query_id]
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [other for _, other in scored]


def build_store(vectors: dict[str, list[float]]) -> EmbeddingStore:
    dimension = len(next(iter(vectors.values())))
    store = EmbeddingStore(dimension)
    for item_id, vec in vectors.items():
        store.add(item_id, vec)
    return store


def random_vectors(rng: random.Random, count: int, dim: int,
                   with_ties: bool = True) -> dict[str, list[float]]:
    vectors = {f"id{z:04d}": [rng.gauss(0, 1) for _ in range(dim)] for z in range(count)}
    if with_ties and count >= 4:
        ids = sorted(vectors)
        # exact duplicate and a power-of-two scaled copy: cosine ties exactly
        vectors[ids[1]] = list(vectors[ids[0]])
        vectors[ids[2]] = [4.0 * x for x in vectors[ids[0]]]
    return vectors


class TestCosine:
    def test_identical_vectors(self):
        assert cosine([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == pytest.approx(1.0, abs=1e-9)

    def test_orthogonal_basis(self):
        assert cosine([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_hand_computed_value(self):
        # (1*2 + 2*1) / (sqrt(5) * sqrt(5)) = 4/5
        assert cosine([1.0, 2.0], [2.0, 1.0]) == pytest.approx(0.8, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            cosine([1.0, 2.0], [1.0, 2.0, 3.0])

    def test_zero_vector(self):
        with pytest.raises(ZeroVectorError):
            cosine([0.0, 0.0], [1.0, 2.0])

    def test_symmetry(self):
        rng = random.Random(3)
        a = [rng.gauss(0, 1) for _ in range(16)]
        b = [rng.gauss(0, 1) for _ in range(16)]
        assert cosine(a, b) == cosine(b, a)


class TestRetrieveContext:
    def test_forced_choice_two_ids(self):
        store = build_store({"a": [1.0, 0.0], "b": [0.0, 1.0]})
        assert retrieve_context("a", ContextPolicy("text_to_text", 1), store) == ["b"]

    def test_m_zero_returns_empty(self):
        store = build_store({"a": [1.0, 0.0], "b": [0.0, 1.0]})
        assert retrieve_context("a", ContextPolicy("text_to_text", 0), store) == []

    def test_unknown_query(self):
        store = build_store({"a": [1.0, 0.0], "b": [0.0, 1.0]})
        with pytest.raises(UnknownIdError):
            retrieve_context("zzz", ContextPolicy("text_to_text", 1), store)

    def test_singleton_store_raises(self):
        store = build_store({"a": [1.0, 0.0]})
        with pytest.raises(EmptyStoreError):
            retrieve_context("a", ContextPolicy("text_to_text", 1), store)

    def test_output_capped_at_store_size(self):
        vectors = random_vectors(random.Random(1), 5, 8, with_ties=False)
        store = build_store(vectors)
        query = sorted(vectors)[0]
        result = retrieve_context(query, ContextPolicy("text_to_text", 50), store)
        assert len(result) == 4
        assert query not in result

    def test_matches_oracle_on_random_store(self):
        rng = random.Random(42)
        vectors = random_vectors(rng, 200, 24)
        store = build_store(vectors)
        query = sorted(vectors)[7]
        result = retrieve_context(query, ContextPolicy("text_to_text", 5), store)
        assert result == oracle_ranking(vectors, query)[:5]

    def test_insertion_order_cannot_change_result(self):
        rng = random.Random(5)
        vectors = random_vectors(rng, 40, 12)
        query = sorted(vectors)[0]
        policy = ContextPolicy("text_to_text", 6)
        forward = build_store(dict(sorted(vectors.items())))
        backward = build_store(dict(sorted(vectors.items(), reverse=True)))
        assert (retrieve_context(query, policy, forward)
                == retrieve_context(query, policy, backward))

    def test_positive_scaling_invariance(self):
        rng = random.Random(11)
        vectors = random_vectors(rng, 60, 16)
        scaled = {k: [3.7 * x for x in v] for k, v in vectors.items()}
        query = sorted(vectors)[3]
        policy = ContextPolicy("text_to_text", 8)
        assert (retrieve_context(query, policy, build_store(vectors))
                == retrieve_context(query, policy, build_store(scaled)))


class TestPairMostSimilar:
    def test_two_image_pool(self):
        pool = build_store({"m1": [1.0, 0.0], "m2": [0.5, 0.5]})
        assert pair_most_similar("m1", pool) == "m2"

    def test_duplicate_direction_wins_over_orthogonal(self):
        pool = build_store({
            "q": [1.0, 0.0, 0.0],
            "dup": [2.0, 0.0, 0.0],   # same direction as q
            "orth1": [0.0, 1.0, 0.0],
            "orth2": [0.0, 0.0, 1.0],
        })
        assert pair_most_similar("q", pool) == "dup"

    def test_singleton_pool(self):
        pool = build_store({"only": [1.0, 0.0]})
        with pytest.raises(SingletonPoolError):
            pair_most_similar("only", pool)

    def test_matches_bruteforce_argmax_on_random_pool(self):
        rng = random.Random(77)
        vectors = random_vectors(rng, 100, 32)
        pool = build_store(vectors)
        for query in sorted(vectors)[:10]:
            assert pair_most_similar(query, pool) == oracle_ranking(vectors, query)[0]


class TestStoreValidation:
    def test_dimension_enforced(self):
        store = EmbeddingStore(3)
        with pytest.raises(DimensionMismatchError):
            store.add("a", [1.0, 2.0])

    def test_non_finite_rejected(self):
        store = EmbeddingStore(2)
        with pytest.raises(ValueError):
            store.add("a", [float("nan"), 1.0])


class TestStoreFile:
    def test_round_trip(self, tmp_path):
        rng = random.Random(9)
        vectors = {f"v{i}": [rng.gauss(0, 1) for _ in range(6)] for i in range(20)}
        store = build_store(vectors)
        path = tmp_path / "vectors.bin"
        save_store(store, path)
        loaded = load_store(path)
        assert loaded.dimension == 6
        assert sorted(loaded.ids()) == sorted(store.ids())
        for item_id in vectors:
            # float32 storage: equality after one round through f32
            assert np.allclose(loaded.get(item_id),
                               np.asarray(vectors[item_id], dtype=np.float32))


class TestHelpers:
    def test_clip_vector_is_frame_mean(self):
        frames = [[1.0, 0.0], [0.0, 1.0]]
        assert np.allclose(clip_vector(frames), [0.5, 0.5])

    def test_hashed_provider_deterministic_unit_vectors(self):
        provider = HashedEmbeddingProvider(16)
        a = provider.embed("hello")
        b = provider.embed("hello")
        c = provider.embed("other")
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert np.linalg.norm(a) == pytest.approx(1.0, abs=1e-12)
