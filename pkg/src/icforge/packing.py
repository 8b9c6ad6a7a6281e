"""Context selection: cosine retrieval over an embedding store.

The store is exhaustive-search only; at the scale this toolkit targets a
brute-force ranking is fast and exactly reproducible. Results are fully
deterministic: descending cosine similarity with lexicographic id
tie-breaks, independent of insertion order.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyStoreError,
    SingletonPoolError,
    UnknownIdError,
    ZeroVectorError,
)

TEXT_TO_TEXT = "text_to_text"
IMAGE_TO_IMAGE = "image_to_image"


@dataclass(frozen=True)
class ContextPolicy:
    """How a task picks its in-context examples."""

    mode: str  # text_to_text | image_to_image
    m: int
    exclude_self: bool = True  # always true; kept explicit for config dumps
    tie_break: str = "lexicographic"

    def __post_init__(self):
        if self.mode not in (TEXT_TO_TEXT, IMAGE_TO_IMAGE):
            raise ValueError(f"unknown retrieval mode {self.mode!r}")
        if self.m < 0:
            raise ValueError("context size m must be >= 0")
        if not self.exclude_self:
            raise ValueError("self-exclusion is not optional")


def cosine(a, b) -> float:
    """Cosine similarity of two equal-dimension, non-zero vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"dimensions differ: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine undefined for zero-norm vectors")
    value = float(np.dot(a, b) / (na * nb))
    # numeric noise can push |value| marginally past 1
    return max(-1.0, min(1.0, value))


class EmbeddingStore:
    """Id -> fixed-dimension vector map with finite-value validation."""

    def __init__(self, dimension: int):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self._vectors: dict[str, np.ndarray] = {}

    def add(self, item_id: str, vector) -> None:
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.dimension,):
            raise DimensionMismatchError(
                f"{item_id}: expected dimension {self.dimension}, got {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"{item_id}: vector has non-finite components")
        self._vectors[item_id] = vec

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def ids(self) -> list[str]:
        return list(self._vectors)

    def get(self, item_id: str) -> np.ndarray:
        if item_id not in self._vectors:
            raise UnknownIdError(f"id {item_id!r} not in store")
        return self._vectors[item_id]

    def _ranked_against(self, query_id: str) -> list[tuple[float, str]]:
        query = self.get(query_id)
        nq = float(np.linalg.norm(query))
        if nq == 0.0:
            raise ZeroVectorError(f"query {query_id} has zero norm")
        scored = []
        for other_id, vec in self._vectors.items():
            if other_id == query_id:
                continue
            nv = float(np.linalg.norm(vec))
            if nv == 0.0:
                raise ZeroVectorError(f"stored vector {other_id} has zero norm")
            sim = float(np.dot(query, vec) / (nq * nv))
            scored.append((sim, other_id))
        # descending similarity, ascending id on ties
        scored.sort(key=lambda pair: (-pair[0], pair[1]))
        return scored


def retrieve_context(query_id: str, policy: ContextPolicy, store: EmbeddingStore) -> list[str]:
    """Top-``m`` ids by cosine similarity to the query, self excluded."""
    if query_id not in store:
        raise UnknownIdError(f"query id {query_id!r} not in store")
    if policy.m == 0:
        return []
    if len(store) <= 1:
        raise EmptyStoreError("store holds no candidates besides the query")
    ranked = store._ranked_against(query_id)
    return [item_id for _, item_id in ranked[:policy.m]]


def pair_most_similar(query_media: str, pool: EmbeddingStore) -> str:
    """The single most similar pool member, used to build difference pairs."""
    if query_media not in pool:
        raise UnknownIdError(f"media id {query_media!r} not in pool")
    if len(pool) <= 1:
        raise SingletonPoolError("pool holds only the query image")
    ranked = pool._ranked_against(query_media)
    return ranked[0][1]


def clip_vector(frame_vectors) -> np.ndarray:
    """Clip-level vector: the mean of its frame vectors."""
    frames = np.asarray(frame_vectors, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise ValueError("expected a non-empty list of frame vectors")
    return frames.mean(axis=0)


# --- embedding file format ---
# Header line: UTF-8 JSON `{"dimension": D, "count": N, "version": 1}` + "\n".
# Then N rows, each `<u16 little-endian id length><id utf-8><D float32 LE>`.

_HEADER_VERSION = 1


def save_store(store: EmbeddingStore, path: str | Path) -> None:
    path = Path(path)
    header = json.dumps({"dimension": store.dimension, "count": len(store),
                         "version": _HEADER_VERSION}, sort_keys=True)
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8") + b"\n")
        for item_id in sorted(store.ids()):
            encoded = item_id.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(store.get(item_id).astype("<f4").tobytes())


def load_store(path: str | Path) -> EmbeddingStore:
    path = Path(path)
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("version") != _HEADER_VERSION:
            raise ValueError(f"unsupported embedding file version {header.get('version')}")
        dimension = int(header["dimension"])
        count = int(header["count"])
        store = EmbeddingStore(dimension)
        row_bytes = dimension * 4
        for _ in range(count):
            (id_len,) = struct.unpack("<H", fh.read(2))
            item_id = fh.read(id_len).decode("utf-8")
            vec = np.frombuffer(fh.read(row_bytes), dtype="<f4").astype(np.float64)
            store.add(item_id, vec)
    return store


class HashedEmbeddingProvider:
    """Deterministic pseudo-embeddings derived from content digests.

    Stands in for a real embedding model in tests and mock pipeline runs;
    the same text always maps to the same unit vector.
    """

    def __init__(self, dimension: int = 64):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        seed = int.from_bytes(digest[:8], "little")
        rng = np.random.default_rng(seed)
        vec = rng.standard_normal(self.dimension)
        norm = np.linalg.norm(vec)
        if norm == 0.0:  # astronomically unlikely; keep the store valid
            vec[0] = 1.0
            norm = 1.0
        return vec / norm


@dataclass
class StoreBundle:
    """Embedding stores the packing stage works from."""

    text: EmbeddingStore | None = None
    media: EmbeddingStore | None = None
    extras: dict[str, EmbeddingStore] = field(default_factory=dict)
