"""Vector store for retrieval-augmented generation.

The reference embedder is deterministic so retrieval is reproducible with
no network: lowercase, split on non-alphanumeric runs, FNV-1a 64-bit hash
each token into one of 256 buckets, L2-normalize the bucket counts. An
empty token set embeds to the zero vector.

Federated retrieval keeps per-store documents confidential: only
(doc_id, score, store_id) triples cross the store boundary, never text.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass

import numpy as np

from .errors import DuplicateDocId

EMBEDDING_DIM = 256

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def embed(text: str) -> np.ndarray:
    """Deterministic 256-bucket hashing embedding, unit-normalized."""
    counts = np.zeros(EMBEDDING_DIM, dtype=np.float64)
    for token in _TOKEN_RE.findall(text.lower()):
        counts[_fnv1a64(token.encode("utf-8")) % EMBEDDING_DIM] += 1.0
    norm = float(np.sqrt(np.dot(counts, counts)))
    if norm == 0.0:
        return counts
    return counts / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of embeddings; they are unit (or zero) vectors."""
    return float(np.dot(a, b))


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    source: str
    embedding: np.ndarray


@dataclass(frozen=True)
class RetrievedChunk:
    doc_id: str
    score: float
    store_id: str

    def to_payload(self) -> dict:
        return {"doc_id": self.doc_id, "score": self.score, "store_id": self.store_id}


class VectorStore:
    def __init__(self, store_id: str = "default"):
        self.store_id = store_id
        self._docs: dict[str, Document] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._docs)

    def add_document(self, doc_id: str, text: str, source: str = "") -> Document:
        with self._lock:
            if doc_id in self._docs:
                raise DuplicateDocId(f"doc_id already present: {doc_id!r}")
            doc = Document(doc_id=doc_id, text=text, source=source, embedding=embed(text))
            self._docs[doc_id] = doc
            return doc

    def get_document(self, doc_id: str) -> Document | None:
        return self._docs.get(doc_id)

    def documents(self) -> list[Document]:
        return list(self._docs.values())

    def retrieve(self, query_text: str, k: int) -> list[RetrievedChunk]:
        """Top-k by cosine similarity, ties broken by ascending doc_id.

        A zero-vector query (no tokens) retrieves nothing.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        query = embed(query_text)
        if not query.any():
            return []
        scored = [
            RetrievedChunk(doc_id=doc.doc_id, score=cosine(query, doc.embedding), store_id=self.store_id)
            for doc in self._docs.values()
        ]
        scored.sort(key=lambda c: (-c.score, c.doc_id))
        return scored[:k]

    def save_jsonl(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for doc in self._docs.values():
                fh.write(json.dumps(
                    {"doc_id": doc.doc_id, "text": doc.text, "source": doc.source},
                    ensure_ascii=False, sort_keys=True,
                ) + "\n")

    @classmethod
    def load_jsonl(cls, path: str, store_id: str = "default") -> "VectorStore":
        store = cls(store_id=store_id)
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                raw = json.loads(line)
                store.add_document(raw["doc_id"], raw["text"], raw.get("source", ""))
        return store


def federated_retrieve(stores: list[VectorStore], query_text: str, k: int) -> list[RetrievedChunk]:
    """Merge per-store local top-k into a global top-k.

    Each store ships only scored identifiers; the merge orders by
    (score desc, store_id asc, doc_id asc). Document text never crosses the
    store boundary.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    merged: list[RetrievedChunk] = []
    for store in stores:
        merged.extend(store.retrieve(query_text, k))
    merged.sort(key=lambda c: (-c.score, c.store_id, c.doc_id))
    return merged[:k]
