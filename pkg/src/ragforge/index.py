"""Dense vector index with exact cosine top-k search and a binary on-disk format.

File layout (little-endian)::

    b"RGIX" | u32 version | u32 dim | u64 count
    count x ( u16 id_len | id bytes | dim x f32 )
    count x ( u16 len | prev id bytes | u16 len | next id bytes )   # empty id = no neighbour
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .corpus.types import Chunk
from .errors import DimensionMismatch, DuplicateId, EmptyCorpus, FormatError, VersionMismatch
from .providers import Embedder, Embedding

MAGIC = b"RGIX"
VERSION = 1


@dataclass(frozen=True)
class RankedList:
    items: tuple[tuple[str, float], ...]
    query_id: str = ""

    @property
    def ids(self) -> list[str]:
        return [cid for cid, _ in self.items]

    @property
    def scores(self) -> list[float]:
        return [s for _, s in self.items]

    def __len__(self) -> int:
        return len(self.items)

    @classmethod
    def ranked(cls, scored: Iterable[tuple[str, float]], query_id: str = "") -> "RankedList":
        """Sort by score descending, ties by ascending id."""
        return cls(tuple(sorted(scored, key=lambda t: (-t[1], t[0]))), query_id)


@dataclass
class VectorIndex:
    dim: int
    ids: list[str]
    matrix: np.ndarray  # (count, dim) float32, rows unit-norm
    adjacency: dict[str, tuple[Optional[str], Optional[str]]] = field(default_factory=dict)

    def __post_init__(self):
        self.matrix = np.ascontiguousarray(self.matrix, dtype=np.float32)
        self.matrix.setflags(write=False)
        self._row = {cid: i for i, cid in enumerate(self.ids)}
        # float64 copies so every scan uses one fixed arithmetic path
        self._m64 = self.matrix.astype(np.float64)
        self._norms = np.linalg.norm(self._m64, axis=1)
        self._norms[self._norms == 0] = 1.0
        # position of each id in ascending id order, the tie-break key
        self._id_rank = np.empty(len(self.ids), dtype=np.int64)
        self._id_rank[sorted(range(len(self.ids)), key=self.ids.__getitem__)] = np.arange(len(self.ids))

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._row

    def row(self, chunk_id: str) -> int:
        return self._row[chunk_id]

    def vector(self, chunk_id: str) -> Embedding:
        return Embedding(self.matrix[self._row[chunk_id]].copy())

    def neighbours(self, chunk_id: str) -> tuple[Optional[str], Optional[str]]:
        return self.adjacency.get(chunk_id, (None, None))

    def scores(self, query: Embedding) -> np.ndarray:
        if query.dim != self.dim:
            raise DimensionMismatch(f"query dim {query.dim} != index dim {self.dim}")
        q = query.values.astype(np.float64)
        qn = float(np.linalg.norm(q)) or 1.0
        return (self._m64 @ q) / (self._norms * qn)

    def search(self, query: Embedding, k: int, query_id: str = "") -> RankedList:
        if k < 1:
            raise ValueError("k must be positive")
        s = self.scores(query)
        # lexsort: last key is primary -> score desc, then id asc
        order = np.lexsort((self._id_rank, -s))[:k]
        return RankedList(tuple((self.ids[i], float(s[i])) for i in order), query_id)


def search(index: VectorIndex, query_vec: Embedding, k: int) -> RankedList:
    return index.search(query_vec, k)


def adjacency_from_chunks(chunks: Iterable[Chunk]) -> dict[str, tuple[Optional[str], Optional[str]]]:
    by_doc: dict[str, list[Chunk]] = {}
    for c in chunks:
        by_doc.setdefault(c.doc_id, []).append(c)
    adj = {}
    for doc_chunks in by_doc.values():
        doc_chunks.sort(key=lambda c: c.ordinal)
        for i, c in enumerate(doc_chunks):
            prev = doc_chunks[i - 1].id if i > 0 else None
            nxt = doc_chunks[i + 1].id if i + 1 < len(doc_chunks) else None
            adj[c.id] = (prev, nxt)
    return adj


def build_index(chunks: list[Chunk], embedder: Embedder, with_context: bool = True) -> VectorIndex:
    """Embed every chunk (prefixed with its section path unless ``with_context`` is off)."""
    if not chunks:
        raise EmptyCorpus("cannot build an index over zero chunks")
    seen: set[str] = set()
    for c in chunks:
        if c.id in seen:
            raise DuplicateId(f"duplicate chunk id {c.id!r}")
        seen.add(c.id)
    vecs = [embedder.embed(c.context_text() if with_context else c.text) for c in chunks]
    dim = vecs[0].dim
    for c, v in zip(chunks, vecs):
        if v.dim != dim:
            raise DimensionMismatch(f"chunk {c.id!r} embedded to dim {v.dim}, expected {dim}")
    return VectorIndex(dim, [c.id for c in chunks], np.stack([v.values for v in vecs]), adjacency_from_chunks(chunks))


# -- persistence -----------------------------------------------------------------


def _pack_str(s: Optional[str]) -> bytes:
    b = (s or "").encode("utf-8")
    if len(b) > 0xFFFF:
        raise ValueError(f"id too long for index format: {s[:40]!r}...")
    return struct.pack("<H", len(b)) + b


def save_index(index: VectorIndex, path: str | Path) -> None:
    parts = [MAGIC, struct.pack("<IIQ", VERSION, index.dim, len(index.ids))]
    for cid, row in zip(index.ids, index.matrix):
        parts.append(_pack_str(cid))
        parts.append(row.astype("<f4").tobytes())
    for cid in index.ids:
        prev, nxt = index.neighbours(cid)
        parts.append(_pack_str(prev))
        parts.append(_pack_str(nxt))
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(f"truncated file while reading {what}", self.pos)
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def string(self, what: str) -> str:
        at = self.pos
        (n,) = struct.unpack("<H", self.take(2, what))
        try:
            return self.take(n, what).decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"invalid UTF-8 in {what}", at) from None


def load_index(path: str | Path) -> VectorIndex:
    r = _Reader(Path(path).read_bytes())
    if r.take(4, "magic") != MAGIC:
        raise FormatError("bad magic bytes, not an RGIX index", 0)
    at = r.pos
    version, dim, count = struct.unpack("<IIQ", r.take(16, "header"))
    if version != VERSION:
        raise VersionMismatch(f"index version {version} is not supported (expected {VERSION})", at)
    if dim == 0:
        raise FormatError("dim must be positive", at + 4)
    ids: list[str] = []
    matrix = np.empty((count, dim), dtype=np.float32)
    for i in range(count):
        ids.append(r.string("entry id"))
        matrix[i] = np.frombuffer(r.take(4 * dim, "vector"), dtype="<f4")
    if len(set(ids)) != len(ids):
        raise FormatError("duplicate entry ids", 24)
    adjacency = {}
    for cid in ids:
        prev = r.string("adjacency") or None
        nxt = r.string("adjacency") or None
        adjacency[cid] = (prev, nxt)
    if r.pos != len(r.buf):
        raise FormatError("trailing bytes after adjacency table", r.pos)
    return VectorIndex(int(dim), ids, matrix, adjacency)
