from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

SOURCES = ("web", "wikipedia", "synthetic")
QTYPES = ("factual", "interpretation")


@dataclass(frozen=True)
class Document:
    id: str
    title: str
    source: str
    body: str
    topic: Optional[str] = None

    def problems(self) -> list[str]:
        out = []
        if not self.id:
            out.append("empty id")
        if not self.title.strip():
            out.append("empty title")
        if self.source not in SOURCES:
            out.append(f"source must be one of {SOURCES}, got {self.source!r}")
        if not self.body.strip():
            out.append("body is blank")
        return out


@dataclass(frozen=True)
class Chunk:
    id: str
    doc_id: str
    section_path: tuple[str, ...]
    ordinal: int
    text: str

    @property
    def char_len(self) -> int:
        return len(self.text)

    def context_text(self) -> str:
        """Chunk text prefixed with its section path, as fed to the embedder."""
        return " > ".join(self.section_path) + "\n" + self.text


@dataclass(frozen=True)
class QAItem:
    id: str
    question: str
    reference_answer: str
    gold_chunk_ids: tuple[str, ...]
    qtype: str = "factual"


@dataclass
class CorpusStats:
    """Per-source corpus counters, shaped like the usual dataset statistics table."""

    articles: int = 0
    characters: int = 0
    chunks: int = 0
    chunk_characters: int = 0
    by_source: dict[str, "CorpusStats"] = field(default_factory=dict)

    @property
    def chars_per_article(self) -> float:
        return self.characters / self.articles if self.articles else 0.0

    @property
    def chunks_per_article(self) -> float:
        return self.chunks / self.articles if self.articles else 0.0

    @property
    def chars_per_chunk(self) -> float:
        return self.chunk_characters / self.chunks if self.chunks else 0.0

    def as_dict(self) -> dict:
        out = {
            "articles": self.articles,
            "characters": self.characters,
            "chars_per_article": round(self.chars_per_article, 2),
            "chunks": self.chunks,
            "chunks_per_article": round(self.chunks_per_article, 2),
            "chars_per_chunk": round(self.chars_per_chunk, 2),
        }
        if self.by_source:
            out["by_source"] = {k: v.as_dict() for k, v in sorted(self.by_source.items())}
        return out


def corpus_stats(docs: list[Document], chunks: list[Chunk]) -> CorpusStats:
    source_of = {d.id: d.source for d in docs}
    total = CorpusStats()
    for d in docs:
        part = total.by_source.setdefault(d.source, CorpusStats())
        for s in (total, part):
            s.articles += 1
            s.characters += len(d.body)
    for c in chunks:
        part = total.by_source.setdefault(source_of.get(c.doc_id, "unknown"), CorpusStats())
        for s in (total, part):
            s.chunks += 1
            s.chunk_characters += c.char_len
    return total
