"""JSON Lines readers and writers for documents, chunks and QA items."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator

from ..errors import DanglingGoldChunk, DuplicateId, NoDocuments, ParseError
from .types import QTYPES, Chunk, Document, QAItem


def _dump_line(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=False) + "\n"


def _records(path: Path) -> Iterator[tuple[int, dict[str, Any]]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path=str(path), line=lineno) from None
            if not isinstance(rec, dict):
                raise ParseError("record is not a JSON object", path=str(path), line=lineno)
            yield lineno, rec


def _require(rec: dict, key: str, kind: type, path: Path, lineno: int):
    if key not in rec:
        raise ParseError(f"missing key {key!r}", path=str(path), line=lineno)
    val = rec[key]
    if not isinstance(val, kind):
        raise ParseError(f"key {key!r} must be {kind.__name__}", path=str(path), line=lineno)
    return val


# -- documents ---------------------------------------------------------------


def document_to_record(doc: Document) -> dict:
    return {"id": doc.id, "title": doc.title, "source": doc.source, "body": doc.body, "topic": doc.topic}


def dump_corpus(docs: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in docs:
            fh.write(_dump_line(document_to_record(d)))


def load_corpus(path: str | Path) -> list[Document]:
    path = Path(path)
    docs: list[Document] = []
    seen: set[str] = set()
    for lineno, rec in _records(path):
        topic = rec.get("topic")
        if topic is not None and not isinstance(topic, str):
            raise ParseError("key 'topic' must be a string or null", path=str(path), line=lineno)
        doc = Document(
            id=_require(rec, "id", str, path, lineno),
            title=_require(rec, "title", str, path, lineno),
            source=_require(rec, "source", str, path, lineno),
            body=_require(rec, "body", str, path, lineno),
            topic=topic,
        )
        problems = doc.problems()
        if problems:
            raise ParseError("; ".join(problems), path=str(path), line=lineno)
        if doc.id in seen:
            raise ParseError(f"duplicate document id {doc.id!r}", path=str(path), line=lineno)
        seen.add(doc.id)
        docs.append(doc)
    return docs


def load_corpus_dir(path: str | Path) -> list[Document]:
    """Load every ``*.jsonl`` under a directory (or a single file), in sorted order."""
    path = Path(path)
    files = [path] if path.is_file() else sorted(path.glob("*.jsonl"))
    docs: list[Document] = []
    seen: set[str] = set()
    for f in files:
        for d in load_corpus(f):
            if d.id in seen:
                raise DuplicateId(f"document id {d.id!r} appears in more than one corpus file")
            seen.add(d.id)
            docs.append(d)
    if not docs:
        raise NoDocuments(f"no documents found under {path}")
    return docs


# -- chunks ------------------------------------------------------------------


def chunk_to_record(c: Chunk) -> dict:
    return {"id": c.id, "doc_id": c.doc_id, "section_path": list(c.section_path), "ordinal": c.ordinal, "text": c.text}


def dump_chunks(chunks: Iterable[Chunk], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in chunks:
            fh.write(_dump_line(chunk_to_record(c)))


def load_chunks(path: str | Path) -> list[Chunk]:
    path = Path(path)
    out = []
    for lineno, rec in _records(path):
        section_path = _require(rec, "section_path", list, path, lineno)
        if not section_path or not all(isinstance(p, str) and p for p in section_path):
            raise ParseError("section_path must be a non-empty list of strings", path=str(path), line=lineno)
        out.append(
            Chunk(
                id=_require(rec, "id", str, path, lineno),
                doc_id=_require(rec, "doc_id", str, path, lineno),
                section_path=tuple(section_path),
                ordinal=_require(rec, "ordinal", int, path, lineno),
                text=_require(rec, "text", str, path, lineno),
            )
        )
    return out


# -- QA ------------------------------------------------------------------------


def qa_to_record(item: QAItem) -> dict:
    return {
        "id": item.id,
        "question": item.question,
        "reference_answer": item.reference_answer,
        "gold_chunk_ids": list(item.gold_chunk_ids),
        "qtype": item.qtype,
    }


def dump_qa(items: Iterable[QAItem], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for q in items:
            fh.write(_dump_line(qa_to_record(q)))


def load_qa_dataset(path: str | Path, chunk_ids: Iterable[str] | None = None) -> list[QAItem]:
    """Read a QA file; when ``chunk_ids`` is given, every gold id must resolve against it."""
    path = Path(path)
    known = set(chunk_ids) if chunk_ids is not None else None
    items: list[QAItem] = []
    seen: set[str] = set()
    for lineno, rec in _records(path):
        qa_id = _require(rec, "id", str, path, lineno)
        question = _require(rec, "question", str, path, lineno)
        answer = _require(rec, "reference_answer", str, path, lineno)
        gold = _require(rec, "gold_chunk_ids", list, path, lineno)
        qtype = rec.get("qtype", "factual")
        if not qa_id or qa_id in seen:
            raise ParseError(f"missing or duplicate QA id {qa_id!r}", path=str(path), line=lineno)
        if not question.strip() or not answer.strip():
            raise ParseError("question and reference_answer must be non-empty", path=str(path), line=lineno)
        if not gold or not all(isinstance(g, str) and g for g in gold):
            raise ParseError("gold_chunk_ids must be a non-empty list of ids", path=str(path), line=lineno)
        if qtype not in QTYPES:
            raise ParseError(f"qtype must be one of {QTYPES}, got {qtype!r}", path=str(path), line=lineno)
        if known is not None:
            for g in gold:
                if g not in known:
                    raise DanglingGoldChunk(qa_id, g)
        seen.add(qa_id)
        items.append(QAItem(qa_id, question, answer, tuple(gold), qtype))
    return items
