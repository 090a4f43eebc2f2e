"""Header-aware section parsing and length-bounded chunking."""

from __future__ import annotations

import re

from ..errors import EmptyDocument, InvalidLimit
from .types import Chunk, Document

DEFAULT_CHUNK_LIMIT = 1000
MIN_CHUNK_LIMIT = 50

_HEADING = re.compile(r"^(#{1,6})[ \t]+(.*?)[ \t]*#*[ \t]*$")
_FENCE = re.compile(r"^\s*(```|~~~)")
_PARAGRAPH_BREAK = re.compile(r"\n[ \t]*\n\s*")
# sentence-final punctuation, optionally followed by closing quotes/brackets
_SENTENCE_END = re.compile(r"[.!?…]+[\"'”’)\]]*(?=\s|$)")


def parse_markdown_sections(doc: Document) -> list[tuple[tuple[str, ...], str]]:
    """Split a markdown body into ``(section_path, text)`` pairs.

    ``#``-style headings open a new section whose path is the document title
    followed by the enclosing heading chain. Text before the first heading is
    filed under the bare title. Headings inside fenced code blocks are treated
    as text. Sections whose text is blank are dropped.
    """
    if not doc.body.strip():
        raise EmptyDocument(f"document {doc.id!r} has a blank body")

    title = doc.title.strip() or doc.id
    stack: list[tuple[int, str]] = []
    path: tuple[str, ...] = (title,)
    lines: list[str] = []
    sections: list[tuple[tuple[str, ...], str]] = []
    in_fence = False

    def flush() -> None:
        text = "\n".join(lines).strip()
        if text:
            sections.append((path, text))
        lines.clear()

    for line in doc.body.splitlines():
        if _FENCE.match(line):
            in_fence = not in_fence
            lines.append(line)
            continue
        m = None if in_fence else _HEADING.match(line)
        if m and m.group(2).strip():
            flush()
            depth = len(m.group(1))
            while stack and stack[-1][0] >= depth:
                stack.pop()
            stack.append((depth, m.group(2).strip()))
            path = (title, *(name for _, name in stack))
        else:
            lines.append(line)
    flush()
    return sections


def _strip_span(text: str, start: int, end: int) -> tuple[int, int]:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    return start, end


def _paragraph_spans(text: str) -> list[tuple[int, int]]:
    spans = []
    pos = 0
    for m in _PARAGRAPH_BREAK.finditer(text):
        spans.append(_strip_span(text, pos, m.start()))
        pos = m.end()
    spans.append(_strip_span(text, pos, len(text)))
    return [s for s in spans if s[1] > s[0]]


def sentence_spans(text: str, start: int = 0, end: int | None = None) -> list[tuple[int, int]]:
    """Spans of sentences inside ``text[start:end]``, whitespace-trimmed."""
    end = len(text) if end is None else end
    spans = []
    pos = start
    for m in _SENTENCE_END.finditer(text, start, end):
        spans.append(_strip_span(text, pos, m.end()))
        pos = m.end()
    spans.append(_strip_span(text, pos, end))
    return [s for s in spans if s[1] > s[0]]


def split_sentences(text: str) -> list[str]:
    return [text[a:b] for a, b in sentence_spans(text)]


def _units(text: str, limit: int) -> list[tuple[int, int]]:
    units = []
    for p0, p1 in _paragraph_spans(text):
        if p1 - p0 <= limit:
            units.append((p0, p1))
            continue
        for s0, s1 in sentence_spans(text, p0, p1):
            while s1 - s0 > limit:
                cut = s0 + limit
                units.append(_strip_span(text, s0, cut))
                s0, s1 = _strip_span(text, cut, s1)
            if s1 > s0:
                units.append((s0, s1))
    return [u for u in units if u[1] > u[0]]


def split_text(text: str, limit: int = DEFAULT_CHUNK_LIMIT) -> list[str]:
    """Greedily pack paragraphs (then sentences, then hard cuts) into pieces of at most ``limit`` chars.

    Each piece is a contiguous slice of ``text``, so joining the pieces
    reproduces the input apart from whitespace at piece boundaries.
    """
    if limit < MIN_CHUNK_LIMIT:
        raise InvalidLimit(f"chunk_limit must be >= {MIN_CHUNK_LIMIT}, got {limit}")
    pieces = []
    cur: tuple[int, int] | None = None
    for u0, u1 in _units(text, limit):
        if cur is not None and u1 - cur[0] <= limit:
            cur = (cur[0], u1)
            continue
        if cur is not None:
            pieces.append(text[cur[0]:cur[1]])
        cur = (u0, u1)
    if cur is not None:
        pieces.append(text[cur[0]:cur[1]])
    return pieces


def chunk_document(doc: Document, chunk_limit: int = DEFAULT_CHUNK_LIMIT) -> list[Chunk]:
    if chunk_limit < MIN_CHUNK_LIMIT:
        raise InvalidLimit(f"chunk_limit must be >= {MIN_CHUNK_LIMIT}, got {chunk_limit}")
    chunks: list[Chunk] = []
    for path, text in parse_markdown_sections(doc):
        for piece in split_text(text, chunk_limit):
            n = len(chunks)
            chunks.append(Chunk(id=f"{doc.id}#{n}", doc_id=doc.id, section_path=path, ordinal=n, text=piece))
    return chunks


def chunk_corpus(docs: list[Document], chunk_limit: int = DEFAULT_CHUNK_LIMIT) -> list[Chunk]:
    out: list[Chunk] = []
    for d in docs:
        out.extend(chunk_document(d, chunk_limit))
    return out
