from .io import (
    dump_chunks,
    dump_corpus,
    dump_qa,
    load_chunks,
    load_corpus,
    load_corpus_dir,
    load_qa_dataset,
)
from .markdown import (
    DEFAULT_CHUNK_LIMIT,
    MIN_CHUNK_LIMIT,
    chunk_corpus,
    chunk_document,
    parse_markdown_sections,
    split_sentences,
    split_text,
)
from .synthetic import generate_synthetic_corpus
from .types import Chunk, CorpusStats, Document, QAItem, corpus_stats

__all__ = [
    "Chunk",
    "CorpusStats",
    "DEFAULT_CHUNK_LIMIT",
    "Document",
    "MIN_CHUNK_LIMIT",
    "QAItem",
    "chunk_corpus",
    "chunk_document",
    "corpus_stats",
    "dump_chunks",
    "dump_corpus",
    "dump_qa",
    "generate_synthetic_corpus",
    "load_chunks",
    "load_corpus",
    "load_corpus_dir",
    "load_qa_dataset",
    "parse_markdown_sections",
    "split_sentences",
    "split_text",
]
