"""ragforge: modular RAG pipelines with budgeted genetic configuration search."""

__version__ = "0.1.0"
