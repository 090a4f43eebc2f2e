from __future__ import annotations

import pytest

from ragforge.corpus import chunk_corpus, generate_synthetic_corpus
from ragforge.index import build_index
from ragforge.pipeline import PipelineContext
from ragforge.providers import mock_providers


@pytest.fixture(scope="session")
def seed1_corpus():
    docs, qa = generate_synthetic_corpus(1, 20, 2)
    return docs, chunk_corpus(docs), qa


@pytest.fixture(scope="session")
def providers():
    return mock_providers()


@pytest.fixture(scope="session")
def seed1_index(seed1_corpus, providers):
    _, chunks, _ = seed1_corpus
    return build_index(chunks, providers.embedder)


@pytest.fixture(scope="session")
def ctx(seed1_corpus, seed1_index, providers):
    _, chunks, _ = seed1_corpus
    return PipelineContext(seed1_index, {c.id: c for c in chunks}, providers)


class CountingChat:
    """Wraps a chat model and counts calls."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0
        self.tags: list[str] = []

    def chat(self, req):
        self.calls += 1
        self.tags.append(req.system.split("]", 1)[0].lstrip("["))
        return self.inner.chat(req)


class FailingChat:
    def __init__(self, exc):
        self.exc = exc

    def chat(self, req):
        raise self.exc


def gene_match_landscape(target, calls=None):
    """Separable fitness: fraction of genes equal to ``target``. Appends to ``calls`` when given."""
    from ragforge.optimizer import FitnessReport

    def fn(genome, sample):
        if calls is not None:
            calls.append(genome)
        match = sum(a == b for a, b in zip(genome.genes(), target.genes())) / 7
        tokens = 100 * sum(g != "none" for g in genome.genes())
        return FitnessReport.of(genome, match, match, total_tokens=tokens, n_queries=len(sample))

    return fn


# -- acceptance summary: one PASS/FAIL line per criterion -------------------------

_ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not (report.when == "setup" and report.failed):
        return
    number, title = marker.args
    _ACCEPTANCE[number] = ("PASS" if report.passed else "FAIL", title)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        verdict, title = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {verdict}  {title}")
