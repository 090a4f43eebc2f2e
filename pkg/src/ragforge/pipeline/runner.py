from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from functools import partial
from typing import Iterator, Mapping, Optional

from ..corpus.types import Chunk, QAItem
from ..errors import InvalidParam, RagForgeError, StageError, TokenBudgetExceeded
from ..index import RankedList, VectorIndex
from ..providers import ChatRequest, ChatResponse, Embedding, Providers, TokenUsage, estimate_tokens
from . import stages
from .genome import Genome
from .prompts import load_prompt

STAGE_ORDER = (
    "transform", "retrieve", "rerank", "filter", "augment",
    "condense", "compose", "generate", "refine",
)


@dataclass
class PipelineConfig:
    k0: int = 20
    top_k: int = 5
    threshold: float = 0.3
    window: int = 1
    condense_budget: int = 4000
    n_rewrites: int = 3
    rrf_k: int = 60
    prompt_dir: Optional[str] = None

    def validate(self) -> "PipelineConfig":
        if self.k0 < 1 or self.top_k < 1:
            raise InvalidParam("retrieval.k0 and filter.top_k must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise InvalidParam("filter.threshold must lie in [0, 1]")
        if self.window < 1 or self.condense_budget < 1 or self.n_rewrites < 1 or self.rrf_k < 0:
            raise InvalidParam("window, condense_budget and n_rewrites must be positive; rrf_k >= 0")
        return self


@dataclass
class StageRecord:
    stage: str
    n_in: int = 0
    n_out: int = 0
    calls: int = 0
    usage: TokenUsage = field(default_factory=TokenUsage)
    warnings: list[str] = field(default_factory=list)
    elapsed: float = field(default=0.0, compare=False)


@dataclass
class StageTrace:
    stages: list[StageRecord] = field(default_factory=list)

    @property
    def usage(self) -> TokenUsage:
        total = TokenUsage()
        for s in self.stages:
            total = total + s.usage
        return total

    @property
    def warnings(self) -> list[str]:
        return [f"{s.stage}: {w}" for s in self.stages for w in s.warnings]

    @property
    def calls(self) -> int:
        return sum(s.calls for s in self.stages)


@dataclass
class PipelineOutput:
    answer: str
    retrieved: RankedList
    trace: StageTrace
    usage: TokenUsage
    queries: list[str] = field(default_factory=list)


class RunMeter:
    """Provider proxy for one run: attributes every call's token usage to the active stage."""

    def __init__(self, providers: Providers, token_ceiling: Optional[int] = None):
        self.providers = providers
        self.token_ceiling = token_ceiling if token_ceiling is not None else providers.token_ceiling
        self.trace = StageTrace()
        self._current: Optional[StageRecord] = None
        self._total = 0

    @property
    def dim(self) -> int:
        return self.providers.embedder.dim

    @contextmanager
    def stage(self, name: str) -> Iterator[StageRecord]:
        rec = StageRecord(name)
        self.trace.stages.append(rec)
        prev, self._current = self._current, rec
        t0 = time.perf_counter()
        try:
            yield rec
        finally:
            rec.elapsed = time.perf_counter() - t0
            self._current = prev

    def warn(self, message: str) -> None:
        if self._current is not None:
            self._current.warnings.append(message)

    def _charge(self, usage: TokenUsage) -> None:
        rec = self._current
        if rec is not None:
            rec.calls += 1
            rec.usage = rec.usage + usage
        self._total += usage.total
        if self.token_ceiling is not None and self._total > self.token_ceiling:
            raise TokenBudgetExceeded(f"run used {self._total} tokens, ceiling is {self.token_ceiling}")

    def embed(self, text: str) -> Embedding:
        out = self.providers.embedder.embed(text)
        self._charge(TokenUsage(estimate_tokens(text), 0))
        return out

    def chat(self, req: ChatRequest) -> ChatResponse:
        resp = self.providers.chat.chat(req)
        self._charge(resp.usage)
        return resp

    def score(self, query: str, passage: str) -> float:
        out = self.providers.reranker.score(query, passage)
        self._charge(TokenUsage(estimate_tokens(query) + estimate_tokens(passage), 0))
        return out


@dataclass
class PipelineContext:
    """Everything a run reads: the index, chunk texts and providers. Shared read-only across runs."""

    index: VectorIndex
    chunks: Mapping[str, Chunk]
    providers: Providers
    config: PipelineConfig = field(default_factory=PipelineConfig)

    def __post_init__(self):
        self.config.validate()
        self.texts = {cid: c.text for cid, c in self.chunks.items()}
        self.prompt = partial(load_prompt, override_dir=self.config.prompt_dir)


def question_similarity(
    question: str, queries: list[str], candidates: RankedList, index: VectorIndex, meter: RunMeter
) -> dict[str, float]:
    """Cosine of each candidate with the user question.

    Retrieval scores are reused when the question was the sole retrieval query;
    otherwise the question is embedded once more.
    """
    if queries == [question]:
        return dict(candidates.items)
    scores = index.scores(meter.embed(question))
    return {cid: float(scores[index.row(cid)]) for cid in candidates.ids}


def run_pipeline(genome: Genome, item: QAItem | str, ctx: PipelineContext) -> PipelineOutput:
    """Execute ``genome`` on one question.

    Stages run in fixed order; a stage that raises a library error aborts the
    run with a ``StageError`` naming the stage. Recoverable provider failures in
    rerank and refine degrade to the identity and leave a trace warning.
    """
    question = item.question if isinstance(item, QAItem) else item
    query_id = item.id if isinstance(item, QAItem) else ""
    cfg = ctx.config
    meter = RunMeter(ctx.providers)
    current = "transform"

    try:
        with meter.stage("transform") as rec:
            queries = stages.transform_query(genome.query_transform, question, meter, cfg.n_rewrites, ctx.prompt)
            rec.n_in, rec.n_out = 1, len(queries)

        current = "retrieve"
        with meter.stage("retrieve") as rec:
            candidates = stages.retrieve_merged(queries, ctx.index, meter, cfg.k0, cfg.rrf_k)
            candidates = RankedList(candidates.items, query_id)
            rec.n_in, rec.n_out = len(queries), len(candidates)

        current = "rerank"
        with meter.stage("rerank") as rec:
            reranked = stages.rerank(
                genome.rerank, question, candidates, ctx.texts, meter, meter, meter.warn, ctx.prompt
            )
            rec.n_in, rec.n_out = len(candidates), len(reranked)

        current = "filter"
        with meter.stage("filter") as rec:
            similarity = None
            if genome.filter == "similarity_threshold":
                similarity = question_similarity(question, queries, candidates, ctx.index, meter)
            kept = stages.filter_candidates(genome.filter, reranked, cfg.top_k, cfg.threshold, similarity)
            rec.n_in, rec.n_out = len(reranked), len(kept)

        current = "augment"
        with meter.stage("augment") as rec:
            evidence = stages.augment(genome.augment, kept, ctx.texts, ctx.index, question, meter, cfg.window)
            rec.n_in, rec.n_out = len(kept), len(evidence)

        current = "condense"
        with meter.stage("condense") as rec:
            texts = stages.condense(genome.condense, [e.text for e in evidence], meter, cfg.condense_budget, ctx.prompt)
            rec.n_in, rec.n_out = len(evidence), len(texts)

        current = "compose"
        with meter.stage("compose") as rec:
            request = stages.compose(genome.compose, texts, question, ctx.prompt)
            ordered = stages.compose_order(genome.compose, texts)
            rec.n_in, rec.n_out = len(texts), len(ordered)

        current = "generate"
        with meter.stage("generate") as rec:
            answer, _ = stages.generate(request, meter)
            rec.n_in, rec.n_out = 1, 1

        current = "refine"
        with meter.stage("refine") as rec:
            answer = stages.refine(genome.refine, answer, ordered, question, meter, meter.warn, ctx.prompt)
            rec.n_in, rec.n_out = 1, 1
    except RagForgeError as exc:
        raise StageError(current, exc) from exc

    return PipelineOutput(answer, kept, meter.trace, meter.trace.usage, queries)
