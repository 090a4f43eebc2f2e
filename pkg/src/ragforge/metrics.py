"""Retrieval and generation metrics and their aggregates.

Retrieval metrics use binary relevance against the gold chunk ids. The four
per-query retrieval metrics are averaged with equal weight into the retrieval
score; semantic similarity and the judge score are averaged into the generation
score; the overall score is the mean of the two.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass
from typing import Collection, Iterable, Sequence

from .errors import EmptyGold, EmptyInput, JudgeParseError
from .index import RankedList
from .providers import ChatModel, Embedder, TokenUsage

RETRIEVAL_ALPHA = 0.25
GENERATION_ALPHA = 0.5
FITNESS_ALPHA = 0.5

_NUMBER = re.compile(r"[-+]?(?:\d+\.\d*|\.\d+|\d+)")


def _ids(ranked: RankedList | Sequence[str]) -> list[str]:
    return ranked.ids if isinstance(ranked, RankedList) else list(ranked)


def _gold(gold: Collection[str]) -> set[str]:
    g = set(gold)
    if not g:
        raise EmptyGold("gold set is empty")
    return g


def recall_at_k(ranked: RankedList | Sequence[str], gold: Collection[str], k: int = 5) -> float:
    g = _gold(gold)
    return len(g.intersection(_ids(ranked)[:k])) / len(g)


def average_precision(ranked: RankedList | Sequence[str], gold: Collection[str], k: int | None = None) -> float:
    """Mean of precision@rank over gold items; gold items never retrieved count as zero.

    ``k`` restricts the list to its first ``k`` entries (AP@k); the default is the
    whole list.
    """
    g = _gold(gold)
    ids = _ids(ranked)
    if k is not None:
        ids = ids[:k]
    hits, total = 0, 0.0
    for rank, cid in enumerate(ids, start=1):
        if cid in g:
            hits += 1
            total += hits / rank
    return total / len(g)


def ndcg_at_k(ranked: RankedList | Sequence[str], gold: Collection[str], k: int = 5) -> float:
    g = _gold(gold)
    dcg = sum(1.0 / math.log2(rank + 1) for rank, cid in enumerate(_ids(ranked)[:k], start=1) if cid in g)
    ideal = sum(1.0 / math.log2(rank + 1) for rank in range(1, min(len(g), k) + 1))
    return dcg / ideal


def mrr(ranked: RankedList | Sequence[str], gold: Collection[str]) -> float:
    g = _gold(gold)
    for rank, cid in enumerate(_ids(ranked), start=1):
        if cid in g:
            return 1.0 / rank
    return 0.0


def retrieval_score(recall: float, ap: float, ndcg: float, rr: float) -> float:
    return RETRIEVAL_ALPHA * (recall + ap + ndcg + rr)


def generation_score(sim: float, judge: float, alpha: float = GENERATION_ALPHA) -> float:
    return alpha * sim + (1 - alpha) * judge


def overall_score(retrieval: float, generation: float, alpha: float = FITNESS_ALPHA) -> float:
    return alpha * retrieval + (1 - alpha) * generation


def semantic_similarity(answer: str, reference: str, embedder: Embedder) -> float:
    """Cosine similarity of the two embeddings mapped from [-1, 1] onto [0, 1]."""
    if not answer.strip() or not reference.strip():
        raise EmptyInput("semantic similarity needs two non-empty texts")
    cos = embedder.embed(answer).cosine(embedder.embed(reference))
    return min(1.0, max(0.0, (1.0 + cos) / 2.0))


def parse_judge_score(text: str, scale: float = 1.0) -> float:
    m = re.search(r"SCORE\s*[:=]\s*(" + _NUMBER.pattern + ")", text, re.IGNORECASE) or _NUMBER.search(text)
    if not m:
        raise JudgeParseError(f"judge reply has no score: {text[:80]!r}")
    return min(1.0, max(0.0, float(m.group(1) if m.lastindex else m.group(0)) / scale))


def judge_score(question: str, answer: str, reference: str, chat: ChatModel, scale: float = 1.0, prompt=None) -> float:
    from .pipeline.prompts import load_prompt

    if not (question.strip() and answer.strip() and reference.strip()):
        raise EmptyInput("judge needs a question, an answer and a reference")
    template = (prompt or load_prompt)("judge")
    reply = chat.chat(template.render(query=question, answer=answer, reference=reference)).text
    return parse_judge_score(reply, scale)


@dataclass(frozen=True)
class RetrievalEval:
    recall_at_5: float
    average_precision: float
    ndcg_at_5: float
    mrr: float

    @property
    def aggregate(self) -> float:
        return retrieval_score(self.recall_at_5, self.average_precision, self.ndcg_at_5, self.mrr)

    @classmethod
    def of(cls, ranked: RankedList | Sequence[str], gold: Collection[str], k: int = 5, ap_at_k: bool = False):
        return cls(
            recall_at_k(ranked, gold, k),
            average_precision(ranked, gold, k if ap_at_k else None),
            ndcg_at_k(ranked, gold, k),
            mrr(ranked, gold),
        )


@dataclass(frozen=True)
class GenerationEval:
    sim: float
    judge: float

    @property
    def aggregate(self) -> float:
        return generation_score(self.sim, self.judge)


@dataclass(frozen=True)
class EvalRecord:
    qa_id: str
    genome: str
    retrieval: RetrievalEval
    generation: GenerationEval
    usage: TokenUsage

    def to_record(self) -> dict:
        r, g = self.retrieval, self.generation
        return {
            "qa_id": self.qa_id,
            "genome": self.genome,
            "recall5": r.recall_at_5,
            "ap": r.average_precision,
            "ndcg5": r.ndcg_at_5,
            "mrr": r.mrr,
            "retrieval": r.aggregate,
            "sim": g.sim,
            "judge": g.judge,
            "generation": g.aggregate,
            "tokens": self.usage.total,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), ensure_ascii=False)

    @classmethod
    def from_record(cls, rec: dict) -> "EvalRecord":
        return cls(
            rec["qa_id"],
            rec["genome"],
            RetrievalEval(rec["recall5"], rec["ap"], rec["ndcg5"], rec["mrr"]),
            GenerationEval(rec["sim"], rec["judge"]),
            TokenUsage(int(rec["tokens"]), 0),
        )


def dump_eval_records(records: Iterable[EvalRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


def mean(values: Iterable[float]) -> float:
    vals = list(values)
    return sum(vals) / len(vals) if vals else 0.0


__all__ = [
    "EvalRecord",
    "GenerationEval",
    "RetrievalEval",
    "asdict",
    "average_precision",
    "dump_eval_records",
    "generation_score",
    "judge_score",
    "mean",
    "mrr",
    "ndcg_at_k",
    "overall_score",
    "parse_judge_score",
    "recall_at_k",
    "retrieval_score",
    "semantic_similarity",
]
