"""One function per pipeline stage.

Provider-facing arguments only need the relevant method (``chat``, ``embed``
or ``score``), so either a raw provider or a run meter can be passed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, TypeVar

from ..corpus.markdown import split_sentences
from ..errors import InvalidParam, ProviderError, ProviderUnavailable, TokenBudgetExceeded
from ..index import RankedList, VectorIndex
from ..providers import ChatModel, Embedder, Reranker
from .prompts import PromptTemplate, load_prompt

T = TypeVar("T")
Warn = Callable[[str], None]

_LIST_MARKER = re.compile(r"^\s*(?:[-*•]|\d+[.)]|\[\d+\])\s*")
_SCORE_LINE = re.compile(r"^\s*\[?(\d+)\]?\s*[:=\-]\s*([-+]?\d*\.?\d+)")


def _noop(_: str) -> None:
    pass


def _recoverable(exc: BaseException) -> bool:
    return isinstance(exc, ProviderError) and not isinstance(exc, TokenBudgetExceeded)


def _lines(text: str) -> list[str]:
    out = []
    for line in text.splitlines():
        line = _LIST_MARKER.sub("", line).strip()
        if line:
            out.append(line)
    return out


def _dedupe(items: Sequence[str]) -> list[str]:
    seen: set[str] = set()
    out = []
    for q in items:
        key = " ".join(q.split())
        if key and key not in seen:
            seen.add(key)
            out.append(q)
    return out


# -- query transformation ----------------------------------------------------


def transform_query(
    gene: str,
    query: str,
    chat: ChatModel,
    n_rewrites: int = 3,
    prompt: Callable[[str], PromptTemplate] = load_prompt,
) -> list[str]:
    """Map the user question to the list of retrieval queries for ``gene``."""
    if not query.strip():
        raise InvalidParam("query must be non-empty")
    if gene == "none":
        return [query]
    name = {
        "multi_query": "multi_query",
        "decomposition": "decomposition",
        "step_back": "step_back",
        "hyde": "hyde",
        "clarification": "clarification",
    }[gene]
    text = chat.chat(prompt(name).render(query=query, n=n_rewrites)).text
    lines = _lines(text)
    if gene == "multi_query":
        out = [query, *lines[:n_rewrites]]
    elif gene == "decomposition":
        out = [*lines, query]
    elif gene == "step_back":
        out = [*lines[:1], query]
    elif gene == "hyde":
        out = [text.strip()] if text.strip() else []
    else:
        out = lines[:1]
    return _dedupe(out) or [query]


# -- retrieval -----------------------------------------------------------------


def fuse_rankings(lists: Sequence[RankedList], rrf_k: int = 60) -> RankedList:
    """Reciprocal-rank fusion, rescaled so an item ranked first everywhere scores 1.0."""
    if not lists:
        return RankedList(())
    scores: dict[str, float] = {}
    for lst in lists:
        for rank, cid in enumerate(lst.ids, start=1):
            scores[cid] = scores.get(cid, 0.0) + 1.0 / (rrf_k + rank)
    ceiling = len(lists) / (rrf_k + 1)
    return RankedList.ranked(((cid, s / ceiling) for cid, s in scores.items()), lists[0].query_id)


def retrieve_merged(
    queries: Sequence[str],
    index: VectorIndex,
    embedder: Embedder,
    k0: int = 20,
    rrf_k: int = 60,
) -> RankedList:
    queries = _dedupe(queries)
    if not queries:
        raise InvalidParam("at least one retrieval query is required")
    lists = [index.search(embedder.embed(q), k0) for q in queries]
    if len(lists) == 1:
        return lists[0]
    return fuse_rankings(lists, rrf_k)


# -- rerank ----------------------------------------------------------------------


def _parse_llm_ranking(text: str, n: int) -> list[tuple[int, float]]:
    out: list[tuple[int, float]] = []
    seen: set[int] = set()
    for line in text.splitlines():
        m = _SCORE_LINE.match(line)
        if not m:
            continue
        i = int(m.group(1))
        if 1 <= i <= n and i not in seen:
            seen.add(i)
            out.append((i, min(1.0, max(0.0, float(m.group(2))))))
    return out


def rerank(
    gene: str,
    query: str,
    candidates: RankedList,
    texts: Mapping[str, str],
    reranker: Reranker | None = None,
    chat: ChatModel | None = None,
    warn: Warn = _noop,
    prompt: Callable[[str], PromptTemplate] = load_prompt,
) -> RankedList:
    """Reorder candidates; on provider failure the input comes back unchanged."""
    if gene == "none" or not candidates.items:
        return candidates
    try:
        if gene == "cross_encoder":
            assert reranker is not None
            scored = [(cid, reranker.score(query, texts[cid])) for cid in candidates.ids]
            order = sorted(range(len(scored)), key=lambda i: (-scored[i][1], i))
            return RankedList(tuple(scored[i] for i in order), candidates.query_id)
        if gene == "llm":
            assert chat is not None
            ids = candidates.ids
            passages = "\n".join(f"[{i}] {texts[cid]}" for i, cid in enumerate(ids, start=1))
            reply = chat.chat(prompt("llm_rerank").render(query=query, passages=passages)).text
            ranking = _parse_llm_ranking(reply, len(ids))
            if not ranking:
                raise ProviderUnavailable("LLM reranker reply had no parseable scores")
            ranking.sort(key=lambda t: -t[1])  # stable: keeps the reply order on ties
            placed = {i for i, _ in ranking}
            items = [(ids[i - 1], s) for i, s in ranking]
            items += [(ids[i - 1], 0.0) for i in range(1, len(ids) + 1) if i not in placed]
            return RankedList(tuple(items), candidates.query_id)
    except Exception as exc:
        if not _recoverable(exc):
            raise
        warn(f"rerank[{gene}] failed, keeping retrieval order: {exc}")
        return candidates
    raise InvalidParam(f"unknown rerank gene {gene!r}")


# -- filter ------------------------------------------------------------------------


def filter_candidates(
    gene: str,
    ranked: RankedList,
    k: int = 5,
    threshold: float = 0.3,
    similarity: Optional[Mapping[str, float]] = None,
) -> RankedList:
    """Cut the candidate list.

    ``similarity`` maps chunk id to its cosine similarity with the user question;
    the threshold is applied to it when given, otherwise to the list's own scores.
    Reranker scores live on a different scale, so the runner always passes it.
    """
    if k < 1:
        raise InvalidParam(f"top-k K must be >= 1, got {k}")
    if not 0.0 <= threshold <= 1.0:
        raise InvalidParam(f"similarity threshold must lie in [0, 1], got {threshold}")
    if gene == "top_k":
        return RankedList(ranked.items[:k], ranked.query_id)
    if gene == "similarity_threshold":
        sim = similarity if similarity is not None else dict(ranked.items)
        kept = tuple(it for it in ranked.items if sim[it[0]] >= threshold)
        # never leave the generator without evidence
        if not kept and ranked.items:
            kept = ranked.items[:1]
        return RankedList(kept, ranked.query_id)
    raise InvalidParam(f"unknown filter gene {gene!r}")


# -- augmentation ------------------------------------------------------------------


@dataclass(frozen=True)
class Evidence:
    chunk_ids: tuple[str, ...]
    text: str


def _neighbour_ids(index: VectorIndex, cid: str, window: int, direction: int) -> list[str]:
    out = []
    cur: Optional[str] = cid
    for _ in range(window):
        cur = index.neighbours(cur)[0 if direction < 0 else 1]
        if cur is None:
            break
        out.append(cur)
    return out[::-1] if direction < 0 else out


def augment(
    gene: str,
    ranked: RankedList,
    texts: Mapping[str, str],
    index: VectorIndex,
    query: str,
    reranker: Reranker | None = None,
    window: int = 1,
) -> list[Evidence]:
    if gene == "none":
        return [Evidence((cid,), texts[cid]) for cid in ranked.ids]
    if gene == "adjacent":
        used = set(ranked.ids)
        out = []
        for cid in ranked.ids:
            before = [n for n in _neighbour_ids(index, cid, window, -1) if n not in used and n in texts]
            used.update(before)
            after = [n for n in _neighbour_ids(index, cid, window, +1) if n not in used and n in texts]
            used.update(after)
            ids = (*before, cid, *after)
            out.append(Evidence(ids, "\n".join(texts[i] for i in ids)))
        return out
    if gene == "relevant_segment":
        assert reranker is not None
        out = []
        for cid in ranked.ids:
            sents = split_sentences(texts[cid])
            if len(sents) <= 1:
                out.append(Evidence((cid,), texts[cid]))
                continue
            scores = [reranker.score(query, s) for s in sents]
            mean = sum(scores) / len(scores)
            kept = [s for s, sc in zip(sents, scores) if sc > mean] or sents
            out.append(Evidence((cid,), " ".join(kept)))
        return out
    raise InvalidParam(f"unknown augment gene {gene!r}")


# -- condensation ------------------------------------------------------------------


def _summarize(chat: ChatModel, texts: Sequence[str], prompt: Callable[[str], PromptTemplate]) -> str:
    passages = "\n".join(f"[{i}] {t}" for i, t in enumerate(texts, start=1))
    out = chat.chat(prompt("summarize").render(passages=passages)).text.strip()
    return out or "\n".join(texts)


def condense(
    gene: str,
    texts: Sequence[str],
    chat: ChatModel,
    budget_chars: int = 4000,
    prompt: Callable[[str], PromptTemplate] = load_prompt,
) -> list[str]:
    texts = list(texts)
    if not texts:
        raise InvalidParam("condense needs at least one text")
    if gene == "none":
        return texts
    if gene == "llm_summarize":
        if sum(len(t) for t in texts) <= budget_chars:
            return texts
        return [_summarize(chat, texts, prompt)]
    if gene == "tree_summarize":
        level = texts
        while len(level) > 1:
            nxt = [_summarize(chat, level[i:i + 2], prompt) for i in range(0, len(level) - 1, 2)]
            if len(level) % 2:
                nxt.append(level[-1])
            level = nxt
        return level
    raise InvalidParam(f"unknown condense gene {gene!r}")


# -- composition / generation / refinement ----------------------------------------------


def long_context_order(items: Sequence[T]) -> list[T]:
    """Odd ranks to the front in order, even ranks to the back reversed."""
    return list(items[0::2]) + list(items[1::2])[::-1]


def compose_order(gene: str, items: Sequence[T]) -> list[T]:
    if gene == "naive_concat":
        return list(items)
    if gene == "long_context_reorder":
        return long_context_order(items)
    raise InvalidParam(f"unknown compose gene {gene!r}")


def format_evidence(texts: Sequence[str]) -> str:
    return "\n\n".join(f"[{i}] {t}" for i, t in enumerate(texts, start=1))


def compose(
    gene: str,
    texts: Sequence[str],
    question: str,
    prompt: Callable[[str], PromptTemplate] = load_prompt,
):
    if not texts:
        raise InvalidParam("compose needs at least one evidence text")
    ordered = compose_order(gene, texts)
    return prompt("answer").render(evidence=format_evidence(ordered), query=question)


def generate(request, chat: ChatModel):
    resp = chat.chat(request)
    if not resp.text.strip():
        raise ProviderUnavailable("generator returned an empty answer")
    return resp.text.strip(), resp.usage


def refine(
    gene: str,
    answer: str,
    evidence: Sequence[str],
    question: str,
    chat: ChatModel,
    warn: Warn = _noop,
    prompt: Callable[[str], PromptTemplate] = load_prompt,
) -> str:
    if gene == "none":
        return answer
    if gene != "reflection_revise":
        raise InvalidParam(f"unknown refine gene {gene!r}")
    try:
        critique = chat.chat(
            prompt("reflect").render(query=question, answer=answer, evidence=format_evidence(evidence))
        ).text.strip()
        if critique.upper().rstrip(".") == "OK" or not critique:
            return answer
        revised = chat.chat(prompt("revise").render(answer=answer, critique=critique)).text.strip()
        return revised or answer
    except Exception as exc:
        if not _recoverable(exc):
            raise
        warn(f"refine failed, keeping the draft answer: {exc}")
        return answer


__all__ = [
    "Evidence",
    "augment",
    "compose",
    "compose_order",
    "condense",
    "filter_candidates",
    "format_evidence",
    "fuse_rankings",
    "generate",
    "long_context_order",
    "refine",
    "rerank",
    "retrieve_merged",
    "transform_query",
]
