"""Model-provider interfaces: embedder, chat generator, pair reranker.

Two families ship here. The mocks are deterministic offline stand-ins used
by the test suite and by ``--mock`` runs. The HTTP providers speak the common
JSON chat-completions / embeddings wire format.

Mock chat dispatches on a ``[TAG]`` prefix in the system message; the user
message carries ``<<SECTION>>``-delimited fields (see ``prompts/``).
"""

from __future__ import annotations

import hashlib
import math
import os
import re
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import EmptyInput, ProviderUnavailable

_WORD = re.compile(r"\w+", re.UNICODE)
_TAG = re.compile(r"^\s*\[([A-Z_]+)\]")
_SECTION = re.compile(r"^<<([A-Z_]+)>>[ \t]*$", re.MULTILINE)
_NUMBERED = re.compile(r"^\[(\d+)\][ \t]?", re.MULTILINE)


def tokenize(text: str) -> list[str]:
    return _WORD.findall(text.casefold())


def estimate_tokens(text: str) -> int:
    """Character-based token estimate used whenever a provider reports no usage."""
    return math.ceil(len(text) / 4)


def token_f1(candidate: str, reference: str) -> float:
    """Bag-of-tokens F1 between two strings, in [0, 1]."""
    c, r = Counter(tokenize(candidate)), Counter(tokenize(reference))
    common = sum((c & r).values())
    if common == 0:
        return 0.0
    precision = common / sum(c.values())
    recall = common / sum(r.values())
    return min(1.0, max(0.0, 2 * precision * recall / (precision + recall)))


@dataclass(frozen=True)
class TokenUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")

    @property
    def total(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(self.prompt_tokens + other.prompt_tokens, self.completion_tokens + other.completion_tokens)


@dataclass(frozen=True)
class Message:
    role: str
    content: str


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[Message, ...]

    @classmethod
    def of(cls, system: str, user: str) -> "ChatRequest":
        return cls((Message("system", system), Message("user", user)))

    @property
    def system(self) -> str:
        return "\n".join(m.content for m in self.messages if m.role == "system")

    @property
    def user(self) -> str:
        return "\n".join(m.content for m in self.messages if m.role == "user")

    @property
    def chars(self) -> int:
        return sum(len(m.content) for m in self.messages)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    usage: TokenUsage


@dataclass(frozen=True, eq=False)
class Embedding:
    values: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def cosine(self, other: "Embedding") -> float:
        a = self.values.astype(np.float64)
        b = other.values.astype(np.float64)
        denom = float(np.linalg.norm(a) * np.linalg.norm(b))
        return float(a @ b) / denom if denom else 0.0

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Embedding) and np.array_equal(self.values, other.values)


def unit(vec: np.ndarray) -> Embedding:
    vec = np.asarray(vec, dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        vec = np.zeros_like(vec)
        vec[0] = 1.0
        norm = 1.0
    return Embedding((vec / norm).astype(np.float32))


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> Embedding: ...


class ChatModel(Protocol):
    def chat(self, req: ChatRequest) -> ChatResponse: ...


class Reranker(Protocol):
    def score(self, query: str, passage: str) -> float: ...


# -- mocks -----------------------------------------------------------------------


class MockEmbedder:
    """Signed feature hashing of character 3-grams into a small dense vector."""

    def __init__(self, seed: int = 0, dim: int = 64):
        self.seed = seed
        self.dim = dim
        self._cache: dict[str, tuple[int, float]] = {}

    def _slot(self, gram: str) -> tuple[int, float]:
        hit = self._cache.get(gram)
        if hit is None:
            h = hashlib.blake2b(f"{self.seed}\x1f{gram}".encode(), digest_size=8).digest()
            n = int.from_bytes(h, "little")
            hit = (n % self.dim, 1.0 if (n >> 63) & 1 else -1.0)
            self._cache[gram] = hit
        return hit

    def embed(self, text: str) -> Embedding:
        if not text or not text.strip():
            raise EmptyInput("cannot embed empty text")
        padded = " " + " ".join(tokenize(text)) + " "
        vec = np.zeros(self.dim, dtype=np.float64)
        for i in range(len(padded) - 2):
            slot, sign = self._slot(padded[i:i + 3])
            vec[slot] += sign
        return unit(vec)


class OverlapReranker:
    """Query-token overlap with add-one smoothing: (|q & p| + 1) / (|q| + 2)."""

    def score(self, query: str, passage: str) -> float:
        q = set(tokenize(query))
        if not q:
            raise EmptyInput("query has no tokens")
        if not passage.strip():
            raise EmptyInput("passage is empty")
        p = set(tokenize(passage))
        return (len(q & p) + 1) / (len(q) + 2)


def parse_sections(text: str) -> dict[str, str]:
    """Split a ``<<NAME>>``-delimited prompt body into a name -> content map."""
    out: dict[str, str] = {}
    marks = list(_SECTION.finditer(text))
    for i, m in enumerate(marks):
        end = marks[i + 1].start() if i + 1 < len(marks) else len(text)
        out[m.group(1)] = text[m.end():end].strip()
    return out


def parse_numbered(text: str) -> list[tuple[int, str]]:
    marks = list(_NUMBERED.finditer(text))
    out = []
    for i, m in enumerate(marks):
        end = marks[i + 1].start() if i + 1 < len(marks) else len(text)
        out.append((int(m.group(1)), text[m.end():end].strip()))
    return out


def _sentences(text: str) -> list[str]:
    from .corpus.markdown import split_sentences

    return split_sentences(text)


def _best_sentence(question: str, evidence: str) -> str | None:
    q = set(tokenize(question))
    blocks = [b for _, b in parse_numbered(evidence)] or [evidence]
    best, best_score = None, -1
    for block in blocks:
        for sent in _sentences(block):
            s = len(q & set(tokenize(sent)))
            if s > best_score:
                best, best_score = sent, s
    return best


_QUESTION_FRAME = re.compile(
    r"^(?:what|who|which|where|when|why|how)(?:\s+(?:is|are|was|were|does|do|did|would you describe))?\s+",
    re.IGNORECASE,
)


class MockChat:
    """Template-driven chat stand-in; every reply is a pure function of the request."""

    MULTI_QUERY_PREFIXES = ("In other words:", "Key facts about:", "Background on:")

    def __init__(self, seed: int = 0):
        self.seed = seed

    def chat(self, req: ChatRequest) -> ChatResponse:
        if not req.messages:
            raise EmptyInput("chat request has no messages")
        m = _TAG.match(req.system)
        tag = m.group(1) if m else "ANSWER"
        user = req.user
        handler = getattr(self, f"_do_{tag.lower()}", None)
        text = handler(user) if handler else user.strip()[:200]
        if not text.strip():
            text = "NONE"
        return ChatResponse(text, TokenUsage(math.ceil(req.chars / 4), max(1, estimate_tokens(text))))

    # one handler per tag -------------------------------------------------------

    def _do_hyde(self, user: str) -> str:
        return f"HYDE-DOC: {user.strip()}"

    def _do_multiq(self, user: str) -> str:
        q = user.strip()
        return "\n".join(f"{p} {q}" for p in self.MULTI_QUERY_PREFIXES)

    def _do_decomp(self, user: str) -> str:
        q = user.strip().rstrip("?").strip()
        parts = [p.strip(" ,") for p in re.split(r"\s+(?:and|ve)\s+|;\s*", q) if p.strip(" ,")]
        return "\n".join(f"{p}?" for p in parts) if parts else q

    def _do_stepback(self, user: str) -> str:
        return f"What general background explains: {user.strip()}"

    def _do_clarify(self, user: str) -> str:
        q = " ".join(user.split())
        core = _QUESTION_FRAME.sub("", q).rstrip("?").strip()
        return f"{q} {core}" if core and core != q else q

    def _do_summarize(self, user: str) -> str:
        body = parse_sections(user).get("PASSAGES", user)
        texts = [t for _, t in parse_numbered(body)] or [body]
        seen, kept = set(), []
        for t in texts:
            for s in _sentences(t):
                key = " ".join(tokenize(s))
                if key and key not in seen:
                    seen.add(key)
                    kept.append(s)
        return " ".join(kept)

    def _do_judge(self, user: str) -> str:
        sec = parse_sections(user)
        return f"SCORE: {token_f1(sec.get('ANSWER', ''), sec.get('REFERENCE', '')):.6f}"

    def _do_rerank(self, user: str) -> str:
        sec = parse_sections(user)
        question = sec.get("QUESTION", "")
        scored = [(i, token_f1(question, p)) for i, p in parse_numbered(sec.get("PASSAGES", ""))]
        scored.sort(key=lambda t: (-t[1], t[0]))
        return "\n".join(f"{i}: {s:.6f}" for i, s in scored)

    def _do_answer(self, user: str) -> str:
        sec = parse_sections(user)
        best = _best_sentence(sec.get("QUESTION", ""), sec.get("EVIDENCE", ""))
        return best or "I could not find the answer in the evidence."

    def _do_reflect(self, user: str) -> str:
        sec = parse_sections(user)
        evidence = sec.get("EVIDENCE", "")
        if set(tokenize(sec.get("ANSWER", ""))) <= set(tokenize(evidence)):
            return "OK"
        best = _best_sentence(sec.get("QUESTION", ""), evidence)
        return f"MISSING: {best}" if best else "OK"

    def _do_revise(self, user: str) -> str:
        sec = parse_sections(user)
        missing = sec.get("CRITIQUE", "")
        if missing.upper().startswith("MISSING:"):
            missing = missing[len("MISSING:"):]
        return f"{sec.get('ANSWER', '').strip()} {missing.strip()}".strip()


# -- HTTP --------------------------------------------------------------------------


@dataclass
class HttpSettings:
    chat_url: str | None = None
    embed_url: str | None = None
    api_key: str | None = None
    chat_model: str = "gpt-oss:120b"
    embed_model: str = "embeddinggemma"
    timeout: float = 60.0
    retries: int = 2

    @classmethod
    def from_env(cls, **overrides) -> "HttpSettings":
        s = cls(
            chat_url=os.environ.get("RAGFORGE_CHAT_URL"),
            embed_url=os.environ.get("RAGFORGE_EMBED_URL"),
            api_key=os.environ.get("RAGFORGE_API_KEY"),
        )
        for k, v in overrides.items():
            if v is not None:
                setattr(s, k, v)
        return s


class _HttpBase:
    def __init__(self, settings: HttpSettings):
        import httpx

        self.settings = settings
        headers = {"Content-Type": "application/json"}
        if settings.api_key:
            headers["Authorization"] = f"Bearer {settings.api_key}"
        # httpx.Client pools connections and is safe to share between threads
        self._client = httpx.Client(timeout=settings.timeout, headers=headers)

    def _post(self, url: str | None, payload: dict) -> dict:
        import httpx

        if not url:
            raise ProviderUnavailable("endpoint URL not configured")
        last: Exception | None = None
        for attempt in range(self.settings.retries + 1):
            try:
                r = self._client.post(url, json=payload)
                r.raise_for_status()
                return r.json()
            except (httpx.HTTPError, ValueError) as exc:
                last = exc
                if attempt < self.settings.retries:
                    time.sleep(min(2.0, 0.25 * 2**attempt))
        raise ProviderUnavailable(f"{url}: {last}")


class HttpChat(_HttpBase):
    def chat(self, req: ChatRequest) -> ChatResponse:
        if not req.messages:
            raise EmptyInput("chat request has no messages")
        payload = {
            "model": self.settings.chat_model,
            "messages": [{"role": m.role, "content": m.content} for m in req.messages],
            "temperature": 0,
        }
        data = self._post(self.settings.chat_url, payload)
        try:
            text = data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError):
            raise ProviderUnavailable("malformed chat response") from None
        usage = data.get("usage") or {}
        prompt = usage.get("prompt_tokens")
        completion = usage.get("completion_tokens")
        return ChatResponse(
            text,
            TokenUsage(
                int(prompt) if prompt is not None else math.ceil(req.chars / 4),
                int(completion) if completion is not None else estimate_tokens(text),
            ),
        )


class HttpEmbedder(_HttpBase):
    def __init__(self, settings: HttpSettings, dim: int | None = None):
        super().__init__(settings)
        self.dim = dim or 0
        self._lock = threading.Lock()

    def embed(self, text: str) -> Embedding:
        if not text or not text.strip():
            raise EmptyInput("cannot embed empty text")
        data = self._post(self.settings.embed_url, {"model": self.settings.embed_model, "input": text})
        try:
            vec = np.asarray(data["data"][0]["embedding"], dtype=np.float64)
        except (KeyError, IndexError, TypeError):
            raise ProviderUnavailable("malformed embedding response") from None
        with self._lock:
            if not self.dim:
                self.dim = int(vec.shape[0])
        if vec.shape[0] != self.dim:
            raise ProviderUnavailable(f"embedding endpoint returned dim {vec.shape[0]}, expected {self.dim}")
        return unit(vec)


# -- bundle -------------------------------------------------------------------------


@dataclass
class Providers:
    embedder: Embedder
    chat: ChatModel
    reranker: Reranker = field(default_factory=OverlapReranker)
    judge: ChatModel | None = None
    token_ceiling: int | None = None

    @property
    def judge_model(self) -> ChatModel:
        return self.judge or self.chat


def mock_providers(seed: int = 0, dim: int = 64, token_ceiling: int | None = None) -> Providers:
    return Providers(MockEmbedder(seed, dim), MockChat(seed), OverlapReranker(), token_ceiling=token_ceiling)


def http_providers(settings: HttpSettings, token_ceiling: int | None = None) -> Providers:
    return Providers(HttpEmbedder(settings), HttpChat(settings), OverlapReranker(), token_ceiling=token_ceiling)

