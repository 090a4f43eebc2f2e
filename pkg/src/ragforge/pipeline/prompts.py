from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from ..providers import ChatRequest


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    version: int
    system: str
    user: str

    def render(self, **values) -> ChatRequest:
        return ChatRequest.of(self.system.format(**values), self.user.format(**values))


def parse_template(name: str, text: str) -> PromptTemplate:
    version = 1
    lines = text.splitlines()
    while lines and lines[0].startswith("#"):
        head = lines.pop(0)[1:].strip()
        if head.startswith("version:"):
            version = int(head.split(":", 1)[1])
    body = "\n".join(lines)
    if "\n---\n" not in body:
        raise ValueError(f"prompt asset {name!r} lacks the '---' system/user separator")
    system, user = body.split("\n---\n", 1)
    return PromptTemplate(name, version, system.strip(), user.strip("\n"))


@lru_cache(maxsize=None)
def _builtin(name: str) -> PromptTemplate:
    text = resources.files("ragforge").joinpath("prompts").joinpath(f"{name}.txt").read_text(encoding="utf-8")
    return parse_template(name, text)


def load_prompt(name: str, override_dir: str | Path | None = None) -> PromptTemplate:
    """Load a prompt asset, preferring ``override_dir/<name>.txt`` when present."""
    if override_dir is not None:
        p = Path(override_dir) / f"{name}.txt"
        if p.exists():
            return parse_template(name, p.read_text(encoding="utf-8"))
    return _builtin(name)
