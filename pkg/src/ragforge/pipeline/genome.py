"""Pipeline genome: one method per technique family, in fixed stage order."""

from __future__ import annotations

import itertools
import random
from dataclasses import astuple, dataclass, fields
from typing import Callable, Iterator

from ..errors import GenomeError

# family -> options; the first option is the "off"/baseline choice
FAMILIES: dict[str, tuple[str, ...]] = {
    "query_transform": ("none", "multi_query", "decomposition", "step_back", "hyde", "clarification"),
    "rerank": ("none", "cross_encoder", "llm"),
    "filter": ("top_k", "similarity_threshold"),
    "augment": ("none", "adjacent", "relevant_segment"),
    "condense": ("none", "llm_summarize", "tree_summarize"),
    "compose": ("naive_concat", "long_context_reorder"),
    "refine": ("none", "reflection_revise"),
}
FAMILY_NAMES = tuple(FAMILIES)

# literal tokens that differ from the option value
_LITERAL = {("rerank", "cross_encoder"): "ce_rerank", ("rerank", "llm"): "llm_rerank"}

# labels used in the published results tables
TABLE_LABELS: dict[tuple[str, str], str] = {
    ("query_transform", "multi_query"): "query_expansion_simple_multi_query_borda",
    ("query_transform", "decomposition"): "query_decomposition",
    ("query_transform", "step_back"): "step_back_prompting",
    ("query_transform", "hyde"): "hyde",
    ("query_transform", "clarification"): "simple_query_refinement_clarification",
    ("rerank", "cross_encoder"): "ce_rerank",
    ("rerank", "llm"): "llm_rerank",
    ("filter", "similarity_threshold"): "similarity_threshold",
    ("augment", "adjacent"): "adjacent_augmenter",
    ("augment", "relevant_segment"): "relevant_segment_extractor",
    ("condense", "llm_summarize"): "llm_summarize",
    ("condense", "tree_summarize"): "tree_summarize",
    ("compose", "long_context_reorder"): "long_context_reorder",
    ("refine", "reflection_revise"): "reflection_revising",
}

_ALIASES: dict[str, dict[str, str]] = {f: {} for f in FAMILIES}
for (_fam, _opt), _lit in _LITERAL.items():
    _ALIASES[_fam][_lit] = _opt
for (_fam, _opt), _lab in TABLE_LABELS.items():
    _ALIASES[_fam].setdefault(_lab, _opt)
_ALIASES["filter"]["simple_threshold"] = "similarity_threshold"
_ALIASES["compose"]["simple_listing"] = "naive_concat"


@dataclass(frozen=True, order=True)
class Genome:
    query_transform: str = "none"
    rerank: str = "none"
    filter: str = "similarity_threshold"
    augment: str = "none"
    condense: str = "none"
    compose: str = "naive_concat"
    refine: str = "none"

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if val not in FAMILIES[f.name]:
                raise GenomeError(
                    f"unknown {f.name} option {val!r}; valid options: {', '.join(FAMILIES[f.name])}"
                )

    def genes(self) -> tuple[str, ...]:
        return astuple(self)

    def replace(self, **changes: str) -> "Genome":
        return Genome(**{**dict(zip(FAMILY_NAMES, self.genes())), **changes})

    @property
    def literal(self) -> str:
        return "+".join(_LITERAL.get((f, v), v) for f, v in zip(FAMILY_NAMES, self.genes()))

    @property
    def table_label(self) -> str:
        """Abbreviated name in the style of the published results table (defaults omitted)."""
        if self == BASELINE:
            return "vector_simple + simple_threshold + simple_listing"
        labels = [
            TABLE_LABELS[(f, v)]
            for f, v in zip(FAMILY_NAMES, self.genes())
            if v not in ("none", "top_k", "naive_concat")
        ]
        return " + ".join(labels) or "vector_simple"

    def __str__(self) -> str:
        return self.literal


BASELINE = Genome()


def parse_genome(literal: str) -> Genome:
    """Parse ``a+b+c+d+e+f+g`` (seven '+'-separated fields in family order)."""
    parts = [p.strip() for p in literal.strip().split("+")]
    if len(parts) != len(FAMILIES):
        raise GenomeError(
            f"genome literal needs {len(FAMILIES)} '+'-separated fields "
            f"({'+'.join(FAMILY_NAMES)}), got {len(parts)}"
        )
    genes = {}
    for fam, tok in zip(FAMILY_NAMES, parts):
        genes[fam] = _ALIASES[fam].get(tok, tok)
    return Genome(**genes)


def design_space_size() -> int:
    n = 1
    for opts in FAMILIES.values():
        n *= len(opts)
    return n


def all_genomes() -> Iterator[Genome]:
    for combo in itertools.product(*FAMILIES.values()):
        yield Genome(*combo)


Constraint = Callable[[Genome], bool]


def always_valid(_: Genome) -> bool:
    return True


def random_genome(rng: random.Random, constraint: Constraint = always_valid, max_tries: int = 1000) -> Genome:
    for _ in range(max_tries):
        g = Genome(*(rng.choice(opts) for opts in FAMILIES.values()))
        if constraint(g):
            return g
    raise GenomeError("constraint rejected every sampled genome")
