"""Deterministic synthetic corpus + QA fixture.

Each document describes an invented place. Every question asks for one
attribute of that place, and the reference answer is a fact sentence planted
verbatim in exactly one chunk, which becomes the gold chunk.
"""

from __future__ import annotations

import random

from .markdown import DEFAULT_CHUNK_LIMIT, chunk_document
from .types import Document, QAItem

_SYLLABLES = (
    "ka", "le", "mir", "tan", "su", "ber", "ol", "han", "ruz", "dem", "ay", "yil",
    "gok", "tas", "ne", "vi", "ros", "ul", "pe", "zar", "mi", "kor", "an", "del",
    "fu", "sen", "bal", "ta", "ri", "yo", "lun", "ek", "sa", "dor", "vel", "im",
)

ATTRIBUTES = (
    "founding year", "chief export", "main river", "highest peak", "patron saint",
    "oldest library", "traditional dish", "largest festival", "ruling family",
    "ancient name", "signature craft", "harbor guild", "famous poet", "twin city",
)

_SECTIONS = (
    "History", "Geography", "Economy", "Culture", "Architecture", "Transport",
    "Climate", "Education", "Cuisine", "Festivals", "Governance", "Legends",
)
_SUBSECTIONS = ("Early period", "Modern era", "Notable sites", "Trade routes", "Customs")

_ADJ = ("quiet", "busy", "ancient", "narrow", "colorful", "windy", "green", "stony", "sunlit", "crowded")
_NOUN = ("market", "harbor", "valley", "bridge", "square", "orchard", "workshop", "quarter", "road", "courtyard")
_VERB = ("attracts", "borders", "shelters", "overlooks", "connects", "surrounds", "feeds", "hides")
_OBJ = (
    "seasonal travelers", "the old walls", "small fishing boats", "terraced fields",
    "a row of stone houses", "the evening crowds", "several tea gardens", "the northern hills",
    "wandering merchants", "a shallow lake",
)
_TAIL = (
    "throughout the year", "during the long summers", "since the last century",
    "according to local accounts", "in the early mornings", "when the winds change",
)

TOPICS = ("Geography", "History", "Culture", "Everyday Life")


def _word(rng: random.Random, n_syll: tuple[int, int] = (2, 3)) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(*n_syll)))


def _filler(rng: random.Random) -> str:
    return (
        f"The {rng.choice(_ADJ)} {rng.choice(_NOUN)} {rng.choice(_VERB)} "
        f"{rng.choice(_OBJ)} {rng.choice(_TAIL)}."
    )


def _paragraphs(rng: random.Random, n_sentences: int, per_par: tuple[int, int]) -> list[list[str]]:
    pars = []
    while n_sentences > 0:
        k = min(n_sentences, rng.randint(*per_par))
        pars.append([_filler(rng) for _ in range(k)])
        n_sentences -= k
    return pars


def generate_synthetic_corpus(
    seed: int,
    n_docs: int,
    questions_per_doc: int,
    chunk_limit: int = DEFAULT_CHUNK_LIMIT,
) -> tuple[list[Document], list[QAItem]]:
    """Build ``n_docs`` markdown documents and ``n_docs * questions_per_doc`` QA items.

    Output is a pure function of the arguments.
    """
    if n_docs <= 0:
        return [], []
    if not 0 <= questions_per_doc <= len(ATTRIBUTES):
        raise ValueError(f"questions_per_doc must be in [0, {len(ATTRIBUTES)}]")

    rng = random.Random(seed)
    used_names: set[str] = set()

    def fresh(make) -> str:
        while True:
            w = make()
            if w.lower() not in used_names:
                used_names.add(w.lower())
                return w

    docs: list[Document] = []
    qa: list[QAItem] = []
    for i in range(n_docs):
        name = fresh(lambda: f"{_word(rng, (3, 4)).capitalize()} {_word(rng, (3, 4)).capitalize()}")
        attrs = rng.sample(ATTRIBUTES, questions_per_doc)
        facts = []
        for attr in attrs:
            if attr == "founding year":
                value = fresh(lambda: str(rng.randint(1000, 1999)))
            else:
                value = fresh(lambda: _word(rng, (3, 4)).capitalize())
            facts.append((attr, value, f"The {attr} of {name} is {value}."))

        # fact sections are short and headed by their attribute; the rest is filler,
        # with an occasional oversized section to exercise the splitter
        n_filler = 2 + rng.randint(0, 2)
        titles = rng.sample(_SECTIONS, n_filler)
        long_section = rng.randrange(n_filler) if rng.random() < 0.6 else -1
        sections: list[tuple[str, list[list[str]]]] = []
        for s, title in enumerate(titles):
            if s == long_section:
                pars = [[_filler(rng) for _ in range(rng.randint(14, 20))]]
            else:
                pars = _paragraphs(rng, rng.randint(2, 6), (2, 3))
            sections.append((title, pars))
        for attr, _, sentence in facts:
            par = [_filler(rng) for _ in range(rng.randint(0, 1))]
            par.insert(rng.randint(0, len(par)), sentence)
            sections.insert(rng.randint(0, len(sections)), (attr.capitalize(), [par]))

        blocks = [f"{name} is a settlement described in this synthetic gazetteer."]
        for title, pars in sections:
            blocks.append(f"# {title}")
            blocks.extend(" ".join(p) for p in pars)
            if rng.random() < 0.3:
                blocks.append(f"## {rng.choice(_SUBSECTIONS)}")
                blocks.extend(" ".join(p) for p in _paragraphs(rng, rng.randint(2, 4), (2, 2)))

        doc = Document(
            id=f"syn{seed}-{i:04d}",
            title=name,
            source="synthetic",
            body="\n\n".join(blocks) + "\n",
            topic=rng.choice(TOPICS),
        )
        docs.append(doc)

        chunks = chunk_document(doc, chunk_limit)
        for j, (attr, value, sentence) in enumerate(facts):
            gold = tuple(c.id for c in chunks if sentence in c.text)
            assert len(gold) == 1, f"fact for {doc.id} landed in {len(gold)} chunks"
            if j % 2 == 0:
                question, qtype = f"What is the {attr} of {name}?", "factual"
            else:
                question, qtype = f"How would you describe the {attr} of {name}?", "interpretation"
            qa.append(QAItem(f"{doc.id}-q{j}", question, sentence, gold, qtype))
    return docs, qa
