from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import greedy_split_oracle
from ragforge.corpus import (
    Document,
    QAItem,
    chunk_corpus,
    chunk_document,
    corpus_stats,
    dump_chunks,
    dump_corpus,
    dump_qa,
    generate_synthetic_corpus,
    load_chunks,
    load_corpus,
    load_corpus_dir,
    load_qa_dataset,
    parse_markdown_sections,
    split_sentences,
    split_text,
)
from ragforge.errors import DanglingGoldChunk, DuplicateId, EmptyDocument, InvalidLimit, NoDocuments, ParseError


def doc(body: str, title: str = "T", id: str = "d1") -> Document:
    return Document(id=id, title=title, source="web", body=body)


def squash(text: str) -> str:
    return "".join(text.split())


class TestParseSections:
    def test_heading_nesting(self):
        got = parse_markdown_sections(doc("intro\n# A\nx\n## B\ny"))
        assert got == [(("T",), "intro"), (("T", "A"), "x"), (("T", "A", "B"), "y")]

    def test_no_headings_single_section(self):
        assert parse_markdown_sections(doc("just text\nmore")) == [(("T",), "just text\nmore")]

    def test_blank_body_raises(self):
        with pytest.raises(EmptyDocument):
            parse_markdown_sections(doc(""))
        with pytest.raises(EmptyDocument):
            parse_markdown_sections(doc("  \n\t"))

    def test_sibling_heading_pops_stack(self):
        got = parse_markdown_sections(doc("# A\na\n## B\nb\n# C\nc\n### D\nd"))
        assert [p for p, _ in got] == [("T", "A"), ("T", "A", "B"), ("T", "C"), ("T", "C", "D")]

    def test_heading_inside_code_fence_is_text(self):
        got = parse_markdown_sections(doc("# A\n```\n# not a heading\n```\nafter"))
        assert len(got) == 1
        assert "# not a heading" in got[0][1]

    def test_every_non_heading_character_kept(self):
        body = "pre\n# A\nalpha beta\n\n## B\ngamma\n# C\ndelta"
        got = parse_markdown_sections(doc(body))
        kept = "".join(squash(t) for _, t in got)
        non_heading = "".join(squash(l) for l in body.splitlines() if not l.startswith("#"))
        assert kept == non_heading


class TestChunking:
    def test_short_section_one_chunk(self):
        text = "x" * 399 + "."
        chunks = chunk_document(doc(text))
        assert len(chunks) == 1
        assert chunks[0].text == text
        assert chunks[0].id == "d1#0"
        assert chunks[0].section_path == ("T",)

    def test_2500_char_section_of_equal_sentences(self):
        sentences = [("s%02d" % i) + "a" * 95 + ". " for i in range(25)]
        assert all(len(s) == 100 for s in sentences)
        body = "".join(sentences).strip()
        chunks = chunk_document(doc(body))
        expected = [c.strip() for c in greedy_split_oracle(sentences, 1000)]
        assert len(chunks) == 3
        assert [c.text for c in chunks] == expected
        assert all(c.char_len <= 1000 for c in chunks)
        assert squash("".join(c.text for c in chunks)) == squash(body)

    def test_limit_floor(self):
        with pytest.raises(InvalidLimit):
            chunk_document(doc("abc"), chunk_limit=10)
        with pytest.raises(InvalidLimit):
            split_text("abc", 49)

    def test_paragraphs_packed_before_sentences(self):
        paras = ["p%d " % i + "word " * 30 for i in range(6)]
        text = "\n\n".join(p.strip() for p in paras)
        pieces = split_text(text, 400)
        # no paragraph is split when every paragraph fits
        for p in paras:
            assert any(p.strip() in piece for piece in pieces)

    def test_hard_cut_for_long_sentence(self):
        text = "a" * 2600
        pieces = split_text(text, 1000)
        assert [len(p) for p in pieces] == [1000, 1000, 600]

    def test_ordinals_contiguous_and_ids(self):
        body = "# A\n" + "Sentence here. " * 100 + "\n# B\nshort"
        chunks = chunk_document(doc(body))
        assert [c.ordinal for c in chunks] == list(range(len(chunks)))
        assert [c.id for c in chunks] == [f"d1#{i}" for i in range(len(chunks))]
        assert chunks[-1].section_path == ("T", "B")

    def test_split_sentences(self):
        assert split_sentences("One. Two! Three? four") == ["One.", "Two!", "Three?", "four"]


markdown_line = st.one_of(
    st.text(alphabet="abc def.!?\n", min_size=0, max_size=300),
    st.builds(lambda d, t: "#" * d + " " + t, st.integers(1, 4), st.text(alphabet="xyz ", min_size=1, max_size=10)),
)


class TestChunkingProperties:
    @settings(max_examples=150, deadline=None)
    @given(st.lists(markdown_line, min_size=1, max_size=20), st.integers(50, 400))
    def test_bound_and_reconstruction(self, lines, limit):
        body = "\n".join(lines)
        d = doc(body)
        try:
            sections = parse_markdown_sections(d)
        except EmptyDocument:
            return
        chunks = chunk_document(d, limit)
        assert all(c.char_len <= limit for c in chunks)
        for path, text in sections:
            pieces = split_text(text, limit)
            assert squash("".join(pieces)) == squash(text)
        assert squash("".join(c.text for c in chunks)) == squash("".join(t for _, t in sections))


class TestSynthetic:
    def test_deterministic(self, tmp_path):
        a = generate_synthetic_corpus(7, 5, 2)
        b = generate_synthetic_corpus(7, 5, 2)
        dump_corpus(a[0], tmp_path / "a.jsonl")
        dump_corpus(b[0], tmp_path / "b.jsonl")
        dump_qa(a[1], tmp_path / "qa.jsonl")
        dump_qa(b[1], tmp_path / "qb.jsonl")
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
        assert (tmp_path / "qa.jsonl").read_bytes() == (tmp_path / "qb.jsonl").read_bytes()

    def test_seed1_shape(self, seed1_corpus):
        docs, chunks, qa = seed1_corpus
        assert len(docs) == 20 and len(qa) == 40
        ids = {c.id for c in chunks}
        assert all(set(q.gold_chunk_ids) <= ids for q in qa)
        assert {q.qtype for q in qa} == {"factual", "interpretation"}

    def test_answer_planted_only_in_gold(self, seed1_corpus):
        _, chunks, qa = seed1_corpus
        for q in qa:
            holders = {c.id for c in chunks if q.reference_answer in c.text}
            assert holders == set(q.gold_chunk_ids)

    def test_multi_section_markdown(self, seed1_corpus):
        docs, chunks, _ = seed1_corpus
        assert all(len(parse_markdown_sections(d)) >= 3 for d in docs)
        assert any(len(c.section_path) >= 3 for c in chunks)

    def test_zero_docs(self):
        assert generate_synthetic_corpus(1, 0, 2) == ([], [])


class TestIO:
    def test_corpus_round_trip(self, tmp_path, seed1_corpus):
        docs, chunks, qa = seed1_corpus
        dump_corpus(docs, tmp_path / "c.jsonl")
        assert load_corpus(tmp_path / "c.jsonl") == docs
        dump_chunks(chunks, tmp_path / "ch.jsonl")
        assert load_chunks(tmp_path / "ch.jsonl") == chunks
        dump_qa(qa, tmp_path / "qa.jsonl")
        assert load_qa_dataset(tmp_path / "qa.jsonl", [c.id for c in chunks]) == qa

    def test_corpus_record_keys(self, tmp_path):
        dump_corpus([Document("a", "Ankara", "wikipedia", "başkent", "geo")], tmp_path / "c.jsonl")
        rec = json.loads((tmp_path / "c.jsonl").read_text(encoding="utf-8"))
        assert rec == {"id": "a", "title": "Ankara", "source": "wikipedia", "body": "başkent", "topic": "geo"}

    def test_qa_three_lines(self, tmp_path):
        items = [QAItem(f"q{i}", "Q?", "A.", ("d#0",), "factual") for i in range(3)]
        dump_qa(items, tmp_path / "qa.jsonl")
        assert len(load_qa_dataset(tmp_path / "qa.jsonl")) == 3

    def test_qa_empty_gold_is_parse_error(self, tmp_path):
        p = tmp_path / "qa.jsonl"
        good = {"id": "q0", "question": "Q", "reference_answer": "A", "gold_chunk_ids": ["d#0"], "qtype": "factual"}
        bad = dict(good, id="q1", gold_chunk_ids=[])
        p.write_text(json.dumps(good) + "\n" + json.dumps(bad) + "\n", encoding="utf-8")
        with pytest.raises(ParseError, match=":2:"):
            load_qa_dataset(p)

    def test_qa_dangling_gold(self, tmp_path):
        dump_qa([QAItem("q0", "Q", "A", ("d#9",), "factual")], tmp_path / "qa.jsonl")
        with pytest.raises(DanglingGoldChunk, match="d#9"):
            load_qa_dataset(tmp_path / "qa.jsonl", ["d#0"])

    def test_bad_json_line(self, tmp_path):
        (tmp_path / "c.jsonl").write_text("{not json\n", encoding="utf-8")
        with pytest.raises(ParseError, match=":1:"):
            load_corpus(tmp_path / "c.jsonl")

    def test_corpus_dir(self, tmp_path):
        dump_corpus([doc("x", id="a")], tmp_path / "1.jsonl")
        dump_corpus([doc("y", id="b")], tmp_path / "2.jsonl")
        assert [d.id for d in load_corpus_dir(tmp_path)] == ["a", "b"]
        dump_corpus([doc("z", id="a")], tmp_path / "3.jsonl")
        with pytest.raises(DuplicateId):
            load_corpus_dir(tmp_path)

    def test_empty_dir(self, tmp_path):
        with pytest.raises(NoDocuments):
            load_corpus_dir(tmp_path)


class TestStats:
    def test_per_source(self):
        docs = [
            Document("w1", "W", "web", "a" * 100),
            Document("k1", "K", "wikipedia", "b" * 300),
            Document("k2", "K2", "wikipedia", "c" * 100),
        ]
        chunks = chunk_corpus(docs)
        stats = corpus_stats(docs, chunks).as_dict()
        assert stats["articles"] == 3
        assert stats["by_source"]["wikipedia"]["articles"] == 2
        assert stats["by_source"]["wikipedia"]["chars_per_article"] == 200.0
        assert stats["by_source"]["web"]["chunks_per_article"] == 1.0
