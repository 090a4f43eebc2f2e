from __future__ import annotations

import random

import pytest

from ragforge.errors import GenomeError
from ragforge.pipeline import BASELINE, FAMILIES, Genome, all_genomes, design_space_size, parse_genome, random_genome


class TestGenome:
    def test_baseline_genes(self):
        assert BASELINE.genes() == ("none", "none", "similarity_threshold", "none", "none", "naive_concat", "none")

    def test_literal_round_trip(self):
        for g in all_genomes():
            assert parse_genome(g.literal) == g

    def test_rerank_literals(self):
        g = BASELINE.replace(rerank="cross_encoder")
        assert g.literal.split("+")[1] == "ce_rerank"
        assert parse_genome("none+cross_encoder+top_k+none+none+naive_concat+none").rerank == "cross_encoder"

    def test_six_fields_rejected(self):
        with pytest.raises(GenomeError, match="7"):
            parse_genome("none+none+top_k+none+none+naive_concat")

    def test_unknown_option_lists_valid(self):
        with pytest.raises(GenomeError, match="valid options: none, cross_encoder, llm"):
            parse_genome("none+bogus+top_k+none+none+naive_concat+none")

    def test_table_labels(self):
        assert BASELINE.table_label == "vector_simple + simple_threshold + simple_listing"
        g = parse_genome("hyde+ce_rerank+top_k+none+tree_summarize+long_context_reorder+none")
        assert g.table_label == "hyde + ce_rerank + tree_summarize + long_context_reorder"
        assert parse_genome("simple_query_refinement_clarification+ce_rerank+top_k+adjacent_augmenter+none+naive_concat+none").augment == "adjacent"

    def test_ordering_and_hash(self):
        assert len({BASELINE, Genome()}) == 1
        assert sorted([BASELINE.replace(refine="reflection_revise"), BASELINE])[0] == BASELINE


class TestDesignSpace:
    def test_cardinality(self):
        assert design_space_size() == 6 * 3 * 2 * 3 * 3 * 2 * 2 == 1296
        assert len(set(all_genomes())) == 1296

    def test_random_determinism(self):
        assert random_genome(random.Random(5)) == random_genome(random.Random(5))

    def test_random_covers_every_option(self):
        rng = random.Random(0)
        seen = {f: set() for f in FAMILIES}
        for _ in range(10_000):
            for f, v in zip(FAMILIES, random_genome(rng).genes()):
                seen[f].add(v)
        assert all(seen[f] == set(opts) for f, opts in FAMILIES.items())

    def test_constraint_respected(self):
        rng = random.Random(1)
        no_hyde = lambda g: g.query_transform != "hyde"  # noqa: E731
        assert all(random_genome(rng, no_hyde).query_transform != "hyde" for _ in range(500))

    def test_impossible_constraint(self):
        with pytest.raises(GenomeError):
            random_genome(random.Random(0), lambda g: False, max_tries=10)
