from __future__ import annotations

import json
import math
import random
from collections import Counter

import pytest

from conftest import CountingChat, gene_match_landscape
from oracles import pareto_oracle
from ragforge.corpus.types import QAItem
from ragforge.errors import InsufficientPool, InvalidParam, StageError
from ragforge.optimizer import (
    FitnessCache,
    FitnessReport,
    GAConfig,
    ParetoPoint,
    crossover,
    dominates,
    evaluate_fitness,
    fitness,
    ga_search,
    mutate,
    pareto_front,
    sample_hash,
    sample_questions,
    tournament,
)
from ragforge.pipeline import BASELINE, PipelineContext, parse_genome, random_genome
from ragforge.providers import Providers


def qa_pool(n, sources=("a", "b")):
    items = [QAItem(f"q{i}", f"question {i}?", f"answer {i}", (f"d{i}#0",)) for i in range(n)]
    labels = {it.id: sources[i % len(sources)] for i, it in enumerate(items)}
    return items, labels


class TestOperators:
    def test_mutation_rate_zero_identity(self):
        rng = random.Random(0)
        g = random_genome(rng)
        assert mutate(g, 0.0, rng) == g

    def test_mutation_rate_one_changes_every_gene(self):
        rng = random.Random(0)
        g = random_genome(rng)
        m = mutate(g, 1.0, rng)
        assert all(a != b for a, b in zip(g.genes(), m.genes()))

    def test_mutation_binomial_mean(self):
        rng = random.Random(11)
        g = BASELINE
        n = 10_000
        changed = [sum(a != b for a, b in zip(g.genes(), mutate(g, 0.1, rng).genes())) for _ in range(n)]
        sigma = math.sqrt(7 * 0.1 * 0.9 / n)
        assert abs(sum(changed) / n - 0.7) <= 3 * sigma

    @pytest.mark.parametrize("rate", [-0.1, 1.1])
    def test_mutation_bad_rate(self, rate):
        with pytest.raises(InvalidParam):
            mutate(BASELINE, rate, random.Random(0))

    def test_crossover_genes_from_parents(self):
        rng = random.Random(5)
        for _ in range(200):
            a, b = random_genome(rng), random_genome(rng)
            c = crossover(a, b, rng)
            assert all(x in (y, z) for x, y, z in zip(c.genes(), a.genes(), b.genes()))

    def test_crossover_is_uniform(self):
        rng = random.Random(6)
        a = parse_genome("hyde+cross_encoder+top_k+adjacent+tree_summarize+long_context_reorder+reflection_revise")
        from_a = Counter()
        for _ in range(4000):
            c = crossover(a, BASELINE, rng)
            for i, (x, y) in enumerate(zip(c.genes(), a.genes())):
                from_a[i] += x == y
        for i in range(7):
            assert abs(from_a[i] / 4000 - 0.5) < 0.05

    def test_crossover_of_identical_parents(self):
        assert crossover(BASELINE, BASELINE, random.Random(0)) == BASELINE

    def test_tournament_picks_fittest_contender(self):
        pop = [FitnessReport.of(BASELINE, f, f, total_tokens=0) for f in (0.1, 0.9, 0.5)]
        rng = random.Random(0)
        picks = Counter(tournament(pop, 3, rng).fit for _ in range(2000))
        assert picks[0.9] > picks[0.5] > picks[0.1]


class TestSampling:
    def test_insufficient_pool(self):
        items, _ = qa_pool(5)
        with pytest.raises(InsufficientPool):
            sample_questions(items, 6, random.Random(0))

    def test_stratified_balance(self):
        items, labels = qa_pool(40, ("a", "b", "c", "d"))
        out = sample_questions(items, 20, random.Random(1), labels)
        assert Counter(labels[i.id] for i in out) == {"a": 5, "b": 5, "c": 5, "d": 5}

    def test_small_stratum_surplus_redistributed(self):
        items, labels = qa_pool(30)
        labels["q0"] = "tiny"
        for i in range(2, 30, 2):
            labels[f"q{i}"] = "a"
        out = sample_questions(items, 21, random.Random(2), labels)
        counts = Counter(labels[i.id] for i in out)
        assert counts["tiny"] == 1 and sum(counts.values()) == 21 and abs(counts["a"] - counts["b"]) <= 1

    def test_unlabelled_uniform_and_deterministic(self):
        items, _ = qa_pool(30)
        a = sample_questions(items, 10, random.Random(3))
        assert a == sample_questions(items, 10, random.Random(3))
        assert len({i.id for i in a}) == 10

    def test_sample_hash_order_sensitive_content(self):
        items, _ = qa_pool(4)
        assert sample_hash(items) == sample_hash(list(items))
        assert sample_hash(items[:3]) != sample_hash(items)


class TestFitness:
    def test_formula(self):
        assert fitness(0.8, 0.6) == pytest.approx(0.7)
        assert fitness(0.8, 0.6, 1.0) == pytest.approx(0.8)

    def test_cache_hit_makes_no_provider_calls(self, ctx, seed1_corpus):
        chat = CountingChat(ctx.providers.chat)
        p = ctx.providers
        c = PipelineContext(ctx.index, ctx.chunks, Providers(p.embedder, chat, p.reranker))
        sample = seed1_corpus[2][:3]
        cache = FitnessCache()
        first = evaluate_fitness(BASELINE, sample, c, cache=cache)
        calls = chat.calls
        assert calls > 0
        second = evaluate_fitness(BASELINE, sample, c, cache=cache)
        assert chat.calls == calls
        assert second == first and cache.hits == 1

    def test_report_fields(self, ctx, seed1_corpus):
        rep = evaluate_fitness(BASELINE, seed1_corpus[2][:4], ctx)
        assert rep.n_queries == 4 and rep.failures == 0
        assert rep.fit == pytest.approx(0.5 * rep.retrieval + 0.5 * rep.generation)
        assert rep.total_tokens == sum(r.usage.total for r in rep.records)

    def test_failures_score_zero_unless_strict(self, ctx, seed1_corpus):
        from conftest import FailingChat
        from ragforge.errors import ProviderUnavailable

        p = ctx.providers
        c = PipelineContext(ctx.index, ctx.chunks, Providers(p.embedder, FailingChat(ProviderUnavailable("x")), p.reranker))
        rep = evaluate_fitness(BASELINE, seed1_corpus[2][:2], c)
        assert rep.fit == 0.0 and rep.failures == 2 and len(rep.warnings) == 2
        with pytest.raises(StageError):
            evaluate_fitness(BASELINE, seed1_corpus[2][:2], c, strict=True)

    def test_empty_sample(self, ctx):
        with pytest.raises(InvalidParam):
            evaluate_fitness(BASELINE, [], ctx)


class TestSearch:
    target = parse_genome("multi_query+cross_encoder+top_k+adjacent+tree_summarize+long_context_reorder+none")

    def config(self, **kw):
        base = dict(population_size=20, generations=10, eval_sample_size=4, rng_seed=0)
        base.update(kw)
        return GAConfig(**base)

    def test_budget_respected(self):
        items, _ = qa_pool(10)
        for seed in range(10):
            calls = []
            res = ga_search(self.config(rng_seed=seed), items, fitness_fn=gene_match_landscape(self.target, calls))
            assert len(calls) == len(set(calls)) == res.n_evaluations <= 200

    def test_zero_generations_returns_initial_population(self):
        items, _ = qa_pool(10)
        res = ga_search(self.config(generations=0), items, fitness_fn=gene_match_landscape(self.target))
        assert len(res) == 20 and len(res.generations) == 1

    def test_elitism_monotonic_best(self):
        items, _ = qa_pool(10)
        for seed in range(5):
            res = ga_search(self.config(rng_seed=seed), items, fitness_fn=gene_match_landscape(self.target))
            best = [max(r.fit for r in pop) for pop in res.generations]
            assert best == sorted(best)
            assert len(res.generations) == 11

    def test_ranked_best_first(self):
        items, _ = qa_pool(10)
        res = ga_search(self.config(), items, fitness_fn=gene_match_landscape(self.target))
        fits = [r.fit for r in res]
        assert fits == sorted(fits, reverse=True)
        assert res.best.genome == self.target

    def test_deterministic(self):
        items, _ = qa_pool(10)
        a = ga_search(self.config(rng_seed=9), items, fitness_fn=gene_match_landscape(self.target))
        b = ga_search(self.config(rng_seed=9), items, fitness_fn=gene_match_landscape(self.target))
        assert [r.genome for r in a] == [r.genome for r in b]

    def test_constraint_honoured(self):
        items, _ = qa_pool(10)

        def no_hyde(g):
            return g.query_transform != "hyde"

        res = ga_search(self.config(), items, fitness_fn=gene_match_landscape(self.target), constraint=no_hyde)
        assert all(no_hyde(r.genome) for r in res)

    def test_needs_context_or_fitness(self):
        items, _ = qa_pool(10)
        with pytest.raises(InvalidParam):
            ga_search(self.config(), items)

    @pytest.mark.parametrize(
        "kw", [{"population_size": 1}, {"generations": -1}, {"elite_count": 20}, {"mutation_rate": 2.0}, {"tournament_size": 1}]
    )
    def test_invalid_config(self, kw):
        with pytest.raises(InvalidParam):
            self.config(**kw).validate()

    def test_log_written(self, tmp_path):
        items, _ = qa_pool(10)
        path = tmp_path / "log.jsonl"
        res = ga_search(self.config(generations=2), items, fitness_fn=gene_match_landscape(self.target), log_path=path)
        lines = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(lines) == res.n_evaluations
        assert set(lines[0]) == {
            "generation", "genome", "retrieval", "generation_score", "fit", "tokens", "tokens_per_query", "wall_time"
        }

    def test_real_pipeline_small_search(self, ctx, seed1_corpus):
        cfg = GAConfig(population_size=4, generations=1, eval_sample_size=3, rng_seed=1)
        res = ga_search(cfg, seed1_corpus[2], ctx)
        assert res.n_evaluations == 4
        assert all(0.0 <= r.fit <= 1.0 for r in res)


class TestPareto:
    def test_matches_oracle(self):
        rng = random.Random(77)
        for _ in range(200):
            n = rng.randint(1, 40)
            pts = [ParetoPoint(f"g{i}", rng.choice([0.5, 0.6, 0.7, rng.random()]), float(rng.randint(1, 20))) for i in range(n)]
            got = sorted((p.overall_score, p.tokens_per_query) for p in pareto_front(pts))
            want = sorted(pareto_oracle([(p.overall_score, p.tokens_per_query) for p in pts]))
            assert got == want

    def test_table_points_all_non_dominated(self):
        pts = [ParetoPoint(str(i), s, t) for i, (s, t) in enumerate([(0.850, 3664), (0.846, 1987), (0.802, 1738), (0.787, 1000)])]
        assert len(pareto_front(pts)) == 4

    def test_dominates(self):
        assert dominates(ParetoPoint("a", 0.9, 10), ParetoPoint("b", 0.8, 10))
        assert not dominates(ParetoPoint("a", 0.9, 10), ParetoPoint("b", 0.9, 10))
        assert not dominates(ParetoPoint("a", 0.9, 20), ParetoPoint("b", 0.8, 10))

    def test_duplicates_both_kept(self):
        pts = [ParetoPoint("a", 0.9, 10), ParetoPoint("b", 0.9, 10)]
        assert len(pareto_front(pts)) == 2
