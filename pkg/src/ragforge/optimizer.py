"""Genetic search over pipeline genomes and post-hoc Pareto analysis.

The search follows the usual elitist loop: evaluate the population, carry the
best few over unchanged, and refill with tournament-selected parents passed
through uniform crossover and per-gene mutation. Fitness is the weighted mean
of the retrieval and generation aggregates over a fixed question sample and is
cached per (genome, sample), so the evaluation budget counts distinct genomes.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .corpus.types import QAItem
from .errors import InsufficientPool, InvalidParam, RagForgeError
from .metrics import EvalRecord, GenerationEval, RetrievalEval, judge_score, mean, semantic_similarity
from .pipeline.genome import FAMILIES, FAMILY_NAMES, Genome, always_valid, random_genome
from .pipeline.runner import PipelineContext, PipelineOutput, run_pipeline

Constraint = Callable[[Genome], bool]


@dataclass
class GAConfig:
    population_size: int = 20
    generations: int = 10
    mutation_rate: float = 0.1
    tournament_size: int = 3
    elite_count: int = 2
    eval_sample_size: int = 100
    rng_seed: int = 0
    fitness_alpha: float = 0.5
    strict: bool = False
    workers: int = 1
    novelty_retries: int = 20

    def validate(self) -> "GAConfig":
        if self.population_size < 2:
            raise InvalidParam("population_size must be >= 2")
        if self.generations < 0:
            raise InvalidParam("generations must be >= 0")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise InvalidParam("mutation_rate must lie in [0, 1]")
        if not 0 <= self.elite_count < self.population_size:
            raise InvalidParam("elite_count must satisfy 0 <= elite_count < population_size")
        if self.tournament_size < 2:
            raise InvalidParam("tournament_size must be >= 2")
        if self.eval_sample_size < 1:
            raise InvalidParam("eval_sample_size must be >= 1")
        if not 0.0 <= self.fitness_alpha <= 1.0:
            raise InvalidParam("fitness_alpha must lie in [0, 1]")
        if self.workers < 1:
            raise InvalidParam("workers must be >= 1")
        return self

    @property
    def budget(self) -> int:
        """Maximum number of distinct genomes one search may evaluate."""
        return self.population_size * max(self.generations, 1)


@dataclass(frozen=True)
class FitnessReport:
    genome: Genome
    retrieval: float
    generation: float
    fit: float
    total_tokens: int
    n_queries: int = 1
    failures: int = 0
    warnings: tuple[str, ...] = ()
    records: tuple[EvalRecord, ...] = field(default=(), compare=False, repr=False)

    @property
    def tokens_per_query(self) -> float:
        return self.total_tokens / self.n_queries if self.n_queries else 0.0

    @classmethod
    def of(cls, genome: Genome, retrieval: float, generation: float, alpha: float = 0.5, **kw) -> "FitnessReport":
        return cls(genome, retrieval, generation, fitness(retrieval, generation, alpha), **kw)


@dataclass(frozen=True)
class ParetoPoint:
    genome: str
    overall_score: float
    tokens_per_query: float

    @classmethod
    def from_report(cls, report: FitnessReport) -> "ParetoPoint":
        return cls(report.genome.literal, report.fit, report.tokens_per_query)


def fitness(retrieval: float, generation: float, alpha: float = 0.5) -> float:
    return alpha * retrieval + (1 - alpha) * generation


# -- variation operators -----------------------------------------------------------


def crossover(a: Genome, b: Genome, rng: random.Random) -> Genome:
    """Uniform crossover: each gene comes from either parent with probability 1/2."""
    return Genome(*(x if rng.random() < 0.5 else y for x, y in zip(a.genes(), b.genes())))


def mutate(genome: Genome, rate: float, rng: random.Random) -> Genome:
    """Resample each gene, with probability ``rate``, to a different option of its family."""
    if not 0.0 <= rate <= 1.0:
        raise InvalidParam(f"mutation rate must lie in [0, 1], got {rate}")
    genes = list(genome.genes())
    for i, fam in enumerate(FAMILY_NAMES):
        if rng.random() < rate:
            genes[i] = rng.choice([o for o in FAMILIES[fam] if o != genes[i]])
    return Genome(*genes)


def _nudge(genome: Genome, rng: random.Random) -> Genome:
    """Change exactly one gene; used to steer offspring away from already-seen genomes."""
    i = rng.randrange(len(FAMILY_NAMES))
    genes = list(genome.genes())
    genes[i] = rng.choice([o for o in FAMILIES[FAMILY_NAMES[i]] if o != genes[i]])
    return Genome(*genes)


def tournament(population: Sequence[FitnessReport], size: int, rng: random.Random) -> FitnessReport:
    contenders = [rng.randrange(len(population)) for _ in range(size)]
    return population[min(contenders, key=lambda i: (-population[i].fit, i))]


# -- fitness --------------------------------------------------------------------------


def sample_hash(sample: Sequence[QAItem]) -> str:
    h = hashlib.sha256()
    for item in sample:
        h.update(item.id.encode("utf-8"))
        h.update(b"\0")
    return h.hexdigest()[:16]


class FitnessCache:
    """Thread-safe memo of fitness reports keyed by (genome, sample hash)."""

    def __init__(self):
        self._lock = threading.Lock()
        self._data: dict[tuple[Genome, str], FitnessReport] = {}
        self.hits = 0
        self.misses = 0

    def get(self, genome: Genome, key: str) -> Optional[FitnessReport]:
        with self._lock:
            rep = self._data.get((genome, key))
            if rep is None:
                self.misses += 1
            else:
                self.hits += 1
            return rep

    def put(self, genome: Genome, key: str, report: FitnessReport) -> None:
        with self._lock:
            self._data.setdefault((genome, key), report)

    def __contains__(self, item: tuple[Genome, str]) -> bool:
        with self._lock:
            return item in self._data

    def __len__(self) -> int:
        with self._lock:
            return len(self._data)


def evaluate_query(genome: Genome, item: QAItem, ctx: PipelineContext) -> EvalRecord:
    """Run one question and score it. Evaluation calls are not charged to the pipeline."""
    return score_output(genome, item, run_pipeline(genome, item, ctx), ctx)


def score_output(genome: Genome, item: QAItem, out: PipelineOutput, ctx: PipelineContext) -> EvalRecord:
    retrieval = RetrievalEval.of(out.retrieved, item.gold_chunk_ids)
    providers = ctx.providers
    sim = semantic_similarity(out.answer, item.reference_answer, providers.embedder)
    judge = judge_score(item.question, out.answer, item.reference_answer, providers.judge_model, prompt=ctx.prompt)
    return EvalRecord(item.id, genome.literal, retrieval, GenerationEval(sim, judge), out.usage)


def evaluate_fitness(
    genome: Genome,
    qa_sample: Sequence[QAItem],
    ctx: PipelineContext,
    alpha: float = 0.5,
    cache: Optional[FitnessCache] = None,
    strict: bool = False,
) -> FitnessReport:
    """Mean retrieval and generation aggregates of ``genome`` over ``qa_sample``.

    A run that fails scores zero for its question and leaves a warning, unless
    ``strict`` is set, in which case the error propagates.
    """
    if not qa_sample:
        raise InvalidParam("fitness needs a non-empty question sample")
    key = sample_hash(qa_sample)
    if cache is not None:
        hit = cache.get(genome, key)
        if hit is not None:
            return hit if hit.fit == fitness(hit.retrieval, hit.generation, alpha) else replace(
                hit, fit=fitness(hit.retrieval, hit.generation, alpha)
            )
    records: list[EvalRecord] = []
    r_vals, g_vals, warnings = [], [], []
    tokens = 0
    failures = 0
    for item in qa_sample:
        try:
            rec = evaluate_query(genome, item, ctx)
        except RagForgeError as exc:
            if strict:
                raise
            failures += 1
            warnings.append(f"{item.id}: {exc}")
            r_vals.append(0.0)
            g_vals.append(0.0)
            continue
        records.append(rec)
        r_vals.append(rec.retrieval.aggregate)
        g_vals.append(rec.generation.aggregate)
        tokens += rec.usage.total
    report = FitnessReport.of(
        genome,
        mean(r_vals),
        mean(g_vals),
        alpha,
        total_tokens=tokens,
        n_queries=len(qa_sample),
        failures=failures,
        warnings=tuple(warnings),
        records=tuple(records),
    )
    if cache is not None:
        cache.put(genome, key, report)
    return report


# -- question sampling ---------------------------------------------------------------


def sample_questions(
    pool: Sequence[QAItem],
    n: int,
    rng: random.Random,
    sources: Optional[Mapping[str, str]] = None,
) -> list[QAItem]:
    """Draw ``n`` questions, balanced across source labels when there are several.

    Each stratum gets an equal share (capped by its size, surplus redistributed);
    without labels this is a plain uniform sample. Output keeps pool order.
    """
    if len(pool) < n:
        raise InsufficientPool(f"question pool has {len(pool)} items, sample size is {n}")
    labels = {item.id: (sources or {}).get(item.id) for item in pool}
    strata: dict[str, list[int]] = {}
    for i, item in enumerate(pool):
        if labels[item.id] is not None:
            strata.setdefault(labels[item.id], []).append(i)
    if len(strata) < 2 or any(v is None for v in labels.values()):
        chosen = rng.sample(range(len(pool)), n)
        return [pool[i] for i in sorted(chosen)]
    names = sorted(strata)
    quota = {s: 0 for s in names}
    remaining = n
    while remaining:
        open_ = [s for s in names if quota[s] < len(strata[s])]
        share, extra = divmod(remaining, len(open_))
        for j, s in enumerate(open_):
            take = min(share + (1 if j < extra else 0), len(strata[s]) - quota[s])
            quota[s] += take
            remaining -= take
    chosen = [i for s in names for i in rng.sample(strata[s], quota[s])]
    return [pool[i] for i in sorted(chosen)]


# -- search ------------------------------------------------------------------------------


FitnessFn = Callable[[Genome, Sequence[QAItem]], FitnessReport]


class SearchResult(list):
    """Every evaluated genome's report, best first, plus per-generation populations."""

    def __init__(self, ranked: Iterable[FitnessReport], generations: list[list[FitnessReport]], sample: list[QAItem]):
        super().__init__(ranked)
        self.generations = generations
        self.sample = sample

    @property
    def best(self) -> FitnessReport:
        return self[0]

    @property
    def n_evaluations(self) -> int:
        return len(self)


def ga_search(
    config: GAConfig,
    qa_pool: Sequence[QAItem],
    ctx: Optional[PipelineContext] = None,
    *,
    fitness_fn: Optional[FitnessFn] = None,
    sources: Optional[Mapping[str, str]] = None,
    constraint: Constraint = always_valid,
    log_path: str | Path | None = None,
    cache: Optional[FitnessCache] = None,
) -> SearchResult:
    """Elitist genetic search; returns all distinct evaluated genomes ranked by fitness.

    ``fitness_fn`` replaces pipeline evaluation (test seam). At most
    ``config.budget`` distinct genomes are evaluated.
    """
    config.validate()
    if fitness_fn is None and ctx is None:
        raise InvalidParam("ga_search needs a pipeline context or a fitness function")
    rng = random.Random(config.rng_seed)
    sample = sample_questions(qa_pool, config.eval_sample_size, rng, sources)
    cache = cache if cache is not None else FitnessCache()
    key = sample_hash(sample)
    seen: dict[Genome, FitnessReport] = {}
    order: list[Genome] = []
    log = open(log_path, "w", encoding="utf-8", newline="\n") if log_path else None

    def score(genome: Genome) -> FitnessReport:
        if fitness_fn is not None:
            hit = cache.get(genome, key)
            if hit is None:
                hit = fitness_fn(genome, sample)
                cache.put(genome, key, hit)
            return hit
        return evaluate_fitness(genome, sample, ctx, config.fitness_alpha, cache, config.strict)

    def evaluate(population: list[Genome], gen: int) -> list[FitnessReport]:
        fresh = list(dict.fromkeys(g for g in population if g not in seen))

        def run(g: Genome) -> tuple[Genome, FitnessReport, float]:
            t0 = time.perf_counter()
            rep = score(g)
            return g, rep, time.perf_counter() - t0

        if config.workers > 1 and len(fresh) > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                results = list(pool.map(run, fresh))
        else:
            results = [run(g) for g in fresh]
        for g, rep, dt in results:
            seen[g] = rep
            order.append(g)
            if log is not None:
                log.write(json.dumps(search_log_record(gen, rep, dt), ensure_ascii=False) + "\n")
        return [seen[g] for g in population]

    def novel(child: Genome, taken: set[Genome]) -> Genome:
        for _ in range(config.novelty_retries):
            if child not in seen and child not in taken and constraint(child):
                return child
            child = _nudge(child, rng)
        return child if constraint(child) else random_genome(rng, constraint)

    try:
        initial: list[Genome] = []
        for _ in range(config.population_size):
            initial.append(novel(random_genome(rng, constraint), set(initial)))
        population = evaluate(initial, 0)
        history = [population]
        for gen in range(1, config.generations + 1):
            ranked = sorted(range(len(population)), key=lambda i: (-population[i].fit, i))
            nxt = [population[i].genome for i in ranked[: config.elite_count]]
            taken = set(nxt)
            room = config.budget - len(seen)
            while len(nxt) < config.population_size:
                a = tournament(population, config.tournament_size, rng).genome
                b = tournament(population, config.tournament_size, rng).genome
                child = mutate(crossover(a, b, rng), config.mutation_rate, rng)
                if not constraint(child):
                    child = a
                if room > 0:
                    child = novel(child, taken)
                if child not in seen and child not in taken:
                    if room <= 0:
                        # budget spent: fall back to an already-evaluated parent
                        child = a
                    else:
                        room -= 1
                nxt.append(child)
                taken.add(child)
            population = evaluate(nxt, gen)
            history.append(population)
    finally:
        if log is not None:
            log.close()

    ranked_reports = sorted((seen[g] for g in order), key=lambda r: (-r.fit, r.total_tokens, r.genome.literal))
    return SearchResult(ranked_reports, history, sample)


def search_log_record(generation: int, report: FitnessReport, wall_time: float) -> dict:
    return {
        "generation": generation,
        "genome": report.genome.literal,
        "retrieval": report.retrieval,
        "generation_score": report.generation,
        "fit": report.fit,
        "tokens": report.total_tokens,
        "tokens_per_query": report.tokens_per_query,
        "wall_time": round(wall_time, 6),
    }


# -- Pareto ----------------------------------------------------------------------------------


def dominates(a: ParetoPoint, b: ParetoPoint) -> bool:
    return (
        a.overall_score >= b.overall_score
        and a.tokens_per_query <= b.tokens_per_query
        and (a.overall_score > b.overall_score or a.tokens_per_query < b.tokens_per_query)
    )


def pareto_front(points: Sequence[ParetoPoint]) -> list[ParetoPoint]:
    """Points no other point dominates (higher score, fewer tokens), best score first."""
    by_score = sorted(points, key=lambda p: (-p.overall_score, p.tokens_per_query))
    front: list[ParetoPoint] = []
    best_tokens = float("inf")
    best_score = None
    for p in by_score:
        # a point survives if it is strictly cheaper than everything scoring at least as well,
        # or ties the cheapest of an equal-score group exactly
        if p.tokens_per_query < best_tokens:
            front.append(p)
            best_tokens = p.tokens_per_query
            best_score = p.overall_score
        elif p.tokens_per_query == best_tokens and p.overall_score == best_score:
            front.append(p)
    return front


__all__ = [
    "FitnessCache",
    "FitnessReport",
    "GAConfig",
    "ParetoPoint",
    "SearchResult",
    "crossover",
    "dominates",
    "evaluate_fitness",
    "evaluate_query",
    "fitness",
    "ga_search",
    "mutate",
    "pareto_front",
    "sample_hash",
    "sample_questions",
    "score_output",
    "search_log_record",
    "tournament",
]
