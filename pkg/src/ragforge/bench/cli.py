"""``ragforge`` command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 provider error. Every
failure prints exactly one line to stderr of the form ``error[<code>]: <message>``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from ..corpus import (
    chunk_corpus,
    corpus_stats,
    dump_chunks,
    dump_corpus,
    dump_qa,
    generate_synthetic_corpus,
    load_chunks,
    load_corpus_dir,
    load_qa_dataset,
)
from ..errors import ConfigError, DataError, RagForgeError, UsageError
from ..index import VectorIndex, build_index, load_index, save_index
from ..metrics import dump_eval_records
from ..optimizer import ga_search, score_output
from ..pipeline import PipelineContext, parse_genome, run_pipeline
from ..pipeline.genome import BASELINE
from .config import RunConfig, load_config, require_file, set_path
from .report import emit_report, rows_from_reports, rows_from_search_log, select_rows


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # single-line usage errors instead of argparse's banner
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="random seed for sampling and the search")
    common.add_argument("--mock", action="store_true", default=None, help="force offline mock providers")
    common.add_argument("--out", metavar="PATH", help="output path for the subcommand")

    p = _Parser(prog="ragforge", description="Modular RAG pipelines and genetic configuration search.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic corpus and QA set")
    s.add_argument("--docs", type=int, default=20)
    s.add_argument("--questions-per-doc", type=int, default=2)

    s = sub.add_parser("ingest", parents=[common], help="chunk a document corpus and print stats")
    s.add_argument("corpus", nargs="*", help="corpus JSONL files or directories")
    s.add_argument("--chunk-limit", type=int)

    s = sub.add_parser("index", parents=[common], help="embed chunks into an index file")
    s.add_argument("--chunks", metavar="PATH")

    s = sub.add_parser("run", parents=[common], help="run one pipeline on a question")
    s.add_argument("--genome", default=BASELINE.literal, help="seven '+'-separated genes")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--question")
    g.add_argument("--qa-id")
    s.add_argument("--chunks", metavar="PATH")
    s.add_argument("--index", metavar="PATH")
    s.add_argument("--qa", metavar="PATH")

    s = sub.add_parser("optimize", parents=[common], help="genetic search; writes search log and report")
    s.add_argument("--chunks", metavar="PATH")
    s.add_argument("--index", metavar="PATH")
    s.add_argument("--qa", metavar="PATH")
    s.add_argument("--corpus", action="append", help="corpus JSONL; its source labels stratify the sample")
    s.add_argument("--population", type=int)
    s.add_argument("--generations", type=int)
    s.add_argument("--sample", type=int, help="questions per fitness evaluation")
    s.add_argument("--workers", type=int)
    s.add_argument("--top", type=int)

    s = sub.add_parser("report", parents=[common], help="tabulate a search log")
    s.add_argument("log", help="search log JSONL written by optimize")
    s.add_argument("--top", type=int)
    s.add_argument("--labels", action="store_true", help="show results-table method labels")
    return p


def _config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.ga.rng_seed = args.seed
    if args.mock:
        cfg.provider.mode = "mock"
    for flag, dotted in [
        ("chunk_limit", "corpus.chunk_limit"),
        ("chunks", "corpus.chunks"),
        ("qa", "corpus.qa"),
        ("index", "index.path"),
        ("population", "ga.population_size"),
        ("generations", "ga.generations"),
        ("sample", "ga.eval_sample_size"),
        ("workers", "ga.workers"),
        ("top", "report.top"),
    ]:
        set_path(cfg, dotted, getattr(args, flag, None))
    if getattr(args, "corpus", None):
        cfg.corpus.paths = list(args.corpus)
    return cfg.validate()


def _say(text: str = "") -> None:
    print(text, flush=True)


# -- subcommands -------------------------------------------------------------------


def cmd_synth(args, cfg: RunConfig) -> int:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    docs, qa = generate_synthetic_corpus(cfg.seed, args.docs, args.questions_per_doc, cfg.corpus.chunk_limit)
    dump_corpus(docs, out / "corpus.jsonl")
    dump_qa(qa, out / "qa.jsonl")
    _say(f"wrote {len(docs)} documents to {out / 'corpus.jsonl'} and {len(qa)} questions to {out / 'qa.jsonl'}")
    return 0


def cmd_ingest(args, cfg: RunConfig) -> int:
    if not cfg.corpus.paths:
        raise ConfigError("no corpus paths given (positional arguments or corpus.paths)")
    docs = []
    for p in cfg.corpus.paths:
        docs.extend(load_corpus_dir(require_file(p, "corpus")))
    chunks = chunk_corpus(docs, cfg.corpus.chunk_limit)
    out = Path(args.out or cfg.corpus.chunks)
    dump_chunks(chunks, out)
    stats = corpus_stats(docs, chunks).as_dict()
    _say(f"wrote {len(chunks)} chunks from {len(docs)} documents to {out}")
    _say(f"{'source':<12} {'articles':>8} {'chars/article':>14} {'chunks/article':>15} {'chars/chunk':>12}")
    for source, row in [*stats.get("by_source", {}).items(), ("all", stats)]:
        _say(
            f"{source:<12} {row['articles']:>8} {row['chars_per_article']:>14.1f} "
            f"{row['chunks_per_article']:>15.2f} {row['chars_per_chunk']:>12.1f}"
        )
    return 0


def cmd_index(args, cfg: RunConfig) -> int:
    chunks = load_chunks(require_file(cfg.corpus.chunks, "chunk dump"))
    providers = cfg.provider.build()
    index = build_index(chunks, providers.embedder, cfg.index.with_context)
    out = Path(args.out or cfg.index.path)
    save_index(index, out)
    _say(f"indexed {len(index)} chunks (dim {index.dim}) into {out}")
    return 0


def _context(cfg: RunConfig) -> PipelineContext:
    chunks = load_chunks(require_file(cfg.corpus.chunks, "chunk dump"))
    providers = cfg.provider.build()
    index_path = Path(cfg.index.path)
    index: VectorIndex
    if index_path.exists():
        index = load_index(index_path)
        if index.dim != providers.embedder.dim and cfg.provider.mode == "mock":
            raise DataError(f"index dim {index.dim} does not match embedder dim {providers.embedder.dim}")
    else:
        index = build_index(chunks, providers.embedder, cfg.index.with_context)
    return PipelineContext(index, {c.id: c for c in chunks}, providers, cfg.pipeline)


def cmd_run(args, cfg: RunConfig) -> int:
    genome = parse_genome(args.genome)
    ctx = _context(cfg)
    if args.question is not None:
        out = run_pipeline(genome, args.question, ctx)
        _say(out.answer)
        for w in out.trace.warnings:
            print(f"warning: {w}", file=sys.stderr)
        _say(json.dumps({"genome": genome.literal, "tokens": out.usage.total, "retrieved": out.retrieved.ids}))
        return 0
    qa = load_qa_dataset(require_file(cfg.corpus.qa, "QA file"), ctx.chunks.keys())
    item = next((q for q in qa if q.id == args.qa_id), None)
    if item is None:
        raise DataError(f"no QA item with id {args.qa_id!r}")
    out = run_pipeline(genome, item, ctx)
    rec = score_output(genome, item, out, ctx)
    _say(out.answer)
    _say(rec.to_json())
    if args.out:
        dump_eval_records([rec], args.out)
    return 0


def cmd_optimize(args, cfg: RunConfig) -> int:
    ctx = _context(cfg)
    qa = load_qa_dataset(require_file(cfg.corpus.qa, "QA file"), ctx.chunks.keys())
    out = Path(args.out or cfg.report.path or "search")
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "search_log.jsonl"
    sources = _qa_sources(cfg, qa)
    result = ga_search(cfg.ga, qa, ctx, sources=sources, log_path=log_path)
    rows = select_rows(rows_from_reports(result), cfg.report.top)
    table = emit_report(rows, out / "report.json")
    (out / "report.txt").write_text(table + "\n", encoding="utf-8")
    _say(table)
    _say(f"\n{result.n_evaluations} distinct genomes evaluated; log: {log_path}; report: {out / 'report.json'}")
    return 0


def _qa_sources(cfg: RunConfig, qa) -> Optional[dict[str, str]]:
    """Source label per question, via its gold chunks' document, when the corpus is available."""
    docs = []
    for p in cfg.corpus.paths:
        if Path(p).exists():
            docs.extend(load_corpus_dir(p))
    if not docs:
        return None
    by_doc = {d.id: d.source for d in docs}
    out = {}
    for item in qa:
        doc_id = item.gold_chunk_ids[0].rsplit("#", 1)[0]
        if doc_id in by_doc:
            out[item.id] = by_doc[doc_id]
    return out


def cmd_report(args, cfg: RunConfig) -> int:
    rows = rows_from_search_log(require_file(args.log, "search log"))
    table = emit_report(select_rows(rows, cfg.report.top), args.out, labels=args.labels)
    _say(table)
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "index": cmd_index,
    "run": cmd_run,
    "optimize": cmd_optimize,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except RagForgeError as exc:
        print(f"error[{exc.code}]: {_one_line(exc)}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error[io]: {_one_line(exc)}", file=sys.stderr)
        return 3


def _one_line(exc: BaseException) -> str:
    return " ".join(str(exc).split()) or type(exc).__name__


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
