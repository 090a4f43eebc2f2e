"""Results tables in the style of the published configuration comparisons."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

from ..errors import GenomeError, ParseError
from ..optimizer import FitnessReport, ParetoPoint, pareto_front
from ..pipeline.genome import parse_genome

REPORT_FORMAT = "ragforge-report/1"


@dataclass(frozen=True)
class ReportRow:
    genome: str
    overall: float
    retrieval: float
    generation: float
    tokens: float
    pareto: bool = False
    label: str = ""

    @property
    def overall_pct(self) -> str:
        return f"{100 * self.overall:.2f}%"


def flag_pareto(rows: Sequence[ReportRow]) -> list[ReportRow]:
    """Recompute the pareto flag of every row and sort by overall score, best first."""
    points = [ParetoPoint(r.genome, r.overall, r.tokens) for r in rows]
    front = {id(p) for p in pareto_front(points)}
    flagged = [
        ReportRow(r.genome, r.overall, r.retrieval, r.generation, r.tokens, id(p) in front, r.label)
        for r, p in zip(rows, points)
    ]
    return sorted(flagged, key=lambda r: (-r.overall, r.tokens, r.genome))


def rows_from_reports(reports: Iterable[FitnessReport]) -> list[ReportRow]:
    rows = [
        ReportRow(
            r.genome.literal,
            r.fit,
            r.retrieval,
            r.generation,
            r.tokens_per_query,
            label=r.genome.table_label,
        )
        for r in reports
    ]
    return flag_pareto(rows)


def rows_from_search_log(path: str | Path) -> list[ReportRow]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                genome = parse_genome(rec["genome"])
                rows.append(
                    ReportRow(
                        genome.literal,
                        float(rec["fit"]),
                        float(rec["retrieval"]),
                        float(rec["generation_score"]),
                        float(rec["tokens_per_query"]),
                        label=genome.table_label,
                    )
                )
            except (ValueError, KeyError, TypeError, GenomeError) as exc:
                raise ParseError(f"bad search log record: {exc}", path=str(path), line=lineno) from None
    return flag_pareto(rows)


def select_rows(rows: Sequence[ReportRow], top: int) -> list[ReportRow]:
    """The ``top`` best rows plus every pareto row, in overall order."""
    keep = {r.genome for r in rows[:top]} | {r.genome for r in rows if r.pareto}
    return [r for r in rows if r.genome in keep]


def format_table(rows: Sequence[ReportRow], labels: bool = False) -> str:
    names = [(r.label or r.genome) if labels else r.genome for r in rows]
    width = max([len("Configuration"), *map(len, names)])
    head = f"{'Configuration':<{width}}  {'Overall':>8}  {'Retrieval':>9}  {'Generation':>10}  {'Tokens':>10}  Pareto"
    lines = [head, "-" * len(head)]
    for name, r in zip(names, rows):
        lines.append(
            f"{name:<{width}}  {r.overall_pct:>8}  {r.retrieval:>9.3f}  {r.generation:>10.3f}  "
            f"{r.tokens:>10,.1f}  {'*' if r.pareto else ''}"
        )
    return "\n".join(lines)


def report_json(rows: Sequence[ReportRow]) -> str:
    return json.dumps({"format": REPORT_FORMAT, "rows": [asdict(r) for r in rows]}, indent=2, ensure_ascii=False)


def parse_report(text: str) -> list[ReportRow]:
    try:
        data = json.loads(text)
        if data.get("format") != REPORT_FORMAT:
            raise ValueError(f"unsupported report format {data.get('format')!r}")
        return [ReportRow(**r) for r in data["rows"]]
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f"not a ragforge report: {exc}") from None


def emit_report(rows: Sequence[ReportRow], path: str | Path | None = None, labels: bool = False) -> str:
    """Format ``rows`` (flagged and sorted) as a table; also write the JSON form to ``path``."""
    rows = flag_pareto(rows)
    if path is not None:
        Path(path).write_text(report_json(rows) + "\n", encoding="utf-8")
    return format_table(rows, labels)


def load_report(path: str | Path) -> list[ReportRow]:
    return parse_report(Path(path).read_text(encoding="utf-8"))
