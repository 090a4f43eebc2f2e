from .config import RunConfig, config_from_dict, load_config
from .report import (
    ReportRow,
    emit_report,
    flag_pareto,
    format_table,
    load_report,
    parse_report,
    report_json,
    rows_from_reports,
    rows_from_search_log,
    select_rows,
)

__all__ = [
    "ReportRow",
    "RunConfig",
    "config_from_dict",
    "emit_report",
    "flag_pareto",
    "format_table",
    "load_config",
    "load_report",
    "parse_report",
    "report_json",
    "rows_from_reports",
    "rows_from_search_log",
    "select_rows",
]
