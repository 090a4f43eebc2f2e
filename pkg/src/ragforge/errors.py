"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures to the
documented process exit codes without a lookup table.
"""

from __future__ import annotations


class RagForgeError(Exception):
    exit_code = 3
    code = "error"


# -- usage ------------------------------------------------------------------


class UsageError(RagForgeError):
    exit_code = 2
    code = "usage"


class GenomeError(UsageError):
    code = "genome"


class InvalidParam(UsageError):
    code = "invalid_param"


class InvalidLimit(InvalidParam):
    code = "invalid_limit"


class ConfigError(UsageError):
    code = "config"


# -- data -------------------------------------------------------------------


class DataError(RagForgeError):
    exit_code = 3
    code = "data"


class EmptyDocument(DataError):
    code = "empty_document"


class ParseError(DataError):
    code = "parse"

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.path = path
        self.line = line


class DanglingGoldChunk(DataError):
    code = "dangling_gold"

    def __init__(self, qa_id: str, chunk_id: str):
        super().__init__(f"QA item {qa_id!r} references unknown chunk {chunk_id!r}")
        self.qa_id = qa_id
        self.chunk_id = chunk_id


class NoDocuments(DataError):
    code = "no_documents"


class EmptyCorpus(DataError):
    code = "empty_corpus"


class DuplicateId(DataError):
    code = "duplicate_id"


class DimensionMismatch(DataError):
    code = "dimension_mismatch"


class FormatError(DataError):
    code = "format"

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class VersionMismatch(FormatError):
    code = "version"


class EmptyGold(DataError):
    code = "empty_gold"


class InsufficientPool(DataError):
    code = "insufficient_pool"


class StageError(RagForgeError):
    """A pipeline stage failed in a way the run cannot recover from."""

    code = "stage"

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        if isinstance(cause, RagForgeError):
            self.exit_code = cause.exit_code


# -- providers --------------------------------------------------------------


class ProviderError(RagForgeError):
    exit_code = 4
    code = "provider"


class ProviderUnavailable(ProviderError):
    code = "provider_unavailable"


class EmptyInput(ProviderError):
    # bad caller input rather than a provider fault
    exit_code = 3
    code = "empty_input"


class TokenBudgetExceeded(ProviderError):
    code = "token_budget"


class JudgeParseError(ProviderError):
    code = "judge_parse"
