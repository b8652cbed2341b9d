"""Exception hierarchy shared across the toolkit."""


class CorpusQAError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(CorpusQAError):
    """Invalid configuration, tokenizer spec, or unusable asset."""


class CorpusFormatError(CorpusQAError):
    """A corpus record is malformed; message names the record and field."""

    def __init__(self, record_ref: str, field: str, message: str):
        super().__init__(f"record {record_ref!r}, field {field!r}: {message}")
        self.record_ref = record_ref
        self.field = field


class DuplicateArticleError(CorpusQAError):
    """Two corpus records share an article_id (fatal)."""


class TransportError(CorpusQAError):
    """A network call failed after retries; safe to retry the whole operation."""


class ContextLengthError(CorpusQAError):
    """The endpoint rejected a prompt for exceeding its context window."""


class AssemblyInfeasibleError(CorpusQAError):
    """A collection cannot satisfy its constraints; names the violated one."""

    def __init__(self, constraint: str, message: str):
        super().__init__(f"{constraint}: {message}")
        self.constraint = constraint


class DanglingReferenceError(CorpusQAError):
    """A collection member is missing from the corpus."""


class DatabaseBuildError(CorpusQAError):
    """A metadata database cannot be built from the collection."""


class SqlError(CorpusQAError):
    """Base class for query-engine errors."""


class SqlParseError(SqlError):
    """Unsupported or malformed SQL; message names the offending token."""


class SqlExecutionError(SqlError):
    """The query parsed but cannot be evaluated (unknown column, type mismatch)."""


class InstantiationRejected(CorpusQAError):
    """No placeholder binding produced a valid query within the retry budget."""


class ConversionParseError(CorpusQAError):
    """A converter reply was not the expected single JSON object."""


class PipelineError(CorpusQAError):
    """A pipeline stage failed."""


class StageOrderError(PipelineError):
    """A stage was requested before its prerequisites; names the missing stage."""

    def __init__(self, stage: str, missing: str):
        super().__init__(f"stage {stage!r} requires outputs of stage {missing!r}; run it first")
        self.stage = stage
        self.missing = missing
