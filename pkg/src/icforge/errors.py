"""Exception hierarchy shared across the toolkit.

Every contract violation raises a dedicated class so callers can match on
type rather than message text.
"""


class ForgeError(Exception):
    """Base class for all toolkit errors."""


# --- record / dataset model ---


class EmptyMediaError(ForgeError):
    """A record was built with no media attached."""


class UnknownLanguageError(ForgeError):
    """Language tag outside the supported set."""


class SelfReferenceError(ForgeError):
    """A record listed itself among its own in-context ids."""


class IntegrityViolationError(ForgeError):
    """Dataset referential integrity broken; carries the offending id."""

    def __init__(self, message: str, offending_id: str | None = None):
        super().__init__(message)
        self.offending_id = offending_id


class MalformedInputError(ForgeError):
    """Bytes could not be parsed into a dataset."""


class MixedTaskError(ForgeError):
    """Context records from a different task than the query."""


class UnresolvedPlaceholderError(ForgeError):
    """A template slot could not be filled from the record."""


# --- context packing ---


class UnknownIdError(ForgeError):
    """Id not present in the embedding store."""


class EmptyStoreError(ForgeError):
    """Retrieval requested from a store with no other candidates."""


class SingletonPoolError(ForgeError):
    """Pairing requested against a pool containing only the query itself."""


class DimensionMismatchError(ForgeError):
    """Vectors of different dimensions."""


class ZeroVectorError(ForgeError):
    """Cosine of a zero-norm vector is undefined."""


# --- prompt assembly ---


class SchemaMismatchError(ForgeError):
    """Annotation payload does not match its task schema."""


class BudgetTooSmallError(ForgeError):
    """Token budget cannot fit even the system message plus query."""


class EmptyQueryError(ForgeError):
    """Prompt assembly received an empty query annotation."""


# --- gateway ---


class ConfigError(ForgeError):
    """Invalid gateway or pipeline configuration."""


class TransportError(ForgeError):
    """Network-level failure talking to the completion endpoint."""

    def __init__(self, message: str, input_tokens: int = 0, output_tokens: int = 0):
        super().__init__(message)
        # tokens the transport reports as consumed by the failed attempt
        self.input_tokens = input_tokens
        self.output_tokens = output_tokens


class RateLimitedError(TransportError):
    """Endpoint asked us to back off; may carry a server-provided delay."""

    def __init__(self, message: str, retry_after: float | None = None, **kw):
        super().__init__(message, **kw)
        self.retry_after = retry_after


class MalformedResponseError(ForgeError):
    """Endpoint returned a payload that does not match the wire contract."""


class NegativeInputError(ForgeError):
    """Cost arithmetic received a negative token count or rate."""


# --- response parsing ---


class NoPairsFoundError(ForgeError):
    """Completion contained no recognizable question/answer pairs."""


class DanglingQuestionError(ForgeError):
    """Completion ended with a question that has no answer."""


class LabelMismatchError(ForgeError):
    """Question/answer labels out of order or unexpected for the schema."""


class RuleLoadError(ForgeError):
    """Safety rule set could not be loaded."""


# --- cold start ---


class UnknownCandidateError(ForgeError):
    """Decision referenced a candidate that does not exist."""


class DoubleDecisionError(ForgeError):
    """Conflicting decision for a candidate that was already decided."""


# --- translation ---


class PlaceholderLostError(ForgeError):
    """A protected marker did not survive translation byte-identically."""


# --- stats ---


class ParserUnavailableError(ForgeError):
    """The configured dependency-parse provider cannot be used."""


# --- pipeline ---


class MissingPrerequisiteError(ForgeError):
    """A stage ran before the artifact it depends on exists."""

    def __init__(self, artifact: str):
        super().__init__(f"missing prerequisite: {artifact}")
        self.artifact = artifact
