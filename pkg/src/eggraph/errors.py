"""Exception hierarchy shared across the package."""


class EggError(Exception):
    """Base class for all errors raised by this package."""


class InvariantViolationError(EggError):
    """A value or operation would break a structural invariant."""


class DuplicateIdError(EggError):
    """A node id is already present in the graph."""


class UnknownSpatialIdError(EggError):
    """A referenced spatial node does not exist (or has the wrong layer)."""


class UnknownLocationIdError(UnknownSpatialIdError):
    """A referenced location is not a spatial node of the queried subgraph."""


class UnknownEventIdError(EggError):
    """A referenced event node does not exist."""


class SnapshotOutsideIntervalError(EggError):
    """A grounding snapshot lies outside its event's time interval."""


class EmptyInputSetError(EggError):
    """Relevance merging is undefined for an empty input set."""


class InvalidGraphError(EggError):
    """A graph failed integrity validation.

    Carries the offending findings so callers can report them.
    """

    def __init__(self, message: str, findings: list | None = None):
        super().__init__(message)
        self.findings = list(findings or [])


class GraphFormatError(EggError):
    """Malformed or schema-violating serialized input.

    ``location`` points at the offending line (JSONL) or field path (JSON).
    """

    def __init__(self, message: str, location: str | None = None):
        super().__init__(message if location is None else f"{location}: {message}")
        self.location = location


class InfeasibleParamsError(EggError):
    """Scenario generation parameters that cannot be satisfied."""


class TransportError(EggError):
    """A remote agent call failed after retries."""


class ReplayMissError(TransportError):
    """No recorded response exists for a request in replay mode."""


class ExtractionFailedError(EggError):
    """Relevance extraction produced no usable output."""


class GenerationFailedError(EggError):
    """Answer generation produced no usable output."""


class JudgeFailedError(EggError):
    """Answer judging produced no usable score."""


class ModalityViolationError(EggError):
    """An answer payload does not fit the query's answer modality."""
