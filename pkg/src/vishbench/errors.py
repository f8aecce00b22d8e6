"""Exception hierarchy shared across the harness."""


class VishbenchError(Exception):
    """Base class for all harness errors."""


class ConfigError(VishbenchError):
    pass


class CorpusError(VishbenchError):
    pass


class MissingTokensError(CorpusError):
    pass


class FitError(VishbenchError):
    pass


class TrainingError(VishbenchError):
    pass


class ShapeError(VishbenchError, ValueError):
    pass


class MetricError(VishbenchError):
    pass


class RocError(MetricError):
    pass


class NoInformationError(VishbenchError):
    """Raised when every paired difference is zero."""


class InsufficientDataError(VishbenchError):
    pass


class TemplateError(VishbenchError):
    pass


class PromptInputError(VishbenchError):
    pass


class GenerationError(VishbenchError):
    """Transport or HTTP failure that survived every retry."""


class ProtocolError(VishbenchError):
    """The backend answered with a body we cannot interpret."""


class UndefinedScoreError(VishbenchError):
    pass


class ProviderError(VishbenchError):
    pass


class AlignmentError(VishbenchError):
    pass


class PhaseError(VishbenchError):
    def __init__(self, phase: str, cause: BaseException):
        super().__init__(f"[{phase}] {type(cause).__name__}: {cause}")
        self.phase = phase
        self.cause = cause
