"""Exception hierarchy for the stress engine.

Every error carries a machine-readable ``code`` (its class name) so the CLI
and HTTP layers can serialize failures uniformly.
"""


class StressEngineError(Exception):
    """Base class for all engine errors."""

    @property
    def code(self) -> str:
        return type(self).__name__

    def payload(self) -> dict:
        return {"error": self.code, "message": str(self)}


# signal-core
class MalformedManifest(StressEngineError):
    pass


class ChannelMismatch(StressEngineError):
    pass


class IntervalOutOfBounds(StressEngineError):
    pass


class WindowTooLong(StressEngineError):
    pass


# tcn-classifier
class ShapeMismatch(StressEngineError):
    pass


class UnknownSubject(StressEngineError):
    pass


class NonFiniteLoss(StressEngineError):
    def __init__(self, message: str, epoch: int, batch: int):
        super().__init__(f"{message} (epoch {epoch}, batch {batch})")
        self.epoch = epoch
        self.batch = batch


# eval-harness
class EmptyLog(StressEngineError):
    pass


class EmptyMatrix(StressEngineError):
    pass


class UnknownClass(StressEngineError):
    pass


class TooFewSamples(StressEngineError):
    pass


class TooFewSubjects(StressEngineError):
    pass


# causal-fusion
class DuplicateNodeId(StressEngineError):
    pass


class MisalignedLogs(StressEngineError):
    pass


class NegativeSmoothing(StressEngineError):
    pass


class ImpossibleEvidence(StressEngineError):
    pass


class UnknownNode(StressEngineError):
    pass


class UnknownState(StressEngineError):
    pass


class StateSpaceTooLarge(StressEngineError):
    pass


class AllZeroWeights(StressEngineError):
    pass


# sem-path
class NotPositiveDefinite(StressEngineError):
    pass


class NoConvergence(StressEngineError):
    def __init__(self, message: str, iterations: int):
        super().__init__(message)
        self.iterations = iterations


class BoundaryVariance(StressEngineError):
    pass


class NonpositiveSE(StressEngineError):
    pass


class UnconvergedFit(StressEngineError):
    pass


# service-cli
class InvalidConfig(StressEngineError):
    pass


class MissingArtifact(StressEngineError):
    pass


class InvalidNetworkFile(StressEngineError):
    pass


class BindFailure(StressEngineError):
    pass
