"""
Errors
------

The exception and warning hierarchy used throughout greenlens.

Every error derives from :class:`GreenlensError`. Errors that describe a bad input value also
derive from ``ValueError`` so callers that only know about builtin exceptions can still catch
them.
"""

import typing as t


class GreenlensError(Exception):
    """Base class for all greenlens errors."""


class ConfigError(GreenlensError, ValueError):
    """Raised when a pipeline configuration is invalid."""


class MissingArtifact(GreenlensError):
    """Raised when a pipeline stage is run before the stage that produces its inputs."""

    def __init__(self, artifact: str, stage: str, path: t.Optional[str] = None):
        self.artifact = artifact
        self.stage = stage
        self.path = path
        where = f" at {path}" if path else ""
        super().__init__(f"missing {artifact}{where}; run the {stage!r} stage first")


# Corpus and segmentation


class MalformedDocument(GreenlensError, ValueError):
    """Raised when a report's text cannot be decoded."""


class DictionaryLoadError(GreenlensError):
    """Raised when a segmenter dictionary or stopword list cannot be loaded."""


# LLM gateway


class PayloadMismatch(GreenlensError, TypeError):
    """Raised when a prompt payload does not match the template layer."""


class MalformedAnswer(GreenlensError, ValueError):
    """Raised when a model answer does not follow the JSON answer schema."""


class OutOfRange(MalformedAnswer):
    """Raised when a well-formed answer carries an out-of-range judgment or confidence."""


class FixtureMissing(GreenlensError, KeyError):
    """Raised when a mock backend has no scripted response for a request."""

    def __str__(self) -> str:
        return Exception.__str__(self)


class TransportError(GreenlensError):
    """Raised by backends when a request fails before an answer is received."""


class BatchAborted(GreenlensError):
    """Raised when a batch cannot start because of a configuration problem."""


# Judgment layers and validation


class MissingLabels(GreenlensError, KeyError):
    """Raised when human labels do not cover the evaluated items."""

    def __init__(self, missing: t.Iterable[t.Any]):
        self.missing = sorted(str(item) for item in missing)
        preview = ", ".join(self.missing[:5])
        more = "" if len(self.missing) <= 5 else f" (+{len(self.missing) - 5} more)"
        super().__init__(f"no label for {len(self.missing)} item(s): {preview}{more}")

    def __str__(self) -> str:
        return Exception.__str__(self)


class DuplicatePair(GreenlensError, ValueError):
    """Raised when more than one verdict is given for the same pair."""


class MixedArms(GreenlensError, ValueError):
    """Raised when verdicts from different ablation arms are counted together."""


class EmptyConfusion(GreenlensError, ValueError):
    """Raised when a metric is requested for an all-zero confusion table."""


class PlanInfeasible(GreenlensError, ValueError):
    """Raised when a sampling plan asks for more items than the population holds."""


# Indicators


class NegativeCount(GreenlensError, ValueError):
    """Raised when a disclosure count is negative."""


class EmptyGroup(GreenlensError, ValueError):
    """Raised when group means are requested for no indicators."""


class GroupMismatch(GreenlensError, ValueError):
    """Raised when an indicator is compared against another group's means."""


# Econometrics


class EstimationError(GreenlensError):
    """Base class for estimation failures."""


class RankDeficient(EstimationError, ValueError):
    """Raised when the regressor of interest is collinear with the rest of the design."""


class EmptyAfterFilter(EstimationError, ValueError):
    """Raised when no rows remain after filtering and listwise deletion."""


class NotBinary(EstimationError, ValueError):
    """Raised when a binary variable is required but other values are present."""


class NonCountDependent(EstimationError, ValueError):
    """Raised when a count model is given a dependent variable that is not a nonnegative integer."""


class NoLag(EstimationError, ValueError):
    """Raised when lagged values cannot be formed for an instrument."""


class InsufficientControls(EstimationError, ValueError):
    """Raised when matching has fewer control units than treated units."""


class ConvergenceError(EstimationError):
    """Raised when an optimizer fails to converge."""

    def __init__(self, message: str, *, iterations: int = 0, diagnosis: str = ""):
        self.iterations = iterations
        self.diagnosis = diagnosis
        super().__init__(message)


class SeparationError(ConvergenceError):
    """Raised when a binary-response likelihood has no finite maximum."""


class PlaceboAborted(EstimationError):
    """Raised when too many placebo refits fail to converge."""

    def __init__(self, message: str, *, failures: int, replications: int):
        self.failures = failures
        self.replications = replications
        super().__init__(message)


# Warnings


class GreenlensWarning(UserWarning):
    """Base class for greenlens warnings."""


class AmbiguousSectionWarning(GreenlensWarning):
    """Emitted when a report holds more than one environmental section."""


class WeakInstrumentWarning(GreenlensWarning):
    """Emitted when the first-stage F statistic is below the rule-of-thumb threshold."""
