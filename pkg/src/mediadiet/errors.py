"""Exception hierarchy shared across the toolkit."""


class MediaDietError(Exception):
    """Base class for all toolkit errors."""


class MalformedRecordError(MediaDietError):
    """A document/record failed to parse; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class EmptyDatasetError(MediaDietError):
    """An operation that requires a non-empty dataset received an empty one."""


class PromptFormatError(MediaDietError):
    """A prompt violates the one-blank / distinct-target contract."""


class MultiTokenCandidateError(MediaDietError):
    """A cloze candidate did not tokenize to a single token."""


class HeadWordOOVError(MediaDietError):
    """The head target word is outside the backend vocabulary."""


class DegenerateDenominatorError(MediaDietError):
    """Base-model probability at or below the floor; the score ratio is meaningless."""


class BackendUnavailableError(MediaDietError):
    """Remote backend unreachable after retries. Retriable."""


class BackendProtocolError(MediaDietError):
    """Backend returned a malformed or contract-violating response. Not retriable."""


class ReplayMissError(MediaDietError):
    """Replay cache has no entry for the request."""


class MixedProvenanceError(MediaDietError):
    """A score table mixes model tags that must be uniform."""


class UnmatchedKeysError(MediaDietError):
    """Score rows without a matching survey proportion; lists every missing key."""

    def __init__(self, keys):
        self.keys = list(keys)
        shown = ", ".join(repr(k) for k in self.keys[:20])
        more = "" if len(self.keys) <= 20 else f" (+{len(self.keys) - 20} more)"
        super().__init__(f"{len(self.keys)} unmatched score keys: {shown}{more}")


class MisalignedJoinError(MediaDietError):
    """Score model window does not precede the survey field date."""


class CoverageMismatchError(MediaDietError):
    """Two tables that must cover the same keys do not."""


class ZeroVarianceError(MediaDietError):
    """Correlation undefined: one of the inputs has zero variance."""


class TooFewRowsError(MediaDietError):
    """Not enough rows for the requested fit."""


class ConfigError(MediaDietError):
    """Pipeline configuration invalid; carries the offending field name."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


class StageDependencyError(MediaDietError):
    """A pipeline stage is missing an artifact a previous stage should have produced."""
