"""Exception hierarchy shared across the toolkit.

Two families matter to callers: :class:`UsageError` covers configuration and
input problems (the CLI maps these to exit code 2), everything else derived
from :class:`CotktError` is a pipeline failure (exit code 1).
"""

from __future__ import annotations


class CotktError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class UsageError(CotktError):
    """Bad configuration, arguments, or input files."""

    exit_code = 2


class ConfigError(UsageError):
    """The run config file is missing, unreadable, or inconsistent."""


class FileMissing(UsageError, FileNotFoundError):
    """A referenced input file does not exist."""


class MalformedRow(UsageError):
    """A dataset or predictions row could not be interpreted."""

    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


class UnknownLabel(MalformedRow):
    """A gold label survived the label map without becoming a valid option."""

    def __init__(self, line_number: int, raw_value: str):
        super().__init__(line_number, f"unmappable label {raw_value!r}")
        self.raw_value = raw_value


class UnknownKey(UsageError):
    """A training-manifest override names a field that does not exist."""


class NTooLarge(CotktError):
    """A sample size exceeds the available item count (or is negative)."""


class SizeTooLarge(CotktError):
    """A sweep subset size exceeds the available example count."""


class BackendError(CotktError):
    """A completion request failed for a non-auth, non-rate-limit reason."""


class AuthFailed(BackendError):
    """The endpoint rejected the configured credential."""


class RateLimited(BackendError):
    """The endpoint kept rate-limiting after the retry budget ran out."""


class MalformedResponse(BackendError):
    """The endpoint replied with JSON the chat-completions schema rejects."""


class ReplayMiss(BackendError):
    """A replay fixture holds no reply for the requested fingerprint."""

    def __init__(self, fingerprint: str):
        super().__init__(f"no recorded reply for fingerprint {fingerprint}")
        self.fingerprint = fingerprint


class MismatchedItem(CotktError):
    """A CoT record was paired with an item it does not belong to."""


class IncorrectCot(CotktError):
    """A CoT that answered wrongly was offered as training material."""


class EmptyTrainingSet(CotktError):
    """No correct CoTs are available to build training data from."""


class MissingPredictions(CotktError):
    """A sweep point has no predictions file attached."""

    def __init__(self, size: int):
        super().__init__(f"no predictions supplied for sweep size {size}")
        self.size = size


class StaleTrainFile(CotktError):
    """A training file changed after the sweep state recorded its hash."""


class EmptyInput(CotktError):
    """A metric was asked to summarize zero usable records."""


class BadThreshold(CotktError):
    """An overconfidence threshold fell outside [0, 1]."""


class BadBinCount(CotktError):
    """A bin count must be a positive integer."""
