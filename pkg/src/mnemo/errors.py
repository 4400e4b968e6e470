"""Exception hierarchy for mnemo.

Every error raised on purpose by the library derives from :class:`MnemoError`
so callers (and the CLI) can catch one type.
"""

from __future__ import annotations


class MnemoError(Exception):
    """Base class for all library errors."""


# core
class InvalidGeometry(MnemoError, ValueError):
    pass


class MissingField(MnemoError, ValueError):
    def __init__(self, field: str, kind: str | None = None):
        self.field = field
        self.kind = kind
        where = f" for {kind}" if kind else ""
        super().__init__(f"missing required field '{field}'{where}")


class InvalidTrajectory(MnemoError, ValueError):
    pass


# embeddings
class EmptyInput(MnemoError, ValueError):
    pass


class DimensionMismatch(MnemoError, ValueError):
    pass


class RemoteUnavailable(MnemoError, RuntimeError):
    pass


# memory
class NonMonotonicStep(MnemoError, ValueError):
    pass


class DuplicateEntry(MnemoError, ValueError):
    pass


class EmptyTrajectory(MnemoError, ValueError):
    pass


class InvalidLambda(MnemoError, ValueError):
    pass


class CorruptStore(MnemoError):
    pass


class VersionMismatch(MnemoError):
    pass


# action parser
class ParseError(MnemoError, ValueError):
    """Any failure to parse agent output."""


class MissingTag(ParseError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"missing or out-of-order tag <{name}>")


class MalformedAnswer(ParseError):
    pass


class InvalidAction(ParseError):
    pass


# rewards
class InconsistentGroundTruth(MnemoError, ValueError):
    pass


# optimizer
class EmptySequence(MnemoError, ValueError):
    pass


class OutOfRange(MnemoError, ValueError):
    pass


class LengthMismatch(MnemoError, ValueError):
    pass


# hindsight
class InsufficientPool(MnemoError, ValueError):
    pass


# simulator
class UnknownTask(MnemoError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else "unknown task"


class EpisodeFinished(MnemoError, RuntimeError):
    pass


class PolicyOutputUnparseable(MnemoError):
    pass


# fixtures / config
class UnknownFixture(MnemoError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown fixture"


class ChecksumMismatch(MnemoError):
    pass


class ConfigError(MnemoError, ValueError):
    pass


class UnexpectedField(MnemoError, ValueError):
    def __init__(self, field: str, kind: str):
        self.field = field
        self.kind = kind
        super().__init__(f"{kind} actions must not carry '{field}'")


class UsageError(MnemoError):
    """Unknown subcommand or flag, or a bad flag value."""
