"""Exception hierarchy shared across the package."""

from __future__ import annotations


class KnockoutEvalError(Exception):
    """Base class for all package errors."""


class ValidationError(KnockoutEvalError, ValueError):
    """A domain object was constructed with values violating its invariants."""


class UnknownAnswer(KnockoutEvalError, KeyError):
    pass


class TooFewAnswers(KnockoutEvalError, ValueError):
    pass


class TemplateMismatch(KnockoutEvalError, ValueError):
    """Pairwise template used without a second answer, or vice versa."""


class MissingLatentQuality(KnockoutEvalError, ValueError):
    pass


class TransportError(KnockoutEvalError):
    """The remote judge could not be reached after all retries."""


class EndpointRejected(KnockoutEvalError):
    def __init__(self, status_code: int, body: str):
        super().__init__(f"endpoint rejected request with HTTP {status_code}: {body[:500]}")
        self.status_code = status_code
        self.body = body


class ScoreParseError(KnockoutEvalError, ValueError):
    """Judge text could not be turned into valid scores."""


class NoScoreFound(ScoreParseError):
    pass


class ScoreOutOfRange(ScoreParseError):
    def __init__(self, found_value: float, max_points: float):
        super().__init__(f"score {found_value} outside [0, {max_points}]")
        self.found_value = found_value
        self.max_points = max_points


class UnscorableResponse(KnockoutEvalError):
    """Every attempt to obtain a parseable judge response failed.

    ``raw_texts`` holds the text of each attempt. The tournament engine may
    attach the partially built result as ``partial_result``.
    """

    def __init__(self, raw_texts: list[str], last_error: Exception | None = None):
        msg = f"no parseable judge response after {len(raw_texts)} attempt(s)"
        if last_error is not None:
            msg += f": {last_error}"
        super().__init__(msg)
        self.raw_texts = list(raw_texts)
        self.last_error = last_error
        self.partial_result = None


class DegenerateInput(KnockoutEvalError, ValueError):
    """Metric undefined for the given input (too short, zero variance, ...)."""


class MissingLabel(KnockoutEvalError, ValueError):
    pass


class SchemaError(KnockoutEvalError, ValueError):
    def __init__(self, message: str, *, field: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.field = field
        self.line = line


class DuplicateAnswerId(SchemaError):
    pass


class EmptyAfterFiltering(KnockoutEvalError, ValueError):
    pass


class CacheIoError(KnockoutEvalError, OSError):
    pass


class IdMismatch(KnockoutEvalError, ValueError):
    def __init__(self, orphans: list[tuple[str, str]]):
        shown = ", ".join(f"{i}/{a}" for i, a in orphans[:20])
        more = "" if len(orphans) <= 20 else f" (+{len(orphans) - 20} more)"
        super().__init__(f"results reference answers missing from dataset: {shown}{more}")
        self.orphans = orphans
