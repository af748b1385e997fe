"""Exception types shared across the package."""

from __future__ import annotations


class ProbeSqlError(Exception):
    """Base class for all package errors."""


# --- dataset / catalog ---

class MissingFile(ProbeSqlError):
    pass


class MalformedRecord(ProbeSqlError):
    def __init__(self, index: int, field: str, detail: str = ""):
        self.index = index
        self.field = field
        msg = f"record {index}: bad or missing field {field!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class UnreadableDatabase(ProbeSqlError):
    pass


# --- sql parsing / surgery ---

class SqlSyntaxError(ProbeSqlError):
    """Parse failure with the character position of the offending token."""

    def __init__(self, position: int, message: str):
        self.position = position
        self.message = message
        super().__init__(f"at position {position}: {message}")


class WouldEmptySelectList(ProbeSqlError):
    pass


class UnknownColumn(ProbeSqlError):
    pass


# --- execution ---

class NotCanonicalizable(ProbeSqlError):
    pass


# --- llm client ---

class UnknownTemplate(ProbeSqlError):
    pass


class MissingBinding(ProbeSqlError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"template binding {name!r} is not bound")


class EndpointError(ProbeSqlError):
    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body
        super().__init__(f"endpoint returned {status}: {body[:200]}")


class ReplayMiss(ProbeSqlError):
    def __init__(self, fingerprint: str, template_id: str = ""):
        self.fingerprint = fingerprint
        self.template_id = template_id
        super().__init__(f"no recorded completion for fingerprint {fingerprint} ({template_id})")


class ParseFailure(ProbeSqlError):
    """Structured-output parsing failed; carries the raw completion for retries."""

    def __init__(self, raw: str, reason: str = ""):
        self.raw = raw
        self.reason = reason
        super().__init__(reason or "could not parse completion")


# --- pipeline ---

class EscalateToFullSchema(ProbeSqlError):
    """No target candidates survived linking; caller should re-link with the full schema."""


class AllUnparseable(ProbeSqlError):
    """Every sampled completion failed SQL extraction."""
