"""Exception types shared across the harness."""

from __future__ import annotations


class HarnessError(Exception):
    """Base class for all harness errors."""


class RecordError(HarnessError):
    """A dataset record failed validation.

    Carries enough context (record index, offending field) for the error
    message to point at the exact line in the input file.
    """

    def __init__(self, message: str, *, index: int | None = None, field: str | None = None):
        where = []
        if index is not None:
            where.append(f"record {index}")
        if field is not None:
            where.append(f"field {field!r}")
        full = f"{', '.join(where)}: {message}" if where else message
        super().__init__(full)
        self.index = index
        self.field = field


class DecompositionError(HarnessError):
    """A raw example could not be decomposed into two hops."""

    def __init__(self, message: str, *, example_id: str | None = None):
        full = f"example {example_id}: {message}" if example_id else message
        super().__init__(full)
        self.example_id = example_id


class SparqlError(HarnessError):
    """SPARQL parsing or analysis failure, with a byte offset when known."""

    def __init__(self, message: str, *, offset: int | None = None):
        full = f"{message} (at byte offset {offset})" if offset is not None else message
        super().__init__(full)
        self.offset = offset


class ContextError(HarnessError):
    """No usable pseudo-gold or negative passage for a question."""

    def __init__(self, message: str, *, qid: str | None = None):
        full = f"{qid}: {message}" if qid else message
        super().__init__(full)
        self.qid = qid


class BackendError(HarnessError):
    """A generation backend failed; carries the ids that got no answer."""

    def __init__(self, message: str, *, failed_ids: tuple[str, ...] = ()):
        super().__init__(message)
        self.failed_ids = tuple(failed_ids)
