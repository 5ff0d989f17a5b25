"""Shared exception types."""


class PreconditionError(ValueError):
    """An operation was called outside the hypotheses it needs."""


class ResourceLimitError(RuntimeError):
    """A guard on problem size tripped before the computation started."""
