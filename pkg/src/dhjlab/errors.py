"""Exceptions shared across dhjlab modules."""

from __future__ import annotations


class DhjlabError(Exception):
    """Base class for all package-specific errors."""


class EmptyConditionError(DhjlabError):
    """Conditioning event has probability zero."""


class FallbackToSamplingError(DhjlabError):
    """Exact enumeration refused: the support template count exceeds the budget."""

    def __init__(self, message: str, template_count: int):
        super().__init__(message)
        self.template_count = template_count


class BucketShortfallError(DhjlabError):
    """Not enough phase vectors fall into common cells to fill the requested groups.

    Carries the achievable group layout so callers can retry.
    """

    def __init__(self, requested_count: int, requested_size: int,
                 achievable_count: int, achievable_size: int):
        super().__init__(
            f"cannot form {requested_count} groups of size {requested_size}; "
            f"achievable: {achievable_count} groups of size {achievable_size}"
        )
        self.requested_count = requested_count
        self.requested_size = requested_size
        self.achievable_count = achievable_count
        self.achievable_size = achievable_size


class NoKError(DhjlabError):
    """No multiplier k within range brings the phase vector near the integer lattice.

    Carries the scanned (k, distance) certificate.
    """

    def __init__(self, k_max: int, eps, scan):
        super().__init__(f"no k <= {k_max} achieves max-norm <= {eps}")
        self.k_max = k_max
        self.eps = eps
        self.scan = list(scan)
