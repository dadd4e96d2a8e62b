"""Domain error hierarchy.

Every error that can cross the API boundary carries a stable ``machine_code``
so clients can branch on it without parsing messages. The HTTP layer maps
``http_status`` directly; library users just catch :class:`DomainError`.
"""

from __future__ import annotations


class DomainError(Exception):
    """Base class for all domain-level failures."""

    http_status = 422

    def __init__(self, machine_code: str, message: str):
        super().__init__(message)
        self.machine_code = machine_code
        self.message = message

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.machine_code!r}, {self.message!r})"


class ValidationFailure(DomainError):
    """Input violates a field or ordering invariant."""

    http_status = 422


class NotFound(DomainError):
    """Referenced entity does not exist."""

    http_status = 404


class Conflict(DomainError):
    """Operation would violate a serialization or uniqueness rule."""

    http_status = 409
