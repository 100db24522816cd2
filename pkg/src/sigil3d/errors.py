"""Structured service errors with stable machine codes.

Every failure that can cross a module or wire boundary is a ``ServiceError``
carrying a stable ``code`` string. The HTTP layer maps codes to status codes
via ``http_status``; everything else treats them as opaque identifiers.
"""

from __future__ import annotations

from typing import Any, Sequence


class ServiceError(Exception):
    """An operation failure with a stable machine-readable code."""

    def __init__(
        self,
        code: str,
        message: str,
        violations: Sequence[Any] | None = None,
    ) -> None:
        super().__init__(message)
        self.code = code
        self.message = message
        self.violations = list(violations) if violations is not None else None

    def to_envelope(self) -> dict[str, Any]:
        error: dict[str, Any] = {"code": self.code, "message": self.message}
        if self.violations is not None:
            error["violations"] = [
                v.to_dict() if hasattr(v, "to_dict") else v for v in self.violations
            ]
        return {"error": error}

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"ServiceError({self.code!r}, {self.message!r})"


_STATUS_BY_CODE = {
    "MALFORMED_REQUEST": 400,
    "UNAUTHENTICATED": 401,
    "INVALID_CREDENTIALS": 401,
    "FORBIDDEN": 403,
    "NOT_FOUND": 404,
    "UNKNOWN_BLOCK": 404,
    "UNKNOWN_MAP": 404,
    "UNKNOWN_VERSION": 404,
    "UNKNOWN_LOCK": 404,
    "UNKNOWN_BLOB": 404,
    "UNKNOWN_USER": 404,
    "METHOD_NOT_ALLOWED": 405,
    "LOCK_HELD": 409,
    "LOCK_EXPIRED": 409,
    "NOT_HOLDER": 409,
    "WRONG_BLOCK": 409,
    "STALE_BASE": 409,
    "ALREADY_DECIDED": 409,
    "HASH_MISMATCH": 409,
    "USERNAME_TAKEN": 409,
    "BLOB_TOO_LARGE": 413,
    "REQUEST_TOO_LARGE": 413,
    "VALIDATION_FAILED": 422,
    "BAD_PATH": 422,
    "TTL_TOO_LONG": 422,
    "WEAK_PASSWORD": 422,
    "STRUCTURAL_INVALID": 422,
    "CORRUPT_BLOB": 503,
    "STORAGE_FAILURE": 503,
}


def http_status(code: str) -> int:
    """Map a service error code to its HTTP status (500 for unknown codes)."""
    return _STATUS_BY_CODE.get(code, 500)
