"""Domain types shared by every other module: accounts, sessions, blocks,
maps, placements, versions, asset manifests, locks, and sync deltas.

All types are immutable values; validation helpers are pure functions.
Parsing via ``from_dict`` is strict: unknown enum variants, malformed
identifiers, and invariant violations raise ``ServiceError`` with code
``MALFORMED_REQUEST`` naming the offending field. Lenient, exhaustive
validation of untrusted manifests (collecting every problem instead of
failing on the first) lives in :mod:`sigil3d.validation`.
"""

from __future__ import annotations

import json
import math
import re
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Mapping, NoReturn

from .errors import ServiceError

USERNAME_RE = re.compile(r"^[a-z0-9_]{3,32}$")
ASSET_ID_RE = re.compile(r"^[a-z0-9_\-]{1,64}$")
SHA256_RE = re.compile(r"^[0-9a-f]{64}$")
TOKEN_RE = re.compile(r"^[A-Za-z0-9_\-]{43}$")
UUID4_RE = re.compile(
    r"^[0-9a-f]{8}-[0-9a-f]{4}-4[0-9a-f]{3}-[89ab][0-9a-f]{3}-[0-9a-f]{12}$"
)

MANIFEST_SCHEMA_VERSION = 1
MAX_ASSETS_PER_MANIFEST = 1024
MAX_PATH_BYTES = 240
ROTATION_NORM_TOLERANCE = 1e-6


def new_id() -> str:
    """Fresh UUIDv4 string; collision-free creation without coordination."""
    return str(uuid.uuid4())


def is_uuid(value: str) -> bool:
    return isinstance(value, str) and UUID4_RE.fullmatch(value) is not None


def format_timestamp(ts: datetime) -> str:
    """RFC 3339 UTC with ``Z`` suffix and fixed microsecond precision."""
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def parse_timestamp(raw: str, path: str = "timestamp") -> datetime:
    if not isinstance(raw, str):
        _fail(path, f"expected RFC 3339 string, got {type(raw).__name__}")
    text = raw[:-1] + "+00:00" if raw.endswith("Z") else raw
    try:
        ts = datetime.fromisoformat(text)
    except ValueError:
        _fail(path, f"invalid RFC 3339 timestamp: {raw!r}")
    if ts.tzinfo is None:
        _fail(path, "timestamp must carry a UTC offset")
    return ts.astimezone(timezone.utc)


def _fail(path: str, message: str) -> NoReturn:
    raise ServiceError("MALFORMED_REQUEST", f"{path}: {message}")


def _req(data: Mapping[str, Any], key: str, path: str) -> Any:
    if key not in data:
        _fail(path, f"missing required field {key!r}")
    return data[key]


def _as_str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        _fail(path, f"expected string, got {type(value).__name__}")
    return value


def _as_int(value: Any, path: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, f"expected integer, got {type(value).__name__}")
    if minimum is not None and value < minimum:
        _fail(path, f"must be >= {minimum}")
    return value


def _as_uuid(value: Any, path: str) -> str:
    text = _as_str(value, path)
    if not UUID4_RE.fullmatch(text):
        _fail(path, f"not a UUIDv4 string: {text!r}")
    return text

def _as_optional_uuid(value: Any, path: str) -> str | None:
    if value is None:
        return None
    return _as_uuid(value, path)


def _as_name(value: Any, path: str) -> str:
    text = _as_str(value, path)
    if not 1 <= len(text) <= 64:
        _fail(path, "must be 1-64 characters")
    return text


def _as_float_triple(value: Any, path: str) -> tuple[float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        _fail(path, "expected a list of 3 numbers")
    out = []
    for i, item in enumerate(value):
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            _fail(f"{path}[{i}]", "expected a number")
        out.append(float(item))
    return (out[0], out[1], out[2])


def _enum(enum_type: type, value: Any, path: str) -> Any:
    if isinstance(value, enum_type):
        return value
    if not isinstance(value, str):
        _fail(path, f"expected string, got {type(value).__name__}")
    try:
        return enum_type(value)
    except ValueError:
        allowed = ", ".join(member.value for member in enum_type)
        _fail(path, f"unknown value {value!r}; expected one of: {allowed}")


class Role(str, Enum):
    """The three account roles. Visitors browse, editors modify block
    content, administrators additionally build maps and moderate versions."""

    VISITOR = "visitor"
    EDITOR = "editor"
    ADMINISTRATOR = "administrator"


class VersionState(str, Enum):
    """Lifecycle of a submitted version. ``pending`` may move to ``approved``
    or ``rejected``; both of those are terminal."""

    PENDING = "pending"
    APPROVED = "approved"
    REJECTED = "rejected"


class AssetKind(str, Enum):
    STATIC_MESH = "static_mesh"
    TEXTURE = "texture"
    ANIMATION = "animation"
    BLUEPRINT = "blueprint"


ASSET_KIND_VALUES = frozenset(kind.value for kind in AssetKind)


def validate_username(name: str) -> bool:
    """True iff ``name`` is 3-32 lowercase letters, digits, or underscores."""
    return isinstance(name, str) and USERNAME_RE.fullmatch(name) is not None


def is_safe_path(path: str) -> bool:
    """True iff ``path`` is a canonical, workspace-relative asset path.

    Canonical means forward slashes only, no ``.`` / ``..`` / empty segments,
    no leading slash, no backslash, no NUL, and at most 240 UTF-8 bytes.
    """
    if not isinstance(path, str) or not path:
        return False
    if "\\" in path or "\x00" in path or path.startswith("/"):
        return False
    if len(path.encode("utf-8")) > MAX_PATH_BYTES:
        return False
    return all(seg not in ("", ".", "..") for seg in path.split("/"))


@dataclass(frozen=True)
class UserAccount:
    user_id: str
    username: str
    password_digest: str
    role: Role
    created_at: datetime

    def to_dict(self) -> dict[str, Any]:
        return {
            "user_id": self.user_id,
            "username": self.username,
            "password_digest": self.password_digest,
            "role": self.role.value,
            "created_at": format_timestamp(self.created_at),
        }

    def to_public_dict(self) -> dict[str, Any]:
        """Wire form; never exposes the password digest."""
        return {
            "user_id": self.user_id,
            "username": self.username,
            "role": self.role.value,
            "created_at": format_timestamp(self.created_at),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], path: str = "UserAccount") -> "UserAccount":
        username = _as_str(_req(data, "username", path), f"{path}.username")
        if not validate_username(username):
            _fail(f"{path}.username", f"invalid username {username!r}")
        return cls(
            user_id=_as_uuid(_req(data, "user_id", path), f"{path}.user_id"),
            username=username,
            password_digest=_as_str(_req(data, "password_digest", path), f"{path}.password_digest"),
            role=_enum(Role, _req(data, "role", path), f"{path}.role"),
            created_at=parse_timestamp(_req(data, "created_at", path), f"{path}.created_at"),
        )


@dataclass(frozen=True)
class SessionToken:
    token: str
    user_id: str
    issued_at: datetime
    expires_at: datetime

    def to_dict(self) -> dict[str, Any]:
        return {
            "token": self.token,
            "user_id": self.user_id,
            "issued_at": format_timestamp(self.issued_at),
            "expires_at": format_timestamp(self.expires_at),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], path: str = "SessionToken") -> "SessionToken":
        token = _as_str(_req(data, "token", path), f"{path}.token")
        if not TOKEN_RE.fullmatch(token):
            _fail(f"{path}.token", "expected 43 base64url characters")
        issued_at = parse_timestamp(_req(data, "issued_at", path), f"{path}.issued_at")
        expires_at = parse_timestamp(_req(data, "expires_at", path), f"{path}.expires_at")
        if expires_at <= issued_at:
            _fail(f"{path}.expires_at", "must be after issued_at")
        return cls(
            token=token,
            user_id=_as_uuid(_req(data, "user_id", path), f"{path}.user_id"),
            issued_at=issued_at,
            expires_at=expires_at,
        )


@dataclass(frozen=True)
class BlockRecord:
    block_id: str
    name: str
    head_version: str | None
    created_by: str
    created_at: datetime

    def to_dict(self) -> dict[str, Any]:
        return {
            "block_id": self.block_id,
            "name": self.name,
            "head_version": self.head_version,
            "created_by": self.created_by,
            "created_at": format_timestamp(self.created_at),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], path: str = "BlockRecord") -> "BlockRecord":
        return cls(
            block_id=_as_uuid(_req(data, "block_id", path), f"{path}.block_id"),
            name=_as_name(_req(data, "name", path), f"{path}.name"),
            head_version=_as_optional_uuid(data.get("head_version"), f"{path}.head_version"),
            created_by=_as_uuid(_req(data, "created_by", path), f"{path}.created_by"),
            created_at=parse_timestamp(_req(data, "created_at", path), f"{path}.created_at"),
        )


@dataclass(frozen=True)
class MapRecord:
    map_id: str
    name: str
    head_version: str | None
    created_by: str
    created_at: datetime

    def to_dict(self) -> dict[str, Any]:
        return {
            "map_id": self.map_id,
            "name": self.name,
            "head_version": self.head_version,
            "created_by": self.created_by,
            "created_at": format_timestamp(self.created_at),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], path: str = "MapRecord") -> "MapRecord":
        return cls(
            map_id=_as_uuid(_req(data, "map_id", path), f"{path}.map_id"),
            name=_as_name(_req(data, "name", path), f"{path}.name"),
            head_version=_as_optional_uuid(data.get("head_version"), f"{path}.head_version"),
            created_by=_as_uuid(_req(data, "created_by", path), f"{path}.created_by"),
            created_at=parse_timestamp(_req(data, "created_at", path), f"{path}.created_at"),
        )


@dataclass(frozen=True)
class Placement:
    """One block instance inside a map: position (meters), unit-quaternion
    rotation (w, x, y, z), and strictly positive per-axis scale."""

    block_id: str
    position: tuple[float, float, float]
    rotation: tuple[float, float, float, float]
    scale: tuple[float, float, float]

    def to_dict(self) -> dict[str, Any]:
        return {
            "block_id": self.block_id,
            "position": list(self.position),
            "rotation": list(self.rotation),
            "scale": list(self.scale),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], path: str = "Placement") -> "Placement":
        rotation_raw = _req(data, "rotation", path)
        if not isinstance(rotation_raw, (list, tuple)) or len(rotation_raw) != 4:
            _fail(f"{path}.rotation", "expected a list of 4 numbers (w, x, y, z)")
        rotation = []
        for i, item in enumerate(rotation_raw):
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                _fail(f"{path}.rotation[{i}]", "expected a number")
            rotation.append(float(item))
        return cls(
            block_id=_as_uuid(_req(data, "block_id", path), f"{path}.block_id"),
            position=_as_float_triple(_req(data, "position", path), f"{path}.position"),
            rotation=(rotation[0], rotation[1], rotation[2], rotation[3]),
            scale=_as_float_triple(_req(data, "scale", path), f"{path}.scale"),
        )


def validate_placement(p: Placement) -> list[str]:
    """Violation codes for ``p``; empty when every invariant holds.

    Codes: ``NON_FINITE`` (any NaN/Inf component), ``NON_UNIT_ROTATION``
    (finite rotation whose norm is off by more than 1e-6), and
    ``NON_POSITIVE_SCALE`` (finite scale component <= 0).
    """
    codes: list[str] = []
    components = list(p.position) + list(p.rotation) + list(p.scale)
    if not all(math.isfinite(c) for c in components):
        codes.append("NON_FINITE")
    if all(math.isfinite(c) for c in p.rotation):
        norm = math.sqrt(sum(c * c for c in p.rotation))
        if abs(norm - 1.0) > ROTATION_NORM_TOLERANCE:
            codes.append("NON_UNIT_ROTATION")
    if all(math.isfinite(c) for c in p.scale) and any(c <= 0.0 for c in p.scale):
        codes.append("NON_POSITIVE_SCALE")
    return codes


@dataclass(frozen=True)
class AssetEntry:
    """One opaque content resource inside a block's manifest."""

    asset_id: str
    kind: AssetKind
    path: str
    content_hash: str
    size_bytes: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "asset_id": self.asset_id,
            "kind": self.kind.value,
            "path": self.path,
            "content_hash": self.content_hash,
            "size_bytes": self.size_bytes,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], path: str = "AssetEntry") -> "AssetEntry":
        asset_id = _as_str(_req(data, "asset_id", path), f"{path}.asset_id")
        if not ASSET_ID_RE.fullmatch(asset_id):
            _fail(f"{path}.asset_id", f"invalid asset id {asset_id!r}")
        asset_path = _as_str(_req(data, "path", path), f"{path}.path")
        if not is_safe_path(asset_path):
            _fail(f"{path}.path", f"unsafe or non-canonical path {asset_path!r}")
        content_hash = _as_str(_req(data, "content_hash", path), f"{path}.content_hash")
        if not SHA256_RE.fullmatch(content_hash):
            _fail(f"{path}.content_hash", "expected 64 lowercase hex characters")
        return cls(
            asset_id=asset_id,
            kind=_enum(AssetKind, _req(data, "kind", path), f"{path}.kind"),
            path=asset_path,
            content_hash=content_hash,
            size_bytes=_as_int(_req(data, "size_bytes", path), f"{path}.size_bytes", minimum=0),
        )


@dataclass(frozen=True)
class PackManifest:
    """Declarative description of a block's asset content; the unit of
    validation and submission. An empty asset list is legal."""

    block_id: str
    assets: tuple[AssetEntry, ...]
    base_version: str | None = None
    schema_version: int = MANIFEST_SCHEMA_VERSION

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "block_id": self.block_id,
            "base_version": self.base_version,
            "assets": [a.to_dict() for a in sorted(self.assets, key=lambda a: a.asset_id)],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], path: str = "PackManifest") -> "PackManifest":
        schema_version = _as_int(_req(data, "schema_version", path), f"{path}.schema_version")
        if schema_version != MANIFEST_SCHEMA_VERSION:
            _fail(f"{path}.schema_version", f"must be {MANIFEST_SCHEMA_VERSION}")
        assets_raw = _req(data, "assets", path)
        if not isinstance(assets_raw, (list, tuple)):
            _fail(f"{path}.assets", "expected a list")
        if len(assets_raw) > MAX_ASSETS_PER_MANIFEST:
            _fail(f"{path}.assets", f"more than {MAX_ASSETS_PER_MANIFEST} entries")
        assets = tuple(
            AssetEntry.from_dict(item, f"{path}.assets[{i}]") for i, item in enumerate(assets_raw)
        )
        seen_ids: set[str] = set()
        seen_paths: set[str] = set()
        for i, asset in enumerate(assets):
            if asset.asset_id in seen_ids:
                _fail(f"{path}.assets[{i}].asset_id", f"duplicate asset id {asset.asset_id!r}")
            if asset.path in seen_paths:
                _fail(f"{path}.assets[{i}].path", f"duplicate path {asset.path!r}")
            seen_ids.add(asset.asset_id)
            seen_paths.add(asset.path)
        return cls(
            block_id=_as_uuid(_req(data, "block_id", path), f"{path}.block_id"),
            assets=assets,
            base_version=_as_optional_uuid(data.get("base_version"), f"{path}.base_version"),
            schema_version=schema_version,
        )


def canonical_manifest_bytes(manifest: PackManifest) -> bytes:
    """Deterministic UTF-8 JSON for ``manifest``: keys sorted, assets sorted
    by asset id, no insignificant whitespace. Equal manifests yield identical
    bytes, so digests and audit logs are reproducible.

    Raises ``ServiceError`` with code ``STRUCTURAL_INVALID`` if the manifest
    violates its structural invariants.
    """
    try:
        PackManifest.from_dict(manifest.to_dict())
    except ServiceError as exc:
        raise ServiceError("STRUCTURAL_INVALID", exc.message) from exc
    return json.dumps(
        manifest.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def _decided_fields(
    data: Mapping[str, Any], path: str, state: VersionState
) -> tuple[str | None, datetime | None]:
    decided_by = _as_optional_uuid(data.get("decided_by"), f"{path}.decided_by")
    decided_at_raw = data.get("decided_at")
    decided_at = (
        parse_timestamp(decided_at_raw, f"{path}.decided_at") if decided_at_raw is not None else None
    )
    if state is not VersionState.PENDING and (decided_by is None or decided_at is None):
        _fail(path, f"{state.value} version must carry decided_by and decided_at")
    if state is VersionState.PENDING and (decided_by is not None or decided_at is not None):
        _fail(path, "pending version must not carry decision fields")
    return decided_by, decided_at


@dataclass(frozen=True)
class BlockVersion:
    version_id: str
    block_id: str
    seq: int
    manifest: PackManifest
    state: VersionState
    author: str
    submitted_at: datetime
    base_version: str | None = None
    decided_by: str | None = None
    decided_at: datetime | None = None
    reason: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "version_id": self.version_id,
            "block_id": self.block_id,
            "seq": self.seq,
            "base_version": self.base_version,
            "manifest": self.manifest.to_dict(),
            "state": self.state.value,
            "author": self.author,
            "submitted_at": format_timestamp(self.submitted_at),
            "decided_by": self.decided_by,
            "decided_at": format_timestamp(self.decided_at) if self.decided_at else None,
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], path: str = "BlockVersion") -> "BlockVersion":
        state = _enum(VersionState, _req(data, "state", path), f"{path}.state")
        decided_by, decided_at = _decided_fields(data, path, state)
        reason = data.get("reason")
        if reason is not None:
            reason = _as_str(reason, f"{path}.reason")
        return cls(
            version_id=_as_uuid(_req(data, "version_id", path), f"{path}.version_id"),
            block_id=_as_uuid(_req(data, "block_id", path), f"{path}.block_id"),
            seq=_as_int(_req(data, "seq", path), f"{path}.seq", minimum=1),
            base_version=_as_optional_uuid(data.get("base_version"), f"{path}.base_version"),
            manifest=PackManifest.from_dict(_req(data, "manifest", path), f"{path}.manifest"),
            state=state,
            author=_as_uuid(_req(data, "author", path), f"{path}.author"),
            submitted_at=parse_timestamp(_req(data, "submitted_at", path), f"{path}.submitted_at"),
            decided_by=decided_by,
            decided_at=decided_at,
            reason=reason,
        )


@dataclass(frozen=True)
class MapVersion:
    version_id: str
    map_id: str
    seq: int
    placements: tuple[Placement, ...]
    state: VersionState
    author: str
    submitted_at: datetime
    decided_by: str | None = None
    decided_at: datetime | None = None
    reason: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "version_id": self.version_id,
            "map_id": self.map_id,
            "seq": self.seq,
            "placements": [p.to_dict() for p in self.placements],
            "state": self.state.value,
            "author": self.author,
            "submitted_at": format_timestamp(self.submitted_at),
            "decided_by": self.decided_by,
            "decided_at": format_timestamp(self.decided_at) if self.decided_at else None,
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], path: str = "MapVersion") -> "MapVersion":
        state = _enum(VersionState, _req(data, "state", path), f"{path}.state")
        decided_by, decided_at = _decided_fields(data, path, state)
        placements_raw = _req(data, "placements", path)
        if not isinstance(placements_raw, (list, tuple)):
            _fail(f"{path}.placements", "expected a list")
        reason = data.get("reason")
        if reason is not None:
            reason = _as_str(reason, f"{path}.reason")
        return cls(
            version_id=_as_uuid(_req(data, "version_id", path), f"{path}.version_id"),
            map_id=_as_uuid(_req(data, "map_id", path), f"{path}.map_id"),
            seq=_as_int(_req(data, "seq", path), f"{path}.seq", minimum=1),
            placements=tuple(
                Placement.from_dict(item, f"{path}.placements[{i}]")
                for i, item in enumerate(placements_raw)
            ),
            state=state,
            author=_as_uuid(_req(data, "author", path), f"{path}.author"),
            submitted_at=parse_timestamp(_req(data, "submitted_at", path), f"{path}.submitted_at"),
            decided_by=decided_by,
            decided_at=decided_at,
            reason=reason,
        )


@dataclass(frozen=True)
class LockRecord:
    """Exclusive, lease-based editing claim on one block.

    ``ttl_seconds`` records the original lease length so renewals extend by
    the same amount; it is not part of the exclusivity invariant.
    """

    lock_id: str
    block_id: str
    holder: str
    acquired_at: datetime
    expires_at: datetime
    ttl_seconds: int
    renew_count: int = 0

    def is_live(self, now: datetime) -> bool:
        """Expiry is exclusive: a lock is dead at its expires_at instant."""
        return now < self.expires_at

    def to_dict(self) -> dict[str, Any]:
        return {
            "lock_id": self.lock_id,
            "block_id": self.block_id,
            "holder": self.holder,
            "acquired_at": format_timestamp(self.acquired_at),
            "expires_at": format_timestamp(self.expires_at),
            "ttl_seconds": self.ttl_seconds,
            "renew_count": self.renew_count,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], path: str = "LockRecord") -> "LockRecord":
        acquired_at = parse_timestamp(_req(data, "acquired_at", path), f"{path}.acquired_at")
        expires_at = parse_timestamp(_req(data, "expires_at", path), f"{path}.expires_at")
        if expires_at <= acquired_at:
            _fail(f"{path}.expires_at", "must be after acquired_at")
        return cls(
            lock_id=_as_uuid(_req(data, "lock_id", path), f"{path}.lock_id"),
            block_id=_as_uuid(_req(data, "block_id", path), f"{path}.block_id"),
            holder=_as_uuid(_req(data, "holder", path), f"{path}.holder"),
            acquired_at=acquired_at,
            expires_at=expires_at,
            ttl_seconds=_as_int(_req(data, "ttl_seconds", path), f"{path}.ttl_seconds", minimum=1),
            renew_count=_as_int(_req(data, "renew_count", path), f"{path}.renew_count", minimum=0),
        )


@dataclass(frozen=True)
class SyncDelta:
    """Instruction to replace a client's local copy of one block with the
    server head. ``old_version`` is the client's view, absent when the block
    is new to the client."""

    block_id: str
    new_version: str
    manifest: PackManifest
    old_version: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "block_id": self.block_id,
            "old_version": self.old_version,
            "new_version": self.new_version,
            "manifest": self.manifest.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], path: str = "SyncDelta") -> "SyncDelta":
        return cls(
            block_id=_as_uuid(_req(data, "block_id", path), f"{path}.block_id"),
            old_version=_as_optional_uuid(data.get("old_version"), f"{path}.old_version"),
            new_version=_as_uuid(_req(data, "new_version", path), f"{path}.new_version"),
            manifest=PackManifest.from_dict(_req(data, "manifest", path), f"{path}.manifest"),
        )


@dataclass(frozen=True)
class ClientState:
    """A client's last-synced approved version per block (and per map).

    Keys must be well-formed UUIDv4 strings; ids the server does not know
    are legal and reported back, never an error.
    """

    blocks: Mapping[str, str] = field(default_factory=dict)
    maps: Mapping[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"blocks": dict(self.blocks), "maps": dict(self.maps)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], path: str = "ClientState") -> "ClientState":
        def read_section(key: str) -> dict[str, str]:
            raw = data.get(key, {})
            if not isinstance(raw, Mapping):
                _fail(f"{path}.{key}", "expected an object of id -> version id")
            out: dict[str, str] = {}
            for k, v in raw.items():
                out[_as_uuid(k, f"{path}.{key} key")] = _as_uuid(v, f"{path}.{key}[{k}]")
            return out

        return cls(blocks=read_section("blocks"), maps=read_section("maps"))


def dumps_canonical(value: Any) -> str:
    """Compact JSON with sorted keys; shared by the journal and tests."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
