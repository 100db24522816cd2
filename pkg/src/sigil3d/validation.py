"""Server-side correctness checks for uploaded content packs.

Violations are collected exhaustively — an editor sees every problem in one
round trip, not one per attempt — and deterministically ordered: manifest-
level problems first, then per-asset problems in asset order, each in a fixed
code order. Field-shape problems (wrong JSON types, malformed identifiers)
are not violations; they raise ``MALFORMED_REQUEST`` like any bad request.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Mapping, Protocol

from .errors import ServiceError
from .model import (
    ASSET_ID_RE,
    ASSET_KIND_VALUES,
    MANIFEST_SCHEMA_VERSION,
    MAX_ASSETS_PER_MANIFEST,
    MAX_PATH_BYTES,
    SHA256_RE,
    PackManifest,
    is_uuid,
)

MAX_MANIFEST_BYTES = 1024 * 1024

# Fixed report order within one asset.
_CODE_ORDER = (
    "DUP_ASSET_ID",
    "DUP_PATH",
    "BAD_PATH",
    "BAD_HASH_FORMAT",
    "UNKNOWN_KIND",
)


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str
    locus: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"code": self.code, "detail": self.detail, "locus": self.locus}


class BlobLookup(Protocol):
    def has(self, key: str) -> bool: ...

    def size(self, key: str) -> int | None: ...


def normalize_path(path: str) -> str:
    """Canonicalize a workspace-relative asset path, or raise ``BAD_PATH``.

    Collapses ``.`` and empty segments; rejects ``..``, absolute paths,
    backslashes, NUL bytes, and results longer than 240 UTF-8 bytes.
    """

    def bad(why: str) -> ServiceError:
        return ServiceError("BAD_PATH", f"{path!r}: {why}")

    if not isinstance(path, str) or path == "":
        raise bad("empty path")
    if "\x00" in path:
        raise bad("NUL byte")
    if "\\" in path:
        raise bad("backslash separator")
    if path.startswith("/"):
        raise bad("absolute path")
    segments = [seg for seg in path.split("/") if seg not in ("", ".")]
    if not segments:
        raise bad("no path segments")
    if any(seg == ".." for seg in segments):
        raise bad("parent-directory traversal")
    normalized = "/".join(segments)
    if len(normalized.encode("utf-8")) > MAX_PATH_BYTES:
        raise bad(f"longer than {MAX_PATH_BYTES} bytes")
    return normalized


def _canonical_or_none(path: Any) -> str | None:
    try:
        canonical = normalize_path(path)
    except ServiceError:
        return None
    return canonical if canonical == path else None


def _fail(path: str, message: str) -> ServiceError:
    return ServiceError("MALFORMED_REQUEST", f"{path}: {message}")


def _shape_str(data: Mapping[str, Any], key: str, path: str) -> str:
    if key not in data:
        raise _fail(path, f"missing required field {key!r}")
    value = data[key]
    if not isinstance(value, str):
        raise _fail(f"{path}.{key}", f"expected string, got {type(value).__name__}")
    return value


def _shape_int(data: Mapping[str, Any], key: str, path: str, minimum: int | None = None) -> int:
    if key not in data:
        raise _fail(path, f"missing required field {key!r}")
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise _fail(f"{path}.{key}", f"expected integer, got {type(value).__name__}")
    if minimum is not None and value < minimum:
        raise _fail(f"{path}.{key}", f"must be >= {minimum}")
    return value


def validate_structure(
    manifest: "PackManifest | Mapping[str, Any]", target_block: str
) -> list[Violation]:
    """Structural validation of a manifest against its target block.

    Accepts either a parsed ``PackManifest`` or the raw JSON mapping of one,
    so a submission with value-level problems (unknown kind, unsafe path,
    bad digest...) can still be reported exhaustively. An empty result
    guarantees ``PackManifest.from_dict`` accepts the document.
    """
    if isinstance(manifest, PackManifest):
        raw: Mapping[str, Any] = manifest.to_dict()
    elif isinstance(manifest, Mapping):
        raw = manifest
    else:
        raise _fail("PackManifest", f"expected object, got {type(manifest).__name__}")

    violations: list[Violation] = []

    schema_version = _shape_int(raw, "schema_version", "PackManifest")
    if schema_version != MANIFEST_SCHEMA_VERSION:
        violations.append(
            Violation(
                "BAD_SCHEMA_VERSION",
                f"schema_version {schema_version} is not {MANIFEST_SCHEMA_VERSION}",
            )
        )

    block_id = _shape_str(raw, "block_id", "PackManifest")
    if not is_uuid(block_id):
        raise _fail("PackManifest.block_id", f"not a UUIDv4 string: {block_id!r}")
    if block_id != target_block:
        violations.append(
            Violation(
                "BLOCK_ID_MISMATCH",
                f"manifest names block {block_id} but targets {target_block}",
            )
        )

    base_version = raw.get("base_version")
    if base_version is not None and not (isinstance(base_version, str) and is_uuid(base_version)):
        raise _fail("PackManifest.base_version", "not a UUIDv4 string")

    assets = raw.get("assets")
    if not isinstance(assets, (list, tuple)):
        raise _fail("PackManifest.assets", "expected a list")
    if len(assets) > MAX_ASSETS_PER_MANIFEST:
        violations.append(
            Violation(
                "MANIFEST_TOO_LARGE",
                f"{len(assets)} assets exceed the {MAX_ASSETS_PER_MANIFEST}-asset limit",
            )
        )
    document_bytes = len(json.dumps(raw, separators=(",", ":")).encode("utf-8"))
    if document_bytes > MAX_MANIFEST_BYTES:
        violations.append(
            Violation(
                "MANIFEST_TOO_LARGE",
                f"manifest document is {document_bytes} bytes; limit {MAX_MANIFEST_BYTES}",
            )
        )

    seen_ids: set[str] = set()
    seen_paths: set[str] = set()
    for index, entry in enumerate(assets):
        if not isinstance(entry, Mapping):
            raise _fail(f"PackManifest.assets[{index}]", "expected object")
        where = f"PackManifest.assets[{index}]"
        asset_id = _shape_str(entry, "asset_id", where)
        if not ASSET_ID_RE.fullmatch(asset_id):
            raise _fail(f"{where}.asset_id", f"invalid asset id {asset_id!r}")
        kind = _shape_str(entry, "kind", where)
        path = _shape_str(entry, "path", where)
        content_hash = _shape_str(entry, "content_hash", where)
        _shape_int(entry, "size_bytes", where, minimum=0)

        per_asset: dict[str, Violation] = {}
        if asset_id in seen_ids:
            per_asset["DUP_ASSET_ID"] = Violation(
                "DUP_ASSET_ID", f"asset id {asset_id!r} appears more than once", asset_id
            )
        seen_ids.add(asset_id)
        canonical = _canonical_or_none(path)
        if canonical is None:
            per_asset["BAD_PATH"] = Violation(
                "BAD_PATH", f"unsafe or non-canonical path {path!r}", asset_id
            )
        else:
            if canonical in seen_paths:
                per_asset["DUP_PATH"] = Violation(
                    "DUP_PATH", f"path {path!r} appears more than once", asset_id
                )
            seen_paths.add(canonical)
        if not SHA256_RE.fullmatch(content_hash):
            per_asset["BAD_HASH_FORMAT"] = Violation(
                "BAD_HASH_FORMAT",
                f"content_hash {content_hash!r} is not 64 lowercase hex characters",
                asset_id,
            )
        if kind not in ASSET_KIND_VALUES:
            per_asset["UNKNOWN_KIND"] = Violation(
                "UNKNOWN_KIND", f"unknown asset kind {kind!r}", asset_id
            )
        violations.extend(per_asset[code] for code in _CODE_ORDER if code in per_asset)

    return violations


def validate_presence(manifest: PackManifest, store: BlobLookup) -> list[Violation]:
    """Check that every referenced blob is stored with the declared size."""
    violations: list[Violation] = []
    for asset in manifest.assets:
        if not store.has(asset.content_hash):
            violations.append(
                Violation(
                    "MISSING_BLOB",
                    f"blob {asset.content_hash} has not been uploaded",
                    asset.asset_id,
                )
            )
            continue
        stored = store.size(asset.content_hash)
        if stored != asset.size_bytes:
            violations.append(
                Violation(
                    "SIZE_MISMATCH",
                    f"manifest declares {asset.size_bytes} bytes but store holds {stored}",
                    asset.asset_id,
                )
            )
    return violations
