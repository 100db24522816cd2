"""Content-addressed blob storage for opaque asset bytes.

Blobs are keyed by the SHA-256 of their content and laid out as
``<root>/<first 2 hex chars>/<full 64-hex key>``. Writes stream to a unique
temp file, verify the digest, fsync, then atomically rename — readers never
observe partial blobs, and re-uploading existing content is a cheap no-op.
"""

from __future__ import annotations

import hashlib
import os
import uuid
from pathlib import Path
from typing import BinaryIO, Iterator

from .errors import ServiceError
from .journal import Failpoints
from .model import SHA256_RE

DEFAULT_MAX_BLOB_SIZE = 256 * 1024 * 1024
_CHUNK = 64 * 1024


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class BlobStore:
    def __init__(
        self,
        root: Path,
        max_blob_size: int = DEFAULT_MAX_BLOB_SIZE,
        paranoid_reads: bool = False,
        failpoints: Failpoints | None = None,
    ) -> None:
        self.root = Path(root)
        self.max_blob_size = max_blob_size
        self.paranoid_reads = paranoid_reads
        self._failpoints = failpoints or (lambda name: None)
        self._tmp_dir = self.root / "tmp"
        self._tmp_dir.mkdir(parents=True, exist_ok=True)

    def _blob_path(self, key: str) -> Path:
        return self.root / key[:2] / key

    def put(self, claimed_key: str, source: "bytes | BinaryIO") -> str:
        """Store ``source`` under its true digest; idempotent for existing
        content. Nothing is stored when the claimed key does not match."""
        if not SHA256_RE.fullmatch(claimed_key):
            raise ServiceError("HASH_MISMATCH", f"malformed blob key {claimed_key!r}")
        reader = _as_reader(source)
        if self.has(claimed_key):
            # Dedup fast path: still drain and verify so a lying client is
            # rejected rather than silently "succeeding" with foreign bytes.
            digest = self._hash_stream(reader)
            if digest != claimed_key:
                raise ServiceError(
                    "HASH_MISMATCH", f"claimed {claimed_key} but content is {digest}"
                )
            return claimed_key

        tmp_path = self._tmp_dir / f"put-{uuid.uuid4().hex}"
        hasher = hashlib.sha256()
        total = 0
        try:
            with open(tmp_path, "wb") as tmp:
                self._failpoints("blob.put.open")
                while True:
                    chunk = reader.read(_CHUNK)
                    if not chunk:
                        break
                    total += len(chunk)
                    if total > self.max_blob_size:
                        raise ServiceError(
                            "BLOB_TOO_LARGE",
                            f"blob exceeds maximum size {self.max_blob_size} bytes",
                        )
                    hasher.update(chunk)
                    tmp.write(chunk)
                    self._failpoints("blob.put.partial")
                tmp.flush()
                os.fsync(tmp.fileno())
            digest = hasher.hexdigest()
            if digest != claimed_key:
                raise ServiceError(
                    "HASH_MISMATCH", f"claimed {claimed_key} but content is {digest}"
                )
            final = self._blob_path(digest)
            final.parent.mkdir(parents=True, exist_ok=True)
            self._failpoints("blob.put.pre_rename")
            os.replace(tmp_path, final)
            self._failpoints("blob.put.post_rename")
            _fsync_dir(final.parent)
            return digest
        finally:
            if tmp_path.exists():
                tmp_path.unlink(missing_ok=True)

    def _hash_stream(self, reader: BinaryIO) -> str:
        hasher = hashlib.sha256()
        total = 0
        while True:
            chunk = reader.read(_CHUNK)
            if not chunk:
                break
            total += len(chunk)
            if total > self.max_blob_size:
                raise ServiceError(
                    "BLOB_TOO_LARGE", f"blob exceeds maximum size {self.max_blob_size} bytes"
                )
            hasher.update(chunk)
        return hasher.hexdigest()

    def get(self, key: str) -> bytes:
        path = self._blob_path(key) if SHA256_RE.fullmatch(key) else None
        if path is None or not path.exists():
            raise ServiceError("UNKNOWN_BLOB", f"no blob {key}")
        data = path.read_bytes()
        if self.paranoid_reads and sha256_hex(data) != key:
            raise ServiceError("CORRUPT_BLOB", f"stored bytes for {key} fail digest check")
        return data

    def has(self, key: str) -> bool:
        return bool(SHA256_RE.fullmatch(key)) and self._blob_path(key).exists()

    def size(self, key: str) -> int | None:
        """Stored length in bytes, or None when absent."""
        if not SHA256_RE.fullmatch(key):
            return None
        try:
            return self._blob_path(key).stat().st_size
        except FileNotFoundError:
            return None

    def iter_keys(self) -> Iterator[str]:
        if not self.root.exists():
            return
        for fanout in sorted(self.root.iterdir()):
            if not fanout.is_dir() or fanout.name == "tmp":
                continue
            for entry in sorted(fanout.iterdir()):
                if SHA256_RE.fullmatch(entry.name):
                    yield entry.name

    def scrub(self) -> list[str]:
        """Re-hash every stored blob; returns keys whose content mismatches."""
        bad = []
        for key in self.iter_keys():
            if sha256_hex(self._blob_path(key).read_bytes()) != key:
                bad.append(key)
        return bad

    def delete(self, key: str) -> bool:
        path = self._blob_path(key)
        if path.exists():
            path.unlink()
            return True
        return False

    def collect_garbage(self, referenced: set[str]) -> list[str]:
        """Delete blobs referenced by no version; returns the removed keys.

        Never automatic: history is append-only, so unreferenced blobs only
        arise from abandoned uploads.
        """
        removed = []
        for key in list(self.iter_keys()):
            if key not in referenced:
                self.delete(key)
                removed.append(key)
        for stale in self._tmp_dir.iterdir():
            stale.unlink(missing_ok=True)
        return removed


class _BytesReader:
    def __init__(self, data: bytes) -> None:
        self._view = memoryview(data)
        self._pos = 0

    def read(self, n: int = -1) -> bytes:
        if n < 0:
            n = len(self._view) - self._pos
        chunk = self._view[self._pos : self._pos + n]
        self._pos += len(chunk)
        return bytes(chunk)


def _as_reader(source: "bytes | BinaryIO") -> BinaryIO:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return _BytesReader(bytes(source))  # type: ignore[return-value]
    return source


def _fsync_dir(path: Path) -> None:
    fd = os.open(path, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)
