"""Append-only, checksummed mutation journal.

Each committed mutation is one line: a CRC32 of the JSON payload, a space,
the payload, a newline. ``append`` returns only after the line is flushed
and fsynced, so every acknowledged commit survives a crash. Recovery reads
the journal until the first torn or corrupt line and truncates the rest:
the store always loads to a prefix of the acknowledged commit sequence.

``failpoints`` is an optional hook called at named points inside the commit
path; crash tests use it to kill or fault the process mid-write.
"""

from __future__ import annotations

import json
import os
import zlib
from pathlib import Path
from typing import Any, Callable

from .errors import ServiceError

MAGIC = b"sigil3d-journal 1\n"

Failpoints = Callable[[str], None]


def _no_failpoints(_name: str) -> None:
    return None


class Journal:
    def __init__(
        self,
        path: Path,
        failpoints: Failpoints | None = None,
        fsync: bool = True,
    ) -> None:
        self._path = Path(path)
        self._failpoints = failpoints or _no_failpoints
        self._fsync = fsync
        self._poisoned = False
        self._file = self._open_for_append()

    def _open_for_append(self):
        self._path.parent.mkdir(parents=True, exist_ok=True)
        is_new = not self._path.exists()
        # buffering=0 so partial writes hit the OS immediately; the torn-tail
        # recovery contract depends on seeing exactly what was written.
        file = open(self._path, "ab", buffering=0)
        if is_new:
            file.write(MAGIC)
            self._sync(file)
            _fsync_dir(self._path.parent)
        return file

    def _sync(self, file) -> None:
        if self._fsync:
            os.fsync(file.fileno())

    def append(self, record: dict[str, Any]) -> None:
        """Durably append one mutation record; atomic at line granularity."""
        if self._poisoned:
            raise ServiceError("STORAGE_FAILURE", "journal is in a failed state")
        payload = json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        data = payload.encode("utf-8")
        line = b"%08x " % zlib.crc32(data) + data + b"\n"
        start = self._file.tell()
        try:
            self._failpoints("journal.append.pre")
            half = len(line) // 2
            self._file.write(line[:half])
            self._failpoints("journal.append.partial")
            self._file.write(line[half:])
            self._failpoints("journal.append.pre_sync")
            self._sync(self._file)
            self._failpoints("journal.append.post_sync")
        except Exception:
            self._rollback_to(start)
            raise

    def _rollback_to(self, offset: int) -> None:
        """Discard a torn append so later records don't land after garbage."""
        try:
            self._file.truncate(offset)
            self._file.seek(offset)
        except OSError:
            self._poisoned = True

    def close(self) -> None:
        self._file.close()

    @staticmethod
    def replay(path: Path) -> list[dict[str, Any]]:
        """Read all intact records; truncate a torn tail in place.

        Crash artifacts can only sit on the file's final line (appends are
        sequential), so a bad final record — torn or checksum-failing — is
        dropped. A bad record with valid data after it is interior
        corruption; truncating there would silently discard acknowledged
        commits, so the store refuses to open instead.
        """
        path = Path(path)
        if not path.exists():
            return []
        with open(path, "rb") as file:
            blob = file.read()
        if not blob.startswith(MAGIC):
            raise ServiceError("STORAGE_FAILURE", f"{path}: not a journal file")
        records: list[dict[str, Any]] = []
        offset = len(MAGIC)
        while offset < len(blob):
            newline = blob.find(b"\n", offset)
            if newline >= 0:
                record = _parse_line(blob[offset:newline])
                if record is not None:
                    records.append(record)
                    offset = newline + 1
                    continue
                if newline != len(blob) - 1:
                    raise ServiceError(
                        "STORAGE_FAILURE",
                        f"{path}: corrupt journal record at byte {offset}",
                    )
            with open(path, "r+b") as file:  # torn or mangled final record
                file.truncate(offset)
                os.fsync(file.fileno())
            break
        return records


def _parse_line(line: bytes) -> dict[str, Any] | None:
    if len(line) < 10 or line[8:9] != b" ":
        return None
    try:
        crc = int(line[:8], 16)
    except ValueError:
        return None
    data = line[9:]
    if zlib.crc32(data) != crc:
        return None
    try:
        record = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return None
    return record if isinstance(record, dict) else None


def _fsync_dir(path: Path) -> None:
    fd = os.open(path, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)
