"""Transactional metadata store: in-memory state + mutation journal.

All mutating operations across the service funnel through one commit point
(``transaction`` + ``commit``), which serializes them and makes the commit
order the linearization order. A mutation is a plain dict ``{"op", "data"}``
carrying every value it needs (ids, timestamps), so replaying the journal is
deterministic and never consults the clock or RNG.
"""

from __future__ import annotations

import dataclasses
import threading
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator

from .errors import ServiceError
from .journal import Failpoints, Journal
from .model import (
    BlockRecord,
    BlockVersion,
    LockRecord,
    MapRecord,
    MapVersion,
    SessionToken,
    UserAccount,
    VersionState,
    parse_timestamp,
)


class State:
    """Mutable aggregate of every persistent record, keyed for lookup."""

    def __init__(self) -> None:
        self.users: dict[str, UserAccount] = {}
        self.users_by_name: dict[str, str] = {}
        self.sessions: dict[str, SessionToken] = {}
        self.blocks: dict[str, BlockRecord] = {}
        self.maps: dict[str, MapRecord] = {}
        self.block_versions: dict[str, BlockVersion] = {}
        self.map_versions: dict[str, MapVersion] = {}
        self.block_history: dict[str, list[str]] = {}
        self.map_history: dict[str, list[str]] = {}
        self.locks: dict[str, LockRecord] = {}

    def find_lock(self, lock_id: str) -> LockRecord | None:
        for lock in self.locks.values():
            if lock.lock_id == lock_id:
                return lock
        return None


def apply_mutation(state: State, record: dict[str, Any]) -> None:
    """Apply one journal record to ``state``. Deterministic and total over
    records produced by ``commit``; anything else means a corrupt journal."""
    op = record.get("op")
    data = record.get("data")
    if not isinstance(op, str) or not isinstance(data, dict):
        raise ServiceError("STORAGE_FAILURE", f"malformed journal record: {record!r}")
    handler = _APPLIERS.get(op)
    if handler is None:
        raise ServiceError("STORAGE_FAILURE", f"unknown journal operation {op!r}")
    handler(state, data)


def _apply_user_create(state: State, data: dict[str, Any]) -> None:
    user = UserAccount.from_dict(data["user"])
    state.users[user.user_id] = user
    state.users_by_name[user.username] = user.user_id


def _apply_session_create(state: State, data: dict[str, Any]) -> None:
    session = SessionToken.from_dict(data["session"])
    state.sessions[session.token] = session


def _apply_session_delete(state: State, data: dict[str, Any]) -> None:
    state.sessions.pop(data["token"], None)


def _apply_session_sweep(state: State, data: dict[str, Any]) -> None:
    for token in data["tokens"]:
        state.sessions.pop(token, None)


def _apply_block_create(state: State, data: dict[str, Any]) -> None:
    block = BlockRecord.from_dict(data["block"])
    state.blocks[block.block_id] = block
    state.block_history.setdefault(block.block_id, [])


def _apply_map_create(state: State, data: dict[str, Any]) -> None:
    map_record = MapRecord.from_dict(data["map"])
    state.maps[map_record.map_id] = map_record
    state.map_history.setdefault(map_record.map_id, [])


def _apply_block_version_create(state: State, data: dict[str, Any]) -> None:
    version = BlockVersion.from_dict(data["version"])
    state.block_versions[version.version_id] = version
    state.block_history.setdefault(version.block_id, []).append(version.version_id)


def _apply_map_version_create(state: State, data: dict[str, Any]) -> None:
    version = MapVersion.from_dict(data["version"])
    state.map_versions[version.version_id] = version
    state.map_history.setdefault(version.map_id, []).append(version.version_id)


def _apply_version_decide(state: State, data: dict[str, Any]) -> None:
    version_id = data["version_id"]
    new_state = VersionState(data["state"])
    decided_by = data["decided_by"]
    decided_at = parse_timestamp(data["decided_at"])
    reason = data.get("reason")
    if data["kind"] == "block":
        version = state.block_versions[version_id]
        state.block_versions[version_id] = dataclasses.replace(
            version,
            state=new_state,
            decided_by=decided_by,
            decided_at=decided_at,
            reason=reason,
        )
        if data.get("set_head"):
            block = state.blocks[version.block_id]
            state.blocks[version.block_id] = dataclasses.replace(
                block, head_version=version_id
            )
    else:
        version = state.map_versions[version_id]
        state.map_versions[version_id] = dataclasses.replace(
            version,
            state=new_state,
            decided_by=decided_by,
            decided_at=decided_at,
            reason=reason,
        )
        if data.get("set_head"):
            map_record = state.maps[version.map_id]
            state.maps[version.map_id] = dataclasses.replace(
                map_record, head_version=version_id
            )


def _apply_lock_acquire(state: State, data: dict[str, Any]) -> None:
    lock = LockRecord.from_dict(data["lock"])
    state.locks[lock.block_id] = lock


def _apply_lock_renew(state: State, data: dict[str, Any]) -> None:
    lock = state.locks[data["block_id"]]
    state.locks[data["block_id"]] = dataclasses.replace(
        lock,
        expires_at=parse_timestamp(data["expires_at"]),
        renew_count=data["renew_count"],
    )


def _apply_lock_release(state: State, data: dict[str, Any]) -> None:
    lock = state.locks.get(data["block_id"])
    if lock is not None and lock.lock_id == data["lock_id"]:
        del state.locks[data["block_id"]]


def _apply_lock_sweep(state: State, data: dict[str, Any]) -> None:
    for entry in data["locks"]:
        lock = state.locks.get(entry["block_id"])
        if lock is not None and lock.lock_id == entry["lock_id"]:
            del state.locks[entry["block_id"]]


_APPLIERS = {
    "user.create": _apply_user_create,
    "session.create": _apply_session_create,
    "session.delete": _apply_session_delete,
    "session.sweep": _apply_session_sweep,
    "block.create": _apply_block_create,
    "map.create": _apply_map_create,
    "block_version.create": _apply_block_version_create,
    "map_version.create": _apply_map_version_create,
    "version.decide": _apply_version_decide,
    "lock.acquire": _apply_lock_acquire,
    "lock.renew": _apply_lock_renew,
    "lock.release": _apply_lock_release,
    "lock.sweep": _apply_lock_sweep,
}


class MetadataStore:
    """Serialized commit point over ``State`` with optional durability.

    ``transaction()`` is the single entry for reads and writes; nesting is
    allowed within a thread. ``commit`` appends to the journal first, then
    applies to memory — so an acknowledged mutation is always on disk, and a
    failed append leaves memory untouched.
    """

    def __init__(self, journal: Journal | None, state: State | None = None) -> None:
        self._journal = journal
        self._state = state if state is not None else State()
        self._mutex = threading.RLock()
        self.commit_count = 0

    @classmethod
    def open(
        cls,
        meta_dir: Path,
        failpoints: Failpoints | None = None,
        fsync: bool = True,
    ) -> "MetadataStore":
        """Open (or create) the journal under ``meta_dir`` and replay it."""
        journal_path = Path(meta_dir) / "journal.log"
        state = State()
        count = 0
        try:
            for record in Journal.replay(journal_path):
                apply_mutation(state, record)
                count += 1
        except ServiceError:
            raise
        except Exception as exc:
            raise ServiceError("STORAGE_FAILURE", f"journal replay failed: {exc}") from exc
        store = cls(Journal(journal_path, failpoints=failpoints, fsync=fsync), state)
        store.commit_count = count
        return store

    @classmethod
    def in_memory(cls) -> "MetadataStore":
        """Volatile store for tests and ephemeral tooling."""
        return cls(journal=None)

    @contextmanager
    def transaction(self) -> Iterator[State]:
        with self._mutex:
            yield self._state

    def commit(self, op: str, data: dict[str, Any]) -> None:
        record = {"op": op, "data": data}
        with self._mutex:
            if self._journal is not None:
                try:
                    self._journal.append(record)
                except ServiceError:
                    raise
                except OSError as exc:
                    raise ServiceError("STORAGE_FAILURE", f"commit failed: {exc}") from exc
            apply_mutation(self._state, record)
            self.commit_count += 1

    def close(self) -> None:
        if self._journal is not None:
            self._journal.close()
