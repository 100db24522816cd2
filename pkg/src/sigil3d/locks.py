"""Exclusive per-block editing leases.

Acquisition is linearizable: every mutating operation runs inside the store's
single commit point, so among concurrent acquirers exactly one can win.
Expiry is lazy and observationally exact — liveness is checked against the
injected clock on every operation, never against whether a background sweep
has physically removed the record. There is no queueing: contenders get
``LOCK_HELD`` and retry.
"""

from __future__ import annotations

from datetime import timedelta
from typing import Callable

from .auth import PermissionAction, authorize
from .clock import Clock
from .errors import ServiceError
from .model import LockRecord, UserAccount, format_timestamp, new_id
from .store import MetadataStore, State

DEFAULT_LOCK_TTL = 1800
DEFAULT_MAX_LOCK_TTL = 7200


class LockManager:
    def __init__(
        self,
        store: MetadataStore,
        clock: Clock,
        default_ttl: int = DEFAULT_LOCK_TTL,
        max_ttl: int = DEFAULT_MAX_LOCK_TTL,
        id_factory: Callable[[], str] = new_id,
    ) -> None:
        self._store = store
        self._clock = clock
        self.default_ttl = default_ttl
        self.max_ttl = max_ttl
        self._new_id = id_factory

    def _account(self, state: State, user_id: str) -> UserAccount:
        account = state.users.get(user_id)
        if account is None:
            raise ServiceError("FORBIDDEN", f"no account {user_id}")
        return account

    def acquire(self, block_id: str, holder: str, ttl_seconds: int | None = None) -> LockRecord:
        ttl = self.default_ttl if ttl_seconds is None else ttl_seconds
        if not isinstance(ttl, int) or isinstance(ttl, bool) or ttl < 1:
            raise ServiceError("MALFORMED_REQUEST", "ttl_seconds must be a positive integer")
        if ttl > self.max_ttl:
            raise ServiceError("TTL_TOO_LONG", f"ttl_seconds may not exceed {self.max_ttl}")
        with self._store.transaction() as state:
            now = self._clock.now()
            if block_id not in state.blocks:
                raise ServiceError("UNKNOWN_BLOCK", f"no block {block_id}")
            account = self._account(state, holder)
            if not authorize(account, PermissionAction.LOCK_BLOCK):
                raise ServiceError("FORBIDDEN", "role may not lock blocks")
            existing = state.locks.get(block_id)
            if existing is not None and existing.is_live(now):
                holder_name = state.users[existing.holder].username
                raise ServiceError(
                    "LOCK_HELD",
                    f"block is locked by {holder_name} until "
                    f"{format_timestamp(existing.expires_at)}",
                )
            record = LockRecord(
                lock_id=self._new_id(),
                block_id=block_id,
                holder=holder,
                acquired_at=now,
                expires_at=now + timedelta(seconds=ttl),
                ttl_seconds=ttl,
                renew_count=0,
            )
            self._store.commit("lock.acquire", {"lock": record.to_dict()})
            return record

    def renew(self, lock_id: str, holder: str) -> LockRecord:
        """Extend a live lock by its original TTL from now."""
        with self._store.transaction() as state:
            now = self._clock.now()
            lock = state.find_lock(lock_id)
            if lock is None:
                raise ServiceError("UNKNOWN_LOCK", f"no lock {lock_id}")
            if not lock.is_live(now):
                raise ServiceError("LOCK_EXPIRED", f"lock {lock_id} has expired")
            if lock.holder != holder:
                raise ServiceError("NOT_HOLDER", "lock is held by another user")
            expires_at = now + timedelta(seconds=lock.ttl_seconds)
            self._store.commit(
                "lock.renew",
                {
                    "block_id": lock.block_id,
                    "lock_id": lock.lock_id,
                    "expires_at": format_timestamp(expires_at),
                    "renew_count": lock.renew_count + 1,
                },
            )
            return state.locks[lock.block_id]

    def release(self, lock_id: str, actor: str) -> None:
        """Remove a live lock. The holder may release; administrators may
        break any lock. An expired or unknown lock is UNKNOWN_LOCK."""
        with self._store.transaction() as state:
            now = self._clock.now()
            lock = state.find_lock(lock_id)
            if lock is None or not lock.is_live(now):
                raise ServiceError("UNKNOWN_LOCK", f"no live lock {lock_id}")
            if lock.holder != actor:
                account = self._account(state, actor)
                if not authorize(account, PermissionAction.BREAK_LOCK):
                    raise ServiceError("NOT_HOLDER", "lock is held by another user")
            self._store.commit(
                "lock.release", {"block_id": lock.block_id, "lock_id": lock.lock_id}
            )

    def status(self, block_id: str) -> LockRecord | None:
        """The unexpired lock on a block, if any; expired records read as
        absent whether or not a sweep has removed them."""
        with self._store.transaction() as state:
            now = self._clock.now()
            if block_id not in state.blocks:
                raise ServiceError("UNKNOWN_BLOCK", f"no block {block_id}")
            lock = state.locks.get(block_id)
            if lock is not None and lock.is_live(now):
                return lock
            return None

    def validate_for_submit(self, lock_id: str, block_id: str, actor: str) -> LockRecord:
        """Check that ``lock_id`` is a live lock on ``block_id`` held by
        ``actor``; the gate every block-version submission passes through."""
        with self._store.transaction() as state:
            now = self._clock.now()
            lock = state.find_lock(lock_id)
            if lock is None:
                raise ServiceError("UNKNOWN_LOCK", f"no lock {lock_id}")
            if not lock.is_live(now):
                raise ServiceError("LOCK_EXPIRED", f"lock {lock_id} has expired")
            if lock.block_id != block_id:
                raise ServiceError("WRONG_BLOCK", "lock belongs to a different block")
            if lock.holder != actor:
                raise ServiceError("NOT_HOLDER", "lock is held by another user")
            return lock

    def list_locks(self) -> list[LockRecord]:
        """All live locks (for the monitoring surface)."""
        with self._store.transaction() as state:
            now = self._clock.now()
            live = [lock for lock in state.locks.values() if lock.is_live(now)]
            return sorted(live, key=lambda lock: lock.block_id)

    def sweep_expired(self) -> int:
        """Physically drop expired lock records. Pure hygiene: observable
        behavior must be identical whether or not this ever runs."""
        with self._store.transaction() as state:
            now = self._clock.now()
            dead = [
                {"block_id": lock.block_id, "lock_id": lock.lock_id}
                for lock in state.locks.values()
                if not lock.is_live(now)
            ]
            if dead:
                self._store.commit("lock.sweep", {"locks": dead})
            return len(dead)
