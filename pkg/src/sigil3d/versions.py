"""Version lifecycle: pending submissions, administrator decisions, head
tracking, append-only history, and sync-delta computation.

Block content moves only through this pipeline: an editor submits a pending
version against the current head (optimistic base check), an administrator
approves or rejects it, and approval advances the head. The base is checked
again at approval time: a version can sit pending while the head moves, and
the lock alone cannot close that race.
"""

from __future__ import annotations

import dataclasses
from typing import Any, Callable, Iterable

from .auth import PermissionAction, authorize
from .blobs import BlobStore
from .clock import Clock
from .errors import ServiceError
from .locks import LockManager
from .model import (
    BlockRecord,
    BlockVersion,
    ClientState,
    LockRecord,
    MapRecord,
    MapVersion,
    PackManifest,
    Placement,
    SyncDelta,
    UserAccount,
    VersionState,
    format_timestamp,
    new_id,
    validate_placement,
)
from .store import MetadataStore, State
from .validation import Violation, validate_presence, validate_structure

LIST_CAP = 10_000


@dataclasses.dataclass(frozen=True)
class EditProject:
    """The downloadable editing bundle for one locked block."""

    block_id: str
    manifest: PackManifest
    lock: LockRecord
    base_version: str | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "block_id": self.block_id,
            "manifest": self.manifest.to_dict(),
            "lock": self.lock.to_dict(),
            "base_version": self.base_version,
        }


@dataclasses.dataclass(frozen=True)
class MapSyncDelta:
    """Map counterpart of a block sync delta; carries placements instead of
    a manifest."""

    map_id: str
    new_version: str
    placements: tuple[Placement, ...]
    old_version: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "map_id": self.map_id,
            "old_version": self.old_version,
            "new_version": self.new_version,
            "placements": [p.to_dict() for p in self.placements],
        }


@dataclasses.dataclass(frozen=True)
class SyncResult:
    deltas: tuple[SyncDelta, ...]
    map_deltas: tuple[MapSyncDelta, ...]
    unknown_ids: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "deltas": [d.to_dict() for d in self.deltas],
            "map_deltas": [d.to_dict() for d in self.map_deltas],
            "unknown_ids": list(self.unknown_ids),
        }


class VersionStore:
    def __init__(
        self,
        store: MetadataStore,
        blobs: BlobStore,
        locks: LockManager,
        clock: Clock,
        id_factory: Callable[[], str] = new_id,
    ) -> None:
        self._store = store
        self._blobs = blobs
        self._locks = locks
        self._clock = clock
        self._new_id = id_factory

    # -- catalog ---------------------------------------------------------

    def create_block(self, actor: UserAccount, name: str) -> BlockRecord:
        if not authorize(actor, PermissionAction.CREATE_BLOCK):
            raise ServiceError("FORBIDDEN", "only administrators may create blocks")
        _check_name(name)
        with self._store.transaction():
            record = BlockRecord(
                block_id=self._new_id(),
                name=name,
                head_version=None,
                created_by=actor.user_id,
                created_at=self._clock.now(),
            )
            self._store.commit("block.create", {"block": record.to_dict()})
            return record

    def create_map(self, actor: UserAccount, name: str) -> MapRecord:
        if not authorize(actor, PermissionAction.CREATE_MAP):
            raise ServiceError("FORBIDDEN", "only administrators may create maps")
        _check_name(name)
        with self._store.transaction():
            record = MapRecord(
                map_id=self._new_id(),
                name=name,
                head_version=None,
                created_by=actor.user_id,
                created_at=self._clock.now(),
            )
            self._store.commit("map.create", {"map": record.to_dict()})
            return record

    def list_blocks(self) -> list[BlockRecord]:
        with self._store.transaction() as state:
            records = sorted(state.blocks.values(), key=lambda b: (b.created_at, b.block_id))
            return records[:LIST_CAP]

    def list_maps(self) -> list[MapRecord]:
        with self._store.transaction() as state:
            records = sorted(state.maps.values(), key=lambda m: (m.created_at, m.map_id))
            return records[:LIST_CAP]

    def get_block(self, block_id: str) -> BlockRecord:
        with self._store.transaction() as state:
            record = state.blocks.get(block_id)
            if record is None:
                raise ServiceError("UNKNOWN_BLOCK", f"no block {block_id}")
            return record

    def get_map(self, map_id: str) -> MapRecord:
        with self._store.transaction() as state:
            record = state.maps.get(map_id)
            if record is None:
                raise ServiceError("UNKNOWN_MAP", f"no map {map_id}")
            return record

    # -- block versions --------------------------------------------------

    def submit_block_version(
        self,
        block_id: str,
        manifest: "PackManifest | dict[str, Any]",
        lock_id: str,
        author: UserAccount,
    ) -> BlockVersion:
        with self._store.transaction() as state:
            block = state.blocks.get(block_id)
            if block is None:
                raise ServiceError("UNKNOWN_BLOCK", f"no block {block_id}")
            if not authorize(author, PermissionAction.SUBMIT_BLOCK_VERSION):
                raise ServiceError("FORBIDDEN", "role may not submit block versions")
            self._locks.validate_for_submit(lock_id, block_id, author.user_id)

            violations = validate_structure(manifest, block_id)
            if violations:
                raise ServiceError(
                    "VALIDATION_FAILED", "manifest failed validation", violations
                )
            typed = (
                manifest
                if isinstance(manifest, PackManifest)
                else PackManifest.from_dict(manifest)
            )
            violations = validate_presence(typed, self._blobs)
            if violations:
                raise ServiceError(
                    "VALIDATION_FAILED", "manifest references missing content", violations
                )
            if typed.base_version != block.head_version:
                raise ServiceError(
                    "STALE_BASE",
                    f"manifest base {typed.base_version} is not the current head "
                    f"{block.head_version}",
                )
            version = BlockVersion(
                version_id=self._new_id(),
                block_id=block_id,
                seq=len(state.block_history.get(block_id, ())) + 1,
                base_version=typed.base_version,
                manifest=typed,
                state=VersionState.PENDING,
                author=author.user_id,
                submitted_at=self._clock.now(),
            )
            self._store.commit("block_version.create", {"version": version.to_dict()})
            return version

    def head(self, block_id: str) -> BlockVersion | None:
        with self._store.transaction() as state:
            block = state.blocks.get(block_id)
            if block is None:
                raise ServiceError("UNKNOWN_BLOCK", f"no block {block_id}")
            if block.head_version is None:
                return None
            return state.block_versions[block.head_version]

    def history(self, block_id: str) -> list[BlockVersion]:
        with self._store.transaction() as state:
            if block_id not in state.blocks:
                raise ServiceError("UNKNOWN_BLOCK", f"no block {block_id}")
            ids = state.block_history.get(block_id, [])
            return [state.block_versions[v] for v in ids][:LIST_CAP]

    # -- map versions ----------------------------------------------------

    def submit_map_version(
        self, map_id: str, placements: Iterable[Placement], admin: UserAccount
    ) -> MapVersion:
        placements = tuple(placements)
        with self._store.transaction() as state:
            map_record = state.maps.get(map_id)
            if map_record is None:
                raise ServiceError("UNKNOWN_MAP", f"no map {map_id}")
            if not authorize(admin, PermissionAction.SUBMIT_MAP_VERSION):
                raise ServiceError("FORBIDDEN", "only administrators may submit map versions")
            violations: list[Violation] = []
            for index, placement in enumerate(placements):
                if placement.block_id not in state.blocks:
                    raise ServiceError(
                        "UNKNOWN_BLOCK",
                        f"placements[{index}] references unknown block {placement.block_id}",
                    )
                for code in validate_placement(placement):
                    violations.append(
                        Violation(code, f"invalid placement at index {index}", f"placements[{index}]")
                    )
            if violations:
                raise ServiceError("VALIDATION_FAILED", "invalid placements", violations)
            version = MapVersion(
                version_id=self._new_id(),
                map_id=map_id,
                seq=len(state.map_history.get(map_id, ())) + 1,
                placements=placements,
                state=VersionState.PENDING,
                author=admin.user_id,
                submitted_at=self._clock.now(),
            )
            self._store.commit("map_version.create", {"version": version.to_dict()})
            return version

    def map_head(self, map_id: str) -> MapVersion | None:
        with self._store.transaction() as state:
            map_record = state.maps.get(map_id)
            if map_record is None:
                raise ServiceError("UNKNOWN_MAP", f"no map {map_id}")
            if map_record.head_version is None:
                return None
            return state.map_versions[map_record.head_version]

    def map_history(self, map_id: str) -> list[MapVersion]:
        with self._store.transaction() as state:
            if map_id not in state.maps:
                raise ServiceError("UNKNOWN_MAP", f"no map {map_id}")
            ids = state.map_history.get(map_id, [])
            return [state.map_versions[v] for v in ids][:LIST_CAP]

    # -- moderation ------------------------------------------------------

    def pending_versions(self) -> list[tuple[str, "BlockVersion | MapVersion"]]:
        """Every pending version, blocks and maps, oldest first."""
        with self._store.transaction() as state:
            pending: list[tuple[str, BlockVersion | MapVersion]] = []
            for version in state.block_versions.values():
                if version.state is VersionState.PENDING:
                    pending.append(("block", version))
            for version in state.map_versions.values():
                if version.state is VersionState.PENDING:
                    pending.append(("map", version))
            pending.sort(key=lambda kv: (kv[1].submitted_at, kv[1].version_id))
            return pending[:LIST_CAP]

    def decide_version(
        self,
        version_id: str,
        verdict: str,
        admin: UserAccount,
        reason: str | None = None,
    ) -> "BlockVersion | MapVersion":
        if verdict not in ("approve", "reject"):
            raise ServiceError("MALFORMED_REQUEST", f"unknown verdict {verdict!r}")
        if not authorize(admin, PermissionAction.DECIDE_VERSION):
            raise ServiceError("FORBIDDEN", "only administrators decide versions")
        with self._store.transaction() as state:
            now = self._clock.now()
            kind, version = self._find_version(state, version_id)
            if version.state is not VersionState.PENDING:
                raise ServiceError(
                    "ALREADY_DECIDED", f"version is already {version.state.value}"
                )
            set_head = False
            if verdict == "approve":
                self._check_approvable(state, kind, version)
                set_head = True
            self._store.commit(
                "version.decide",
                {
                    "kind": kind,
                    "version_id": version_id,
                    "state": "approved" if verdict == "approve" else "rejected",
                    "decided_by": admin.user_id,
                    "decided_at": format_timestamp(now),
                    "reason": reason if verdict == "reject" else None,
                    "set_head": set_head,
                },
            )
            if kind == "block":
                return state.block_versions[version_id]
            return state.map_versions[version_id]

    def _find_version(
        self, state: State, version_id: str
    ) -> tuple[str, "BlockVersion | MapVersion"]:
        if version_id in state.block_versions:
            return "block", state.block_versions[version_id]
        if version_id in state.map_versions:
            return "map", state.map_versions[version_id]
        raise ServiceError("UNKNOWN_VERSION", f"no version {version_id}")

    def _check_approvable(
        self, state: State, kind: str, version: "BlockVersion | MapVersion"
    ) -> None:
        if kind == "block":
            assert isinstance(version, BlockVersion)
            head = state.blocks[version.block_id].head_version
            if version.base_version != head:
                raise ServiceError(
                    "STALE_BASE",
                    f"version was based on {version.base_version} but the head is now {head}",
                )
            # Approval re-checks content presence: approved must imply valid
            # against the store at decision time, not just submission time.
            violations = validate_presence(version.manifest, self._blobs)
            if violations:
                raise ServiceError(
                    "VALIDATION_FAILED", "manifest references missing content", violations
                )
        else:
            assert isinstance(version, MapVersion)
            head_id = state.maps[version.map_id].head_version
            if head_id is not None and state.map_versions[head_id].seq >= version.seq:
                # Map versions carry no base pointer; refusing to approve
                # behind the head keeps head seq strictly increasing.
                raise ServiceError(
                    "STALE_BASE",
                    f"a newer map version (seq {state.map_versions[head_id].seq}) "
                    "is already approved",
                )

    # -- sync ------------------------------------------------------------

    def compute_sync(self, client: ClientState) -> SyncResult:
        """Deltas that bring a client to the current heads, one consistent
        snapshot. Ids the server does not know are echoed, never an error."""
        with self._store.transaction() as state:
            deltas = []
            for block_id in sorted(state.blocks):
                head_id = state.blocks[block_id].head_version
                if head_id is None:
                    continue
                known = client.blocks.get(block_id)
                if known == head_id:
                    continue
                deltas.append(
                    SyncDelta(
                        block_id=block_id,
                        old_version=known,
                        new_version=head_id,
                        manifest=state.block_versions[head_id].manifest,
                    )
                )
            map_deltas = []
            for map_id in sorted(state.maps):
                head_id = state.maps[map_id].head_version
                if head_id is None:
                    continue
                known = client.maps.get(map_id)
                if known == head_id:
                    continue
                map_deltas.append(
                    MapSyncDelta(
                        map_id=map_id,
                        old_version=known,
                        new_version=head_id,
                        placements=state.map_versions[head_id].placements,
                    )
                )
            unknown = [b for b in sorted(client.blocks) if b not in state.blocks]
            unknown += [m for m in sorted(client.maps) if m not in state.maps]
            return SyncResult(
                deltas=tuple(deltas),
                map_deltas=tuple(map_deltas),
                unknown_ids=tuple(unknown),
            )

    # -- edit projects ---------------------------------------------------

    def edit_project(self, block_id: str, actor: UserAccount) -> EditProject:
        """The checkout bundle: head manifest (empty for a fresh block), the
        caller's live lock, and the base the next submission must name."""
        with self._store.transaction() as state:
            now = self._clock.now()
            block = state.blocks.get(block_id)
            if block is None:
                raise ServiceError("UNKNOWN_BLOCK", f"no block {block_id}")
            if not authorize(actor, PermissionAction.LOCK_BLOCK):
                raise ServiceError("FORBIDDEN", "role may not edit blocks")
            lock = state.locks.get(block_id)
            if lock is None or not lock.is_live(now) or lock.holder != actor.user_id:
                raise ServiceError(
                    "NOT_HOLDER", "edit projects require holding the block's live lock"
                )
            if block.head_version is not None:
                manifest = state.block_versions[block.head_version].manifest
            else:
                manifest = PackManifest(block_id=block_id, assets=())
            return EditProject(
                block_id=block_id,
                manifest=manifest,
                lock=lock,
                base_version=block.head_version,
            )

    # -- garbage collection ----------------------------------------------

    def referenced_hashes(self) -> set[str]:
        """Every blob hash referenced by any version in any state."""
        with self._store.transaction() as state:
            refs: set[str] = set()
            for version in state.block_versions.values():
                for asset in version.manifest.assets:
                    refs.add(asset.content_hash)
            return refs


def _check_name(name: str) -> None:
    if not isinstance(name, str) or not 1 <= len(name) <= 64:
        raise ServiceError("MALFORMED_REQUEST", "name must be 1-64 characters")
