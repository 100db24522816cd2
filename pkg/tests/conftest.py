"""Shared fixtures: controllable clock, cheap-KDF services, live servers."""

from __future__ import annotations

import hashlib
import threading
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest
import requests

from sigil3d.auth import AuthService
from sigil3d.blobs import BlobStore
from sigil3d.locks import LockManager
from sigil3d.model import Role
from sigil3d.server import ApiServer, ServerConfig, build_server
from sigil3d.store import MetadataStore
from sigil3d.versions import VersionStore

# Cheap scrypt for tests; verification reads parameters from the digest.
FAST_KDF = 4

START = datetime(2026, 1, 1, 12, 0, 0, tzinfo=timezone.utc)


class FakeClock:
    """Manually advanced clock; thread-safe reads."""

    def __init__(self, start: datetime = START) -> None:
        self._now = start
        self._mutex = threading.Lock()

    def now(self) -> datetime:
        with self._mutex:
            return self._now

    def advance(self, seconds: float) -> None:
        with self._mutex:
            self._now += timedelta(seconds=seconds)


class Services:
    """Service stack over an in-memory store with a fake clock."""

    def __init__(self, tmp_path: Path, store: MetadataStore | None = None) -> None:
        self.clock = FakeClock()
        self.store = store if store is not None else MetadataStore.in_memory()
        self.blobs = BlobStore(tmp_path / "blobs")
        self.auth = AuthService(self.store, self.clock, scrypt_log2_n=FAST_KDF)
        self.locks = LockManager(self.store, self.clock)
        self.versions = VersionStore(self.store, self.blobs, self.locks, self.clock)

    def user(self, username: str, role: Role, password: str = "correct horse"):
        if username == "root":
            return self.auth.bootstrap_admin(username, password)
        return self.auth.register_user(self.admin, username, password, role)

    @property
    def admin(self):
        with self.store.transaction() as state:
            return state.users[state.users_by_name["root"]]


@pytest.fixture
def services(tmp_path):
    svc = Services(tmp_path)
    svc.user("root", Role.ADMINISTRATOR)
    return svc


@pytest.fixture
def editor(services):
    return services.user("maria", Role.EDITOR)


@pytest.fixture
def visitor(services):
    return services.user("guest", Role.VISITOR)


@pytest.fixture
def block(services):
    return services.versions.create_block(services.admin, "exedra")


def make_server(tmp_path: Path, **overrides) -> tuple[ApiServer, object, str]:
    """Build a live threaded server on an ephemeral port."""
    defaults = dict(
        data_dir=tmp_path / "data",
        bind_host="127.0.0.1",
        bind_port=0,
        bootstrap_admin="root:rootpass123",
        scrypt_log2_n=FAST_KDF,
    )
    defaults.update(overrides)
    config = ServerConfig(**defaults)
    server, dir_lock = build_server(config)
    thread = threading.Thread(target=server.serve_forever, kwargs={"poll_interval": 0.05})
    thread.daemon = True
    thread.start()
    host, port = server.server_address[0], server.server_address[1]
    return server, dir_lock, f"http://{host}:{port}"


@pytest.fixture
def live_server(tmp_path):
    server, dir_lock, base_url = make_server(tmp_path)
    yield base_url, server
    server.graceful_stop()
    dir_lock.release()


class Client:
    """Minimal multi-identity HTTP test client against one server."""

    def __init__(self, base_url: str):
        self.base_url = base_url
        self.http = requests.Session()
        self.tokens: dict[str, str] = {}

    def login(self, username: str, password: str) -> dict:
        r = self.http.post(
            f"{self.base_url}/api/v1/auth/login",
            json={"username": username, "password": password},
        )
        assert r.status_code == 200, r.text
        body = r.json()
        self.tokens[username] = body["token"]
        return body

    def call(self, method: str, path: str, as_user: str | None = None, **kwargs):
        headers = kwargs.pop("headers", {})
        if as_user is not None:
            headers["Authorization"] = f"Bearer {self.tokens[as_user]}"
        return self.http.request(method, f"{self.base_url}{path}", headers=headers, **kwargs)

    def ok(self, method: str, path: str, as_user: str, expect: int = 200, **kwargs):
        r = self.call(method, path, as_user=as_user, **kwargs)
        assert r.status_code == expect, f"{method} {path}: {r.status_code} {r.text}"
        return r.json() if r.content else None

    def setup_admin(self):
        self.login("root", "rootpass123")

    def make_user(self, username: str, role: str, password: str = "password123"):
        self.ok(
            "POST",
            "/api/v1/users",
            "root",
            expect=201,
            json={"username": username, "password": password, "role": role},
        )
        self.login(username, password)

    def make_block(self, name: str = "block") -> str:
        return self.ok("POST", "/api/v1/blocks", "root", expect=201, json={"name": name})[
            "block_id"
        ]

    def put_blob(self, as_user: str, data: bytes) -> str:
        digest = hashlib.sha256(data).hexdigest()
        r = self.call("PUT", f"/api/v1/blobs/{digest}", as_user=as_user, data=data)
        assert r.status_code == 201, r.text
        return digest

    def manifest(self, block_id: str, contents: list[bytes], base=None, as_user="root"):
        assets = []
        for i, data in enumerate(contents):
            digest = self.put_blob(as_user, data)
            assets.append(
                {
                    "asset_id": f"asset_{i}",
                    "kind": "static_mesh",
                    "path": f"f/{i}.bin",
                    "content_hash": digest,
                    "size_bytes": len(data),
                }
            )
        return {
            "schema_version": 1,
            "block_id": block_id,
            "base_version": base,
            "assets": assets,
        }
