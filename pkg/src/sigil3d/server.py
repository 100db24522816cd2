"""HTTP/JSON API server.

One process owns one data directory (guarded by a lock file) and exposes the
full service surface under ``/api/v1``. Every endpoint except login runs
authenticate-then-authorize before touching state; every non-2xx response
body is the uniform error envelope ``{"error": {code, message[, violations]}}``.

The server is thread-per-connection: request handlers run concurrently and
all shared-state discipline is delegated to the store's commit point, so the
lock manager's atomicity guarantees hold end-to-end over the wire.
"""

from __future__ import annotations

import argparse
import fcntl
import json
import logging
import mimetypes
import os
import re
import signal
import sys
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Callable
from urllib.parse import urlsplit

from .auth import DEFAULT_SESSION_TTL, AuthService, PermissionAction, authorize
from .blobs import DEFAULT_MAX_BLOB_SIZE, BlobStore
from .clock import SYSTEM_CLOCK, Clock
from .errors import ServiceError, http_status
from .journal import Failpoints
from .locks import DEFAULT_LOCK_TTL, DEFAULT_MAX_LOCK_TTL, LockManager
from .model import ClientState, Placement, Role
from .store import MetadataStore
from .validation import normalize_path
from .versions import VersionStore

log = logging.getLogger("sigil3d.server")

DEFAULT_BIND = "127.0.0.1:8640"
MAX_JSON_BODY = 8 * 1024 * 1024
SWEEP_INTERVAL = 30.0


@dataclass
class ServerConfig:
    data_dir: Path
    bind_host: str = "127.0.0.1"
    bind_port: int = 8640
    bootstrap_admin: str | None = None
    max_blob_size: int = DEFAULT_MAX_BLOB_SIZE
    session_ttl: int = DEFAULT_SESSION_TTL
    lock_ttl: int = DEFAULT_LOCK_TTL
    max_lock_ttl: int = DEFAULT_MAX_LOCK_TTL
    paranoid_reads: bool = False
    console_dir: Path | None = None
    scrypt_log2_n: int = 14


class ServiceBundle:
    """Everything a request handler needs, built over one data directory."""

    def __init__(
        self,
        config: ServerConfig,
        clock: Clock = SYSTEM_CLOCK,
        failpoints: Failpoints | None = None,
    ) -> None:
        self.config = config
        self.clock = clock
        meta_dir = config.data_dir / "meta"
        self.store = MetadataStore.open(meta_dir, failpoints=failpoints)
        self.blobs = BlobStore(
            config.data_dir / "blobs",
            max_blob_size=config.max_blob_size,
            paranoid_reads=config.paranoid_reads,
            failpoints=failpoints,
        )
        self.auth = AuthService(
            self.store,
            clock,
            session_ttl=config.session_ttl,
            scrypt_log2_n=config.scrypt_log2_n,
        )
        self.locks = LockManager(
            self.store, clock, default_ttl=config.lock_ttl, max_ttl=config.max_lock_ttl
        )
        self.versions = VersionStore(self.store, self.blobs, self.locks, clock)

    def bootstrap(self) -> None:
        """Create the first administrator when the store is empty."""
        with self.store.transaction() as state:
            has_users = bool(state.users)
        if has_users:
            return
        if not self.config.bootstrap_admin:
            raise ServiceError(
                "STORAGE_FAILURE",
                "empty data directory and no --bootstrap-admin USER:PASSWORD given",
            )
        username, _, password = self.config.bootstrap_admin.partition(":")
        self.auth.bootstrap_admin(username, password)
        log.info("bootstrapped administrator %r", username)

    def sweep(self) -> None:
        self.locks.sweep_expired()
        self.auth.sweep_expired_sessions()

    def close(self) -> None:
        self.store.close()


# ---------------------------------------------------------------------------
# Routing


@dataclass
class Route:
    method: str
    pattern: re.Pattern
    handler: Callable[["RequestContext"], tuple[int, Any]]
    action: PermissionAction | None  # None = public endpoint


@dataclass
class RequestContext:
    services: ServiceBundle
    handler: "ApiHandler"
    params: dict[str, str]
    account: Any = None
    token: str | None = None

    def json_body(self, max_bytes: int = MAX_JSON_BODY) -> dict[str, Any]:
        raw = self.handler.read_body(max_bytes)
        try:
            parsed = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ServiceError("MALFORMED_REQUEST", f"request body is not valid JSON: {exc}")
        if not isinstance(parsed, dict):
            raise ServiceError("MALFORMED_REQUEST", "request body must be a JSON object")
        return parsed


def _req_str(body: dict[str, Any], key: str) -> str:
    value = body.get(key)
    if not isinstance(value, str):
        raise ServiceError("MALFORMED_REQUEST", f"field {key!r} must be a string")
    return value


def ep_login(ctx: RequestContext) -> tuple[int, Any]:
    body = ctx.json_body()
    session = ctx.services.auth.login(_req_str(body, "username"), _req_str(body, "password"))
    account = ctx.services.auth.account(session.user_id)
    return 200, {
        "token": session.token,
        "expires_at": session.to_dict()["expires_at"],
        "role": account.role.value,
    }


def ep_logout(ctx: RequestContext) -> tuple[int, Any]:
    assert ctx.token is not None
    ctx.services.auth.logout(ctx.token)
    return 204, None


def ep_create_user(ctx: RequestContext) -> tuple[int, Any]:
    body = ctx.json_body()
    role_raw = _req_str(body, "role")
    try:
        role = Role(role_raw)
    except ValueError:
        raise ServiceError("MALFORMED_REQUEST", f"unknown role {role_raw!r}")
    account = ctx.services.auth.register_user(
        ctx.account, _req_str(body, "username"), _req_str(body, "password"), role
    )
    return 201, account.to_public_dict()


def ep_list_users(ctx: RequestContext) -> tuple[int, Any]:
    return 200, [u.to_public_dict() for u in ctx.services.auth.list_users()]


def ep_list_maps(ctx: RequestContext) -> tuple[int, Any]:
    return 200, [m.to_dict() for m in ctx.services.versions.list_maps()]


def ep_create_map(ctx: RequestContext) -> tuple[int, Any]:
    body = ctx.json_body()
    record = ctx.services.versions.create_map(ctx.account, _req_str(body, "name"))
    return 201, record.to_dict()


def ep_map_head(ctx: RequestContext) -> tuple[int, Any]:
    head = ctx.services.versions.map_head(ctx.params["id"])
    if head is None:
        raise ServiceError("UNKNOWN_VERSION", "map has no approved version")
    return 200, head.to_dict()


def ep_map_versions(ctx: RequestContext) -> tuple[int, Any]:
    return 200, [v.to_dict() for v in ctx.services.versions.map_history(ctx.params["id"])]


def ep_submit_map_version(ctx: RequestContext) -> tuple[int, Any]:
    body = ctx.json_body()
    placements_raw = body.get("placements")
    if not isinstance(placements_raw, list):
        raise ServiceError("MALFORMED_REQUEST", "field 'placements' must be a list")
    placements = [
        Placement.from_dict(item, f"placements[{i}]") for i, item in enumerate(placements_raw)
    ]
    version = ctx.services.versions.submit_map_version(ctx.params["id"], placements, ctx.account)
    return 201, version.to_dict()


def ep_list_blocks(ctx: RequestContext) -> tuple[int, Any]:
    # Each record carries its live lock (or null) so clients can monitor
    # editing activity without extra round trips.
    services = ctx.services
    blocks = services.versions.list_blocks()
    out = []
    for record in blocks:
        lock = services.locks.status(record.block_id)
        item = record.to_dict()
        item["lock"] = lock.to_dict() if lock else None
        out.append(item)
    return 200, out


def ep_create_block(ctx: RequestContext) -> tuple[int, Any]:
    body = ctx.json_body()
    record = ctx.services.versions.create_block(ctx.account, _req_str(body, "name"))
    return 201, record.to_dict()


def ep_block_head(ctx: RequestContext) -> tuple[int, Any]:
    head = ctx.services.versions.head(ctx.params["id"])
    if head is None:
        raise ServiceError("UNKNOWN_VERSION", "block has no approved version")
    return 200, head.to_dict()


def ep_block_versions(ctx: RequestContext) -> tuple[int, Any]:
    return 200, [v.to_dict() for v in ctx.services.versions.history(ctx.params["id"])]


def ep_acquire_lock(ctx: RequestContext) -> tuple[int, Any]:
    body = ctx.json_body() if ctx.handler.has_body() else {}
    ttl = body.get("ttl_seconds")
    lock = ctx.services.locks.acquire(ctx.params["id"], ctx.account.user_id, ttl)
    return 200, lock.to_dict()


def ep_renew_lock(ctx: RequestContext) -> tuple[int, Any]:
    body = ctx.json_body()
    lock = ctx.services.locks.renew(_req_str(body, "lock_id"), ctx.account.user_id)
    return 200, lock.to_dict()


def ep_release_lock(ctx: RequestContext) -> tuple[int, Any]:
    lock = ctx.services.locks.status(ctx.params["id"])
    if lock is None:
        raise ServiceError("UNKNOWN_LOCK", "block is not locked")
    ctx.services.locks.release(lock.lock_id, ctx.account.user_id)
    return 204, None


def ep_edit_project(ctx: RequestContext) -> tuple[int, Any]:
    project = ctx.services.versions.edit_project(ctx.params["id"], ctx.account)
    return 200, project.to_dict()


def ep_submit_block_version(ctx: RequestContext) -> tuple[int, Any]:
    body = ctx.json_body()
    manifest = body.get("manifest")
    if not isinstance(manifest, dict):
        raise ServiceError("MALFORMED_REQUEST", "field 'manifest' must be an object")
    version = ctx.services.versions.submit_block_version(
        ctx.params["id"], manifest, _req_str(body, "lock_id"), ctx.account
    )
    return 201, version.to_dict()


def ep_review_pending(ctx: RequestContext) -> tuple[int, Any]:
    pending = ctx.services.versions.pending_versions()
    out = []
    for kind, version in pending:
        item = version.to_dict()
        item["kind"] = kind
        item["target_id"] = item.get("block_id") or item.get("map_id")
        out.append(item)
    return 200, out


def ep_approve(ctx: RequestContext) -> tuple[int, Any]:
    version = ctx.services.versions.decide_version(ctx.params["id"], "approve", ctx.account)
    return 200, version.to_dict()


def ep_reject(ctx: RequestContext) -> tuple[int, Any]:
    body = ctx.json_body() if ctx.handler.has_body() else {}
    reason = body.get("reason")
    if reason is not None and not isinstance(reason, str):
        raise ServiceError("MALFORMED_REQUEST", "field 'reason' must be a string")
    version = ctx.services.versions.decide_version(
        ctx.params["id"], "reject", ctx.account, reason
    )
    return 200, version.to_dict()


def ep_put_blob(ctx: RequestContext) -> tuple[int, Any]:
    handler = ctx.handler
    length = handler.body_length()
    if length > ctx.services.config.max_blob_size:
        raise ServiceError("BLOB_TOO_LARGE", "declared length exceeds the blob size limit")
    key = ctx.services.blobs.put(ctx.params["sha256"], _BodyReader(handler))
    return 201, {"content_hash": key, "size_bytes": length}


def ep_get_blob(ctx: RequestContext) -> tuple[int, Any]:
    data = ctx.services.blobs.get(ctx.params["sha256"])
    return 200, (data, "application/octet-stream")


def ep_sync(ctx: RequestContext) -> tuple[int, Any]:
    body = ctx.json_body()
    client_state = ClientState.from_dict(body)
    result = ctx.services.versions.compute_sync(client_state)
    return 200, result.to_dict()


class _BodyReader:
    """File-like view over the unread request body; consumption is tracked
    on the handler so error paths can drain what remains."""

    def __init__(self, handler: "ApiHandler") -> None:
        self._handler = handler

    def read(self, n: int = -1) -> bytes:
        return self._handler.read_chunk(n)


_UUID_SEG = r"(?P<id>[0-9a-fA-F-]{36})"
_SHA_SEG = r"(?P<sha256>[0-9a-f]{64})"


def _route(method: str, pattern: str, handler, action: PermissionAction | None) -> Route:
    return Route(method, re.compile(f"^{pattern}$"), handler, action)


ROUTES = [
    _route("POST", r"/api/v1/auth/login", ep_login, None),
    _route("POST", r"/api/v1/auth/logout", ep_logout, PermissionAction.VIEW_CONTENT),
    _route("POST", r"/api/v1/users", ep_create_user, PermissionAction.MANAGE_USERS),
    _route("GET", r"/api/v1/users", ep_list_users, PermissionAction.MANAGE_USERS),
    _route("GET", r"/api/v1/maps", ep_list_maps, PermissionAction.VIEW_CONTENT),
    _route("POST", r"/api/v1/maps", ep_create_map, PermissionAction.CREATE_MAP),
    _route("GET", rf"/api/v1/maps/{_UUID_SEG}/head", ep_map_head, PermissionAction.VIEW_CONTENT),
    _route(
        "GET", rf"/api/v1/maps/{_UUID_SEG}/versions", ep_map_versions, PermissionAction.VIEW_CONTENT
    ),
    _route(
        "POST",
        rf"/api/v1/maps/{_UUID_SEG}/versions",
        ep_submit_map_version,
        PermissionAction.SUBMIT_MAP_VERSION,
    ),
    _route("GET", r"/api/v1/blocks", ep_list_blocks, PermissionAction.VIEW_CONTENT),
    _route("POST", r"/api/v1/blocks", ep_create_block, PermissionAction.CREATE_BLOCK),
    _route(
        "GET", rf"/api/v1/blocks/{_UUID_SEG}/head", ep_block_head, PermissionAction.VIEW_CONTENT
    ),
    _route(
        "GET",
        rf"/api/v1/blocks/{_UUID_SEG}/versions",
        ep_block_versions,
        PermissionAction.VIEW_CONTENT,
    ),
    _route(
        "POST", rf"/api/v1/blocks/{_UUID_SEG}/lock", ep_acquire_lock, PermissionAction.LOCK_BLOCK
    ),
    _route(
        "POST",
        rf"/api/v1/blocks/{_UUID_SEG}/lock/renew",
        ep_renew_lock,
        PermissionAction.LOCK_BLOCK,
    ),
    _route(
        "DELETE", rf"/api/v1/blocks/{_UUID_SEG}/lock", ep_release_lock, PermissionAction.LOCK_BLOCK
    ),
    _route(
        "GET",
        rf"/api/v1/blocks/{_UUID_SEG}/editproject",
        ep_edit_project,
        PermissionAction.LOCK_BLOCK,
    ),
    _route(
        "POST",
        rf"/api/v1/blocks/{_UUID_SEG}/versions",
        ep_submit_block_version,
        PermissionAction.SUBMIT_BLOCK_VERSION,
    ),
    _route("GET", r"/api/v1/review/pending", ep_review_pending, PermissionAction.DECIDE_VERSION),
    _route(
        "POST", rf"/api/v1/versions/{_UUID_SEG}/approve", ep_approve, PermissionAction.DECIDE_VERSION
    ),
    _route(
        "POST", rf"/api/v1/versions/{_UUID_SEG}/reject", ep_reject, PermissionAction.DECIDE_VERSION
    ),
    _route(
        "PUT", rf"/api/v1/blobs/{_SHA_SEG}", ep_put_blob, PermissionAction.SUBMIT_BLOCK_VERSION
    ),
    _route("GET", rf"/api/v1/blobs/{_SHA_SEG}", ep_get_blob, PermissionAction.VIEW_CONTENT),
    _route("HEAD", rf"/api/v1/blobs/{_SHA_SEG}", ep_get_blob, PermissionAction.VIEW_CONTENT),
    _route("POST", r"/api/v1/sync", ep_sync, PermissionAction.VIEW_CONTENT),
]


# ---------------------------------------------------------------------------
# HTTP plumbing


class ApiServer(ThreadingHTTPServer):
    daemon_threads = True
    block_on_close = False
    allow_reuse_address = True
    request_queue_size = 128

    def __init__(self, address, services: ServiceBundle):
        super().__init__(address, ApiHandler)
        self.services = services
        self.inflight = 0
        self.inflight_mutex = threading.Lock()

    def track(self, delta: int) -> None:
        with self.inflight_mutex:
            self.inflight += delta

    def graceful_stop(self, drain_timeout: float = 10.0) -> None:
        """Stop accepting, let in-flight requests finish, close the store."""
        self.shutdown()
        deadline = time.monotonic() + drain_timeout
        while time.monotonic() < deadline:
            with self.inflight_mutex:
                if self.inflight == 0:
                    break
            time.sleep(0.01)
        self.server_close()
        self.services.close()


class ApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    timeout = 60
    server: ApiServer
    _body_remaining: int | None = None

    # -- request body helpers -------------------------------------------

    def body_length(self) -> int:
        if self.headers.get("Transfer-Encoding", "").lower() == "chunked":
            raise ServiceError("MALFORMED_REQUEST", "chunked bodies are not supported")
        try:
            return int(self.headers.get("Content-Length", "0"))
        except ValueError:
            raise ServiceError("MALFORMED_REQUEST", "invalid Content-Length")

    def has_body(self) -> bool:
        return self.body_length() > 0

    def read_chunk(self, n: int = -1) -> bytes:
        if self._body_remaining is None:
            self._body_remaining = self.body_length()
        if self._body_remaining <= 0:
            return b""
        if n < 0 or n > self._body_remaining:
            n = self._body_remaining
        chunk = self.rfile.read(n)
        self._body_remaining -= len(chunk)
        return chunk

    def read_body(self, max_bytes: int) -> bytes:
        length = self.body_length()
        if length > max_bytes:
            raise ServiceError("REQUEST_TOO_LARGE", f"request body exceeds {max_bytes} bytes")
        return self.read_chunk(length) if length else b""

    def drain_body(self) -> None:
        """Consume whatever body is left so keep-alive framing stays intact;
        give up and close the connection rather than swallow a huge upload."""
        try:
            if self._body_remaining is None:
                self._body_remaining = self.body_length()
        except ServiceError:
            self.close_connection = True
            return
        if self._body_remaining > 1024 * 1024:
            self.close_connection = True
            return
        while self._body_remaining > 0:
            if not self.read_chunk(64 * 1024):
                self.close_connection = True
                break

    # -- respond helpers --------------------------------------------------

    def respond_json(self, status: int, payload: Any) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(body)

    def respond_bytes(self, status: int, data: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(data)

    def respond_empty(self, status: int) -> None:
        self.send_response(status)
        self.send_header("Content-Length", "0")
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()

    def respond_error(self, err: ServiceError) -> None:
        self.respond_json(http_status(err.code), err.to_envelope())

    # -- dispatch ---------------------------------------------------------

    def handle_request_for(self, method: str) -> None:
        self._body_remaining = None
        self.server.track(+1)
        try:
            self._dispatch(method)
        except (BrokenPipeError, ConnectionResetError):
            self.close_connection = True
        finally:
            self.server.track(-1)

    def _dispatch(self, method: str) -> None:
        services = self.server.services
        path = urlsplit(self.path).path

        if method == "OPTIONS":
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Authorization, Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()
            return

        if path == "/console" or path.startswith("/console/"):
            self._serve_console(method, path)
            return

        matched_path = False
        for route in ROUTES:
            match = route.pattern.match(path)
            if not match:
                continue
            matched_path = True
            if route.method != method:
                continue
            params = {k: v.lower() for k, v in match.groupdict().items()}
            ctx = RequestContext(services=services, handler=self, params=params)
            try:
                if route.action is not None:
                    ctx.token = self._bearer_token()
                    ctx.account = services.auth.authenticate(ctx.token)
                    if not authorize(ctx.account, route.action):
                        raise ServiceError("FORBIDDEN", "role is not permitted this action")
                status, payload = route.handler(ctx)
            except ServiceError as err:
                self.drain_body()
                self.respond_error(err)
                return
            except Exception:
                log.exception("unhandled error on %s %s", method, path)
                self.drain_body()
                self.respond_json(
                    500, {"error": {"code": "INTERNAL", "message": "internal server error"}}
                )
                return
            # handlers that ignore their body must not poison keep-alive framing
            self.drain_body()
            if payload is None:
                self.respond_empty(status)
            elif isinstance(payload, tuple):
                self.respond_bytes(status, payload[0], payload[1])
            else:
                self.respond_json(status, payload)
            return

        self.drain_body()
        if matched_path:
            self.respond_json(
                405, {"error": {"code": "METHOD_NOT_ALLOWED", "message": f"no {method} here"}}
            )
        else:
            self.respond_json(
                404, {"error": {"code": "NOT_FOUND", "message": f"no route for {path}"}}
            )

    def _bearer_token(self) -> str:
        header = self.headers.get("Authorization", "")
        if not header.startswith("Bearer "):
            raise ServiceError("UNAUTHENTICATED", "missing bearer token")
        return header[len("Bearer ") :].strip()

    def _serve_console(self, method: str, path: str) -> None:
        if method not in ("GET", "HEAD"):
            self.respond_json(
                405, {"error": {"code": "METHOD_NOT_ALLOWED", "message": "console is read-only"}}
            )
            return
        console_dir = self.server.services.config.console_dir
        if console_dir is None:
            self.respond_json(
                404, {"error": {"code": "NOT_FOUND", "message": "console is not enabled"}}
            )
            return
        if path == "/console":
            self.send_response(301)
            self.send_header("Location", "/console/")
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        relative = path[len("/console/") :] or "index.html"
        try:
            relative = normalize_path(relative)
        except ServiceError:
            self.respond_json(404, {"error": {"code": "NOT_FOUND", "message": "bad path"}})
            return
        file_path = Path(console_dir) / relative
        if not file_path.is_file():
            self.respond_json(404, {"error": {"code": "NOT_FOUND", "message": "no such file"}})
            return
        content_type = mimetypes.guess_type(str(file_path))[0] or "application/octet-stream"
        self.respond_bytes(200, file_path.read_bytes(), content_type)

    def do_GET(self) -> None:
        self.handle_request_for("GET")

    def do_HEAD(self) -> None:
        self.handle_request_for("HEAD")

    def do_POST(self) -> None:
        self.handle_request_for("POST")

    def do_PUT(self) -> None:
        self.handle_request_for("PUT")

    def do_DELETE(self) -> None:
        self.handle_request_for("DELETE")

    def do_OPTIONS(self) -> None:
        self.handle_request_for("OPTIONS")

    def send_error(self, code, message=None, explain=None) -> None:  # type: ignore[override]
        """Protocol-level failures (bad request line, oversized headers)
        answer with the same envelope shape as application errors."""
        self.respond_json(
            int(code),
            {"error": {"code": "BAD_REQUEST", "message": message or str(code)}},
        )
        self.close_connection = True

    def log_message(self, fmt: str, *args: Any) -> None:
        log.debug("%s %s", self.address_string(), fmt % args)


# ---------------------------------------------------------------------------
# Process lifecycle


class DataDirLock:
    """Advisory exclusive lock on the data directory; released on process
    death, so a crashed server never wedges its store."""

    def __init__(self, data_dir: Path) -> None:
        data_dir.mkdir(parents=True, exist_ok=True)
        self._path = data_dir / "server.lock"
        self._fd = os.open(self._path, os.O_RDWR | os.O_CREAT, 0o644)
        try:
            fcntl.flock(self._fd, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError:
            os.close(self._fd)
            raise ServiceError(
                "STORAGE_FAILURE", f"data directory {data_dir} is already being served"
            )
        os.truncate(self._fd, 0)
        os.write(self._fd, f"{os.getpid()}\n".encode())

    def release(self) -> None:
        try:
            fcntl.flock(self._fd, fcntl.LOCK_UN)
        finally:
            os.close(self._fd)


def build_server(
    config: ServerConfig,
    clock: Clock = SYSTEM_CLOCK,
    failpoints: Failpoints | None = None,
) -> tuple[ApiServer, DataDirLock]:
    """Open the data directory, bootstrap if fresh, and bind the socket."""
    dir_lock = DataDirLock(config.data_dir)
    try:
        services = ServiceBundle(config, clock=clock, failpoints=failpoints)
        services.bootstrap()
        server = ApiServer((config.bind_host, config.bind_port), services)
    except Exception:
        dir_lock.release()
        raise
    return server, dir_lock


def serve(config: ServerConfig) -> int:
    try:
        server, dir_lock = build_server(config)
    except ServiceError as err:
        print(f"error: {err.message}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: cannot bind {config.bind_host}:{config.bind_port}: {err}", file=sys.stderr)
        return 1

    stop_requested = threading.Event()

    def handle_signal(signum, frame):  # noqa: ARG001
        stop_requested.set()
        threading.Thread(target=server.shutdown, daemon=True).start()

    signal.signal(signal.SIGINT, handle_signal)
    signal.signal(signal.SIGTERM, handle_signal)

    sweeper = threading.Thread(
        target=_sweep_loop, args=(server.services, stop_requested), daemon=True
    )
    sweeper.start()

    host, port = server.server_address[0], server.server_address[1]
    print(f"listening on {host}:{port}", flush=True)
    try:
        server.serve_forever(poll_interval=0.1)
    finally:
        stop_requested.set()
        server.graceful_stop()
        dir_lock.release()
    return 0


def _sweep_loop(services: ServiceBundle, stop: threading.Event) -> None:
    while not stop.wait(SWEEP_INTERVAL):
        try:
            services.sweep()
        except ServiceError:
            log.exception("background sweep failed")


# ---------------------------------------------------------------------------
# CLI entry point


def _env(name: str, default: str | None = None) -> str | None:
    return os.environ.get(f"SIGIL_{name}", default)


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {value!r}")


def _parse_bind(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected ADDR:PORT, got {value!r}")
    return host, int(port)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sigil-server", description="Content versioning service"
    )
    parser.add_argument("command", nargs="?", default="serve", choices=["serve", "gc", "scrub"])
    parser.add_argument("--data-dir", default=_env("DATA_DIR"), help="storage directory")
    parser.add_argument("--bind", default=_env("BIND", DEFAULT_BIND), help="ADDR:PORT")
    parser.add_argument(
        "--bootstrap-admin",
        default=_env("BOOTSTRAP_ADMIN"),
        metavar="USER:PASSWORD",
        help="administrator account created on first start only",
    )
    parser.add_argument(
        "--max-blob-size", type=int, default=int(_env("MAX_BLOB_SIZE", str(DEFAULT_MAX_BLOB_SIZE)))
    )
    parser.add_argument(
        "--session-ttl", type=int, default=int(_env("SESSION_TTL", str(DEFAULT_SESSION_TTL)))
    )
    parser.add_argument(
        "--lock-ttl", type=int, default=int(_env("LOCK_TTL", str(DEFAULT_LOCK_TTL)))
    )
    parser.add_argument(
        "--paranoid-reads",
        type=_parse_bool,
        default=_parse_bool(_env("PARANOID_READS", "false")),
        metavar="BOOL",
    )
    parser.add_argument("--console-dir", default=_env("CONSOLE_DIR"), help="static console files")
    return parser


def config_from_args(args: argparse.Namespace) -> ServerConfig:
    if not args.data_dir:
        raise SystemExit("error: --data-dir (or SIGIL_DATA_DIR) is required")
    host, port = _parse_bind(args.bind)
    return ServerConfig(
        data_dir=Path(args.data_dir),
        bind_host=host,
        bind_port=port,
        bootstrap_admin=args.bootstrap_admin,
        max_blob_size=args.max_blob_size,
        session_ttl=args.session_ttl,
        lock_ttl=args.lock_ttl,
        paranoid_reads=args.paranoid_reads,
        console_dir=Path(args.console_dir) if args.console_dir else None,
    )


def run_gc(config: ServerConfig) -> int:
    dir_lock = DataDirLock(config.data_dir)
    try:
        services = ServiceBundle(config)
        referenced = services.versions.referenced_hashes()
        removed = services.blobs.collect_garbage(referenced)
        print(f"removed {len(removed)} orphaned blob(s)")
        services.close()
    finally:
        dir_lock.release()
    return 0


def run_scrub(config: ServerConfig) -> int:
    dir_lock = DataDirLock(config.data_dir)
    try:
        services = ServiceBundle(config)
        bad = services.blobs.scrub()
        count = sum(1 for _ in services.blobs.iter_keys())
        services.close()
    finally:
        dir_lock.release()
    if bad:
        print(f"scrub: {len(bad)} corrupt blob(s) of {count}:", file=sys.stderr)
        for key in bad:
            print(f"  {key}", file=sys.stderr)
        return 1
    print(f"scrub: {count} blob(s) verified clean")
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("SIGIL_LOG_LEVEL", "WARNING"))
    args = _build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except SystemExit as exc:
        print(exc, file=sys.stderr)
        return 2
    if args.command in ("gc", "scrub"):
        try:
            return run_gc(config) if args.command == "gc" else run_scrub(config)
        except ServiceError as err:
            print(f"error: {err.message}", file=sys.stderr)
            return 1
    return serve(config)


if __name__ == "__main__":
    sys.exit(main())
