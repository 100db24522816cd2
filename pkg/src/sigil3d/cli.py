"""``sigil`` — command-line edit client.

Plays the editing workflow against a running server: authenticate, lock a
block, materialize its content into a local workspace, push modified content
back for review, moderate as an administrator, and mirror approved heads
with ``sync``.

Exit codes are stable: 0 success, 2 auth/permission, 3 transport or
download-integrity failure, 4 lock conflict, 5 validation or stale base,
64 usage, 1 other server-reported errors.
"""

from __future__ import annotations

import argparse
import getpass
import hashlib
import json
import os
import re
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any

import requests

from .errors import ServiceError
from .model import ASSET_ID_RE, AssetKind
from .validation import normalize_path

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_AUTH = 2
EXIT_TRANSPORT = 3
EXIT_LOCK = 4
EXIT_VALIDATION = 5
EXIT_USAGE = 64

_EXIT_BY_CODE = {
    "UNAUTHENTICATED": EXIT_AUTH,
    "INVALID_CREDENTIALS": EXIT_AUTH,
    "FORBIDDEN": EXIT_AUTH,
    "LOCK_HELD": EXIT_LOCK,
    "LOCK_EXPIRED": EXIT_LOCK,
    "NOT_HOLDER": EXIT_LOCK,
    "UNKNOWN_LOCK": EXIT_LOCK,
    "WRONG_BLOCK": EXIT_LOCK,
    "VALIDATION_FAILED": EXIT_VALIDATION,
    "STALE_BASE": EXIT_VALIDATION,
}

TRANSFER_WORKERS = 4
CONTROL_DIR = ".sigil"
WORKSPACE_FILE = "workspace.json"
SYNC_FILE = "sync.json"
KINDS_SIDECAR = "kinds.json"


class CliError(Exception):
    def __init__(self, message: str, exit_code: int = EXIT_OTHER, code: str | None = None):
        super().__init__(message)
        self.message = message
        self.exit_code = exit_code
        self.code = code


def _exit_code_for(code: str) -> int:
    return _EXIT_BY_CODE.get(code, EXIT_OTHER)


# ---------------------------------------------------------------------------
# Credentials


def config_dir() -> Path:
    override = os.environ.get("SIGIL_CONFIG_DIR")
    if override:
        return Path(override)
    xdg = os.environ.get("XDG_CONFIG_HOME")
    base = Path(xdg) if xdg else Path.home() / ".config"
    return base / "sigil"


def _credentials_path() -> Path:
    return config_dir() / "credentials.json"


def load_credentials() -> dict[str, Any]:
    path = _credentials_path()
    if not path.exists():
        return {"format": 1, "servers": {}}
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def save_credentials(creds: dict[str, Any]) -> None:
    path = _credentials_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(creds, f, indent=2)
        f.write("\n")
    os.chmod(tmp, 0o600)
    os.replace(tmp, path)


def server_credentials(server_url: str) -> dict[str, Any]:
    entry = load_credentials()["servers"].get(server_url)
    if not entry:
        raise CliError(f"not logged in to {server_url}; run `sigil login` first", EXIT_AUTH)
    return entry


# ---------------------------------------------------------------------------
# HTTP client


class ApiClient:
    def __init__(self, server_url: str, token: str | None = None) -> None:
        self.server_url = server_url.rstrip("/")
        self.token = token
        self.http = requests.Session()

    def close(self) -> None:
        self.http.close()

    def request(
        self,
        method: str,
        path: str,
        json_body: Any | None = None,
        data: bytes | None = None,
        ok: tuple[int, ...] = (200, 201, 204),
    ) -> requests.Response:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            response = self.http.request(
                method,
                f"{self.server_url}{path}",
                json=json_body,
                data=data,
                headers=headers,
                timeout=60,
            )
        except requests.RequestException as exc:
            raise CliError(f"cannot reach {self.server_url}: {exc}", EXIT_TRANSPORT)
        if response.status_code in ok:
            return response
        code, message, violations = self._parse_envelope(response)
        text = f"{code}: {message}"
        for violation in violations:
            locus = f" [{violation['locus']}]" if violation.get("locus") else ""
            text += f"\n  - {violation['code']}{locus}: {violation['detail']}"
        raise CliError(text, _exit_code_for(code), code)

    @staticmethod
    def _parse_envelope(response: requests.Response) -> tuple[str, str, list[dict[str, Any]]]:
        try:
            envelope = response.json()["error"]
            return (
                envelope["code"],
                envelope.get("message", ""),
                envelope.get("violations") or [],
            )
        except (ValueError, KeyError, TypeError):
            return (f"HTTP_{response.status_code}", response.text[:200], [])

    def get_json(self, path: str) -> Any:
        return self.request("GET", path).json()


def client_for(server_url: str) -> ApiClient:
    entry = server_credentials(server_url)
    return ApiClient(server_url, token=entry["token"])


# ---------------------------------------------------------------------------
# Workspace files


def _control_path(directory: Path) -> Path:
    return directory / CONTROL_DIR / WORKSPACE_FILE


def load_workspace(directory: Path) -> dict[str, Any]:
    path = _control_path(directory)
    if not path.exists():
        raise CliError(f"{directory} is not a sigil workspace", EXIT_USAGE)
    with open(path, "r", encoding="utf-8") as f:
        control = json.load(f)
    if control.get("format") != 1:
        raise CliError(f"unsupported workspace format in {path}", EXIT_OTHER)
    return control


def save_workspace(directory: Path, control: dict[str, Any]) -> None:
    path = _control_path(directory)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(control, f, indent=2)
        f.write("\n")


def _materialize(root: Path, rel_path: str, data: bytes) -> None:
    """Write one asset file, refusing anything that would escape the root."""
    rel = normalize_path(rel_path)
    target = root / rel
    resolved_root = root.resolve()
    if resolved_root not in target.resolve().parents:
        raise CliError(f"path {rel_path!r} escapes the workspace", EXIT_VALIDATION)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(data)


def _download_assets(client: ApiClient, root: Path, manifest: dict[str, Any]) -> None:
    """Fetch and verify every asset, then write; bad bytes abort the lot."""

    def fetch(asset: dict[str, Any]) -> tuple[dict[str, Any], bytes]:
        response = client.request("GET", f"/api/v1/blobs/{asset['content_hash']}")
        data = response.content
        if hashlib.sha256(data).hexdigest() != asset["content_hash"]:
            raise CliError(
                f"CORRUPT_DOWNLOAD: blob {asset['content_hash']} failed digest check",
                EXIT_TRANSPORT,
                "CORRUPT_DOWNLOAD",
            )
        if len(data) != asset["size_bytes"]:
            raise CliError(
                f"CORRUPT_DOWNLOAD: blob {asset['content_hash']} has wrong length",
                EXIT_TRANSPORT,
                "CORRUPT_DOWNLOAD",
            )
        return asset, data

    with ThreadPoolExecutor(max_workers=TRANSFER_WORKERS) as pool:
        results = list(pool.map(fetch, manifest["assets"]))
    for asset, data in results:
        _materialize(root, asset["path"], data)


def _hash_file(path: Path) -> tuple[str, int]:
    hasher = hashlib.sha256()
    size = 0
    with open(path, "rb") as f:
        while True:
            chunk = f.read(64 * 1024)
            if not chunk:
                break
            hasher.update(chunk)
            size += len(chunk)
    return hasher.hexdigest(), size


def _scan_workspace(root: Path) -> list[tuple[str, str, int]]:
    """(relative path, digest, size) for every asset file in the workspace."""
    found = []
    for current, dirs, files in os.walk(root):
        dirs[:] = [d for d in dirs if d != CONTROL_DIR]
        for name in files:
            full = Path(current) / name
            rel = full.relative_to(root).as_posix()
            if rel == KINDS_SIDECAR:
                continue
            digest, size = _hash_file(full)
            found.append((normalize_path(rel), digest, size))
    found.sort()
    return found


def _slug_for(path: str, taken: set[str]) -> str:
    stem = Path(path).stem.lower()
    slug = re.sub(r"[^a-z0-9_\-]", "_", stem)[:64] or "asset"
    if not ASSET_ID_RE.fullmatch(slug):
        slug = "asset"
    candidate, n = slug, 1
    while candidate in taken:
        n += 1
        suffix = f"_{n}"
        candidate = slug[: 64 - len(suffix)] + suffix
    return candidate


def _kind_overrides(args: argparse.Namespace, root: Path) -> dict[str, str]:
    kinds: dict[str, str] = {}
    sidecar = root / KINDS_SIDECAR
    if sidecar.exists():
        with open(sidecar, "r", encoding="utf-8") as f:
            for path, kind in json.load(f).items():
                kinds[normalize_path(path)] = kind
    for spec in args.kind or []:
        path, sep, kind = spec.partition("=")
        if not sep:
            raise CliError(f"--kind expects PATH=KIND, got {spec!r}", EXIT_USAGE)
        kinds[normalize_path(path)] = kind
    for path, kind in kinds.items():
        if kind not in AssetKind._value2member_map_:
            allowed = ", ".join(k.value for k in AssetKind)
            raise CliError(f"unknown kind {kind!r} for {path!r}; one of: {allowed}", EXIT_USAGE)
    return kinds


# ---------------------------------------------------------------------------
# Commands


def cmd_login(args: argparse.Namespace) -> int:
    server = _require_server(args)
    password = args.password or os.environ.get("SIGIL_PASSWORD") or getpass.getpass()
    client = ApiClient(server)
    result = client.request(
        "POST", "/api/v1/auth/login", {"username": args.username, "password": password}
    ).json()
    creds = load_credentials()
    creds["servers"][server] = {
        "token": result["token"],
        "username": args.username,
        "role": result["role"],
        "expires_at": result["expires_at"],
    }
    save_credentials(creds)
    _emit(args, result | {"username": args.username}, f"logged in as {args.username} ({result['role']})")
    return EXIT_OK


def cmd_logout(args: argparse.Namespace) -> int:
    server = _require_server(args)
    creds = load_credentials()
    entry = creds["servers"].pop(server, None)
    if entry:
        client = ApiClient(server, token=entry["token"])
        try:
            client.request("POST", "/api/v1/auth/logout")
        except CliError as err:
            # An already-expired token still logs out locally.
            if err.exit_code == EXIT_TRANSPORT:
                raise
        save_credentials(creds)
    _emit(args, {"logged_out": bool(entry)}, "logged out")
    return EXIT_OK


def cmd_blocks(args: argparse.Namespace) -> int:
    server = _require_server(args)
    client = client_for(server)
    if args.action == "create":
        record = client.request("POST", "/api/v1/blocks", {"name": args.name}).json()
        _emit(args, record, f"created block {record['block_id']} ({record['name']})")
        return EXIT_OK
    records = client.get_json("/api/v1/blocks")
    lines = []
    for record in records:
        head = record["head_version"] or "-"
        lock = record.get("lock")
        locked = f" locked({lock['holder']})" if lock else ""
        lines.append(f"{record['block_id']}  {record['name']}  head={head}{locked}")
    _emit(args, records, "\n".join(lines) if lines else "no blocks")
    return EXIT_OK


def cmd_maps(args: argparse.Namespace) -> int:
    server = _require_server(args)
    client = client_for(server)
    if args.action == "create":
        record = client.request("POST", "/api/v1/maps", {"name": args.name}).json()
        _emit(args, record, f"created map {record['map_id']} ({record['name']})")
        return EXIT_OK
    records = client.get_json("/api/v1/maps")
    lines = [
        f"{r['map_id']}  {r['name']}  head={r['head_version'] or '-'}" for r in records
    ]
    _emit(args, records, "\n".join(lines) if lines else "no maps")
    return EXIT_OK


def cmd_lock(args: argparse.Namespace) -> int:
    server = _require_server(args)
    client = client_for(server)
    body: dict[str, Any] = {}
    if args.ttl is not None:
        body["ttl_seconds"] = args.ttl
    lock = client.request("POST", f"/api/v1/blocks/{args.block_id}/lock", body).json()
    _emit(args, lock, f"locked {args.block_id} until {lock['expires_at']} (lock {lock['lock_id']})")
    return EXIT_OK


def cmd_checkout(args: argparse.Namespace) -> int:
    server = _require_server(args)
    entry = server_credentials(server)
    client = ApiClient(server, token=entry["token"])
    directory = Path(args.directory)
    if directory.exists() and any(directory.iterdir()):
        raise CliError(f"{directory} exists and is not empty", EXIT_USAGE)

    try:
        client.request("POST", f"/api/v1/blocks/{args.block_id}/lock", {})
    except CliError as err:
        # A lock we already hold is fine: the edit project request below
        # verifies holdership and returns the live lock record.
        if not (err.code == "LOCK_HELD" and f"locked by {entry['username']} " in err.message):
            raise
    project = client.get_json(f"/api/v1/blocks/{args.block_id}/editproject")

    created_root = not directory.exists()
    directory.mkdir(parents=True, exist_ok=True)
    try:
        _download_assets(client, directory, project["manifest"])
    except CliError:
        # Leave no partial workspace behind on a failed or corrupt download.
        if created_root:
            shutil.rmtree(directory, ignore_errors=True)
        else:
            for child in directory.iterdir():
                if child.is_dir():
                    shutil.rmtree(child, ignore_errors=True)
                else:
                    child.unlink()
        raise
    save_workspace(
        directory,
        {
            "format": 1,
            "server_url": server,
            "block_id": args.block_id,
            "lock_id": project["lock"]["lock_id"],
            "base_version": project["base_version"],
            "manifest": project["manifest"],
        },
    )
    count = len(project["manifest"]["assets"])
    _emit(
        args,
        {"block_id": args.block_id, "assets": count, "base_version": project["base_version"]},
        f"checked out {args.block_id} ({count} asset(s)) into {directory}",
    )
    return EXIT_OK


def cmd_push(args: argparse.Namespace) -> int:
    directory = Path(args.directory)
    control = load_workspace(directory)
    server = args.server or control["server_url"]
    client = client_for(server)

    try:
        renewal = client.request(
            "POST",
            f"/api/v1/blocks/{control['block_id']}/lock/renew",
            {"lock_id": control["lock_id"]},
            ok=(200,),
        ).json()
    except CliError as err:
        if err.code in ("LOCK_EXPIRED", "UNKNOWN_LOCK", "NOT_HOLDER"):
            raise CliError(
                err.message + "\nthe lock lapsed; re-run `sigil checkout` to lock again",
                EXIT_LOCK,
                err.code,
            )
        raise

    base_by_path = {a["path"]: a for a in control["manifest"]["assets"]}
    kinds = _kind_overrides(args, directory)
    taken = {a["asset_id"] for a in control["manifest"]["assets"]}
    assets = []
    for rel, digest, size in _scan_workspace(directory):
        base = base_by_path.get(rel)
        if base is not None:
            asset_id, kind = base["asset_id"], base["kind"]
        else:
            kind = kinds.get(rel)
            if kind is None:
                raise CliError(
                    f"new file {rel!r} needs a kind: pass --kind {rel}=KIND "
                    f"or add it to {KINDS_SIDECAR}",
                    EXIT_USAGE,
                )
            asset_id = _slug_for(rel, taken)
            taken.add(asset_id)
        if rel in kinds:
            kind = kinds[rel]
        assets.append(
            {
                "asset_id": asset_id,
                "kind": kind,
                "path": rel,
                "content_hash": digest,
                "size_bytes": size,
            }
        )

    uploaded = _upload_missing(client, directory, assets)
    manifest = {
        "schema_version": 1,
        "block_id": control["block_id"],
        "base_version": control["base_version"],
        "assets": sorted(assets, key=lambda a: a["asset_id"]),
    }
    try:
        version = client.request(
            "POST",
            f"/api/v1/blocks/{control['block_id']}/versions",
            {"manifest": manifest, "lock_id": control["lock_id"]},
            ok=(201,),
        ).json()
    except CliError as err:
        if err.code == "STALE_BASE":
            raise CliError(
                err.message + "\nthe head moved; run `sigil sync` and redo your edits",
                EXIT_VALIDATION,
                err.code,
            )
        if err.code == "LOCK_EXPIRED":
            raise CliError(
                err.message + "\nthe lock lapsed; re-run `sigil checkout` to lock again",
                EXIT_LOCK,
                err.code,
            )
        raise
    control.setdefault("pushes", []).append(
        {
            "version_id": version["version_id"],
            "seq": version["seq"],
            "submitted_at": version["submitted_at"],
            "message": args.message,
        }
    )
    save_workspace(directory, control)
    _emit(
        args,
        {"version_id": version["version_id"], "seq": version["seq"], "uploaded_blobs": uploaded},
        f"pushed pending version {version['version_id']} (seq {version['seq']}, "
        f"{uploaded} new blob(s), lock renewed until {renewal['expires_at']})",
    )
    return EXIT_OK


def _upload_missing(client: ApiClient, root: Path, assets: list[dict[str, Any]]) -> int:
    """PUT only blobs the server does not already have; returns upload count."""
    by_hash: dict[str, str] = {}
    for asset in assets:
        by_hash.setdefault(asset["content_hash"], asset["path"])

    def upload(item: tuple[str, str]) -> int:
        digest, rel = item
        probe = client.request("HEAD", f"/api/v1/blobs/{digest}", ok=(200, 404))
        if probe.status_code == 200:
            return 0
        data = (root / rel).read_bytes()
        client.request("PUT", f"/api/v1/blobs/{digest}", data=data, ok=(201,))
        return 1

    with ThreadPoolExecutor(max_workers=TRANSFER_WORKERS) as pool:
        return sum(pool.map(upload, by_hash.items()))


def cmd_release(args: argparse.Namespace) -> int:
    directory = Path(args.directory)
    control = load_workspace(directory)
    server = args.server or control["server_url"]
    client = client_for(server)
    warning = None
    try:
        client.request("DELETE", f"/api/v1/blocks/{control['block_id']}/lock", ok=(204,))
    except CliError as err:
        if err.code not in ("UNKNOWN_LOCK", "NOT_HOLDER"):
            raise
        warning = "lock was already expired or taken over; nothing to release"
    control["released"] = True
    save_workspace(directory, control)
    message = "released lock" if warning is None else f"warning: {warning}"
    _emit(args, {"released": True, "warning": warning}, message)
    return EXIT_OK


def cmd_sync(args: argparse.Namespace) -> int:
    directory = Path(args.directory)
    state_path = directory / CONTROL_DIR / SYNC_FILE
    if state_path.exists():
        with open(state_path, "r", encoding="utf-8") as f:
            sync_state = json.load(f)
    else:
        sync_state = {"format": 1, "server_url": None, "blocks": {}}
    server = args.server or sync_state.get("server_url")
    if not server:
        raise CliError("no server recorded; pass --server for the first sync", EXIT_USAGE)
    client = client_for(server)

    result = client.request(
        "POST", "/api/v1/sync", {"blocks": sync_state["blocks"], "maps": {}}
    ).json()
    deltas = result["deltas"]
    applied = []
    for delta in deltas:
        block_dir = directory / "blocks" / delta["block_id"]
        if block_dir.exists():
            shutil.rmtree(block_dir)
        block_dir.mkdir(parents=True, exist_ok=True)
        _download_assets(client, block_dir, delta["manifest"])
        sync_state["blocks"][delta["block_id"]] = delta["new_version"]
        applied.append(f"{delta['block_id']}: {delta['old_version'] or '(none)'} -> {delta['new_version']}")

    sync_state["server_url"] = server
    state_path.parent.mkdir(parents=True, exist_ok=True)
    with open(state_path, "w", encoding="utf-8") as f:
        json.dump(sync_state, f, indent=2)
        f.write("\n")

    for unknown in result["unknown_ids"]:
        print(f"warning: server does not know id {unknown}", file=sys.stderr)
    human = "\n".join(applied) if applied else "already up to date"
    _emit(args, result, human)
    return EXIT_OK


def cmd_review(args: argparse.Namespace) -> int:
    server = _require_server(args)
    client = client_for(server)
    if args.review_action == "list":
        pending = client.get_json("/api/v1/review/pending")
        lines = [
            f"{v['version_id']}  {v['kind']:5}  {v['target_id']}  seq={v['seq']}  "
            f"author={v['author']}  submitted={v['submitted_at']}"
            for v in pending
        ]
        _emit(args, pending, "\n".join(lines) if lines else "nothing pending")
        return EXIT_OK
    if args.review_action == "approve":
        version = client.request("POST", f"/api/v1/versions/{args.version_id}/approve").json()
        _emit(args, version, f"approved {version['version_id']} (seq {version['seq']})")
        return EXIT_OK
    version = client.request(
        "POST", f"/api/v1/versions/{args.version_id}/reject", {"reason": args.reason}
    ).json()
    _emit(args, version, f"rejected {version['version_id']}: {args.reason}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Wiring


def _require_server(args: argparse.Namespace) -> str:
    server = args.server or os.environ.get("SIGIL_SERVER")
    if not server:
        raise CliError("no server given; pass --server URL or set SIGIL_SERVER", EXIT_USAGE)
    return server.rstrip("/")


def _emit(args: argparse.Namespace, payload: Any, human: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2))
    else:
        print(human)


class CliParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> CliParser:
    parser = CliParser(prog="sigil", description="Edit client for the content service")
    parser.add_argument("--server", default=None, help="server URL (or set SIGIL_SERVER)")
    parser.add_argument("--json", action="store_true", default=False, help="machine-readable output")
    # The same flags are accepted after the subcommand; SUPPRESS keeps a
    # subcommand that omits them from clobbering the global value.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--server", default=argparse.SUPPRESS)
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    p = sub.add_parser("login", parents=[common], help="authenticate and store a session token")
    p.add_argument("username")
    p.add_argument("--password", help="password (else SIGIL_PASSWORD or prompt)")
    p.set_defaults(func=cmd_login)

    p = sub.add_parser("logout", parents=[common], help="revoke and forget the stored token")
    p.set_defaults(func=cmd_logout)

    p = sub.add_parser("blocks", parents=[common], help="list or create blocks")
    p.add_argument("action", nargs="?", default="list", choices=["list", "create"])
    p.add_argument("name", nargs="?", help="name for `blocks create`")
    p.set_defaults(func=cmd_blocks)

    p = sub.add_parser("maps", parents=[common], help="list or create maps")
    p.add_argument("action", nargs="?", default="list", choices=["list", "create"])
    p.add_argument("name", nargs="?", help="name for `maps create`")
    p.set_defaults(func=cmd_maps)

    p = sub.add_parser("lock", parents=[common], help="acquire the edit lease on a block")
    p.add_argument("block_id")
    p.add_argument("--ttl", type=int, help="lease seconds (server default otherwise)")
    p.set_defaults(func=cmd_lock)

    p = sub.add_parser("checkout", parents=[common], help="lock a block and download its edit project")
    p.add_argument("block_id")
    p.add_argument("directory")
    p.set_defaults(func=cmd_checkout)

    p = sub.add_parser("push", parents=[common], help="upload workspace content as a pending version")
    p.add_argument("directory")
    p.add_argument("--message", help="note recorded in the workspace push log")
    p.add_argument(
        "--kind",
        action="append",
        metavar="PATH=KIND",
        help="asset kind for a brand-new file (repeatable)",
    )
    p.set_defaults(func=cmd_push)

    p = sub.add_parser("release", parents=[common], help="release the workspace's lock")
    p.add_argument("directory")
    p.set_defaults(func=cmd_release)

    p = sub.add_parser("sync", parents=[common], help="mirror the latest approved content")
    p.add_argument("directory")
    p.set_defaults(func=cmd_sync)

    p = sub.add_parser("review", parents=[common], help="administrator moderation")
    review_sub = p.add_subparsers(dest="review_action", required=True)
    review_sub.add_parser("list", parents=[common]).set_defaults(func=cmd_review)
    approve = review_sub.add_parser("approve", parents=[common])
    approve.add_argument("version_id")
    approve.set_defaults(func=cmd_review)
    reject = review_sub.add_parser("reject", parents=[common])
    reject.add_argument("version_id")
    reject.add_argument("--reason", required=True)
    reject.set_defaults(func=cmd_review)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command in ("blocks", "maps") and args.action == "create" and not args.name:
        parser.error(f"`{args.command} create` requires a name")
    try:
        return args.func(args)
    except CliError as err:
        print(f"error: {err.message}", file=sys.stderr)
        return err.exit_code
    except ServiceError as err:
        print(f"error: {err.code}: {err.message}", file=sys.stderr)
        return EXIT_OTHER
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
