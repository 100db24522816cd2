"""Authentication and the three-role permission matrix.

Password digests are self-describing strings
(``scrypt$<n>$<r>$<p>$<salt hex>$<hash hex>``) so parameters can evolve
without a migration. Login failures are uniform: unknown usernames and wrong
passwords produce byte-identical errors, so the API cannot be used to probe
which accounts exist.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
from datetime import timedelta
from enum import Enum

from .clock import Clock
from .errors import ServiceError
from .model import Role, SessionToken, UserAccount, new_id, validate_username
from .store import MetadataStore

DEFAULT_SESSION_TTL = 86400
MIN_PASSWORD_LENGTH = 8

# Interactive-login cost. Tests may lower log2_n; verification reads the
# parameters back out of the digest string, so old digests keep working.
SCRYPT_LOG2_N = 14
SCRYPT_R = 8
SCRYPT_P = 1


class PermissionAction(str, Enum):
    """Every mutating and reading API action, for the role matrix."""

    VIEW_CONTENT = "view_content"
    LOCK_BLOCK = "lock_block"
    SUBMIT_BLOCK_VERSION = "submit_block_version"
    CREATE_BLOCK = "create_block"
    CREATE_MAP = "create_map"
    SUBMIT_MAP_VERSION = "submit_map_version"
    DECIDE_VERSION = "decide_version"
    MANAGE_USERS = "manage_users"
    BREAK_LOCK = "break_lock"


_VISITOR_ACTIONS = frozenset({PermissionAction.VIEW_CONTENT})
_EDITOR_ACTIONS = _VISITOR_ACTIONS | {
    PermissionAction.LOCK_BLOCK,
    PermissionAction.SUBMIT_BLOCK_VERSION,
}
_ADMIN_ACTIONS = frozenset(PermissionAction)

ROLE_PERMISSIONS: dict[Role, frozenset[PermissionAction]] = {
    Role.VISITOR: _VISITOR_ACTIONS,
    Role.EDITOR: _EDITOR_ACTIONS,
    Role.ADMINISTRATOR: _ADMIN_ACTIONS,
}


def authorize(account: UserAccount, action: PermissionAction) -> bool:
    """True iff the account's role grants ``action`` under the matrix."""
    return action in ROLE_PERMISSIONS[account.role]


def hash_password(password: str, log2_n: int = SCRYPT_LOG2_N) -> str:
    salt = secrets.token_bytes(16)
    n = 1 << log2_n
    digest = hashlib.scrypt(
        password.encode("utf-8"),
        salt=salt,
        n=n,
        r=SCRYPT_R,
        p=SCRYPT_P,
        maxmem=256 * 1024 * 1024,
        dklen=32,
    )
    return f"scrypt${n}${SCRYPT_R}${SCRYPT_P}${salt.hex()}${digest.hex()}"


def verify_password(password: str, stored: str) -> bool:
    try:
        scheme, n, r, p, salt_hex, digest_hex = stored.split("$")
        if scheme != "scrypt":
            return False
        expected = bytes.fromhex(digest_hex)
        actual = hashlib.scrypt(
            password.encode("utf-8"),
            salt=bytes.fromhex(salt_hex),
            n=int(n),
            r=int(r),
            p=int(p),
            maxmem=256 * 1024 * 1024,
            dklen=len(expected),
        )
    except (ValueError, TypeError):
        return False
    return hmac.compare_digest(actual, expected)


class AuthService:
    def __init__(
        self,
        store: MetadataStore,
        clock: Clock,
        session_ttl: int = DEFAULT_SESSION_TTL,
        scrypt_log2_n: int = SCRYPT_LOG2_N,
    ) -> None:
        self._store = store
        self._clock = clock
        self._session_ttl = session_ttl
        self._log2_n = scrypt_log2_n
        # Verified for unknown usernames so both failure branches cost the same.
        self._decoy_digest = hash_password(secrets.token_hex(8), log2_n=scrypt_log2_n)

    def register_user(
        self, actor: UserAccount, username: str, password: str, role: Role
    ) -> UserAccount:
        if not authorize(actor, PermissionAction.MANAGE_USERS):
            raise ServiceError("FORBIDDEN", "only administrators may create accounts")
        if not validate_username(username):
            raise ServiceError(
                "MALFORMED_REQUEST",
                "username must be 3-32 lowercase letters, digits, or underscores",
            )
        if len(password) < MIN_PASSWORD_LENGTH:
            raise ServiceError(
                "WEAK_PASSWORD", f"password must be at least {MIN_PASSWORD_LENGTH} characters"
            )
        digest = hash_password(password, log2_n=self._log2_n)
        with self._store.transaction() as state:
            if username in state.users_by_name:
                raise ServiceError("USERNAME_TAKEN", f"username {username!r} is taken")
            account = UserAccount(
                user_id=new_id(),
                username=username,
                password_digest=digest,
                role=role,
                created_at=self._clock.now(),
            )
            self._store.commit("user.create", {"user": account.to_dict()})
            return account

    def bootstrap_admin(self, username: str, password: str) -> UserAccount:
        """Create the first administrator on an empty store (server startup)."""
        with self._store.transaction() as state:
            if state.users:
                raise ServiceError("FORBIDDEN", "store already has accounts")
        actor = UserAccount(
            user_id=new_id(),
            username="bootstrap",
            password_digest="*",
            role=Role.ADMINISTRATOR,
            created_at=self._clock.now(),
        )
        return self.register_user(actor, username, password, Role.ADMINISTRATOR)

    def login(self, username: str, password: str) -> SessionToken:
        invalid = ServiceError("INVALID_CREDENTIALS", "invalid credentials")
        with self._store.transaction() as state:
            user_id = state.users_by_name.get(username)
            if user_id is None:
                verify_password(password, self._decoy_digest)
                raise invalid
            account = state.users[user_id]
        # Digest check happens outside the commit lock: scrypt is deliberately
        # slow and must not serialize unrelated requests.
        if not verify_password(password, account.password_digest):
            raise invalid
        with self._store.transaction() as state:
            token = secrets.token_urlsafe(32)
            while token in state.sessions:
                token = secrets.token_urlsafe(32)
            issued_at = self._clock.now()
            session = SessionToken(
                token=token,
                user_id=account.user_id,
                issued_at=issued_at,
                expires_at=issued_at + timedelta(seconds=self._session_ttl),
            )
            self._store.commit("session.create", {"session": session.to_dict()})
            return session

    def authenticate(self, token_value: str) -> UserAccount:
        with self._store.transaction() as state:
            session = state.sessions.get(token_value)
            if session is None or self._clock.now() >= session.expires_at:
                raise ServiceError("UNAUTHENTICATED", "missing, unknown, or expired token")
            return state.users[session.user_id]

    def logout(self, token_value: str) -> None:
        """Revoke a token; a second or bogus logout is a silent success."""
        with self._store.transaction() as state:
            if token_value in state.sessions:
                self._store.commit("session.delete", {"token": token_value})

    def account(self, user_id: str) -> UserAccount:
        with self._store.transaction() as state:
            account = state.users.get(user_id)
            if account is None:
                raise ServiceError("UNKNOWN_USER", f"no account {user_id}")
            return account

    def list_users(self) -> list[UserAccount]:
        with self._store.transaction() as state:
            return sorted(state.users.values(), key=lambda u: u.username)

    def sweep_expired_sessions(self) -> int:
        """Remove expired sessions from storage; expiry itself is lazy."""
        with self._store.transaction() as state:
            now = self._clock.now()
            dead = [t for t, s in state.sessions.items() if now >= s.expires_at]
            if dead:
                self._store.commit("session.sweep", {"tokens": dead})
            return len(dead)
