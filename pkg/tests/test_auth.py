import pytest

from sigil3d.auth import (
    ROLE_PERMISSIONS,
    PermissionAction,
    authorize,
    hash_password,
    verify_password,
)
from sigil3d.errors import ServiceError
from sigil3d.model import Role

from conftest import FAST_KDF


class TestPasswordDigests:
    def test_verify_round_trip(self):
        digest = hash_password("s3cretpass!", log2_n=FAST_KDF)
        assert verify_password("s3cretpass!", digest)
        assert not verify_password("wrong", digest)

    def test_digest_is_self_describing(self):
        digest = hash_password("pw laterchange", log2_n=6)
        scheme, n, r, p, salt, hashed = digest.split("$")
        assert scheme == "scrypt"
        assert int(n) == 64
        # Verification reads n/r/p back from the string, so digests written
        # with old parameters keep verifying after a default change.
        assert verify_password("pw laterchange", digest)

    def test_plaintext_never_appears_in_digest(self):
        password = "Spr!ng-Time-2026"
        digest = hash_password(password, log2_n=FAST_KDF)
        assert password not in digest

    def test_salts_differ_between_calls(self):
        assert hash_password("same", log2_n=FAST_KDF) != hash_password("same", log2_n=FAST_KDF)

    def test_garbage_stored_digest_verifies_false(self):
        assert not verify_password("x", "not-a-digest")
        assert not verify_password("x", "md5$1$1$1$aa$bb")


class TestRegistration:
    def test_admin_creates_editor(self, services):
        account = services.auth.register_user(
            services.admin, "maria", "s3cretpass", Role.EDITOR
        )
        assert account.role is Role.EDITOR
        assert account.username == "maria"

    def test_editor_cannot_register_users(self, services, editor):
        with pytest.raises(ServiceError) as err:
            services.auth.register_user(editor, "sneaky", "password1", Role.EDITOR)
        assert err.value.code == "FORBIDDEN"

    def test_duplicate_username(self, services):
        services.auth.register_user(services.admin, "taken", "password1", Role.VISITOR)
        with pytest.raises(ServiceError) as err:
            services.auth.register_user(services.admin, "taken", "password2", Role.EDITOR)
        assert err.value.code == "USERNAME_TAKEN"

    def test_weak_password(self, services):
        with pytest.raises(ServiceError) as err:
            services.auth.register_user(services.admin, "weakpw", "short12", Role.EDITOR)
        assert err.value.code == "WEAK_PASSWORD"

    def test_invalid_username_shape(self, services):
        with pytest.raises(ServiceError) as err:
            services.auth.register_user(services.admin, "Bad Name", "password1", Role.EDITOR)
        assert err.value.code == "MALFORMED_REQUEST"

    def test_bootstrap_refused_once_accounts_exist(self, services):
        with pytest.raises(ServiceError):
            services.auth.bootstrap_admin("second", "password1")


class TestLogin:
    def test_token_shape_and_expiry(self, services):
        session = services.auth.login("root", "correct horse")
        assert len(session.token) == 43
        assert (session.expires_at - session.issued_at).total_seconds() == 86400

    def test_wrong_password(self, services):
        with pytest.raises(ServiceError) as err:
            services.auth.login("root", "nope nope")
        assert err.value.code == "INVALID_CREDENTIALS"

    def test_unknown_user_error_is_indistinguishable(self, services):
        with pytest.raises(ServiceError) as wrong_pw:
            services.auth.login("root", "nope nope")
        with pytest.raises(ServiceError) as no_user:
            services.auth.login("who_is_this", "nope nope")
        assert wrong_pw.value.to_envelope() == no_user.value.to_envelope()

    def test_ten_thousand_tokens_are_pairwise_distinct(self, services):
        tokens = {services.auth.login("root", "correct horse").token for _ in range(10_000)}
        assert len(tokens) == 10_000


class TestAuthenticate:
    def test_fresh_token_resolves_owner(self, services):
        session = services.auth.login("root", "correct horse")
        assert services.auth.authenticate(session.token).username == "root"

    def test_expiry_instant_is_excluded(self, services):
        session = services.auth.login("root", "correct horse")
        services.clock.advance(86400)
        with pytest.raises(ServiceError) as err:
            services.auth.authenticate(session.token)
        assert err.value.code == "UNAUTHENTICATED"

    def test_moment_before_expiry_still_valid(self, services):
        session = services.auth.login("root", "correct horse")
        services.clock.advance(86399)
        assert services.auth.authenticate(session.token).username == "root"

    def test_random_token_misses(self, services):
        with pytest.raises(ServiceError) as err:
            services.auth.authenticate("A" * 43)
        assert err.value.code == "UNAUTHENTICATED"

    def test_expired_sessions_swept_but_behavior_unchanged(self, services):
        session = services.auth.login("root", "correct horse")
        services.clock.advance(90000)
        assert services.auth.sweep_expired_sessions() == 1
        with pytest.raises(ServiceError):
            services.auth.authenticate(session.token)


class TestLogout:
    def test_revokes_token(self, services):
        session = services.auth.login("root", "correct horse")
        services.auth.logout(session.token)
        with pytest.raises(ServiceError):
            services.auth.authenticate(session.token)

    def test_idempotent(self, services):
        session = services.auth.login("root", "correct horse")
        services.auth.logout(session.token)
        services.auth.logout(session.token)

    def test_never_issued_token_is_noop(self, services):
        services.auth.logout("B" * 43)


class TestPermissionMatrix:
    def test_monotone_strict_inclusions(self):
        visitor = ROLE_PERMISSIONS[Role.VISITOR]
        editor = ROLE_PERMISSIONS[Role.EDITOR]
        admin = ROLE_PERMISSIONS[Role.ADMINISTRATOR]
        assert visitor < editor < admin

    def test_visitor_cannot_submit(self, services, visitor):
        assert not authorize(visitor, PermissionAction.SUBMIT_BLOCK_VERSION)

    def test_editor_cannot_decide(self, services, editor):
        assert not authorize(editor, PermissionAction.DECIDE_VERSION)

    def test_admin_can_break_locks(self, services):
        assert authorize(services.admin, PermissionAction.BREAK_LOCK)

    def test_full_matrix_values(self, services, editor, visitor):
        expected_editor = {"view_content", "lock_block", "submit_block_version"}
        granted = {a.value for a in PermissionAction if authorize(editor, a)}
        assert granted == expected_editor
        granted = {a.value for a in PermissionAction if authorize(visitor, a)}
        assert granted == {"view_content"}
        granted = {a.value for a in PermissionAction if authorize(services.admin, a)}
        assert granted == {a.value for a in PermissionAction}
