import threading
from concurrent.futures import ThreadPoolExecutor

import pytest

from sigil3d.errors import ServiceError
from sigil3d.model import Role


@pytest.fixture
def second_editor(services):
    return services.user("pierluigi", Role.EDITOR)


class TestAcquire:
    def test_uncontended(self, services, editor, block):
        lock = services.locks.acquire(block.block_id, editor.user_id, 600)
        assert lock.renew_count == 0
        assert (lock.expires_at - lock.acquired_at).total_seconds() == 600
        assert lock.ttl_seconds == 600

    def test_default_ttl(self, services, editor, block):
        lock = services.locks.acquire(block.block_id, editor.user_id)
        assert lock.ttl_seconds == 1800

    def test_second_acquire_while_held(self, services, editor, second_editor, block):
        services.locks.acquire(block.block_id, editor.user_id, 600)
        with pytest.raises(ServiceError) as err:
            services.locks.acquire(block.block_id, second_editor.user_id, 600)
        assert err.value.code == "LOCK_HELD"
        assert "maria" in err.value.message  # holder's username travels with it
        assert "Z" in err.value.message

    def test_same_holder_reacquire_also_conflicts(self, services, editor, block):
        services.locks.acquire(block.block_id, editor.user_id, 600)
        with pytest.raises(ServiceError) as err:
            services.locks.acquire(block.block_id, editor.user_id, 600)
        assert err.value.code == "LOCK_HELD"

    def test_unknown_block(self, services, editor):
        with pytest.raises(ServiceError) as err:
            services.locks.acquire("0" * 8 + "-0000-4000-8000-" + "0" * 12, editor.user_id, 60)
        assert err.value.code == "UNKNOWN_BLOCK"

    def test_visitor_forbidden(self, services, visitor, block):
        with pytest.raises(ServiceError) as err:
            services.locks.acquire(block.block_id, visitor.user_id, 60)
        assert err.value.code == "FORBIDDEN"

    def test_ttl_too_long(self, services, editor, block):
        with pytest.raises(ServiceError) as err:
            services.locks.acquire(block.block_id, editor.user_id, 7201)
        assert err.value.code == "TTL_TOO_LONG"

    def test_acquire_over_expired_record(self, services, editor, second_editor, block):
        services.locks.acquire(block.block_id, editor.user_id, 10)
        services.clock.advance(10)
        lock = services.locks.acquire(block.block_id, second_editor.user_id, 10)
        assert lock.holder == second_editor.user_id


class TestRenew:
    def test_holder_extends_by_original_ttl(self, services, editor, block):
        lock = services.locks.acquire(block.block_id, editor.user_id, 600)
        services.clock.advance(100)
        renewed = services.locks.renew(lock.lock_id, editor.user_id)
        assert renewed.renew_count == 1
        assert renewed.expires_at > lock.expires_at
        assert (renewed.expires_at - services.clock.now()).total_seconds() == 600

    def test_non_holder(self, services, editor, second_editor, block):
        lock = services.locks.acquire(block.block_id, editor.user_id, 600)
        with pytest.raises(ServiceError) as err:
            services.locks.renew(lock.lock_id, second_editor.user_id)
        assert err.value.code == "NOT_HOLDER"

    def test_after_expiry_instant(self, services, editor, block):
        lock = services.locks.acquire(block.block_id, editor.user_id, 600)
        services.clock.advance(600)
        with pytest.raises(ServiceError) as err:
            services.locks.renew(lock.lock_id, editor.user_id)
        assert err.value.code == "LOCK_EXPIRED"

    def test_unknown_lock(self, services, editor):
        with pytest.raises(ServiceError) as err:
            services.locks.renew("00000000-0000-4000-8000-000000000000", editor.user_id)
        assert err.value.code == "UNKNOWN_LOCK"


class TestRelease:
    def test_holder_release_frees_block(self, services, editor, second_editor, block):
        lock = services.locks.acquire(block.block_id, editor.user_id, 600)
        services.locks.release(lock.lock_id, editor.user_id)
        assert services.locks.acquire(block.block_id, second_editor.user_id, 600)

    def test_admin_break(self, services, editor, block):
        lock = services.locks.acquire(block.block_id, editor.user_id, 600)
        services.locks.release(lock.lock_id, services.admin.user_id)
        assert services.locks.status(block.block_id) is None

    def test_other_editor_cannot_release(self, services, editor, second_editor, block):
        lock = services.locks.acquire(block.block_id, editor.user_id, 600)
        with pytest.raises(ServiceError) as err:
            services.locks.release(lock.lock_id, second_editor.user_id)
        assert err.value.code == "NOT_HOLDER"

    def test_expired_lock_reads_as_unknown(self, services, editor, block):
        lock = services.locks.acquire(block.block_id, editor.user_id, 10)
        services.clock.advance(11)
        with pytest.raises(ServiceError) as err:
            services.locks.release(lock.lock_id, editor.user_id)
        assert err.value.code == "UNKNOWN_LOCK"


class TestStatus:
    def test_unlocked(self, services, block):
        assert services.locks.status(block.block_id) is None

    def test_held(self, services, editor, block):
        services.locks.acquire(block.block_id, editor.user_id, 600)
        status = services.locks.status(block.block_id)
        assert status is not None and status.holder == editor.user_id

    def test_lapsed_ttl_reports_absent_before_any_sweep(self, services, editor, block):
        services.locks.acquire(block.block_id, editor.user_id, 1)
        services.clock.advance(1)
        assert services.locks.status(block.block_id) is None

    def test_unknown_block(self, services):
        with pytest.raises(ServiceError) as err:
            services.locks.status("00000000-0000-4000-8000-000000000000")
        assert err.value.code == "UNKNOWN_BLOCK"

    def test_sweep_only_removes_expired(self, services, editor, second_editor, block):
        other = services.versions.create_block(services.admin, "other")
        services.locks.acquire(block.block_id, editor.user_id, 10)
        live = services.locks.acquire(other.block_id, second_editor.user_id, 1000)
        services.clock.advance(20)
        assert services.locks.sweep_expired() == 1
        assert services.locks.status(block.block_id) is None
        assert services.locks.status(other.block_id).lock_id == live.lock_id


class TestValidateForSubmit:
    def test_matching_live_lock(self, services, editor, block):
        lock = services.locks.acquire(block.block_id, editor.user_id, 600)
        services.locks.validate_for_submit(lock.lock_id, block.block_id, editor.user_id)

    def test_wrong_block(self, services, editor, block):
        other = services.versions.create_block(services.admin, "other")
        lock = services.locks.acquire(block.block_id, editor.user_id, 600)
        with pytest.raises(ServiceError) as err:
            services.locks.validate_for_submit(lock.lock_id, other.block_id, editor.user_id)
        assert err.value.code == "WRONG_BLOCK"

    def test_expired_between_checkout_and_push(self, services, editor, block):
        lock = services.locks.acquire(block.block_id, editor.user_id, 60)
        services.clock.advance(61)
        with pytest.raises(ServiceError) as err:
            services.locks.validate_for_submit(lock.lock_id, block.block_id, editor.user_id)
        assert err.value.code == "LOCK_EXPIRED"

    def test_not_holder(self, services, editor, second_editor, block):
        lock = services.locks.acquire(block.block_id, editor.user_id, 600)
        with pytest.raises(ServiceError) as err:
            services.locks.validate_for_submit(lock.lock_id, block.block_id, second_editor.user_id)
        assert err.value.code == "NOT_HOLDER"


class TestConcurrency:
    def test_sixty_four_simultaneous_acquires_one_winner(self, services, block):
        editors = [services.user(f"editor_{i:02d}", Role.EDITOR) for i in range(64)]
        barrier = threading.Barrier(64)
        outcomes = []

        def contend(account):
            barrier.wait()
            try:
                services.locks.acquire(block.block_id, account.user_id, 600)
                return "won"
            except ServiceError as err:
                return err.code

        with ThreadPoolExecutor(max_workers=64) as pool:
            outcomes = list(pool.map(contend, editors))
        assert outcomes.count("won") == 1
        assert outcomes.count("LOCK_HELD") == 63

    def test_mixed_op_hammer_stays_coherent(self, services, block):
        # Acquire/renew/release from 8 threads; every renew observed by a
        # thread must be on a lock it still holds, and nothing deadlocks.
        editors = [services.user(f"worker_{i}", Role.EDITOR) for i in range(8)]
        stop = threading.Event()
        surprises = []

        def worker(account):
            my_lock = None
            while not stop.is_set():
                try:
                    if my_lock is None:
                        my_lock = services.locks.acquire(block.block_id, account.user_id, 600)
                    else:
                        renewed = services.locks.renew(my_lock.lock_id, account.user_id)
                        if renewed.holder != account.user_id:
                            surprises.append(renewed)
                        services.locks.release(my_lock.lock_id, account.user_id)
                        my_lock = None
                except ServiceError as err:
                    if err.code not in ("LOCK_HELD",):
                        surprises.append(err)
                    my_lock = None

        threads = [threading.Thread(target=worker, args=(e,)) for e in editors]
        for t in threads:
            t.start()
        import time

        time.sleep(0.3)
        stop.set()
        for t in threads:
            t.join()
        assert not surprises
        live = services.locks.status(block.block_id)
        assert live is None or live.holder in {e.user_id for e in editors}


class TestCommitLogReplay:
    def test_single_holder_invariant_from_the_journal_alone(self, tmp_path):
        """Hammer a durable store, then verify exclusivity by replaying the
        commit log: a granted lock must start only after its predecessor was
        released, swept, or past expiry."""
        import time

        from sigil3d.clock import Clock
        from sigil3d.journal import Journal
        from sigil3d.model import LockRecord, parse_timestamp
        from sigil3d.store import MetadataStore

        from conftest import Services

        store = MetadataStore.open(tmp_path / "meta")
        services = Services(tmp_path, store=store)
        services.clock = Clock()  # real wall clock so leases actually lapse
        services.locks._clock = services.clock
        admin = services.user("root", Role.ADMINISTRATOR)
        editors = [services.user(f"worker_{i}", Role.EDITOR) for i in range(6)]
        blocks = [services.versions.create_block(admin, f"b{i}") for i in range(2)]

        stop = threading.Event()

        def worker(account):
            import random

            rng = random.Random(account.user_id)
            held = {}
            while not stop.is_set():
                block_id = rng.choice(blocks).block_id
                try:
                    if block_id in held and rng.random() < 0.6:
                        if rng.random() < 0.5:
                            services.locks.renew(held[block_id], account.user_id)
                        else:
                            services.locks.release(held.pop(block_id), account.user_id)
                    else:
                        lock = services.locks.acquire(block_id, account.user_id, 1)
                        held[block_id] = lock.lock_id
                except ServiceError:
                    held.pop(block_id, None)

        threads = [threading.Thread(target=worker, args=(e,)) for e in editors]
        for t in threads:
            t.start()
        time.sleep(1.3)  # long enough for 1 s leases to lapse mid-run
        stop.set()
        for t in threads:
            t.join()
        store.close()

        acquires = 0
        current: dict[str, LockRecord] = {}
        for record in Journal.replay(tmp_path / "meta" / "journal.log"):
            op, data = record["op"], record["data"]
            if op == "lock.acquire":
                lock = LockRecord.from_dict(data["lock"])
                previous = current.get(lock.block_id)
                if previous is not None:
                    assert lock.acquired_at >= previous.expires_at, (
                        f"overlapping grants on {lock.block_id}: "
                        f"{previous.lock_id} until {previous.expires_at}, "
                        f"then {lock.lock_id} at {lock.acquired_at}"
                    )
                current[lock.block_id] = lock
                acquires += 1
            elif op == "lock.renew":
                lock = current[data["block_id"]]
                assert lock.lock_id == data["lock_id"]
                import dataclasses

                current[data["block_id"]] = dataclasses.replace(
                    lock, expires_at=parse_timestamp(data["expires_at"])
                )
            elif op in ("lock.release", "lock.sweep"):
                entries = data["locks"] if op == "lock.sweep" else [data]
                for entry in entries:
                    lock = current.get(entry["block_id"])
                    if lock is not None and lock.lock_id == entry["lock_id"]:
                        del current[entry["block_id"]]
        assert acquires >= 2  # the hammer must actually have contended
