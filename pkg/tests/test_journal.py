import pytest

from sigil3d.errors import ServiceError
from sigil3d.journal import MAGIC, Journal


@pytest.fixture
def journal_path(tmp_path):
    return tmp_path / "meta" / "journal.log"


def test_append_then_replay_round_trip(journal_path):
    journal = Journal(journal_path)
    records = [{"op": "x", "data": {"n": i}} for i in range(20)]
    for record in records:
        journal.append(record)
    journal.close()
    assert Journal.replay(journal_path) == records


def test_replay_of_missing_file_is_empty(journal_path):
    assert Journal.replay(journal_path) == []


def test_torn_tail_is_discarded_and_truncated(journal_path):
    journal = Journal(journal_path)
    journal.append({"op": "keep", "data": {}})
    journal.close()
    with open(journal_path, "ab") as f:
        f.write(b'deadbeef {"op": "torn", "da')  # no newline: torn write
    assert Journal.replay(journal_path) == [{"op": "keep", "data": {}}]
    # replay truncated the garbage, so appends land cleanly afterwards
    journal = Journal(journal_path)
    journal.append({"op": "next", "data": {}})
    journal.close()
    assert Journal.replay(journal_path) == [
        {"op": "keep", "data": {}},
        {"op": "next", "data": {}},
    ]


def test_interior_corruption_refuses_rather_than_dropping_commits(journal_path):
    # a bad record with valid records after it cannot be a crash artifact;
    # truncating there would silently lose acknowledged commits
    journal = Journal(journal_path)
    for i in range(3):
        journal.append({"op": "r", "data": {"i": i}})
    journal.close()
    blob = journal_path.read_bytes()
    lines = blob[len(MAGIC):].split(b"\n")
    lines[1] = lines[1][:-1] + (b"x" if lines[1][-1:] != b"x" else b"y")
    journal_path.write_bytes(blob[: len(MAGIC)] + b"\n".join(lines))
    with pytest.raises(ServiceError) as err:
        Journal.replay(journal_path)
    assert err.value.code == "STORAGE_FAILURE"
    assert "corrupt journal record" in err.value.message


def test_mangled_final_record_is_dropped_like_a_torn_one(journal_path):
    # partial page persistence can leave a garbled but newline-terminated
    # final line after a crash; it is discarded exactly like a torn tail
    journal = Journal(journal_path)
    journal.append({"op": "keep", "data": {}})
    journal.close()
    blob = journal_path.read_bytes()
    garbled = blob + b'00000000 {"op": "mangled"}\n'
    journal_path.write_bytes(garbled)
    assert Journal.replay(journal_path) == [{"op": "keep", "data": {}}]
    assert journal_path.read_bytes() == blob  # truncated back to the prefix


def test_failed_append_rolls_back_so_later_appends_survive(journal_path):
    armed = {"on": False}

    def failpoints(name):
        if name == "journal.append.partial" and armed["on"]:
            armed["on"] = False
            raise OSError("injected")

    journal = Journal(journal_path, failpoints=failpoints)
    journal.append({"op": "a", "data": {}})
    armed["on"] = True
    with pytest.raises(OSError):
        journal.append({"op": "lost", "data": {}})
    journal.append({"op": "b", "data": {}})
    journal.close()
    assert Journal.replay(journal_path) == [{"op": "a", "data": {}}, {"op": "b", "data": {}}]


def test_non_journal_file_is_refused(journal_path):
    journal_path.parent.mkdir(parents=True)
    journal_path.write_bytes(b"not a journal\n")
    with pytest.raises(ServiceError) as err:
        Journal.replay(journal_path)
    assert err.value.code == "STORAGE_FAILURE"


def test_unicode_payloads_survive(journal_path):
    journal = Journal(journal_path)
    record = {"op": "name", "data": {"text": "exèdra ✓ é"}}
    journal.append(record)
    journal.close()
    assert Journal.replay(journal_path) == [record]
