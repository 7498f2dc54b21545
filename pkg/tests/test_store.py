import pytest

from greenlens.store import (
    Database,
    Journal,
    PassageRecord,
    SnapshotStore,
    TranscriptRecord,
    as_uri,
)


parametrize = pytest.mark.parametrize


def transcript(**overrides):
    entry = {
        "run_id": "run",
        "layer": "A",
        "item_id": "绿色生产",
        "prompt_hash": "h1",
        "attempt": 1,
        "raw_text": '{"judgment":1,"confidence":0.9}',
        "judgment": 1,
        "confidence": 0.9,
        "error": None,
        "backend_id": "mock",
        "latency_ms": 0,
        "timestamp": None,
        "request_options": {"temperature": 0.0},
    }
    entry.update(overrides)
    return entry


def test_as_uri(tmp_path):
    assert as_uri("sqlite://") == "sqlite://"
    assert as_uri("postgresql://u@h/db") == "postgresql://u@h/db"
    assert as_uri(tmp_path / "j.sqlite") == f"sqlite:///{(tmp_path / 'j.sqlite').resolve()}"


def test_database__repr():
    db = Database("sqlite://")
    assert repr(db) == "Database(sqlite://)"


def test_database__begin_commits(tmp_path):
    db = Database(as_uri(tmp_path / "db.sqlite"))
    db.create_all()

    with db.begin() as session:
        session.add(PassageRecord(provider_id="p", query="q", rank=0, text="t"))

    with db.session() as session:
        records = session.all(PassageRecord.select())
        assert [record.text for record in records] == ["t"]
        assert session.first(PassageRecord.select()).query == "q"

    db.close()


def test_database__begin_rolls_back_on_error(tmp_path):
    db = Database(as_uri(tmp_path / "db.sqlite"))
    db.create_all()

    with pytest.raises(RuntimeError):
        with db.begin() as session:
            session.add(PassageRecord(provider_id="p", query="q", rank=0, text="t"))
            session.flush()
            raise RuntimeError("boom")

    with db.session() as session:
        assert session.all(PassageRecord.select()) == []


def test_model__set_rejects_unknown_attribute():
    with pytest.raises(TypeError):
        TranscriptRecord(unknown=1)


def test_model__to_dict_and_repr():
    record = TranscriptRecord(run_id="r", attempt=2)
    assert record.to_dict() == {"run_id": "r", "attempt": 2}
    assert repr(record) == "TranscriptRecord(run_id='r', attempt=2)"


@parametrize("judgment", [2, -1])
def test_transcript_record__rejects_invalid_judgment(judgment):
    with pytest.raises(ValueError):
        TranscriptRecord(judgment=judgment)


@parametrize("confidence", [1.5, -0.1])
def test_transcript_record__rejects_invalid_confidence(confidence):
    with pytest.raises(ValueError):
        TranscriptRecord(confidence=confidence)


def test_transcript_record__parsed():
    assert TranscriptRecord(judgment=1, confidence=0.8).parsed == {
        "judgment": 1,
        "confidence": 0.8,
    }
    assert TranscriptRecord(raw_text="garbage").parsed is None


def test_journal__requires_judgment_and_confidence_together(journal):
    with pytest.raises(ValueError):
        journal.record([transcript(confidence=None)])
    assert journal.count() == 0


def test_journal__record_and_lookup(journal):
    written = journal.record(
        [
            transcript(attempt=1, raw_text="bad", judgment=None, confidence=None, error="x"),
            transcript(attempt=2),
        ]
    )

    assert written == 2
    assert journal.count() == 2
    first = journal.lookup("h1", 1)
    assert first.raw_text == "bad"
    assert first.parsed is None
    assert journal.lookup("h1", 2).parsed == {"judgment": 1, "confidence": 0.9}
    assert journal.lookup("h1", 3) is None
    assert journal.lookup("h1", 2, backend_id="other") is None


def test_journal__lookup_returns_latest_record(journal):
    journal.record([transcript(raw_text="old", judgment=0, confidence=0.1)])
    journal.record([transcript(raw_text="new")])

    assert journal.lookup("h1", 1).raw_text == "new"


def test_journal__entries_filters_and_keeps_order(journal):
    journal.record(
        [
            transcript(item_id="a", run_id="one"),
            transcript(item_id="b", run_id="two", layer="B"),
            transcript(item_id="c", run_id="one"),
        ]
    )

    assert [r.item_id for r in journal.entries()] == ["a", "b", "c"]
    assert [r.item_id for r in journal.entries(run_id="one")] == ["a", "c"]
    assert [r.item_id for r in journal.entries(layer="B")] == ["b"]


def test_journal__export_jsonl(tmp_path, journal):
    journal.record([transcript()])
    path = tmp_path / "transcripts.jsonl"

    journal.export_jsonl(path, run_id="run")

    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1
    assert '"parsed":{"confidence":0.9,"judgment":1}' in lines[0]
    assert '"request_options":{"temperature":0.0}' in lines[0]


def test_snapshot_store__get_put_replace(tmp_path):
    store = SnapshotStore(tmp_path / "snapshot.sqlite")

    assert store.get("web", "q") is None

    store.put("web", "q", ["first", "second"])
    assert store.get("web", "q") == ["first", "second"]
    assert store.get("other", "q") is None

    store.put("web", "q", ["replaced"])
    assert store.get("web", "q") == ["replaced"]

    store.put("web", "empty", [])
    assert store.get("web", "empty") is None
    store.close()
