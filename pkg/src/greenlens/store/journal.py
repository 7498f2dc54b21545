"""
Journal
-------

Transcript journal of every LLM request attempt. Any LLM stage can be replayed offline from the
journal.
"""

from pathlib import Path
import typing as t

import sqlalchemy as sa

from ..utils import PathLike, write_jsonl
from .database import Database
from .records import TranscriptRecord


#: Columns exported to the JSON-lines transcript, in record order.
EXPORT_FIELDS = (
    "run_id",
    "layer",
    "item_id",
    "prompt_hash",
    "attempt",
    "raw_text",
    "parsed",
    "error",
    "backend_id",
    "latency_ms",
    "timestamp",
    "request_options",
)


def as_uri(target: PathLike) -> str:
    """Return a SQLAlchemy URI for `target`, treating plain paths as SQLite files."""
    target = str(target)
    if "://" in target:
        return target
    return f"sqlite:///{Path(target).resolve()}"


class Journal:
    """
    Append-only store of LLM transcripts.

    Args:
        target: SQLAlchemy URI or path of a SQLite file.
    """

    def __init__(self, target: PathLike):
        self.db = Database(as_uri(target))
        self.db.create_all()

    def record(self, entries: t.Iterable[t.Mapping[str, t.Any]]) -> int:
        """Persist transcript `entries` in order and return how many were written."""
        records = [TranscriptRecord(**entry) for entry in entries]
        with self.db.begin() as session:
            session.add_all(records)
        return len(records)

    def lookup(
        self, prompt_hash: str, attempt: int, backend_id: t.Optional[str] = None
    ) -> t.Optional[TranscriptRecord]:
        """Return the most recent transcript for a prompt attempt or ``None``."""
        stmt = (
            TranscriptRecord.select()
            .where(
                TranscriptRecord.prompt_hash == prompt_hash,
                TranscriptRecord.attempt == attempt,
            )
            .order_by(TranscriptRecord.id.desc())
            .limit(1)
        )
        if backend_id is not None:
            stmt = stmt.where(TranscriptRecord.backend_id == backend_id)
        with self.db.session() as session:
            return session.first(stmt)

    def entries(
        self, *, run_id: t.Optional[str] = None, layer: t.Optional[str] = None
    ) -> t.List[TranscriptRecord]:
        """Return transcripts in insertion order, optionally restricted to a run or layer."""
        stmt = TranscriptRecord.select().order_by(TranscriptRecord.id)
        if run_id is not None:
            stmt = stmt.where(TranscriptRecord.run_id == run_id)
        if layer is not None:
            stmt = stmt.where(TranscriptRecord.layer == layer)
        with self.db.session() as session:
            return list(session.all(stmt))

    def count(self) -> int:
        with self.db.session() as session:
            return session.execute(
                sa.select(sa.func.count()).select_from(TranscriptRecord)
            ).scalar_one()

    def export_jsonl(self, path: PathLike, **filters: t.Any) -> None:
        """Write transcripts as JSON-lines."""
        rows = []
        for record in self.entries(**filters):
            data = record.to_dict()
            data["parsed"] = record.parsed
            rows.append({key: data.get(key) for key in EXPORT_FIELDS})
        write_jsonl(path, rows)

    def close(self) -> None:
        self.db.close()
