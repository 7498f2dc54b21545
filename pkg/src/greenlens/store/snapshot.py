"""
Snapshot
--------

Retrieved-passage snapshots keyed by ``(provider_id, query)``.
"""

import typing as t

from ..utils import PathLike
from .database import Database
from .journal import as_uri
from .records import PassageRecord


class SnapshotStore:
    """
    Store of retrieved passages.

    Args:
        target: SQLAlchemy URI or path of a SQLite file.
    """

    def __init__(self, target: PathLike):
        self.db = Database(as_uri(target))
        self.db.create_all()

    def get(self, provider_id: str, query: str) -> t.Optional[t.List[str]]:
        """Return cached passages in rank order, or ``None`` when the query was never stored."""
        stmt = (
            PassageRecord.select()
            .where(PassageRecord.provider_id == provider_id, PassageRecord.query == query)
            .order_by(PassageRecord.rank)
        )
        with self.db.session() as session:
            records = session.all(stmt)
        if not records:
            return None
        return [record.text for record in records]

    def put(self, provider_id: str, query: str, passages: t.Sequence[str]) -> None:
        """Replace the passages cached for a query."""
        with self.db.begin() as session:
            session.execute(
                PassageRecord.__table__.delete().where(
                    PassageRecord.provider_id == provider_id, PassageRecord.query == query
                )
            )
            session.add_all(
                PassageRecord(provider_id=provider_id, query=query, rank=rank, text=text)
                for rank, text in enumerate(passages)
            )

    def close(self) -> None:
        self.db.close()
