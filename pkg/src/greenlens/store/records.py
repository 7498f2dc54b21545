"""
Records
-------

ORM records persisted by the transcript journal and the retrieval snapshot store.
"""

import typing as t

import sqlalchemy as sa
from sqlalchemy.orm import Mapped, mapped_column

from . import event
from .model import RecordBase


class TranscriptRecord(RecordBase):
    """One LLM request attempt and its raw answer."""

    __tablename__ = "transcripts"
    __table_args__ = (
        sa.Index("ix_transcript_prompt", "prompt_hash", "attempt"),
        sa.Index("ix_transcript_run", "run_id", "item_id"),
    )

    id: Mapped[int] = mapped_column(sa.Integer(), primary_key=True)
    run_id: Mapped[str] = mapped_column(sa.String(64), nullable=False)
    layer: Mapped[str] = mapped_column(sa.String(1), nullable=False)
    item_id: Mapped[str] = mapped_column(sa.String(), nullable=False)
    prompt_hash: Mapped[str] = mapped_column(sa.String(64), nullable=False)
    attempt: Mapped[int] = mapped_column(sa.Integer(), nullable=False)
    raw_text: Mapped[t.Optional[str]] = mapped_column(sa.Text())
    judgment: Mapped[t.Optional[int]] = mapped_column(sa.Integer())
    confidence: Mapped[t.Optional[float]] = mapped_column(sa.Float())
    error: Mapped[t.Optional[str]] = mapped_column(sa.String())
    backend_id: Mapped[str] = mapped_column(sa.String(), nullable=False)
    latency_ms: Mapped[int] = mapped_column(sa.Integer(), default=0)
    timestamp: Mapped[t.Optional[str]] = mapped_column(sa.String())
    request_options: Mapped[t.Optional[t.Dict[str, t.Any]]] = mapped_column(sa.JSON())

    @event.on_set("judgment")
    def _check_judgment(self, value):
        if value is not None and value not in (0, 1):
            raise ValueError(f"judgment must be 0 or 1, got {value!r}")

    @event.on_set("confidence")
    def _check_confidence(self, value):
        if value is not None and not 0.0 <= value <= 1.0:
            raise ValueError(f"confidence must be within [0, 1], got {value!r}")

    @event.before_save()
    def _check_parsed(self):
        if (self.judgment is None) != (self.confidence is None):
            raise ValueError("judgment and confidence must be stored together")

    @property
    def parsed(self) -> t.Optional[t.Dict[str, t.Any]]:
        if self.judgment is None:
            return None
        return {"judgment": self.judgment, "confidence": self.confidence}


class PassageRecord(RecordBase):
    """One retrieved passage cached for a retrieval query."""

    __tablename__ = "passages"
    __table_args__ = (sa.UniqueConstraint("provider_id", "query", "rank", name="uq_passage_rank"),)

    id: Mapped[int] = mapped_column(sa.Integer(), primary_key=True)
    provider_id: Mapped[str] = mapped_column(sa.String(), nullable=False)
    query: Mapped[str] = mapped_column(sa.Text(), nullable=False)
    rank: Mapped[int] = mapped_column(sa.Integer(), nullable=False)
    text: Mapped[str] = mapped_column(sa.Text(), nullable=False)
