"""
Database
--------

Engine and session factory shared by the journal and the snapshot store.
"""

from contextlib import contextmanager
import typing as t

from sqlalchemy import MetaData, create_engine
from sqlalchemy.engine import URL, make_url
from sqlalchemy.orm import sessionmaker

from ..utils import omit_none
from .model import RecordBase
from .session import Session


class Database:
    """
    One store database.

    Args:
        uri: SQLAlchemy URI, e.g. ``sqlite:///journal.sqlite``.

    Keyword Arguments:
        model_class: Declarative base whose tables live in this database.
        echo: Log every SQL statement.
        engine_options: Extra ``create_engine`` options.
    """

    def __init__(
        self,
        uri: str,
        *,
        model_class: t.Type[RecordBase] = RecordBase,
        echo: t.Optional[bool] = None,
        engine_options: t.Optional[t.Dict[str, t.Any]] = None,
    ):
        self.url: URL = make_url(uri)
        self.model_class = model_class
        self.engine_options = omit_none({"echo": echo, **(engine_options or {})})
        self.engine = create_engine(self.url, **self.engine_options)
        self.sessionmaker = sessionmaker(bind=self.engine, class_=Session, expire_on_commit=False)

    @property
    def metadata(self) -> MetaData:
        return self.model_class.metadata

    def create_all(self) -> None:
        """Create the missing record tables."""
        self.metadata.create_all(self.engine)

    def session(self) -> Session:
        return self.sessionmaker()

    @contextmanager
    def begin(self) -> t.Iterator[Session]:
        """Yield a session inside a transaction that commits on exit and rolls back on error."""
        with self.session() as session, session.begin():
            yield session

    def close(self) -> None:
        self.engine.dispose()

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.url!r})"
