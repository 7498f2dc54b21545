"""
Session
-------

ORM session with the two query shortcuts the stores use.
"""

import typing as t

from sqlalchemy import orm
from sqlalchemy.sql import Select


class Session(orm.Session):
    """ORM session bound to one store database."""

    def all(self, statement: Select, **params: t.Any) -> t.List[t.Any]:
        """Return every record selected by `statement`."""
        return list(self.scalars(statement, params or None).all())

    def first(self, statement: Select, **params: t.Any) -> t.Optional[t.Any]:
        """Return the first record selected by `statement`, or ``None``."""
        return self.scalars(statement, params or None).first()
