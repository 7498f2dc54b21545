"""
Model
-----

Declarative base of the store records.
"""

import typing as t

import sqlalchemy as sa
from sqlalchemy import orm
from sqlalchemy.sql import Select

from . import event


class RecordBase(orm.DeclarativeBase):
    """
    Declarative base of every store record.

    Invariants declared with the :mod:`.event` decorators are attached when a record class is
    mapped. The constructor rejects unknown keyword arguments with ``TypeError``.
    """

    def __init_subclass__(cls, **kwargs: t.Any):
        super().__init_subclass__(**kwargs)
        if "__tablename__" in vars(cls):
            event.register(cls)

    def to_dict(self) -> t.Dict[str, t.Any]:
        """Return the loaded column values, leaving out columns never set."""
        state = sa.inspect(self)
        loaded = {key: state.attrs[key].loaded_value for key in self.__mapper__.columns.keys()}
        return {
            key: value
            for key, value in loaded.items()
            if value is not orm.LoaderCallableStatus.NO_VALUE
        }

    def __repr__(self) -> str:
        values = ", ".join(f"{key}={value!r}" for key, value in self.to_dict().items())
        return f"{type(self).__name__}({values})"

    @classmethod
    def select(cls) -> Select:
        return sa.select(cls)
