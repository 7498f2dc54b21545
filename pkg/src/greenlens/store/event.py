"""
Event
-----

Record invariants declared as decorated methods on store records.

The decorators only tag the method; :func:`register` wires the tags to SQLAlchemy ORM events once
the record class is mapped.
"""

from dataclasses import dataclass
import typing as t

from sqlalchemy.event import listen


TAGS = "__record_listeners__"


@dataclass(frozen=True)
class Listener:
    event_name: str
    attribute: t.Optional[str]
    func: t.Callable[..., t.Any]
    retval: bool = False


def _tag(method: t.Callable, listener: Listener) -> None:
    if not hasattr(method, TAGS):
        setattr(method, TAGS, [])
    getattr(method, TAGS).append(listener)


def on_set(attribute: str, *, retval: bool = False) -> t.Callable[[t.Callable], t.Callable]:
    """
    Call the decorated method as ``method(record, value)`` whenever `attribute` is assigned.

    The method may raise to reject the value. With `retval` its return value replaces the
    assigned value.
    """

    def decorator(method: t.Callable) -> t.Callable:
        def listener(target, value, oldvalue, initiator):
            result = method(target, value)
            return result if retval else value

        _tag(method, Listener("set", attribute, listener, retval))
        return method

    return decorator


def before_save() -> t.Callable[[t.Callable], t.Callable]:
    """Call the decorated method as ``method(record)`` before the record is inserted or updated."""

    def decorator(method: t.Callable) -> t.Callable:
        def listener(mapper, connection, target):
            method(target)

        for name in ("before_insert", "before_update"):
            _tag(method, Listener(name, None, listener))
        return method

    return decorator


def register(cls: type) -> int:
    """Attach the listeners tagged on the methods of the mapped class `cls`; return their count."""
    count = 0
    for value in vars(cls).values():
        for listener in getattr(value, TAGS, ()):
            target = getattr(cls, listener.attribute) if listener.attribute else cls
            options = {"retval": True} if listener.retval else {}
            listen(target, listener.event_name, listener.func, **options)
            count += 1
    return count
