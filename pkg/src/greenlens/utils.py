"""
Utilities
---------

The utilities module.
"""

import hashlib
import json
from pathlib import Path
import typing as t


PathLike = t.Union[str, Path]


def is_iterable_but_not_string(value: t.Any) -> bool:
    """Return whether `value` is an iterable but not string/bytes."""
    return hasattr(value, "__iter__") and not isinstance(value, (str, bytes))


def omit_none(obj: t.Mapping[str, t.Any]) -> t.Dict[str, t.Any]:
    """Return copy of `obj` without keys whose value is ``None``."""
    return {key: value for key, value in obj.items() if value is not None}


def _json_default(value: t.Any) -> t.Any:
    """Convert numpy scalars and arrays, which expose ``item`` or ``tolist``."""
    if hasattr(value, "tolist"):
        return value.tolist()
    if hasattr(value, "item"):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def canonical_json(obj: t.Any) -> str:
    """
    Serialize `obj` to JSON with sorted keys and no insignificant whitespace.

    >>> canonical_json({"b": 1, "a": [1, 2]})
    '{"a":[1,2],"b":1}'
    """
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, default=_json_default
    )


def stable_hash(*parts: t.Any, length: int = 16) -> str:
    """
    Return a hex digest of `parts` that is stable across processes and platforms.

    >>> stable_hash("a", 1) == stable_hash("a", 1)
    True
    >>> len(stable_hash("a"))
    16
    """
    digest = hashlib.sha256(canonical_json(list(parts)).encode("utf-8")).hexdigest()
    return digest[:length]


def sha256_file(path: PathLike) -> str:
    """Return SHA-256 hex digest of a file's bytes."""
    sha = hashlib.sha256()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(1 << 16), b""):
            sha.update(chunk)
    return sha.hexdigest()


def read_jsonl(path: PathLike) -> t.List[t.Dict[str, t.Any]]:
    """Return list of objects from a JSON-lines file, skipping blank lines."""
    with open(path, encoding="utf-8") as fp:
        return [json.loads(line) for line in fp if line.strip()]


def write_jsonl(path: PathLike, rows: t.Iterable[t.Mapping[str, t.Any]]) -> None:
    """Write `rows` as JSON-lines with canonical key order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        for row in rows:
            fp.write(canonical_json(row))
            fp.write("\n")


def write_json(path: PathLike, obj: t.Any) -> None:
    """Write `obj` as indented JSON with sorted keys."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        json.dump(obj, fp, sort_keys=True, indent=2, ensure_ascii=False, default=_json_default)
        fp.write("\n")


def read_json(path: PathLike) -> t.Any:
    """Return decoded JSON document at `path`."""
    with open(path, encoding="utf-8") as fp:
        return json.load(fp)
