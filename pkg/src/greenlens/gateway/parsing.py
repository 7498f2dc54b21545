"""
Parsing
-------

Strict parsing of model answers into judgment responses.
"""

from dataclasses import dataclass
import json
import math
import re
import typing as t

from ..errors import MalformedAnswer, OutOfRange


ANSWER_KEYS = frozenset({"judgment", "confidence"})

_FENCE_RE = re.compile(r"\A```(?:json)?[ \t]*\n?(?P<body>.*?)\n?```\Z", re.DOTALL | re.IGNORECASE)


@dataclass(frozen=True)
class JudgmentResponse:
    """A parsed model verdict."""

    judgment: int
    confidence: float
    raw_text: str = ""
    backend_id: str = ""
    latency_ms: int = 0
    attempt: int = 1

    ok: t.ClassVar[bool] = True

    def __post_init__(self):
        check_range(self.judgment, self.confidence)


@dataclass(frozen=True)
class FailedJudgment:
    """An item that produced no valid verdict after all attempts."""

    item_id: str
    attempts: int
    error: str
    backend_id: str = ""

    ok: t.ClassVar[bool] = False


Outcome = t.Union[JudgmentResponse, FailedJudgment]


def check_range(judgment: t.Any, confidence: t.Any) -> None:
    """
    Raise :class:`.OutOfRange` unless `judgment` is 0 or 1 and `confidence` lies in ``[0, 1]``.
    """
    if judgment not in (0, 1):
        raise OutOfRange(f"judgment must be 0 or 1, got {judgment!r}")
    if not 0.0 <= confidence <= 1.0:
        raise OutOfRange(f"confidence must be within [0, 1], got {confidence!r}")


def _reject_constant(name: str) -> t.NoReturn:
    raise MalformedAnswer(f"non-finite number {name} in answer")


def _unique_object(pairs: t.List[t.Tuple[str, t.Any]]) -> t.Dict[str, t.Any]:
    obj: t.Dict[str, t.Any] = {}
    for key, value in pairs:
        if key in obj:
            raise MalformedAnswer(f"duplicate key {key!r} in answer")
        obj[key] = value
    return obj


def _strip_fence(text: str) -> str:
    match = _FENCE_RE.match(text)
    if match:
        return match["body"].strip()
    return text


def parse_response(
    raw: str, *, backend_id: str = "", latency_ms: int = 0, attempt: int = 1
) -> JudgmentResponse:
    """
    Parse a model answer of the form ``{"judgment": int, "confidence": float}``.

    Surrounding whitespace and a single fenced code block are tolerated. Anything else around the
    JSON object, missing or extra keys, or values of the wrong type make the answer malformed.

    >>> parse_response('{"judgment":1,"confidence":0.92}').confidence
    0.92

    Raises:
        MalformedAnswer: If the answer does not follow the schema.
        OutOfRange: If the judgment is not 0 or 1 or the confidence lies outside ``[0, 1]``.
    """
    if not raw or not raw.strip():
        raise MalformedAnswer("empty answer")

    text = _strip_fence(raw.strip())

    try:
        obj = json.loads(text, parse_constant=_reject_constant, object_pairs_hook=_unique_object)
    except json.JSONDecodeError as exc:
        raise MalformedAnswer(f"answer is not a JSON object: {exc.msg}") from exc

    if not isinstance(obj, dict):
        raise MalformedAnswer(f"answer must be a JSON object, got {type(obj).__name__}")
    if set(obj) != ANSWER_KEYS:
        raise MalformedAnswer(f"answer keys must be {sorted(ANSWER_KEYS)}, got {sorted(obj)}")

    judgment = obj["judgment"]
    confidence = obj["confidence"]

    if isinstance(judgment, bool) or not isinstance(judgment, int):
        raise MalformedAnswer(f"judgment must be an integer, got {judgment!r}")
    if isinstance(confidence, bool) or not isinstance(confidence, (int, float)):
        raise MalformedAnswer(f"confidence must be a number, got {confidence!r}")
    if not math.isfinite(confidence):
        raise MalformedAnswer(f"confidence must be finite, got {confidence!r}")

    check_range(judgment, confidence)

    return JudgmentResponse(
        judgment=judgment,
        confidence=float(confidence),
        raw_text=raw,
        backend_id=backend_id,
        latency_ms=latency_ms,
        attempt=attempt,
    )


def render_answer(judgment: int, confidence: float) -> str:
    """
    Return the canonical answer text for a verdict.

    >>> render_answer(0, 0.5)
    '{"judgment":0,"confidence":0.5}'
    """
    return json.dumps({"judgment": judgment, "confidence": confidence}, separators=(",", ":"))
