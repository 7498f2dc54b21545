"""
Backends
--------

LLM backends: an OpenAI-compatible HTTP backend, a scripted mock backend and a journal replay
backend.
"""

from abc import ABC, abstractmethod
import asyncio
from dataclasses import dataclass
import json
import logging
import os
from pathlib import Path
import typing as t

import aiohttp

from ..errors import ConfigError, FixtureMissing, TransportError
from ..store import Journal
from .parsing import render_answer
from .settings import BackendConfig


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LLMRequest:
    """A single request attempt sent to a backend."""

    item_id: str
    prompt: str
    prompt_hash: str
    attempt: int = 1
    fixture_keys: t.Tuple[str, ...] = ()


class Backend(ABC):
    """
    Base class of LLM backends.

    ``live`` backends contact a remote service, so their transcripts carry wall-clock latency and
    timestamps.
    """

    backend_id: str
    live: bool = False

    @abstractmethod
    async def complete(self, request: LLMRequest) -> str:
        """Return the raw answer text for `request`."""

    async def aclose(self) -> None:
        """Release resources held by the backend."""

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.backend_id!r})"


class MockBackend(Backend):
    """
    Deterministic backend driven by a scripted fixture.

    The fixture maps a key to a sequence of raw answers. Keys are tried in order: the prompt hash,
    then the request's item-level fixture keys. Attempt ``k`` receives the ``k``-th scripted answer;
    the last answer repeats for later attempts.

    Args:
        fixture: Mapping of key to a raw answer or a list of raw answers.

    Keyword Arguments:
        backend_id: Backend identifier.
        default: Answer for unknown keys. ``"fail"`` raises :class:`.FixtureMissing`; a
            ``(judgment, confidence)`` pair or ``{"judgment", "confidence"}`` mapping answers with
            that verdict.
        delay: Seconds to sleep before answering.
    """

    def __init__(
        self,
        fixture: t.Mapping[str, t.Union[str, t.Sequence[str]]],
        *,
        backend_id: str = "mock",
        default: t.Union[str, t.Mapping[str, t.Any], t.Tuple[int, float]] = "fail",
        delay: float = 0.0,
    ):
        self.backend_id = backend_id
        self.fixture = {
            key: [value] if isinstance(value, str) else list(value)
            for key, value in fixture.items()
        }
        self.default = _default_answer(default)
        self.delay = delay

    @classmethod
    def from_file(cls, path: t.Union[str, Path], **kwargs: t.Any) -> "MockBackend":
        """Load a JSON fixture mapping key to a list of raw answers."""
        with open(path, encoding="utf-8") as fp:
            return cls(json.load(fp), **kwargs)

    def script_for(self, request: LLMRequest) -> t.Optional[t.List[str]]:
        for key in (request.prompt_hash, *request.fixture_keys):
            if key in self.fixture:
                return self.fixture[key]
        return None

    async def complete(self, request: LLMRequest) -> str:
        if self.delay:
            await asyncio.sleep(self.delay)
        script = self.script_for(request)
        if script is None:
            if self.default is None:
                raise FixtureMissing(f"no scripted answer for item {request.item_id!r}")
            return self.default
        if not script:
            raise FixtureMissing(f"empty script for item {request.item_id!r}")
        return script[min(request.attempt, len(script)) - 1]


def _default_answer(default: t.Any) -> t.Optional[str]:
    if default is None or default == "fail":
        return None
    if isinstance(default, t.Mapping):
        return render_answer(int(default["judgment"]), float(default["confidence"]))
    judgment, confidence = default
    return render_answer(int(judgment), float(confidence))


class HttpBackend(Backend):
    """
    OpenAI-compatible chat-completions backend.

    ``http_api`` backends authenticate with a bearer token read from the configured environment
    variable. ``local`` backends send no token.

    Raises:
        ConfigError: If an ``http_api`` backend's key variable is unset.
    """

    live = True

    def __init__(self, config: BackendConfig):
        self.backend_id = config.backend_id
        self.config = config
        self.headers = self._headers()
        self._session: t.Optional[aiohttp.ClientSession] = None

    def _headers(self) -> t.Dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.kind == "http_api":
            api_key = os.environ.get(self.config.api_key_env)
            if not api_key:
                raise ConfigError(f"environment variable {self.config.api_key_env} is not set")
            headers["Authorization"] = f"Bearer {api_key}"
        return headers

    def _get_session(self) -> aiohttp.ClientSession:
        if self._session is None or self._session.closed:
            self._session = aiohttp.ClientSession(
                headers=self.headers,
                timeout=aiohttp.ClientTimeout(total=self.config.timeout_ms / 1000),
            )
        return self._session

    async def complete(self, request: LLMRequest) -> str:
        payload = {
            **self.config.get_request_options(),
            "messages": [{"role": "user", "content": request.prompt}],
        }
        session = self._get_session()
        try:
            async with session.post(self.config.endpoint, json=payload) as resp:
                if resp.status >= 400:
                    body = await resp.text()
                    raise TransportError(f"HTTP {resp.status}: {body[:200]}")
                data = await resp.json(content_type=None)
        except (aiohttp.ClientError, asyncio.TimeoutError, ValueError) as exc:
            # ValueError covers bodies that are not JSON.
            raise TransportError(f"{type(exc).__name__}: {exc}") from exc

        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected response shape: {str(data)[:200]}") from exc

    async def aclose(self) -> None:
        if self._session is not None:
            await self._session.close()
            self._session = None


class ReplayBackend(Backend):
    """
    Backend that answers from a transcript journal.

    Attempts replay exactly what the journaled backend returned, including transport failures.
    """

    def __init__(self, journal: Journal, backend_id: str):
        self.backend_id = backend_id
        self.journal = journal

    async def complete(self, request: LLMRequest) -> str:
        record = self.journal.lookup(request.prompt_hash, request.attempt, self.backend_id)
        if record is None:
            raise FixtureMissing(
                f"journal has no attempt {request.attempt} for item {request.item_id!r}"
            )
        if record.raw_text is None:
            # Journaled errors read "<ExceptionName>: <message>".
            name, _, message = (record.error or "").partition(": ")
            if name == "FixtureMissing":
                raise FixtureMissing(message)
            raise TransportError(message or "journaled transport failure")
        return record.raw_text


def build_backend(
    config: BackendConfig,
    *,
    journal: t.Optional[Journal] = None,
    from_journal: bool = False,
    base_dir: t.Optional[Path] = None,
) -> Backend:
    """
    Return the backend described by `config`.

    Keyword Arguments:
        journal: Journal used for replay.
        from_journal: Replay answers from `journal` instead of contacting the backend.
        base_dir: Directory that relative fixture paths are resolved against.
    """
    if from_journal:
        if journal is None:
            raise ConfigError("replay requested without a journal")
        return ReplayBackend(journal, config.backend_id)

    if config.kind == "mock":
        path = Path(t.cast(str, config.fixture_path))
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return MockBackend.from_file(
            path, backend_id=config.backend_id, default=config.mock_default
        )

    return HttpBackend(config)


def mock_backend(
    fixture: t.Union[str, Path, t.Mapping[str, t.Any]], **kwargs: t.Any
) -> MockBackend:
    """Return a :class:`MockBackend` for a fixture mapping or a JSON fixture file."""
    if isinstance(fixture, (str, Path)):
        return MockBackend.from_file(fixture, **kwargs)
    return MockBackend(fixture, **kwargs)
