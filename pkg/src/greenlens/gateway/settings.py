"""
Gateway Settings
----------------

Configuration containers for LLM backends and retrieval providers.
"""

from dataclasses import asdict, dataclass, field, fields
import typing as t
from typing import Mapping

from ..errors import ConfigError
from ..utils import omit_none


BACKEND_KINDS = ("http_api", "local", "mock")

#: Environment variable holding the API key when a config does not name one.
DEFAULT_API_KEY_ENV = "GREENLENS_API_KEY"


class _SettingsMapping(Mapping):
    def __getitem__(self, item):
        if item not in self._field_names():
            raise KeyError(item)
        return getattr(self, item)

    def __iter__(self) -> t.Iterator[str]:
        return iter(self._field_names())

    def __len__(self) -> int:
        return len(self._field_names())

    @classmethod
    def _field_names(cls) -> t.Tuple[str, ...]:
        return tuple(f.name for f in fields(cls))  # type: ignore[arg-type]


@dataclass(frozen=True)
class RetrievalConfig(_SettingsMapping):
    """
    Retrieval provider for the RAG ablation arm.

    Passages are read from the snapshot at ``snapshot_path``. The provider ``endpoint`` is only
    contacted when ``record`` is set, in which case fetched passages are written to the snapshot.
    """

    provider_id: str
    snapshot_path: str
    max_passages: int = 3
    endpoint: t.Optional[str] = None
    record: bool = False
    api_key_env: t.Optional[str] = None
    timeout_ms: int = 30000

    def __post_init__(self):
        if self.max_passages < 1:
            raise ConfigError("retrieval max_passages must be >= 1")
        if self.record and not self.endpoint:
            raise ConfigError(f"retrieval provider {self.provider_id!r} records without endpoint")


@dataclass(frozen=True)
class BackendConfig(_SettingsMapping):
    """
    LLM backend configuration.

    Sampling parameters (``temperature``, ``top_p``, ``seed``, ``max_tokens``) are sent with every
    request and journaled alongside each transcript.

    Args:
        backend_id: Identifier used in logs, journals and reports.
        kind: One of ``http_api``, ``local`` or ``mock``.

    Keyword Arguments:
        endpoint: Chat-completions URL for ``http_api`` and ``local`` backends.
        model_name: Model name sent with each request.
        max_inflight: Maximum number of outstanding requests.
        max_retries: Retries after a malformed answer or transport error.
        timeout_ms: Per-request timeout.
        retry_backoff_ms: Base delay of the exponential backoff between retries.
        api_key_env: Environment variable holding the bearer token. ``local`` backends send none.
        fixture_path: Scripted fixture of a ``mock`` backend.
        mock_default: Answer for requests missing from the fixture: ``"fail"`` or a
            ``{"judgment", "confidence"}`` mapping.
        retrieval: Optional retrieval provider.
    """

    backend_id: str
    kind: str = "mock"
    endpoint: str = ""
    model_name: str = ""
    max_inflight: int = 100
    max_retries: int = 3
    timeout_ms: int = 60000
    retry_backoff_ms: int = 0
    temperature: t.Optional[float] = 0.0
    top_p: t.Optional[float] = None
    seed: t.Optional[int] = None
    max_tokens: t.Optional[int] = None
    api_key_env: str = DEFAULT_API_KEY_ENV
    fixture_path: t.Optional[str] = None
    mock_default: t.Union[str, t.Mapping[str, t.Any]] = "fail"
    retrieval: t.Optional[RetrievalConfig] = None
    request_options: t.Mapping[str, t.Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.backend_id:
            raise ConfigError("backend_id must be nonempty")
        if self.kind not in BACKEND_KINDS:
            raise ConfigError(f"backend kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if self.max_inflight < 1:
            raise ConfigError(f"max_inflight must be >= 1, got {self.max_inflight}")
        if self.max_retries < 0:
            raise ConfigError(f"max_retries must be >= 0, got {self.max_retries}")
        if self.kind == "mock" and not self.fixture_path:
            raise ConfigError(f"mock backend {self.backend_id!r} requires a fixture_path")
        if self.kind != "mock" and not self.endpoint:
            raise ConfigError(f"{self.kind} backend {self.backend_id!r} requires an endpoint")
        if isinstance(self.mock_default, str) and self.mock_default != "fail":
            raise ConfigError("mock_default must be 'fail' or a judgment mapping")

    def get_request_options(self) -> t.Dict[str, t.Any]:
        """Return the sampling options sent with each request."""
        opts = {
            "model": self.model_name or None,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "seed": self.seed,
            "max_tokens": self.max_tokens,
            **self.request_options,
        }
        return omit_none(opts)

    def to_dict(self) -> t.Dict[str, t.Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: t.Mapping[str, t.Any]) -> "BackendConfig":
        data = dict(data)
        retrieval = data.pop("retrieval", None)
        if retrieval is not None and not isinstance(retrieval, RetrievalConfig):
            retrieval = RetrievalConfig(**retrieval)
        known = set(cls._field_names())
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown backend option(s): {', '.join(sorted(unknown))}")
        return cls(retrieval=retrieval, **data)
