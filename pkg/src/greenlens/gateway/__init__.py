"""The LLM gateway package: templates, answer parsing, backends, batching and retrieval."""

from .backends import (
    Backend,
    HttpBackend,
    LLMRequest,
    MockBackend,
    ReplayBackend,
    build_backend,
    mock_backend,
)
from .batch import BatchRunner, batch_submit, submit_async
from .parsing import FailedJudgment, JudgmentResponse, Outcome, parse_response, render_answer
from .retrieval import PassageProvider, SnapshotRetriever
from .settings import BackendConfig, RetrievalConfig
from .templates import (
    LAYER_A_TEMPLATE,
    LAYER_B_TEMPLATE,
    Layer,
    PromptInput,
    PromptTemplate,
    prompt_hash,
    render_input,
    render_prompt,
)
