"""
Batch
-----

Bounded-concurrency submission of judgment prompts.

At most ``max_inflight`` requests are outstanding at any time. Every item is retried after a
malformed answer or a transport error until ``1 + max_retries`` attempts were made. Results are
returned in input order regardless of completion order, and transcripts are journaled when the
batch ends, also in input order.
"""

import asyncio
from dataclasses import dataclass, field
from datetime import datetime, timezone
import logging
import time
import typing as t

from ..errors import BatchAborted, ConfigError, FixtureMissing, MalformedAnswer, TransportError
from ..store import Journal
from .backends import Backend, LLMRequest, build_backend
from .parsing import FailedJudgment, JudgmentResponse, Outcome, parse_response
from .settings import BackendConfig
from .templates import Payload, PromptInput, PromptTemplate, prompt_hash, render_input


logger = logging.getLogger(__name__)


@dataclass
class _ItemRun:
    item: PromptInput
    prompt: str
    prompt_hash: str
    outcome: t.Optional[Outcome] = None
    transcripts: t.List[t.Dict[str, t.Any]] = field(default_factory=list)


class BatchRunner:
    """
    Submit rendered prompts to a backend under the bounded-concurrency contract.

    Args:
        backend: Backend to call.
        config: Backend configuration supplying concurrency and retry limits.

    Keyword Arguments:
        journal: Journal receiving one transcript per attempt.
        run_id: Journal run identifier.
        layer: Judgment layer recorded with each transcript.
    """

    def __init__(
        self,
        backend: Backend,
        config: BackendConfig,
        *,
        journal: t.Optional[Journal] = None,
        run_id: str = "",
        layer: str = "",
    ):
        self.backend = backend
        self.config = config
        self.journal = journal
        self.run_id = run_id
        self.layer = layer
        self.inflight = 0
        self.max_observed_inflight = 0

    async def run(
        self, template: PromptTemplate, items: t.Sequence[PromptInput]
    ) -> t.List[Outcome]:
        runs = []
        for item in items:
            prompt = render_input(template, item)
            runs.append(_ItemRun(item=item, prompt=prompt, prompt_hash=prompt_hash(prompt)))

        semaphore = asyncio.Semaphore(self.config.max_inflight)
        try:
            await asyncio.gather(*(self._submit(run, semaphore) for run in runs))
        finally:
            await self.backend.aclose()
            # Attempts already made are journaled even when the batch is interrupted.
            if self.journal is not None:
                self.journal.record(entry for run in runs for entry in run.transcripts)

        failures = sum(1 for run in runs if not t.cast(Outcome, run.outcome).ok)
        if failures:
            logger.warning(
                "%d of %d item(s) failed on backend %s", failures, len(runs), self.backend
            )
        return [t.cast(Outcome, run.outcome) for run in runs]

    async def _submit(self, run: _ItemRun, semaphore: asyncio.Semaphore) -> None:
        attempts = self.config.max_retries + 1
        error = ""

        for attempt in range(1, attempts + 1):
            request = LLMRequest(
                item_id=run.item.item_id,
                prompt=run.prompt,
                prompt_hash=run.prompt_hash,
                attempt=attempt,
                fixture_keys=run.item.fixture_keys,
            )
            started = time.perf_counter()
            raw: t.Optional[str] = None

            try:
                async with semaphore:
                    self._enter()
                    try:
                        raw = await self.backend.complete(request)
                    finally:
                        self.inflight -= 1
            except FixtureMissing as exc:
                error = f"FixtureMissing: {exc}"
                self._transcript(run, attempt, None, error, started)
                break
            except TransportError as exc:
                error = f"TransportError: {exc}"
                self._transcript(run, attempt, None, error, started)
                await self._backoff(attempt)
                continue

            latency_ms = self._latency(started)
            try:
                response = parse_response(
                    raw,
                    backend_id=self.backend.backend_id,
                    latency_ms=latency_ms,
                    attempt=attempt,
                )
            except MalformedAnswer as exc:
                error = f"{type(exc).__name__}: {exc}"
                self._transcript(run, attempt, raw, error, started)
                await self._backoff(attempt)
                continue

            self._transcript(run, attempt, raw, None, started, response)
            run.outcome = response
            return

        logger.debug("Item %s failed after %d attempt(s): %s", run.item.item_id, attempt, error)
        run.outcome = FailedJudgment(
            item_id=run.item.item_id,
            attempts=attempt,
            error=error,
            backend_id=self.backend.backend_id,
        )

    def _enter(self) -> None:
        self.inflight += 1
        self.max_observed_inflight = max(self.max_observed_inflight, self.inflight)

    async def _backoff(self, attempt: int) -> None:
        if self.config.retry_backoff_ms:
            await asyncio.sleep(self.config.retry_backoff_ms * 2 ** (attempt - 1) / 1000)

    def _latency(self, started: float) -> int:
        if not self.backend.live:
            return 0
        return int((time.perf_counter() - started) * 1000)

    def _transcript(
        self,
        run: _ItemRun,
        attempt: int,
        raw: t.Optional[str],
        error: t.Optional[str],
        started: float,
        response: t.Optional[JudgmentResponse] = None,
    ) -> None:
        timestamp = datetime.now(timezone.utc).isoformat() if self.backend.live else None
        run.transcripts.append(
            {
                "run_id": self.run_id,
                "layer": self.layer,
                "item_id": run.item.item_id,
                "prompt_hash": run.prompt_hash,
                "attempt": attempt,
                "raw_text": raw,
                "judgment": response.judgment if response else None,
                "confidence": response.confidence if response else None,
                "error": error,
                "backend_id": self.backend.backend_id,
                "latency_ms": self._latency(started),
                "timestamp": timestamp,
                "request_options": self.config.get_request_options() or None,
            }
        )


def _as_inputs(items: t.Sequence[t.Union[Payload, PromptInput]]) -> t.List[PromptInput]:
    return [item if isinstance(item, PromptInput) else PromptInput(item) for item in items]


async def submit_async(
    items: t.Sequence[t.Union[Payload, PromptInput]],
    config: BackendConfig,
    template: PromptTemplate,
    *,
    backend: t.Optional[Backend] = None,
    journal: t.Optional[Journal] = None,
    from_journal: bool = False,
    run_id: str = "",
) -> t.List[Outcome]:
    """Asynchronous form of :func:`batch_submit`."""
    inputs = _as_inputs(items)
    if not inputs:
        return []

    if backend is None:
        try:
            backend = build_backend(config, journal=journal, from_journal=from_journal)
        except (ConfigError, OSError, ValueError) as exc:
            raise BatchAborted(f"cannot start batch on {config.backend_id!r}: {exc}") from exc

    # Replays never write back into the journal they read from.
    sink = None if from_journal else journal
    runner = BatchRunner(
        backend, config, journal=sink, run_id=run_id, layer=template.layer.value
    )
    logger.info(
        "Submitting %d item(s) to %s (max_inflight=%d)",
        len(inputs),
        backend,
        config.max_inflight,
    )
    return await runner.run(template, inputs)


def batch_submit(
    items: t.Sequence[t.Union[Payload, PromptInput]],
    config: BackendConfig,
    template: PromptTemplate,
    *,
    backend: t.Optional[Backend] = None,
    journal: t.Optional[Journal] = None,
    from_journal: bool = False,
    run_id: str = "",
) -> t.List[Outcome]:
    """
    Judge `items` and return one outcome per item in input order.

    Args:
        items: Words, keyword-context pairs or :class:`.PromptInput` objects.
        config: Backend configuration.
        template: Prompt template matching the payload type.

    Keyword Arguments:
        backend: Backend instance. Built from `config` when omitted.
        journal: Journal receiving transcripts, or the replay source when `from_journal` is set.
        from_journal: Replay answers from `journal`.
        run_id: Journal run identifier.

    Raises:
        BatchAborted: If the backend cannot be built from `config`.
        PayloadMismatch: If an item does not match the template layer.
    """
    return asyncio.run(
        submit_async(
            items,
            config,
            template,
            backend=backend,
            journal=journal,
            from_journal=from_journal,
            run_id=run_id,
        )
    )
