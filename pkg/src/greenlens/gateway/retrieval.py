"""
Retrieval
---------

Snapshot-first retrieval of evidence passages for the RAG ablation arm.

Passages are always read from a snapshot. Live retrieval only happens in recording mode, and
every fetched result is written to the snapshot so later runs replay it offline.
"""

import asyncio
import logging
import os
import typing as t

import aiohttp

from ..errors import TransportError
from ..store import SnapshotStore
from .settings import RetrievalConfig


logger = logging.getLogger(__name__)


class PassageProvider:
    """
    HTTP search provider returning passages for a query.

    The endpoint receives ``GET ?q=<query>&k=<max_passages>`` and must answer with a JSON list of
    strings or an object with a ``passages`` list.
    """

    def __init__(self, config: RetrievalConfig):
        self.config = config

    async def fetch_many(
        self, queries: t.Sequence[str], max_inflight: int = 8
    ) -> t.List[t.List[str]]:
        headers = {}
        if self.config.api_key_env:
            api_key = os.environ.get(self.config.api_key_env)
            if api_key:
                headers["Authorization"] = f"Bearer {api_key}"

        semaphore = asyncio.Semaphore(max_inflight)
        timeout = aiohttp.ClientTimeout(total=self.config.timeout_ms / 1000)

        async with aiohttp.ClientSession(headers=headers, timeout=timeout) as session:

            async def fetch(query: str) -> t.List[str]:
                async with semaphore:
                    return await self._fetch(session, query)

            return list(await asyncio.gather(*(fetch(query) for query in queries)))

    async def _fetch(self, session: aiohttp.ClientSession, query: str) -> t.List[str]:
        params = {"q": query, "k": str(self.config.max_passages)}
        try:
            async with session.get(t.cast(str, self.config.endpoint), params=params) as resp:
                if resp.status >= 400:
                    raise TransportError(f"retrieval HTTP {resp.status} for {query!r}")
                data = await resp.json(content_type=None)
        except (aiohttp.ClientError, asyncio.TimeoutError) as exc:
            raise TransportError(f"retrieval failed for {query!r}: {exc}") from exc

        if isinstance(data, dict):
            data = data.get("passages", [])
        return [str(passage) for passage in data][: self.config.max_passages]


class SnapshotRetriever:
    """
    Retriever backed by a passage snapshot.

    Args:
        config: Retrieval configuration.

    Keyword Arguments:
        store: Snapshot store. Defaults to one at ``config.snapshot_path``.
        provider: Live provider used in recording mode. Defaults to :class:`PassageProvider`.
    """

    def __init__(
        self,
        config: RetrievalConfig,
        *,
        store: t.Optional[SnapshotStore] = None,
        provider: t.Optional[PassageProvider] = None,
    ):
        self.config = config
        self.store = store or SnapshotStore(config.snapshot_path)
        self.provider = provider
        if self.provider is None and config.record:
            self.provider = PassageProvider(config)

    def retrieve_many(self, queries: t.Sequence[str]) -> t.List[t.List[str]]:
        """Return passages for each query, in query order."""
        results: t.List[t.Optional[t.List[str]]] = [
            self.store.get(self.config.provider_id, query) for query in queries
        ]
        missing = sorted({query for query, found in zip(queries, results) if found is None})

        if missing and self.config.record and self.provider is not None:
            logger.info("Fetching passages for %d uncached queries", len(missing))
            fetched = asyncio.run(self.provider.fetch_many(missing))
            for query, passages in zip(missing, fetched):
                self.store.put(self.config.provider_id, query, passages)
            lookup = dict(zip(missing, fetched))
            results = [lookup.get(query, found) for query, found in zip(queries, results)]
        elif missing:
            logger.warning(
                "%d retrieval queries missing from snapshot %s; using no evidence",
                len(missing),
                self.config.snapshot_path,
            )

        return [(found or [])[: self.config.max_passages] for found in results]

    def retrieve(self, query: str) -> t.List[str]:
        """Return passages for a single query."""
        return self.retrieve_many([query])[0]

    def close(self) -> None:
        self.store.close()
