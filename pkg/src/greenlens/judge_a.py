"""
Judge A
-------

Judgment layer A: classify every S1 word as a green-disclosure keyword or not, build the green
dictionary, and compare candidate backends against human labels.
"""

from dataclasses import asdict, dataclass, field
import logging
import typing as t

import numpy as np
import pandas as pd

from .errors import PayloadMismatch
from .gateway import (
    LAYER_A_TEMPLATE,
    Backend,
    BackendConfig,
    FailedJudgment,
    JudgmentResponse,
    Layer,
    Outcome,
    PromptInput,
    PromptTemplate,
    batch_submit,
)
from .segment import UniqueWordSequence
from .store import Journal
from .utils import PathLike, read_json, write_json, write_jsonl
from .validate import confidence_density, metrics_report, replicate_confusions


logger = logging.getLogger(__name__)

ACCEPTED = "accepted"
REJECTED = "rejected"
FAILED = "failed"


@dataclass(frozen=True)
class DictionaryEntry:
    word: str
    confidence: float
    backend_id: str = ""

    def to_dict(self) -> t.Dict[str, t.Any]:
        return {"word": self.word, "confidence": self.confidence, "model_id": self.backend_id}

    @classmethod
    def from_dict(cls, data: t.Mapping[str, t.Any]) -> "DictionaryEntry":
        return cls(
            word=data["word"],
            confidence=float(data.get("confidence", 1.0)),
            backend_id=data.get("model_id", data.get("backend_id", "")),
        )


@dataclass(frozen=True)
class GreenDictionary:
    """
    Words judged to be green-disclosure keywords.

    Iterating a dictionary yields its words, so it can be passed wherever a word list is expected.
    """

    entries: t.Tuple[DictionaryEntry, ...] = ()
    built_from: str = ""
    template_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        words = [entry.word for entry in self.entries]
        if len(set(words)) != len(words):
            raise ValueError("green dictionary words must be unique")

    def __iter__(self) -> t.Iterator[str]:
        return (entry.word for entry in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, word: object) -> bool:
        return any(entry.word == word for entry in self.entries)

    @property
    def words(self) -> t.List[str]:
        return list(self)

    def to_dict(self) -> t.Dict[str, t.Any]:
        return {
            "built_from": self.built_from,
            "template_id": self.template_id,
            "entries": [entry.to_dict() for entry in self.entries],
        }

    @classmethod
    def from_dict(
        cls, data: t.Union[t.Mapping[str, t.Any], t.Sequence[t.Any]]
    ) -> "GreenDictionary":
        """Build a dictionary from its JSON form, or from a bare array of entries or words."""
        if isinstance(data, t.Mapping):
            entries = data.get("entries", [])
            meta = {
                "built_from": data.get("built_from", ""),
                "template_id": data.get("template_id", ""),
            }
        else:
            entries, meta = data, {}
        return cls(
            entries=tuple(
                DictionaryEntry(word=item, confidence=1.0)
                if isinstance(item, str)
                else DictionaryEntry.from_dict(item)
                for item in entries
            ),
            **meta,
        )


@dataclass(frozen=True)
class LogEntry:
    """The layer A outcome of one word."""

    word: str
    status: str
    judgment: t.Optional[int] = None
    confidence: t.Optional[float] = None
    backend_id: str = ""
    attempts: int = 1
    error: t.Optional[str] = None

    def to_dict(self) -> t.Dict[str, t.Any]:
        return asdict(self)

    @classmethod
    def from_outcome(cls, word: str, outcome: Outcome) -> "LogEntry":
        if isinstance(outcome, JudgmentResponse):
            return cls(
                word=word,
                status=ACCEPTED if outcome.judgment == 1 else REJECTED,
                judgment=outcome.judgment,
                confidence=outcome.confidence,
                backend_id=outcome.backend_id,
                attempts=outcome.attempt,
            )
        outcome = t.cast(FailedJudgment, outcome)
        return cls(
            word=word,
            status=FAILED,
            backend_id=outcome.backend_id,
            attempts=outcome.attempts,
            error=outcome.error,
        )


@dataclass
class LayerAResult:
    """Green dictionary plus the full judgment log, one entry per S1 word."""

    dictionary: GreenDictionary
    log: t.List[LogEntry] = field(default_factory=list)

    def by_status(self, status: str) -> t.List[str]:
        return [entry.word for entry in self.log if entry.status == status]

    @property
    def failed(self) -> t.List[str]:
        return self.by_status(FAILED)

    @property
    def predictions(self) -> t.Dict[str, int]:
        """Return ``word -> judgment`` for every successfully judged word."""
        return {
            entry.word: t.cast(int, entry.judgment)
            for entry in self.log
            if entry.status != FAILED
        }


def build_dictionary(
    log: t.Sequence[LogEntry], *, built_from: str = "", template_id: str = ""
) -> GreenDictionary:
    """Return the dictionary of accepted words in `log`, keeping S1 order."""
    entries = [
        DictionaryEntry(
            word=entry.word, confidence=t.cast(float, entry.confidence), backend_id=entry.backend_id
        )
        for entry in log
        if entry.status == ACCEPTED
    ]
    return GreenDictionary(entries=tuple(entries), built_from=built_from, template_id=template_id)


def run_layer_a(
    s1: t.Union[UniqueWordSequence, t.Sequence[str]],
    config: BackendConfig,
    template: PromptTemplate = LAYER_A_TEMPLATE,
    *,
    backend: t.Optional[Backend] = None,
    journal: t.Optional[Journal] = None,
    from_journal: bool = False,
    run_id: str = "layer-a",
    corpus_id: str = "",
) -> LayerAResult:
    """
    Judge every S1 word and build the green dictionary.

    Words whose judgment failed after all retries are kept in the log with status ``failed`` and
    never enter the dictionary.

    Args:
        s1: Unique word sequence.
        config: Backend configuration.
        template: Layer A prompt template.

    Keyword Arguments:
        backend: Backend instance. Built from `config` when omitted.
        journal: Transcript journal, or the replay source when `from_journal` is set.
        from_journal: Replay answers from `journal`.
        run_id: Journal run identifier.
        corpus_id: Identifier of the corpus S1 was built from.

    Raises:
        PayloadMismatch: If `template` is not a layer A template.
    """
    if template.layer is not Layer.A:
        raise PayloadMismatch(f"template {template.template_id!r} is not a layer A template")

    words = list(s1)
    outcomes = batch_submit(
        [PromptInput(word) for word in words],
        config,
        template,
        backend=backend,
        journal=journal,
        from_journal=from_journal,
        run_id=run_id,
    )
    log = [LogEntry.from_outcome(word, outcome) for word, outcome in zip(words, outcomes)]
    dictionary = build_dictionary(log, built_from=corpus_id, template_id=template.template_id)

    logger.info(
        "Layer A: %d word(s) judged, %d accepted, %d failed",
        len(words),
        len(dictionary),
        sum(1 for entry in log if entry.status == FAILED),
    )
    return LayerAResult(dictionary=dictionary, log=log)


@dataclass
class BackendComparison:
    """Validation metrics of one backend."""

    backend_id: str
    summary: t.Dict[str, t.Any]
    confidences: t.List[float]
    density: pd.DataFrame
    failed: int = 0

    @property
    def mcc_mean(self) -> float:
        return self.summary["mean"]["mcc"]

    @property
    def mcc_std(self) -> float:
        return self.summary["std"]["mcc"]

    @property
    def confidence_iqr(self) -> float:
        """Return the interquartile range of confidences, a measure of their concentration."""
        if not self.confidences:
            return float("nan")
        q1, q3 = np.percentile(self.confidences, [25, 75])
        return float(q3 - q1)

    def to_dict(self) -> t.Dict[str, t.Any]:
        return {
            "backend_id": self.backend_id,
            **self.summary,
            "failed": self.failed,
            "confidence_iqr": self.confidence_iqr,
            "confidence_density": self.density.to_dict(orient="records"),
        }


@dataclass
class ModelComparisonReport:
    backends: t.Dict[str, BackendComparison]

    def ranking(self) -> t.List[str]:
        return rank_backends(self)

    def to_dict(self) -> t.Dict[str, t.Any]:
        return {
            "ranking": self.ranking(),
            "backends": {key: value.to_dict() for key, value in self.backends.items()},
        }

    def metrics_table(self) -> pd.DataFrame:
        """Return one row per backend and replicate with confusion counts and metrics."""
        rows = []
        for backend_id, comparison in self.backends.items():
            for index, rep in enumerate(comparison.summary["replicates"]):
                rows.append({"backend_id": backend_id, "replicate": index, **rep})
        return pd.DataFrame(rows)

    def density_table(self) -> pd.DataFrame:
        frames = [
            comparison.density.assign(backend_id=backend_id)
            for backend_id, comparison in self.backends.items()
        ]
        return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()


def compare_judgments(
    replicates: t.Sequence[t.Sequence[str]],
    labels: t.Mapping[str, int],
    results: t.Mapping[str, t.Sequence[LogEntry]],
    *,
    bins: int = 20,
) -> ModelComparisonReport:
    """
    Compare backends from their layer A logs.

    Args:
        replicates: Sampled words per replicate.
        labels: Human 0/1 label per word.
        results: Layer A log entries per backend id.

    Raises:
        MissingLabels: If a sampled word has no label.
    """
    sampled = {word for sample in replicates for word in sample}
    backends = {}
    for backend_id, log in results.items():
        predictions = {
            entry.word: t.cast(int, entry.judgment) for entry in log if entry.status != FAILED
        }
        confusions = replicate_confusions(predictions, labels, replicates)
        confidences = [
            t.cast(float, entry.confidence)
            for entry in log
            if entry.status != FAILED and entry.word in sampled
        ]
        density = (
            confidence_density(confidences, bins=bins)
            if confidences
            else pd.DataFrame(columns=["left", "right", "density"])
        )
        backends[backend_id] = BackendComparison(
            backend_id=backend_id,
            summary=metrics_report(confusions),
            confidences=confidences,
            density=density,
            failed=sum(1 for entry in log if entry.status == FAILED and entry.word in sampled),
        )
    return ModelComparisonReport(backends=backends)


def compare_backends(
    replicates: t.Sequence[t.Sequence[str]],
    labels: t.Mapping[str, int],
    backends: t.Sequence[BackendConfig],
    template: PromptTemplate = LAYER_A_TEMPLATE,
    *,
    journal: t.Optional[Journal] = None,
    from_journal: bool = False,
    instances: t.Optional[t.Mapping[str, Backend]] = None,
) -> ModelComparisonReport:
    """
    Judge the sampled words with every backend and compare them against human labels.

    Every backend receives the same prompts. Labels are checked before any backend is called.

    Args:
        replicates: Sampled words per replicate.
        labels: Human 0/1 label per word.
        backends: Configurations of the candidate backends.
        template: Layer A prompt template.

    Keyword Arguments:
        journal: Transcript journal, or the replay source when `from_journal` is set.
        from_journal: Replay answers from `journal`.
        instances: Prebuilt backends keyed by backend id.

    Raises:
        MissingLabels: If a sampled word has no label.
    """
    replicate_confusions({}, labels, replicates)

    words = sorted({word for sample in replicates for word in sample})
    instances = instances or {}
    results = {}
    for config in backends:
        result = run_layer_a(
            words,
            config,
            template,
            backend=instances.get(config.backend_id),
            journal=journal,
            from_journal=from_journal,
            run_id=f"compare-{config.backend_id}",
        )
        results[config.backend_id] = result.log

    return compare_judgments(replicates, labels, results)


def rank_backends(report: ModelComparisonReport) -> t.List[str]:
    """
    Order backend ids by MCC mean (descending), MCC spread and confidence IQR (ascending).

    The ranking is informational; the champion backend is designated in the pipeline
    configuration.
    """

    def key(item: t.Tuple[str, BackendComparison]) -> t.Tuple[float, float, float, str]:
        backend_id, comp = item
        iqr = comp.confidence_iqr
        mean, std = comp.mcc_mean, comp.mcc_std
        # Backends without an evaluated replicate rank last.
        return (
            -mean if mean == mean else float("inf"),
            std if std == std else float("inf"),
            iqr if iqr == iqr else float("inf"),
            backend_id,
        )

    return [backend_id for backend_id, _ in sorted(report.backends.items(), key=key)]


def write_dictionary(path: PathLike, dictionary: GreenDictionary) -> None:
    write_json(path, dictionary.to_dict())


def read_dictionary(path: PathLike) -> GreenDictionary:
    return GreenDictionary.from_dict(read_json(path))


def write_log(path: PathLike, log: t.Iterable[LogEntry]) -> None:
    write_jsonl(path, (entry.to_dict() for entry in log))
