"""
Judge B
-------

Judgment layer B: classify each keyword-context pair as a substantive (``1``) or symbolic (``0``)
disclosure under one ablation arm, count X and Y per firm-year, and report how the arms compare
against human labels.

The four keyword categories are routed by the model itself through the task description.
:func:`.diagnostic_category` only feeds the composition table of the ablation report.
"""

from collections import Counter
from dataclasses import asdict, dataclass, field
import enum
import logging
from pathlib import Path
import typing as t

import pandas as pd

from .corpus import EnvSection
from .errors import ConfigError, DuplicatePair, MixedArms, PayloadMismatch
from .gateway import (
    LAYER_B_TEMPLATE,
    Backend,
    BackendConfig,
    JudgmentResponse,
    Layer,
    Outcome,
    PromptInput,
    PromptTemplate,
    RetrievalConfig,
    SnapshotRetriever,
    batch_submit,
)
from .segment import KeywordContextPair, Segmenter, diagnostic_category
from .store import Journal
from .utils import PathLike, read_jsonl, write_json, write_jsonl
from .validate import (
    DEFAULT_CONFIDENCE_EDGES,
    confidence_density,
    metrics_report,
    reliability,
    replicate_confusions,
)


logger = logging.getLogger(__name__)

DEFAULT_CONTEXT_WINDOW = 2


class Arm(str, enum.Enum):
    CONTROL = "control"
    RAG = "rag"
    CONTEXT = "context"


@dataclass(frozen=True)
class AblationArm:
    """
    The prompt variant of a layer B run.

    ``control`` sends the bare pair, ``context`` adds up to `context_window_sentences` sentences
    before and after the pair's sentence, and ``rag`` appends passages retrieved for the sentence.
    """

    arm: Arm = Arm.CONTROL
    context_window_sentences: int = DEFAULT_CONTEXT_WINDOW
    retrieval: t.Optional[RetrievalConfig] = None

    def __post_init__(self):
        object.__setattr__(self, "arm", Arm(self.arm))
        if self.context_window_sentences < 0:
            raise ConfigError("context_window_sentences must be >= 0")
        if self.arm is Arm.RAG and self.retrieval is None:
            raise ConfigError("the rag arm requires a retrieval configuration")

    @property
    def name(self) -> str:
        return self.arm.value


@dataclass(frozen=True)
class PairVerdict:
    """
    The layer B outcome of one pair under one arm.

    A verdict without a judgment records a failed pair.
    """

    pair_id: str
    firm_id: str
    year: int
    arm: str
    judgment: t.Optional[int] = None
    confidence: t.Optional[float] = None
    backend_id: str = ""
    error: t.Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.judgment is not None

    def to_dict(self) -> t.Dict[str, t.Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: t.Mapping[str, t.Any]) -> "PairVerdict":
        judgment = data.get("judgment")
        confidence = data.get("confidence")
        return cls(
            pair_id=data["pair_id"],
            firm_id=str(data["firm_id"]),
            year=int(data["year"]),
            arm=data["arm"],
            judgment=None if judgment is None else int(judgment),
            confidence=None if confidence is None else float(confidence),
            backend_id=data.get("backend_id", ""),
            error=data.get("error"),
        )

    @classmethod
    def from_outcome(cls, pair: KeywordContextPair, arm: str, outcome: Outcome) -> "PairVerdict":
        if isinstance(outcome, JudgmentResponse):
            return cls(
                pair_id=pair.pair_id,
                firm_id=pair.firm_id,
                year=pair.year,
                arm=arm,
                judgment=outcome.judgment,
                confidence=outcome.confidence,
                backend_id=outcome.backend_id,
            )
        return cls(
            pair_id=pair.pair_id,
            firm_id=pair.firm_id,
            year=pair.year,
            arm=arm,
            backend_id=outcome.backend_id,
            error=outcome.error,
        )


@dataclass(frozen=True)
class XYCount:
    """Substantive (``x``) and symbolic (``y``) disclosure counts of a firm-year."""

    firm_id: str
    year: int
    x: int = 0
    y: int = 0

    def to_dict(self) -> t.Dict[str, t.Any]:
        return asdict(self)


def context_windows(
    pairs: t.Sequence[KeywordContextPair],
    sections: t.Iterable[EnvSection],
    window: int = DEFAULT_CONTEXT_WINDOW,
    segmenter: t.Optional[Segmenter] = None,
) -> t.List[t.Tuple[str, ...]]:
    """
    Return the neighboring sentences of each pair: up to `window` before and `window` after.

    Sentences are split the same way S2 was built, so a pair's ``sentence_index`` addresses its
    sentence.
    """
    segmenter = segmenter or Segmenter()
    sentences = {(sec.firm_id, sec.year): segmenter.sentences(sec.text) for sec in sections}
    windows = []
    for pair in pairs:
        doc = sentences.get((pair.firm_id, pair.year))
        if doc is None:
            logger.warning(
                "No section for %s/%s; pair %s gets no context",
                pair.firm_id,
                pair.year,
                pair.pair_id,
            )
            windows.append(())
            continue
        i = pair.sentence_index
        before = doc[max(0, i - window) : i]
        after = doc[i + 1 : i + 1 + window]
        windows.append((*before, *after))
    return windows


def build_payloads(
    pairs: t.Sequence[KeywordContextPair],
    arm: AblationArm,
    *,
    sections: t.Optional[t.Iterable[EnvSection]] = None,
    retriever: t.Optional[SnapshotRetriever] = None,
    segmenter: t.Optional[Segmenter] = None,
) -> t.List[PromptInput]:
    """
    Return the prompt inputs of `pairs` under `arm`.

    Every input is tagged with the arm name so mock fixtures can script arms separately.

    Raises:
        ConfigError: If the arm needs sections or a retriever that was not given.
    """
    tag = arm.name
    if arm.arm is Arm.CONTROL:
        return [PromptInput(pair, tag=tag) for pair in pairs]

    if arm.arm is Arm.CONTEXT:
        if sections is None:
            raise ConfigError("the context arm requires the environmental sections")
        windows = context_windows(pairs, sections, arm.context_window_sentences, segmenter)
        return [PromptInput(pair, context=ctx, tag=tag) for pair, ctx in zip(pairs, windows)]

    if retriever is None:
        retriever = SnapshotRetriever(t.cast(RetrievalConfig, arm.retrieval))
    passages = retriever.retrieve_many([pair.plain_sentence for pair in pairs])
    return [
        PromptInput(pair, retrieved=tuple(found), tag=tag) for pair, found in zip(pairs, passages)
    ]


def run_layer_b(
    pairs: t.Sequence[KeywordContextPair],
    arm: AblationArm,
    config: BackendConfig,
    template: PromptTemplate = LAYER_B_TEMPLATE,
    *,
    sections: t.Optional[t.Iterable[EnvSection]] = None,
    retriever: t.Optional[SnapshotRetriever] = None,
    segmenter: t.Optional[Segmenter] = None,
    backend: t.Optional[Backend] = None,
    journal: t.Optional[Journal] = None,
    from_journal: bool = False,
    run_id: t.Optional[str] = None,
) -> t.List[PairVerdict]:
    """
    Judge every pair under `arm` and return one verdict per pair, in input order.

    Failed pairs yield verdicts without a judgment.

    Raises:
        PayloadMismatch: If `template` is not a layer B template.
        ConfigError: If the arm is missing its sections or retrieval configuration.
    """
    if template.layer is not Layer.B:
        raise PayloadMismatch(f"template {template.template_id!r} is not a layer B template")

    inputs = build_payloads(
        pairs, arm, sections=sections, retriever=retriever, segmenter=segmenter
    )
    outcomes = batch_submit(
        inputs,
        config,
        template,
        backend=backend,
        journal=journal,
        from_journal=from_journal,
        run_id=run_id or f"layer-b-{arm.name}",
    )
    verdicts = [
        PairVerdict.from_outcome(pair, arm.name, outcome) for pair, outcome in zip(pairs, outcomes)
    ]
    logger.info(
        "Layer B (%s): %d pair(s) judged, %d failed",
        arm.name,
        len(verdicts),
        sum(1 for verdict in verdicts if not verdict.ok),
    )
    return verdicts


def count_xy(
    verdicts: t.Iterable[PairVerdict],
    firm_years: t.Iterable[t.Tuple[str, int]] = (),
) -> t.List[XYCount]:
    """
    Count substantive (X) and symbolic (Y) verdicts per firm-year.

    Failed verdicts are not counted. Firm-years in `firm_years` without verdicts get ``X = Y = 0``.

    >>> v = [PairVerdict(str(i), "f1", 2022, "control", j, 0.9) for i, j in enumerate([1, 1, 0])]
    >>> count_xy(v)
    [XYCount(firm_id='f1', year=2022, x=2, y=1)]

    Raises:
        DuplicatePair: If a pair has more than one verdict.
        MixedArms: If verdicts come from more than one arm.
    """
    counts: t.Dict[t.Tuple[str, int], Counter] = {}
    for firm_id, year in firm_years:
        counts.setdefault((str(firm_id), int(year)), Counter())

    seen: t.Set[str] = set()
    arms: t.Set[str] = set()
    for verdict in verdicts:
        if verdict.pair_id in seen:
            raise DuplicatePair(f"pair {verdict.pair_id!r} has more than one verdict")
        seen.add(verdict.pair_id)
        arms.add(verdict.arm)
        if len(arms) > 1:
            raise MixedArms(f"cannot count verdicts of arms {sorted(arms)} together")
        counter = counts.setdefault((verdict.firm_id, verdict.year), Counter())
        if verdict.ok:
            counter["x" if verdict.judgment == 1 else "y"] += 1

    return [
        XYCount(firm_id=firm_id, year=year, x=counter["x"], y=counter["y"])
        for (firm_id, year), counter in sorted(counts.items())
    ]


@dataclass
class ArmReport:
    """Validation results of one ablation arm."""

    arm: str
    summary: t.Dict[str, t.Any]
    density: pd.DataFrame
    reliability: pd.DataFrame
    composition: pd.DataFrame = field(default_factory=pd.DataFrame)
    evaluated: int = 0
    failed: int = 0

    def to_dict(self) -> t.Dict[str, t.Any]:
        return {
            "arm": self.arm,
            **self.summary,
            "evaluated": self.evaluated,
            "failed": self.failed,
            "reliability": self.reliability.to_dict(orient="records"),
            "composition": self.composition.to_dict(orient="records"),
        }


@dataclass
class AblationReport:
    arms: t.Dict[str, ArmReport]

    def to_dict(self) -> t.Dict[str, t.Any]:
        return {name: report.to_dict() for name, report in self.arms.items()}

    def _stack(self, attr: str) -> pd.DataFrame:
        frames = [getattr(rep, attr).assign(arm=name) for name, rep in self.arms.items()]
        frames = [frame for frame in frames if not frame.empty]
        return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()

    def metrics_table(self) -> pd.DataFrame:
        rows = [
            {"arm": name, **{key: rep.summary["mean"][key] for key in ("acc", "f1", "mcc")}}
            for name, rep in self.arms.items()
        ]
        return pd.DataFrame(rows)

    def reliability_table(self) -> pd.DataFrame:
        return self._stack("reliability")

    def density_table(self) -> pd.DataFrame:
        return self._stack("density")

    def composition_table(self) -> pd.DataFrame:
        return self._stack("composition")

    def write(self, directory: PathLike) -> None:
        """Write the JSON report and plot-ready CSV tables to `directory`."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        write_json(directory / "ablation.json", self.to_dict())
        self.metrics_table().to_csv(directory / "ablation_metrics.csv", index=False)
        self.reliability_table().to_csv(directory / "ablation_reliability.csv", index=False)
        self.density_table().to_csv(directory / "ablation_density.csv", index=False)
        self.composition_table().to_csv(directory / "ablation_composition.csv", index=False)


def _composition(
    verdicts: t.Sequence[PairVerdict],
    labels: t.Mapping[str, int],
    categories: t.Mapping[str, str],
) -> pd.DataFrame:
    rows: t.Dict[str, t.Dict[str, t.Any]] = {}
    for verdict in verdicts:
        category = categories.get(verdict.pair_id, "other")
        row = rows.setdefault(category, {"category": category, "n": 0, "correct": 0})
        row["n"] += 1
        row["correct"] += int(verdict.judgment == labels[verdict.pair_id])
    frame = pd.DataFrame(sorted(rows.values(), key=lambda row: row["category"]))
    if not frame.empty:
        frame["accuracy"] = frame["correct"] / frame["n"]
    return frame


def ablation_report(
    verdicts: t.Mapping[str, t.Sequence[PairVerdict]],
    labels: t.Mapping[str, int],
    *,
    samples: t.Optional[t.Sequence[t.Sequence[str]]] = None,
    pairs: t.Optional[t.Iterable[KeywordContextPair]] = None,
    edges: t.Sequence[float] = DEFAULT_CONFIDENCE_EDGES,
    bins: int = 20,
) -> AblationReport:
    """
    Compare ablation arms against human labels.

    Args:
        verdicts: Verdicts per arm name.
        labels: Human 0/1 label per pair id.

    Keyword Arguments:
        samples: Pair ids per replicate. Defaults to one replicate of every labelled pair.
        pairs: Pairs used to tag the diagnostic category of each verdict.
        edges: Confidence bucket edges of the reliability table.
        bins: Histogram bins of the confidence density.

    Raises:
        MissingLabels: If a sampled pair has no label.
    """
    if samples is None:
        samples = [sorted(labels)]
    sampled = {pair_id for sample in samples for pair_id in sample}
    categories = {pair.pair_id: diagnostic_category(pair) for pair in pairs or ()}

    reports = {}
    for arm, arm_verdicts in verdicts.items():
        judged = [v for v in arm_verdicts if v.ok and v.pair_id in sampled]
        predictions = {v.pair_id: t.cast(int, v.judgment) for v in judged}
        confusions = replicate_confusions(predictions, labels, samples)
        confidences = [t.cast(float, v.confidence) for v in judged]
        correct = [v.judgment == labels[v.pair_id] for v in judged]
        density = (
            confidence_density(confidences, bins=bins)
            if confidences
            else pd.DataFrame(columns=["left", "right", "density"])
        )
        reports[arm] = ArmReport(
            arm=arm,
            summary=metrics_report(confusions),
            density=density,
            reliability=reliability(confidences, correct, edges),
            composition=_composition(judged, labels, categories),
            evaluated=len(judged),
            failed=sum(1 for v in arm_verdicts if not v.ok and v.pair_id in sampled),
        )
    return AblationReport(arms=reports)


def write_verdicts(path: PathLike, verdicts: t.Iterable[PairVerdict]) -> None:
    write_jsonl(path, (verdict.to_dict() for verdict in verdicts))


def read_verdicts(path: PathLike) -> t.List[PairVerdict]:
    return [PairVerdict.from_dict(row) for row in read_jsonl(path)]


def write_xy(path: PathLike, counts: t.Iterable[XYCount]) -> None:
    columns = ["firm_id", "year", "x", "y"]
    frame = pd.DataFrame([count.to_dict() for count in counts], columns=columns)
    frame.to_csv(path, index=False)


def read_xy(path: PathLike) -> t.List[XYCount]:
    frame = pd.read_csv(path, dtype={"firm_id": str})
    return [
        XYCount(firm_id=row.firm_id, year=int(row.year), x=int(row.x), y=int(row.y))
        for row in frame.itertuples(index=False)
    ]
