"""
Validate
--------

Sampling harness and classification metrics shared by both judgment layers.
"""

from collections import Counter, defaultdict
from dataclasses import asdict, dataclass
import logging
import math
import typing as t

import numpy as np
import pandas as pd
from scipy import integrate, stats

from .errors import EmptyConfusion, MissingLabels, PlanInfeasible
from .utils import PathLike


logger = logging.getLogger(__name__)

#: Confidence bucket edges used by reliability tables; the last bucket is closed.
DEFAULT_CONFIDENCE_EDGES = (0.0, 0.5, 0.7, 0.85, 0.95, 1.0)


@dataclass(frozen=True)
class ConfusionCounts:
    """Binary confusion counts with the positive class labelled ``1``."""

    tp: int = 0
    fn: int = 0
    fp: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fn, self.fp, self.tn) < 0:
            raise ValueError(f"confusion counts must be nonnegative: {self}")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def swapped(self) -> "ConfusionCounts":
        """Return the counts with the positive and negative classes exchanged."""
        return ConfusionCounts(tp=self.tn, fn=self.fp, fp=self.fn, tn=self.tp)

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fn + other.fn, self.fp + other.fp, self.tn + other.tn
        )

    def to_dict(self) -> t.Dict[str, int]:
        return asdict(self)


def acc(c: ConfusionCounts) -> float:
    """
    Return accuracy ``(tp + tn) / total``.

    >>> acc(ConfusionCounts(40, 10, 5, 45))
    0.85

    Raises:
        EmptyConfusion: If all counts are zero.
    """
    if c.total == 0:
        raise EmptyConfusion("accuracy of an empty confusion table")
    return (c.tp + c.tn) / c.total


def f1(c: ConfusionCounts) -> float:
    """
    Return F1 ``2tp / (2tp + fn + fp)``.

    When ``tp = fn = fp = 0`` the score is ``1.0`` for a table of true negatives only.

    Raises:
        EmptyConfusion: If all counts are zero.
    """
    denom = 2 * c.tp + c.fn + c.fp
    if denom == 0:
        if c.tn > 0:
            return 1.0
        raise EmptyConfusion("F1 of an empty confusion table")
    return 2 * c.tp / denom


def mcc(c: ConfusionCounts) -> float:
    """
    Return the Matthews correlation coefficient.

    Returns ``0.0`` when any marginal total is zero.

    >>> round(mcc(ConfusionCounts(40, 10, 5, 45)), 4)
    0.7035
    """
    factors = (c.tp + c.fp, c.tp + c.fn, c.tn + c.fp, c.tn + c.fn)
    if 0 in factors:
        return 0.0
    denom = math.sqrt(factors[0]) * math.sqrt(factors[1]) * math.sqrt(factors[2])
    denom *= math.sqrt(factors[3])
    return (c.tp * c.tn - c.fp * c.fn) / denom


def metrics(c: ConfusionCounts) -> t.Dict[str, float]:
    """Return ``{"acc", "f1", "mcc"}`` for a confusion table."""
    return {"acc": acc(c), "f1": f1(c), "mcc": mcc(c)}


def confusion_from_pairs(
    predictions: t.Mapping[str, int], labels: t.Mapping[str, int]
) -> ConfusionCounts:
    """
    Build confusion counts from predicted and true 0/1 labels keyed by item id.

    Raises:
        MissingLabels: If a predicted item has no label.
    """
    missing = [item for item in predictions if item not in labels]
    if missing:
        raise MissingLabels(missing)

    counts: Counter = Counter()
    for item, predicted in predictions.items():
        counts[(int(labels[item]), int(predicted))] += 1

    return ConfusionCounts(
        tp=counts[(1, 1)], fn=counts[(1, 0)], fp=counts[(0, 1)], tn=counts[(0, 0)]
    )


def replicate_confusions(
    predictions: t.Mapping[str, int],
    labels: t.Mapping[str, int],
    replicates: t.Sequence[t.Sequence[str]],
) -> t.List[ConfusionCounts]:
    """
    Return one confusion table per replicate sample of item ids.

    Items without a prediction (failed judgments) are left out of their replicate's table.

    Raises:
        MissingLabels: If a sampled item has no label.
    """
    missing = sorted({item for sample in replicates for item in sample if item not in labels})
    if missing:
        raise MissingLabels(missing)

    confusions = []
    for sample in replicates:
        judged = {item: predictions[item] for item in sample if item in predictions}
        confusions.append(confusion_from_pairs(judged, labels))
    return confusions


def metrics_report(confusions: t.Sequence[ConfusionCounts]) -> t.Dict[str, t.Any]:
    """
    Return per-replicate metrics and their mean and standard deviation across replicates.

    A replicate whose items all failed has ``evaluated = 0`` and ``NaN`` metrics and is left out
    of the mean and standard deviation. Standard deviations use ``ddof=1`` and are ``0`` for a
    single evaluated replicate.
    """
    replicates = []
    for index, c in enumerate(confusions):
        if c.total:
            values = metrics(c)
        else:
            logger.warning("Replicate %d has no evaluated items; its metrics are NaN", index)
            values = {name: float("nan") for name in ("acc", "f1", "mcc")}
        replicates.append({**c.to_dict(), "evaluated": c.total, **values})
    summary: t.Dict[str, t.Any] = {"replicates": replicates, "mean": {}, "std": {}}

    for name in ("acc", "f1", "mcc"):
        values = np.array([rep[name] for rep in replicates if rep["evaluated"]], dtype=float)
        summary["mean"][name] = float(values.mean()) if values.size else float("nan")
        summary["std"][name] = float(values.std(ddof=1)) if values.size > 1 else 0.0

    return summary


@dataclass(frozen=True)
class SamplingPlan:
    """
    Reproducible sampling plan.

    Each replicate draws ``n_per_replicate`` items without replacement from a generator seeded by
    a child of ``numpy.random.SeedSequence(seed)``, using the named bit generator.
    """

    n_per_replicate: int
    replicates: int = 1
    seed: int = 0
    population_id: str = ""
    bit_generator: str = "PCG64"

    def __post_init__(self):
        if self.n_per_replicate < 1 or self.replicates < 1:
            raise PlanInfeasible("sampling plans need n_per_replicate >= 1 and replicates >= 1")

    def to_dict(self) -> t.Dict[str, t.Any]:
        return asdict(self)


def draw_samples(plan: SamplingPlan, population: t.Union[int, t.Sized]) -> t.List[t.List[int]]:
    """
    Return one sorted list of population indices per replicate.

    Raises:
        PlanInfeasible: If the population is empty or smaller than ``n_per_replicate``.
    """
    size = population if isinstance(population, int) else len(population)
    if size < 1:
        raise PlanInfeasible("cannot sample from an empty population")
    if plan.n_per_replicate > size:
        raise PlanInfeasible(
            f"plan needs {plan.n_per_replicate} items but population {plan.population_id!r} "
            f"has {size}"
        )

    bit_generator = getattr(np.random, plan.bit_generator)
    children = np.random.SeedSequence(plan.seed).spawn(plan.replicates)
    samples = []
    for child in children:
        rng = np.random.Generator(bit_generator(child))
        picked = rng.choice(size, size=plan.n_per_replicate, replace=False)
        samples.append(sorted(int(i) for i in picked))
    return samples


def confidence_density(
    values: t.Sequence[float],
    bins: int = 20,
    *,
    bandwidth: t.Union[None, str, float] = None,
    grid_size: int = 201,
) -> pd.DataFrame:
    """
    Return a density table of confidence values over ``[0, 1]``.

    With no `bandwidth` the table is a normalized histogram with columns ``left, right, density``.
    With a `bandwidth` (``"silverman"``, ``"scott"`` or a scalar factor) it is a Gaussian kernel
    density on an evenly spaced grid with columns ``x, density``, rescaled to integrate to one over
    ``[0, 1]``.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("confidence_density requires at least one value")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("confidence values must lie within [0, 1]")

    if bandwidth is None:
        density, edges = np.histogram(arr, bins=bins, range=(0.0, 1.0), density=True)
        return pd.DataFrame({"left": edges[:-1], "right": edges[1:], "density": density})

    if np.ptp(arr) == 0:
        raise ValueError("kernel density needs at least two distinct values")
    kde = stats.gaussian_kde(arr, bw_method=bandwidth)
    grid = np.linspace(0.0, 1.0, grid_size)
    density = kde(grid)
    density = density / integrate.trapezoid(density, grid)
    return pd.DataFrame({"x": grid, "density": density})


def reliability(
    confidences: t.Sequence[float],
    correct: t.Sequence[bool],
    edges: t.Sequence[float] = DEFAULT_CONFIDENCE_EDGES,
) -> pd.DataFrame:
    """
    Return per-bucket counts and accuracy of verdicts grouped by confidence.

    Buckets are ``[edges[i], edges[i + 1])`` with the last bucket closed on the right. Empty
    buckets report ``n = 0`` and a ``NaN`` accuracy.
    """
    conf = np.asarray(confidences, dtype=float)
    hits = np.asarray(correct, dtype=bool)
    edges = np.asarray(edges, dtype=float)
    index = np.clip(np.searchsorted(edges, conf, side="right") - 1, 0, len(edges) - 2)

    rows = []
    for i in range(len(edges) - 1):
        mask = index == i
        n = int(mask.sum())
        closing = "]" if i == len(edges) - 2 else ")"
        rows.append(
            {
                "bucket": f"[{edges[i]:g}, {edges[i + 1]:g}{closing}",
                "lower": float(edges[i]),
                "upper": float(edges[i + 1]),
                "n": n,
                "correct": int(hits[mask].sum()),
                "accuracy": float(hits[mask].mean()) if n else float("nan"),
            }
        )
    return pd.DataFrame(rows)


@dataclass
class LabelSet:
    """Adjudicated 0/1 labels and the items annotators disagreed on."""

    labels: t.Dict[str, int]
    disagreements: pd.DataFrame

    def __contains__(self, item: object) -> bool:
        return item in self.labels

    def __getitem__(self, item: str) -> int:
        return self.labels[item]

    def __len__(self) -> int:
        return len(self.labels)


def adjudicate(rows: t.Iterable[t.Tuple[str, str, int]]) -> LabelSet:
    """
    Resolve ``(item_id, annotator_id, label)`` rows by majority vote.

    Ties are excluded from the label set and listed in the disagreement report together with every
    other item whose annotators did not agree.
    """
    votes: t.Dict[str, t.List[int]] = defaultdict(list)
    for item_id, _annotator, label in rows:
        votes[str(item_id)].append(int(label))

    labels = {}
    report = []
    for item_id in sorted(votes):
        item_votes = votes[item_id]
        positives = sum(item_votes)
        negatives = len(item_votes) - positives
        resolved: t.Optional[int]
        if positives > negatives:
            resolved = 1
        elif negatives > positives:
            resolved = 0
        else:
            resolved = None
        if resolved is not None:
            labels[item_id] = resolved
        if positives and negatives:
            report.append(
                {
                    "item_id": item_id,
                    "annotators": len(item_votes),
                    "positive": positives,
                    "negative": negatives,
                    "resolved": resolved,
                }
            )

    if report:
        ties = sum(1 for row in report if row["resolved"] is None)
        logger.info("%d labelled item(s) had disagreements, %d tie(s) excluded", len(report), ties)

    columns = ["item_id", "annotators", "positive", "negative", "resolved"]
    return LabelSet(labels=labels, disagreements=pd.DataFrame(report, columns=columns))


def load_labels(path: PathLike) -> LabelSet:
    """
    Load a label CSV.

    Accepts ``item_id, annotator_id, label`` rows, or two-column ``item_id, label`` (also
    ``word, label``) files with a single annotator.
    """
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if "item_id" not in frame.columns:
        frame = frame.rename(columns={frame.columns[0]: "item_id"})
    if "annotator_id" not in frame.columns:
        frame["annotator_id"] = "a0"
    return adjudicate(
        zip(frame["item_id"], frame["annotator_id"], frame["label"].astype(int))
    )
