"""
Indicators
----------

The greenwashing indicator ``GI`` of each firm-year and the binary greenwashing flag.

A firm-year is flagged when its GI is strictly above its group's mean GI while its environmental
score is strictly below the group's mean score. Groups are industry-years by default, or
industries pooled over all years.
"""

from collections import defaultdict
from dataclasses import asdict, dataclass, replace
import logging
import math
import typing as t

import pandas as pd

from .corpus import FirmMeta
from .errors import ConfigError, EmptyGroup, GroupMismatch, NegativeCount
from .judge_b import XYCount
from .utils import PathLike


logger = logging.getLogger(__name__)

INDUSTRY_YEAR = "industry_year"
INDUSTRY = "industry"
GROUPINGS = (INDUSTRY_YEAR, INDUSTRY)

INDICATOR_COLUMNS = [
    "firm_id",
    "year",
    "industry_code",
    "x",
    "y",
    "gi",
    "esg_e",
    "greenwashing",
    "esg_missing",
]


def compute_gi(x: int, y: int) -> float:
    """
    Return the share of substantive disclosures ``x / (x + y)``, or ``0`` without disclosures.

    >>> compute_gi(3, 1)
    0.75
    >>> compute_gi(0, 0)
    0.0

    Raises:
        NegativeCount: If a count is negative.
    """
    if x < 0 or y < 0:
        raise NegativeCount(f"disclosure counts must be nonnegative, got x={x}, y={y}")
    total = x + y
    return x / total if total else 0.0


@dataclass(frozen=True)
class FirmYearIndicator:
    """
    GI and greenwashing flag of one firm-year.

    ``esg_e`` is ``None`` when the firm-year has no environmental score; such firm-years are
    left out of group means, flagged ``0`` and marked ``esg_missing``.
    """

    firm_id: str
    year: int
    industry_code: str
    x: int = 0
    y: int = 0
    gi: float = 0.0
    esg_e: t.Optional[float] = None
    greenwashing: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gi <= 1.0:
            raise ValueError(f"gi must be within [0, 1], got {self.gi}")
        if self.greenwashing not in (0, 1):
            raise ValueError(f"greenwashing must be 0 or 1, got {self.greenwashing}")

    @property
    def esg_missing(self) -> bool:
        return self.esg_e is None

    def to_dict(self) -> t.Dict[str, t.Any]:
        return {**asdict(self), "esg_missing": self.esg_missing}


@dataclass(frozen=True)
class GroupMeans:
    group_key: t.Tuple[t.Any, ...]
    gi_mean: float
    esg_e_mean: float
    n: int
    grouping: str = INDUSTRY_YEAR

    def __post_init__(self):
        if self.n < 1:
            raise EmptyGroup(f"group {self.group_key} has no firms")


def group_key(ind: FirmYearIndicator, grouping: str = INDUSTRY_YEAR) -> t.Tuple[t.Any, ...]:
    """Return the group of `ind` under `grouping`."""
    if grouping == INDUSTRY_YEAR:
        return (ind.industry_code, ind.year)
    if grouping == INDUSTRY:
        return (ind.industry_code,)
    raise ConfigError(f"unknown grouping {grouping!r}; expected one of {GROUPINGS}")


def compute_group_means(
    indicators: t.Iterable[FirmYearIndicator], grouping: str = INDUSTRY_YEAR
) -> t.List[GroupMeans]:
    """
    Return arithmetic means of GI and environmental score per group, sorted by group key.

    Firm-years without an environmental score are left out. Groups where every firm-year lacks a
    score have no means.

    Raises:
        EmptyGroup: If `indicators` is empty.
    """
    groups: t.Dict[t.Tuple[t.Any, ...], t.List[FirmYearIndicator]] = defaultdict(list)
    seen = 0
    for ind in indicators:
        seen += 1
        if ind.esg_missing:
            continue
        groups[group_key(ind, grouping)].append(ind)

    if not seen:
        raise EmptyGroup("no indicators to compute group means from")

    means = []
    for key in sorted(groups):
        members = groups[key]
        means.append(
            GroupMeans(
                group_key=key,
                gi_mean=math.fsum(ind.gi for ind in members) / len(members),
                esg_e_mean=math.fsum(t.cast(float, ind.esg_e) for ind in members) / len(members),
                n=len(members),
                grouping=grouping,
            )
        )
    return means


def flag_greenwashing(ind: FirmYearIndicator, means: GroupMeans) -> int:
    """
    Return ``1`` when `ind` has GI strictly above and environmental score strictly below the
    group means, else ``0``.

    Raises:
        GroupMismatch: If `means` belongs to another group.
    """
    expected = group_key(ind, means.grouping)
    if tuple(means.group_key) != expected:
        raise GroupMismatch(
            f"{ind.firm_id}/{ind.year} belongs to group {expected}, not {means.group_key}"
        )
    if ind.esg_e is None:
        return 0
    return int(ind.gi > means.gi_mean and ind.esg_e < means.esg_e_mean)


def flag_all(
    indicators: t.Sequence[FirmYearIndicator], grouping: str = INDUSTRY_YEAR
) -> t.Tuple[t.List[FirmYearIndicator], t.List[GroupMeans]]:
    """Return `indicators` with their greenwashing flags set, and the group means used."""
    means = compute_group_means(indicators, grouping)
    by_key = {gm.group_key: gm for gm in means}
    flagged = []
    for ind in indicators:
        gm = by_key.get(group_key(ind, grouping))
        flag = flag_greenwashing(ind, gm) if gm is not None else 0
        flagged.append(replace(ind, greenwashing=flag))
    return flagged, means


def build_indicators(
    firm_years: t.Iterable[t.Tuple[str, int]],
    xy: t.Iterable[XYCount],
    meta: t.Mapping[str, FirmMeta],
    esg: t.Mapping[t.Tuple[str, int], float],
    grouping: str = INDUSTRY_YEAR,
) -> t.List[FirmYearIndicator]:
    """
    Build one flagged indicator per firm-year of the universe.

    Firm-years without keyword pairs get ``X = Y = 0`` and ``GI = 0``.

    Args:
        firm_years: ``(firm_id, year)`` pairs of the study universe.
        xy: X/Y counts from layer B.
        meta: Firm metadata providing industry codes.
        esg: Environmental score per ``(firm_id, year)``.
        grouping: ``"industry_year"`` or ``"industry"``.

    Raises:
        ConfigError: If a firm has no metadata.
        EmptyGroup: If the universe is empty.
    """
    counts = {(c.firm_id, c.year): c for c in xy}
    indicators = []
    missing_esg = 0

    for firm_id, year in sorted(set(firm_years)):
        if firm_id not in meta:
            raise ConfigError(f"no metadata for firm {firm_id!r}")
        count = counts.get((firm_id, year), XYCount(firm_id, year))
        score = esg.get((firm_id, year))
        if score is not None and math.isnan(score):
            score = None
        missing_esg += score is None
        indicators.append(
            FirmYearIndicator(
                firm_id=firm_id,
                year=year,
                industry_code=meta[firm_id].industry_code,
                x=count.x,
                y=count.y,
                gi=compute_gi(count.x, count.y),
                esg_e=score,
            )
        )

    if missing_esg:
        logger.warning(
            "%d firm-year(s) have no environmental score and are never flagged", missing_esg
        )

    flagged, _ = flag_all(indicators, grouping)
    return flagged


def load_esg(path: PathLike) -> t.Dict[t.Tuple[str, int], float]:
    """Load environmental scores from CSV with columns ``firm_id, year, esg_e``."""
    frame = pd.read_csv(path, dtype={"firm_id": str})
    frame = frame.dropna(subset=["esg_e"])
    return {
        (row.firm_id, int(row.year)): float(row.esg_e) for row in frame.itertuples(index=False)
    }


def indicators_frame(indicators: t.Iterable[FirmYearIndicator]) -> pd.DataFrame:
    return pd.DataFrame([ind.to_dict() for ind in indicators], columns=INDICATOR_COLUMNS)


def write_indicators(path: PathLike, indicators: t.Iterable[FirmYearIndicator]) -> None:
    indicators_frame(indicators).to_csv(path, index=False)


def read_indicators(path: PathLike) -> t.List[FirmYearIndicator]:
    frame = pd.read_csv(path, dtype={"firm_id": str, "industry_code": str})
    return [
        FirmYearIndicator(
            firm_id=row.firm_id,
            year=int(row.year),
            industry_code=row.industry_code,
            x=int(row.x),
            y=int(row.y),
            gi=float(row.gi),
            esg_e=None if pd.isna(row.esg_e) else float(row.esg_e),
            greenwashing=int(row.greenwashing),
        )
        for row in frame.itertuples(index=False)
    ]
