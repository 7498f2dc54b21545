"""
Design
------

Panel loading, model specifications and design matrices.

A design matrix holds an intercept, the regressors, interaction columns and one dummy per fixed
effect level except the first (sorted) level of each fixed effect. Rows with a missing value in any
field a model uses are deleted listwise. Columns that are linear combinations of earlier columns
are dropped and recorded.
"""

from dataclasses import asdict, dataclass, field, replace
import logging
import typing as t

import numpy as np
import pandas as pd
from scipy import linalg

from ..errors import ConfigError, EmptyAfterFilter, NonCountDependent, NotBinary, RankDeficient
from ..utils import PathLike


logger = logging.getLogger(__name__)

FAMILIES = ("logit", "probit", "ols", "poisson", "negbin")
BINARY_FAMILIES = ("logit", "probit")
COUNT_FAMILIES = ("poisson", "negbin")
FIXED_EFFECTS = ("year", "industry", "year_industry")
COV_TYPES = ("nonrobust", "robust", "cluster")

#: Firm-level control variables of the benchmark models.
CONTROLS = ("lev", "roa", "growth", "top1", "listage", "pfixa", "psales")

PANEL_COLUMNS = (
    "firm_id",
    "year",
    "industry_code",
    "vio",
    "vio_num",
    "greenwashing",
    *CONTROLS,
    "esg_investor",
    "base",
)

CONST = "const"

#: Relative residual norm below which a design column counts as collinear.
COLLINEARITY_TOL = 1e-9


@dataclass(frozen=True)
class PanelRow:
    """
    One firm-year of the estimation panel.

    ``group_flags`` holds the subsample indicators used by heterogeneity splits, e.g. foreign
    ownership or corporate scale.
    """

    firm_id: str
    year: int
    industry_code: str
    vio: int
    vio_num: int
    greenwashing: int
    lev: float
    roa: float
    growth: float
    top1: float
    listage: int
    pfixa: float
    psales: float
    esg_investor: t.Optional[int] = None
    base: t.Optional[float] = None
    group_flags: t.Mapping[str, t.Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.vio not in (0, 1):
            raise NotBinary(f"vio must be 0 or 1, got {self.vio!r}")
        if self.vio_num < 0:
            raise NonCountDependent(f"vio_num must be >= 0, got {self.vio_num!r}")
        controls = [getattr(self, name) for name in CONTROLS]
        if not np.all(np.isfinite(controls)):
            raise ValueError(f"controls of {self.firm_id}/{self.year} must be finite")

    def to_dict(self) -> t.Dict[str, t.Any]:
        data = asdict(self)
        flags = data.pop("group_flags")
        return {**data, **flags}


def panel_frame(rows: t.Iterable[PanelRow]) -> pd.DataFrame:
    """Return a panel data frame with group flags as extra columns."""
    return pd.DataFrame([row.to_dict() for row in rows])


def check_panel(panel: pd.DataFrame) -> pd.DataFrame:
    """
    Validate the outcome columns of a panel and return it.

    Raises:
        NotBinary: If ``vio`` holds values other than 0 and 1.
        NonCountDependent: If ``vio_num`` holds negative or fractional values.
    """
    if "vio" in panel:
        values = panel["vio"].dropna()
        if not values.isin([0, 1]).all():
            raise NotBinary("panel column 'vio' must be 0 or 1")
    if "vio_num" in panel:
        values = panel["vio_num"].dropna()
        if (values < 0).any() or (values != np.floor(values)).any():
            raise NonCountDependent("panel column 'vio_num' must hold nonnegative integers")
    return panel


def load_panel(path: PathLike) -> pd.DataFrame:
    """Load a panel CSV keyed by ``firm_id`` and ``year``."""
    panel = pd.read_csv(path, dtype={"firm_id": str, "industry_code": str})
    return check_panel(panel)


def assemble_panel(indicators: pd.DataFrame, controls: pd.DataFrame) -> pd.DataFrame:
    """
    Join firm-year indicators with outcomes and controls.

    Only firm-years present in both tables are kept. The industry code comes from the indicators.
    """
    controls = controls.drop(
        columns=[col for col in ("industry_code", "greenwashing") if col in controls]
    )
    panel = indicators.merge(controls, on=["firm_id", "year"], how="inner", validate="one_to_one")
    panel = panel.sort_values(["firm_id", "year"], kind="mergesort").reset_index(drop=True)
    return check_panel(panel)


def add_lags(
    panel: pd.DataFrame,
    columns: t.Sequence[str],
    *,
    entity: str = "firm_id",
    time: str = "year",
    lag: int = 1,
) -> pd.DataFrame:
    """
    Return a copy of `panel` with ``<column>_lag`` columns holding each firm's value `lag` years
    earlier, or ``NaN`` when that year is absent.
    """
    if panel.duplicated([entity, time]).any():
        raise ValueError(f"panel has duplicate ({entity}, {time}) rows")
    shifted = panel[[entity, time, *columns]].copy()
    shifted[time] = shifted[time] + lag
    shifted = shifted.rename(columns={col: f"{col}_lag" for col in columns})
    existing = [f"{col}_lag" for col in columns if f"{col}_lag" in panel]
    return panel.drop(columns=existing).merge(shifted, on=[entity, time], how="left")


Subsample = t.Union[t.Mapping[str, t.Any], t.Callable[[pd.DataFrame], t.Any]]


@dataclass(frozen=True)
class ModelSpec:
    """
    Declarative model specification.

    Attributes:
        dependent: Dependent variable.
        regressors: Main-effect regressors. The first one is the focus term unless `focus` is set.
            An empty tuple fits an intercept-only model whose focus term is the constant.
        family: One of ``logit``, ``probit``, ``ols``, ``poisson`` or ``negbin``.
        interactions: Pairs of regressors entered as products, named ``a:b``.
        fixed_effects: Any of ``year``, ``industry`` and ``year_industry``.
        subsample: Column to value (or list of values) filter, or a callable returning a row mask.
        focus: Coefficient of interest.
        cov_type: ``nonrobust``, ``robust`` or ``cluster``.
        cluster: Cluster column used by ``cluster`` standard errors.
        name: Column label in rendered tables.
    """

    dependent: str
    regressors: t.Tuple[str, ...]
    family: str = "logit"
    interactions: t.Tuple[t.Tuple[str, str], ...] = ()
    fixed_effects: t.Tuple[str, ...] = ()
    subsample: t.Optional[Subsample] = None
    focus: t.Optional[str] = None
    cov_type: str = "nonrobust"
    cluster: str = "firm_id"
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "regressors", tuple(self.regressors))
        object.__setattr__(
            self, "interactions", tuple(tuple(pair) for pair in self.interactions)
        )
        object.__setattr__(self, "fixed_effects", tuple(self.fixed_effects))

        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.cov_type not in COV_TYPES:
            raise ConfigError(f"unknown cov_type {self.cov_type!r}; expected one of {COV_TYPES}")
        if self.dependent in self.regressors:
            raise ConfigError(f"dependent {self.dependent!r} is also a regressor")
        unknown = set(self.fixed_effects) - set(FIXED_EFFECTS)
        if unknown:
            raise ConfigError(f"unknown fixed effects {sorted(unknown)}")
        for pair in self.interactions:
            if len(pair) != 2 or not set(pair) <= set(self.regressors):
                raise ConfigError(f"interaction {pair} must combine two main-effect regressors")
        if self.focus is not None and self.focus not in (CONST, *self.terms):
            raise ConfigError(f"focus {self.focus!r} is not a model term")

    @property
    def terms(self) -> t.List[str]:
        return [*self.regressors, *(f"{a}:{b}" for a, b in self.interactions)]

    @property
    def focus_term(self) -> str:
        if self.focus:
            return self.focus
        return self.regressors[0] if self.regressors else CONST

    def replace(self, **changes: t.Any) -> "ModelSpec":
        return replace(self, **changes)

    def to_dict(self) -> t.Dict[str, t.Any]:
        data = asdict(self)
        data["interactions"] = [list(pair) for pair in self.interactions]
        data["regressors"] = list(self.regressors)
        data["fixed_effects"] = list(self.fixed_effects)
        if callable(self.subsample):
            data["subsample"] = getattr(self.subsample, "__name__", "callable")
        elif self.subsample is not None:
            data["subsample"] = dict(self.subsample)
        return data

    @classmethod
    def from_dict(cls, data: t.Mapping[str, t.Any]) -> "ModelSpec":
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown model spec keys {sorted(unknown)}")
        return cls(**data)


@dataclass
class DesignMatrix:
    """Dependent vector, regressor matrix and the rows they were built from."""

    spec: ModelSpec
    y: np.ndarray
    X: np.ndarray
    columns: t.List[str]
    frame: pd.DataFrame
    dropped: t.List[str] = field(default_factory=list)
    groups: t.Optional[np.ndarray] = None
    excluded_rows: int = 0

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]

    def index(self, name: str) -> int:
        return self.columns.index(name)

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.index(name)]

    def with_column(self, name: str, values: np.ndarray) -> "DesignMatrix":
        """Return a copy with regressor `name` replaced and its interaction columns rebuilt."""
        X = self.X.copy()
        values = np.asarray(values, dtype=float)
        X[:, self.index(name)] = values
        for j, col in enumerate(self.columns):
            parts = col.split(":")
            if len(parts) == 2 and name in parts and not col.startswith("year_industry["):
                other = parts[1] if parts[0] == name else parts[0]
                X[:, j] = values * self.frame[other].to_numpy(dtype=float)
        return replace(self, X=X)


def _subsample_mask(panel: pd.DataFrame, subsample: Subsample) -> pd.Series:
    if callable(subsample):
        return pd.Series(np.asarray(subsample(panel), dtype=bool), index=panel.index)
    mask = pd.Series(True, index=panel.index)
    for column, value in subsample.items():
        if column not in panel:
            raise ConfigError(f"subsample column {column!r} is not in the panel")
        if isinstance(value, (list, tuple, set, frozenset)):
            mask &= panel[column].isin(list(value))
        else:
            mask &= panel[column] == value
    return mask


def fe_keys(frame: pd.DataFrame, effect: str) -> pd.Series:
    if effect == "year":
        return frame["year"].astype(int).astype(str)
    if effect == "industry":
        return frame["industry_code"].astype(str)
    return frame["year"].astype(int).astype(str) + ":" + frame["industry_code"].astype(str)


def _drop_degenerate_cells(frame: pd.DataFrame, spec: ModelSpec) -> pd.DataFrame:
    """
    Drop fixed-effect cells whose outcome perfectly predicts the cell.

    For binary models these are cells where the outcome never varies; for count models, cells
    with all-zero counts. Their dummy coefficients have no finite maximum likelihood estimate.
    """
    if spec.family not in BINARY_FAMILIES + COUNT_FAMILIES or not spec.fixed_effects:
        return frame

    while True:
        keep = pd.Series(True, index=frame.index)
        for effect in spec.fixed_effects:
            keys = fe_keys(frame, effect)
            outcome = frame[spec.dependent]
            if spec.family in BINARY_FAMILIES:
                degenerate = outcome.groupby(keys).transform("nunique") <= 1
            else:
                degenerate = outcome.groupby(keys).transform("max") <= 0
            keep &= ~degenerate
        if keep.all():
            return frame
        frame = frame[keep]
        if frame.empty:
            return frame


def fe_dummies(frame: pd.DataFrame, effect: str) -> t.Tuple[t.List[str], np.ndarray]:
    keys = fe_keys(frame, effect)
    levels = sorted(keys.unique())
    names = [f"{effect}[{level}]" for level in levels[1:]]
    matrix = np.column_stack([(keys == level).to_numpy(dtype=float) for level in levels[1:]])
    if not names:
        matrix = np.empty((len(frame), 0))
    return names, matrix


def collinear_columns(X: np.ndarray, tol: float = COLLINEARITY_TOL) -> t.List[int]:
    """
    Return indices of columns that lie in the span of the columns before them.

    Uses the diagonal of an unpivoted QR decomposition, which holds the norm of each column's
    component orthogonal to the preceding columns.
    """
    if X.shape[1] == 0:
        return []
    (R,) = linalg.qr(X, mode="r", check_finite=False)
    diag = np.abs(np.diag(R))
    norms = np.linalg.norm(X, axis=0)
    scale = np.maximum(norms, np.finfo(float).tiny)
    return [j for j in range(X.shape[1]) if j >= len(diag) or diag[j] <= tol * scale[j]]


def build_design(
    panel: pd.DataFrame,
    spec: ModelSpec,
    *,
    extra_columns: t.Sequence[str] = (),
) -> DesignMatrix:
    """
    Build the design matrix of `spec` on `panel`.

    Args:
        panel: Estimation panel.
        spec: Model specification.

    Keyword Arguments:
        extra_columns: Further columns that must be non-missing for a row to be used.

    Raises:
        ConfigError: If the panel lacks a column the model uses.
        EmptyAfterFilter: If no rows remain after filtering and listwise deletion.
        RankDeficient: If the focus term is collinear with the other columns.
    """
    frame = panel
    if spec.subsample is not None:
        frame = frame[_subsample_mask(frame, spec.subsample)]

    fe_sources = {"year": ["year"], "industry": ["industry_code"]}
    fe_sources["year_industry"] = ["year", "industry_code"]
    required = [spec.dependent, *spec.regressors, *extra_columns]
    for effect in spec.fixed_effects:
        required.extend(fe_sources[effect])
    if spec.cov_type == "cluster":
        required.append(spec.cluster)
    required = list(dict.fromkeys(required))

    missing = [col for col in required if col not in frame]
    if missing:
        raise ConfigError(f"panel has no column(s) {missing}")

    frame = frame.dropna(subset=required)
    if frame.empty:
        raise EmptyAfterFilter(f"no rows left for model {spec.name or spec.dependent!r}")

    before = len(frame)
    frame = _drop_degenerate_cells(frame, spec)
    excluded = before - len(frame)
    if frame.empty:
        raise EmptyAfterFilter("every fixed-effect cell perfectly predicts the outcome")
    if excluded:
        logger.info("Excluded %d row(s) in fixed-effect cells without outcome variation", excluded)

    names = [CONST, *spec.regressors]
    blocks = [np.ones((len(frame), 1)), frame[list(spec.regressors)].to_numpy(dtype=float)]
    for a, b in spec.interactions:
        names.append(f"{a}:{b}")
        product = frame[a].to_numpy(dtype=float) * frame[b].to_numpy(dtype=float)
        blocks.append(product[:, None])
    for effect in spec.fixed_effects:
        fe_names, fe_matrix = fe_dummies(frame, effect)
        names.extend(fe_names)
        blocks.append(fe_matrix)
    X = np.hstack(blocks)

    dropped_idx = collinear_columns(X)
    dropped = [names[j] for j in dropped_idx]
    if spec.focus_term in dropped:
        raise RankDeficient(
            f"{spec.focus_term!r} is collinear with the other columns of "
            f"model {spec.name or spec.dependent!r}"
        )
    if dropped:
        logger.warning("Dropped collinear column(s) %s", ", ".join(dropped))
        keep = [j for j in range(X.shape[1]) if j not in set(dropped_idx)]
        X = X[:, keep]
        names = [names[j] for j in keep]

    groups = frame[spec.cluster].to_numpy() if spec.cov_type == "cluster" else None
    return DesignMatrix(
        spec=spec,
        y=frame[spec.dependent].to_numpy(dtype=float),
        X=X,
        columns=names,
        frame=frame,
        dropped=dropped,
        groups=groups,
        excluded_rows=excluded,
    )
