"""
Analysis
--------

Model suites built on the estimators: the stepwise benchmark, moderation by investor presence,
subsample heterogeneity and multicollinearity diagnostics.
"""

from dataclasses import dataclass, field
import logging
import typing as t

import numpy as np
import pandas as pd
from scipy import linalg

from ..errors import ConfigError, EstimationError
from .design import CONTROLS, ModelSpec, build_design, fe_dummies
from .margins import MarginalEffect, ame_binary
from .models import estimate, fit
from .results import EstimationResult, render_table


logger = logging.getLogger(__name__)

TREATMENT = "greenwashing"
MODERATORS = ("esg_investor", "base")

#: Rows beyond the parameter count a subsample needs to be fitted.
MIN_EXTRA_ROWS = 10


def default_suite(
    controls: t.Sequence[str] = CONTROLS,
    *,
    treatment: str = TREATMENT,
    dependent: str = "vio",
    count_dependent: str = "vio_num",
) -> t.List[ModelSpec]:
    """
    Return the benchmark specifications.

    Six logit columns cross the regressor sets (treatment alone, treatment with controls) with
    the fixed effects (none, year and industry, year by industry). Six count-model columns fit OLS,
    Poisson and negative binomial regressions of `count_dependent`, each without and with year and
    industry fixed effects.
    """
    fixed_effects = [(), ("year", "industry"), ("year_industry",)]
    regressor_sets = [(treatment,), (treatment, *controls)]
    specs = []
    for regressors in regressor_sets:
        for fe in fixed_effects:
            specs.append(
                ModelSpec(
                    dependent=dependent,
                    regressors=regressors,
                    family="logit",
                    fixed_effects=fe,
                    name=f"logit {len(specs) + 1}",
                )
            )
    for family in ("ols", "poisson", "negbin"):
        for fe in fixed_effects[:2]:
            specs.append(
                ModelSpec(
                    dependent=count_dependent,
                    regressors=(treatment, *controls),
                    family=family,
                    fixed_effects=fe,
                    name=f"{family} {'FE' if fe else 'pooled'}",
                )
            )
    return specs


@dataclass
class SuiteResult:
    results: t.List[EstimationResult]
    ames: t.Dict[str, MarginalEffect] = field(default_factory=dict)

    def table(self, terms: t.Optional[t.Sequence[str]] = None) -> str:
        text = render_table(self.results, terms)
        if not self.ames:
            return text
        lines = ["", "Average marginal effects"]
        for name, effect in self.ames.items():
            lines.append(f"  {name}: {effect.ame:.4f} ({effect.se:.4f})")
        return text + "\n".join(lines) + "\n"

    def to_dict(self) -> t.Dict[str, t.Any]:
        return {
            "results": [result.to_dict() for result in self.results],
            "ames": {name: effect._asdict() for name, effect in self.ames.items()},
        }


def run_suite(panel: pd.DataFrame, specs: t.Sequence[ModelSpec]) -> SuiteResult:
    """Fit every spec, adding the focus term's average marginal effect for binary models."""
    suite = SuiteResult(results=[])
    for spec in specs:
        result = estimate(panel, spec)
        suite.results.append(result)
        if spec.family in ("logit", "probit") and spec.focus_term in spec.regressors:
            try:
                suite.ames[result.name] = ame_binary(result, spec.focus_term)
            except ValueError as exc:
                logger.info("No marginal effect for %s: %s", result.name, exc)
    return suite


def moderation(
    panel: pd.DataFrame,
    moderator: str,
    base_spec: t.Optional[ModelSpec] = None,
    *,
    families: t.Sequence[str] = ("logit", "probit"),
) -> t.Dict[str, EstimationResult]:
    """
    Fit the treatment, the moderator and their interaction in logit and probit models.

    Rows missing the moderator drop out of these fits only. An interaction without variation is
    dropped as collinear and listed in ``dropped``.

    Args:
        panel: Estimation panel.
        moderator: Moderating variable, e.g. ``esg_investor`` or ``base``.
        base_spec: Specification whose focus is the treatment. Defaults to the treatment with the
            controls and year and industry fixed effects.
    """
    if moderator not in panel:
        raise ConfigError(f"moderator {moderator!r} is not in the panel")
    if base_spec is None:
        base_spec = ModelSpec(
            dependent="vio",
            regressors=(TREATMENT, *CONTROLS),
            fixed_effects=("year", "industry"),
        )
    treatment = base_spec.focus_term
    regressors = [treatment, moderator] + [
        col for col in base_spec.regressors if col not in (treatment, moderator)
    ]
    spec = base_spec.replace(
        regressors=tuple(regressors),
        interactions=((treatment, moderator),),
        focus=treatment,
    )
    return {
        family: estimate(panel, spec.replace(family=family, name=f"{family} x {moderator}"))
        for family in families
    }


@dataclass
class HeterogeneityReport:
    split: str
    results: t.Dict[t.Any, EstimationResult]
    skipped: t.Dict[t.Any, str]

    def table(self) -> str:
        return render_table(list(self.results.values()))

    def to_dict(self) -> t.Dict[str, t.Any]:
        return {
            "split": self.split,
            "results": {str(level): result.to_dict() for level, result in self.results.items()},
            "skipped": {str(level): reason for level, reason in self.skipped.items()},
        }


def heterogeneity(panel: pd.DataFrame, spec: ModelSpec, split: str) -> HeterogeneityReport:
    """
    Fit `spec` separately on each level of the `split` column.

    Subsamples with fewer than ``k + 10`` rows, or whose fit fails, are reported as skipped.

    Raises:
        ConfigError: If `split` is missing or undefined for some rows.
    """
    if split not in panel:
        raise ConfigError(f"split {split!r} is not in the panel")
    if panel[split].isna().any():
        raise ConfigError(f"split {split!r} must be defined for every row")

    results: t.Dict[t.Any, EstimationResult] = {}
    skipped: t.Dict[t.Any, str] = {}
    for level in sorted(panel[split].unique()):
        sub_spec = spec.replace(subsample={split: level}, name=f"{split}={level}")
        try:
            design = build_design(panel, sub_spec)
            if design.n < design.k + MIN_EXTRA_ROWS:
                raise EstimationError(
                    f"{design.n} row(s) are too few for {design.k} parameter(s)"
                )
            results[level] = fit(design)
        except EstimationError as exc:
            logger.warning("Skipped subsample %s=%s: %s", split, level, exc)
            skipped[level] = str(exc)
    return HeterogeneityReport(split=split, results=results, skipped=skipped)


def _r_squared(y: np.ndarray, X: np.ndarray) -> float:
    params, *_ = linalg.lstsq(X, y, check_finite=False)
    resid = y - X @ params
    centered = y - y.mean()
    sst = float(centered @ centered)
    return 1 - float(resid @ resid) / sst if sst > 0 else 1.0


def vif(
    panel: pd.DataFrame,
    regressors: t.Sequence[str] = (TREATMENT, *CONTROLS),
    fixed_effects: t.Sequence[str] = ("year", "industry"),
) -> t.Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Return variance inflation factors of `regressors` and their correlation matrix.

    ``vif`` regresses each regressor on the others; ``vif_fe`` adds the fixed-effect dummies.
    """
    sources = {"year": ["year"], "industry": ["industry_code"]}
    sources["year_industry"] = ["year", "industry_code"]
    required = list(regressors) + [col for fe in fixed_effects for col in sources[fe]]
    frame = panel.dropna(subset=list(dict.fromkeys(required)))
    data = frame[list(regressors)].to_numpy(dtype=float)
    const = np.ones((len(frame), 1))
    dummies = [fe_dummies(frame, effect)[1] for effect in fixed_effects]

    rows = []
    for j, name in enumerate(regressors):
        others = np.delete(data, j, axis=1)
        base = np.hstack([const, others])
        with_fe = np.hstack([base, *dummies])
        values = {}
        for key, X in (("vif", base), ("vif_fe", with_fe)):
            r2 = _r_squared(data[:, j], X)
            values[key] = 1 / (1 - r2) if r2 < 1 else float("inf")
        rows.append({"variable": name, **values})

    table = pd.DataFrame(rows)
    corr = frame[list(regressors)].astype(float).corr()
    return table, corr
