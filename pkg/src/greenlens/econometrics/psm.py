"""
PSM
---

Propensity score matching: 1:1 greedy nearest-neighbor matching without replacement, covariate
balance diagnostics and outcome refits on the matched sample.
"""

from dataclasses import dataclass, field
import logging
import typing as t

import numpy as np
import pandas as pd
from scipy import special

from ..errors import InsufficientControls, NotBinary
from .design import CONTROLS, ModelSpec, build_design
from .models import estimate, fit
from .results import EstimationResult


logger = logging.getLogger(__name__)


@dataclass
class PSMResult:
    propensity: EstimationResult
    scores: pd.Series
    matches: pd.DataFrame
    balance: pd.DataFrame
    matched: pd.DataFrame
    post: t.Dict[str, EstimationResult] = field(default_factory=dict)

    @property
    def n_treated(self) -> int:
        return int(self.matched["_treated"].sum()) if len(self.matched) else 0

    def to_dict(self) -> t.Dict[str, t.Any]:
        return {
            "propensity": self.propensity.to_dict(),
            "n_pairs": len(self.matches),
            "balance": self.balance.to_dict(orient="records"),
            "post": {family: result.to_dict() for family, result in self.post.items()},
        }


def match_nearest(
    treated_scores: t.Sequence[float],
    control_scores: t.Sequence[float],
    caliper: t.Optional[float] = None,
) -> t.List[t.Tuple[int, int]]:
    """
    Match every treated unit to its nearest unused control by propensity score.

    Treated units are processed in descending score order. Ties in distance go to the control
    with the lowest position. Treated units with no control within `caliper` stay unmatched.

    Returns:
        ``(treated_position, control_position)`` pairs in processing order.

    >>> match_nearest([0.8, 0.6], [0.79, 0.61, 0.2])
    [(0, 0), (1, 1)]
    """
    treated = np.asarray(treated_scores, dtype=float)
    controls = np.asarray(control_scores, dtype=float)
    if len(controls) < len(treated):
        raise InsufficientControls(
            f"{len(controls)} control(s) cannot be matched 1:1 to {len(treated)} treated unit(s)"
        )

    used = np.zeros(len(controls), dtype=bool)
    pairs = []
    for i in np.argsort(-treated, kind="stable"):
        distance = np.abs(controls - treated[i])
        distance[used] = np.inf
        j = int(np.argmin(distance))
        if not np.isfinite(distance[j]) or (caliper is not None and distance[j] > caliper):
            continue
        used[j] = True
        pairs.append((int(i), j))
    return pairs


def standardized_bias(
    treated: np.ndarray, control: np.ndarray, var_treated: float, var_control: float
) -> float:
    """
    Return ``100 * (mean_T - mean_C) / sqrt((var_T + var_C) / 2)``, or ``0`` when both the
    difference and the pooled variance vanish.

    >>> standardized_bias(np.array([1.0, 3.0]), np.array([1.0, 1.0]), 2.0, 0.0)
    100.0
    """
    diff = float(np.mean(treated) - np.mean(control))
    pooled = float(np.sqrt((var_treated + var_control) / 2))
    if pooled == 0:
        return 0.0 if diff == 0 else float(np.sign(diff) * np.inf)
    return 100 * diff / pooled


def balance_table(
    frame: pd.DataFrame,
    treatment: str,
    covariates: t.Sequence[str],
    matched: pd.DataFrame,
) -> pd.DataFrame:
    """
    Return per-covariate means and standardized biases before and after matching.

    Both biases are scaled by the unmatched-sample variances, so the reduction reflects changes
    in the mean difference only.
    """
    rows = []
    before_t = frame[frame[treatment] == 1]
    before_c = frame[frame[treatment] == 0]
    after_t = matched[matched["_treated"] == 1]
    after_c = matched[matched["_treated"] == 0]
    for cov in covariates:
        var_t = float(before_t[cov].var(ddof=1)) if len(before_t) > 1 else 0.0
        var_c = float(before_c[cov].var(ddof=1)) if len(before_c) > 1 else 0.0
        bias_before = standardized_bias(before_t[cov], before_c[cov], var_t, var_c)
        bias_after = standardized_bias(after_t[cov], after_c[cov], var_t, var_c)
        if bias_before == 0:
            reduction = 0.0 if bias_after == 0 else float("-inf")
        else:
            reduction = 100 * (1 - abs(bias_after) / abs(bias_before))
        rows.append(
            {
                "covariate": cov,
                "mean_treated_before": float(before_t[cov].mean()),
                "mean_control_before": float(before_c[cov].mean()),
                "mean_treated_after": float(after_t[cov].mean()),
                "mean_control_after": float(after_c[cov].mean()),
                "bias_before": bias_before,
                "bias_after": bias_after,
                "reduction": reduction,
            }
        )
    return pd.DataFrame(rows)


def psm(
    panel: pd.DataFrame,
    treatment: str = "greenwashing",
    covariates: t.Sequence[str] = CONTROLS,
    *,
    dependent: str = "vio",
    caliper: t.Optional[float] = None,
    post_models: t.Sequence[str] = ("logit", "probit"),
    fixed_effects: t.Sequence[str] = ("year", "industry"),
) -> PSMResult:
    """
    Match treated to control firm-years on a logit propensity score and refit the outcome models
    on the matched sample.

    Args:
        panel: Estimation panel.
        treatment: Binary treatment column.
        covariates: Propensity score covariates, also used as controls in the refits.

    Keyword Arguments:
        dependent: Outcome of the refits.
        caliper: Largest allowed score distance of a pair. No caliper by default.
        post_models: Families refit on the matched sample.
        fixed_effects: Fixed effects of the refits.

    Raises:
        NotBinary: If the treatment is not 0/1.
        InsufficientControls: If there are fewer controls than treated units.
    """
    spec = ModelSpec(
        dependent=treatment,
        regressors=tuple(covariates),
        family="logit",
        name="propensity",
    )
    design = build_design(panel, spec, extra_columns=[dependent])
    if not np.isin(design.y, (0.0, 1.0)).all():
        raise NotBinary(f"treatment {treatment!r} must be 0 or 1")
    propensity = fit(design)

    frame = design.frame.copy()
    scores = pd.Series(
        special.expit(design.X @ propensity.params), index=frame.index, name="pscore"
    )
    frame["pscore"] = scores

    treated = frame[frame[treatment] == 1]
    controls = frame[frame[treatment] == 0]
    pairs = match_nearest(treated["pscore"], controls["pscore"], caliper)
    unmatched = len(treated) - len(pairs)
    if unmatched:
        logger.warning("%d treated unit(s) have no control within the caliper", unmatched)

    t_pos = [i for i, _ in pairs]
    c_pos = [j for _, j in pairs]
    matches = pd.DataFrame(
        {
            "match_id": range(len(pairs)),
            "treated_index": treated.index[t_pos],
            "control_index": controls.index[c_pos],
            "treated_score": treated["pscore"].to_numpy()[t_pos],
            "control_score": controls["pscore"].to_numpy()[c_pos],
        }
    )
    matches["distance"] = (matches["treated_score"] - matches["control_score"]).abs()

    matched_t = treated.iloc[t_pos].assign(_treated=1, match_id=matches["match_id"].to_numpy())
    matched_c = controls.iloc[c_pos].assign(_treated=0, match_id=matches["match_id"].to_numpy())
    matched = pd.concat([matched_t, matched_c]).sort_values(["match_id", "_treated"])

    balance = balance_table(frame, treatment, covariates, matched)
    logger.info(
        "Matched %d pair(s); largest absolute bias %.2f%% before, %.2f%% after",
        len(pairs),
        balance["bias_before"].abs().max(),
        balance["bias_after"].abs().max(),
    )

    post = {}
    for family in post_models:
        post_spec = ModelSpec(
            dependent=dependent,
            regressors=(treatment, *covariates),
            family=family,
            fixed_effects=tuple(fixed_effects),
            name=f"PSM {family}",
        )
        post[family] = estimate(matched.drop(columns=["_treated"]), post_spec)

    return PSMResult(
        propensity=propensity,
        scores=scores,
        matches=matches,
        balance=balance,
        matched=matched,
        post=post,
    )
