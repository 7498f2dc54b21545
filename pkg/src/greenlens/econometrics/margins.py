"""
Margins
-------

Average marginal effects of binary regressors.
"""

import typing as t

import numpy as np
from scipy import special, stats

from ..errors import NotBinary
from .results import EstimationResult


class MarginalEffect(t.NamedTuple):
    ame: float
    se: float

    @property
    def z(self) -> float:
        return self.ame / self.se if self.se > 0 else float("nan")

    @property
    def p_value(self) -> float:
        return float(2 * stats.norm.sf(abs(self.z))) if np.isfinite(self.z) else float("nan")


def _exp(eta):
    return np.exp(eta)


def _identity(eta):
    return eta


def _one(eta):
    return np.ones_like(eta)


def _logistic_density(eta):
    p = special.expit(eta)
    return p * (1 - p)


def _normal_density(eta):
    return stats.norm.pdf(eta)


#: Mean function and its derivative per family.
LINKS: t.Dict[str, t.Tuple[t.Callable, t.Callable]] = {
    "logit": (special.expit, _logistic_density),
    "probit": (special.ndtr, _normal_density),
    "poisson": (_exp, _exp),
    "negbin": (_exp, _exp),
    "ols": (_identity, _one),
}


def ame_binary(result: EstimationResult, regressor: str) -> MarginalEffect:
    """
    Return the average marginal effect of switching binary `regressor` from 0 to 1.

    The effect is the sample mean of the difference in predicted means with the regressor set to 1
    and to 0 for every row, interaction columns recomputed. Its standard error follows from the
    delta method with the fitted covariance.

    Raises:
        NotBinary: If `regressor` takes values other than 0 and 1 in the estimation sample.
        KeyError: If `regressor` is not a column of the fitted model.
    """
    design = result.design
    if design is None:
        raise ValueError("result carries no design matrix")
    if regressor not in result.columns:
        raise KeyError(f"{regressor!r} is not a column of model {result.name or result.family!r}")

    values = design.column(regressor)
    if not np.isin(values, (0.0, 1.0)).all():
        raise NotBinary(f"{regressor!r} must be 0 or 1 for a discrete marginal effect")

    mean, density = LINKS[result.family]
    X1 = design.with_column(regressor, np.ones(design.n)).X
    X0 = design.with_column(regressor, np.zeros(design.n)).X
    eta1, eta0 = X1 @ result.params, X0 @ result.params

    ame = float(np.mean(mean(eta1) - mean(eta0)))
    jacobian = np.mean(density(eta1)[:, None] * X1 - density(eta0)[:, None] * X0, axis=0)
    variance = float(jacobian @ result.cov @ jacobian)
    return MarginalEffect(ame, float(np.sqrt(max(variance, 0.0))))
