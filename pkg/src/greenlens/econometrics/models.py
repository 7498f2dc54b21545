"""
Models
------

Fitting of logit, probit, OLS, Poisson and negative binomial models on a design matrix.
"""

from dataclasses import replace
import logging
import typing as t

import numpy as np
import pandas as pd
from scipy import linalg, special

from ..errors import ConvergenceError, NonCountDependent, NotBinary, RankDeficient, SeparationError
from .design import BINARY_FAMILIES, COUNT_FAMILIES, DesignMatrix, ModelSpec, build_design
from .likelihoods import MODELS, LikelihoodModel, NegativeBinomial
from .optimize import NewtonResult
from .results import EstimationResult


logger = logging.getLogger(__name__)

#: Scaled coefficient magnitude beyond which a binary fit is treated as separated.
SEPARATION_BOUND = 20.0


def check_dependent(y: np.ndarray, family: str, name: str = "dependent") -> None:
    """
    Raise when `y` does not suit `family`.

    Raises:
        NotBinary: If a binary family gets values other than 0 and 1.
        NonCountDependent: If a count family gets negative or fractional values.
    """
    if family in BINARY_FAMILIES and not np.isin(y, (0.0, 1.0)).all():
        raise NotBinary(f"{family} needs a 0/1 dependent variable, {name!r} is not")
    if family in COUNT_FAMILIES and ((y < 0).any() or (y != np.floor(y)).any()):
        raise NonCountDependent(f"{family} needs a count dependent variable, {name!r} is not")


def inverse_pd(matrix: np.ndarray, what: str) -> np.ndarray:
    try:
        factor = linalg.cho_factor(matrix, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"{what} is not positive definite", diagnosis=str(exc)) from exc
    return linalg.cho_solve(factor, np.eye(len(matrix)))


def sandwich(
    bread: np.ndarray,
    scores: np.ndarray,
    *,
    groups: t.Optional[np.ndarray] = None,
    scale: float = 1.0,
) -> np.ndarray:
    """
    Return ``scale * bread @ meat @ bread`` where the meat sums outer products of per-observation
    scores, or of per-cluster score totals when `groups` is given.
    """
    if groups is not None:
        scores = pd.DataFrame(scores).groupby(np.asarray(groups), sort=True).sum().to_numpy()
    meat = scores.T @ scores
    return scale * bread @ meat @ bread


def _n_groups(groups: np.ndarray) -> int:
    return len(pd.unique(np.asarray(groups)))


def robust_cov(
    design: DesignMatrix, bread: np.ndarray, scores: np.ndarray, *, ols: bool = False
) -> np.ndarray:
    n, k = design.n, design.k
    if design.spec.cov_type == "robust":
        scale = n / (n - k) if ols else n / (n - 1)
        return sandwich(bread, scores, scale=scale)
    n_groups = _n_groups(design.groups)
    if n_groups < 2:
        raise ConvergenceError("clustered standard errors need at least two clusters")
    scale = n_groups / (n_groups - 1)
    if ols:
        scale *= (n - 1) / (n - k)
    return sandwich(bread, scores, groups=design.groups, scale=scale)


def fit_ols(design: DesignMatrix) -> EstimationResult:
    """Fit least squares through a QR decomposition; statistics are t with ``n - k`` df."""
    X, y = design.X, design.y
    n, k = X.shape
    if n <= k:
        raise RankDeficient(f"{n} observation(s) cannot identify {k} parameter(s)")

    Q, R = linalg.qr(X, mode="economic")
    params = linalg.solve_triangular(R, Q.T @ y)
    R_inv = linalg.solve_triangular(R, np.eye(k))
    xtx_inv = R_inv @ R_inv.T
    resid = y - X @ params
    ssr = float(resid @ resid)
    df_resid = n - k

    if design.spec.cov_type == "nonrobust":
        cov = ssr / df_resid * xtx_inv
    else:
        cov = robust_cov(design, xtx_inv, resid[:, None] * X, ols=True)

    centered = y - y.mean()
    sst = float(centered @ centered)
    return _result(
        design,
        params,
        cov,
        r2=1 - ssr / sst if sst > 0 else None,
        stat_name="t",
        df_resid=df_resid,
    )


def _check_separation(model: LikelihoodModel, design: DesignMatrix, opt: NewtonResult) -> None:
    p = model.predict(opt.params)
    if np.all(np.abs(p - design.y) < 1e-6):
        raise SeparationError(
            "the regressors predict the outcome perfectly",
            iterations=opt.iterations,
            diagnosis="complete separation",
        )
    sd = design.X.std(axis=0)
    scaled = np.abs(opt.params[: design.k]) * sd
    flagged = [design.columns[j] for j in np.flatnonzero((sd > 0) & (scaled > SEPARATION_BOUND))]
    if flagged:
        raise SeparationError(
            f"coefficient(s) {flagged} diverge; the outcome is quasi-separated",
            iterations=opt.iterations,
            diagnosis="quasi-separation",
        )


def _null_loglike(design: DesignMatrix) -> float:
    y = design.y
    family = design.spec.family
    if family in BINARY_FAMILIES:
        ybar = y.mean()
        if ybar in (0.0, 1.0):
            return 0.0
        return float(len(y) * (ybar * np.log(ybar) + (1 - ybar) * np.log(1 - ybar)))
    if family == "poisson":
        ybar = y.mean()
        return float(np.sum(special.xlogy(y, ybar) - ybar - special.gammaln(y + 1)))
    null = NegativeBinomial(y, np.ones((len(y), 1)))
    return null.fit().loglike


def fit_mle(design: DesignMatrix, *, maxiter: int = 100) -> EstimationResult:
    """
    Fit a maximum likelihood family by Newton-Raphson.

    Raises:
        SeparationError: If a binary outcome is perfectly or quasi-perfectly predicted.
        ConvergenceError: If the optimizer stops without converging or the information matrix is
            not positive definite.
    """
    family = design.spec.family
    model = MODELS[family](design.y, design.X)
    opt = model.fit(maxiter=maxiter)

    if family in BINARY_FAMILIES:
        _check_separation(model, design, opt)
    if not opt.converged:
        raise ConvergenceError(
            f"{family} fit did not converge: {opt.message}",
            iterations=opt.iterations,
            diagnosis=opt.message,
        )

    k = design.k
    extras: t.Dict[str, float] = {}
    extras_se: t.Dict[str, float] = {}
    boundary = family == "negbin" and opt.boundary
    if boundary:
        logger.warning("Negative binomial dispersion is at its lower bound; Poisson limit")
        bread = inverse_pd(-opt.hessian[:k, :k], "information matrix")
        scores = model.score_obs(opt.params)[:, :k]
    else:
        bread = inverse_pd(-opt.hessian, "information matrix")
        scores = model.score_obs(opt.params)

    if design.spec.cov_type == "nonrobust":
        cov_full = bread
    else:
        cov_full = robust_cov(design, bread, scores)

    if family == "negbin":
        extras["lnalpha"] = float(opt.params[-1])
        extras_se["lnalpha"] = float("nan") if boundary else float(np.sqrt(cov_full[-1, -1]))

    loglike_null = _null_loglike(design)
    pseudo_r2 = 1 - opt.loglike / loglike_null if loglike_null < 0 else None
    return _result(
        design,
        opt.params[:k],
        cov_full[:k, :k],
        converged=True,
        iterations=opt.iterations,
        loglike=opt.loglike,
        loglike_null=loglike_null,
        pseudo_r2=pseudo_r2,
        extras=extras,
        extras_se=extras_se,
        boundary=boundary,
    )


def _result(design: DesignMatrix, params: np.ndarray, cov: np.ndarray, **kwargs):
    spec = design.spec
    return EstimationResult(
        name=spec.name,
        family=spec.family,
        dependent=spec.dependent,
        columns=list(design.columns),
        params=np.asarray(params, dtype=float),
        cov=np.asarray(cov, dtype=float),
        n=design.n,
        cov_type=spec.cov_type,
        dropped=list(design.dropped),
        excluded_rows=design.excluded_rows,
        design=design,
        **kwargs,
    )


def fit(design: DesignMatrix, *, maxiter: int = 100) -> EstimationResult:
    """Fit the family named by the design's specification."""
    check_dependent(design.y, design.spec.family, design.spec.dependent)
    if design.spec.family == "ols":
        return fit_ols(design)
    return fit_mle(design, maxiter=maxiter)


def estimate(panel: pd.DataFrame, spec: ModelSpec) -> EstimationResult:
    """Build the design of `spec` on `panel` and fit it."""
    design = build_design(panel, spec)
    result = fit(design)
    logger.info(
        "Fitted %s %s on %d rows: %s=%.4f",
        spec.name or spec.family,
        spec.dependent,
        result.n,
        spec.focus_term,
        result.coefficients[spec.focus_term],
    )
    return result


def _as_family(design: DesignMatrix, family: str) -> DesignMatrix:
    if design.spec.family == family:
        return design
    return replace(design, spec=design.spec.replace(family=family))


def fit_logit(design: DesignMatrix) -> EstimationResult:
    return fit(_as_family(design, "logit"))


def fit_probit(design: DesignMatrix) -> EstimationResult:
    return fit(_as_family(design, "probit"))


def fit_poisson(design: DesignMatrix) -> EstimationResult:
    return fit(_as_family(design, "poisson"))


def fit_negbin(design: DesignMatrix) -> EstimationResult:
    return fit(_as_family(design, "negbin"))
