"""
IV
--

Instrumental-variable estimation of a linear outcome equation with one endogenous regressor,
instrumented by its own once-lagged value.

Two estimators are reported. Two-stage least squares regresses the endogenous regressor on the
instrument and the exogenous regressors, then the outcome on the fitted values. Full-information
maximum likelihood fits the triangular system::

    d = Z @ pi + u1
    y = X @ beta + u2

jointly with bivariate normal errors ``(u1, u2)`` parameterized by ``ln sigma1``, ``ln sigma2`` and
``atanh rho``.
"""

from dataclasses import dataclass
import logging
import math
import typing as t
import warnings

import numpy as np
import pandas as pd
from scipy import linalg

from ..errors import ConfigError, ConvergenceError, NoLag, WeakInstrumentWarning
from .design import DesignMatrix, ModelSpec, add_lags, build_design, collinear_columns
from .models import inverse_pd, robust_cov
from .optimize import newton, numeric_hessian
from .results import EstimationResult


logger = logging.getLogger(__name__)

#: Rule-of-thumb first-stage F statistic below which the instrument is weak.
WEAK_INSTRUMENT_F = 10.0

LAG_SUFFIX = "_lag"


@dataclass
class IVResult:
    """
    First and second stage of the maximum likelihood system, plus the two-stage least squares
    estimate of the outcome equation.
    """

    first_stage: EstimationResult
    second_stage: EstimationResult
    tsls: EstimationResult
    first_stage_f: float
    instrument: str

    @property
    def rho(self) -> float:
        return math.tanh(self.second_stage.extras["atanhrho"])

    def to_dict(self) -> t.Dict[str, t.Any]:
        return {
            "instrument": self.instrument,
            "first_stage_F": self.first_stage_f,
            "rho": self.rho,
            "first_stage": self.first_stage.to_dict(),
            "second_stage": self.second_stage.to_dict(),
            "tsls": self.tsls.to_dict(),
        }


def _ols(X: np.ndarray, y: np.ndarray) -> t.Tuple[np.ndarray, np.ndarray]:
    params, *_ = linalg.lstsq(X, y, check_finite=False)
    return params, y - X @ params


def first_stage_f(Z: np.ndarray, d: np.ndarray, instrument_index: int) -> float:
    """Return the F statistic of excluding the instrument column from the first stage."""
    n, k = Z.shape
    _, resid_u = _ols(Z, d)
    _, resid_r = _ols(np.delete(Z, instrument_index, axis=1), d)
    ssr_u = float(resid_u @ resid_u)
    ssr_r = float(resid_r @ resid_r)
    if ssr_u <= 0:
        return float("inf")
    return (ssr_r - ssr_u) / (ssr_u / (n - k))


class TriangularSystem:
    """Log-likelihood of the two-equation triangular system with bivariate normal errors."""

    def __init__(self, d: np.ndarray, Z: np.ndarray, y: np.ndarray, X: np.ndarray):
        self.d, self.Z, self.y, self.X = d, Z, y, X
        self.kz, self.kx = Z.shape[1], X.shape[1]

    @property
    def k_params(self) -> int:
        return self.kz + self.kx + 3

    def unpack(self, params: np.ndarray):
        pi = params[: self.kz]
        beta = params[self.kz : self.kz + self.kx]
        a, b, c = params[-3:]
        return pi, beta, a, b, c

    def _errors(self, params):
        pi, beta, a, b, c = self.unpack(params)
        e1 = (self.d - self.Z @ pi) / math.exp(a)
        e2 = (self.y - self.X @ beta) / math.exp(b)
        rho = math.tanh(c)
        return e1, e2, rho, 1 - rho**2, a, b

    def loglikeobs(self, params):
        e1, e2, rho, s, a, b = self._errors(params)
        Q = (e1**2 - 2 * rho * e1 * e2 + e2**2) / s
        return -math.log(2 * math.pi) - a - b - 0.5 * math.log(s) - 0.5 * Q

    def loglike(self, params):
        return float(np.sum(self.loglikeobs(params)))

    def score_obs(self, params):
        e1, e2, rho, s, a, b = self._errors(params)
        Q = (e1**2 - 2 * rho * e1 * e2 + e2**2) / s
        g_pi = ((e1 - rho * e2) / (s * math.exp(a)))[:, None] * self.Z
        g_beta = ((e2 - rho * e1) / (s * math.exp(b)))[:, None] * self.X
        g_a = -1 + e1 * (e1 - rho * e2) / s
        g_b = -1 + e2 * (e2 - rho * e1) / s
        g_c = rho + e1 * e2 - rho * Q
        return np.column_stack([g_pi, g_beta, g_a, g_b, g_c])

    def score(self, params):
        return self.score_obs(params).sum(axis=0)


def _restrict(func: t.Callable, full: np.ndarray, free: np.ndarray) -> t.Callable:
    def restricted(x):
        params = full.copy()
        params[free] = x
        value = func(params)
        return value[..., free] if isinstance(value, np.ndarray) else value

    return restricted


def _iv_columns(panel: pd.DataFrame, spec: ModelSpec, dynamic: bool):
    focus = spec.focus_term
    if spec.interactions:
        raise ConfigError("IV estimation does not support interaction terms")
    if focus not in spec.regressors:
        raise ConfigError(f"endogenous regressor {focus!r} must be a main effect")

    instrument = f"{focus}{LAG_SUFFIX}"
    lagged = [focus] + ([spec.dependent] if dynamic else [])
    needed = [col for col in lagged if f"{col}{LAG_SUFFIX}" not in panel]
    if needed:
        if "firm_id" not in panel or "year" not in panel:
            raise NoLag("lags need firm_id and year columns")
        panel = add_lags(panel, needed)
    if not panel[instrument].notna().any():
        raise NoLag(f"no firm has consecutive years to form {instrument!r}")

    exogenous = [col for col in spec.regressors if col != focus]
    if dynamic:
        exogenous.append(f"{spec.dependent}{LAG_SUFFIX}")
    return panel, focus, instrument, exogenous


def _prepare(panel: pd.DataFrame, spec: ModelSpec, dynamic: bool):
    panel, focus, instrument, exogenous = _iv_columns(panel, spec, dynamic)
    outcome_spec = spec.replace(
        family="ols", regressors=(focus, *exogenous), interactions=(), focus=focus
    )
    design = build_design(panel, outcome_spec, extra_columns=[instrument])
    z = design.frame[instrument].to_numpy(dtype=float)
    Z = design.with_column(focus, z).X
    focus_index = design.index(focus)
    if focus_index in collinear_columns(Z):
        raise NoLag(f"{instrument!r} is collinear with the exogenous regressors")

    f_stat = first_stage_f(Z, design.column(focus), focus_index)
    if f_stat < WEAK_INSTRUMENT_F:
        message = f"first-stage F statistic {f_stat:.2f} is below {WEAK_INSTRUMENT_F:g}"
        logger.warning("Weak instrument %s: %s", instrument, message)
        warnings.warn(message, WeakInstrumentWarning, stacklevel=3)
    return design, Z, instrument, f_stat


def fit_tsls(
    panel: pd.DataFrame, spec: ModelSpec, *, dynamic: bool = False
) -> t.Tuple[EstimationResult, float]:
    """
    Return the two-stage least squares fit of `spec` with its focus regressor instrumented by its
    lag, and the first-stage F statistic.
    """
    design, Z, _, f_stat = _prepare(panel, spec, dynamic)
    tsls, _, _ = _tsls(design, Z, design.column(design.spec.focus_term))
    tsls.extras["first_stage_F"] = f_stat
    return tsls, f_stat


def fit_iv(
    panel: pd.DataFrame,
    spec: ModelSpec,
    *,
    dynamic: bool = False,
    fix_rho: t.Optional[float] = None,
    maxiter: int = 100,
) -> IVResult:
    """
    Estimate the outcome equation of `spec` instrumenting its focus regressor by its lag.

    Args:
        panel: Estimation panel. Missing ``<focus>_lag`` columns are built from ``firm_id`` and
            ``year``; rows without a prior year drop out.
        spec: Outcome equation. Its focus term is the endogenous regressor.

    Keyword Arguments:
        dynamic: Add the lagged dependent variable as an exogenous regressor.
        fix_rho: Hold the error correlation at this value instead of estimating it.
        maxiter: Iteration limit of the likelihood maximization.

    Raises:
        NoLag: If lagged values cannot be formed.
        ConvergenceError: If the likelihood maximization fails.
    """
    design, Z, instrument, f_stat = _prepare(panel, spec, dynamic)
    focus = design.spec.focus_term
    X, y = design.X, design.y
    d = design.column(focus)
    n = design.n
    z_columns = [instrument if col == focus else col for col in design.columns]

    tsls, pi_ols, u1 = _tsls(design, Z, d)
    tsls.extras["first_stage_F"] = f_stat
    if float(u1 @ u1) <= 1e-20 * max(1.0, float(d @ d)):
        raise ConvergenceError(
            f"{instrument!r} reproduces {focus!r} exactly; the system likelihood is unbounded",
            diagnosis="degenerate first stage",
        )

    system = TriangularSystem(d, Z, y, X)
    u2 = y - X @ tsls.params
    corr = float(np.corrcoef(u1, u2)[0, 1]) if np.std(u1) > 0 and np.std(u2) > 0 else 0.0
    start = np.concatenate(
        [
            pi_ols,
            tsls.params,
            [
                0.5 * math.log(max(float(np.mean(u1**2)), 1e-12)),
                0.5 * math.log(max(float(np.mean(u2**2)), 1e-12)),
                math.atanh(np.clip(corr, -0.99, 0.99)),
            ],
        ]
    )

    free = np.ones(system.k_params, dtype=bool)
    if fix_rho is not None:
        if not -1 < fix_rho < 1:
            raise ConfigError(f"fix_rho must lie in (-1, 1), got {fix_rho}")
        start[-1] = math.atanh(fix_rho)
        free[-1] = False

    loglike = _restrict(system.loglike, start, free)
    score = _restrict(system.score, start, free)
    opt = newton(
        loglike,
        score,
        lambda x: numeric_hessian(score, x),
        start[free],
        maxiter=maxiter,
    )
    if not opt.converged:
        raise ConvergenceError(
            f"IV likelihood did not converge: {opt.message}",
            iterations=opt.iterations,
            diagnosis=opt.message,
        )

    params = start.copy()
    params[free] = opt.params
    bread = inverse_pd(-opt.hessian, "IV information matrix")
    if spec.cov_type == "nonrobust":
        cov_free = bread
    else:
        cov_free = robust_cov(design, bread, system.score_obs(params)[:, free])
    cov = np.full((system.k_params, system.k_params), np.nan)
    cov[np.ix_(free, free)] = cov_free

    kz, kx = system.kz, system.kx
    se = np.sqrt(np.diag(cov))
    names = ("lnsig1", "lnsig2", "atanhrho")
    extras = dict(zip(names, map(float, params[-3:])))
    extras_se = dict(zip(names, map(float, se[-3:])))
    extras["first_stage_F"] = f_stat

    common: t.Dict[str, t.Any] = dict(
        n=n, iterations=opt.iterations, loglike=opt.loglike, cov_type=spec.cov_type
    )
    first = EstimationResult(
        name=f"{spec.name or spec.dependent} first stage".strip(),
        family="fiml",
        dependent=focus,
        columns=z_columns,
        params=params[:kz],
        cov=cov[:kz, :kz],
        dropped=list(design.dropped),
        **common,
    )
    second = EstimationResult(
        name=spec.name or spec.dependent,
        family="fiml",
        dependent=spec.dependent,
        columns=list(design.columns),
        params=params[kz : kz + kx],
        cov=cov[kz : kz + kx, kz : kz + kx],
        extras=extras,
        extras_se=extras_se,
        dropped=list(design.dropped),
        design=design,
        **common,
    )
    logger.info(
        "IV %s: %s=%.4f (2SLS %.4f), atanh(rho)=%.4f, first-stage F=%.2f",
        spec.dependent,
        focus,
        second.coefficients[focus],
        tsls.coefficients[focus],
        extras["atanhrho"],
        f_stat,
    )
    return IVResult(first, second, tsls, f_stat, instrument)


def _tsls(design: DesignMatrix, Z: np.ndarray, d: np.ndarray):
    X, y = design.X, design.y
    n, k = X.shape
    pi, u1 = _ols(Z, d)
    X_hat = design.with_column(design.spec.focus_term, Z @ pi).X
    beta, _ = _ols(X_hat, y)
    resid = y - X @ beta
    df_resid = n - k
    bread = inverse_pd(X_hat.T @ X_hat, "projected cross-product matrix")
    if design.spec.cov_type == "nonrobust":
        cov = float(resid @ resid) / df_resid * bread
    else:
        cov = robust_cov(design, bread, resid[:, None] * X_hat, ols=True)

    result = EstimationResult(
        name=f"{design.spec.name or design.spec.dependent} 2SLS".strip(),
        family="2sls",
        dependent=design.spec.dependent,
        columns=list(design.columns),
        params=beta,
        cov=cov,
        n=n,
        stat_name="t",
        df_resid=df_resid,
        cov_type=design.spec.cov_type,
        dropped=list(design.dropped),
        design=design,
    )
    return result, pi, u1
