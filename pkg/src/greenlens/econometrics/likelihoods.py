"""
Likelihoods
-----------

Log-likelihoods of the binary and count regression models, with analytic scores and Hessians.
"""

import typing as t

import numpy as np
from scipy import special

from .optimize import NewtonResult, newton


#: Lower bound of the log negative binomial dispersion.
LNALPHA_FLOOR = -30.0

_CUMSUM_LIMIT = 1_000_000


class LikelihoodModel:
    """Base class of the maximum likelihood models over a response `y` and design `X`."""

    family = ""

    def __init__(self, y: np.ndarray, X: np.ndarray):
        self.y = np.asarray(y, dtype=float)
        self.X = np.asarray(X, dtype=float)
        self.nobs, self.k_exog = self.X.shape

    @property
    def k_params(self) -> int:
        return self.k_exog

    def lower_bounds(self) -> t.Optional[np.ndarray]:
        return None

    def loglikeobs(self, params: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def score_obs(self, params: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, params: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def start_params(self) -> np.ndarray:
        raise NotImplementedError

    def predict(self, params: np.ndarray, X: t.Optional[np.ndarray] = None) -> np.ndarray:
        raise NotImplementedError

    def loglike(self, params: np.ndarray) -> float:
        return float(np.sum(self.loglikeobs(params)))

    def score(self, params: np.ndarray) -> np.ndarray:
        return self.score_obs(params).sum(axis=0)

    def fit(self, start: t.Optional[np.ndarray] = None, *, maxiter: int = 100) -> NewtonResult:
        return newton(
            self.loglike,
            self.score,
            self.hessian,
            self.start_params() if start is None else start,
            lower=self.lower_bounds(),
            maxiter=maxiter,
        )

    def _linear(self, params: np.ndarray) -> np.ndarray:
        return self.X @ params[: self.k_exog]

    def _start_at(self, intercept: float) -> np.ndarray:
        start = np.zeros(self.k_params)
        const = np.flatnonzero(np.all(self.X == 1.0, axis=0))
        if len(const):
            start[const[0]] = intercept
        return start


class Logit(LikelihoodModel):
    family = "logit"

    def loglikeobs(self, params):
        eta = self._linear(params)
        return self.y * eta - np.logaddexp(0.0, eta)

    def score_obs(self, params):
        p = special.expit(self._linear(params))
        return (self.y - p)[:, None] * self.X

    def hessian(self, params):
        p = special.expit(self._linear(params))
        return -(self.X * (p * (1 - p))[:, None]).T @ self.X

    def start_params(self):
        ybar = np.clip(self.y.mean(), 1e-4, 1 - 1e-4)
        return self._start_at(float(special.logit(ybar)))

    def predict(self, params, X=None):
        X = self.X if X is None else X
        return special.expit(X @ params[: self.k_exog])


class Probit(LikelihoodModel):
    family = "probit"

    def _mills(self, params) -> t.Tuple[np.ndarray, np.ndarray, np.ndarray]:
        eta = self._linear(params)
        q = 2 * self.y - 1
        log_cdf = special.log_ndtr(q * eta)
        log_pdf = -0.5 * eta**2 - 0.5 * np.log(2 * np.pi)
        return eta, log_cdf, q * np.exp(log_pdf - log_cdf)

    def loglikeobs(self, params):
        _, log_cdf, _ = self._mills(params)
        return log_cdf

    def score_obs(self, params):
        _, _, lam = self._mills(params)
        return lam[:, None] * self.X

    def hessian(self, params):
        eta, _, lam = self._mills(params)
        return -(self.X * (lam * (lam + eta))[:, None]).T @ self.X

    def start_params(self):
        ybar = np.clip(self.y.mean(), 1e-4, 1 - 1e-4)
        return self._start_at(float(special.ndtri(ybar)))

    def predict(self, params, X=None):
        X = self.X if X is None else X
        return special.ndtr(X @ params[: self.k_exog])


class Poisson(LikelihoodModel):
    family = "poisson"

    def loglikeobs(self, params):
        eta = self._linear(params)
        return self.y * eta - np.exp(eta) - special.gammaln(self.y + 1)

    def score_obs(self, params):
        mu = np.exp(self._linear(params))
        return (self.y - mu)[:, None] * self.X

    def hessian(self, params):
        mu = np.exp(self._linear(params))
        return -(self.X * mu[:, None]).T @ self.X

    def start_params(self):
        return self._start_at(float(np.log(max(self.y.mean(), 1e-8))))

    def predict(self, params, X=None):
        X = self.X if X is None else X
        return np.exp(X @ params[: self.k_exog])


class NegativeBinomial(LikelihoodModel):
    """
    Negative binomial regression with quadratic variance ``mu + alpha * mu**2``.

    The last parameter is ``lnalpha``, bounded below by :data:`LNALPHA_FLOOR`. A fit that stops
    at the bound is the Poisson limit.
    """

    family = "negbin"

    def __init__(self, y, X):
        super().__init__(y, X)
        self._ycount = self.y.astype(np.int64)
        self._ymax = int(self._ycount.max()) if self.nobs else 0

    @property
    def k_params(self):
        return self.k_exog + 1

    def lower_bounds(self):
        lower = np.full(self.k_params, -np.inf)
        lower[-1] = LNALPHA_FLOOR
        return lower

    def _sums(self, alpha: float) -> t.Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Return ``sum(log1p(alpha*k))``, ``sum(1/(1+alpha*k))`` and ``sum(k/(1+alpha*k)**2)``
        over ``k = 0 .. y-1`` for every observation.
        """
        if self._ymax <= _CUMSUM_LIMIT:
            k = np.arange(self._ymax, dtype=float)
            ak = alpha * k
            pad = np.zeros(1)
            logs = np.concatenate([pad, np.cumsum(np.log1p(ak))])
            inv = np.concatenate([pad, np.cumsum(1 / (1 + ak))])
            ks = np.concatenate([pad, np.cumsum(k / (1 + ak) ** 2)])
            return logs[self._ycount], inv[self._ycount], ks[self._ycount]

        r = 1 / alpha
        y = self.y
        logs = special.gammaln(y + r) - special.gammaln(r) + y * np.log(alpha)
        dpsi = special.digamma(y + r) - special.digamma(r)
        inv = r * dpsi
        ks = r**2 * (dpsi - r * (special.polygamma(1, r) - special.polygamma(1, y + r)))
        return logs, inv, ks

    def _parts(self, params):
        mu = np.exp(self._linear(params))
        alpha = float(np.exp(params[-1]))
        return mu, alpha, 1 + alpha * mu

    def loglikeobs(self, params):
        mu, alpha, _ = self._parts(params)
        logs, _, _ = self._sums(alpha)
        return (
            logs
            - np.log1p(alpha * mu) / alpha
            - self.y * np.log1p(alpha * mu)
            + self.y * np.log(mu)
            - special.gammaln(self.y + 1)
        )

    def score_obs(self, params):
        mu, alpha, w = self._parts(params)
        _, inv, _ = self._sums(alpha)
        resid = (self.y - mu) / w
        g_theta = np.log1p(alpha * mu) / alpha - inv + resid
        return np.column_stack([resid[:, None] * self.X, g_theta])

    def hessian(self, params):
        mu, alpha, w = self._parts(params)
        _, _, ks = self._sums(alpha)
        y = self.y
        H = np.empty((self.k_params, self.k_params))
        H[:-1, :-1] = -(self.X * (mu * (1 + alpha * y) / w**2)[:, None]).T @ self.X
        cross = self.X.T @ (alpha * mu * (mu - y) / w**2)
        H[:-1, -1] = cross
        H[-1, :-1] = cross
        H[-1, -1] = np.sum(
            mu / w - np.log1p(alpha * mu) / alpha + alpha * ks - alpha * mu * (y - mu) / w**2
        )
        return H

    def start_params(self):
        poisson = Poisson(self.y, self.X)
        result = poisson.fit()
        return np.append(result.params, 0.0)

    def predict(self, params, X=None):
        X = self.X if X is None else X
        return np.exp(X @ params[: self.k_exog])


MODELS: t.Dict[str, t.Type[LikelihoodModel]] = {
    cls.family: cls for cls in (Logit, Probit, Poisson, NegativeBinomial)
}
