"""
Placebo
-------

Placebo tests that refit a model with its treatment column randomly reassigned.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import logging
from pathlib import Path
import typing as t

import numpy as np
import pandas as pd
from scipy import stats

from ..errors import ConfigError, EstimationError, PlaceboAborted
from ..utils import PathLike, write_json
from .design import DesignMatrix, ModelSpec, build_design
from .models import fit


logger = logging.getLogger(__name__)

PERMUTATION = "permutation"
BERNOULLI = "bernoulli"
METHODS = (PERMUTATION, BERNOULLI)

#: Fewest replications accepted.
MIN_REPLICATIONS = 200

#: Largest share of failed refits tolerated.
MAX_FAILURE_RATE = 0.05


@dataclass
class PlaceboReport:
    """
    Placebo coefficients of one treatment.

    ``draw_p_values`` holds the Wald p-value of each placebo coefficient; without a real effect
    they are close to uniform.
    """

    focus: str
    actual: float
    draws: np.ndarray
    draw_p_values: np.ndarray
    p_value: float
    density: pd.DataFrame
    failures: int
    method: str
    seed: int
    replications: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.draws))

    @property
    def sd(self) -> float:
        return float(np.std(self.draws, ddof=1))

    def central_interval(self, level: float = 0.95) -> t.Tuple[float, float]:
        tail = (1 - level) / 2
        low, high = np.quantile(self.draws, [tail, 1 - tail])
        return float(low), float(high)

    def significant_share(self, level: float = 0.05) -> float:
        """Return the share of placebo coefficients significant at `level`."""
        return float(np.mean(self.draw_p_values < level))

    def outside_central(self, level: float = 0.95) -> bool:
        """Return whether the actual coefficient lies outside the central `level` of the draws."""
        low, high = self.central_interval(level)
        return not low <= self.actual <= high

    def to_dict(self) -> t.Dict[str, t.Any]:
        low, high = self.central_interval()
        return {
            "focus": self.focus,
            "actual": self.actual,
            "mean": self.mean,
            "sd": self.sd,
            "p_value": self.p_value,
            "central_95": [low, high],
            "significant_share": self.significant_share(),
            "failures": self.failures,
            "method": self.method,
            "seed": self.seed,
            "replications": self.replications,
        }

    def write(self, directory: PathLike) -> None:
        """Write ``placebo.json``, ``placebo_draws.csv`` and ``placebo_density.csv``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        write_json(directory / "placebo.json", self.to_dict())
        draws = pd.DataFrame(
            {
                "draw": range(len(self.draws)),
                "coefficient": self.draws,
                "p_value": self.draw_p_values,
            }
        )
        draws.to_csv(directory / "placebo_draws.csv", index=False)
        self.density.to_csv(directory / "placebo_density.csv", index=False)


def kde_table(draws: np.ndarray, grid_size: int = 200, width: float = 3.0) -> pd.DataFrame:
    """
    Return a Gaussian kernel density of `draws` with Silverman's bandwidth on an evenly spaced grid
    spanning `width` standard deviations either side of the mean.
    """
    draws = np.asarray(draws, dtype=float)
    sd = float(np.std(draws, ddof=1))
    if not sd > 0:
        raise ValueError("placebo draws have no spread")
    center = float(np.mean(draws))
    grid = np.linspace(center - width * sd, center + width * sd, grid_size)
    kde = stats.gaussian_kde(draws, bw_method="silverman")
    return pd.DataFrame({"x": grid, "density": kde(grid)})


def placebo_p_value(actual: float, draws: np.ndarray) -> float:
    """
    Return the two-sided placebo p-value ``(1 + #{|draw| >= |actual|}) / (B + 1)``.

    >>> placebo_p_value(2.0, np.array([0.5, -3.0, 1.0]))
    0.5
    """
    draws = np.asarray(draws, dtype=float)
    exceed = int(np.sum(np.abs(draws) >= abs(actual)))
    return (1 + exceed) / (len(draws) + 1)


def _draw(
    design: DesignMatrix, focus: str, method: str, seed: np.random.SeedSequence
) -> t.Optional[t.Tuple[float, float]]:
    rng = np.random.Generator(np.random.PCG64(seed))
    values = design.column(focus)
    if method == PERMUTATION:
        placebo = rng.permutation(values)
    else:
        placebo = rng.binomial(1, float(np.mean(values)), size=len(values)).astype(float)
    try:
        result = fit(design.with_column(focus, placebo))
    except (EstimationError, np.linalg.LinAlgError) as exc:
        logger.debug("Placebo refit failed: %s", exc)
        return None
    return result.coefficients[focus], result.p_values[focus]


def placebo(
    panel: pd.DataFrame,
    spec: ModelSpec,
    replications: int = 500,
    seed: int = 0,
    *,
    method: str = PERMUTATION,
    workers: int = 1,
    grid_size: int = 200,
) -> PlaceboReport:
    """
    Refit `spec` `replications` times with its focus regressor replaced by a placebo treatment.

    Each replication draws from its own stream spawned from `seed`, so results do not depend on
    `workers`.

    Args:
        panel: Estimation panel.
        spec: Model whose focus term is the treatment.
        replications: Number of placebo refits, at least 200.
        seed: Master seed.

    Keyword Arguments:
        method: ``permutation`` shuffles the treatment column; ``bernoulli`` redraws it at the
            observed treatment rate.
        workers: Threads used for the refits.
        grid_size: Points of the density table.

    Raises:
        PlaceboAborted: If more than 5% of refits fail.
    """
    if replications < MIN_REPLICATIONS:
        raise ConfigError(f"placebo needs at least {MIN_REPLICATIONS} replications")
    if method not in METHODS:
        raise ConfigError(f"unknown placebo method {method!r}; expected one of {METHODS}")
    focus = spec.focus_term
    if focus not in spec.regressors:
        raise ConfigError(f"placebo treatment {focus!r} must be a main effect")

    design = build_design(panel, spec)
    actual = fit(design).coefficients[focus]
    seeds = np.random.SeedSequence(seed).spawn(replications)

    def run(child: np.random.SeedSequence) -> t.Optional[t.Tuple[float, float]]:
        return _draw(design, focus, method, child)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(run, seeds))
    else:
        outcomes = [run(child) for child in seeds]

    refits = [outcome for outcome in outcomes if outcome is not None]
    draws = np.array([coefficient for coefficient, _ in refits], dtype=float)
    failures = replications - len(refits)
    if failures:
        logger.warning("%d of %d placebo refit(s) failed", failures, replications)
    if failures > MAX_FAILURE_RATE * replications:
        raise PlaceboAborted(
            f"{failures} of {replications} placebo refits failed",
            failures=failures,
            replications=replications,
        )

    report = PlaceboReport(
        focus=focus,
        actual=actual,
        draws=draws,
        draw_p_values=np.array([p_value for _, p_value in refits], dtype=float),
        p_value=placebo_p_value(actual, draws),
        density=kde_table(draws, grid_size),
        failures=failures,
        method=method,
        seed=seed,
        replications=replications,
    )
    logger.info(
        "Placebo %s: actual=%.4f, placebo mean=%.4f sd=%.4f, p=%.4f",
        focus,
        actual,
        report.mean,
        report.sd,
        report.p_value,
    )
    return report
