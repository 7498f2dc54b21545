import math

import numpy as np
import pandas as pd
import pytest
from statsmodels.sandbox.regression.gmm import IV2SLS

from greenlens.econometrics import ModelSpec, build_design, fit, fit_iv, fit_tsls
from greenlens.errors import ConfigError, ConvergenceError, NoLag, WeakInstrumentWarning


SPEC = ModelSpec("y", ("d", "w"), family="ols")


def iv_panel(n_firms=300, years=(2019, 2020, 2021, 2022), rho=0.5, seed=7) -> pd.DataFrame:
    """Return a panel where ``d`` is persistent and its shock is correlated with the outcome's."""
    rng = np.random.default_rng(seed)
    cov = [[1.0, rho], [rho, 1.0]]
    d = rng.normal(size=n_firms)
    frames = []
    for year in years:
        u = rng.multivariate_normal([0.0, 0.0], cov, size=n_firms)
        if year != years[0]:
            d = 0.8 * d + u[:, 0]
        w = rng.normal(size=n_firms)
        frames.append(
            pd.DataFrame(
                {
                    "firm_id": [f"{i:06d}" for i in range(n_firms)],
                    "year": year,
                    "d": d,
                    "w": w,
                    "y": 1.0 + 0.5 * d + 0.3 * w + u[:, 1],
                }
            )
        )
    return pd.concat(frames, ignore_index=True)


@pytest.fixture(scope="module")
def iv_data() -> pd.DataFrame:
    return iv_panel()


def test_fit_tsls__matches_statsmodels(iv_data):
    result, f_stat = fit_tsls(iv_data, SPEC)

    design = result.design
    z = design.frame["d_lag"].to_numpy()
    Z = np.column_stack([np.ones(design.n), z, design.column("w")])
    expected = IV2SLS(design.y, design.X, Z).fit()

    assert result.family == "2sls"
    assert result.n == 300 * 3
    assert result.columns == ["const", "d", "w"]
    np.testing.assert_allclose(result.params, expected.params, rtol=1e-8)
    np.testing.assert_allclose(np.sqrt(np.diag(result.cov)), expected.bse, rtol=1e-6)
    assert f_stat > 100
    assert result.extras["first_stage_F"] == f_stat


def test_fit_tsls__corrects_endogeneity(iv_data):
    ols = fit(build_design(iv_data, SPEC))
    tsls, _ = fit_tsls(iv_data, SPEC)

    assert ols.coefficients["d"] > 0.6
    assert tsls.coefficients["d"] == pytest.approx(0.5, abs=0.1)


def test_fit_iv__just_identified_matches_tsls(iv_data):
    result = fit_iv(iv_data, SPEC)

    assert result.instrument == "d_lag"
    assert result.second_stage.family == "fiml"
    assert result.second_stage.coefficients["d"] == pytest.approx(
        result.tsls.coefficients["d"], abs=1e-4
    )
    assert result.first_stage.columns == ["const", "d_lag", "w"]
    assert result.first_stage.coefficients["d_lag"] == pytest.approx(0.8, abs=0.1)
    assert result.rho == pytest.approx(0.5, abs=0.1)
    assert set(result.second_stage.extras) == {"lnsig1", "lnsig2", "atanhrho", "first_stage_F"}
    assert result.to_dict()["instrument"] == "d_lag"


def test_fit_iv__fixed_rho(iv_data):
    result = fit_iv(iv_data, SPEC, fix_rho=0.0)

    assert result.rho == 0.0
    assert math.isnan(result.second_stage.extras_se["atanhrho"])
    assert result.second_stage.extras_se["lnsig2"] > 0


@pytest.mark.parametrize("fix_rho", [1.0, -1.5])
def test_fit_iv__invalid_fixed_rho(iv_data, fix_rho):
    with pytest.raises(ConfigError):
        fit_iv(iv_data, SPEC, fix_rho=fix_rho)


def test_fit_iv__dynamic_adds_lagged_outcome(iv_data):
    result = fit_iv(iv_data, SPEC, dynamic=True)

    assert result.second_stage.columns == ["const", "d", "w", "y_lag"]
    assert result.second_stage.n == 300 * 3


def test_fit_iv__degenerate_first_stage(iv_data):
    data = iv_data.assign(d_lag=iv_data["d"])

    tsls, _ = fit_tsls(data, SPEC)
    ols = fit(build_design(data, SPEC))
    np.testing.assert_allclose(tsls.params, ols.params, rtol=1e-8)

    with pytest.raises(ConvergenceError):
        fit_iv(data, SPEC)


def test_fit_iv__weak_instrument(iv_data):
    data = iv_data.assign(d_lag=np.random.default_rng(3).normal(size=len(iv_data)))
    Z = np.column_stack([np.ones(len(data)), data["d_lag"], data["w"]])
    params, *_ = np.linalg.lstsq(Z, data["d"].to_numpy(), rcond=None)
    data["d"] = data["d"] - Z[:, 1] * params[1]

    with pytest.warns(WeakInstrumentWarning):
        _, f_stat = fit_tsls(data, SPEC)

    assert f_stat == pytest.approx(0.0, abs=1e-6)


def test_fit_iv__no_consecutive_years():
    data = iv_panel(years=(2019,))

    with pytest.raises(NoLag):
        fit_iv(data, SPEC)


def test_fit_iv__rejects_interactions(iv_data):
    with pytest.raises(ConfigError):
        fit_iv(iv_data, SPEC.replace(interactions=(("d", "w"),)))


def test_fit_iv__zero_rho_is_equation_by_equation_least_squares(iv_data):
    result = fit_iv(iv_data, SPEC, fix_rho=0.0)

    design = result.second_stage.design
    outcome, *_ = np.linalg.lstsq(design.X, design.y, rcond=None)
    Z = np.column_stack([np.ones(design.n), design.frame["d_lag"], design.column("w")])
    first, *_ = np.linalg.lstsq(Z, design.column("d"), rcond=None)

    np.testing.assert_allclose(result.second_stage.params, outcome, rtol=0, atol=1e-6)
    np.testing.assert_allclose(result.first_stage.params, first, rtol=0, atol=1e-6)


@pytest.mark.parametrize("rho", [-0.4, 0.0, 0.6])
def test_fit_iv__recovers_effect_and_error_correlation(rho):
    data = iv_panel(n_firms=2000, rho=rho, seed=21)

    result = fit_iv(data, SPEC)

    assert result.second_stage.coefficients["d"] == pytest.approx(0.5, abs=0.06)
    assert result.second_stage.coefficients["w"] == pytest.approx(0.3, abs=0.06)
    assert result.rho == pytest.approx(rho, abs=0.06)


def test_fit_iv__covers_effect_and_error_correlation_within_three_standard_errors():
    covered = 0
    for seed in range(100):
        result = fit_iv(iv_panel(rho=0.5, seed=100 + seed), SPEC)

        second = result.second_stage
        covered += (
            abs(second.coefficients["d"] - 0.5) < 3 * second.std_errors["d"]
            and abs(second.extras["atanhrho"] - math.atanh(0.5)) < 3 * second.extras_se["atanhrho"]
        )

    assert covered >= 95
