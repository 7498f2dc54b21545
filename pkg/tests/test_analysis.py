import numpy as np
import pandas as pd
import pytest

from greenlens.econometrics import (
    CONTROLS,
    ModelSpec,
    default_suite,
    heterogeneity,
    moderation,
    run_suite,
    vif,
)
from greenlens.errors import ConfigError

from .fixtures import make_panel


BASE = ModelSpec("vio", ("greenwashing", "lev", "roa"), fixed_effects=("year",))


def test_default_suite():
    specs = default_suite()

    assert [spec.name for spec in specs] == [
        "logit 1",
        "logit 2",
        "logit 3",
        "logit 4",
        "logit 5",
        "logit 6",
        "ols pooled",
        "ols FE",
        "poisson pooled",
        "poisson FE",
        "negbin pooled",
        "negbin FE",
    ]
    assert specs[0].regressors == ("greenwashing",)
    assert specs[3].regressors == ("greenwashing", *CONTROLS)
    assert specs[2].fixed_effects == ("year_industry",)
    assert {spec.dependent for spec in specs[6:]} == {"vio_num"}
    assert specs[-1].fixed_effects == ("year", "industry")


def test_run_suite(panel):
    suite = run_suite(panel, default_suite())

    assert len(suite.results) == 12
    assert list(suite.ames) == [f"logit {i}" for i in range(1, 7)]
    assert all(effect.ame > 0 for effect in suite.ames.values())
    assert all(result.coefficients["greenwashing"] > 0 for result in suite.results)
    assert "lnalpha" in suite.results[-1].extras

    text = suite.table(["greenwashing"])
    assert "Average marginal effects" in text
    assert "(12) negbin FE" in text
    assert len(suite.to_dict()["results"]) == 12


def test_moderation(panel):
    results = moderation(panel, "esg_investor", BASE)

    assert set(results) == {"logit", "probit"}
    logit = results["logit"]
    assert logit.name == "logit x esg_investor"
    assert logit.columns[:4] == ["const", "greenwashing", "esg_investor", "lev"]
    assert "greenwashing:esg_investor" in logit.columns
    assert results["probit"].family == "probit"


def test_moderation__default_specification(panel):
    (result,) = moderation(panel, "base", families=("logit",)).values()

    assert "greenwashing:base" in result.columns
    assert "industry[C26]" in result.columns


def test_moderation__constant_moderator_is_dropped(panel):
    data = panel.assign(esg_investor=0)

    results = moderation(data, "esg_investor", BASE, families=("logit",))

    assert results["logit"].dropped == ["esg_investor", "greenwashing:esg_investor"]


def test_moderation__rows_missing_moderator(panel):
    data = panel.copy()
    data.loc[data.index[:10], "base"] = np.nan

    results = moderation(data, "base", BASE, families=("logit",))

    assert results["logit"].n == len(panel) - 10


def test_moderation__unknown_moderator(panel):
    with pytest.raises(ConfigError):
        moderation(panel, "analyst_coverage", BASE)


def test_heterogeneity(panel):
    report = heterogeneity(panel, BASE, "soe")

    assert list(report.results) == [0, 1]
    assert report.skipped == {}
    assert report.results[1].name == "soe=1"
    assert sum(result.n for result in report.results.values()) == len(panel)
    assert "(2) soe=1" in report.table()


def test_heterogeneity__effect_only_in_one_group():
    group_a = make_panel(n_firms=300, effect=1.5, seed=4).assign(group="A")
    group_b = make_panel(n_firms=300, effect=0.0, seed=5).assign(group="B")
    group_b["firm_id"] = "B" + group_b["firm_id"]
    data = pd.concat([group_a, group_b], ignore_index=True)

    report = heterogeneity(data, BASE, "group")

    a, b = report.results["A"], report.results["B"]
    assert a.coefficients["greenwashing"] > 1.0
    assert a.p_values["greenwashing"] < 0.01
    assert abs(b.coefficients["greenwashing"]) < 2.58 * b.std_errors["greenwashing"]
    assert a.n + b.n == len(data)


def test_heterogeneity__skips_small_subsamples(panel, caplog):
    data = panel.assign(cohort=np.where(np.arange(len(panel)) < 5, "small", "large"))

    report = heterogeneity(data, BASE.replace(fixed_effects=()), "cohort")

    assert list(report.results) == ["large"]
    assert list(report.skipped) == ["small"]
    assert "too few" in report.skipped["small"]
    assert "Skipped subsample cohort=small" in caplog.text
    assert report.to_dict()["skipped"] == {"small": report.skipped["small"]}


def test_heterogeneity__split_must_be_defined(panel):
    data = panel.assign(region=np.where(np.arange(len(panel)) < 5, None, "east"))

    with pytest.raises(ConfigError):
        heterogeneity(data, BASE, "region")
    with pytest.raises(ConfigError):
        heterogeneity(panel, BASE, "region")


def test_vif(panel):
    table, corr = vif(panel)

    assert list(table["variable"]) == ["greenwashing", *CONTROLS]
    assert (table["vif"] >= 1).all()
    assert (table["vif_fe"] >= table["vif"] - 1e-9).all()
    assert (table["vif"] < 2).all()
    np.testing.assert_allclose(np.diag(corr), 1.0)


def test_vif__collinear_regressor(panel):
    data = panel.assign(lev2=2 * panel["lev"])

    table, _ = vif(data, ("lev", "lev2", "roa"), fixed_effects=())

    assert np.isinf(table["vif"].iloc[0]) or table["vif"].iloc[0] > 1e6
