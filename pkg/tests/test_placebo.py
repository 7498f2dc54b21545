import importlib
import json

import mock
import numpy as np
import pytest
from scipy import integrate, stats

from greenlens.econometrics import ModelSpec, placebo
from greenlens.econometrics.placebo import kde_table
from greenlens.errors import ConfigError, PlaceboAborted

from .fixtures import make_panel


placebo_module = importlib.import_module("greenlens.econometrics.placebo")


SPEC = ModelSpec("vio", ("greenwashing", "lev", "roa"))


@pytest.fixture(scope="module")
def strong_panel():
    return make_panel(n_firms=100, effect=2.0, seed=1)


def test_placebo__strong_effect_is_outside_placebo_draws(strong_panel):
    report = placebo(strong_panel, SPEC, replications=200, seed=5)

    assert report.focus == "greenwashing"
    assert len(report.draws) == 200
    assert report.failures == 0
    assert report.actual > 1.0
    assert abs(report.mean) < 0.3
    assert report.outside_central()
    assert report.p_value == pytest.approx(1 / 201)
    assert report.to_dict()["replications"] == 200


def test_placebo__null_effect_draws_are_centered_and_p_values_uniform():
    null_panel = make_panel(n_firms=250, effect=0.0, seed=2)

    report = placebo(null_panel, SPEC, replications=500, seed=3)

    assert report.failures == 0
    assert abs(report.mean) < 3 * report.sd / np.sqrt(len(report.draws))
    assert stats.kstest(report.draw_p_values, "uniform").pvalue > 0.01
    assert 0.0 <= report.significant_share() <= 0.1


def test_placebo__independent_of_workers(strong_panel):
    serial = placebo(strong_panel, SPEC, replications=200, seed=9)
    threaded = placebo(strong_panel, SPEC, replications=200, seed=9, workers=3)
    other = placebo(strong_panel, SPEC, replications=200, seed=10)

    np.testing.assert_array_equal(serial.draws, threaded.draws)
    assert not np.array_equal(serial.draws, other.draws)


def test_placebo__bernoulli(strong_panel):
    report = placebo(strong_panel, SPEC, replications=200, method="bernoulli")

    assert report.method == "bernoulli"
    assert len(report.draws) + report.failures == 200


@pytest.mark.parametrize(
    "kwargs",
    [
        {"replications": 199},
        {"method": "bootstrap"},
        {"spec": SPEC.replace(interactions=(("greenwashing", "lev"),), focus="greenwashing:lev")},
    ],
)
def test_placebo__invalid(strong_panel, kwargs):
    kwargs.setdefault("spec", SPEC)
    with pytest.raises(ConfigError):
        placebo(strong_panel, **kwargs)


def test_placebo__aborts_when_refits_fail(strong_panel):
    with mock.patch.object(placebo_module, "_draw", return_value=None):
        with pytest.raises(PlaceboAborted) as excinfo:
            placebo(strong_panel, SPEC, replications=200)

    assert excinfo.value.failures == 200


def test_placebo__tolerates_few_failures(strong_panel):
    values = iter([None] * 10 + [(0.1 * i, 0.5) for i in range(190)])

    with mock.patch.object(placebo_module, "_draw", side_effect=lambda *a: next(values)):
        report = placebo(strong_panel, SPEC, replications=200)

    assert report.failures == 10
    assert len(report.draws) == 190
    assert (report.draw_p_values == 0.5).all()
    assert report.significant_share() == 0.0


def test_placebo_report__write(tmp_path, strong_panel):
    report = placebo(strong_panel, SPEC, replications=200, grid_size=50)

    report.write(tmp_path)

    assert json.loads((tmp_path / "placebo.json").read_text())["focus"] == "greenwashing"
    assert len((tmp_path / "placebo_draws.csv").read_text().splitlines()) == 201
    assert len((tmp_path / "placebo_density.csv").read_text().splitlines()) == 51


def test_kde_table():
    draws = np.random.default_rng(0).normal(size=500)

    table = kde_table(draws)

    assert len(table) == 200
    assert table["x"].iloc[0] == pytest.approx(draws.mean() - 3 * draws.std(ddof=1))
    assert integrate.trapezoid(table["density"], table["x"]) == pytest.approx(1.0, abs=0.02)


def test_kde_table__needs_spread():
    with pytest.raises(ValueError):
        kde_table(np.zeros(5))
