import math

import numpy as np
import pandas as pd
import pytest
from scipy import special

from greenlens.econometrics import match_nearest, psm
from greenlens.econometrics.psm import balance_table, standardized_bias
from greenlens.errors import InsufficientControls, NotBinary

from .fixtures import make_panel


parametrize = pytest.mark.parametrize


@pytest.fixture(scope="module")
def treated_panel(panel) -> pd.DataFrame:
    rng = np.random.default_rng(11)
    p = special.expit(-2.0 + 3.0 * panel["lev"].to_numpy())
    return panel.assign(treat=(rng.uniform(size=len(panel)) < p).astype(int))


@parametrize(
    "treated, controls, caliper, expected",
    [
        ([0.5], [0.25, 0.75], None, [(0, 0)]),
        ([0.3, 0.9], [0.8, 0.35], None, [(1, 0), (0, 1)]),
        ([0.5, 0.6], [0.55, 0.1], None, [(1, 0), (0, 1)]),
        ([0.5, 0.9], [0.5, 0.1], 0.1, [(0, 0)]),
        ([], [0.1], None, []),
    ],
)
def test_match_nearest(treated, controls, caliper, expected):
    assert match_nearest(treated, controls, caliper) == expected


def test_match_nearest__insufficient_controls():
    with pytest.raises(InsufficientControls):
        match_nearest([0.1, 0.2], [0.3])


def test_standardized_bias__zero_variance():
    same = np.array([1.0, 1.0])
    assert standardized_bias(same, same, 0.0, 0.0) == 0.0
    assert standardized_bias(same + 1, same, 0.0, 0.0) == math.inf


def test_balance_table():
    frame = pd.DataFrame({"treat": [1, 1, 0, 0, 0], "x": [2.0, 4.0, 1.0, 3.0, 5.0]})
    matched = frame.iloc[[0, 2, 1, 3]].assign(_treated=[1, 0, 1, 0])

    (row,) = balance_table(frame, "treat", ["x"], matched).to_dict(orient="records")

    assert row["mean_treated_before"] == 3.0
    assert row["mean_control_before"] == 3.0
    assert row["bias_before"] == 0.0
    assert row["mean_control_after"] == 2.0
    assert row["bias_after"] == pytest.approx(100 / math.sqrt(3))
    assert row["reduction"] == -math.inf


def test_psm(treated_panel):
    n_treated = int(treated_panel["treat"].sum())

    result = psm(treated_panel, "treat")

    assert len(result.matches) == n_treated
    assert result.n_treated == n_treated
    assert result.matches["control_index"].is_unique
    assert len(result.matched) == 2 * n_treated
    assert (result.matches["distance"] >= 0).all()
    assert result.scores.between(0, 1).all()
    assert set(result.post) == {"logit", "probit"}
    assert result.post["logit"].n == 2 * n_treated
    assert "treat" in result.post["probit"].columns

    lev = result.balance.set_index("covariate").loc["lev"]
    assert abs(lev["bias_after"]) < abs(lev["bias_before"])
    assert lev["reduction"] > 0
    assert list(result.balance["covariate"]) == [
        "lev",
        "roa",
        "growth",
        "top1",
        "listage",
        "pfixa",
        "psales",
    ]
    assert result.to_dict()["n_pairs"] == n_treated


def test_psm__matching_removes_confounder_imbalance():
    data = make_panel(n_firms=2000, seed=12)
    rng = np.random.default_rng(13)
    lev, psales = data["lev"].to_numpy(), data["psales"].to_numpy()
    data["treat"] = (rng.uniform(size=len(data)) < special.expit(-2.0 + 2.0 * lev + 0.5 * psales))
    data["treat"] = data["treat"].astype(int)
    eta = -1.0 + 1.0 * data["treat"] + 0.8 * lev + 0.3 * psales
    data["vio"] = (rng.uniform(size=len(data)) < special.expit(eta)).astype(int)

    result = psm(data, "treat", post_models=("logit",))

    balance = result.balance.set_index("covariate")
    assert balance.loc["lev", "bias_before"] > 20
    assert balance.loc["psales", "bias_before"] > 20
    assert (balance["bias_after"].abs() < 10).all()
    assert len(result.matches) == int(data["treat"].sum())
    assert result.post["logit"].coefficients["treat"] > 0
    assert result.post["logit"].p_values["treat"] < 0.01


def test_psm__caliper_drops_distant_treated(treated_panel, caplog):
    result = psm(treated_panel, "treat", caliper=1e-4, post_models=())

    assert len(result.matches) < int(treated_panel["treat"].sum())
    assert (result.matches["distance"] <= 1e-4).all()
    assert "have no control within the caliper" in caplog.text
    assert result.post == {}


def test_psm__requires_binary_treatment(panel):
    with pytest.raises(NotBinary):
        psm(panel, "base", post_models=())
