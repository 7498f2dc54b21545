import math

import numpy as np
import pandas as pd
import pytest

from greenlens.corpus import FirmMeta
from greenlens.errors import ConfigError, EmptyGroup, GroupMismatch, NegativeCount
from greenlens.indicators import (
    INDUSTRY,
    FirmYearIndicator,
    GroupMeans,
    build_indicators,
    compute_gi,
    compute_group_means,
    flag_all,
    flag_greenwashing,
    group_key,
    indicators_frame,
    load_esg,
    read_indicators,
    write_indicators,
)
from greenlens.judge_b import XYCount


parametrize = pytest.mark.parametrize


def ind(firm_id, gi, esg_e, industry="C26", year=2022):
    return FirmYearIndicator(firm_id, year, industry, gi=gi, esg_e=esg_e)


@parametrize(
    "x, y, expected",
    [
        (3, 1, 0.75),
        (0, 0, 0.0),
        (0, 4, 0.0),
        (5, 0, 1.0),
    ],
)
def test_compute_gi(x, y, expected):
    assert compute_gi(x, y) == expected


@parametrize("x, y", [(-1, 0), (0, -2)])
def test_compute_gi__negative_counts(x, y):
    with pytest.raises(NegativeCount):
        compute_gi(x, y)


@parametrize(
    "kwargs",
    [
        {"gi": 1.5},
        {"gi": -0.1},
        {"greenwashing": 2},
    ],
)
def test_firm_year_indicator__validation(kwargs):
    with pytest.raises(ValueError):
        FirmYearIndicator("000001", 2022, "C26", **kwargs)


def test_group_key():
    indicator = ind("000001", 0.5, 60.0)
    assert group_key(indicator) == ("C26", 2022)
    assert group_key(indicator, INDUSTRY) == ("C26",)

    with pytest.raises(ConfigError):
        group_key(indicator, "province")


def test_compute_group_means():
    indicators = [
        ind("000001", 0.2, 50.0),
        ind("000002", 0.6, 70.0),
        ind("000003", 0.9, None),
        ind("000004", 1.0, 40.0, industry="B06"),
        ind("000005", 0.1, 80.0, year=2021),
    ]

    means = compute_group_means(indicators)

    assert [gm.group_key for gm in means] == [("B06", 2022), ("C26", 2021), ("C26", 2022)]
    c26 = means[2]
    assert c26.gi_mean == pytest.approx(0.4)
    assert c26.esg_e_mean == pytest.approx(60.0)
    assert c26.n == 2


def test_compute_group_means__pooled_industry():
    indicators = [ind("000001", 0.2, 50.0), ind("000002", 0.6, 70.0, year=2021)]

    (means,) = compute_group_means(indicators, INDUSTRY)

    assert means.group_key == ("C26",)
    assert means.n == 2
    assert means.grouping == INDUSTRY


def test_compute_group_means__empty():
    with pytest.raises(EmptyGroup):
        compute_group_means([])


def test_group_means__needs_members():
    with pytest.raises(EmptyGroup):
        GroupMeans(("C26", 2022), 0.0, 0.0, n=0)


@parametrize(
    "gi, esg_e, expected",
    [
        (0.8, 50.0, 1),
        (0.5, 50.0, 0),
        (0.8, 60.0, 0),
        (0.8, 70.0, 0),
        (0.2, 50.0, 0),
        (0.8, None, 0),
    ],
)
def test_flag_greenwashing(gi, esg_e, expected):
    means = GroupMeans(("C26", 2022), gi_mean=0.5, esg_e_mean=60.0, n=3)
    assert flag_greenwashing(ind("000001", gi, esg_e), means) == expected


def test_flag_greenwashing__group_mismatch():
    means = GroupMeans(("B06", 2022), gi_mean=0.5, esg_e_mean=60.0, n=3)
    with pytest.raises(GroupMismatch):
        flag_greenwashing(ind("000001", 0.9, 10.0), means)


def test_flag_all():
    indicators = [
        ind("000001", 0.9, 40.0),
        ind("000002", 0.1, 80.0),
        ind("000003", 0.5, 60.0),
        ind("000004", 1.0, None),
        ind("000005", 1.0, None, industry="D44"),
    ]

    flagged, means = flag_all(indicators)

    assert [i.greenwashing for i in flagged] == [1, 0, 0, 0, 0]
    assert [i.firm_id for i in flagged] == [i.firm_id for i in indicators]
    assert [gm.group_key for gm in means] == [("C26", 2022)]


def test_build_indicators(caplog):
    meta = {
        "000001": FirmMeta("000001", "C26"),
        "000002": FirmMeta("000002", "C26"),
        "000003": FirmMeta("000003", "C26"),
    }
    xy = [XYCount("000001", 2022, x=3, y=1), XYCount("000002", 2022, x=1, y=3)]
    esg = {("000001", 2022): 40.0, ("000002", 2022): 70.0, ("000003", 2022): math.nan}
    firm_years = [("000002", 2022), ("000001", 2022), ("000003", 2022), ("000001", 2022)]

    indicators = build_indicators(firm_years, xy, meta, esg)

    assert [(i.firm_id, i.x, i.y, i.gi) for i in indicators] == [
        ("000001", 3, 1, 0.75),
        ("000002", 1, 3, 0.25),
        ("000003", 0, 0, 0.0),
    ]
    assert [i.greenwashing for i in indicators] == [1, 0, 0]
    assert indicators[2].esg_missing
    assert "no environmental score" in caplog.text


def test_build_indicators__requires_metadata():
    with pytest.raises(ConfigError):
        build_indicators([("000001", 2022)], [], {}, {})


def test_build_indicators__empty_universe():
    with pytest.raises(EmptyGroup):
        build_indicators([], [], {}, {})


def test_load_esg(tmp_path):
    path = tmp_path / "esg.csv"
    path.write_text("firm_id,year,esg_e\n000001,2022,61.5\n000002,2022,\n", encoding="utf-8")

    assert load_esg(path) == {("000001", 2022): 61.5}


def test_indicators__file_round_trip(tmp_path):
    indicators = [
        FirmYearIndicator("000001", 2022, "C26", 3, 1, 0.75, 40.0, 1),
        FirmYearIndicator("000002", 2021, "C26", 0, 0, 0.0, None, 0),
    ]
    path = tmp_path / "indicators.csv"

    write_indicators(path, indicators)

    assert read_indicators(path) == indicators
    assert list(indicators_frame(indicators)["esg_missing"]) == [False, True]
    assert path.read_text(encoding="utf-8").splitlines()[0] == (
        "firm_id,year,industry_code,x,y,gi,esg_e,greenwashing,esg_missing"
    )


def test_compute_gi__range_scale_and_zero_total():
    for x in range(51):
        for y in range(51):
            gi = compute_gi(x, y)
            assert 0.0 <= gi <= 1.0
            if x + y == 0:
                assert gi == 0.0
                continue
            assert gi == x / (x + y)
            assert compute_gi(3 * x, 3 * y) == gi
            if x < 50:
                assert compute_gi(x + 1, y) >= gi


def test_flag_all__matches_group_by_of_the_panel():
    rng = np.random.default_rng(17)
    indicators = []
    for i in range(500):
        x, y = (int(v) for v in rng.integers(0, 20, size=2))
        esg_e = None if rng.uniform() < 0.1 else float(np.round(rng.uniform(30, 90), 2))
        indicators.append(
            FirmYearIndicator(
                firm_id=f"{i:06d}",
                year=int(rng.choice([2021, 2022, 2023])),
                industry_code=str(rng.choice(["C26", "C30", "D44", "B06"])),
                x=x,
                y=y,
                gi=compute_gi(x, y),
                esg_e=esg_e,
            )
        )

    flagged, _ = flag_all(indicators)

    frame = pd.DataFrame([i.to_dict() for i in indicators])
    scored = frame[frame["esg_e"].notna()]
    means = scored.groupby(["industry_code", "year"])[["gi", "esg_e"]].agg(
        lambda s: math.fsum(s) / len(s)
    )
    joined = frame.join(means, on=["industry_code", "year"], rsuffix="_mean")
    expected = (
        joined["esg_e"].notna()
        & (joined["gi"] > joined["gi_mean"])
        & (joined["esg_e"] < joined["esg_e_mean"])
    ).astype(int)

    assert [i.greenwashing for i in flagged] == expected.tolist()
    assert 0 < sum(expected) < len(expected)
