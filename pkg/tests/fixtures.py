from pathlib import Path
import typing as t

import numpy as np
import pandas as pd
import pytest
from scipy import special

from greenlens.corpus import EnvSection
from greenlens.gateway import BackendConfig, MockBackend
from greenlens.segment import Segmenter, SegmenterDictionary, StopwordList
from greenlens.store import Journal


#: Words of the small segmenter dictionary used throughout the tests.
WORDS = (
    "公司",
    "推进",
    "绿色生产",
    "节能减排",
    "完成",
    "改造",
    "项目",
    "管理办法",
    "制定",
    "碳排放",
    "响应",
    "号召",
    "污水处理",
    "设施",
)

INDUSTRIES = ("B06", "C26", "C30", "D44")


def write_dictionary(path: Path, words: t.Iterable[str] = WORDS, freq: int = 1000) -> Path:
    path.write_text("".join(f"{word} {freq}\n" for word in words), encoding="utf-8")
    return path


def section(firm_id: str, year: int, text: str) -> EnvSection:
    return EnvSection(firm_id=firm_id, year=year, text=text)


def answer(judgment: int, confidence: float) -> str:
    return f'{{"judgment":{judgment},"confidence":{confidence}}}'


def mock_config(backend_id: str = "mock", **kwargs: t.Any) -> BackendConfig:
    kwargs.setdefault("fixture_path", "fixture.json")
    return BackendConfig(backend_id, **kwargs)


def make_panel(
    n_firms: int = 150,
    years: t.Sequence[int] = (2019, 2020, 2021, 2022),
    seed: int = 0,
    effect: float = 1.0,
) -> pd.DataFrame:
    """Return a simulated firm-year panel where greenwashing raises the violation odds."""
    rng = np.random.default_rng(seed)
    firms = [f"{i:06d}" for i in range(1, n_firms + 1)]
    industry = dict(zip(firms, rng.choice(INDUSTRIES, size=n_firms)))
    propensity = dict(zip(firms, rng.normal(size=n_firms)))

    rows = []
    for firm in firms:
        for year in years:
            lev = rng.uniform(0.1, 0.8)
            gw = int(rng.uniform() < special.expit(propensity[firm] + lev - 0.5))
            row = {
                "firm_id": firm,
                "year": year,
                "industry_code": industry[firm],
                "greenwashing": gw,
                "lev": lev,
                "roa": rng.normal(0.04, 0.05),
                "growth": rng.normal(0.1, 0.3),
                "top1": rng.uniform(0.1, 0.7),
                "listage": int(rng.integers(1, 25)),
                "pfixa": rng.uniform(0.1, 0.5),
                "psales": rng.normal(),
                "esg_investor": int(rng.uniform() < 0.4),
                "base": rng.uniform(0.0, 5.0),
                "soe": int(rng.uniform() < 0.5),
            }
            eta = -1.0 + effect * gw + 0.8 * lev - 3.0 * row["roa"]
            row["vio"] = int(rng.uniform() < special.expit(eta))
            rate = np.exp(eta) * rng.gamma(2.0, 0.5)
            row["vio_num"] = int(rng.poisson(rate))
            rows.append(row)

    return pd.DataFrame(rows)


@pytest.fixture()
def dictionary_path(tmp_path: Path) -> Path:
    return write_dictionary(tmp_path / "dict.txt")


@pytest.fixture()
def stopwords() -> StopwordList:
    return StopwordList.from_words(["公司"])


@pytest.fixture()
def segmenter(dictionary_path: Path, stopwords: StopwordList) -> Segmenter:
    return Segmenter(SegmenterDictionary.load(dictionary_path), stopwords)


@pytest.fixture()
def sections() -> t.List[EnvSection]:
    return [
        section("000002", 2022, "公司完成改造项目。公司推进绿色生产。"),
        section("000001", 2022, "公司推进节能减排。"),
    ]


@pytest.fixture()
def journal(tmp_path: Path) -> t.Generator[Journal, None, None]:
    journal = Journal(tmp_path / "journal.sqlite")
    yield journal
    journal.close()


@pytest.fixture()
def backend_config() -> BackendConfig:
    return mock_config(max_retries=2)


@pytest.fixture()
def mock_backend() -> MockBackend:
    return MockBackend({}, default=(1, 0.9))


@pytest.fixture(scope="session")
def panel() -> pd.DataFrame:
    return make_panel()
