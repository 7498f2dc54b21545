"""
Synthetic
---------

A self-contained synthetic study for demos and end-to-end tests.

Every firm has a latent type. Greenwashing firms write mostly "substantive-sounding" disclosure
sentences but receive low environmental scores and commit more environmental violations, so the
full pipeline should flag them and estimate a positive treatment effect. The study is written to a
directory together with a pipeline configuration that runs every stage offline against a
scripted mock backend.
"""

from dataclasses import dataclass, field
import logging
from pathlib import Path
import typing as t

import numpy as np
import pandas as pd

from .corpus import ReportDocument, extract_env_section
from .gateway.parsing import render_answer
from .segment import (
    KeywordContextPair,
    Segmenter,
    SegmenterDictionary,
    build_s1,
    build_s2,
    load_stopwords,
)
from .store import SnapshotStore
from .utils import PathLike, write_json


logger = logging.getLogger(__name__)

INDUSTRIES = ("C26", "C30", "C39", "D44")

GREEN_KEYWORDS = (
    "绿色生产",
    "节能减排",
    "污水处理",
    "碳排放",
    "清洁能源",
    "环境保护",
    "低碳发展",
    "废气治理",
)

SUBSTANTIVE_TEMPLATES = (
    "公司完成{kw}改造项目。",
    "公司投入资金建设{kw}设施。",
    "公司制定《{kw}管理办法》并落实执行。",
)

SYMBOLIC_TEMPLATES = (
    "公司积极响应{kw}号召。",
    "公司高度重视{kw}工作。",
    "公司组织学习《{kw}条例》精神。",
)

#: Words that only occur in substantive sentences.
SUBSTANTIVE_MARKERS = ("完成", "投入", "落实")

FILLER_WORDS = (
    "公司",
    "完成",
    "改造",
    "项目",
    "投入",
    "资金",
    "建设",
    "设施",
    "制定",
    "管理办法",
    "落实",
    "执行",
    "积极",
    "响应",
    "号召",
    "高度重视",
    "工作",
    "组织",
    "学习",
    "条例",
    "精神",
    "环境信息",
    "情况",
    "社会责任",
    "重要提示",
    "董事会",
    "保证",
    "报告",
    "内容",
    "真实",
    "参与",
    "公益",
    "第一节",
)

STOPWORDS = ("公司", "并", "工作", "情况")

PREAMBLE = "第一节 重要提示\n董事会保证报告内容真实。\n"
SECTION_HEADER = "十、环境信息情况\n"
CLOSING = "\n十一、社会责任\n公司积极参与公益。\n"

SUBSTANTIVE_PASSAGE = "监管公告：该公司已完成相关环保整改并通过验收。"
SYMBOLIC_PASSAGE = "公开信息未显示该公司采取具体环保措施。"

CONFIG_TEMPLATE = """\
[pipeline]
seed = {seed}
out = "out"

[corpus]
reports = ["reports"]
meta = "meta.csv"
year_range = [{first_year}, {last_year}]

[segment]
dictionary = "dictionary.txt"
stopwords = "stopwords.txt"

[judge]
champion = "mock-champion"
arm = "control"
context_window = 2

[judge.retrieval]
provider_id = "synthetic"
snapshot_path = "rag.sqlite"
max_passages = 3

[[judge.backends]]
backend_id = "mock-champion"
kind = "mock"
fixture_path = "fixture_champion.json"
max_inflight = {max_inflight}
mock_default = {{ judgment = 0, confidence = 0.7 }}

[[judge.backends]]
backend_id = "mock-weak"
kind = "mock"
fixture_path = "fixture_weak.json"
max_inflight = {max_inflight}
mock_default = {{ judgment = 0, confidence = 0.6 }}

[validate]
word_labels = "labels_words.csv"
pair_labels = "labels_pairs.csv"
layer_a = {{ n_per_replicate = {n_words}, replicates = 3 }}
layer_b = {{ n_per_replicate = {n_pairs}, replicates = 1 }}

[indicators]
esg = "esg.csv"
grouping = "industry_year"

[estimate]
controls = "controls.csv"
moderators = ["esg_investor", "base"]
heterogeneity = ["foreign", "soe"]

[placebo]
replications = {replications}
method = "permutation"
"""


@dataclass
class SyntheticStudy:
    """Paths and ground truth of a written synthetic study."""

    directory: Path
    config_path: Path
    firms: pd.DataFrame
    words: t.List[str] = field(default_factory=list)
    pairs: t.List[KeywordContextPair] = field(default_factory=list)
    pair_labels: t.Dict[str, int] = field(default_factory=dict)


def is_substantive(sentence: str) -> bool:
    """
    Return whether a synthetic disclosure sentence describes a concrete action.

    >>> is_substantive("公司完成绿色生产改造项目。")
    True
    >>> is_substantive("公司积极响应碳排放号召。")
    False
    """
    return any(marker in sentence for marker in SUBSTANTIVE_MARKERS)


def _firms(
    rng: np.random.Generator, n_firms: int, greenwasher_share: float, first_year: int
) -> pd.DataFrame:
    firm_ids = [f"{600000 + i:06d}" for i in range(1, n_firms + 1)]
    return pd.DataFrame(
        {
            "firm_id": firm_ids,
            "industry_code": [INDUSTRIES[i % len(INDUSTRIES)] for i in range(n_firms)],
            "greenwasher": rng.binomial(1, greenwasher_share, n_firms),
            "listing_year": first_year - rng.integers(2, 25, n_firms),
            "foreign": rng.binomial(1, 0.3, n_firms),
            "soe": rng.binomial(1, 0.5, n_firms),
        }
    )


def _disclosure(rng: np.random.Generator, greenwasher: int) -> t.List[str]:
    share = 0.85 if greenwasher else 0.45
    sentences = []
    for _ in range(int(rng.integers(4, 9))):
        keyword = GREEN_KEYWORDS[int(rng.integers(len(GREEN_KEYWORDS)))]
        templates = SUBSTANTIVE_TEMPLATES if rng.random() < share else SYMBOLIC_TEMPLATES
        sentences.append(templates[int(rng.integers(len(templates)))].format(kw=keyword))
    return sentences


def _report(rng: np.random.Generator, greenwasher: int, missing_share: float) -> str:
    if rng.random() < missing_share:
        return PREAMBLE + CLOSING
    return PREAMBLE + SECTION_HEADER + "".join(_disclosure(rng, greenwasher)) + CLOSING


def _panel(
    rng: np.random.Generator, firms: pd.DataFrame, years: t.Sequence[int], effect: float
) -> pd.DataFrame:
    rows = []
    for firm in firms.itertuples(index=False):
        for year in years:
            lev = rng.uniform(0.1, 0.7)
            roa = rng.normal(0.04, 0.05)
            heterogeneity = rng.gamma(2.0, 0.5)
            rate = np.exp(-1.2 + effect * firm.greenwasher + 0.5 * lev - 2.0 * roa)
            vio_num = int(rng.poisson(rate * heterogeneity))
            rows.append(
                {
                    "firm_id": firm.firm_id,
                    "year": year,
                    "vio": int(vio_num > 0),
                    "vio_num": vio_num,
                    "lev": round(lev, 6),
                    "roa": round(roa, 6),
                    "growth": round(rng.normal(0.1, 0.2), 6),
                    "top1": round(rng.uniform(0.15, 0.6), 6),
                    "listage": year - int(firm.listing_year),
                    "pfixa": round(rng.uniform(0.1, 0.5), 6),
                    "psales": round(rng.uniform(0.2, 0.8), 6),
                    "esg_investor": int(rng.binomial(1, 0.4)),
                    "base": float(rng.poisson(3.0)),
                    "foreign": int(firm.foreign),
                    "soe": int(firm.soe),
                    "esg_e": round(
                        rng.normal(45.0, 5.0) if firm.greenwasher else rng.normal(70.0, 5.0), 4
                    ),
                }
            )
    return pd.DataFrame(rows)


def _write_lines(path: Path, lines: t.Iterable[str]) -> None:
    path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")


def _label_rows(labels: t.Mapping[str, int]) -> pd.DataFrame:
    rows = []
    for index, (item_id, label) in enumerate(sorted(labels.items())):
        rows.append({"item_id": item_id, "annotator_id": "a1", "label": label})
        rows.append({"item_id": item_id, "annotator_id": "a2", "label": label})
        if index < 3:
            rows.append({"item_id": item_id, "annotator_id": "a3", "label": 1 - label})
    return pd.DataFrame(rows)


def _layer_b_fixture(
    rng: np.random.Generator,
    pairs: t.Sequence[KeywordContextPair],
    labels: t.Mapping[str, int],
    control_error: float,
    context_corruption: float,
) -> t.Dict[str, str]:
    fixture = {}
    for pair in pairs:
        truth = labels[pair.pair_id]
        if rng.random() < control_error:
            fixture[pair.pair_id] = render_answer(1 - truth, 0.6)
        else:
            fixture[pair.pair_id] = render_answer(truth, 0.95)
        fixture[f"rag:{pair.pair_id}"] = render_answer(truth, 0.97)
        corrupted = rng.random() < context_corruption
        fixture[f"context:{pair.pair_id}"] = render_answer(1 - truth if corrupted else truth, 0.95)
    return fixture


def make_study(
    directory: PathLike,
    *,
    n_firms: int = 120,
    years: t.Sequence[int] = (2020, 2021, 2022, 2023),
    seed: int = 0,
    greenwasher_share: float = 0.3,
    effect: float = 1.0,
    missing_share: float = 0.03,
    control_error: float = 0.05,
    context_corruption: float = 0.1,
    replications: int = 200,
    max_inflight: int = 100,
) -> SyntheticStudy:
    """
    Write a synthetic study to `directory` and return its paths and ground truth.

    Args:
        directory: Target directory, created if needed.

    Keyword Arguments:
        n_firms: Firms of the study universe. Two excluded firms (one ST, one financial) are
            added on top.
        years: Report years.
        seed: Seed of the data generator and of the pipeline configuration.
        greenwasher_share: Probability that a firm is a greenwasher.
        effect: Log-rate increase of violations for greenwashers.
        missing_share: Share of reports without an environmental section.
        control_error: Share of control-arm verdicts the mock backend gets wrong, at low
            confidence.
        context_corruption: Share of context-arm verdicts the mock backend gets wrong at high
            confidence.
        replications: Placebo replications written to the configuration.
        max_inflight: Concurrency limit of the mock backends.
    """
    directory = Path(directory)
    reports_dir = directory / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(seed))
    years = sorted(years)

    firms = _firms(rng, n_firms, greenwasher_share, years[0])
    excluded = pd.DataFrame(
        {
            "firm_id": ["600900", "601900"],
            "industry_code": ["C26", "J66"],
            "status_labels": ["ST", ""],
            "is_financial": [False, True],
            "listing_year": [years[0] - 10, years[0] - 10],
        }
    )
    universe = firms[["firm_id", "industry_code", "listing_year"]].assign(
        status_labels="", is_financial=False
    )
    meta = pd.concat([universe, excluded], ignore_index=True)
    meta[["firm_id", "industry_code", "status_labels", "is_financial", "listing_year"]].to_csv(
        directory / "meta.csv", index=False
    )

    docs = []
    for firm in firms.itertuples(index=False):
        for year in years:
            text = _report(rng, int(firm.greenwasher), missing_share)
            (reports_dir / f"{firm.firm_id}_{year}.txt").write_text(text, encoding="utf-8")
            docs.append(ReportDocument(firm_id=firm.firm_id, year=year, full_text=text))
    for firm_id in excluded["firm_id"]:
        for year in years:
            text = PREAMBLE + SECTION_HEADER + "公司积极响应环境保护号召。" + CLOSING
            (reports_dir / f"{firm_id}_{year}.txt").write_text(text, encoding="utf-8")

    _write_lines(
        directory / "dictionary.txt",
        (f"{word} 1000 n" for word in (*GREEN_KEYWORDS, *FILLER_WORDS)),
    )
    _write_lines(directory / "stopwords.txt", STOPWORDS)

    panel = _panel(rng, firms, years, effect)
    panel[["firm_id", "year", "esg_e"]].to_csv(directory / "esg.csv", index=False)
    panel.drop(columns=["esg_e"]).to_csv(directory / "controls.csv", index=False)

    segmenter = Segmenter(
        SegmenterDictionary.load(directory / "dictionary.txt"),
        load_stopwords(directory / "stopwords.txt"),
    )
    sections = [extract_env_section(doc, segmenter=segmenter) for doc in docs]
    words = list(build_s1(sections, segmenter))
    pairs = build_s2(sections, GREEN_KEYWORDS, segmenter)
    word_labels = {word: int(word in GREEN_KEYWORDS) for word in words}
    pair_labels = {pair.pair_id: int(is_substantive(pair.plain_sentence)) for pair in pairs}
    _label_rows(word_labels).to_csv(directory / "labels_words.csv", index=False)
    _label_rows(pair_labels).to_csv(directory / "labels_pairs.csv", index=False)

    champion = {word: render_answer(1, 0.95) for word in words if word in GREEN_KEYWORDS}
    champion.update(_layer_b_fixture(rng, pairs, pair_labels, control_error, context_corruption))
    write_json(directory / "fixture_champion.json", champion)

    fillers = [word for word in words if word not in GREEN_KEYWORDS]
    weak = {word: render_answer(1, 0.9) for word in words if word in GREEN_KEYWORDS[2:]}
    weak.update({word: render_answer(1, 0.55) for word in fillers[:2]})
    write_json(directory / "fixture_weak.json", weak)

    snapshot = SnapshotStore(directory / "rag.sqlite")
    try:
        for sentence in sorted({pair.plain_sentence for pair in pairs}):
            passage = SUBSTANTIVE_PASSAGE if is_substantive(sentence) else SYMBOLIC_PASSAGE
            snapshot.put("synthetic", sentence, [passage])
    finally:
        snapshot.close()

    config_path = directory / "study.toml"
    config_path.write_text(
        CONFIG_TEMPLATE.format(
            seed=seed,
            first_year=years[0],
            last_year=years[-1],
            max_inflight=max_inflight,
            n_words=min(40, len(words)),
            n_pairs=min(200, len(pairs)),
            replications=replications,
        ),
        encoding="utf-8",
    )
    logger.info(
        "Wrote synthetic study with %d firms, %d words and %d pairs to %s",
        n_firms,
        len(words),
        len(pairs),
        directory,
    )
    return SyntheticStudy(
        directory=directory,
        config_path=config_path,
        firms=firms,
        words=words,
        pairs=pairs,
        pair_labels=pair_labels,
    )
