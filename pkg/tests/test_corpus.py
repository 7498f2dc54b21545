import json

import numpy as np
import pandas as pd
import pytest

from greenlens.corpus import (
    EnvSection,
    FirmMeta,
    ReportDocument,
    SectionPatternSet,
    corpus_stats,
    decode_report,
    describe,
    extract_env_section,
    filter_universe,
    find_env_spans,
    load_meta,
    load_reports,
    read_sections,
    write_sections,
)
from greenlens.errors import AmbiguousSectionWarning, MalformedDocument


parametrize = pytest.mark.parametrize


REPORT = (
    "第五节 环境和社会责任\n"
    "九、其他\n无。\n"
    "十、环境信息情况\n公司推进绿色生产。完成改造项目。\n"
    "十一、社会责任工作情况\n公司积极捐赠。\n"
    "第六节 重要事项\n"
)


def doc(text: str, firm_id: str = "000001", year: int = 2022) -> ReportDocument:
    return ReportDocument(firm_id=firm_id, year=year, full_text=text)


def test_report_document__rejects_empty_fields():
    with pytest.raises(MalformedDocument):
        ReportDocument(firm_id="", year=2022, full_text="x")

    with pytest.raises(MalformedDocument):
        ReportDocument(firm_id="000001", year=2022, full_text="")


def test_extract_env_section__keeps_start_header_and_drops_end_header(segmenter):
    env = extract_env_section(doc(REPORT), segmenter=segmenter)

    assert env.text == "十、环境信息情况\n公司推进绿色生产。完成改造项目。"
    assert not env.ambiguous
    assert env.firm_id == "000001"
    assert env.year == 2022


def test_extract_env_section__counts(segmenter):
    text = "十、环境信息情况\n公司推进绿色生产。"
    env = extract_env_section(doc(text), segmenter=segmenter)
    sentences, words, targets = segmenter.count(env.text)

    assert (env.sentence_count, env.word_count, env.target_word_count) == (
        sentences,
        words,
        targets,
    )
    assert env.sentence_count == 1


def test_extract_env_section__is_idempotent(segmenter):
    once = extract_env_section(doc(REPORT), segmenter=segmenter)
    twice = extract_env_section(doc(once.text), segmenter=segmenter)
    assert twice == once


def test_extract_env_section__without_section(segmenter):
    text = "第一节 重要提示\n公司经营正常。"
    env = extract_env_section(doc(text), segmenter=segmenter)

    assert env.is_empty
    assert env.text == ""
    assert (env.sentence_count, env.word_count, env.target_word_count) == (0, 0, 0)


def test_extract_env_section__joins_ambiguous_spans(segmenter):
    text = (
        "十、环境信息情况\n甲。\n"
        "十一、社会责任\n乙。\n"
        "五、重大环境信息\n丙。\n"
        "第六节 其他\n"
    )

    with pytest.warns(AmbiguousSectionWarning):
        env = extract_env_section(doc(text), segmenter=segmenter)

    assert env.ambiguous
    assert env.text == "十、环境信息情况\n甲。\n五、重大环境信息\n丙。"


def test_extract_env_section__runs_to_end_without_end_marker(segmenter):
    text = "前言\n十、环境信息情况\n公司推进绿色生产。"
    env = extract_env_section(doc(text), segmenter=segmenter)
    assert env.text == "十、环境信息情况\n公司推进绿色生产。"


def test_extract_env_section__rejects_undecodable_text(segmenter):
    with pytest.raises(MalformedDocument):
        extract_env_section(doc("十、环境信息情况\n\udc80"), segmenter=segmenter)


def test_extract_env_section__custom_patterns(segmenter):
    patterns = SectionPatternSet(start=(r"^ENV$",), end=(r"^END$",))
    text = "x\nENV\n公司推进绿色生产。\nEND\ny"
    env = extract_env_section(doc(text), patterns, segmenter=segmenter)
    assert env.text == "ENV\n公司推进绿色生产。"


def test_section_pattern_set__requires_markers():
    with pytest.raises(ValueError):
        SectionPatternSet(start=())


def test_section_pattern_set__from_dict_keeps_defaults():
    patterns = SectionPatternSet.from_dict({"start": [r"^ENV"]})
    assert patterns.start == (r"^ENV",)
    assert patterns.end == SectionPatternSet().end


def test_find_env_spans__offsets():
    text = "abc\n十、环境信息\nxyz\n十一、社会责任\n"
    spans = find_env_spans(text, SectionPatternSet())
    assert spans == [(4, text.index("十一"))]


@parametrize(
    "meta, expected",
    [
        (FirmMeta("000001", "C26"), True),
        (FirmMeta("000001", "C26", frozenset({"ST"})), False),
        (FirmMeta("000001", "C26", frozenset({"*ST"})), False),
        (FirmMeta("000001", "C26", frozenset({"PT"})), False),
        (FirmMeta("000001", "C26", frozenset({"other"})), True),
        (FirmMeta("000001", "J66", is_financial=True), False),
    ],
)
def test_filter_universe(meta, expected):
    assert filter_universe(meta) is expected


def test_describe():
    frame = pd.DataFrame({"a": [1.0, 2.0, 3.0, 4.0], "b": [5.0, 5.0, 5.0, 5.0]})

    table = describe(frame, {"a": "A", "b": "B"})

    assert list(table.columns) == ["Obvs", "Mean", "Std", "Min", "50%", "Max", "Skew", "Kurt"]
    assert list(table.index) == ["A", "B"]
    row = table.loc["A"]
    assert row["Obvs"] == 4
    assert row["Mean"] == pytest.approx(2.5)
    assert row["Std"] == pytest.approx(np.std([1, 2, 3, 4], ddof=1))
    assert row["50%"] == pytest.approx(2.5)
    assert row["Skew"] == pytest.approx(0.0)
    assert row["Kurt"] == pytest.approx(-1.36)
    assert table.loc["B", "Std"] == 0
    assert table.loc["B", "Skew"] == 0
    assert table.loc["B", "Kurt"] == 0


def test_describe__single_observation():
    table = describe(pd.DataFrame({"a": [3.0]}), {"a": "A"})
    assert table.loc["A", "Obvs"] == 1
    assert table.loc["A", "Std"] == 0


def test_corpus_stats():
    sections = [
        EnvSection("000001", 2022, "x", sentence_count=2, word_count=10, target_word_count=6),
        EnvSection("000002", 2022, "y", sentence_count=4, word_count=20, target_word_count=8),
    ]

    table = corpus_stats(sections)

    assert list(table.index) == ["Sentences", "Words", "Target Words"]
    assert table.loc["Words", "Mean"] == pytest.approx(15.0)
    assert table.loc["Target Words", "Max"] == 8


def test_corpus_stats__rejects_empty_corpus():
    with pytest.raises(ValueError):
        corpus_stats([])


def test_decode_report__falls_back_to_gb18030():
    assert decode_report("环境".encode("gb18030"), ("utf-8-sig", "gb18030")) == "环境"


def test_decode_report__undecodable_bytes():
    with pytest.raises(MalformedDocument):
        decode_report(b"\xff\xfe\xfa", ("utf-8",))


def test_load_reports(tmp_path):
    (tmp_path / "000002_2021.txt").write_text("乙", encoding="utf-8")
    (tmp_path / "000001_2022.txt").write_bytes("甲".encode("gb18030"))
    (tmp_path / "000003_2019.txt").write_text("丙", encoding="utf-8")
    rows = [{"firm_id": "000001", "year": 2021, "text": "丁"}]
    (tmp_path / "more.jsonl").write_text(
        "\n".join(json.dumps(row, ensure_ascii=False) for row in rows), encoding="utf-8"
    )
    (tmp_path / "notes.md").write_text("ignored", encoding="utf-8")

    docs = load_reports([tmp_path], year_range=(2020, 2022))

    assert [(d.firm_id, d.year, d.full_text) for d in docs] == [
        ("000001", 2021, "丁"),
        ("000001", 2022, "甲"),
        ("000002", 2021, "乙"),
    ]


def test_load_reports__rejects_bad_file_names(tmp_path):
    path = tmp_path / "report.txt"
    path.write_text("x", encoding="utf-8")

    with pytest.raises(MalformedDocument):
        load_reports([path])


def test_load_meta(tmp_path):
    path = tmp_path / "meta.csv"
    path.write_text(
        "firm_id,industry_code,status_labels,is_financial,listing_year\n"
        "000001,C26,,0,2001\n"
        "000002,J66,ST;PT,1,\n",
        encoding="utf-8",
    )

    meta = load_meta(path)

    assert meta["000001"] == FirmMeta("000001", "C26", frozenset(), False, 2001)
    assert meta["000002"].status_labels == frozenset({"ST", "PT"})
    assert meta["000002"].is_financial
    assert meta["000002"].listing_year is None


def test_sections__file_round_trip(tmp_path):
    sections = [EnvSection("000001", 2022, "甲。", 1, 1, 1, True), EnvSection("000002", 2021)]
    write_sections(tmp_path / "sections.jsonl", sections)
    assert read_sections(tmp_path / "sections.jsonl") == sections
