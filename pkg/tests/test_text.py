import pytest

from greenlens.text import DEFAULT_TERMINATORS, is_punctuation, normalize_text, split_sentences


parametrize = pytest.mark.parametrize


@parametrize(
    "text, expected",
    [
        ("ＡＢＣ", "abc"),
        ("  公司\t推进\n\n绿色 ", "公司 推进 绿色"),
        ("###标记###", "#标记#"),
        ("ＥＳＧ报告", "esg报告"),
    ],
)
def test_normalize_text(text, expected):
    assert normalize_text(text) == expected


def test_normalize_text__is_idempotent():
    text = "ＥＳＧ　##绿色##  生产"
    assert normalize_text(normalize_text(text)) == normalize_text(text)


@parametrize(
    "text, expected",
    [
        ("甲。乙！丙", ["甲。", "乙！", "丙"]),
        ("甲；乙?丙!", ["甲；", "乙?", "丙!"]),
        ("比例为3.5吨。", ["比例为3.5吨。"]),
        ("end. next", ["end.", "next"]),
        ("done.", ["done."]),
        ("。。", ["。", "。"]),
        ("", []),
        ("   ", []),
    ],
)
def test_split_sentences(text, expected):
    assert split_sentences(text) == expected


def test_split_sentences__uses_given_terminators():
    assert split_sentences("甲，乙。丙", terminators="，") == ["甲，", "乙。丙"]


def test_default_terminators__cover_full_and_half_width():
    for char in "。！？；!?;":
        assert char in DEFAULT_TERMINATORS


@parametrize(
    "token, expected",
    [
        ("，", True),
        ("、", True),
        ("《", True),
        ("##", True),
        (" ", True),
        ("绿色", False),
        ("a1", False),
        ("3.5", False),
    ],
)
def test_is_punctuation(token, expected):
    assert is_punctuation(token) is expected
