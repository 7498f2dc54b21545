"""
Text
----

Normalization and sentence splitting shared by the corpus and segment modules.
"""

import re
import typing as t
import unicodedata


#: Sentence terminators used when none are configured.
DEFAULT_TERMINATORS = "。！？；!?;"

#: Marker placed on both sides of a keyword inside a keyword-context sentence.
KEYWORD_MARK = "##"

_WHITESPACE_RE = re.compile(r"\s+")
_MARK_RUN_RE = re.compile(r"#{2,}")


def normalize_text(text: str) -> str:
    """
    Return `text` in the canonical form used before segmentation.

    Applies NFKC (full-width to half-width), collapses whitespace runs to a single space,
    case-folds Latin letters and collapses runs of ``#`` so that source text can never contain
    the keyword marker.

    >>> normalize_text("ＥＳＧ　报告  ##X##")
    'esg 报告 #x#'
    """
    text = unicodedata.normalize("NFKC", text)
    text = _MARK_RUN_RE.sub("#", text)
    text = _WHITESPACE_RE.sub(" ", text).strip()
    return text.casefold()


def split_sentences(text: str, terminators: str = DEFAULT_TERMINATORS) -> t.List[str]:
    """
    Split `text` into sentences, keeping each sentence's terminator.

    A period only ends a sentence when it is followed by whitespace or the end of the text so that
    decimals and abbreviations stay intact.

    >>> split_sentences("公司减排。 废水达标! 比例 3.5 吨")
    ['公司减排。', '废水达标!', '比例 3.5 吨']
    """
    sentences = []
    buf: t.List[str] = []
    last = len(text) - 1

    for i, char in enumerate(text):
        buf.append(char)
        ends = char in terminators or (char == "." and (i == last or text[i + 1].isspace()))
        if ends:
            sentence = "".join(buf).strip()
            if sentence:
                sentences.append(sentence)
            buf = []

    tail = "".join(buf).strip()
    if tail:
        sentences.append(tail)

    return sentences


def is_punctuation(token: str) -> bool:
    """
    Return whether `token` consists only of punctuation, symbols or whitespace.

    >>> is_punctuation("，")
    True
    >>> is_punctuation("废水")
    False
    """
    return all(unicodedata.category(char)[0] in "PSZ" or char.isspace() for char in token)
