"""
Segment
-------

Dictionary-based tokenization with stopword filtering, and construction of the unique word
sequence (S1) and the keyword-context pairs (S2) fed to the two judgment layers.
"""

from dataclasses import dataclass, field
import logging
import os
from pathlib import Path
import re
import typing as t

import jieba

from .errors import DictionaryLoadError
from .text import DEFAULT_TERMINATORS, KEYWORD_MARK, is_punctuation, normalize_text, split_sentences
from .utils import (
    PathLike,
    read_json,
    read_jsonl,
    sha256_file,
    stable_hash,
    write_json,
    write_jsonl,
)


if t.TYPE_CHECKING:  # pragma: no cover
    from .corpus import EnvSection


logger = logging.getLogger(__name__)

Provenance = t.Tuple[str, int, int]

_BOOK_TITLE_RE = re.compile(r"《[^《》]*》")


@dataclass(frozen=True)
class StopwordList:
    """Exact-match stopword lookup on normalized tokens."""

    words: t.FrozenSet[str]
    source_id: str = "inline"

    def __post_init__(self):
        if not self.words:
            raise DictionaryLoadError(f"stopword list {self.source_id!r} is empty")

    def __contains__(self, token: object) -> bool:
        return token in self.words

    def __len__(self) -> int:
        return len(self.words)

    @classmethod
    def from_words(cls, words: t.Iterable[str], source_id: str = "inline") -> "StopwordList":
        normalized = (normalize_text(word) for word in words)
        return cls(frozenset(word for word in normalized if word), source_id)


def load_stopwords(path: PathLike) -> StopwordList:
    """Load a UTF-8 stopword file with one token per line."""
    try:
        with open(path, encoding="utf-8") as fp:
            lines = fp.read().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise DictionaryLoadError(f"cannot read stopword list {path}: {exc}") from exc
    return StopwordList.from_words(lines, source_id=Path(path).name)


@dataclass(frozen=True)
class SegmenterDictionary:
    """
    A segmenter dictionary file in jieba's ``word [freq [tag]]`` line format.

    The version is the file's content hash so that segmentation output can be tied to the exact
    dictionary it came from. A ``path`` of ``None`` selects jieba's bundled dictionary.
    """

    path: t.Optional[str] = None
    version: str = "jieba-default"

    @classmethod
    def load(cls, path: t.Optional[PathLike]) -> "SegmenterDictionary":
        if path is None:
            return cls()
        if not os.path.isfile(path):
            raise DictionaryLoadError(f"segmenter dictionary not found: {path}")
        return cls(path=os.path.abspath(path), version=sha256_file(path)[:16])


class Segmenter:
    """
    Sentence splitter and tokenizer bound to one dictionary and stopword list.

    Tokenization runs jieba with its HMM disabled so that the output depends only on the
    dictionary file. Punctuation and whitespace tokens are always discarded.

    Args:
        dictionary: Segmenter dictionary. Defaults to jieba's bundled dictionary.
        stopwords: Optional stopword list applied by :meth:`tokens`.

    Keyword Arguments:
        terminators: Characters that end a sentence.
        extra_words: Words forced to be kept whole by the tokenizer.
    """

    def __init__(
        self,
        dictionary: t.Optional[SegmenterDictionary] = None,
        stopwords: t.Optional[StopwordList] = None,
        *,
        terminators: str = DEFAULT_TERMINATORS,
        extra_words: t.Iterable[str] = (),
    ):
        self.dictionary = dictionary or SegmenterDictionary()
        self.stopwords = stopwords
        self.terminators = terminators
        self.extra_words = tuple(sorted(set(extra_words)))
        self._tokenizer: t.Optional[jieba.Tokenizer] = None

    @property
    def tokenizer(self) -> jieba.Tokenizer:
        """Return the lazily initialized jieba tokenizer."""
        if self._tokenizer is None:
            self._tokenizer = self._load_tokenizer()
        return self._tokenizer

    def _load_tokenizer(self) -> jieba.Tokenizer:
        if self.dictionary.path is None:
            tokenizer = jieba.Tokenizer()
        else:
            tokenizer = jieba.Tokenizer(dictionary=self.dictionary.path)
        try:
            tokenizer.initialize()
        except (OSError, ValueError) as exc:
            raise DictionaryLoadError(
                f"cannot load segmenter dictionary {self.dictionary.path}: {exc}"
            ) from exc
        for word in self.extra_words:
            tokenizer.add_word(word)
        logger.debug("Loaded segmenter dictionary %s", self.dictionary.version)
        return tokenizer

    def extended(self, words: t.Iterable[str]) -> "Segmenter":
        """Return a copy of this segmenter that keeps `words` whole."""
        return Segmenter(
            self.dictionary,
            self.stopwords,
            terminators=self.terminators,
            extra_words=(*self.extra_words, *words),
        )

    def sentences(self, text: str) -> t.List[str]:
        """Return normalized sentences of `text`."""
        return split_sentences(normalize_text(text), self.terminators)

    def spans(self, sentence: str) -> t.List[t.Tuple[str, int, int]]:
        """Return ``(token, start, end)`` for non-punctuation tokens of a normalized sentence."""
        if not sentence:
            return []
        return [
            (token, start, end)
            for token, start, end in self.tokenizer.tokenize(sentence, HMM=False)
            if not is_punctuation(token)
        ]

    def words(self, text: str) -> t.List[str]:
        """Return all non-punctuation tokens of `text`, stopwords included."""
        return [token for token, _, _ in self.spans(normalize_text(text))]

    def tokens(self, text: str) -> t.List[str]:
        """Return tokens of `text` with punctuation and stopwords removed."""
        words = self.words(text)
        if self.stopwords is None:
            return words
        return [word for word in words if word not in self.stopwords]

    def count(self, text: str) -> t.Tuple[int, int, int]:
        """Return ``(sentences, words, target_words)`` counts for `text`."""
        sentence_count = word_count = target_count = 0
        for sentence in self.sentences(text):
            sentence_count += 1
            words = [token for token, _, _ in self.spans(sentence)]
            word_count += len(words)
            if self.stopwords is None:
                target_count += len(words)
            else:
                target_count += sum(1 for word in words if word not in self.stopwords)
        return sentence_count, word_count, target_count


def tokenize(
    text: str, dictionary: SegmenterDictionary, stopwords: t.Optional[StopwordList] = None
) -> t.List[str]:
    """
    Return ordered tokens of `text` with punctuation and stopwords removed.

    Raises:
        DictionaryLoadError: If the dictionary cannot be loaded.
    """
    return Segmenter(dictionary, stopwords).tokens(text)


@dataclass
class UniqueWordSequence:
    """Corpus-global unique word sequence in first-occurrence order (S1)."""

    words: t.List[str] = field(default_factory=list)
    provenance: t.Dict[str, t.List[Provenance]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.words)

    def __iter__(self) -> t.Iterator[str]:
        return iter(self.words)

    def to_dict(self) -> t.Dict[str, t.Any]:
        return {
            "words": list(self.words),
            "provenance": {
                word: [list(entry) for entry in entries]
                for word, entries in self.provenance.items()
            },
        }

    @classmethod
    def from_dict(cls, data: t.Mapping[str, t.Any]) -> "UniqueWordSequence":
        return cls(
            words=list(data["words"]),
            provenance={
                word: [(str(f), int(y), int(i)) for f, y, i in entries]
                for word, entries in data["provenance"].items()
            },
        )


def build_s1(sections: t.Iterable["EnvSection"], segmenter: Segmenter) -> UniqueWordSequence:
    """
    Build the unique word sequence over all `sections`.

    Sections are visited in ``(firm_id, year)`` order and tokens in sentence order so the result
    does not depend on the order sections were produced in.
    """
    s1 = UniqueWordSequence()

    for section in sorted(sections, key=lambda sec: (sec.firm_id, sec.year)):
        for index, sentence in enumerate(segmenter.sentences(section.text)):
            for token in segmenter.tokens(sentence):
                entry = (section.firm_id, section.year, index)
                entries = s1.provenance.get(token)
                if entries is None:
                    s1.words.append(token)
                    s1.provenance[token] = [entry]
                elif entries[-1] != entry:
                    entries.append(entry)

    logger.info("Built S1 with %d unique words", len(s1.words))
    return s1


@dataclass(frozen=True)
class KeywordContextPair:
    """A dictionary keyword and the sentence it occurs in, marked as ``##keyword##``."""

    keyword: str
    sentence: str
    firm_id: str
    year: int
    sentence_index: int
    occurrence: int
    pair_id: str

    @property
    def plain_sentence(self) -> str:
        """Return the sentence with the keyword markers removed."""
        marked = f"{KEYWORD_MARK}{self.keyword}{KEYWORD_MARK}"
        return self.sentence.replace(marked, self.keyword, 1)

    def to_dict(self) -> t.Dict[str, t.Any]:
        return {
            "pair_id": self.pair_id,
            "keyword": self.keyword,
            "sentence": self.sentence,
            "firm_id": self.firm_id,
            "year": self.year,
            "sentence_index": self.sentence_index,
            "occurrence": self.occurrence,
        }

    @classmethod
    def from_dict(cls, data: t.Mapping[str, t.Any]) -> "KeywordContextPair":
        return cls(
            keyword=data["keyword"],
            sentence=data["sentence"],
            firm_id=str(data["firm_id"]),
            year=int(data["year"]),
            sentence_index=int(data["sentence_index"]),
            occurrence=int(data["occurrence"]),
            pair_id=data["pair_id"],
        )


def make_pair_id(
    firm_id: str, year: int, sentence_index: int, keyword: str, occurrence: int
) -> str:
    """Return the stable identifier of a keyword occurrence."""
    return stable_hash(firm_id, year, sentence_index, keyword, occurrence)


def mark_keyword(sentence: str, start: int, end: int) -> str:
    """
    Return `sentence` with the span ``[start, end)`` wrapped in keyword markers.

    >>> mark_keyword("公司推进绿色生产", 4, 8)
    '公司推进##绿色生产##'
    """
    return f"{sentence[:start]}{KEYWORD_MARK}{sentence[start:end]}{KEYWORD_MARK}{sentence[end:]}"


def build_s2(
    sections: t.Iterable["EnvSection"],
    dictionary: t.Iterable[str],
    segmenter: Segmenter,
) -> t.List[KeywordContextPair]:
    """
    Build one keyword-context pair per dictionary-keyword occurrence.

    Keywords are matched as whole tokens, and the segmenter is extended so that every dictionary
    word is kept whole. A sentence with ``k`` keyword occurrences yields ``k`` pairs, each marking
    only its own occurrence.

    Args:
        sections: Environmental sections to scan.
        dictionary: Green dictionary words (any iterable of words or a :class:`GreenDictionary`).
        segmenter: Segmenter used to split and tokenize sentences.
    """
    keywords = {normalize_text(word) for word in dictionary}
    keywords.discard("")
    pairs: t.List[KeywordContextPair] = []

    if not keywords:
        return pairs

    matcher = segmenter.extended(keywords)

    for section in sorted(sections, key=lambda sec: (sec.firm_id, sec.year)):
        for index, sentence in enumerate(matcher.sentences(section.text)):
            seen: t.Dict[str, int] = {}
            for token, start, end in matcher.spans(sentence):
                if token not in keywords:
                    continue
                occurrence = seen.get(token, 0)
                seen[token] = occurrence + 1
                pairs.append(
                    KeywordContextPair(
                        keyword=token,
                        sentence=mark_keyword(sentence, start, end),
                        firm_id=section.firm_id,
                        year=section.year,
                        sentence_index=index,
                        occurrence=occurrence,
                        pair_id=make_pair_id(
                            section.firm_id, section.year, index, token, occurrence
                        ),
                    )
                )

    logger.info("Built S2 with %d keyword-context pairs", len(pairs))
    return pairs


def diagnostic_category(pair: KeywordContextPair) -> str:
    """
    Return ``"a"`` when the keyword is wrapped in book-title marks, else ``"other"``.

    Used only to report the composition of a pair set, never to route judgments.
    """
    pos = pair.sentence.find(f"{KEYWORD_MARK}{pair.keyword}{KEYWORD_MARK}")
    if pos < 0:
        return "other"
    end = pos + len(pair.keyword)
    for match in _BOOK_TITLE_RE.finditer(pair.plain_sentence):
        if match.start() <= pos and end <= match.end():
            return "a"
    return "other"


def write_s1(path: PathLike, s1: UniqueWordSequence) -> None:
    write_json(path, s1.to_dict())


def read_s1(path: PathLike) -> UniqueWordSequence:
    return UniqueWordSequence.from_dict(read_json(path))


def write_s2(path: PathLike, pairs: t.Iterable[KeywordContextPair]) -> None:
    write_jsonl(path, (pair.to_dict() for pair in pairs))


def read_s2(path: PathLike) -> t.List[KeywordContextPair]:
    return [KeywordContextPair.from_dict(row) for row in read_jsonl(path)]
