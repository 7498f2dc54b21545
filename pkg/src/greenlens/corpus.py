"""
Corpus
------

Report ingestion, extraction of the environmental-information section, universe filters and
descriptive statistics.
"""

from dataclasses import asdict, dataclass
from functools import cached_property
import logging
from pathlib import Path
import re
import typing as t
import warnings

import numpy as np
import pandas as pd
from scipy import stats

from .errors import AmbiguousSectionWarning, MalformedDocument
from .segment import Segmenter
from .utils import PathLike, read_jsonl, write_jsonl


logger = logging.getLogger(__name__)

#: Status labels that exclude a firm from the universe.
EXCLUDED_STATUS = frozenset({"ST", "*ST", "PT"})

#: Column layout of descriptive statistics tables.
STATS_COLUMNS = ["Obvs", "Mean", "Std", "Min", "50%", "Max", "Skew", "Kurt"]

_CN_NUM = "一二三四五六七八九十"
_REPORT_NAME_RE = re.compile(r"^(?P<firm_id>[^_]+)_(?P<year>\d{4})$")


@dataclass(frozen=True)
class ReportDocument:
    """Full text of one firm-year annual report."""

    firm_id: str
    year: int
    full_text: str
    source_path: str = ""

    def __post_init__(self):
        if not self.firm_id:
            raise MalformedDocument(f"report {self.source_path!r} has an empty firm_id")
        if not self.full_text:
            raise MalformedDocument(f"report {self.firm_id}/{self.year} has no text")


@dataclass(frozen=True)
class FirmMeta:
    """Firm metadata used by the universe filters and indicator grouping."""

    firm_id: str
    industry_code: str
    status_labels: t.FrozenSet[str] = frozenset()
    is_financial: bool = False
    listing_year: t.Optional[int] = None


@dataclass(frozen=True)
class EnvSection:
    """
    Environmental-information section of one firm-year report.

    ``ambiguous`` is set when more than one disjoint span matched and the spans were joined.
    """

    firm_id: str
    year: int
    text: str = ""
    sentence_count: int = 0
    word_count: int = 0
    target_word_count: int = 0
    ambiguous: bool = False

    @property
    def is_empty(self) -> bool:
        return not self.text

    def to_dict(self) -> t.Dict[str, t.Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: t.Mapping[str, t.Any]) -> "EnvSection":
        return cls(
            firm_id=str(data["firm_id"]),
            year=int(data["year"]),
            text=data.get("text", ""),
            sentence_count=int(data.get("sentence_count", 0)),
            word_count=int(data.get("word_count", 0)),
            target_word_count=int(data.get("target_word_count", 0)),
            ambiguous=bool(data.get("ambiguous", False)),
        )


@dataclass(frozen=True)
class SectionPatternSet:
    """
    Ordered start and end markers of the environmental-information subsection.

    Patterns are regular expressions matched with :data:`flags`. The defaults follow the post-2021
    Chinese annual-report layout where the subsection sits under the environment and social
    responsibility chapter.
    """

    start: t.Tuple[str, ...] = (
        rf"[{_CN_NUM}]+\s*[、.]\s*(?:重大)?环境信息(?:情况)?",
        r"^\s*环境信息情况",
        r"^\s*environmental information\b",
    )
    end: t.Tuple[str, ...] = (
        rf"[{_CN_NUM}]+\s*[、.]\s*(?:履行)?社会责任",
        rf"[{_CN_NUM}]+\s*[、.]\s*巩固拓展脱贫攻坚",
        rf"第[{_CN_NUM}]+节",
        r"^\s*social responsibility\b",
    )
    flags: int = re.MULTILINE | re.IGNORECASE

    def __post_init__(self):
        if not self.start or not self.end:
            raise ValueError("section patterns need at least one start and one end marker")

    @cached_property
    def start_re(self) -> t.Pattern:
        return _alternation(self.start, self.flags)

    @cached_property
    def end_re(self) -> t.Pattern:
        return _alternation(self.end, self.flags)

    @classmethod
    def from_dict(cls, data: t.Mapping[str, t.Any]) -> "SectionPatternSet":
        defaults = cls()
        return cls(
            start=tuple(data.get("start", defaults.start)),
            end=tuple(data.get("end", defaults.end)),
        )


def _alternation(patterns: t.Sequence[str], flags: int) -> t.Pattern:
    return re.compile("|".join(f"(?:{pattern})" for pattern in patterns), flags)


_default_segmenter: t.Optional[Segmenter] = None


def _get_default_segmenter() -> Segmenter:
    global _default_segmenter
    if _default_segmenter is None:
        _default_segmenter = Segmenter()
    return _default_segmenter


def _check_decodable(doc: ReportDocument) -> None:
    try:
        doc.full_text.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise MalformedDocument(
            f"report {doc.firm_id}/{doc.year} holds undecodable text at offset {exc.start}"
        ) from exc


def find_env_spans(text: str, patterns: SectionPatternSet) -> t.List[t.Tuple[int, int]]:
    """
    Return ``(start, end)`` offsets of disjoint environmental spans in document order.

    A span starts at a start-marker match and runs up to, but excluding, the next end-marker
    match. Without a following end marker the span runs to the end of the text. Start markers
    inside an earlier span belong to that span.
    """
    spans = []
    pos = 0

    while pos < len(text):
        start_match = patterns.start_re.search(text, pos)
        if start_match is None:
            break
        end_match = patterns.end_re.search(text, start_match.end())
        end = end_match.start() if end_match else len(text)
        spans.append((start_match.start(), end))
        pos = max(end, start_match.end())

    return spans


def extract_env_section(
    doc: ReportDocument,
    patterns: t.Optional[SectionPatternSet] = None,
    *,
    segmenter: t.Optional[Segmenter] = None,
) -> EnvSection:
    """
    Extract the environmental-information section of a report.

    The extracted text keeps its start header and drops the end header, so extracting again from
    the extracted text yields the same text. When several disjoint spans match they are joined
    with a newline in document order, the section is flagged ``ambiguous`` and an
    :class:`.AmbiguousSectionWarning` is emitted.

    Args:
        doc: Report to extract from.
        patterns: Start and end markers. Defaults to :class:`SectionPatternSet`.

    Keyword Arguments:
        segmenter: Segmenter used for the sentence and word counts. Defaults to one built on
            jieba's bundled dictionary without stopwords.

    Raises:
        MalformedDocument: If the text holds undecodable characters.
    """
    _check_decodable(doc)

    if patterns is None:
        patterns = SectionPatternSet()

    spans = find_env_spans(doc.full_text, patterns)
    if not spans:
        return EnvSection(firm_id=doc.firm_id, year=doc.year)

    parts = [doc.full_text[start:end].strip() for start, end in spans]
    text = "\n".join(part for part in parts if part)
    ambiguous = len(spans) > 1

    if ambiguous:
        message = f"report {doc.firm_id}/{doc.year} has {len(spans)} environmental spans"
        logger.warning(message)
        warnings.warn(message, AmbiguousSectionWarning, stacklevel=2)

    if segmenter is None:
        segmenter = _get_default_segmenter()

    sentences, words, targets = segmenter.count(text)
    return EnvSection(
        firm_id=doc.firm_id,
        year=doc.year,
        text=text,
        sentence_count=sentences,
        word_count=words,
        target_word_count=targets,
        ambiguous=ambiguous,
    )


def filter_universe(meta: FirmMeta) -> bool:
    """
    Return whether a firm belongs to the study universe.

    A firm is excluded when it carries any ST, \\*ST or PT label, or when it is a financial firm.

    >>> filter_universe(FirmMeta("000001", "C26"))
    True
    >>> filter_universe(FirmMeta("000002", "C26", frozenset({"ST"})))
    False
    """
    return not (meta.status_labels & EXCLUDED_STATUS) and not meta.is_financial


def describe(frame: pd.DataFrame, columns: t.Mapping[str, str]) -> pd.DataFrame:
    """
    Return a descriptive statistics table with one row per column of `frame`.

    Standard deviations use ``ddof=1`` (``0`` for a single observation). Skewness and kurtosis are
    the biased moment estimators, kurtosis in excess form, and both are ``0`` for a constant
    column.

    Args:
        frame: Data to describe.
        columns: Mapping of frame column to table row label, in table order.
    """
    rows = []

    for column, label in columns.items():
        values = pd.to_numeric(frame[column], errors="coerce").dropna().to_numpy(dtype=float)
        n = values.size
        if n == 0:
            rows.append([0] + [np.nan] * (len(STATS_COLUMNS) - 1))
            continue

        mean = values.sum() / n
        std = float(np.sqrt(((values - mean) ** 2).sum() / (n - 1))) if n > 1 else 0.0
        if np.ptp(values) == 0:
            skew = kurt = 0.0
        else:
            skew = float(stats.skew(values, bias=True))
            kurt = float(stats.kurtosis(values, fisher=True, bias=True))
        rows.append(
            [n, mean, std, values.min(), float(np.median(values)), values.max(), skew, kurt]
        )

    table = pd.DataFrame(rows, index=list(columns.values()), columns=STATS_COLUMNS)
    table["Obvs"] = table["Obvs"].astype(int)
    return table


def corpus_stats(sections: t.Sequence[EnvSection]) -> pd.DataFrame:
    """Return the dataset overview table for sentence, word and target-word counts."""
    if not sections:
        raise ValueError("corpus_stats requires at least one section")
    frame = pd.DataFrame([section.to_dict() for section in sections])
    return describe(
        frame,
        {
            "sentence_count": "Sentences",
            "word_count": "Words",
            "target_word_count": "Target Words",
        },
    )


def decode_report(data: bytes, encodings: t.Sequence[str], source: str = "") -> str:
    """
    Decode report bytes with the first encoding that succeeds.

    Raises:
        MalformedDocument: If no encoding can decode the bytes.
    """
    for encoding in encodings:
        try:
            return data.decode(encoding)
        except UnicodeDecodeError:
            continue
    raise MalformedDocument(f"cannot decode {source or 'report'} with {', '.join(encodings)}")


def load_reports(
    paths: t.Iterable[PathLike],
    *,
    year_range: t.Optional[t.Tuple[int, int]] = None,
    encodings: t.Sequence[str] = ("utf-8-sig", "gb18030"),
) -> t.List[ReportDocument]:
    """
    Load reports from plain-text files named ``<firm_id>_<year>.txt`` or JSON-lines files holding
    ``{"firm_id", "year", "text"}`` objects. Directories are expanded to their ``.txt`` and
    ``.jsonl`` files.

    Reports outside `year_range` (inclusive) are skipped.
    """
    docs: t.List[ReportDocument] = []

    for path in _expand_paths(paths):
        if path.suffix == ".jsonl":
            for row in read_jsonl(path):
                docs.append(
                    ReportDocument(
                        firm_id=str(row["firm_id"]),
                        year=int(row["year"]),
                        full_text=row["text"],
                        source_path=str(path),
                    )
                )
            continue

        match = _REPORT_NAME_RE.match(path.stem)
        if match is None:
            raise MalformedDocument(f"report file name must be <firm_id>_<year>.txt: {path}")
        text = decode_report(path.read_bytes(), encodings, str(path))
        docs.append(
            ReportDocument(
                firm_id=match["firm_id"],
                year=int(match["year"]),
                full_text=text,
                source_path=str(path),
            )
        )

    if year_range is not None:
        low, high = year_range
        docs = [doc for doc in docs if low <= doc.year <= high]

    docs.sort(key=lambda doc: (doc.firm_id, doc.year))
    logger.info("Loaded %d reports", len(docs))
    return docs


def _expand_paths(paths: t.Iterable[PathLike]) -> t.List[Path]:
    expanded = []
    for path in map(Path, paths):
        if path.is_dir():
            expanded.extend(sorted(p for p in path.iterdir() if p.suffix in (".txt", ".jsonl")))
        else:
            expanded.append(path)
    return expanded


def _parse_labels(value: t.Any) -> t.FrozenSet[str]:
    if not isinstance(value, str):
        return frozenset()
    return frozenset(label.strip() for label in re.split(r"[;|]", value) if label.strip())


def _parse_bool(value: t.Any) -> bool:
    return str(value).strip().lower() in ("1", "true", "yes", "y", "t")


def load_meta(path: PathLike) -> t.Dict[str, FirmMeta]:
    """
    Load firm metadata from CSV with columns ``firm_id, industry_code, status_labels,
    is_financial, listing_year`` (an optional ``year`` column is ignored).
    """
    frame = pd.read_csv(path, dtype={"firm_id": str, "industry_code": str}, keep_default_na=False)
    meta = {}
    for row in frame.itertuples(index=False):
        listing_year = getattr(row, "listing_year", "")
        meta[row.firm_id] = FirmMeta(
            firm_id=row.firm_id,
            industry_code=row.industry_code,
            status_labels=_parse_labels(getattr(row, "status_labels", "")),
            is_financial=_parse_bool(getattr(row, "is_financial", False)),
            listing_year=int(listing_year) if str(listing_year).strip() else None,
        )
    return meta


def write_sections(path: PathLike, sections: t.Iterable[EnvSection]) -> None:
    write_jsonl(path, (section.to_dict() for section in sections))


def read_sections(path: PathLike) -> t.List[EnvSection]:
    return [EnvSection.from_dict(row) for row in read_jsonl(path)]
