"""Layered span recognition: regex detectors, gazetteers, closed-class rules
and an optional external tagger sidecar, resolved into one annotation set.

Rules-only operation (no tagger configured) spawns no subprocess and opens no
network connection; degrading a tagger-enabled run to rules-only never happens
silently and must be requested via RecognizerConfig.fallback_rules_only.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .model import (
    SOURCE_CLOSED_CLASS,
    SOURCE_GAZETTEER,
    SOURCE_REGEX,
    SOURCE_TAGGER,
    AnnotatedDocument,
    Document,
    EntityLabel,
    Span,
    validate_annotations,
)
from .sidecar import SidecarUnavailable, TaggerClient
from .tokenize import Token, TokenKind, count_word_tokens, tokenize

DEFAULT_PRIORITY = (SOURCE_REGEX, SOURCE_TAGGER, SOURCE_GAZETTEER, SOURCE_CLOSED_CLASS)

ALL_DETECTORS = frozenset({"email", "phone", "date", "time", "address", "numeric"})

# Labels served by gazetteer files.
GAZETTEER_LABELS = (
    EntityLabel.PERSON_FIRSTNAME,
    EntityLabel.PERSON_LASTNAME,
    EntityLabel.LOCATION,
    EntityLabel.ORGANIZATION,
    EntityLabel.OCCUPATION,
)


class GazetteerFormatError(ValueError):
    pass


class EmptyDocument(ValueError):
    pass


@dataclass
class RecognizerConfig:
    """Knobs for the recogniser stack. Validate before use."""

    detectors: frozenset[str] = ALL_DETECTORS
    gazetteers: dict[EntityLabel, Path] = field(default_factory=dict)
    pronoun_terms: frozenset[str] | None = None  # None selects the bundled lexicon
    tagger_cmd: Sequence[str] | None = None
    tagger_timeout: float = 30.0  # seconds per batch
    tagger_batch_size: int = 32
    score_floor: dict[str, float] = field(default_factory=dict)
    priority: tuple[str, ...] = DEFAULT_PRIORITY
    fallback_rules_only: bool = False

    def validate(self) -> None:
        if sorted(self.priority) != sorted(DEFAULT_PRIORITY):
            raise ValueError(
                f"priority must be a permutation of {set(DEFAULT_PRIORITY)}, got {self.priority}"
            )
        for source, floor in self.score_floor.items():
            if not 0.0 <= floor <= 1.0:
                raise ValueError(f"score floor for {source} outside [0,1]: {floor}")
        unknown = self.detectors - ALL_DETECTORS
        if unknown:
            raise ValueError(f"unknown detectors: {sorted(unknown)}")


# ---------------------------------------------------------------------------
# Regex detectors
# ---------------------------------------------------------------------------

EMAIL_RE = re.compile(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)+")

# At least seven digits overall; separators limited so dates do not match.
# A trailing sentence period is fine; continuing digits or decimals are not.
PHONE_RE = re.compile(r"(?<![\w.])\+?\d[\d\s().-]{4,18}\d(?!\w)(?!\.\d)")

_MONTHS = (
    "January|February|March|April|May|June|July|August|September|October|November|December|"
    "Jan|Feb|Mar|Apr|Jun|Jul|Aug|Sep|Sept|Oct|Nov|Dec"
)
DATE_RES = (
    # 12/10/2021, 12.10.21, 2021-10-12
    re.compile(r"(?<![\w.])\d{1,4}([/.-])\d{1,2}\1\d{1,4}(?![/.-]?\d)"),
    # 15th April 1990, 12 October, April 1990, October 12, 2021
    re.compile(
        rf"\b(?:\d{{1,2}}(?:st|nd|rd|th)?\s+(?:of\s+)?)?(?:{_MONTHS})\b"
        rf"(?:\s+\d{{1,2}}(?:st|nd|rd|th)?\b(?!\d))?(?:,?\s+\d{{4}})?",
        re.IGNORECASE,
    ),
    # bare years
    re.compile(r"\b(?:1[89]\d{2}|20\d{2})\b(?![/.-]?\d)"),
    re.compile(r"\b(?:yesterday|today|tomorrow|tonight)\b", re.IGNORECASE),
)
TIME_RES = (
    re.compile(r"\b\d{1,2}:\d{2}(?::\d{2})?(?:\s*(?:[ap]m|[ap]\.m\.))?", re.IGNORECASE),
    re.compile(r"\b\d{1,2}\s*(?:[ap]m|[ap]\.m\.)(?!\w)", re.IGNORECASE),
    re.compile(r"\b(?:morning|afternoon|evening|midnight|noon)\b", re.IGNORECASE),
)

_STREET_WORDS = (
    "Road|Street|Lane|Avenue|Drive|Way|Boulevard|Court|Place|Square|Terrace|Close|"
    "Crescent|Hill|Park|Gardens|Grove|Row|Walk|Mews|Rd|St|Ave|Dr|Blvd"
)
# Heuristic: house number plus capitalised words ending in a street word.
ADDRESS_RE = re.compile(rf"\b\d+[A-Za-z]?\s+(?:[A-Z][\w'-]*\s+){{0,3}}(?:{_STREET_WORDS})\b")


def _min_digits(surface: str, k: int) -> bool:
    return sum(ch.isdecimal() for ch in surface) >= k


def _regex_spans(text: str, detectors: frozenset[str]) -> list[Span]:
    spans: list[Span] = []
    if "email" in detectors:
        for m in EMAIL_RE.finditer(text):
            spans.append(Span(m.start(), m.end(), EntityLabel.EMAIL_ADDRESS, 1.0, SOURCE_REGEX))
    date_matches: set[tuple[int, int]] = set()
    if "date" in detectors:
        for pattern in DATE_RES:
            for m in pattern.finditer(text):
                spans.append(Span(m.start(), m.end(), EntityLabel.DATE, 1.0, SOURCE_REGEX))
                date_matches.add((m.start(), m.end()))
    if "time" in detectors:
        for pattern in TIME_RES:
            for m in pattern.finditer(text):
                spans.append(Span(m.start(), m.end(), EntityLabel.TIME, 1.0, SOURCE_REGEX))
    if "phone" in detectors:
        for m in PHONE_RE.finditer(text):
            # A phone number needs real length and must not be a date shape.
            if _min_digits(m.group(), 7) and (m.start(), m.end()) not in date_matches:
                spans.append(Span(m.start(), m.end(), EntityLabel.PHONE_NUMBER, 1.0, SOURCE_REGEX))
    if "address" in detectors:
        for m in ADDRESS_RE.finditer(text):
            spans.append(Span(m.start(), m.end(), EntityLabel.ADDRESS, 1.0, SOURCE_REGEX))
    return spans


# ---------------------------------------------------------------------------
# Closed-class rules: pronouns and standalone numbers
# ---------------------------------------------------------------------------


def _load_bundled_terms(name: str) -> frozenset[str]:
    data = resources.files("textscrub.data").joinpath(name).read_text(encoding="utf-8")
    terms = set()
    for line in data.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            terms.add(line.casefold())
    return frozenset(terms)


def default_pronoun_terms() -> frozenset[str]:
    return _load_bundled_terms("pronouns_en.txt")


def _closed_class_spans(
    text: str,
    tokens: list[Token],
    pronouns: frozenset[str],
    numeric_enabled: bool,
) -> list[Span]:
    spans: list[Span] = []
    for token in tokens:
        if token.kind is TokenKind.WORD:
            if text[token.start : token.end].casefold() in pronouns:
                spans.append(
                    Span(token.start, token.end, EntityLabel.PRONOUN, 1.0, SOURCE_CLOSED_CLASS)
                )
        elif token.kind is TokenKind.NUMBER and numeric_enabled:
            spans.append(
                Span(token.start, token.end, EntityLabel.NUMERIC, 1.0, SOURCE_CLOSED_CLASS)
            )
    return spans


# ---------------------------------------------------------------------------
# Gazetteers
# ---------------------------------------------------------------------------


class Gazetteer:
    """Case-insensitive longest-match lookup over word-token sequences.

    Entries are matched on word boundaries; multi-word entries require the
    intervening original text to be whitespace only.
    """

    def __init__(self, label: EntityLabel, entries: Iterable[str]):
        self.label = label
        # first normalised token -> entry token tuples, longest first
        self._by_first: dict[str, list[tuple[str, ...]]] = {}
        for entry in entries:
            key = self._normalise(entry)
            if not key:
                raise GazetteerFormatError(f"gazetteer entry has no word tokens: {entry!r}")
            self._by_first.setdefault(key[0], []).append(key)
        for candidates in self._by_first.values():
            candidates.sort(key=len, reverse=True)

    @staticmethod
    def _normalise(entry: str) -> tuple[str, ...]:
        return tuple(
            entry[t.start : t.end].casefold()
            for t in tokenize(entry)
            if t.kind in (TokenKind.WORD, TokenKind.NUMBER)
        )

    @classmethod
    def load(cls, label: EntityLabel, path: str | Path) -> "Gazetteer":
        try:
            raw = Path(path).read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise GazetteerFormatError(f"{path}: not valid UTF-8: {exc}") from exc
        entries = []
        for line in raw.splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                entries.append(line)
        return cls(label, entries)

    def find(self, text: str, tokens: list[Token]) -> list[Span]:
        words = [t for t in tokens if t.kind in (TokenKind.WORD, TokenKind.NUMBER)]
        folded = [text[t.start : t.end].casefold() for t in words]
        spans: list[Span] = []
        for i, first in enumerate(folded):
            for entry in self._by_first.get(first, ()):
                if self._matches(entry, folded, words, text, i):
                    spans.append(
                        Span(words[i].start, words[i + len(entry) - 1].end,
                             self.label, 1.0, SOURCE_GAZETTEER)
                    )
                    break  # longest match at this start wins
        return spans

    @staticmethod
    def _matches(entry, folded, words, text, i) -> bool:
        if i + len(entry) > len(folded):
            return False
        for offset, part in enumerate(entry):
            if folded[i + offset] != part:
                return False
            if offset and not text[words[i + offset - 1].end : words[i + offset].start].isspace():
                return False
        return True


# ---------------------------------------------------------------------------
# Conflict resolution
# ---------------------------------------------------------------------------


def _resolution_key(priority: tuple[str, ...]):
    rank = {source: i for i, source in enumerate(priority)}
    fallback = len(priority)

    def key(span: Span):
        return (
            -span.length(),
            rank.get(span.source, fallback),
            -span.score,
            span.start,
            span.end,
            span.label.value,
        )

    return key


def resolve_spans(candidates: Iterable[Span], cfg: RecognizerConfig) -> list[Span]:
    """Reduce overlapping candidates to a non-overlapping set.

    Among overlapping candidates the winner is the longer span, then the
    higher-priority source, then the higher score, then the smaller start;
    losers are discarded entirely. The result is independent of input order.
    """
    kept: list[Span] = []
    for span in sorted(candidates, key=_resolution_key(cfg.priority)):
        if not any(span.overlaps(existing) for existing in kept):
            kept.append(span)
    kept.sort(key=lambda s: (s.start, s.end))
    return kept


# ---------------------------------------------------------------------------
# Recognizer
# ---------------------------------------------------------------------------


class Recognizer:
    """Loads gazetteers once and (optionally) owns a tagger sidecar."""

    def __init__(self, cfg: RecognizerConfig):
        cfg.validate()
        self.cfg = cfg
        self._gazetteers = [
            Gazetteer.load(label, path) for label, path in sorted(
                cfg.gazetteers.items(), key=lambda item: item[0].value
            )
        ]
        self._pronouns = (
            cfg.pronoun_terms if cfg.pronoun_terms is not None else default_pronoun_terms()
        )
        self._tagger: TaggerClient | None = None
        if cfg.tagger_cmd is not None:
            self._tagger = TaggerClient(cfg.tagger_cmd, timeout=cfg.tagger_timeout)

    def close(self) -> None:
        if self._tagger is not None:
            self._tagger.close()
            self._tagger = None

    def __enter__(self) -> "Recognizer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def _rule_candidates(self, text: str) -> list[Span]:
        tokens = tokenize(text)
        candidates = _regex_spans(text, self.cfg.detectors)
        candidates.extend(
            _closed_class_spans(text, tokens, self._pronouns, "numeric" in self.cfg.detectors)
        )
        for gazetteer in self._gazetteers:
            candidates.extend(gazetteer.find(text, tokens))
        return candidates

    def _apply_floor(self, spans: Iterable[Span]) -> list[Span]:
        floors = self.cfg.score_floor
        return [s for s in spans if s.score >= floors.get(s.source, 0.0)]

    def recognize(self, doc: Document) -> AnnotatedDocument:
        return self.recognize_all([doc])[0]

    def recognize_all(self, docs: Sequence[Document]) -> list[AnnotatedDocument]:
        tagged: list[list[Span]] = [[] for _ in docs]
        if self._tagger is not None:
            try:
                for offset in range(0, len(docs), self.cfg.tagger_batch_size):
                    batch = docs[offset : offset + self.cfg.tagger_batch_size]
                    for i, spans in enumerate(self._tagger.annotate(batch)):
                        tagged[offset + i] = spans
            except SidecarUnavailable:
                if not self.cfg.fallback_rules_only:
                    raise
                tagged = [[] for _ in docs]
        out = []
        for doc, tagger_spans in zip(docs, tagged):
            candidates = self._rule_candidates(doc.text) + tagger_spans
            resolved = resolve_spans(self._apply_floor(candidates), self.cfg)
            annotated = AnnotatedDocument(document=doc, spans=tuple(resolved))
            violations = validate_annotations(annotated)
            if violations:  # defensive: resolver output must always validate
                raise AssertionError(f"recognizer produced invalid spans: {violations[0]}")
            out.append(annotated)
        return out


def recognize(doc: Document, cfg: RecognizerConfig) -> AnnotatedDocument:
    """One-shot recognition; prefer a Recognizer instance for corpora."""
    with Recognizer(cfg) as recognizer:
        return recognizer.recognize(doc)


# ---------------------------------------------------------------------------
# Corpus statistics and sampling helpers
# ---------------------------------------------------------------------------


def compute_ne_ratio(doc: AnnotatedDocument) -> float:
    """Entity spans divided by word tokens, irrespective of span category."""
    words = count_word_tokens(doc.text)
    if words == 0:
        raise EmptyDocument(f"document {doc.id!r} has no word tokens")
    return len(doc.spans) / words


@dataclass(frozen=True)
class CorpusFilterRules:
    min_words: int = 20
    max_words: int | None = None  # drop documents longer than this
    truncate_words: int | None = 500  # cut documents at this word boundary
    max_ne_ratio: float | None = None  # keep documents strictly below


def _truncate(doc: AnnotatedDocument, limit: int) -> AnnotatedDocument:
    words = [t for t in tokenize(doc.text) if t.kind in (TokenKind.WORD, TokenKind.NUMBER)]
    if len(words) <= limit:
        return doc
    cut = words[limit - 1].end
    text = doc.text[:cut]
    spans = tuple(s for s in doc.spans if s.end <= cut)
    return AnnotatedDocument(document=Document(doc.id, text), spans=spans)


def filter_and_truncate_corpus(
    corpus: Iterable[AnnotatedDocument], rules: CorpusFilterRules
) -> list[AnnotatedDocument]:
    """Apply length and named-entity-ratio sampling rules to a corpus."""
    kept: list[AnnotatedDocument] = []
    for doc in corpus:
        words = count_word_tokens(doc.text)
        if rules.max_words is not None and words > rules.max_words:
            continue
        if rules.truncate_words is not None and words > rules.truncate_words:
            doc = _truncate(doc, rules.truncate_words)
            words = count_word_tokens(doc.text)
        if words < rules.min_words:
            continue
        if rules.max_ne_ratio is not None:
            if words == 0 or compute_ne_ratio(doc) >= rules.max_ne_ratio:
                continue
        kept.append(doc)
    return kept
