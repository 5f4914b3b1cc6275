"""Core document, span and label vocabulary shared by every module.

All types are immutable values and safe to share across threads. Character
offsets are Unicode scalar-value indices into the document text, never bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, TextIO


class EntityLabel(str, Enum):
    """Annotation scheme labels plus the two engine-derived labels.

    PRONOUN and NUMERIC are produced by closed-class rules inside the engine;
    they never appear in gold corpora or tagger responses.
    """

    PERSON_FIRSTNAME = "PERSON_FIRSTNAME"
    PERSON_LASTNAME = "PERSON_LASTNAME"
    OCCUPATION = "OCCUPATION"
    LOCATION = "LOCATION"
    TIME = "TIME"
    ORGANIZATION = "ORGANIZATION"
    DATE = "DATE"
    ADDRESS = "ADDRESS"
    PHONE_NUMBER = "PHONE_NUMBER"
    EMAIL_ADDRESS = "EMAIL_ADDRESS"
    OTHER_IDENTIFYING_ATTRIBUTE = "OTHER_IDENTIFYING_ATTRIBUTE"
    NONE = "NONE"
    PRONOUN = "PRONOUN"
    NUMERIC = "NUMERIC"


# The 12 labels a gold corpus or tagger sidecar may use.
ANNOTATION_LABELS = frozenset(
    label for label in EntityLabel if label not in (EntityLabel.PRONOUN, EntityLabel.NUMERIC)
)

# Labels that may appear on an emitted span (everything except NONE).
SPAN_LABELS = frozenset(label for label in EntityLabel if label is not EntityLabel.NONE)

# Span provenance values understood by the conflict resolver.
SOURCE_REGEX = "regex"
SOURCE_GAZETTEER = "gazetteer"
SOURCE_TAGGER = "tagger"
SOURCE_CLOSED_CLASS = "closed-class"
SOURCE_GOLD = "gold"


@dataclass(frozen=True, slots=True)
class Document:
    id: str
    text: str


@dataclass(frozen=True, slots=True)
class Span:
    """A labelled character range. start inclusive, end exclusive."""

    start: int
    end: int
    label: EntityLabel
    score: float = 1.0
    source: str = SOURCE_GOLD

    def length(self) -> int:
        return self.end - self.start

    def overlaps(self, other: "Span") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True, slots=True)
class AnnotatedDocument:
    document: Document
    spans: tuple[Span, ...] = ()

    @property
    def id(self) -> str:
        return self.document.id

    @property
    def text(self) -> str:
        return self.document.text

    def surface(self, span: Span) -> str:
        return self.document.text[span.start : span.end]


@dataclass(frozen=True, slots=True)
class Violation:
    """One broken annotation invariant, reported with offsets."""

    kind: str  # overlap | out-of-range | none-label | unordered | bad-score
    start: int
    end: int
    message: str


def validate_annotations(doc: AnnotatedDocument) -> list[Violation]:
    """Return every invariant violation in doc; the document is valid iff empty.

    Violations are data, not failures: callers decide whether to reject.
    """
    violations: list[Violation] = []
    n = len(doc.text)
    for span in doc.spans:
        if not (0 <= span.start < span.end <= n):
            violations.append(
                Violation("out-of-range", span.start, span.end,
                          f"span [{span.start},{span.end}) outside text of length {n}")
            )
        if span.label is EntityLabel.NONE:
            violations.append(
                Violation("none-label", span.start, span.end,
                          f"NONE span emitted at [{span.start},{span.end})")
            )
        if not (0.0 <= span.score <= 1.0):
            violations.append(
                Violation("bad-score", span.start, span.end,
                          f"score {span.score!r} outside [0,1]")
            )
    for prev, cur in zip(doc.spans, doc.spans[1:]):
        if cur.start < prev.start:
            violations.append(
                Violation("unordered", cur.start, cur.end,
                          f"span at {cur.start} appears after span at {prev.start}")
            )
    ordered = sorted(doc.spans, key=lambda s: (s.start, s.end))
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start < prev.end:
            violations.append(
                Violation("overlap", cur.start, min(prev.end, cur.end),
                          f"overlap at {cur.start} between [{prev.start},{prev.end}) "
                          f"and [{cur.start},{cur.end})")
            )
    return violations


def canonical_surface(surface: str, case_sensitive: bool = False) -> str:
    """Normalise a surface form for consistency matching.

    Internal whitespace runs collapse to a single space; matching is
    case-folded unless case_sensitive is set.
    """
    collapsed = " ".join(surface.split())
    return collapsed if case_sensitive else collapsed.casefold()


@dataclass(frozen=True, slots=True)
class MapOccurrence:
    """One original span behind a replacement, with its exact surface."""

    start: int
    end: int
    surface: str


@dataclass(frozen=True, slots=True)
class MapEntry:
    label: EntityLabel
    index: int
    surface: str  # representative (first seen) surface form
    occurrences: tuple[MapOccurrence, ...]


@dataclass(frozen=True, slots=True)
class ReplacementMap:
    """Per-document bijection from (label, index) to surface forms."""

    entries: tuple[MapEntry, ...] = ()

    def lookup(self, label: EntityLabel, index: int) -> MapEntry | None:
        for entry in self.entries:
            if entry.label is label and entry.index == index:
                return entry
        return None

    def labels(self) -> set[EntityLabel]:
        return {entry.label for entry in self.entries}


# ---------------------------------------------------------------------------
# Standoff annotation format: one JSON record per line, UTF-8.
# {"id": ..., "text": ..., "spans": [{"start", "end", "label", "score", "source"}]}
# ---------------------------------------------------------------------------


class StandoffFormatError(ValueError):
    pass


def annotated_to_record(doc: AnnotatedDocument) -> dict:
    return {
        "id": doc.id,
        "text": doc.text,
        "spans": [
            {
                "start": s.start,
                "end": s.end,
                "label": s.label.value,
                "score": s.score,
                "source": s.source,
            }
            for s in doc.spans
        ],
    }


def annotated_from_record(record: dict) -> AnnotatedDocument:
    try:
        doc = Document(id=str(record["id"]), text=record["text"])
        spans = tuple(
            Span(
                start=int(s["start"]),
                end=int(s["end"]),
                label=EntityLabel(s["label"]),
                score=float(s.get("score", 1.0)),
                source=str(s.get("source", SOURCE_GOLD)),
            )
            for s in record.get("spans", [])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise StandoffFormatError(f"bad standoff record: {exc}") from exc
    if not isinstance(doc.text, str):
        raise StandoffFormatError("text field must be a string")
    return AnnotatedDocument(document=doc, spans=spans)


def write_standoff(docs: Iterable[AnnotatedDocument], fp: TextIO) -> None:
    for doc in docs:
        fp.write(json.dumps(annotated_to_record(doc), ensure_ascii=False))
        fp.write("\n")


def read_standoff(fp: TextIO) -> Iterator[AnnotatedDocument]:
    for lineno, line in enumerate(fp, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StandoffFormatError(f"line {lineno}: invalid JSON: {exc}") from exc
        yield annotated_from_record(record)


def load_standoff(path: str | Path) -> list[AnnotatedDocument]:
    with open(path, encoding="utf-8") as fp:
        return list(read_standoff(fp))


def save_standoff(docs: Iterable[AnnotatedDocument], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        write_standoff(docs, fp)
