"""Rewrite documents by replacing recognised spans with mode-dependent
substitutes, keeping per-document consistent indices, and emit the
replacement map that makes tagging-mode output reversible.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

from .model import (
    AnnotatedDocument,
    Document,
    EntityLabel,
    MapEntry,
    MapOccurrence,
    ReplacementMap,
    Violation,
    canonical_surface,
    validate_annotations,
)

SUPPRESSION_TOKEN = "XXX"


class Mode(str, Enum):
    TAGGING = "tagging"
    SUPPRESSION = "suppression"
    RANDOM_SUBSTITUTION = "random-substitution"


class PlaceholderStyle(str, Enum):
    BRACKETED = "bracketed"  # [location1]
    UPPERCASE = "uppercase"  # LOCATION_1


# Words used inside bracketed-lowercase placeholders.
BRACKET_WORDS: dict[EntityLabel, str] = {
    EntityLabel.PERSON_FIRSTNAME: "firstname",
    EntityLabel.PERSON_LASTNAME: "lastname",
    EntityLabel.OCCUPATION: "occupation",
    EntityLabel.LOCATION: "location",
    EntityLabel.TIME: "time",
    EntityLabel.ORGANIZATION: "organisation",
    EntityLabel.DATE: "date",
    EntityLabel.ADDRESS: "address",
    EntityLabel.PHONE_NUMBER: "phonenumber",
    EntityLabel.EMAIL_ADDRESS: "email",
    EntityLabel.OTHER_IDENTIFYING_ATTRIBUTE: "otherattribute",
    EntityLabel.PRONOUN: "pronoun",
    EntityLabel.NUMERIC: "numeric",
}
_WORD_TO_LABEL = {word: label for label, word in BRACKET_WORDS.items()}


class InvalidAnnotations(ValueError):
    def __init__(self, violations: Sequence[Violation]):
        super().__init__(f"{len(violations)} annotation violation(s): {violations[0].message}")
        self.violations = tuple(violations)


class MissingLexicon(ValueError):
    pass


class UnrestorableMode(ValueError):
    pass


class DanglingPlaceholder(ValueError):
    pass


@dataclass(frozen=True)
class AnonymizationMode:
    """Replacement mode plus the knobs that affect rendering and matching."""

    mode: Mode = Mode.TAGGING
    style: PlaceholderStyle = PlaceholderStyle.BRACKETED
    seed: int | None = None  # mandatory for random substitution
    lexicons: Mapping[EntityLabel, Sequence[str]] = field(default_factory=dict)
    numeric_indexed: bool = True  # [numeric1] by default, [numeric] when off
    case_sensitive_matching: bool = False

    def __post_init__(self):
        if self.mode is Mode.RANDOM_SUBSTITUTION and self.seed is None:
            raise ValueError("random-substitution mode requires a seed")

    def indexed(self, label: EntityLabel) -> bool:
        if label is EntityLabel.PRONOUN:
            return False
        if label is EntityLabel.NUMERIC:
            return self.numeric_indexed
        return True


def render_placeholder(label: EntityLabel, index: int, style: PlaceholderStyle,
                       indexed: bool = True) -> str:
    if style is PlaceholderStyle.BRACKETED:
        word = BRACKET_WORDS[label]
        return f"[{word}{index}]" if indexed else f"[{word}]"
    return f"{label.value}_{index}" if indexed else label.value


@dataclass(frozen=True, slots=True)
class AnonymizedDocument:
    id: str
    text: str
    mode: AnonymizationMode
    map: ReplacementMap


def anonymize(doc: AnnotatedDocument, mode: AnonymizationMode) -> AnonymizedDocument:
    """Replace every span; equal canonical surfaces with equal labels share a
    replacement, and in tagging mode unequal surfaces get distinct indices.

    Non-span text is preserved verbatim. Indices are assigned per label in
    first-appearance order, so output is deterministic.
    """
    violations = validate_annotations(doc)
    if violations:
        raise InvalidAnnotations(violations)

    rng = random.Random(mode.seed) if mode.mode is Mode.RANDOM_SUBSTITUTION else None
    index_of: dict[tuple[EntityLabel, str], int] = {}
    next_index: dict[EntityLabel, int] = {}
    representative: dict[tuple[EntityLabel, str], str] = {}
    substitution: dict[tuple[EntityLabel, str], str] = {}
    occurrences: dict[tuple[EntityLabel, str], list[MapOccurrence]] = {}

    pieces: list[str] = []
    cursor = 0
    for span in doc.spans:
        surface = doc.text[span.start : span.end]
        key = (span.label, canonical_surface(surface, mode.case_sensitive_matching))
        if key not in index_of:
            next_index[span.label] = next_index.get(span.label, 0) + 1
            index_of[key] = next_index[span.label]
            representative[key] = surface
            occurrences[key] = []
        occurrences[key].append(MapOccurrence(span.start, span.end, surface))

        if mode.mode is Mode.TAGGING:
            replacement = render_placeholder(
                span.label, index_of[key], mode.style, mode.indexed(span.label)
            )
        elif mode.mode is Mode.SUPPRESSION:
            replacement = SUPPRESSION_TOKEN
        else:
            if key not in substitution:
                lexicon = mode.lexicons.get(span.label)
                if not lexicon:
                    raise MissingLexicon(
                        f"no substitution lexicon for label {span.label.value}"
                    )
                substitution[key] = rng.choice(list(lexicon))
            replacement = substitution[key]

        pieces.append(doc.text[cursor : span.start])
        pieces.append(replacement)
        cursor = span.end
    pieces.append(doc.text[cursor:])

    entries = tuple(
        MapEntry(label=key[0], index=index_of[key], surface=representative[key],
                 occurrences=tuple(occurrences[key]))
        for key in sorted(index_of, key=lambda k: (k[0].value, index_of[k]))
    )
    return AnonymizedDocument(
        id=doc.id, text="".join(pieces), mode=mode, map=ReplacementMap(entries)
    )


# ---------------------------------------------------------------------------
# Placeholder parsing, restoration and stripping
# ---------------------------------------------------------------------------

_BRACKET_RE = re.compile(r"\[(" + "|".join(sorted(_WORD_TO_LABEL)) + r")(\d*)\]")
_UPPER_RE = re.compile(
    r"\b(" + "|".join(sorted((l.value for l in BRACKET_WORDS), key=len, reverse=True)) + r")(?:_(\d+))?\b"
)
_ANY_PLACEHOLDER_RE = re.compile(f"(?:{_BRACKET_RE.pattern})|(?:{_UPPER_RE.pattern})")


def _parse_placeholder(match: re.Match) -> tuple[EntityLabel, int | None]:
    if match.group(1) is not None:
        label = _WORD_TO_LABEL[match.group(1)]
        index = int(match.group(2)) if match.group(2) else None
    else:
        label = EntityLabel(match.group(3))
        index = int(match.group(4)) if match.group(4) else None
    return label, index


def restore(anon: AnonymizedDocument) -> Document:
    """Invert a tagging-mode anonymisation back to the original text.

    Relies on the occurrence offsets in the map to locate each placeholder
    structurally, so text that merely looks like a placeholder cannot
    derail the splice. Placeholders that resolve to no map entry raise
    DanglingPlaceholder, as does a map inconsistent with the text.
    """
    if anon.mode.mode is not Mode.TAGGING:
        raise UnrestorableMode(f"cannot restore {anon.mode.mode.value} output")

    known = {(entry.label, entry.index) for entry in anon.map.entries}
    unindexed_labels = {entry.label for entry in anon.map.entries
                        if not anon.mode.indexed(entry.label)}
    for match in _ANY_PLACEHOLDER_RE.finditer(anon.text):
        label, index = _parse_placeholder(match)
        if index is None:
            # Bare forms are only placeholders for labels rendered un-indexed.
            if anon.mode.indexed(label) or label in unindexed_labels:
                continue
            raise DanglingPlaceholder(f"placeholder {match.group(0)!r} has no map entry")
        if (label, index) not in known:
            raise DanglingPlaceholder(f"placeholder {match.group(0)!r} has no map entry")

    ordered = sorted(
        ((entry, occ) for entry in anon.map.entries for occ in entry.occurrences),
        key=lambda pair: pair[1].start,
    )
    pieces: list[str] = []
    pos_orig = 0
    pos_anon = 0
    for entry, occ in ordered:
        gap = occ.start - pos_orig
        placeholder = render_placeholder(
            entry.label, entry.index, anon.mode.style, anon.mode.indexed(entry.label)
        )
        if gap < 0 or not anon.text.startswith(placeholder, pos_anon + gap):
            raise DanglingPlaceholder(
                f"expected {placeholder!r} for span [{occ.start},{occ.end}) "
                f"at anonymised offset {pos_anon + gap}"
            )
        pieces.append(anon.text[pos_anon : pos_anon + gap])
        pieces.append(occ.surface)
        pos_anon += gap + len(placeholder)
        pos_orig = occ.end
    pieces.append(anon.text[pos_anon:])
    return Document(id=anon.id, text="".join(pieces))


_STRIP_RE = re.compile(rf"\s*(?:{_ANY_PLACEHOLDER_RE.pattern})(?:\s*(?:{_ANY_PLACEHOLDER_RE.pattern}))*\s*")


def strip_placeholders(text: str) -> str:
    """Remove placeholders of either style, collapsing the whitespace around
    each removal to a single space. Text without placeholders is unchanged."""

    def replace(match: re.Match) -> str:
        if match.start() == 0 or match.end() == len(text):
            return ""
        return " "

    return _STRIP_RE.sub(replace, text)


# ---------------------------------------------------------------------------
# Output record: one JSON object per document.
# {"id":..., "text":..., "mode":..., "map":[{"label","index","surface","spans":[[s,e],...]}]}
# ---------------------------------------------------------------------------


def anonymized_to_record(anon: AnonymizedDocument) -> dict:
    return {
        "id": anon.id,
        "text": anon.text,
        "mode": anon.mode.mode.value,
        "map": [
            {
                "label": entry.label.value,
                "index": entry.index,
                "surface": entry.surface,
                "spans": [[occ.start, occ.end] for occ in entry.occurrences],
            }
            for entry in anon.map.entries
        ],
    }


def anonymized_from_record(record: dict, mode: AnonymizationMode | None = None) -> AnonymizedDocument:
    """Rebuild an AnonymizedDocument from its wire record.

    The wire format stores one representative surface per entry, so restoring
    a record uses that surface for every occurrence; occurrences whose
    original casing differed from the representative come back in
    representative casing.
    """
    if mode is None:
        parsed = Mode(record["mode"])
        # The seed is irrelevant once output exists; 0 satisfies the invariant.
        mode = AnonymizationMode(
            mode=parsed, seed=0 if parsed is Mode.RANDOM_SUBSTITUTION else None
        )
    entries = tuple(
        MapEntry(
            label=EntityLabel(e["label"]),
            index=int(e["index"]),
            surface=e["surface"],
            occurrences=tuple(
                MapOccurrence(int(s), int(t), e["surface"]) for s, t in e["spans"]
            ),
        )
        for e in record.get("map", [])
    )
    return AnonymizedDocument(
        id=str(record["id"]), text=record["text"], mode=mode, map=ReplacementMap(entries)
    )
