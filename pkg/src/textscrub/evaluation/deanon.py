"""De-anonymisation scoring for motivated-intruder judgments.

Guess quality is the cosine similarity between bags of individual characters
of the guess and the true name; per-item means above a cutoff count as an
identification. Leakage notes are summarised as stopword-filtered n-grams.
"""

from __future__ import annotations

import csv
import io
import math
import re
import statistics
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Sequence

DEFAULT_THRESHOLD = 0.75

STOPWORDS_VERSION = "en-1"


class MissingTruth(KeyError):
    pass


@dataclass(frozen=True, slots=True)
class IntruderJudgment:
    item_id: str
    guess: str
    claimed_identified: bool | None = None
    leakage_note: str = ""


@dataclass(frozen=True, slots=True)
class ItemDeanonResult:
    item_id: str
    true_name: str
    similarities: tuple[float, ...]
    mean_similarity: float
    identified: bool


@dataclass(frozen=True, slots=True)
class DeanonSummary:
    n_items: int
    mean_similarity: float
    sd_similarity: float
    pct_identified: float
    se_identified: float
    threshold: float


def _char_counts(s: str) -> Counter:
    return Counter(ch for ch in s.lower() if ch.isalnum())


def char_cosine(a: str, b: str) -> float:
    """Cosine similarity between character-count vectors of two strings.

    Both strings are lowercased and stripped of non-alphanumerics first. If
    either normalised string is empty the similarity is 0. Count vectors are
    non-negative, so the realisable range is [0, 1].
    """
    ca, cb = _char_counts(a), _char_counts(b)
    if not ca or not cb:
        return 0.0
    dot = sum(count * cb.get(ch, 0) for ch, count in ca.items())
    # Exact integer product under the root, so identical bags score exactly 1.
    norm = math.sqrt(sum(c * c for c in ca.values()) * sum(c * c for c in cb.values()))
    return min(1.0, dot / norm)


def score_items(
    judgments: Iterable[IntruderJudgment],
    truths: Mapping[str, str],
    threshold: float = DEFAULT_THRESHOLD,
) -> tuple[list[ItemDeanonResult], DeanonSummary]:
    """Per-item mean similarities, binarised at threshold, with group summary.

    The standard error of the identification percentage is the binomial
    sqrt(p(1-p)/n) over items, expressed in percentage points.
    """
    by_item: dict[str, list[IntruderJudgment]] = {}
    for judgment in judgments:
        if judgment.item_id not in truths:
            raise MissingTruth(f"no true name for item {judgment.item_id!r}")
        by_item.setdefault(judgment.item_id, []).append(judgment)

    results = []
    for item_id, item_judgments in by_item.items():
        sims = tuple(char_cosine(truths[item_id], j.guess) for j in item_judgments)
        mean_sim = sum(sims) / len(sims)
        results.append(
            ItemDeanonResult(
                item_id=item_id,
                true_name=truths[item_id],
                similarities=sims,
                mean_similarity=mean_sim,
                identified=mean_sim >= threshold,
            )
        )

    n = len(results)
    means = [r.mean_similarity for r in results]
    identified = sum(r.identified for r in results)
    p = identified / n if n else 0.0
    summary = DeanonSummary(
        n_items=n,
        mean_similarity=sum(means) / n if n else 0.0,
        sd_similarity=statistics.stdev(means) if n > 1 else 0.0,
        pct_identified=(identified * 100) / n if n else 0.0,
        se_identified=math.sqrt(p * (1 - p) / n) * 100 if n else 0.0,
        threshold=threshold,
    )
    return results, summary


def agreement_rate(
    judgments: Sequence[IntruderJudgment],
    results: Sequence[ItemDeanonResult],
    threshold: float = DEFAULT_THRESHOLD,
) -> float:
    """Percentage of judgments whose self-reported success matches the
    similarity criterion applied to that judgment's own guess."""
    sims: dict[str, list[float]] = {r.item_id: list(r.similarities) for r in results}
    taken: dict[str, int] = {}
    agree = 0
    total = 0
    for judgment in judgments:
        if judgment.claimed_identified is None:
            raise ValueError(f"judgment for {judgment.item_id!r} lacks claimed_identified")
        pos = taken.get(judgment.item_id, 0)
        sim = sims[judgment.item_id][pos]
        taken[judgment.item_id] = pos + 1
        agree += judgment.claimed_identified == (sim >= threshold)
        total += 1
    return (agree * 100) / total if total else 0.0


# ---------------------------------------------------------------------------
# Leakage n-grams
# ---------------------------------------------------------------------------

_NGRAM_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def load_stopwords() -> frozenset[str]:
    data = resources.files("textscrub.data").joinpath("stopwords_en.txt").read_text("utf-8")
    return frozenset(
        line.strip() for line in data.splitlines()
        if line.strip() and not line.startswith("#")
    )


def leakage_ngrams(
    notes: Iterable[str],
    n_max: int = 3,
    top_k: int = 10,
    stopwords: frozenset[str] | None = None,
) -> list[tuple[str, int]]:
    """Top n-grams across leakage notes, most frequent first.

    Notes are lowercased and stripped of punctuation, stopwords are removed,
    and 1..n_max-grams are counted over the remaining token sequence of each
    note (n-grams never span notes). Multi-word grams join with underscores;
    ties break lexicographically.
    """
    if stopwords is None:
        stopwords = load_stopwords()
    counts: Counter = Counter()
    for note in notes:
        tokens = [t for t in _NGRAM_TOKEN_RE.findall(note.lower()) if t not in stopwords]
        for n in range(1, n_max + 1):
            for i in range(len(tokens) - n + 1):
                counts["_".join(tokens[i : i + n])] += 1
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:top_k]


# ---------------------------------------------------------------------------
# CSV interfaces
# ---------------------------------------------------------------------------

_TRUE_WORDS = {"yes", "true", "1", "y"}
_FALSE_WORDS = {"no", "false", "0", "n", ""}


def _parse_claim(value: str) -> bool | None:
    folded = value.strip().lower()
    if folded in _TRUE_WORDS:
        return True
    if folded in _FALSE_WORDS:
        return False
    raise ValueError(f"cannot parse claimed_identified value {value!r}")


def read_judgments_csv(fp) -> list[IntruderJudgment]:
    """Columns: item_id, guess, claimed_identified, leakage_note."""
    out = []
    for row in csv.DictReader(fp):
        out.append(
            IntruderJudgment(
                item_id=row["item_id"],
                guess=row.get("guess", "") or "",
                claimed_identified=_parse_claim(row.get("claimed_identified", "") or ""),
                leakage_note=row.get("leakage_note", "") or "",
            )
        )
    return out


def read_truths_csv(fp) -> dict[str, str]:
    """Columns: item_id, true_name."""
    return {row["item_id"]: row["true_name"] for row in csv.DictReader(fp)}


def summary_to_csv(groups: Mapping[str, DeanonSummary]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["group", "M", "SD", "pct_identified", "SE_pct_identified", "n_items"])
    for name, s in groups.items():
        writer.writerow([
            name, f"{s.mean_similarity:.4f}", f"{s.sd_similarity:.4f}",
            f"{s.pct_identified:.2f}", f"{s.se_identified:.2f}", s.n_items,
        ])
    return buf.getvalue()


def items_to_csv(results: Sequence[ItemDeanonResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["item_id", "true_name", "n_judgments", "mean_similarity", "identified"])
    for r in results:
        writer.writerow([
            r.item_id, r.true_name, len(r.similarities),
            f"{r.mean_similarity:.6f}", int(r.identified),
        ])
    return buf.getvalue()
