"""Information-loss measurements: utility-loss arithmetic, proportion of
text removed, default-prior Bayesian t-tests over per-document feature
differences, global frequency ranks and an external perplexity scorer.

The Bayes factor follows the default-prior formulation for t-tests: a Cauchy
prior with scale r on standardised effect size, marginalised by integrating
over the prior's auxiliary scale variable g with an inverse-gamma(1/2, 1/2)
weight. BF10 is the ratio of that marginal likelihood to the point-null
likelihood; both share the central-t factor, which is folded into the
integrand so very large t statistics stay finite in log space.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Mapping, Sequence

from scipy import integrate

from ..anonymize import strip_placeholders
from ..model import Document
from ..sidecar import LineProtocolClient, SidecarUnavailable
from ..tokenize import TokenKind, count_word_tokens, tokenize

# Conventional medium scale for the Cauchy effect-size prior.
DEFAULT_PRIOR_SCALE = math.sqrt(2) / 2


class EmptyOriginal(ValueError):
    pass


class EmptyText(ValueError):
    pass


class DegenerateSample(ValueError):
    pass


class TooFew(ValueError):
    pass


class ScorerUnavailable(RuntimeError):
    pass


class NonPositivePerplexity(ValueError):
    pass


def utility_loss(acc_original: float, acc_anonymised: float) -> float:
    """Difference in prediction accuracy, in percentage points.

    Computed in decimal arithmetic so stated percentages subtract exactly
    (92.82 - 91.98 is 0.84, not a float artefact). Negative loss is allowed
    and reported as-is.
    """
    for value in (acc_original, acc_anonymised):
        if not 0.0 <= value <= 100.0:
            raise ValueError(f"accuracy {value!r} outside [0,100]")
    return float(Decimal(str(acc_original)) - Decimal(str(acc_anonymised)))


def proportion_removed(original: str, anonymised: str) -> float:
    """1 - ntok(anonymised)/ntok(original), with placeholders stripped first.

    Tokens are word and number tokens; punctuation does not count. The value
    can be negative if anonymisation somehow grew the text.
    """
    n_original = count_word_tokens(original)
    if n_original == 0:
        raise EmptyOriginal("original text has no word tokens")
    n_anonymised = count_word_tokens(strip_placeholders(anonymised))
    return 1.0 - n_anonymised / n_original


# ---------------------------------------------------------------------------
# Default-prior Bayes factor for t-tests
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class BayesFactorResult:
    feature: str | None
    t: float
    nu: float
    bf10: float
    bf01: float
    prior_scale: float


def _log_integrand(g: float, t2: float, n_eff: float, nu: float, r2: float) -> float:
    # (1 + N g r^2)^(-1/2)
    # * [ (1 + t^2/nu) / (1 + t^2/(nu (1 + N g r^2))) ]^((nu+1)/2)   (H1/H0 ratio)
    # * inverse-gamma(1/2, 1/2) density of g
    c = 1.0 + n_eff * g * r2
    return (
        -0.5 * math.log(c)
        + 0.5 * (nu + 1.0) * (math.log1p(t2 / nu) - math.log1p(t2 / (nu * c)))
        - 0.5 * math.log(2.0 * math.pi)
        - 1.5 * math.log(g)
        - 1.0 / (2.0 * g)
    )


def jzs_log_bf10(t: float, n_eff: float, nu: float,
                 prior_scale: float = DEFAULT_PRIOR_SCALE) -> float:
    """log BF10 for a t statistic with effective sample size and df.

    Adaptive quadrature on the log-scaled integrand; the peak is subtracted
    first so integrals that would overflow (t statistics in the hundreds)
    remain representable. Relative error is well below 1e-6.
    """
    if nu <= 0 or n_eff <= 0:
        raise ValueError("degrees of freedom and effective sample size must be positive")
    if prior_scale <= 0:
        raise ValueError("prior scale must be positive")
    t2 = t * t
    r2 = prior_scale * prior_scale
    # Locate the integrand's peak on a wide log grid to anchor the scaling.
    peak = max(
        _log_integrand(10.0 ** (k / 16.0 - 10.0), t2, n_eff, nu, r2) for k in range(321)
    )
    value, _ = integrate.quad(
        lambda g: math.exp(_log_integrand(g, t2, n_eff, nu, r2) - peak),
        0.0,
        math.inf,
        epsabs=1e-12,
        epsrel=1e-9,
        limit=200,
    )
    return peak + math.log(value)


def _one_sample_t(x: Sequence[float]) -> tuple[float, float, float]:
    n = len(x)
    if n < 2:
        raise TooFew(f"need at least 2 observations, got {n}")
    if not all(math.isfinite(v) for v in x):
        raise ValueError("sample contains non-finite values")
    sd = statistics.stdev(x)
    if sd == 0.0:
        raise DegenerateSample("sample has zero variance")
    t = statistics.fmean(x) / (sd / math.sqrt(n))
    return t, float(n - 1), float(n)


def _two_sample_t(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    n1, n2 = len(x), len(y)
    if n1 < 2 or n2 < 2:
        raise TooFew(f"need at least 2 observations per group, got {n1} and {n2}")
    if not all(math.isfinite(v) for v in list(x) + list(y)):
        raise ValueError("sample contains non-finite values")
    var1 = statistics.variance(x)
    var2 = statistics.variance(y)
    pooled = ((n1 - 1) * var1 + (n2 - 1) * var2) / (n1 + n2 - 2)
    if pooled == 0.0:
        raise DegenerateSample("pooled variance is zero")
    t = (statistics.fmean(x) - statistics.fmean(y)) / math.sqrt(pooled * (1 / n1 + 1 / n2))
    return t, float(n1 + n2 - 2), n1 * n2 / (n1 + n2)


def bayes_factor_ttest(
    x: Sequence[float],
    y: Sequence[float] | None = None,
    prior_scale: float = DEFAULT_PRIOR_SCALE,
    feature: str | None = None,
) -> BayesFactorResult:
    """Bayes factor for a one-sample test on x (pass paired differences), or
    an independent two-sample test when y is given.

    BF10 quantifies evidence for a non-zero effect, BF01 = 1/BF10 evidence
    for the null. BF10 may overflow to inf for overwhelming effects, in which
    case BF01 is exactly 0.
    """
    if y is None:
        t, nu, n_eff = _one_sample_t(x)
    else:
        t, nu, n_eff = _two_sample_t(x, y)
    log_bf10 = jzs_log_bf10(t, n_eff, nu, prior_scale)
    try:
        bf10 = math.exp(log_bf10)
    except OverflowError:
        bf10 = math.inf
    bf01 = 0.0 if math.isinf(bf10) else math.exp(-log_bf10)
    return BayesFactorResult(feature=feature, t=t, nu=nu, bf10=bf10, bf01=bf01,
                             prior_scale=prior_scale)


# ---------------------------------------------------------------------------
# Construct loss over per-document feature tables
# ---------------------------------------------------------------------------

ORIGINAL_CONDITION = "original"
ANONYMISED_CONDITION = "anonymised"


@dataclass(frozen=True)
class FeatureTable:
    """Aligned per-document features for the original and anonymised
    conditions. The id sets must match and all features be non-negative."""

    features: tuple[str, ...]
    original: Mapping[str, Mapping[str, float]]  # doc id -> feature -> value
    anonymised: Mapping[str, Mapping[str, float]]

    def __post_init__(self):
        if set(self.original) != set(self.anonymised):
            raise ValueError("original and anonymised conditions cover different ids")
        for condition in (self.original, self.anonymised):
            for doc_id, row in condition.items():
                for feature in self.features:
                    value = row.get(feature)
                    if value is None:
                        raise ValueError(f"document {doc_id!r} missing feature {feature!r}")
                    if value < 0:
                        raise ValueError(f"negative feature {feature!r} for {doc_id!r}")

    def ids(self) -> list[str]:
        return sorted(self.original)

    def differences(self, feature: str) -> list[float]:
        return [
            self.original[i][feature] - self.anonymised[i][feature] for i in self.ids()
        ]


def read_feature_table_csv(fp) -> FeatureTable:
    """CSV with header id,condition,feature1,... and condition values
    'original' or 'anonymised'."""
    reader = csv.DictReader(fp)
    if reader.fieldnames is None or reader.fieldnames[:2] != ["id", "condition"]:
        raise ValueError("feature table header must start with id,condition")
    features = tuple(reader.fieldnames[2:])
    original: dict[str, dict[str, float]] = {}
    anonymised: dict[str, dict[str, float]] = {}
    for row in reader:
        condition = row["condition"].strip().lower()
        if condition == ORIGINAL_CONDITION:
            target = original
        elif condition == ANONYMISED_CONDITION:
            target = anonymised
        else:
            raise ValueError(f"unknown condition {row['condition']!r}")
        target[row["id"]] = {f: float(row[f]) for f in features}
    return FeatureTable(features=features, original=original, anonymised=anonymised)


def construct_loss_report(
    table: FeatureTable, prior_scale: float = DEFAULT_PRIOR_SCALE
) -> list[BayesFactorResult]:
    """Paired Bayes-factor test per feature on original minus anonymised
    differences, sorted by evidence for the null (BF01 descending)."""
    results = [
        bayes_factor_ttest(table.differences(feature), prior_scale=prior_scale,
                           feature=feature)
        for feature in table.features
    ]
    results.sort(key=lambda r: (-r.bf01, r.feature or ""))
    return results


def construct_loss_to_csv(results: Sequence[BayesFactorResult]) -> str:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["feature", "t", "df", "BF10", "BF01", "prior_scale"])
    for r in results:
        writer.writerow([
            r.feature or "", f"{r.t:.6f}", f"{r.nu:g}", f"{r.bf10:.6g}",
            f"{r.bf01:.6g}", f"{r.prior_scale:.6f}",
        ])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Global frequency ranks
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class FrequencyRankScore:
    doc_id: str | None
    mean_rank: float
    oov_count: int


def load_ranked_words(path: str | Path) -> list[str]:
    """One word per line, rank = line number (1-based)."""
    words = Path(path).read_text(encoding="utf-8").split()
    return words


def frequency_rank(
    text: str, ranked_words: Sequence[str], doc_id: str | None = None
) -> FrequencyRankScore:
    """Mean frequency rank of the text's words against a ranked word list.

    Out-of-vocabulary words take rank len(list)+1, so rarer vocabulary means
    a higher score.
    """
    if not ranked_words:
        raise ValueError("ranked word list is empty")
    ranks: dict[str, int] = {}
    for position, word in enumerate(ranked_words, start=1):
        if word != word.lower():
            raise ValueError(f"ranked list entries must be lowercase: {word!r}")
        if word in ranks:
            raise ValueError(f"duplicate ranked list entry: {word!r}")
        ranks[word] = position
    oov_rank = len(ranked_words) + 1
    words = [
        text[t.start : t.end].lower() for t in tokenize(text) if t.kind is TokenKind.WORD
    ]
    if not words:
        raise EmptyText("text has no word tokens")
    total = 0
    oov = 0
    for word in words:
        rank = ranks.get(word)
        if rank is None:
            rank = oov_rank
            oov += 1
        total += rank
    return FrequencyRankScore(doc_id=doc_id, mean_rank=total / len(words), oov_count=oov)


# ---------------------------------------------------------------------------
# External perplexity scorer
# ---------------------------------------------------------------------------


def perplexity_via_scorer(
    docs: Sequence[Document], scorer_command: Sequence[str] | str, timeout: float = 30.0
) -> dict[str, float]:
    """Stream {"id","text"} lines to the scorer command and read back
    {"id","perplexity"} lines; values are recorded verbatim."""
    try:
        with LineProtocolClient(scorer_command, timeout=timeout) as client:
            responses = client.request_many({"id": d.id, "text": d.text} for d in docs)
    except SidecarUnavailable as exc:
        raise ScorerUnavailable(str(exc)) from exc
    out: dict[str, float] = {}
    for doc, response in zip(docs, responses):
        if response.get("id") != doc.id:
            raise ScorerUnavailable(
                f"scorer response id {response.get('id')!r} does not match {doc.id!r}"
            )
        try:
            value = float(response["perplexity"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ScorerUnavailable(f"malformed scorer response for {doc.id!r}") from exc
        if not value > 0:
            raise NonPositivePerplexity(f"perplexity {value!r} for {doc.id!r} is not positive")
        out[doc.id] = value
    return out
