"""Batch command-line surface for offline corpus processing.

Commands: anonymize, restore, corpus-prep, eval ner|deanon|infoloss.
Exit codes: 0 success, 1 configuration error, 2 input parse error,
3 sidecar failure. Bad scores never produce a non-zero exit.

Outputs are written atomically (temp file in the target directory, then
rename), so an interrupted run never leaves a half-anonymised file in place.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import model, recognition
from .anonymize import (
    AnonymizationMode,
    AnonymizedDocument,
    DanglingPlaceholder,
    InvalidAnnotations,
    Mode,
    PlaceholderStyle,
    UnrestorableMode,
    anonymize,
    anonymized_from_record,
    anonymized_to_record,
    restore,
)
from .evaluation import deanon as deanonmod
from .evaluation import infoloss as infomod
from .evaluation import technical as techmod
from .sidecar import SidecarUnavailable

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INPUT = 2
EXIT_SIDECAR = 3


class ConfigError(Exception):
    pass


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# Config file: flat "key = value" lines, '#' comments. Flags override values.
# Documented keys: mode, style, seed, jobs, rules_only, tagger_cmd,
# tagger_timeout, detectors, pronouns, numeric_indexed, case_sensitive,
# score_floor.<source>, gazetteer.<LABEL>.
# ---------------------------------------------------------------------------


def load_config_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        values[key.strip()] = value.strip()
    return values


def _parse_bool(value: str, key: str) -> bool:
    folded = value.strip().lower()
    if folded in ("1", "true", "yes", "on"):
        return True
    if folded in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot parse boolean {key}={value!r}")


def _build_recognizer_config(args, config: dict[str, str]) -> recognition.RecognizerConfig:
    def pick(flag_value, key: str):
        return flag_value if flag_value is not None else config.get(key)

    gazetteers: dict[model.EntityLabel, Path] = {}
    for key, value in config.items():
        if key.startswith("gazetteer."):
            label_name = key.split(".", 1)[1]
            try:
                label = model.EntityLabel(label_name)
            except ValueError as exc:
                raise ConfigError(f"unknown gazetteer label {label_name!r}") from exc
            gazetteers[label] = Path(value)
    for item in getattr(args, "gazetteer", None) or []:
        name, sep, path = item.partition("=")
        if not sep:
            raise ConfigError(f"--gazetteer expects LABEL=PATH, got {item!r}")
        try:
            label = model.EntityLabel(name)
        except ValueError as exc:
            raise ConfigError(f"unknown gazetteer label {name!r}") from exc
        gazetteers[label] = Path(path)
    for path in gazetteers.values():
        if not path.exists():
            raise ConfigError(f"gazetteer file not found: {path}")

    detectors_value = pick(getattr(args, "detectors", None), "detectors")
    if detectors_value is None:
        detectors = recognition.ALL_DETECTORS
    else:
        detectors = frozenset(
            name.strip() for name in detectors_value.split(",") if name.strip()
        )

    pronouns = None
    pronouns_path = config.get("pronouns")
    if pronouns_path:
        try:
            raw = Path(pronouns_path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read pronoun lexicon {pronouns_path}: {exc}") from exc
        pronouns = frozenset(
            line.strip().casefold() for line in raw.splitlines()
            if line.strip() and not line.startswith("#")
        )

    rules_only = bool(getattr(args, "rules_only", False)) or (
        "rules_only" in config and _parse_bool(config["rules_only"], "rules_only")
    )
    tagger_cmd = pick(getattr(args, "tagger_cmd", None), "tagger_cmd")
    if rules_only:
        tagger_cmd = None

    score_floor = {}
    for key, value in config.items():
        if key.startswith("score_floor."):
            try:
                score_floor[key.split(".", 1)[1]] = float(value)
            except ValueError as exc:
                raise ConfigError(f"bad score floor {key}={value!r}") from exc

    cfg = recognition.RecognizerConfig(
        detectors=detectors,
        gazetteers=gazetteers,
        pronoun_terms=pronouns,
        tagger_cmd=tagger_cmd,
        tagger_timeout=float(config.get("tagger_timeout", "30")),
        score_floor=score_floor,
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _build_mode(args, config: dict[str, str]) -> AnonymizationMode:
    def pick(flag_value, key: str, default):
        if flag_value is not None:
            return flag_value
        return config.get(key, default)

    mode_name = pick(args.mode, "mode", Mode.TAGGING.value)
    style_name = pick(args.style, "style", PlaceholderStyle.BRACKETED.value)
    seed_value = pick(args.seed, "seed", None)
    try:
        mode = Mode(mode_name)
        style = PlaceholderStyle(style_name)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    lexicons: dict[model.EntityLabel, tuple[str, ...]] = {}
    for key, value in config.items():
        if key.startswith("lexicon."):
            label_name = key.split(".", 1)[1]
            try:
                label = model.EntityLabel(label_name)
            except ValueError as exc:
                raise ConfigError(f"unknown lexicon label {label_name!r}") from exc
            try:
                terms = tuple(
                    line.strip() for line in Path(value).read_text("utf-8").splitlines()
                    if line.strip() and not line.startswith("#")
                )
            except OSError as exc:
                raise ConfigError(f"cannot read lexicon {value}: {exc}") from exc
            lexicons[label] = terms
    numeric_indexed = True
    if "numeric_indexed" in config:
        numeric_indexed = _parse_bool(config["numeric_indexed"], "numeric_indexed")
    case_sensitive = False
    if "case_sensitive" in config:
        case_sensitive = _parse_bool(config["case_sensitive"], "case_sensitive")
    try:
        return AnonymizationMode(
            mode=mode,
            style=style,
            seed=int(seed_value) if seed_value is not None else None,
            lexicons=lexicons,
            numeric_indexed=numeric_indexed,
            case_sensitive_matching=case_sensitive,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# IO helpers
# ---------------------------------------------------------------------------


def _read_documents(paths: list[str]) -> list[model.AnnotatedDocument]:
    docs: list[model.AnnotatedDocument] = []
    for path_str in paths:
        path = Path(path_str)
        if not path.exists():
            raise ConfigError(f"input file not found: {path}")
        if path.suffix == ".txt":
            docs.append(
                model.AnnotatedDocument(
                    document=model.Document(id=path.stem, text=path.read_text("utf-8"))
                )
            )
            continue
        try:
            docs.extend(model.load_standoff(path))
        except (model.StandoffFormatError, UnicodeDecodeError) as exc:
            raise InputError(f"{path}: {exc}") from exc
    return docs


def _atomic_write(path: str | Path, content: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fp:
            fp.write(content)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_anonymize(args) -> int:
    config = load_config_file(args.config) if args.config else {}
    cfg = _build_recognizer_config(args, config)
    mode = _build_mode(args, config)
    jobs = args.jobs if args.jobs is not None else int(config.get("jobs", "1"))
    if jobs < 1:
        raise ConfigError(f"--jobs must be >= 1, got {jobs}")

    docs = _read_documents(args.input)
    started = time.monotonic()
    with recognition.Recognizer(cfg) as recognizer:
        if args.pre_annotated:
            annotated = docs
        elif cfg.tagger_cmd is not None:
            # A single sidecar stream is serialised; batching happens inside.
            annotated = recognizer.recognize_all([d.document for d in docs])
        elif jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                annotated = list(pool.map(recognizer.recognize, [d.document for d in docs]))
        else:
            annotated = [recognizer.recognize(d.document) for d in docs]

    outputs = [anonymize(doc, mode) for doc in annotated]
    lines = [json.dumps(anonymized_to_record(a), ensure_ascii=False) for a in outputs]
    _atomic_write(args.output, "".join(line + "\n" for line in lines))

    label_counts: dict[str, int] = {}
    for doc in annotated:
        for span in doc.spans:
            label_counts[span.label.value] = label_counts.get(span.label.value, 0) + 1
    per_label = ",".join(f"{k}={v}" for k, v in sorted(label_counts.items())) or "none"
    elapsed = time.monotonic() - started
    print(
        f"anonymised {len(outputs)} document(s), {sum(label_counts.values())} span(s) "
        f"[{per_label}] in {elapsed:.2f}s -> {args.output}"
    )
    return EXIT_OK


def cmd_restore(args) -> int:
    path = Path(args.input)
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    restored = []
    with open(path, encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                anon = anonymized_from_record(record)
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
            if args.style:
                anon = AnonymizedDocument(
                    id=anon.id, text=anon.text, map=anon.map,
                    mode=AnonymizationMode(
                        mode=anon.mode.mode, seed=anon.mode.seed,
                        style=PlaceholderStyle(args.style),
                    ),
                )
            try:
                doc = restore(anon)
            except (UnrestorableMode, DanglingPlaceholder) as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
            restored.append({"id": doc.id, "text": doc.text})
    _atomic_write(
        args.output,
        "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in restored),
    )
    print(f"restored {len(restored)} document(s) -> {args.output}")
    return EXIT_OK


def cmd_corpus_prep(args) -> int:
    docs = _read_documents(args.input)
    rules = recognition.CorpusFilterRules(
        min_words=args.min_words,
        max_words=args.max_words,
        truncate_words=args.truncate,
        max_ne_ratio=args.max_ne_ratio,
    )
    kept = recognition.filter_and_truncate_corpus(docs, rules)
    if args.split:
        try:
            fractions = tuple(float(x) for x in args.split.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad --split value {args.split!r}") from exc
        try:
            train, validation, test = techmod.split_corpus(
                kept, fractions, seed=args.seed if args.seed is not None else 0
            )
        except techmod.BadFractions as exc:
            raise ConfigError(str(exc)) from exc
        out_dir = Path(args.output)
        for name, subset in (("train", train), ("validation", validation), ("test", test)):
            buffer = []
            for doc in subset:
                buffer.append(json.dumps(model.annotated_to_record(doc), ensure_ascii=False))
            _atomic_write(out_dir / f"{name}.jsonl", "".join(l + "\n" for l in buffer))
        print(
            f"kept {len(kept)}/{len(docs)} document(s); split "
            f"train={len(train)} validation={len(validation)} test={len(test)} -> {out_dir}"
        )
    else:
        lines = [json.dumps(model.annotated_to_record(d), ensure_ascii=False) for d in kept]
        _atomic_write(args.output, "".join(l + "\n" for l in lines))
        print(f"kept {len(kept)}/{len(docs)} document(s) -> {args.output}")
    return EXIT_OK


def cmd_eval_ner(args) -> int:
    try:
        gold = model.load_standoff(args.gold)
        pred = model.load_standoff(args.pred)
    except (OSError, model.StandoffFormatError) as exc:
        raise InputError(str(exc)) from exc
    try:
        pairs = techmod.align_corpus(gold, pred)
        report = techmod.score(pairs)
    except (techmod.TextMismatch, techmod.EmptyInput) as exc:
        raise InputError(str(exc)) from exc
    print(techmod.format_report(report))
    if args.csv:
        _atomic_write(args.csv, techmod.report_to_csv(report))
        print(f"wrote {args.csv}")
    return EXIT_OK


def cmd_eval_deanon(args) -> int:
    try:
        with open(args.judgments, encoding="utf-8", newline="") as fp:
            judgments = deanonmod.read_judgments_csv(fp)
        with open(args.truths, encoding="utf-8", newline="") as fp:
            truths = deanonmod.read_truths_csv(fp)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot read judgments/truths: {exc}") from exc
    try:
        results, summary = deanonmod.score_items(judgments, truths, threshold=args.threshold)
    except deanonmod.MissingTruth as exc:
        raise InputError(str(exc)) from exc
    agreement = None
    if all(j.claimed_identified is not None for j in judgments):
        agreement = deanonmod.agreement_rate(judgments, results, threshold=args.threshold)
    print(
        f"items={summary.n_items} M={summary.mean_similarity:.2f} "
        f"SD={summary.sd_similarity:.2f} identified={summary.pct_identified:.2f}% "
        f"SE={summary.se_identified:.2f}"
        + (f" agreement={agreement:.2f}%" if agreement is not None else "")
    )
    if args.items_csv:
        _atomic_write(args.items_csv, deanonmod.items_to_csv(results))
    if args.summary_csv:
        _atomic_write(args.summary_csv, deanonmod.summary_to_csv({"all": summary}))
    if args.ngrams_csv:
        import csv as _csv
        import io as _io

        notes_by_item: dict[str, list[str]] = {}
        for judgment in judgments:
            if judgment.leakage_note:
                notes_by_item.setdefault(judgment.item_id, []).append(judgment.leakage_note)
        buf = _io.StringIO()
        writer = _csv.writer(buf)
        writer.writerow(["item_id", "ngram", "count"])
        for item_id in sorted(notes_by_item):
            for ngram, count in deanonmod.leakage_ngrams(notes_by_item[item_id]):
                writer.writerow([item_id, ngram, count])
        _atomic_write(args.ngrams_csv, buf.getvalue())
    return EXIT_OK


def cmd_eval_infoloss(args) -> int:
    did_anything = False
    if args.features:
        try:
            with open(args.features, encoding="utf-8", newline="") as fp:
                table = infomod.read_feature_table_csv(fp)
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read feature table: {exc}") from exc
        try:
            results = infomod.construct_loss_report(table, prior_scale=args.prior_scale)
        except (infomod.DegenerateSample, infomod.TooFew) as exc:
            raise InputError(str(exc)) from exc
        csv_text = infomod.construct_loss_to_csv(results)
        print(csv_text, end="")
        if args.csv:
            _atomic_write(args.csv, csv_text)
        did_anything = True
    if args.original and args.anonymised:
        try:
            originals = {d.id: d for d in model.load_standoff(args.original)}
            anonymised = {d.id: d for d in model.load_standoff(args.anonymised)}
        except (OSError, model.StandoffFormatError) as exc:
            raise InputError(str(exc)) from exc
        values = []
        for doc_id in sorted(originals):
            if doc_id not in anonymised:
                raise InputError(f"no anonymised text for document {doc_id!r}")
            try:
                values.append(
                    infomod.proportion_removed(
                        originals[doc_id].text, anonymised[doc_id].text
                    )
                )
            except infomod.EmptyOriginal as exc:
                raise InputError(f"{doc_id}: {exc}") from exc
        mean = sum(values) / len(values) if values else 0.0
        print(f"proportion_removed: n={len(values)} mean={mean:.4f}")
        did_anything = True
    if args.ranked_list and args.input:
        try:
            ranked = infomod.load_ranked_words(args.ranked_list)
            docs = _read_documents([args.input])
        except OSError as exc:
            raise InputError(str(exc)) from exc
        for doc in docs:
            try:
                score = infomod.frequency_rank(doc.text, ranked, doc_id=doc.id)
            except infomod.EmptyText as exc:
                raise InputError(f"{doc.id}: {exc}") from exc
            print(f"frequency_rank: {doc.id} mean_rank={score.mean_rank:.2f} oov={score.oov_count}")
        did_anything = True
    if args.scorer_cmd and args.input:
        docs = _read_documents([args.input])
        try:
            scores = infomod.perplexity_via_scorer(
                [d.document for d in docs], args.scorer_cmd
            )
        except infomod.ScorerUnavailable as exc:
            raise SidecarUnavailable(str(exc)) from exc
        except infomod.NonPositivePerplexity as exc:
            raise InputError(str(exc)) from exc
        for doc_id, value in scores.items():
            print(f"perplexity: {doc_id} {value}")
        did_anything = True
    if not did_anything:
        raise ConfigError(
            "eval infoloss needs --features, --original/--anonymised, "
            "--ranked-list/--input, or --scorer-cmd/--input"
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="textscrub", exit_on_error=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p_anon = sub.add_parser("anonymize", help="recognise and replace sensitive spans",
                            exit_on_error=False)
    p_anon.add_argument("--input", action="append", required=True,
                        help="standoff .jsonl or plain .txt; repeatable")
    p_anon.add_argument("--output", required=True)
    p_anon.add_argument("--mode", choices=[m.value for m in Mode], default=None)
    p_anon.add_argument("--style", choices=[s.value for s in PlaceholderStyle],
                        default=None)
    p_anon.add_argument("--seed", type=int, default=None)
    p_anon.add_argument("--config", default=None)
    p_anon.add_argument("--jobs", type=int, default=None)
    p_anon.add_argument("--rules-only", action="store_true",
                        help="never spawn a tagger sidecar")
    p_anon.add_argument("--tagger-cmd", default=None)
    p_anon.add_argument("--gazetteer", action="append", metavar="LABEL=PATH")
    p_anon.add_argument("--detectors", default=None,
                        help="comma-separated subset of "
                             f"{','.join(sorted(recognition.ALL_DETECTORS))}")
    p_anon.add_argument("--pre-annotated", action="store_true",
                        help="trust spans present in the input instead of recognising")
    p_anon.set_defaults(func=cmd_anonymize)

    p_restore = sub.add_parser("restore", help="invert tagging-mode output",
                               exit_on_error=False)
    p_restore.add_argument("--input", required=True)
    p_restore.add_argument("--output", required=True)
    p_restore.add_argument("--style", choices=[s.value for s in PlaceholderStyle],
                           default=None)
    p_restore.set_defaults(func=cmd_restore)

    p_prep = sub.add_parser("corpus-prep", help="length/NE-ratio filtering and splits",
                            exit_on_error=False)
    p_prep.add_argument("--input", action="append", required=True)
    p_prep.add_argument("--output", required=True,
                        help="output .jsonl, or a directory when --split is given")
    p_prep.add_argument("--min-words", type=int, default=20)
    p_prep.add_argument("--max-words", type=int, default=None)
    p_prep.add_argument("--truncate", type=int, default=500)
    p_prep.add_argument("--max-ne-ratio", type=float, default=None)
    p_prep.add_argument("--split", default=None, metavar="TRAIN,VAL,TEST")
    p_prep.add_argument("--seed", type=int, default=None)
    p_prep.set_defaults(func=cmd_corpus_prep)

    p_eval = sub.add_parser("eval", help="evaluation harness", exit_on_error=False)
    eval_sub = p_eval.add_subparsers(dest="eval_command", required=True)

    p_ner = eval_sub.add_parser("ner", exit_on_error=False)
    p_ner.add_argument("--gold", required=True)
    p_ner.add_argument("--pred", required=True)
    p_ner.add_argument("--csv", default=None)
    p_ner.set_defaults(func=cmd_eval_ner)

    p_deanon = eval_sub.add_parser("deanon", exit_on_error=False)
    p_deanon.add_argument("--judgments", required=True)
    p_deanon.add_argument("--truths", required=True)
    p_deanon.add_argument("--threshold", type=float, default=deanonmod.DEFAULT_THRESHOLD)
    p_deanon.add_argument("--items-csv", default=None)
    p_deanon.add_argument("--summary-csv", default=None)
    p_deanon.add_argument("--ngrams-csv", default=None)
    p_deanon.set_defaults(func=cmd_eval_deanon)

    p_info = eval_sub.add_parser("infoloss", exit_on_error=False)
    p_info.add_argument("--features", default=None, help="feature table CSV")
    p_info.add_argument("--prior-scale", type=float, default=infomod.DEFAULT_PRIOR_SCALE)
    p_info.add_argument("--csv", default=None)
    p_info.add_argument("--original", default=None, help="standoff JSONL")
    p_info.add_argument("--anonymised", default=None, help="standoff JSONL")
    p_info.add_argument("--ranked-list", default=None)
    p_info.add_argument("--scorer-cmd", default=None)
    p_info.add_argument("--input", default=None, help="standoff JSONL")
    p_info.set_defaults(func=cmd_eval_infoloss)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except argparse.ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SidecarUnavailable as exc:
        print(f"sidecar failure: {exc}", file=sys.stderr)
        return EXIT_SIDECAR
    except InvalidAnnotations as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
