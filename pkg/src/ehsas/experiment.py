"""Experiment orchestration shared by the CLI and the HTTP service.

A flat-key config drives five commands — split, train, evaluate,
predict, freq.  Saved models are self-contained: the preprocessing rules
and the fitted vectorizer state travel inside the model file, so
evaluate/predict never depend on the original rule files.  All
non-log artifacts are byte-deterministic for a fixed config and corpus;
wall-clock timestamps appear only in ``train_log.txt``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, fields as dc_fields
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .classify import (
    OvrModel,
    as_feature_matrix,
    load_model,
    ovr_predict,
    ovr_predict_batch,
    ovr_train,
    save_model,
)
from .corpus import (
    LabeledCorpus,
    Sentiment,
    SplitSpec,
    class_distribution,
    load_corpus,
    shuffle_split,
    tag_distribution,
    write_corpus_csv,
)
from .errors import ConfigError, DataError
from .evaluate import (
    ConfusionMatrix,
    MetricsReport,
    confusion_matrix,
    frequencies_to_csv,
    metrics,
    metrics_to_csv,
    render_report,
    term_frequencies,
    TermFrequency,
)
from .preprocess import (
    DEFAULT_STEPS,
    CharMap,
    PreprocessConfig,
    SpellPolicy,
    StemRules,
    default_charmap,
    default_stopwords,
    load_charmap,
    load_stopwords,
    run_pipeline,
)
from .subword import SubwordModel, SubwordParams, embed_document, train_skipgram
from .vectorize import (
    EmbeddingTable,
    Vocabulary,
    bow_transform,
    build_vocabulary,
    load_vectors,
)

__all__ = [
    "ExperimentConfig",
    "load_config_file",
    "resolve_config",
    "config_hash",
    "SplitResult",
    "TrainResult",
    "EvaluateResult",
    "PredictResult",
    "FreqResult",
    "cmd_split",
    "cmd_train",
    "cmd_evaluate",
    "cmd_predict",
    "cmd_freq",
    "predict_texts",
]

VECTORIZERS = ("bow", "subword", "pretrained", "external")
MODELS = ("knn", "svm", "adaboost")
_METRIC_CHOICES = ("auto", "cosine", "euclidean")

TRAIN_CSV = "train.csv"
TEST_CSV = "test.csv"
MODEL_FILE = "model.json"
SPLIT_MANIFEST = "split_manifest.json"
TRAIN_LOG = "train_log.txt"
METRICS_CSV = "metrics.csv"
REPORT_TXT = "report.txt"
METRICS_ROW_CSV = "metrics_row.csv"
FREQ_CSV = "term_frequencies.csv"
CLASS_DIST_CSV = "class_distribution.csv"
TAG_DIST_CSV = "tag_distribution.csv"
LOCK_FILE = ".lock"


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat config; every key maps 1:1 onto a CLI flag (flags win)."""

    corpus_path: str | None = None
    text_column: str = "text"
    label_column: str = "label"
    tag_column: str | None = None
    output_dir: str | None = None

    train_ratio: float = 0.8
    seed: int = 42
    stratified: bool = False

    steps: tuple[str, ...] = DEFAULT_STEPS
    stopwords_path: str | None = None
    charmap_path: str | None = None
    stem_min_length: int = 2
    spell_min_frequency: int = 2

    vectorizer: str = "bow"
    bow_min_count: int = 1
    embed_dim: int = 300
    ngram_min: int = 3
    ngram_max: int = 6
    window: int = 5
    negative: int = 5
    embed_epochs: int = 5
    embed_lr: float = 0.05
    embed_seed: int = 1
    bucket_count: int = 2**21
    pretrained_vectors_path: str | None = None
    external_train_vectors_path: str | None = None
    external_test_vectors_path: str | None = None

    model: str = "svm"
    knn_k: int = 5
    knn_metric: str = "auto"
    svm_lambda: float = 1e-4
    svm_epochs: int = 20
    adaboost_rounds: int = 50
    model_seed: int = 0

    top_n: int = 50

    def as_dict(self) -> dict:
        out = {}
        for f in dc_fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out


_VALID_KEYS = {f.name for f in dc_fields(ExperimentConfig)}


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return obj


def resolve_config(*mappings: dict) -> ExperimentConfig:
    """Merge key/value mappings over the defaults (later mappings win;
    None values are treated as 'not provided')."""
    merged: dict = {}
    for mapping in mappings:
        for key, value in mapping.items():
            if value is None:
                continue
            if key not in _VALID_KEYS:
                raise ConfigError(
                    f"unknown config key {key!r}; valid keys: "
                    + ", ".join(sorted(_VALID_KEYS))
                )
            merged[key] = value
    if "steps" in merged:
        raw = merged["steps"]
        if isinstance(raw, str):
            raw = [s.strip() for s in raw.split(",") if s.strip()]
        merged["steps"] = tuple(str(s) for s in raw)
    if "stratified" in merged and isinstance(merged["stratified"], str):
        lowered = merged["stratified"].strip().lower()
        if lowered not in ("true", "false"):
            raise ConfigError(f"stratified must be true or false, got {lowered!r}")
        merged["stratified"] = lowered == "true"
    for key, value in merged.items():
        if not isinstance(value, str):
            continue
        try:
            if key in INT_CONFIG_KEYS:
                merged[key] = int(value)
            elif key in FLOAT_CONFIG_KEYS:
                merged[key] = float(value)
        except ValueError:
            raise ConfigError(
                f"config key {key!r} must be a number, got {value!r}"
            ) from None
    try:
        config = ExperimentConfig(**merged)
    except TypeError as exc:
        raise ConfigError(f"invalid config: {exc}") from None
    _typecheck(config)
    return config


INT_CONFIG_KEYS = (
    "seed",
    "stem_min_length",
    "spell_min_frequency",
    "bow_min_count",
    "embed_dim",
    "ngram_min",
    "ngram_max",
    "window",
    "negative",
    "embed_epochs",
    "embed_seed",
    "bucket_count",
    "knn_k",
    "svm_epochs",
    "adaboost_rounds",
    "model_seed",
    "top_n",
)
FLOAT_CONFIG_KEYS = ("train_ratio", "svm_lambda", "embed_lr")


def _typecheck(config: ExperimentConfig) -> None:
    for name in INT_CONFIG_KEYS:
        value = getattr(config, name)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"config key {name!r} must be an integer, got {value!r}")
    for name in FLOAT_CONFIG_KEYS:
        value = getattr(config, name)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"config key {name!r} must be a number, got {value!r}")
    if config.vectorizer not in VECTORIZERS:
        raise ConfigError(
            f"unknown vectorizer {config.vectorizer!r}; valid: {', '.join(VECTORIZERS)}"
        )
    if config.model not in MODELS:
        raise ConfigError(
            f"unknown model {config.model!r}; valid: {', '.join(MODELS)}"
        )
    if config.knn_metric not in _METRIC_CHOICES:
        raise ConfigError(
            f"unknown knn_metric {config.knn_metric!r}; valid: "
            + ", ".join(_METRIC_CHOICES)
        )


def _require(config: ExperimentConfig, *names: str) -> None:
    for name in names:
        if getattr(config, name) in (None, ""):
            raise ConfigError(f"config key {name!r} is required for this command")


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"{what} not found: {p}")
    return p


# ---------------------------------------------------------------------------
# Config hash (canonical config + digests of the rule files in effect)


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _rule_file_bytes(explicit: str | None, bundled: str) -> bytes:
    if explicit:
        return _require_file(explicit, "rule file").read_bytes()
    return (
        resources.files("ehsas").joinpath(f"data/{bundled}").read_bytes()
    )


def config_hash(config: ExperimentConfig) -> str:
    # The hash captures everything that determines results; the output
    # location does not, so runs into different directories compare equal.
    cfg_dict = config.as_dict()
    cfg_dict.pop("output_dir", None)
    payload = {
        "config": cfg_dict,
        "rules": {
            "stopwords": _sha256_bytes(
                _rule_file_bytes(config.stopwords_path, "stopwords_fa.txt")
            ),
            "charmap": _sha256_bytes(
                _rule_file_bytes(config.charmap_path, "charmap_fa.tsv")
            ),
        },
    }
    canonical = json.dumps(
        payload, sort_keys=True, ensure_ascii=False, separators=(",", ":")
    )
    return _sha256_bytes(canonical.encode("utf-8"))


# ---------------------------------------------------------------------------
# Output-directory lock


@contextmanager
def _output_lock(output_dir: Path):
    output_dir.mkdir(parents=True, exist_ok=True)
    lock = output_dir / LOCK_FILE
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(
            f"output directory {output_dir} is locked by another run "
            f"(remove {lock} if that run is gone)"
        ) from None
    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


# ---------------------------------------------------------------------------
# Preprocessing assembly (including the spelling-policy bootstrap)


def _load_rules(config: ExperimentConfig) -> tuple[CharMap, frozenset[str], StemRules]:
    charmap = (
        load_charmap(config.charmap_path) if config.charmap_path else default_charmap()
    )
    stopwords = (
        load_stopwords(config.stopwords_path)
        if config.stopwords_path
        else default_stopwords()
    )
    rules = StemRules(min_stem_length=config.stem_min_length)
    return charmap, stopwords, rules


def build_preprocess(
    config: ExperimentConfig, spell_reference_texts: Sequence[str] | None
) -> PreprocessConfig:
    """Assemble the pipeline.  When correct_spelling is configured, its
    reference vocabulary is bootstrapped by running the *preceding* steps
    over ``spell_reference_texts`` (the training split, so the policy
    never sees test data)."""
    charmap, stopwords, rules = _load_rules(config)
    steps = tuple(config.steps)
    policy = None
    if "correct_spelling" in steps:
        if spell_reference_texts is None:
            raise ConfigError(
                "correct_spelling step configured but no reference texts supplied"
            )
        cut = steps.index("correct_spelling")
        probe = PreprocessConfig(
            steps=steps[:cut],
            charmap=charmap,
            stopwords=stopwords,
            stem_rules=rules,
        )
        probe.validate()
        freqs: dict[str, int] = {}
        for text in spell_reference_texts:
            for tok in run_pipeline(text, probe):
                freqs[tok] = freqs.get(tok, 0) + 1
        if freqs:
            policy = SpellPolicy(freqs, config.spell_min_frequency)
        else:
            # Nothing to correct against; drop the step instead of
            # building an unusable policy.
            steps = tuple(s for s in steps if s != "correct_spelling")
    final = PreprocessConfig(
        steps=steps,
        charmap=charmap,
        stopwords=stopwords,
        stem_rules=rules,
        spell_policy=policy,
        spell_min_frequency=config.spell_min_frequency,
    )
    final.validate()
    return final


def preprocess_to_payload(cfg: PreprocessConfig) -> dict:
    return {
        "steps": list(cfg.steps),
        "charmap": [[src, repl] for src, repl in cfg.charmap.pairs],
        "stopwords": sorted(cfg.stopwords),
        "stem": {
            "suffixes": list(cfg.stem_rules.suffixes),
            "min_stem_length": cfg.stem_rules.min_stem_length,
            "exceptions": sorted(cfg.stem_rules.exceptions),
        },
        "spell": (
            {
                "min_frequency": cfg.spell_policy.min_frequency,
                "frequencies": dict(cfg.spell_policy.frequencies),
            }
            if cfg.spell_policy is not None
            else None
        ),
    }


def preprocess_from_payload(payload: dict) -> PreprocessConfig:
    try:
        charmap = CharMap(tuple((s, r) for s, r in payload["charmap"]))
        rules = StemRules(
            suffixes=tuple(payload["stem"]["suffixes"]),
            min_stem_length=int(payload["stem"]["min_stem_length"]),
            exceptions=frozenset(payload["stem"]["exceptions"]),
        )
        spell = payload.get("spell")
        policy = (
            SpellPolicy(
                {str(k): int(v) for k, v in spell["frequencies"].items()},
                int(spell["min_frequency"]),
            )
            if spell
            else None
        )
        cfg = PreprocessConfig(
            steps=tuple(payload["steps"]),
            charmap=charmap,
            stopwords=frozenset(payload["stopwords"]),
            stem_rules=rules,
            spell_policy=policy,
            spell_min_frequency=(
                policy.min_frequency if policy is not None else 2
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed preprocess payload: {exc}") from None
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# Vectorizer fitting and rebuilding


class TextVectorizer:
    """Fitted vectorizer bound to its preprocessing rules; turns raw
    texts into feature rows and serializes itself into the model file."""

    def __init__(self, kind, dim, preprocess_cfg, vocab=None, subword=None, table=None, extra=None):
        self.kind = kind
        self.dim = dim
        self.preprocess_cfg = preprocess_cfg
        self.vocab: Vocabulary | None = vocab
        self.subword: SubwordModel | None = subword
        self.table: EmbeddingTable | None = table
        self.extra = extra or {}

    def tokenize(self, text: str) -> list[str]:
        return run_pipeline(text, self.preprocess_cfg)

    def vectorize_texts(self, texts: Sequence[str]):
        token_lists = [self.tokenize(t) for t in texts]
        if self.kind == "bow":
            return [bow_transform(toks, self.vocab) for toks in token_lists]
        source = self.subword if self.kind == "subword" else self.table
        rows = np.zeros((len(token_lists), self.dim), dtype=np.float64)
        for i, toks in enumerate(token_lists):
            rows[i] = embed_document(source, toks).vector
        return rows

    def descriptor(self, stamp: dict | None = None) -> dict:
        desc: dict = {"vectorizer": self.kind, "dim": self.dim}
        desc.update(self.extra)
        if self.kind != "external":
            desc["preprocess"] = preprocess_to_payload(self.preprocess_cfg)
        if self.kind == "bow":
            desc["vocabulary"] = {
                "tokens": list(self.vocab.tokens),
                "frequencies": list(self.vocab.frequencies),
                "min_count": self.vocab.min_count,
            }
        elif self.kind == "subword":
            desc["subword"] = self.subword.to_payload()
        if stamp:
            desc.update(stamp)
        return desc


def fit_vectorizer(
    config: ExperimentConfig, train_texts: Sequence[str]
) -> TextVectorizer:
    if config.vectorizer == "external":
        raise ConfigError("external vectors are not fitted from text")
    pp = build_preprocess(config, spell_reference_texts=train_texts)
    token_lists = [run_pipeline(t, pp) for t in train_texts]
    if config.vectorizer == "bow":
        vocab = build_vocabulary(token_lists, min_count=config.bow_min_count)
        if len(vocab) == 0:
            raise DataError(
                f"empty vocabulary: no token reaches min_count={config.bow_min_count}"
            )
        return TextVectorizer("bow", len(vocab), pp, vocab=vocab)
    if config.vectorizer == "subword":
        params = SubwordParams(
            dim=config.embed_dim,
            nmin=config.ngram_min,
            nmax=config.ngram_max,
            window=config.window,
            negative=config.negative,
            epochs=config.embed_epochs,
            learning_rate=config.embed_lr,
            seed=config.embed_seed,
            bucket_count=config.bucket_count,
        )
        model = train_skipgram(token_lists, params)
        return TextVectorizer("subword", params.dim, pp, subword=model)
    # pretrained
    _require(config, "pretrained_vectors_path")
    path = _require_file(config.pretrained_vectors_path, "pretrained vector file")
    table = load_vectors(path)
    extra = {
        "path": str(path),
        "sha256": _sha256_bytes(path.read_bytes()),
    }
    return TextVectorizer("pretrained", table.dim, pp, table=table, extra=extra)


def vectorizer_from_descriptor(desc: dict) -> TextVectorizer:
    kind = desc.get("vectorizer")
    if kind == "external":
        return TextVectorizer("external", int(desc["dim"]), None)
    pp = preprocess_from_payload(desc["preprocess"])
    if kind == "bow":
        v = desc["vocabulary"]
        vocab = Vocabulary(
            tokens=tuple(v["tokens"]),
            frequencies=tuple(int(f) for f in v["frequencies"]),
            min_count=int(v["min_count"]),
        )
        return TextVectorizer("bow", len(vocab), pp, vocab=vocab)
    if kind == "subword":
        model = SubwordModel.from_payload(desc["subword"])
        return TextVectorizer("subword", model.dim, pp, subword=model)
    if kind == "pretrained":
        path = _require_file(desc["path"], "pretrained vector file")
        digest = _sha256_bytes(path.read_bytes())
        if digest != desc.get("sha256"):
            raise DataError(
                f"pretrained vector file {path} changed since training "
                f"(sha256 {digest[:12]}… != recorded {str(desc.get('sha256'))[:12]}…)"
            )
        table = load_vectors(path)
        return TextVectorizer("pretrained", table.dim, pp, table=table)
    raise DataError(f"unknown vectorizer kind {kind!r} in model file")


def _read_external_vectors(path: str | Path, what: str) -> np.ndarray:
    """Dense document vectors: one CSV row of floats per record, no header."""
    path = _require_file(str(path), what)
    rows: list[list[float]] = []
    width: int | None = None
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                row = [float(p) for p in parts]
            except ValueError:
                raise DataError(
                    f"line {line_no} of {path} has a non-numeric component"
                ) from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataError(
                    f"line {line_no} of {path} has {len(row)} components, "
                    f"expected {width}"
                )
            rows.append(row)
    if not rows:
        raise DataError(f"{what} {path} is empty")
    return np.array(rows, dtype=np.float64)


# ---------------------------------------------------------------------------
# Commands


@dataclass(frozen=True)
class SplitResult:
    train_path: str
    test_path: str
    manifest_path: str
    manifest: dict


@dataclass(frozen=True)
class TrainResult:
    model_path: str
    log_path: str
    dim: int
    train_accuracy: float
    train_macro_f1: float
    config_hash: str


@dataclass(frozen=True)
class EvaluateResult:
    metrics_path: str
    report_path: str
    row_path: str
    report: MetricsReport
    cm: ConfusionMatrix


@dataclass(frozen=True)
class PredictResult:
    output_path: str
    rows: list[dict]
    skipped: list[int]


@dataclass(frozen=True)
class FreqResult:
    freq_path: str
    class_dist_path: str
    tag_dist_path: str
    top: list[TermFrequency]


def _class_counts(corpus: LabeledCorpus) -> dict[str, int]:
    counts = {s.key: 0 for s in Sentiment}
    for rec in corpus:
        counts[rec.label.key] += 1
    return counts


def _load_main_corpus(config: ExperimentConfig) -> LabeledCorpus:
    _require(config, "corpus_path")
    path = _require_file(config.corpus_path, "corpus file")
    return load_corpus(
        path,
        text_column=config.text_column,
        label_column=config.label_column,
        tag_column=config.tag_column,
    )


def cmd_split(config: ExperimentConfig) -> SplitResult:
    _require(config, "output_dir")
    corpus = _load_main_corpus(config)
    spec = SplitSpec(
        train_ratio=config.train_ratio,
        seed=config.seed,
        stratified=config.stratified,
    )
    chash = config_hash(config)
    out = Path(config.output_dir)
    with _output_lock(out):
        train, test = shuffle_split(corpus, spec)
        write_corpus_csv(train, out / TRAIN_CSV)
        write_corpus_csv(test, out / TEST_CSV)
        manifest = {
            "config_hash": chash,
            "corpus_path": str(config.corpus_path),
            "seed": config.seed,
            "train_ratio": config.train_ratio,
            "stratified": config.stratified,
            "total": len(corpus),
            "train_size": len(train),
            "test_size": len(test),
            "class_counts": {
                "train": _class_counts(train),
                "test": _class_counts(test),
            },
        }
        manifest_path = out / SPLIT_MANIFEST
        manifest_path.write_text(
            json.dumps(manifest, sort_keys=True, ensure_ascii=False, indent=1) + "\n",
            encoding="utf-8",
        )
    return SplitResult(
        train_path=str(out / TRAIN_CSV),
        test_path=str(out / TEST_CSV),
        manifest_path=str(manifest_path),
        manifest=manifest,
    )


def _load_split_corpus(out: Path, name: str) -> LabeledCorpus:
    path = out / name
    if not path.is_file():
        raise DataError(f"{path} not found: run the split command first")
    with path.open("r", encoding="utf-8") as fh:
        head = fh.readline()
    tag_col = "tag" if "tag" in head.strip().split(",") else None
    return load_corpus(path, text_column="text", label_column="label", tag_column=tag_col)


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def cmd_train(config: ExperimentConfig) -> TrainResult:
    _require(config, "output_dir")
    out = Path(config.output_dir)
    chash = config_hash(config)
    log_lines = [f"# training log", f"started: {_utc_now()}", f"config_hash: {chash}"]
    started = time.perf_counter()
    with _output_lock(out):
        train = _load_split_corpus(out, TRAIN_CSV)
        labels = [int(rec.label) for rec in train]
        log_lines.append(f"train_split: {out / TRAIN_CSV} ({len(train)} records)")

        t0 = time.perf_counter()
        if config.vectorizer == "external":
            _require(config, "external_train_vectors_path")
            mat = _read_external_vectors(
                config.external_train_vectors_path, "external train vectors"
            )
            if mat.shape[0] != len(train):
                raise DataError(
                    f"external train vectors: {mat.shape[0]} rows but the train "
                    f"split has {len(train)} records"
                )
            features = mat
            vec = TextVectorizer("external", mat.shape[1], None)
            log_lines.append(
                f"vectorizer: external (dim={mat.shape[1]}, "
                f"rows={mat.shape[0]}) [{time.perf_counter() - t0:.2f}s]"
            )
        else:
            vec = fit_vectorizer(config, train.texts())
            features = vec.vectorize_texts(train.texts())
            detail = ""
            if vec.kind == "bow":
                detail = f", vocabulary={len(vec.vocab)} tokens"
            elif vec.kind == "subword":
                detail = f", vocabulary={len(vec.subword.vocab)} words"
            log_lines.append(
                f"vectorizer: {vec.kind} (dim={vec.dim}{detail}) "
                f"[{time.perf_counter() - t0:.2f}s]"
            )

        metric = config.knn_metric
        if metric == "auto":
            metric = "cosine" if config.vectorizer == "bow" else "euclidean"
        t0 = time.perf_counter()
        model = ovr_train(
            config.model,
            features,
            labels,
            k=config.knn_k,
            metric=metric,
            lam=config.svm_lambda,
            epochs=config.svm_epochs,
            rounds=config.adaboost_rounds,
            seed=config.model_seed,
            feature_descriptor=vec.descriptor(stamp={"config_hash": chash}),
        )
        hyper = {
            "knn": f"k={config.knn_k}, metric={metric}",
            "svm": f"lambda={config.svm_lambda}, epochs={config.svm_epochs}, "
            f"seed={config.model_seed}",
            "adaboost": f"rounds={config.adaboost_rounds}",
        }[config.model]
        log_lines.append(
            f"model: {config.model} ({hyper}) [{time.perf_counter() - t0:.2f}s]"
        )

        predictions = ovr_predict_batch(model, features)
        cm = confusion_matrix(train.labels(), predictions)
        report = metrics(cm)
        log_lines.append(f"train_accuracy: {report.accuracy:.4f}")
        log_lines.append(f"train_macro_f1: {report.macro_f1:.4f}")

        model_path = out / MODEL_FILE
        save_model(model, model_path)
        log_lines.append(f"model_file: {model_path}")
        log_lines.append(f"wall_time: {time.perf_counter() - started:.2f}s")
        log_lines.append(f"finished: {_utc_now()}")
        log_path = out / TRAIN_LOG
        log_path.write_text("\n".join(log_lines) + "\n", encoding="utf-8")
    return TrainResult(
        model_path=str(model_path),
        log_path=str(log_path),
        dim=vec.dim,
        train_accuracy=report.accuracy,
        train_macro_f1=report.macro_f1,
        config_hash=chash,
    )


def _load_ovr_model(path: str | Path) -> OvrModel:
    model = load_model(path)
    if not isinstance(model, OvrModel):
        raise DataError(
            f"{path} holds a bare {type(model).__name__}; expected a full "
            "experiment model"
        )
    return model


def cmd_evaluate(
    config: ExperimentConfig, model_path: str | Path | None = None
) -> EvaluateResult:
    _require(config, "output_dir")
    out = Path(config.output_dir)
    model_path = Path(model_path) if model_path else out / MODEL_FILE
    model = _load_ovr_model(model_path)
    with _output_lock(out):
        test = _load_split_corpus(out, TEST_CSV)
        desc = model.feature_descriptor
        vec = vectorizer_from_descriptor(desc)
        if vec.kind == "external":
            _require(config, "external_test_vectors_path")
            mat = _read_external_vectors(
                config.external_test_vectors_path, "external test vectors"
            )
            if mat.shape[0] != len(test):
                raise DataError(
                    f"external test vectors: {mat.shape[0]} rows but the test "
                    f"split has {len(test)} records"
                )
            features = mat
        else:
            features = vec.vectorize_texts(test.texts())
        predictions = ovr_predict_batch(model, features)
        cm = confusion_matrix(test.labels(), predictions)
        report = metrics(cm)
        metadata = {
            "model": model.kind,
            "test_size": len(test),
            "config_hash": config_hash(config),
            "model_config_hash": desc.get("config_hash", "unknown"),
        }
        metrics_path = out / METRICS_CSV
        metrics_path.write_text(metrics_to_csv(report), encoding="utf-8")
        report_path = out / REPORT_TXT
        report_path.write_text(render_report(report, cm, metadata), encoding="utf-8")
        row_path = out / METRICS_ROW_CSV
        row_path.write_text(
            "model,accuracy,macro_recall,macro_f1\n"
            f"{model.kind},{report.accuracy:.6f},{report.macro_recall:.6f},"
            f"{report.macro_f1:.6f}\n",
            encoding="utf-8",
        )
    return EvaluateResult(
        metrics_path=str(metrics_path),
        report_path=str(report_path),
        row_path=str(row_path),
        report=report,
        cm=cm,
    )


def cmd_predict(
    model_path: str | Path,
    input_path: str | Path,
    output_path: str | Path,
    text_column: str = "text",
    lenient: bool = False,
) -> PredictResult:
    """Batch scoring: one output row per usable input row, input order
    preserved.  Malformed rows abort in strict mode (no output file) and
    are skipped-but-reported in lenient mode."""
    model = _load_ovr_model(model_path)
    vec = vectorizer_from_descriptor(model.feature_descriptor)
    input_path = _require_file(str(input_path), "prediction input")

    ids: list[str] = []
    skipped: list[int] = []
    if vec.kind == "external":
        mat = _read_external_vectors(input_path, "prediction input")
        if mat.shape[1] != model.dim:
            raise DataError(
                f"prediction input has dimension {mat.shape[1]}, "
                f"model expects {model.dim}"
            )
        features = mat
        ids = [str(i) for i in range(mat.shape[0])]
    else:
        texts: list[str] = []
        with input_path.open("r", encoding="utf-8-sig", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or text_column not in reader.fieldnames:
                raise DataError(
                    f"prediction input {input_path} has no {text_column!r} column"
                )
            for row_no, row in enumerate(reader, start=1):
                text = (row.get(text_column) or "").strip()
                if not text:
                    if lenient:
                        skipped.append(row_no)
                        continue
                    raise DataError(
                        f"row {row_no} of {input_path} has an empty "
                        f"{text_column!r} value (use lenient mode to skip)"
                    )
                ids.append(row.get("id") or str(row_no))
                texts.append(text)
        if not texts:
            raise DataError(f"no usable rows in {input_path}")
        features = vec.vectorize_texts(texts)

    mat = as_feature_matrix(features, dim=model.dim)
    rows: list[dict] = []
    for row_id, x in zip(ids, mat):
        label, scores = ovr_predict(model, x)
        rows.append(
            {
                "id": row_id,
                "label": label.key,
                "score_negative": float(scores[0]),
                "score_neutral": float(scores[1]),
                "score_positive": float(scores[2]),
            }
        )
    output_path = Path(output_path)
    with output_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["id", "label", "score_negative", "score_neutral", "score_positive"]
        )
        for row in rows:
            writer.writerow(
                [
                    row["id"],
                    row["label"],
                    repr(row["score_negative"]),
                    repr(row["score_neutral"]),
                    repr(row["score_positive"]),
                ]
            )
    return PredictResult(output_path=str(output_path), rows=rows, skipped=skipped)


def predict_texts(model_path: str | Path, texts: Sequence[str]) -> list[dict]:
    """Score raw texts against a saved model without touching disk for
    input/output; used by the service's inline prediction mode."""
    model = _load_ovr_model(model_path)
    vec = vectorizer_from_descriptor(model.feature_descriptor)
    if vec.kind == "external":
        raise ConfigError(
            "this model consumes precomputed document vectors; inline text "
            "prediction is unavailable for it"
        )
    if not texts:
        raise DataError("no texts supplied")
    if any(not (t or "").strip() for t in texts):
        raise DataError("texts must be non-empty")
    features = vec.vectorize_texts(list(texts))
    mat = as_feature_matrix(features, dim=model.dim)
    rows: list[dict] = []
    for i, x in enumerate(mat):
        label, scores = ovr_predict(model, x)
        rows.append(
            {
                "id": str(i),
                "label": label.key,
                "score_negative": float(scores[0]),
                "score_neutral": float(scores[1]),
                "score_positive": float(scores[2]),
            }
        )
    return rows


def cmd_freq(config: ExperimentConfig) -> FreqResult:
    _require(config, "output_dir")
    corpus = _load_main_corpus(config)
    out = Path(config.output_dir)
    with _output_lock(out):
        pp = build_preprocess(config, spell_reference_texts=corpus.texts())
        token_lists = [run_pipeline(t, pp) for t in corpus.texts()]
        top = term_frequencies(token_lists, top_n=config.top_n)
        freq_path = out / FREQ_CSV
        freq_path.write_text(frequencies_to_csv(top), encoding="utf-8")
        class_path = out / CLASS_DIST_CSV
        class_path.write_text(class_distribution(corpus).to_csv(), encoding="utf-8")
        tag_path = out / TAG_DIST_CSV
        tag_path.write_text(tag_distribution(corpus).to_csv(), encoding="utf-8")
    return FreqResult(
        freq_path=str(freq_path),
        class_dist_path=str(class_path),
        tag_dist_path=str(tag_path),
        top=top,
    )
