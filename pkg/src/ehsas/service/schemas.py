"""Request/response bodies for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict


class ExperimentConfigModel(BaseModel):
    """Flat experiment config; omitted keys fall back to the defaults.

    Mirrors the config-file key set one to one."""

    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    corpus_path: str | None = None
    text_column: str | None = None
    label_column: str | None = None
    tag_column: str | None = None
    output_dir: str | None = None

    train_ratio: float | None = None
    seed: int | None = None
    stratified: bool | None = None

    steps: list[str] | None = None
    stopwords_path: str | None = None
    charmap_path: str | None = None
    stem_min_length: int | None = None
    spell_min_frequency: int | None = None

    vectorizer: str | None = None
    bow_min_count: int | None = None
    embed_dim: int | None = None
    ngram_min: int | None = None
    ngram_max: int | None = None
    window: int | None = None
    negative: int | None = None
    embed_epochs: int | None = None
    embed_lr: float | None = None
    embed_seed: int | None = None
    bucket_count: int | None = None
    pretrained_vectors_path: str | None = None
    external_train_vectors_path: str | None = None
    external_test_vectors_path: str | None = None

    model: str | None = None
    knn_k: int | None = None
    knn_metric: str | None = None
    svm_lambda: float | None = None
    svm_epochs: int | None = None
    adaboost_rounds: int | None = None
    model_seed: int | None = None

    top_n: int | None = None

    def to_mapping(self) -> dict:
        return {k: v for k, v in self.model_dump().items() if v is not None}


class SplitRequest(BaseModel):
    config: ExperimentConfigModel


class SplitResponse(BaseModel):
    train_path: str
    test_path: str
    manifest_path: str
    manifest: dict


class TrainRequest(BaseModel):
    config: ExperimentConfigModel


class TrainResponse(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model_path: str
    log_path: str
    dim: int
    train_accuracy: float
    train_macro_f1: float
    config_hash: str


class EvaluateRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    config: ExperimentConfigModel
    model_path: str | None = None


class EvaluateResponse(BaseModel):
    metrics_path: str
    report_path: str
    row_path: str
    metrics: dict
    confusion: list[list[int]]


class PredictRequest(BaseModel):
    """Either inline ``texts`` or server-local ``input_path``/``output_path``."""

    model_config = ConfigDict(protected_namespaces=())

    model_path: str
    texts: list[str] | None = None
    input_path: str | None = None
    output_path: str | None = None
    text_column: str = "text"
    lenient: bool = False


class PredictionRow(BaseModel):
    id: str
    label: str
    score_negative: float
    score_neutral: float
    score_positive: float


class PredictResponse(BaseModel):
    output_path: str | None
    rows: list[PredictionRow]
    skipped: list[int]


class FreqRequest(BaseModel):
    config: ExperimentConfigModel


class TermRow(BaseModel):
    token: str
    count: int
    weight: float


class FreqResponse(BaseModel):
    freq_path: str
    class_dist_path: str
    tag_dist_path: str
    top: list[TermRow]


class HealthResponse(BaseModel):
    status: str
    version: str
