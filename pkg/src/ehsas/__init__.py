"""Persian tweet sentiment pipeline: preprocessing, vectorization,
classification, and evaluation, with a CLI and an HTTP service on top."""

__version__ = "0.1.0"

from .corpus import (
    LabeledCorpus,
    Sentiment,
    SplitSpec,
    TweetRecord,
    class_distribution,
    load_corpus,
    shuffle_split,
    tag_distribution,
)
from .errors import ConfigError, DataError, EhsasError, NumericError
from .preprocess import PreprocessConfig, run_pipeline
from .vectorize import (
    SparseCountVector,
    Vocabulary,
    bow_transform,
    build_vocabulary,
    load_vectors,
    save_vectors,
)
from .subword import (
    SubwordModel,
    SubwordParams,
    embed_document,
    embed_token,
    train_skipgram,
)
from .classify import (
    AdaBoostBinaryModel,
    KnnModel,
    LinearBinaryModel,
    OvrModel,
    adaboost_train_binary,
    knn_fit,
    knn_predict,
    load_model,
    ovr_predict,
    ovr_train,
    save_model,
    svm_train_binary,
)
from .evaluate import (
    ConfusionMatrix,
    MetricsReport,
    compare_models,
    confusion_matrix,
    metrics,
    term_frequencies,
)

__all__ = [
    "__version__",
    "LabeledCorpus",
    "Sentiment",
    "SplitSpec",
    "TweetRecord",
    "class_distribution",
    "load_corpus",
    "shuffle_split",
    "tag_distribution",
    "ConfigError",
    "DataError",
    "EhsasError",
    "NumericError",
    "PreprocessConfig",
    "run_pipeline",
    "SparseCountVector",
    "Vocabulary",
    "bow_transform",
    "build_vocabulary",
    "load_vectors",
    "save_vectors",
    "SubwordModel",
    "SubwordParams",
    "embed_document",
    "embed_token",
    "train_skipgram",
    "AdaBoostBinaryModel",
    "KnnModel",
    "LinearBinaryModel",
    "OvrModel",
    "adaboost_train_binary",
    "knn_fit",
    "knn_predict",
    "load_model",
    "ovr_predict",
    "ovr_train",
    "save_model",
    "svm_train_binary",
    "ConfusionMatrix",
    "MetricsReport",
    "compare_models",
    "confusion_matrix",
    "metrics",
    "term_frequencies",
]
