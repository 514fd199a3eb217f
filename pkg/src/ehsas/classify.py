"""Classical classifiers over BOW or dense features: KNN, linear SVM
trained with Pegasos-style SGD, and AdaBoost over decision stumps, plus a
one-vs-rest wrapper that maps the three sentiment classes onto binary
scorers (KNN stays natively multiclass and the wrapper records that).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Sentiment
from .errors import ConfigError, DataError, NumericError
from .persist import load_container, save_container
from .vectorize import SparseCountVector

__all__ = [
    "KnnModel",
    "LinearBinaryModel",
    "StumpModel",
    "AdaBoostBinaryModel",
    "OvrModel",
    "as_feature_matrix",
    "knn_fit",
    "knn_predict",
    "knn_predict_batch",
    "svm_objective",
    "svm_subgradient",
    "svm_train_binary",
    "adaboost_train_binary",
    "ovr_train",
    "ovr_predict",
    "ovr_predict_batch",
    "save_model",
    "load_model",
]

_METRICS = ("cosine", "euclidean")

# ε = 0 rounds store the stump with this capped vote weight and stop.
_ALPHA_CAP = 0.5 * math.log(1e10)
_EPS_ZERO = 1e-12


def as_feature_matrix(
    features: Sequence[SparseCountVector] | Sequence[np.ndarray] | np.ndarray,
    dim: int | None = None,
) -> np.ndarray:
    """Stack feature vectors into one float64 matrix, validating that all
    rows share a dimension and contain only finite values."""
    if isinstance(features, np.ndarray):
        mat = np.atleast_2d(np.asarray(features, dtype=np.float64))
    else:
        if len(features) == 0:
            raise DataError("empty feature set")
        rows = []
        for vec in features:
            if isinstance(vec, SparseCountVector):
                rows.append(vec.to_dense())
            else:
                rows.append(np.asarray(vec, dtype=np.float64))
        widths = {row.shape[-1] for row in rows}
        if len(widths) != 1:
            raise DataError(f"inconsistent feature dimensions: {sorted(widths)}")
        mat = np.vstack(rows)
    if dim is not None and mat.shape[1] != dim:
        raise DataError(
            f"feature dimension mismatch: got {mat.shape[1]}, expected {dim}"
        )
    if not np.all(np.isfinite(mat)):
        raise DataError("feature matrix contains non-finite values")
    return mat


def _as_labels(labels: Sequence[int] | np.ndarray, n: int) -> np.ndarray:
    arr = np.asarray([int(v) for v in labels], dtype=np.int64)
    if arr.shape != (n,):
        raise DataError(f"expected {n} labels, got {arr.shape}")
    if arr.size and not np.all((arr >= 0) & (arr <= 2)):
        raise DataError("labels must be sentiment codes 0, 1, or 2")
    return arr


# ---------------------------------------------------------------------------
# KNN


@dataclass
class KnnModel:
    vectors: np.ndarray
    labels: np.ndarray
    k: int = 5
    metric: str = "cosine"
    feature_descriptor: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def to_payload(self) -> dict:
        return {
            "kind": "knn",
            "k": self.k,
            "metric": self.metric,
            "vectors": [[float(v) for v in row] for row in self.vectors],
            "labels": [int(v) for v in self.labels],
            "feature_descriptor": self.feature_descriptor,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "KnnModel":
        try:
            return cls(
                vectors=np.array(payload["vectors"], dtype=np.float64),
                labels=np.array(payload["labels"], dtype=np.int64),
                k=int(payload["k"]),
                metric=str(payload["metric"]),
                feature_descriptor=dict(payload.get("feature_descriptor", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed KNN payload: {exc}") from None


def knn_fit(
    features,
    labels: Sequence[int],
    k: int = 5,
    metric: str = "cosine",
    feature_descriptor: dict | None = None,
) -> KnnModel:
    mat = as_feature_matrix(features)
    y = _as_labels(labels, mat.shape[0])
    if mat.shape[0] == 0:
        raise DataError("cannot fit KNN on empty training data")
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if k > mat.shape[0]:
        raise ConfigError(f"k={k} exceeds training size {mat.shape[0]}")
    if metric not in _METRICS:
        raise ConfigError(f"unknown metric {metric!r}; expected one of {_METRICS}")
    return KnnModel(
        vectors=mat,
        labels=y,
        k=k,
        metric=metric,
        feature_descriptor=feature_descriptor or {},
    )


def _distances(model: KnnModel, query: np.ndarray) -> np.ndarray:
    if model.metric == "cosine":
        # Cosine distance 1 - cos(a, b); a zero vector on either side has
        # similarity 0 by convention, hence distance 1.
        norms = np.linalg.norm(model.vectors, axis=1)
        qnorm = float(np.linalg.norm(query))
        dots = model.vectors @ query
        denom = norms * qnorm
        sims = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)
        return 1.0 - sims
    diff = model.vectors - query
    return np.sqrt(np.sum(diff * diff, axis=1))


def _vote(model: KnnModel, dist: np.ndarray) -> tuple[int, np.ndarray]:
    # Neighbor selection: ascending distance, ties by lower training index.
    order = np.lexsort((np.arange(len(dist)), dist))[: model.k]
    counts = np.zeros(3, dtype=np.int64)
    sums = np.zeros(3, dtype=np.float64)
    for idx in order:
        cls = int(model.labels[idx])
        counts[cls] += 1
        sums[cls] += dist[idx]
    best = int(np.max(counts))
    tied = [c for c in range(3) if counts[c] == best]
    if len(tied) > 1:
        # Vote tie: smaller summed distance wins, then smaller class code.
        tied.sort(key=lambda c: (sums[c], c))
    return tied[0], counts.astype(np.float64)


def knn_predict(model: KnnModel, query) -> Sentiment:
    q = np.asarray(
        query.to_dense() if isinstance(query, SparseCountVector) else query,
        dtype=np.float64,
    )
    if q.shape != (model.dim,):
        raise DataError(
            f"query dimension {q.shape} does not match model dimension {model.dim}"
        )
    winner, _ = _vote(model, _distances(model, q))
    return Sentiment(winner)


def knn_predict_batch(model: KnnModel, features) -> list[Sentiment]:
    mat = as_feature_matrix(features, dim=model.dim)
    return [knn_predict(model, row) for row in mat]


# ---------------------------------------------------------------------------
# Linear SVM (Pegasos-style SGD on the L2-regularized hinge objective)


@dataclass
class LinearBinaryModel:
    weights: np.ndarray
    bias: float
    lam: float
    epochs: int
    seed: int

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def score(self, x: np.ndarray) -> float:
        return float(self.weights @ x + self.bias)

    def score_batch(self, mat: np.ndarray) -> np.ndarray:
        return mat @ self.weights + self.bias

    def to_payload(self) -> dict:
        return {
            "kind": "svm",
            "weights": [float(v) for v in self.weights],
            "bias": float(self.bias),
            "lam": float(self.lam),
            "epochs": int(self.epochs),
            "seed": int(self.seed),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "LinearBinaryModel":
        try:
            return cls(
                weights=np.array(payload["weights"], dtype=np.float64),
                bias=float(payload["bias"]),
                lam=float(payload["lam"]),
                epochs=int(payload["epochs"]),
                seed=int(payload["seed"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed SVM payload: {exc}") from None


def svm_objective(w: np.ndarray, mat: np.ndarray, y: np.ndarray, lam: float) -> float:
    """L2-regularized hinge objective λ/2·|w|² + mean(max(0, 1 − y·(Xw)))."""
    margins = y * (mat @ w)
    return float(0.5 * lam * (w @ w) + np.mean(np.maximum(0.0, 1.0 - margins)))


def svm_subgradient(
    w: np.ndarray, mat: np.ndarray, y: np.ndarray, lam: float
) -> np.ndarray:
    """A subgradient of :func:`svm_objective` (zero hinge contribution is
    chosen exactly at margin 1)."""
    margins = y * (mat @ w)
    active = margins < 1.0
    grad = lam * w.copy()
    if np.any(active):
        grad -= (y[active, None] * mat[active]).sum(axis=0) / mat.shape[0]
    return grad


def _check_binary_labels(y: np.ndarray) -> None:
    values = set(np.unique(y).tolist())
    if not values <= {-1, 1}:
        raise DataError(f"binary labels must be ±1, got {sorted(values)}")
    if values != {-1, 1}:
        raise DataError("binary training data must contain both labels")


def svm_train_binary(
    features,
    labels: Sequence[int] | np.ndarray,
    lam: float = 1e-4,
    epochs: int = 20,
    seed: int = 0,
) -> LinearBinaryModel:
    """Pegasos: per step t, scale w by (1 − η_t·λ) with η_t = 1/(λ·t) and
    add η_t·y·x when the margin is violated.  The bias rides along as a
    constant-1 appended feature, so it is regularized like any weight."""
    mat = as_feature_matrix(features)
    y = np.asarray([int(v) for v in labels], dtype=np.int64)
    if y.shape != (mat.shape[0],):
        raise DataError(f"expected {mat.shape[0]} labels, got {y.shape}")
    _check_binary_labels(y)
    if lam <= 0:
        raise ConfigError("regularization λ must be positive")
    if epochs < 1:
        raise ConfigError("epochs must be >= 1")

    aug = np.hstack([mat, np.ones((mat.shape[0], 1))])
    w = np.zeros(aug.shape[1], dtype=np.float64)
    rng = np.random.default_rng(seed)
    t = 0
    for _epoch in range(epochs):
        for i in rng.permutation(aug.shape[0]):
            t += 1
            eta = 1.0 / (lam * t)
            margin = y[i] * (w @ aug[i])
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += eta * y[i] * aug[i]
    if not np.all(np.isfinite(w)):
        raise NumericError("SVM training produced non-finite weights")
    obj = svm_objective(w, aug, y.astype(np.float64), lam)
    if not math.isfinite(obj):
        raise NumericError("SVM training produced a non-finite objective")
    return LinearBinaryModel(
        weights=w[:-1], bias=float(w[-1]), lam=lam, epochs=epochs, seed=seed
    )


# ---------------------------------------------------------------------------
# AdaBoost over depth-1 decision stumps


@dataclass(frozen=True)
class StumpModel:
    feature: int
    threshold: float
    polarity: int  # +1: predict +1 at/above threshold; -1: predict -1 there

    def predict(self, mat: np.ndarray) -> np.ndarray:
        # equality counts as "above": polarity * sign(x - threshold) with
        # sign(0) taken as +1; thresholds sit at data midpoints so this
        # only matters for unseen inputs
        above = mat[:, self.feature] >= self.threshold
        return np.where(above, self.polarity, -self.polarity).astype(np.float64)


@dataclass
class AdaBoostBinaryModel:
    rounds: list[tuple[StumpModel, float, float]]  # (stump, alpha, epsilon)
    requested_rounds: int

    def score_batch(self, mat: np.ndarray) -> np.ndarray:
        total = np.zeros(mat.shape[0], dtype=np.float64)
        for stump, alpha, _eps in self.rounds:
            total += alpha * stump.predict(mat)
        return total

    def score(self, x: np.ndarray) -> float:
        return float(self.score_batch(np.atleast_2d(x))[0])

    def to_payload(self) -> dict:
        return {
            "kind": "adaboost",
            "requested_rounds": int(self.requested_rounds),
            "rounds": [
                {
                    "feature": int(s.feature),
                    "threshold": float(s.threshold),
                    "polarity": int(s.polarity),
                    "alpha": float(a),
                    "eps": float(e),
                }
                for s, a, e in self.rounds
            ],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "AdaBoostBinaryModel":
        try:
            rounds = [
                (
                    StumpModel(
                        feature=int(r["feature"]),
                        threshold=float(r["threshold"]),
                        polarity=int(r["polarity"]),
                    ),
                    float(r["alpha"]),
                    float(r["eps"]),
                )
                for r in payload["rounds"]
            ]
            return cls(rounds=rounds, requested_rounds=int(payload["requested_rounds"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed AdaBoost payload: {exc}") from None


def _best_stump(
    mat: np.ndarray, y: np.ndarray, w: np.ndarray, orders: np.ndarray
) -> tuple[StumpModel, float] | None:
    """Weighted-error-minimizing stump over all features and midpoints.

    Ties resolve to the lowest feature index, then the lowest threshold,
    with polarity +1 preferred — fixed so retraining is reproducible."""
    n, d = mat.shape
    if n < 2:
        return None
    sv = np.take_along_axis(mat, orders, axis=0)
    sy = np.take_along_axis(np.broadcast_to(y[:, None], (n, d)), orders, axis=0)
    sw = np.take_along_axis(np.broadcast_to(w[:, None], (n, d)), orders, axis=0)
    wp = np.cumsum(sw * (sy > 0), axis=0)
    wn = np.cumsum(sw * (sy < 0), axis=0)
    total_n = wn[-1]
    # Cut after sorted position i: polarity +1 predicts -1 at or below the
    # midpoint and +1 above it.
    err_plus = wp[:-1] + (total_n - wn[:-1])
    err_minus = 1.0 - err_plus
    valid = sv[1:] > sv[:-1]
    if not np.any(valid):
        return None
    err_plus = np.where(valid, err_plus, np.inf)
    err_minus = np.where(valid, err_minus, np.inf)

    # argmin over the transposed views scans feature-major, giving the
    # documented tie order for free.
    pj, pi = np.unravel_index(np.argmin(err_plus.T), (d, n - 1))
    mj, mi = np.unravel_index(np.argmin(err_minus.T), (d, n - 1))
    if err_minus[mi, mj] < err_plus[pi, pj]:
        feature, cut, polarity, eps = mj, mi, -1, float(err_minus[mi, mj])
    else:
        feature, cut, polarity, eps = pj, pi, 1, float(err_plus[pi, pj])
    threshold = float((sv[cut, feature] + sv[cut + 1, feature]) / 2.0)
    return StumpModel(int(feature), threshold, polarity), eps


def adaboost_train_binary(
    features, labels: Sequence[int] | np.ndarray, rounds: int = 50
) -> AdaBoostBinaryModel:
    """Classic binary AdaBoost.  Per round the best midpoint stump is fit
    against the current weights; ε ≥ 0.5 stops without storing the round,
    ε = 0 stores the stump with a capped α and stops.  Weights are
    renormalized after every stored round."""
    mat = as_feature_matrix(features)
    y = np.asarray([int(v) for v in labels], dtype=np.int64)
    if y.shape != (mat.shape[0],):
        raise DataError(f"expected {mat.shape[0]} labels, got {y.shape}")
    _check_binary_labels(y)
    if rounds < 1:
        raise ConfigError("rounds must be >= 1")

    n = mat.shape[0]
    yf = y.astype(np.float64)
    w = np.full(n, 1.0 / n, dtype=np.float64)
    orders = np.argsort(mat, axis=0, kind="stable")
    model = AdaBoostBinaryModel(rounds=[], requested_rounds=rounds)
    for _t in range(rounds):
        found = _best_stump(mat, yf, w, orders)
        if found is None:
            if not model.rounds:
                raise DataError(
                    "no stump candidates: every feature is constant "
                    "across the training data"
                )
            break
        stump, eps = found
        if eps >= 0.5:
            break
        if eps <= _EPS_ZERO:
            model.rounds.append((stump, _ALPHA_CAP, 0.0))
            break
        alpha = 0.5 * math.log((1.0 - eps) / eps)
        model.rounds.append((stump, alpha, eps))
        w = w * np.exp(-alpha * yf * stump.predict(mat))
        w /= w.sum()
    if not model.rounds:
        raise DataError(
            "boosting found no stump with weighted error below 0.5 on round 1"
        )
    return model


# ---------------------------------------------------------------------------
# One-vs-rest wrapper


@dataclass
class OvrModel:
    kind: str  # "svm" | "adaboost" | "knn"
    scorers: list[LinearBinaryModel] | list[AdaBoostBinaryModel] | None
    knn: KnnModel | None
    native_multiclass: bool
    dim: int
    feature_descriptor: dict = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "kind": "ovr",
            "learner": self.kind,
            "native_multiclass": self.native_multiclass,
            "dim": int(self.dim),
            "scorers": [s.to_payload() for s in self.scorers] if self.scorers else None,
            "knn": self.knn.to_payload() if self.knn else None,
            "feature_descriptor": self.feature_descriptor,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "OvrModel":
        try:
            learner = str(payload["learner"])
            scorers = None
            if payload.get("scorers") is not None:
                maker = (
                    LinearBinaryModel.from_payload
                    if learner == "svm"
                    else AdaBoostBinaryModel.from_payload
                )
                scorers = [maker(p) for p in payload["scorers"]]
            knn = (
                KnnModel.from_payload(payload["knn"])
                if payload.get("knn") is not None
                else None
            )
            return cls(
                kind=learner,
                scorers=scorers,
                knn=knn,
                native_multiclass=bool(payload["native_multiclass"]),
                dim=int(payload["dim"]),
                feature_descriptor=dict(payload.get("feature_descriptor", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed OVR payload: {exc}") from None


def _require_all_classes(y: np.ndarray) -> None:
    present = set(np.unique(y).tolist())
    missing = [s for s in Sentiment if s.value not in present]
    if missing:
        names = ", ".join(s.key for s in missing)
        raise DataError(f"class absent from training data: {names}")


def ovr_train(
    kind: str,
    features,
    labels: Sequence[int],
    *,
    k: int = 5,
    metric: str = "cosine",
    lam: float = 1e-4,
    epochs: int = 20,
    rounds: int = 50,
    seed: int = 0,
    feature_descriptor: dict | None = None,
) -> OvrModel:
    """Train one binary scorer per sentiment class (labels mapped to +1
    for the class, −1 for the rest).  KNN trains once, natively
    multiclass, and the wrapper records that.  Binary learners get
    independent generators seeded ``seed + class_code``."""
    mat = as_feature_matrix(features)
    y = _as_labels(labels, mat.shape[0])
    _require_all_classes(y)
    descriptor = feature_descriptor or {}

    if kind == "knn":
        model = knn_fit(
            mat, y, k=k, metric=metric, feature_descriptor=descriptor
        )
        return OvrModel(
            kind="knn",
            scorers=None,
            knn=model,
            native_multiclass=True,
            dim=mat.shape[1],
            feature_descriptor=descriptor,
        )
    if kind == "svm":
        scorers_svm: list[LinearBinaryModel] = []
        for cls in Sentiment:
            binary = np.where(y == cls.value, 1, -1)
            scorers_svm.append(
                svm_train_binary(
                    mat, binary, lam=lam, epochs=epochs, seed=seed + cls.value
                )
            )
        return OvrModel(
            kind="svm",
            scorers=scorers_svm,
            knn=None,
            native_multiclass=False,
            dim=mat.shape[1],
            feature_descriptor=descriptor,
        )
    if kind == "adaboost":
        scorers_ada: list[AdaBoostBinaryModel] = []
        for cls in Sentiment:
            binary = np.where(y == cls.value, 1, -1)
            scorers_ada.append(adaboost_train_binary(mat, binary, rounds=rounds))
        return OvrModel(
            kind="adaboost",
            scorers=scorers_ada,
            knn=None,
            native_multiclass=False,
            dim=mat.shape[1],
            feature_descriptor=descriptor,
        )
    raise ConfigError(f"unknown learner kind {kind!r}; expected knn, svm, or adaboost")


def _ovr_scores(model: OvrModel, mat: np.ndarray) -> np.ndarray:
    if model.kind == "knn":
        assert model.knn is not None
        votes = np.zeros((mat.shape[0], 3), dtype=np.float64)
        for i, row in enumerate(mat):
            _, counts = _vote(model.knn, _distances(model.knn, row))
            votes[i] = counts
        return votes
    assert model.scorers is not None
    cols = [scorer.score_batch(mat) for scorer in model.scorers]
    return np.stack(cols, axis=1)


def ovr_predict(model: OvrModel, vector) -> tuple[Sentiment, np.ndarray]:
    """Predicted class plus the three raw per-class scores.  Argmax ties
    break toward the smaller class code.  For native KNN the scores are
    the neighbor vote counts (informational only)."""
    q = np.asarray(
        vector.to_dense() if isinstance(vector, SparseCountVector) else vector,
        dtype=np.float64,
    )
    if q.shape != (model.dim,):
        raise DataError(
            f"query dimension {q.shape} does not match model dimension {model.dim}"
        )
    if model.kind == "knn":
        assert model.knn is not None
        winner, counts = _vote(model.knn, _distances(model.knn, q))
        return Sentiment(winner), counts
    scores = _ovr_scores(model, q[None, :])[0]
    return Sentiment(int(np.argmax(scores))), scores


def ovr_predict_batch(model: OvrModel, features) -> list[Sentiment]:
    mat = as_feature_matrix(features, dim=model.dim)
    if model.kind == "knn":
        assert model.knn is not None
        return [knn_predict(model.knn, row) for row in mat]
    scores = _ovr_scores(model, mat)
    return [Sentiment(int(c)) for c in np.argmax(scores, axis=1)]


# ---------------------------------------------------------------------------
# Persistence

_PAYLOAD_KINDS = {
    "knn": KnnModel,
    "svm": LinearBinaryModel,
    "adaboost": AdaBoostBinaryModel,
    "ovr": OvrModel,
}


def save_model(model, path: str | Path) -> None:
    payload = model.to_payload()
    save_container(path, payload["kind"], payload)


def load_model(path: str | Path):
    obj = load_container(path)
    kind = obj.get("kind")
    maker = _PAYLOAD_KINDS.get(kind)
    if maker is None:
        raise DataError(f"unknown model kind {kind!r} in {path}")
    return maker.from_payload(obj["payload"])
