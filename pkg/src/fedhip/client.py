"""Client-side protocol steps: local closed-form training, personalization,
and inference on the client's own test split.

A client never sees other clients' data. It uploads only its regularized
Gram matrix and local model, and later receives the server's cumulative
Gram and fused model to build a personalized classifier in one solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DataError, ProtocolError

__all__ = [
    "FeatureBundle",
    "LocalArtifacts",
    "PersonalizedModel",
    "train_matrices",
    "local_train",
    "weighted_gram",
    "personalize",
    "predict",
    "accuracy",
]


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class FeatureBundle:
    """One client's training data: feature rows and one-hot targets."""

    client_id: int
    features: np.ndarray  # (N, m)
    targets: np.ndarray  # (N, d), one-hot rows

    def __post_init__(self):
        f = linalg.as_matrix(self.features, "features")
        y = linalg.as_matrix(self.targets, "targets")
        if f.shape[0] < 1:
            raise DataError("a feature bundle needs at least one sample")
        if f.shape[0] != y.shape[0]:
            raise DataError(
                f"features have {f.shape[0]} rows but targets have {y.shape[0]}"
            )
        ones = y == 1.0
        if not (np.all(ones.sum(axis=1) == 1) and np.all((y == 0.0) | ones)):
            raise DataError("targets must be one-hot rows (exactly one 1, rest 0)")
        object.__setattr__(self, "features", _frozen(f))
        object.__setattr__(self, "targets", _frozen(y))

    @property
    def sample_count(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def class_count(self) -> int:
        return self.targets.shape[1]

    @property
    def labels(self) -> np.ndarray:
        """Class indices recovered from the one-hot targets."""
        return np.argmax(self.targets, axis=1)


@dataclass(frozen=True)
class LocalArtifacts:
    """The upload payload: regularized Gram matrix and local model."""

    client_id: int
    gram: np.ndarray  # (m, m), F.T F + beta I
    model: np.ndarray  # (m, d)

    def __post_init__(self):
        object.__setattr__(self, "gram", _frozen(linalg.as_matrix(self.gram, "gram")))
        object.__setattr__(
            self, "model", _frozen(linalg.as_matrix(self.model, "model"))
        )
        if self.gram.shape[0] != self.gram.shape[1]:
            raise DataError(f"gram must be square, got {self.gram.shape}")
        if self.model.shape[0] != self.gram.shape[0]:
            raise DataError(
                f"model rows {self.model.shape[0]} do not match gram dim "
                f"{self.gram.shape[0]}"
            )

    @property
    def feature_dim(self) -> int:
        return self.gram.shape[0]

    @property
    def class_count(self) -> int:
        return self.model.shape[1]


@dataclass(frozen=True)
class PersonalizedModel:
    """The linear classifier a client ends up with after the third phase."""

    client_id: int
    weights: np.ndarray  # (m, d)
    alpha: float
    beta: float

    def __post_init__(self):
        object.__setattr__(
            self, "weights", _frozen(linalg.as_matrix(self.weights, "weights"))
        )


def train_matrices(
    features: np.ndarray, targets: np.ndarray, beta: float
) -> tuple[np.ndarray, np.ndarray]:
    """Gram matrix and closed-form local model for raw matrices.

    This is the exact computation a client uploads; it is exposed on raw
    arrays so the masking-invariance check can rerun it on transformed
    inputs that are no longer one-hot.
    """
    c = linalg.regularized_gram(features, beta)
    model = linalg.solve_spd(c, features.T @ targets)
    return c, model


def local_train(bundle: FeatureBundle, beta: float) -> LocalArtifacts:
    """First protocol phase: fit the local ridge model in closed form.

    beta = 0 is tolerated for full-column-rank features (the solve falls
    back to a pivoted factorization); negative values are rejected.
    """
    if beta < 0:
        raise DataError(f"local training requires beta >= 0, got {beta}")
    c, model = train_matrices(bundle.features, bundle.targets, beta)
    return LocalArtifacts(bundle.client_id, c, model)


def weighted_gram(bundle: FeatureBundle, alpha: float, beta: float) -> np.ndarray:
    """Locally weighted Gram matrix alpha * F.T F + beta I."""
    if alpha < 0:
        raise DataError(f"personalization weight must be >= 0, got {alpha}")
    if beta < 0:
        raise DataError(f"regularizer must be >= 0, got {beta}")
    g = alpha * linalg.gram(bundle.features)
    g[np.diag_indices_from(g)] += beta
    return g


def personalize(
    gram_total: np.ndarray,
    fused: np.ndarray,
    bundle: FeatureBundle,
    alpha: float,
    beta: float,
    client_count: int,
) -> PersonalizedModel:
    """Third protocol phase: one solve mixing global and local knowledge.

    ``gram_total`` and ``fused`` are the server downlink produced by an
    aggregation over exactly ``client_count`` clients with the same beta.
    At alpha = 0 this follows the identical solve path as the server-side
    global model, so the two agree bitwise.
    """
    if alpha < 0:
        raise DataError(f"personalization weight must be >= 0, got {alpha}")
    if client_count < 1:
        raise ProtocolError("personalization requires at least one aggregated client")
    s = linalg.as_matrix(gram_total, "gram_total")
    m_fused = linalg.as_matrix(fused, "fused")
    if s.shape != (bundle.feature_dim, bundle.feature_dim):
        raise ProtocolError(
            f"downlink gram has shape {s.shape}, expected "
            f"({bundle.feature_dim}, {bundle.feature_dim})"
        )
    if m_fused.shape != (bundle.feature_dim, bundle.class_count):
        raise ProtocolError(
            f"downlink model has shape {m_fused.shape}, expected "
            f"({bundle.feature_dim}, {bundle.class_count})"
        )

    lhs, rhs = linalg.global_system(s, m_fused, client_count, beta)
    if alpha != 0.0:
        lhs += alpha * linalg.gram(bundle.features)
        rhs = rhs + alpha * (bundle.features.T @ bundle.targets)
    weights = linalg.solve_spd(lhs, rhs)
    return PersonalizedModel(bundle.client_id, weights, alpha, beta)


def predict(weights: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Row-wise argmax of the linear scores; ties go to the lowest class."""
    w = linalg.as_matrix(weights, "weights")
    f = linalg.as_matrix(features, "features")
    if f.shape[1] != w.shape[0]:
        raise DataError(
            f"features have {f.shape[1]} columns but the model expects {w.shape[0]}"
        )
    return np.argmax(f @ w, axis=1)


def accuracy(predicted: np.ndarray, truth: np.ndarray) -> float:
    """Exact-match fraction of two label vectors."""
    p = np.asarray(predicted).ravel()
    t = np.asarray(truth).ravel()
    if p.shape != t.shape:
        raise DataError(f"length mismatch: {p.shape[0]} predictions vs {t.shape[0]} labels")
    if p.size < 1:
        raise DataError("accuracy needs at least one sample")
    return float(np.mean(p == t))
