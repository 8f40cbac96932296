"""Server-side recursive knowledge fusion.

The server folds client uploads one at a time into a cumulative Gram
matrix and a fused model. The fold is mathematically order-free (up to
rounding) and never needs more than one upload in memory; the global
model is derived on demand from the folded state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .client import LocalArtifacts
from .errors import DataError, EmptyFederationError, ProtocolError

__all__ = [
    "AggregatorState",
    "GlobalModel",
    "init_state",
    "absorb",
    "fusion_weights",
    "derive_global",
    "downlink",
]


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class AggregatorState:
    """Cumulative Gram matrix and fused model after ``absorbed`` uploads."""

    feature_dim: int
    class_count: int
    beta: float
    absorbed: int
    gram_total: np.ndarray  # (m, m), sum of client Gram matrices
    fused: np.ndarray  # (m, d)

    def __post_init__(self):
        object.__setattr__(self, "gram_total", _frozen(self.gram_total))
        object.__setattr__(self, "fused", _frozen(self.fused))


@dataclass(frozen=True)
class GlobalModel:
    """The collectively trained classifier, with its provenance count."""

    weights: np.ndarray  # (m, d)
    absorbed: int

    def __post_init__(self):
        object.__setattr__(
            self, "weights", _frozen(linalg.as_matrix(self.weights, "weights"))
        )


def init_state(feature_dim: int, class_count: int, beta: float) -> AggregatorState:
    """Fresh aggregator with zeroed accumulators and no clients absorbed."""
    if feature_dim < 1 or class_count < 1:
        raise DataError(
            f"dimensions must be >= 1, got ({feature_dim}, {class_count})"
        )
    if beta < 0:
        raise DataError(f"aggregation requires beta >= 0, got {beta}")
    return AggregatorState(
        feature_dim=feature_dim,
        class_count=class_count,
        beta=beta,
        absorbed=0,
        gram_total=np.zeros((feature_dim, feature_dim)),
        fused=np.zeros((feature_dim, class_count)),
    )


def _check_dims(state: AggregatorState, art: LocalArtifacts) -> None:
    if art.feature_dim != state.feature_dim or art.class_count != state.class_count:
        raise ProtocolError(
            f"upload from client {art.client_id} has dims "
            f"({art.feature_dim}, {art.class_count}), aggregator expects "
            f"({state.feature_dim}, {state.class_count})"
        )


def absorb(state: AggregatorState, art: LocalArtifacts) -> AggregatorState:
    """Fold one client upload into the state, returning the new state.

    The fused model update is realized with a single solve,
    M' = S'^{-1} (S M + C L), which is algebraically the weighted blend of
    retained and incoming knowledge but costs one factorization instead of
    two. The first upload needs no solve at all: its blend weight is the
    identity, so the fused model is the client model itself.
    """
    _check_dims(state, art)
    gram_total = state.gram_total + art.gram
    if state.absorbed == 0:
        fused = art.model.copy()
    else:
        fused = linalg.solve_spd(
            gram_total, state.gram_total @ state.fused + art.gram @ art.model
        )
    return AggregatorState(
        feature_dim=state.feature_dim,
        class_count=state.class_count,
        beta=state.beta,
        absorbed=state.absorbed + 1,
        gram_total=gram_total,
        fused=fused,
    )


def fusion_weights(
    state: AggregatorState, art: LocalArtifacts
) -> tuple[np.ndarray, np.ndarray]:
    """Blend weights (retention, incorporation) the next absorb would use.

    Read-only companion to :func:`absorb`: the pair solves
    S'^{-1} S and S'^{-1} C for S' = S + C, and sums to the identity.
    """
    _check_dims(state, art)
    gram_total = state.gram_total + art.gram
    retention = linalg.solve_spd(gram_total, state.gram_total)
    incorporation = linalg.solve_spd(gram_total, np.asarray(art.gram))
    return retention, incorporation


def derive_global(state: AggregatorState) -> GlobalModel:
    """Turn the folded state into the all-data global model.

    Solves (S - (k-1) beta I) G = S M; the left-hand side equals the
    stacked-feature Gram matrix plus a single ridge term, so it is
    positive definite whenever beta > 0.
    """
    if state.absorbed < 1:
        raise EmptyFederationError("no clients absorbed; nothing to derive")
    lhs, rhs = linalg.global_system(
        state.gram_total, state.fused, state.absorbed, state.beta
    )
    return GlobalModel(weights=linalg.solve_spd(lhs, rhs), absorbed=state.absorbed)


def downlink(state: AggregatorState) -> tuple[np.ndarray, np.ndarray]:
    """The pair every client receives for personalization, by value."""
    return state.gram_total.copy(), state.fused.copy()
