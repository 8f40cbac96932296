"""Independent brute-force ground truths for every closed-form claim.

Each oracle stacks all client data physically and solves one system with
numpy's LU-based solver, deliberately avoiding the package's own
Cholesky path and recursive fold, so agreement between the two is
evidence rather than tautology. The check_* functions drive the real
pipeline against these oracles (or against an algebraic identity) and
return uniform reports for the test suite and the ``verify`` command.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import client as fc
from . import data as fd
from . import server as fs
from .client import FeatureBundle
from .errors import DataError
from .linalg import random_semi_orthogonal

__all__ = [
    "VerificationReport",
    "batch_global_oracle",
    "batch_fused_oracle",
    "batch_personal_oracle",
    "fold_pipeline",
    "personalized_pipeline",
    "check_privacy",
    "check_weight_identity",
    "check_heterogeneity_invariance",
    "random_instance",
    "theorem1_suite",
    "theorem2_suite",
    "theorem3_suite",
    "lemma1_suite",
    "privacy_suite",
    "weights_suite",
    "SUITES",
]

# Grid the random verification instances are drawn from.
GRID_ALPHAS = (0.0, 1.0, 15.0, 50.0)
GRID_BETAS = (1e-3, 0.5, 5.0)


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of one check on one instance."""

    check: str
    instance: dict
    max_abs_deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_abs_deviation <= self.tolerance

    def to_json(self) -> str:
        return json.dumps(
            {
                "check": self.check,
                "instance": self.instance,
                "max_abs_deviation": self.max_abs_deviation,
                "tolerance": self.tolerance,
                "passed": self.passed,
            },
            sort_keys=True,
        )


def _stack(bundles: list[FeatureBundle]) -> tuple[np.ndarray, np.ndarray]:
    dims = {(b.feature_dim, b.class_count) for b in bundles}
    if len(dims) != 1:
        raise DataError(f"bundles disagree on dimensions: {sorted(dims)}")
    return (
        np.vstack([b.features for b in bundles]),
        np.vstack([b.targets for b in bundles]),
    )


def _ridge_lu(features: np.ndarray, targets: np.ndarray, ridge: float) -> np.ndarray:
    """Ridge solution via plain LU elimination; no shared code with linalg."""
    lhs = features.T @ features + ridge * np.eye(features.shape[1])
    return np.linalg.solve(lhs, features.T @ targets)


def batch_global_oracle(bundles: list[FeatureBundle], beta: float) -> np.ndarray:
    """All-data ridge model from physically stacked features; no recursion."""
    features, targets = _stack(bundles)
    return _ridge_lu(features, targets, beta)


def batch_fused_oracle(bundles: list[FeatureBundle], beta: float) -> np.ndarray:
    """Closed form of the server's fused model: one ridge term per client."""
    features, targets = _stack(bundles)
    return _ridge_lu(features, targets, len(bundles) * beta)


def batch_personal_oracle(
    bundles: list[FeatureBundle], client_index: int, alpha: float, beta: float
) -> np.ndarray:
    """Stacked closed form of the personalized model for one client."""
    features, targets = _stack(bundles)
    mine = bundles[client_index]
    lhs = features.T @ features + beta * np.eye(features.shape[1])
    rhs = features.T @ targets
    if alpha != 0.0:
        lhs += alpha * (mine.features.T @ mine.features)
        rhs = rhs + alpha * (mine.features.T @ mine.targets)
    return np.linalg.solve(lhs, rhs)


def fold_pipeline(
    bundles: list[FeatureBundle], beta: float
) -> tuple[list[fs.AggregatorState], list[fc.LocalArtifacts]]:
    """Run phases 1 and 2, returning the whole state trace and the uploads."""
    arts = [fc.local_train(b, beta) for b in bundles]
    states = [fs.init_state(bundles[0].feature_dim, bundles[0].class_count, beta)]
    for art in arts:
        states.append(fs.absorb(states[-1], art))
    return states, arts


def personalized_pipeline(
    bundles: list[FeatureBundle], client_index: int, alpha: float, beta: float
) -> np.ndarray:
    """Full three-phase run; returns one client's personalized weights."""
    states, _ = fold_pipeline(bundles, beta)
    gram_total, fused = fs.downlink(states[-1])
    model = fc.personalize(
        gram_total, fused, bundles[client_index], alpha, beta, len(bundles)
    )
    return model.weights


def check_privacy(
    bundle: FeatureBundle, beta: float, seeds: list[int], tolerance: float = 1e-9
) -> VerificationReport:
    """Orthogonal row mixing must leave the upload payload unchanged.

    For each seed, the client's features and targets are premultiplied by
    a random orthogonal matrix and retrained; the recomputed Gram matrix
    and local model are compared against the originals.
    """
    base_gram, base_model = fc.train_matrices(
        bundle.features, bundle.targets, beta
    )
    worst = 0.0
    for seed in seeds:
        u = random_semi_orthogonal(bundle.sample_count, seed)
        mixed_gram, mixed_model = fc.train_matrices(
            u @ bundle.features, u @ bundle.targets, beta
        )
        worst = max(
            worst,
            float(np.max(np.abs(mixed_gram - base_gram))),
            float(np.max(np.abs(mixed_model - base_model))),
        )
    return VerificationReport(
        check="privacy",
        instance={
            "N": bundle.sample_count,
            "m": bundle.feature_dim,
            "d": bundle.class_count,
            "beta": beta,
            "seeds": list(seeds),
        },
        max_abs_deviation=worst,
        tolerance=tolerance,
    )


def check_weight_identity(
    states: list[fs.AggregatorState], tolerance: float = 1e-10
) -> VerificationReport:
    """Retention and incorporation weights must sum to the identity.

    Recomputed independently with LU solves from the state trace:
    mu_k + nu_k = S_k^{-1} S_{k-1} + S_k^{-1} C_k = I.
    """
    worst = 0.0
    for prev, cur in zip(states, states[1:]):
        uploaded_gram = cur.gram_total - prev.gram_total
        mu = np.linalg.solve(cur.gram_total, prev.gram_total)
        nu = np.linalg.solve(cur.gram_total, uploaded_gram)
        eye = np.eye(cur.feature_dim)
        worst = max(worst, float(np.max(np.abs(mu + nu - eye))))
    return VerificationReport(
        check="weight_identity",
        instance={"K": len(states) - 1, "m": states[-1].feature_dim},
        max_abs_deviation=worst,
        tolerance=tolerance,
    )


def _carve_fixed_client(
    pool: fd.Dataset, client_count: int, fixed_client: int, concentration: float,
    seed: int,
) -> tuple[FeatureBundle, fd.Dataset]:
    """Split the pool into a fixed client's bundle and the remainder."""
    part = fd.dirichlet_partition(pool, client_count, concentration, seed)
    mine = fd.client_indices(part, fixed_client)
    rest = np.setdiff1d(np.arange(pool.sample_count), mine)
    fixed = FeatureBundle(
        client_id=0,
        features=pool.features[mine],
        targets=fd.one_hot(pool.labels[mine], pool.class_count),
    )
    remainder = fd.Dataset(
        features=pool.features[rest],
        labels=pool.labels[rest],
        class_count=pool.class_count,
    )
    return fixed, remainder


def _others_from_partition(
    remainder: fd.Dataset, part: fd.PartitionSpec
) -> list[FeatureBundle]:
    out = []
    for k in range(part.client_count):
        idx = fd.client_indices(part, k)
        out.append(
            FeatureBundle(
                client_id=k + 1,
                features=remainder.features[idx],
                targets=fd.one_hot(remainder.labels[idx], remainder.class_count),
            )
        )
    return out


def check_heterogeneity_invariance(
    pool: fd.Dataset,
    client_count: int,
    fixed_client: int,
    lambda_a: float,
    lambda_b: float,
    seeds: list[int],
    alpha: float,
    beta: float,
    tolerance: float = 1e-8,
) -> VerificationReport:
    """A client's personalized model must not depend on how the rest of
    the pool is spread over the other clients.

    One client's bundle is carved out of the pool and held fixed; for
    each seed the remainder is partitioned across the other clients once
    under each concentration, the full pipeline runs on both
    configurations, and the fixed client's personalized weights are
    compared. Equal concentrations with an equal seed produce identical
    configurations, so the deviation is exactly zero in that case.
    """
    fixed, remainder = _carve_fixed_client(
        pool, client_count, fixed_client, lambda_a, seed=seeds[0]
    )
    worst = 0.0
    for seed in seeds:
        part_a = fd.dirichlet_partition(remainder, client_count - 1, lambda_a, seed)
        part_b = fd.dirichlet_partition(remainder, client_count - 1, lambda_b, seed)
        weights = []
        for part in (part_a, part_b):
            bundles = [fixed] + _others_from_partition(remainder, part)
            weights.append(personalized_pipeline(bundles, 0, alpha, beta))
        worst = max(worst, float(np.max(np.abs(weights[0] - weights[1]))))
    return VerificationReport(
        check="heterogeneity_invariance",
        instance={
            "K": client_count,
            "fixed_client": fixed_client,
            "lambda_a": lambda_a,
            "lambda_b": lambda_b,
            "alpha": alpha,
            "beta": beta,
            "seeds": list(seeds),
        },
        max_abs_deviation=worst,
        tolerance=tolerance,
    )


def random_instance(
    rng: np.random.Generator,
) -> tuple[list[FeatureBundle], float, float]:
    """Draw one verification instance from the standard grid."""
    client_count = int(rng.integers(2, 11))
    m = int(rng.integers(4, 33))
    d = int(rng.integers(2, 9))
    bundles = []
    for k in range(client_count):
        n = int(rng.integers(d, 51))
        features = rng.standard_normal((n, m))
        labels = rng.integers(0, d, size=n)
        bundles.append(
            FeatureBundle(
                client_id=k, features=features, targets=fd.one_hot(labels, d)
            )
        )
    alpha = float(rng.choice(GRID_ALPHAS))
    beta = float(rng.choice(GRID_BETAS))
    return bundles, alpha, beta


def _instance_descriptor(
    bundles: list[FeatureBundle], alpha: float | None, beta: float, seed: int
) -> dict:
    desc = {
        "K": len(bundles),
        "m": bundles[0].feature_dim,
        "d": bundles[0].class_count,
        "N": [b.sample_count for b in bundles],
        "beta": beta,
        "seed": seed,
    }
    if alpha is not None:
        desc["alpha"] = alpha
    return desc


def theorem1_suite(instances: int = 100, seed: int = 0) -> list[VerificationReport]:
    """Recursive global model vs the stacked ridge oracle."""
    rng = np.random.default_rng(seed)
    reports = []
    for i in range(instances):
        bundles, _, beta = random_instance(rng)
        states, _ = fold_pipeline(bundles, beta)
        derived = fs.derive_global(states[-1]).weights
        oracle = batch_global_oracle(bundles, beta)
        reports.append(
            VerificationReport(
                check="theorem1",
                instance=_instance_descriptor(bundles, None, beta, seed),
                max_abs_deviation=float(np.max(np.abs(derived - oracle))),
                tolerance=1e-8,
            )
        )
    return reports


def theorem2_suite(instances: int = 100, seed: int = 0) -> list[VerificationReport]:
    """Personalized solve vs the stacked personal oracle."""
    rng = np.random.default_rng(seed)
    reports = []
    for i in range(instances):
        bundles, alpha, beta = random_instance(rng)
        target = int(rng.integers(0, len(bundles)))
        mine = personalized_pipeline(bundles, target, alpha, beta)
        oracle = batch_personal_oracle(bundles, target, alpha, beta)
        desc = _instance_descriptor(bundles, alpha, beta, seed)
        desc["client"] = target
        reports.append(
            VerificationReport(
                check="theorem2",
                instance=desc,
                max_abs_deviation=float(np.max(np.abs(mine - oracle))),
                tolerance=1e-8,
            )
        )
    return reports


def lemma1_suite(instances: int = 100, seed: int = 0) -> list[VerificationReport]:
    """Fused model vs its stacked closed form, plus absorb-order freedom."""
    rng = np.random.default_rng(seed)
    reports = []
    for i in range(instances):
        bundles, _, beta = random_instance(rng)
        states, arts = fold_pipeline(bundles, beta)
        fused = states[-1].fused
        oracle = batch_fused_oracle(bundles, beta)
        desc = _instance_descriptor(bundles, None, beta, seed)
        reports.append(
            VerificationReport(
                check="lemma1",
                instance=desc,
                max_abs_deviation=float(np.max(np.abs(fused - oracle))),
                tolerance=1e-8,
            )
        )
        state = fs.init_state(bundles[0].feature_dim, bundles[0].class_count, beta)
        for j in rng.permutation(len(arts)):
            state = fs.absorb(state, arts[j])
        reports.append(
            VerificationReport(
                check="lemma1_order",
                instance=desc,
                max_abs_deviation=float(np.max(np.abs(state.fused - fused))),
                tolerance=1e-8,
            )
        )
    return reports


def privacy_suite(instances: int = 100, seed: int = 0) -> list[VerificationReport]:
    """Orthogonal-mixing indistinguishability over the instance grid."""
    rng = np.random.default_rng(seed)
    reports = []
    for i in range(instances):
        bundles, _, beta = random_instance(rng)
        bundle = bundles[int(rng.integers(0, len(bundles)))]
        seeds = [int(s) for s in rng.integers(0, 2**31 - 1, size=10)]
        reports.append(check_privacy(bundle, beta, seeds))
    return reports


def weights_suite(instances: int = 100, seed: int = 0) -> list[VerificationReport]:
    """Partition-of-unity of the fold weights over the instance grid."""
    rng = np.random.default_rng(seed)
    reports = []
    for i in range(instances):
        bundles, _, beta = random_instance(rng)
        states, _ = fold_pipeline(bundles, beta)
        reports.append(check_weight_identity(states))
    return reports


def theorem3_suite(
    seeds: list[int] | None = None,
    lambda_pair: tuple[float, float] = (0.1, 1.0),
    alpha: float = 15.0,
    beta: float = 0.5,
) -> list[VerificationReport]:
    """Heterogeneity invariance on a balanced synthetic pool."""
    if seeds is None:
        seeds = [0, 1, 2, 3, 4]
    pool = fd.synth_features(
        fd.SynthSpec(
            class_count=6,
            feature_dim=16,
            samples_per_class=60,
            class_mean_scale=2.0,
            noise_sigma=1.0,
            seed=7,
        )
    )
    reports = []
    for seed in seeds:
        reports.append(
            check_heterogeneity_invariance(
                pool,
                client_count=6,
                fixed_client=0,
                lambda_a=lambda_pair[0],
                lambda_b=lambda_pair[1],
                seeds=[seed],
                alpha=alpha,
                beta=beta,
            )
        )
    return reports


SUITES = {
    "theorem1": theorem1_suite,
    "theorem2": theorem2_suite,
    "theorem3": theorem3_suite,
    "lemma1": lemma1_suite,
    "privacy": privacy_suite,
    "weights": weights_suite,
}
