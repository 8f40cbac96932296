"""Experiment orchestration: end-to-end runs, hyperparameter sweeps, and
exact communication/computation accounting.

A run is one pass of the single-round protocol: partition, parallel local
training, a fixed-order sequential fold on the server, one downlink, and
parallel personalization plus evaluation. Every uplink and downlink is
actually serialized so reported byte counts are measurements, not
estimates; flop counts come from the documented closed-form model.
"""

from __future__ import annotations

import csv
import json
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import jsonschema
import numpy as np

from . import client as fc
from . import data as fd
from . import server as fs
from .errors import ConfigError, FedhipError, SingularMatrixError
from .client import FeatureBundle

__all__ = [
    "ExperimentConfig",
    "RunReport",
    "run_experiment",
    "sweep",
    "write_sweep_csv",
    "overhead_report",
    "pack_matrix_pair",
    "unpack_matrix_pair",
    "predicted_message_bytes",
    "MESSAGE_HEADER_BYTES",
    "REPORT_SCHEMA",
    "FLOP_MODEL",
]

MESSAGE_MAGIC = b"FHMP"
MESSAGE_VERSION = 1
_MSG_HEADER = struct.Struct("<4sIII")  # magic, version, m, d
MESSAGE_HEADER_BYTES = _MSG_HEADER.size

# Explicit constants behind the reported flop counts. Gram products count a
# multiply-add as two flops; the Cholesky factorization is m^3/3.
FLOP_MODEL = {
    "client_phase1": "2*N*m^2 (gram) + 2*N*m*d (cross) + m^3/3 (factor) + 2*m^2*d (solve)",
    "client_phase3": "2*N*m^2 + 2*N*m*d + 2*m^2*d (gram@fused) + m^3/3 + 2*m^2*d",
    "server_absorb": "m^2 (gram sum) + 4*m^2*d (two products) + m^3/3 + 2*m^2*d",
    "server_derive": "m (diag shift) + 2*m^2*d + m^3/3 + 2*m^2*d",
}


def flops_client_phase1(n: int, m: int, d: int) -> float:
    return 2 * n * m * m + 2 * n * m * d + m**3 / 3 + 2 * m * m * d


def flops_client_phase3(n: int, m: int, d: int) -> float:
    return 2 * n * m * m + 2 * n * m * d + 2 * m * m * d + m**3 / 3 + 2 * m * m * d


def flops_server_absorb(m: int, d: int) -> float:
    return m * m + 4 * m * m * d + m**3 / 3 + 2 * m * m * d


def flops_server_derive(m: int, d: int) -> float:
    return m + 2 * m * m * d + m**3 / 3 + 2 * m * m * d


def pack_matrix_pair(square: np.ndarray, tall: np.ndarray) -> bytes:
    """Serialize one protocol message: an m-by-m and an m-by-d matrix.

    Fixed 16-byte header, then both matrices as row-major little-endian
    f32, so the payload is exactly 4*(m^2 + m*d) bytes.
    """
    square = np.asarray(square, dtype=np.float64)
    tall = np.asarray(tall, dtype=np.float64)
    m = square.shape[0]
    if square.shape != (m, m) or tall.shape[0] != m:
        raise ConfigError(
            f"message matrices disagree: {square.shape} vs {tall.shape}"
        )
    header = _MSG_HEADER.pack(MESSAGE_MAGIC, MESSAGE_VERSION, m, tall.shape[1])
    return header + square.astype("<f4").tobytes() + tall.astype("<f4").tobytes()


def unpack_matrix_pair(raw: bytes) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`pack_matrix_pair`, widening back to float64."""
    if len(raw) < MESSAGE_HEADER_BYTES:
        raise ConfigError("message shorter than its header")
    magic, version, m, d = _MSG_HEADER.unpack_from(raw)
    if magic != MESSAGE_MAGIC or version != MESSAGE_VERSION:
        raise ConfigError("not a protocol message")
    expected = MESSAGE_HEADER_BYTES + 4 * (m * m + m * d)
    if len(raw) != expected:
        raise ConfigError(f"message should be {expected} bytes, got {len(raw)}")
    body = np.frombuffer(raw, dtype="<f4", offset=MESSAGE_HEADER_BYTES)
    square = body[: m * m].astype(np.float64).reshape(m, m)
    tall = body[m * m :].astype(np.float64).reshape(m, d)
    return square, tall


def predicted_message_bytes(m: int, d: int) -> int:
    """Exact on-the-wire size of one uplink or downlink message."""
    return MESSAGE_HEADER_BYTES + 4 * (m * m + m * d)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs; exactly one data source is set."""

    client_count: int
    alpha: float
    beta: float
    seed: int
    concentration: float = 0.1
    split_ratio: float = 0.8
    d_min: int | None = None
    bundles_dir: str | None = None
    synth: fd.SynthSpec | None = None
    out_dir: str | None = None
    jobs: int = 1
    allow_beta_zero: bool = False

    def __post_init__(self):
        if (self.bundles_dir is None) == (self.synth is None):
            raise ConfigError("set exactly one of bundles_dir or synth")
        if self.client_count < 1:
            raise ConfigError(f"client_count must be >= 1, got {self.client_count}")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.beta < 0 or (self.beta == 0 and not self.allow_beta_zero):
            raise ConfigError(
                "beta must be > 0 (pass allow_beta_zero to run the beta = 0 "
                f"ablation), got {self.beta}"
            )
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError(f"split ratio must be in (0, 1), got {self.split_ratio}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")

    def describe(self) -> dict:
        doc = {
            "K": self.client_count,
            "lambda": self.concentration,
            "alpha": self.alpha,
            "beta": self.beta,
            "seed": self.seed,
            "split_ratio": self.split_ratio,
            "d_min": self.d_min,
            "jobs": self.jobs,
        }
        if self.bundles_dir is not None:
            doc["source"] = {"bundles_dir": str(self.bundles_dir)}
        else:
            doc["source"] = {"synth": asdict(self.synth)}
        return doc


REPORT_SCHEMA = {
    "type": "object",
    "required": [
        "config",
        "feature_dim",
        "class_count",
        "per_client",
        "mean_acc_personalized",
        "mean_acc_global",
        "weighted_mean_acc_personalized",
        "weighted_mean_acc_global",
        "messages",
        "overhead",
        "timings",
    ],
    "properties": {
        "config": {"type": "object"},
        "feature_dim": {"type": "integer", "minimum": 1},
        "class_count": {"type": "integer", "minimum": 1},
        "per_client": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": [
                    "client_id",
                    "n_train",
                    "n_test",
                    "acc_personalized",
                    "acc_global",
                    "uplink_bytes",
                    "downlink_bytes",
                ],
                "properties": {
                    "client_id": {"type": "integer"},
                    "n_train": {"type": "integer", "minimum": 1},
                    "n_test": {"type": "integer", "minimum": 1},
                    "acc_personalized": {"type": "number", "minimum": 0, "maximum": 1},
                    "acc_global": {"type": "number", "minimum": 0, "maximum": 1},
                    "uplink_bytes": {"type": "integer", "minimum": 0},
                    "downlink_bytes": {"type": "integer", "minimum": 0},
                },
            },
        },
        "mean_acc_personalized": {"type": "number"},
        "mean_acc_global": {"type": "number"},
        "weighted_mean_acc_personalized": {"type": "number"},
        "weighted_mean_acc_global": {"type": "number"},
        "messages": {
            "type": "object",
            "required": ["uplinks", "downlinks"],
            "properties": {
                "uplinks": {"type": "integer"},
                "downlinks": {"type": "integer"},
            },
        },
        "overhead": {"type": "object"},
        "timings": {"type": "object"},
    },
}


@dataclass(frozen=True)
class RunReport:
    """One experiment's results; serializes to a schema-validated dict."""

    config: dict
    feature_dim: int
    class_count: int
    per_client: list
    mean_acc_personalized: float
    mean_acc_global: float
    weighted_mean_acc_personalized: float
    weighted_mean_acc_global: float
    messages: dict
    overhead: dict
    timings: dict

    def to_dict(self) -> dict:
        doc = asdict(self)
        jsonschema.validate(doc, REPORT_SCHEMA)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass(frozen=True)
class _Prepared:
    """Materialized data for one experiment: train bundles and test splits."""

    bundles: list
    tests: list  # (features, labels) per client
    feature_dim: int
    class_count: int


def _load_bundle_dir(cfg: ExperimentConfig) -> list[FeatureBundle]:
    root = Path(cfg.bundles_dir)
    if not root.is_dir():
        raise ConfigError(f"bundle directory {root} does not exist")
    paths = sorted(root.glob("*.fhip"))
    if not paths:
        raise ConfigError(f"no .fhip bundles under {root}")
    if len(paths) != cfg.client_count:
        raise ConfigError(
            f"found {len(paths)} bundles under {root} but K={cfg.client_count}"
        )
    return [fd.read_bundle(p, client_id=k) for k, p in enumerate(paths)]


def _prepare(cfg: ExperimentConfig) -> _Prepared:
    """Resolve the data source into per-client train bundles and test sets.

    Bundle files already fix who owns what, so only the per-client 8:2
    split applies to them; the synthetic pool is Dirichlet-partitioned
    first. The partition uses cfg.seed and the split uses cfg.seed + 1.
    """
    if cfg.bundles_dir is not None:
        full = _load_bundle_dir(cfg)
        dims = {(b.feature_dim, b.class_count) for b in full}
        if len(dims) != 1:
            raise ConfigError(f"bundles disagree on dimensions: {sorted(dims)}")
        ds = fd.Dataset(
            features=np.vstack([b.features for b in full]),
            labels=np.concatenate([b.labels for b in full]),
            class_count=full[0].class_count,
        )
        assignment = np.concatenate(
            [np.full(b.sample_count, k, dtype=np.int64) for k, b in enumerate(full)]
        )
        part = fd.PartitionSpec(
            client_count=cfg.client_count,
            concentration=cfg.concentration,
            seed=cfg.seed,
            d_min=0,
            assignment=assignment,
            labels=ds.labels,
            class_count=ds.class_count,
        )
    else:
        ds = fd.synth_features(cfg.synth)
        part = fd.dirichlet_partition(
            ds, cfg.client_count, cfg.concentration, seed=cfg.seed, d_min=cfg.d_min
        )
    part = fd.train_test_split(part, cfg.split_ratio, seed=cfg.seed + 1)

    bundles, tests = [], []
    for k in range(cfg.client_count):
        try:
            bundles.append(fd.train_bundle(ds, part, k))
        except FedhipError as exc:
            raise ConfigError(f"phase 1, client {k}: {exc}") from exc
        features, labels = fd.test_arrays(ds, part, k)
        if labels.size == 0:
            raise ConfigError(f"client {k} has no test samples at this split")
        tests.append((features, labels))
    return _Prepared(
        bundles=bundles,
        tests=tests,
        feature_dim=bundles[0].feature_dim,
        class_count=bundles[0].class_count,
    )


def _map_clients(jobs: int, fn, items: list, phase: str) -> list:
    def wrapped(indexed):
        k, item = indexed
        try:
            return fn(item)
        except SingularMatrixError as exc:
            raise SingularMatrixError(
                f"{phase}, client {k}: {exc}", pivot=exc.pivot
            ) from exc
        except FedhipError as exc:
            raise type(exc)(f"{phase}, client {k}: {exc}") from exc

    if jobs == 1:
        return [wrapped(pair) for pair in enumerate(items)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(wrapped, enumerate(items)))


def _execute(prepared: _Prepared, cfg: ExperimentConfig, alpha: float, beta: float) -> RunReport:
    m, d = prepared.feature_dim, prepared.class_count
    k_total = len(prepared.bundles)
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    artifacts = _map_clients(
        cfg.jobs, lambda b: fc.local_train(b, beta), prepared.bundles, "phase 1"
    )
    timings["phase1_seconds"] = time.perf_counter() - t0

    # Phase 2 is a fixed-order sequential fold over ascending client id,
    # regardless of which uploads "arrived" first, so runs are bitwise
    # reproducible at any parallelism degree. Uplinks are measured by
    # actually serializing each payload.
    t0 = time.perf_counter()
    uplink_bytes = []
    state = fs.init_state(m, d, beta)
    for art in sorted(artifacts, key=lambda a: a.client_id):
        uplink_bytes.append(len(pack_matrix_pair(art.gram, art.model)))
        state = fs.absorb(state, art)
    global_weights = fs.derive_global(state).weights
    gram_total, fused = fs.downlink(state)
    downlink_payload = len(pack_matrix_pair(gram_total, fused))
    timings["phase2_seconds"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    personalized = _map_clients(
        cfg.jobs,
        lambda b: fc.personalize(gram_total, fused, b, alpha, beta, k_total),
        prepared.bundles,
        "phase 3",
    )
    timings["phase3_seconds"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    per_client = []
    for k, (bundle, model) in enumerate(zip(prepared.bundles, personalized)):
        features, labels = prepared.tests[k]
        acc_p = fc.accuracy(fc.predict(model.weights, features), labels)
        acc_g = fc.accuracy(fc.predict(global_weights, features), labels)
        per_client.append(
            {
                "client_id": k,
                "n_train": bundle.sample_count,
                "n_test": int(labels.size),
                "acc_personalized": acc_p,
                "acc_global": acc_g,
                "uplink_bytes": uplink_bytes[k],
                "downlink_bytes": downlink_payload,
            }
        )
    timings["evaluate_seconds"] = time.perf_counter() - t0

    acc_p = np.array([c["acc_personalized"] for c in per_client])
    acc_g = np.array([c["acc_global"] for c in per_client])
    n_test = np.array([c["n_test"] for c in per_client], dtype=np.float64)

    config = cfg.describe()
    config["alpha"] = alpha
    config["beta"] = beta
    overhead = {
        "predicted_message_bytes": predicted_message_bytes(m, d),
        "header_bytes": MESSAGE_HEADER_BYTES,
        "total_uplink_bytes": int(sum(uplink_bytes)),
        "total_downlink_bytes": int(downlink_payload * k_total),
        "client_flops": [
            flops_client_phase1(b.sample_count, m, d)
            + flops_client_phase3(b.sample_count, m, d)
            for b in prepared.bundles
        ],
        "server_flops": k_total * flops_server_absorb(m, d)
        + flops_server_derive(m, d),
        "flop_model": dict(FLOP_MODEL),
    }
    return RunReport(
        config=config,
        feature_dim=m,
        class_count=d,
        per_client=per_client,
        mean_acc_personalized=float(acc_p.mean()),
        mean_acc_global=float(acc_g.mean()),
        weighted_mean_acc_personalized=float((acc_p * n_test).sum() / n_test.sum()),
        weighted_mean_acc_global=float((acc_g * n_test).sum() / n_test.sum()),
        messages={"uplinks": k_total, "downlinks": k_total},
        overhead=overhead,
        timings=timings,
    )


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Full single-round run; writes report.json when out_dir is set."""
    report = _execute(_prepare(cfg), cfg, cfg.alpha, cfg.beta)
    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.to_json() + "\n")
    return report


def sweep(
    cfg: ExperimentConfig,
    alphas: list[float] | None = None,
    betas: list[float] | None = None,
) -> list[RunReport]:
    """One run per grid point over alpha and/or beta.

    The partition and split are materialized once (same seed) and shared
    by every grid point, so points differ only in the hyperparameters.
    """
    alphas = list(alphas) if alphas else [cfg.alpha]
    betas = list(betas) if betas else [cfg.beta]
    if not alphas or not betas:
        raise ConfigError("sweep grid is empty")
    for beta in betas:
        if beta < 0 or (beta == 0 and not cfg.allow_beta_zero):
            raise ConfigError(
                f"beta grid contains {beta}; pass allow_beta_zero for the "
                "beta = 0 ablation"
            )
    for alpha in alphas:
        if alpha < 0:
            raise ConfigError(f"alpha grid contains {alpha}")

    prepared = _prepare(cfg)
    reports = []
    for beta in betas:
        for alpha in alphas:
            reports.append(_execute(prepared, cfg, alpha, beta))
    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(out / "sweep.csv", reports)
    return reports


def write_sweep_csv(path, reports: list[RunReport]) -> None:
    """One CSV row per grid point, in sweep order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["alpha", "beta", "lambda", "mean_acc_personalized", "mean_acc_global"]
        )
        for rep in reports:
            writer.writerow(
                [
                    rep.config["alpha"],
                    rep.config["beta"],
                    rep.config["lambda"],
                    rep.mean_acc_personalized,
                    rep.mean_acc_global,
                ]
            )


def overhead_report(cfg: ExperimentConfig) -> dict:
    """Exact per-client byte counts and flop estimates, without running.

    Byte counts are the exact serialized size of the defined message
    format; a run's measured payloads equal these numbers byte for byte.
    """
    prepared = _prepare(cfg)
    m, d = prepared.feature_dim, prepared.class_count
    message = predicted_message_bytes(m, d)
    per_client = []
    for bundle in prepared.bundles:
        n = bundle.sample_count
        per_client.append(
            {
                "client_id": bundle.client_id,
                "n_train": n,
                "uplink_bytes": message,
                "downlink_bytes": message,
                "client_flops": flops_client_phase1(n, m, d)
                + flops_client_phase3(n, m, d),
                "server_flops": flops_server_absorb(m, d),
            }
        )
    return {
        "feature_dim": m,
        "class_count": d,
        "header_bytes": MESSAGE_HEADER_BYTES,
        "payload_bytes": 4 * (m * m + m * d),
        "per_client": per_client,
        "server_flops_total": len(prepared.bundles) * flops_server_absorb(m, d)
        + flops_server_derive(m, d),
        "flop_model": dict(FLOP_MODEL),
    }
