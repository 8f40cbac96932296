"""Data plane: feature-bundle files, non-IID partitioning, splits, and a
synthetic feature generator.

The bundle file format ("FHIP1") is deliberately primitive so any
language can produce it: a 24-byte header (magic ``FHIP``, u32 version,
u64 sample count, u32 feature dim, u32 class count), then row-major
little-endian f32 features, then little-endian u32 label indices.
Features are stored at 32-bit precision and widened to 64-bit on load.
"""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .client import FeatureBundle
from .errors import (
    BundleDimensionError,
    BundleFormatError,
    BundleMagicError,
    BundleTruncatedError,
    BundleVersionError,
    ConfigError,
    DataError,
)

__all__ = [
    "Dataset",
    "PartitionSpec",
    "SynthSpec",
    "one_hot",
    "dirichlet_partition",
    "train_test_split",
    "synth_features",
    "write_bundle",
    "read_bundle",
    "write_manifest",
    "read_manifest",
    "client_indices",
    "train_bundle",
    "test_arrays",
    "BUNDLE_MAGIC",
    "BUNDLE_VERSION",
    "BUNDLE_HEADER_BYTES",
]

BUNDLE_MAGIC = b"FHIP"
BUNDLE_VERSION = 1
_HEADER = struct.Struct("<4sIQII")  # magic, version, N, m, d
BUNDLE_HEADER_BYTES = _HEADER.size
# Refuse headers whose payload could not possibly be addressable.
_MAX_PAYLOAD_BYTES = 2**62


@dataclass(frozen=True)
class Dataset:
    """A pool of feature rows with integer class labels."""

    features: np.ndarray  # (N, m)
    labels: np.ndarray  # (N,), values in [0, class_count)
    class_count: int

    def __post_init__(self):
        f = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.ascontiguousarray(self.labels, dtype=np.int64)
        if f.ndim != 2 or f.shape[0] < 1:
            raise DataError(f"features must be a nonempty 2-D array, got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise DataError("features contain non-finite entries")
        if y.shape != (f.shape[0],):
            raise DataError("labels must be one integer per feature row")
        if self.class_count < 1 or y.min() < 0 or y.max() >= self.class_count:
            raise DataError(
                f"labels must lie in [0, {self.class_count}), got "
                f"[{y.min()}, {y.max()}]"
            )
        f.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", y)

    @property
    def sample_count(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class PartitionSpec:
    """Per-sample client assignment, plus the train/test flags once split.

    ``unstratified`` records (client_id, class) pairs where a class had too
    few samples to split proportionally and fell back to the client's
    leftover pool.
    """

    client_count: int
    concentration: float
    seed: int
    d_min: int
    assignment: np.ndarray  # (N,), client index per sample
    labels: np.ndarray  # (N,), class index per sample
    class_count: int
    split: np.ndarray | None = None  # (N,), True means train
    split_ratio: float | None = None
    unstratified: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self):
        a = np.ascontiguousarray(self.assignment, dtype=np.int64)
        y = np.ascontiguousarray(self.labels, dtype=np.int64)
        if a.shape != y.shape or a.ndim != 1:
            raise DataError("assignment and labels must be aligned 1-D arrays")
        a.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "assignment", a)
        object.__setattr__(self, "labels", y)
        if self.split is not None:
            s = np.ascontiguousarray(self.split, dtype=bool)
            if s.shape != a.shape:
                raise DataError("split flags must align with the assignment")
            s.flags.writeable = False
            object.__setattr__(self, "split", s)

    @property
    def sample_count(self) -> int:
        return self.assignment.shape[0]


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic Gaussian-blob feature generator."""

    class_count: int
    feature_dim: int
    samples_per_class: int
    class_mean_scale: float
    noise_sigma: float
    seed: int

    def __post_init__(self):
        if min(self.class_count, self.feature_dim, self.samples_per_class) < 1:
            raise ConfigError("all synthetic counts must be >= 1")
        if self.noise_sigma <= 0:
            raise ConfigError(f"noise_sigma must be > 0, got {self.noise_sigma}")


def one_hot(labels: np.ndarray, class_count: int) -> np.ndarray:
    """Encode integer class labels as one-hot float rows."""
    y = np.asarray(labels, dtype=np.int64).ravel()
    if class_count < 1:
        raise DataError(f"class_count must be >= 1, got {class_count}")
    if y.size and (y.min() < 0 or y.max() >= class_count):
        raise DataError(
            f"labels must lie in [0, {class_count}), got [{y.min()}, {y.max()}]"
        )
    out = np.zeros((y.size, class_count))
    out[np.arange(y.size), y] = 1.0
    return out


def _largest_remainder(proportions: np.ndarray, total: int) -> np.ndarray:
    """Integer counts summing to ``total``, proportional to ``proportions``."""
    raw = proportions * total
    counts = np.floor(raw).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        # Stable order: biggest fractional parts first, ties to lowest index.
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def dirichlet_partition(
    ds: Dataset,
    client_count: int,
    concentration: float,
    seed: int,
    d_min: int | None = None,
) -> PartitionSpec:
    """Assign every sample to a client with class-wise Dirichlet skew.

    For each class, client proportions are drawn from a symmetric
    Dirichlet with the given concentration (smaller means more skew) and
    converted to integer counts by largest-remainder rounding. Clients
    are then topped up minimally from the largest clients until each
    holds at least ``d_min`` samples (default: twice the class count).
    """
    if client_count < 1:
        raise ConfigError(f"client_count must be >= 1, got {client_count}")
    if concentration <= 0:
        raise ConfigError(f"concentration must be > 0, got {concentration}")
    if d_min is None:
        d_min = 2 * ds.class_count
    if d_min < 1:
        raise ConfigError(f"d_min must be >= 1, got {d_min}")
    if client_count * d_min > ds.sample_count:
        raise ConfigError(
            f"cannot give {client_count} clients {d_min} samples each from a "
            f"pool of {ds.sample_count}"
        )

    rng = np.random.default_rng(seed)
    per_client: list[list[np.ndarray]] = [[] for _ in range(client_count)]
    for cls in range(ds.class_count):
        idx = np.flatnonzero(ds.labels == cls)
        if idx.size == 0:
            continue
        idx = rng.permutation(idx)
        counts = _largest_remainder(rng.dirichlet(
            np.full(client_count, concentration)), idx.size)
        offsets = np.concatenate(([0], np.cumsum(counts)))
        for k in range(client_count):
            per_client[k].append(idx[offsets[k]:offsets[k + 1]])

    holdings = [list(np.concatenate(chunks)) for chunks in per_client]

    # Minimal rebalance: repeatedly move one sample from the currently
    # largest client to the neediest one, always donating from the donor's
    # most-populous class. Feasibility was checked above.
    totals = np.array([len(h) for h in holdings])
    while totals.min() < d_min:
        needy = int(np.argmin(totals))
        donor = int(np.argmax(totals))
        donor_labels = ds.labels[np.asarray(holdings[donor])]
        counts = np.bincount(donor_labels, minlength=ds.class_count)
        give = int(np.argmax(donor_labels == np.argmax(counts)))
        holdings[needy].append(holdings[donor].pop(give))
        totals[needy] += 1
        totals[donor] -= 1

    assignment = np.empty(ds.sample_count, dtype=np.int64)
    for k, h in enumerate(holdings):
        assignment[np.asarray(h, dtype=np.int64)] = k
    return PartitionSpec(
        client_count=client_count,
        concentration=concentration,
        seed=seed,
        d_min=d_min,
        assignment=assignment,
        labels=ds.labels,
        class_count=ds.class_count,
    )


def train_test_split(part: PartitionSpec, ratio: float, seed: int) -> PartitionSpec:
    """Flag each client's samples as train/test, stratified by class.

    Each client gets floor(n * ratio) training samples; within a client
    the per-class train counts follow largest-remainder rounding, so each
    class lands within one sample of the ratio. Classes with fewer than
    two samples on a client cannot be stratified: they are pooled and
    split together, and the pairs are recorded on the returned spec.
    """
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must be in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    is_train = np.zeros(part.sample_count, dtype=bool)
    fallbacks: list[tuple[int, int]] = []

    for k in range(part.client_count):
        mine = np.flatnonzero(part.assignment == k)
        if mine.size == 0:
            continue
        groups: list[np.ndarray] = []
        leftovers: list[np.ndarray] = []
        for cls in np.unique(part.labels[mine]):
            members = mine[part.labels[mine] == cls]
            if members.size >= 2:
                groups.append(rng.permutation(members))
            else:
                leftovers.append(members)
                fallbacks.append((k, int(cls)))
        if leftovers:
            groups.append(rng.permutation(np.concatenate(leftovers)))

        sizes = np.array([g.size for g in groups], dtype=np.float64)
        target = int(np.floor(mine.size * ratio))
        train_counts = _largest_remainder(sizes / mine.size, target)
        for g, t in zip(groups, train_counts):
            is_train[g[: int(t)]] = True

    return PartitionSpec(
        client_count=part.client_count,
        concentration=part.concentration,
        seed=part.seed,
        d_min=part.d_min,
        assignment=part.assignment,
        labels=part.labels,
        class_count=part.class_count,
        split=is_train,
        split_ratio=ratio,
        unstratified=tuple(fallbacks),
    )


def synth_features(spec: SynthSpec) -> Dataset:
    """Gaussian-blob dataset: one seeded mean per class plus isotropic noise.

    Class means are standard-Gaussian rows rescaled so the expected
    distance between two class means equals ``class_mean_scale``. That
    makes the scale directly comparable to ``noise_sigma`` (scale 5 at
    sigma 1 means roughly five-sigma class separation) and keeps task
    difficulty independent of the feature width, which would otherwise
    inflate separation by sqrt(feature_dim).
    """
    rng = np.random.default_rng(spec.seed)
    means = rng.standard_normal((spec.class_count, spec.feature_dim))
    means *= spec.class_mean_scale / np.sqrt(2 * spec.feature_dim)
    blocks = []
    for cls in range(spec.class_count):
        noise = rng.standard_normal((spec.samples_per_class, spec.feature_dim))
        blocks.append(means[cls] + spec.noise_sigma * noise)
    features = np.vstack(blocks)
    labels = np.repeat(np.arange(spec.class_count), spec.samples_per_class)
    return Dataset(features=features, labels=labels, class_count=spec.class_count)


def write_bundle(path, bundle: FeatureBundle) -> None:
    """Serialize a bundle to the FHIP1 binary layout (byte-deterministic)."""
    path = Path(path)
    n, m = bundle.features.shape
    d = bundle.class_count
    header = _HEADER.pack(BUNDLE_MAGIC, BUNDLE_VERSION, n, m, d)
    body = bundle.features.astype("<f4").tobytes()
    tail = bundle.labels.astype("<u4").tobytes()
    path.write_bytes(header + body + tail)


def _client_id_from_stem(path: Path) -> int:
    match = re.search(r"(\d+)(?!.*\d)", path.stem)
    return int(match.group(1)) if match else 0


def read_bundle(path, client_id: int | None = None) -> FeatureBundle:
    """Parse an FHIP1 file back into a bundle, widening features to f64.

    When ``client_id`` is omitted it is taken from the last run of digits
    in the filename stem (0 if there is none).
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < BUNDLE_HEADER_BYTES:
        if raw[:4] != BUNDLE_MAGIC:
            raise BundleMagicError(f"{path}: not a feature bundle (bad magic)")
        raise BundleTruncatedError(f"{path}: truncated header")
    magic, version, n, m, d = _HEADER.unpack_from(raw)
    if magic != BUNDLE_MAGIC:
        raise BundleMagicError(f"{path}: not a feature bundle (bad magic)")
    if version != BUNDLE_VERSION:
        raise BundleVersionError(
            f"{path}: unsupported bundle version {version} (expected {BUNDLE_VERSION})"
        )
    if n < 1 or m < 1 or d < 1:
        raise BundleDimensionError(f"{path}: zero dimension in header ({n}, {m}, {d})")
    if n * m * 4 > _MAX_PAYLOAD_BYTES:
        raise BundleDimensionError(
            f"{path}: header dimensions overflow an addressable payload"
        )
    expected = BUNDLE_HEADER_BYTES + n * m * 4 + n * 4
    if len(raw) < expected:
        raise BundleTruncatedError(
            f"{path}: expected {expected} bytes, found {len(raw)}"
        )
    if len(raw) > expected:
        raise BundleFormatError(f"{path}: {len(raw) - expected} trailing bytes")

    body = np.frombuffer(raw, dtype="<f4", count=n * m, offset=BUNDLE_HEADER_BYTES)
    features = body.astype(np.float64).reshape(n, m)
    labels = np.frombuffer(
        raw, dtype="<u4", count=n, offset=BUNDLE_HEADER_BYTES + n * m * 4
    ).astype(np.int64)
    if labels.max() >= d:
        raise BundleDimensionError(
            f"{path}: label {labels.max()} out of range for {d} classes"
        )
    if client_id is None:
        client_id = _client_id_from_stem(path)
    return FeatureBundle(
        client_id=client_id, features=features, targets=one_hot(labels, d)
    )


def client_indices(part: PartitionSpec, client_id: int) -> np.ndarray:
    """Dataset positions owned by one client."""
    return np.flatnonzero(part.assignment == client_id)


def train_bundle(ds: Dataset, part: PartitionSpec, client_id: int) -> FeatureBundle:
    """One client's training rows as a bundle (requires a split)."""
    if part.split is None:
        raise ConfigError("partition has no train/test split yet")
    idx = np.flatnonzero((part.assignment == client_id) & part.split)
    if idx.size == 0:
        raise ConfigError(f"client {client_id} has no training samples")
    return FeatureBundle(
        client_id=client_id,
        features=ds.features[idx],
        targets=one_hot(ds.labels[idx], ds.class_count),
    )


def test_arrays(
    ds: Dataset, part: PartitionSpec, client_id: int
) -> tuple[np.ndarray, np.ndarray]:
    """One client's held-out rows: (features, integer labels)."""
    if part.split is None:
        raise ConfigError("partition has no train/test split yet")
    idx = np.flatnonzero((part.assignment == client_id) & ~part.split)
    return ds.features[idx], ds.labels[idx]


def write_manifest(path, part: PartitionSpec) -> None:
    """Write the partition as JSON: who owns which train/test indices."""
    if part.split is None:
        raise ConfigError("partition has no train/test split yet")
    per_client = []
    for k in range(part.client_count):
        mine = part.assignment == k
        per_client.append(
            {
                "client_id": k,
                "train_indices": np.flatnonzero(mine & part.split).tolist(),
                "test_indices": np.flatnonzero(mine & ~part.split).tolist(),
            }
        )
    doc = {
        "K": part.client_count,
        "lambda": part.concentration,
        "seed": part.seed,
        "d_min": part.d_min,
        "per_client": per_client,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    """Load a partition manifest written by :func:`write_manifest`."""
    doc = json.loads(Path(path).read_text())
    for key in ("K", "lambda", "seed", "d_min", "per_client"):
        if key not in doc:
            raise ConfigError(f"{path}: manifest is missing field {key!r}")
    return doc
