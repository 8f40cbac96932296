"""fedhip: single-round personalized federated learning in closed form.

Clients fit local ridge classifiers on precomputed features, upload only
Gram-matrix statistics, the server fuses them recursively, and each
client finishes with one personalizing solve. No gradients anywhere, one
communication round, and the result provably matches training on the
pooled data.
"""

from .client import (
    FeatureBundle,
    LocalArtifacts,
    PersonalizedModel,
    accuracy,
    local_train,
    personalize,
    predict,
    weighted_gram,
)
from .data import (
    Dataset,
    PartitionSpec,
    SynthSpec,
    dirichlet_partition,
    one_hot,
    read_bundle,
    synth_features,
    train_test_split,
    write_bundle,
)
from .errors import (
    BundleFormatError,
    ConfigError,
    DataError,
    FedhipError,
    ProtocolError,
    SingularMatrixError,
)
from .linalg import (
    random_semi_orthogonal,
    regularized_gram,
    ridge_fit,
    solve_spd,
)
from .server import (
    AggregatorState,
    GlobalModel,
    absorb,
    derive_global,
    downlink,
    fusion_weights,
    init_state,
)

__version__ = "0.1.0"

__all__ = [
    "FeatureBundle",
    "LocalArtifacts",
    "PersonalizedModel",
    "accuracy",
    "local_train",
    "personalize",
    "predict",
    "weighted_gram",
    "Dataset",
    "PartitionSpec",
    "SynthSpec",
    "dirichlet_partition",
    "one_hot",
    "read_bundle",
    "synth_features",
    "train_test_split",
    "write_bundle",
    "BundleFormatError",
    "ConfigError",
    "DataError",
    "FedhipError",
    "ProtocolError",
    "SingularMatrixError",
    "random_semi_orthogonal",
    "regularized_gram",
    "ridge_fit",
    "solve_spd",
    "AggregatorState",
    "GlobalModel",
    "absorb",
    "derive_global",
    "downlink",
    "fusion_weights",
    "init_state",
    "__version__",
]
