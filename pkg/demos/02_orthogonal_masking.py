#!/usr/bin/env python3
"""Why the upload leaks so little: orthogonal row mixing is invisible.

Premultiply a client's features and targets by any matrix U with
U'U = I and the uploaded (gram, model) pair does not change. Infinitely
many datasets produce the same upload, so the server cannot invert it.
"""

import numpy as np

from fedhip import FeatureBundle, one_hot, random_semi_orthogonal
from fedhip.client import train_matrices


def main():
    rng = np.random.default_rng(1)
    features = rng.standard_normal((40, 5))
    targets = one_hot(rng.integers(0, 4, size=40), 4)

    gram, model = train_matrices(features, targets, 0.5)

    for seed in range(5):
        u = random_semi_orthogonal(40, seed)
        mixed_gram, mixed_model = train_matrices(u @ features, u @ targets, 0.5)
        print(
            f"seed {seed}: |dC| = {np.max(np.abs(mixed_gram - gram)):.2e}   "
            f"|dL| = {np.max(np.abs(mixed_model - model)):.2e}"
        )

    # ... while the mixed features themselves look nothing like the originals.
    u = random_semi_orthogonal(40, 0)
    print(
        "\nfeature-level difference under the same transform:",
        f"{np.max(np.abs(u @ features - features)):.3f}",
    )


if __name__ == "__main__":
    main()
