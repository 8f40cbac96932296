#!/usr/bin/env python3
"""One client, one solve: closed-form local training.

A client never iterates. It builds its regularized Gram matrix, solves a
single linear system, and is done; the (gram, model) pair is also the
entire upload.
"""

import numpy as np

from fedhip import FeatureBundle, local_train, one_hot, ridge_fit


def main():
    rng = np.random.default_rng(0)
    features = rng.standard_normal((50, 6))
    labels = rng.integers(0, 3, size=50)
    bundle = FeatureBundle(0, features, one_hot(labels, 3))

    beta = 0.5
    art = local_train(bundle, beta)
    print("gram matrix (F'F + beta I), top-left 3x3:")
    print(np.round(art.gram[:3, :3], 3))
    print("\nlocal model, first rows:")
    print(np.round(art.model[:3], 4))

    # Same thing phrased as a ridge fit.
    direct = ridge_fit(features, bundle.targets, beta)
    print("\nmax |local_train - ridge_fit|:", np.max(np.abs(art.model - direct)))

    # The pair satisfies gram @ model = F'Y, which is what makes the
    # server-side fusion exact later on.
    residual = np.max(np.abs(art.gram @ art.model - features.T @ bundle.targets))
    print("defining relation residual:", residual)


if __name__ == "__main__":
    main()
