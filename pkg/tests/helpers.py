"""Shared construction helpers for the test suite."""

import numpy as np


def random_membership(rng, n, k, min_size=2):
    """One-hot membership matrix with every class of size >= min_size."""
    while True:
        labels = rng.integers(0, k, size=n)
        counts = np.bincount(labels, minlength=k)
        if (counts >= min_size).all():
            break
    z = np.zeros((n, k))
    z[np.arange(n), labels] = 1.0
    return z, labels


def random_cost(rng, n, low=0.0, high=4.0):
    """Random nonnegative cost with zero diagonal, not from points."""
    c = rng.uniform(low, high, size=(n, n))
    np.fill_diagonal(c, 0.0)
    return c
