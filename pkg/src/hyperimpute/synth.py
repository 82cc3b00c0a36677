"""Synthetic complete datasets for tests, benchmarks and the ``make-synth`` command."""

from __future__ import annotations

import numpy as np

from .data import ColumnKind, CONTINUOUS

SYNTH_KINDS = ("benchmark", "gaussian", "mixed", "linear", "sign", "rank1", "categorical")


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), 7]))


def toeplitz_corr(d: int, rho: float) -> np.ndarray:
    idx = np.arange(d)
    return rho ** np.abs(np.subtract.outer(idx, idx))


def correlated_gaussian(n: int, d: int, rho: float = 0.5, seed: int = 0) -> np.ndarray:
    """Rows drawn from N(0, C) with C[i, j] = rho^|i-j|."""
    rng = _rng(seed)
    L = np.linalg.cholesky(toeplitz_corr(d, rho))
    return rng.standard_normal((n, d)) @ L.T


def benchmark(n: int = 2000, seed: int = 0) -> np.ndarray:
    """Eight columns: four correlated Gaussians and four signals derived from them.

    The derived columns are linear, periodic, multiplicative and step-shaped in
    the latent Gaussians, so no single learner class fits every column well.
    """
    rng = _rng(seed)
    z = correlated_gaussian(n, 4, 0.5, seed + 1)
    x = np.empty((n, 8))
    x[:, :4] = z
    x[:, 4] = z[:, 0] - 0.5 * z[:, 1] + 0.3 * rng.standard_normal(n)
    x[:, 5] = np.sin(2.0 * z[:, 1]) + 0.1 * rng.standard_normal(n)
    x[:, 6] = z[:, 2] * z[:, 3] + 0.1 * rng.standard_normal(n)
    x[:, 7] = np.where(z[:, 0] + z[:, 2] > 0, 1.0, -1.0) + 0.1 * rng.standard_normal(n)
    return x


def mixed_signal(n: int = 2000, seed: int = 0) -> np.ndarray:
    """Two Gaussian inputs, a linear column, a tree-structured column and pure noise."""
    rng = _rng(seed)
    a = rng.standard_normal(n)
    b = rng.standard_normal(n)
    linear = 1.5 * a - b + 0.1 * rng.standard_normal(n)
    tree = np.where(a > 0, np.where(b > 0.5, 3.0, 1.0), np.where(b > -0.5, -1.0, -3.0))
    tree = tree + 0.1 * rng.standard_normal(n)
    noise = rng.standard_normal(n)
    return np.column_stack([a, b, linear, tree, noise])


def linear_pair(n: int = 500, noise: float = 0.01, slope: float = 2.0, seed: int = 0) -> np.ndarray:
    """Columns x ~ N(0, 1) and y = slope * x + noise * N(0, 1)."""
    rng = _rng(seed)
    x = rng.standard_normal(n)
    return np.column_stack([x, slope * x + noise * rng.standard_normal(n)])


def sign_pair(n: int = 2000, seed: int = 0) -> np.ndarray:
    """Columns x ~ N(0, 1) and y = sign(x) (zero mapped to 1)."""
    x = _rng(seed).standard_normal(n)
    return np.column_stack([x, np.where(x >= 0, 1.0, -1.0)])


def rank_one(n: int = 50, d: int = 10, seed: int = 0) -> np.ndarray:
    """u v^T with standard normal factors."""
    rng = _rng(seed)
    return np.outer(rng.standard_normal(n), rng.standard_normal(d))


def categorical_mix(n: int = 500, seed: int = 0):
    """Two continuous columns and one 3-level label driven by them; returns (X, kinds)."""
    rng = _rng(seed)
    a = rng.standard_normal(n)
    b = 0.6 * a + 0.8 * rng.standard_normal(n)
    label = np.digitize(a + 0.3 * rng.standard_normal(n), [-0.5, 0.5]) + 1.0
    kinds = (CONTINUOUS, CONTINUOUS, ColumnKind.categorical((1.0, 2.0, 3.0)))
    return np.column_stack([a, b, label]), kinds


def make(kind: str, n: int | None = None, d: int | None = None, seed: int = 0):
    """Build a named dataset; returns (X, kinds) with kinds None for all-continuous data."""
    if kind == "benchmark":
        return benchmark(n or 2000, seed), None
    if kind == "gaussian":
        return correlated_gaussian(n or 2000, d or 8, 0.5, seed), None
    if kind == "mixed":
        return mixed_signal(n or 2000, seed), None
    if kind == "linear":
        return linear_pair(n or 500, seed=seed), None
    if kind == "sign":
        return sign_pair(n or 2000, seed), None
    if kind == "rank1":
        return rank_one(n or 50, d or 10, seed), None
    if kind == "categorical":
        return categorical_mix(n or 500, seed)
    raise ValueError(f"unknown synthetic dataset {kind!r}; choose from {SYNTH_KINDS}")
