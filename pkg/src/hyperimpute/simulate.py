"""Missingness simulators (MCAR, MAR, two MNAR variants).

Masks follow the dataset convention: True = observed, False = missing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

MECHANISMS = ("MCAR", "MAR", "MNAR_input_masked", "MNAR_self_censor")


@dataclass(frozen=True)
class MissingnessSpec:
    mechanism: str = "MAR"
    rate: float = 0.3
    mar_observed_fraction: float = 0.3
    seed: int = 0
    censor_side: str = "upper"

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}; choose from {MECHANISMS}")
        if not 0 < self.rate < 1:
            raise ValueError("rate must lie in (0, 1)")
        if not 0 < self.mar_observed_fraction < 1:
            raise ValueError("mar_observed_fraction must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class MarModel:
    observed_cols: tuple
    maskable_cols: tuple
    weights: np.ndarray  # (n_maskable, n_observed)
    bias: np.ndarray  # (n_maskable,)


def _rng(seed, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), tag]))


def _standardize(X: np.ndarray) -> np.ndarray:
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return (X - mu) / sd


def simulate_mcar(X, rate: float, seed: int) -> np.ndarray:
    """Each cell is missing independently with probability ``rate``."""
    if not 0 < rate < 1:
        raise ValueError("rate must lie in (0, 1)")
    shape = np.shape(X)
    return _rng(seed, 1).random(shape) >= rate


def calibrate_bias(weights, observed_submatrix, target_rate: float, tol: float = 1e-4) -> float:
    """Bisection for the bias giving mean sigmoid(x @ w + b) == target_rate."""
    if not 0 < target_rate < 1:
        raise ValueError("target_rate must lie in (0, 1)")
    z = np.asarray(observed_submatrix, dtype=np.float64) @ np.asarray(weights, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite logistic inputs")
    lo, hi = -50.0, 50.0
    b = 0.0
    for _ in range(200):
        b = 0.5 * (lo + hi)
        gap = expit(z + b).mean() - target_rate
        if abs(gap) <= tol * 1e-3 or hi - lo < 1e-14:
            break
        if gap > 0:
            hi = b
        else:
            lo = b
    return b


def simulate_mar(X, rate: float, mar_observed_fraction: float = 0.3, seed: int = 0):
    """Logistic masking of a random subset of columns driven by the fully observed rest."""
    X = np.asarray(X, dtype=np.float64)
    N, D = X.shape
    if D < 2:
        raise ValueError("MAR needs at least 2 columns")
    if not 0 < rate < 1:
        raise ValueError("rate must lie in (0, 1)")
    rng = _rng(seed, 2)
    n_obs = min(max(math.ceil(mar_observed_fraction * D), 1), D - 1)
    perm = rng.permutation(D)
    observed_cols = tuple(sorted(int(j) for j in perm[:n_obs]))
    maskable = tuple(sorted(int(j) for j in perm[n_obs:]))
    Z = _standardize(X[:, observed_cols])
    W = rng.standard_normal((len(maskable), n_obs))
    bias = np.array([calibrate_bias(w, Z, rate) for w in W])
    probs = expit(Z @ W.T + bias)
    u = rng.random((N, len(maskable)))
    mask = np.ones((N, D), dtype=bool)
    mask[:, maskable] = u >= probs
    return mask, MarModel(observed_cols, maskable, W, bias)


def simulate_mnar(X, rate: float, variant: str = "MNAR_input_masked",
                  mar_observed_fraction: float = 0.3, seed: int = 0, censor_side: str = "upper"):
    """MNAR masks.

    ``MNAR_input_masked`` runs the MAR mechanism and then hides the MAR input
    columns with an independent Bernoulli(rate).  ``MNAR_self_censor`` hides
    the values of each column beyond its rate-quantile (upper tail by default).
    """
    X = np.asarray(X, dtype=np.float64)
    if variant == "MNAR_input_masked":
        mask, model = simulate_mar(X, rate, mar_observed_fraction, seed)
        u = _rng(seed, 3).random((X.shape[0], len(model.observed_cols)))
        mask[:, model.observed_cols] = u >= rate
        return mask
    if variant == "MNAR_self_censor":
        if not 0 < rate < 1:
            raise ValueError("rate must lie in (0, 1)")
        if censor_side == "upper":
            thr = np.quantile(X, 1 - rate, axis=0)
            return ~(X > thr)
        if censor_side == "lower":
            thr = np.quantile(X, rate, axis=0)
            return ~(X < thr)
        raise ValueError("censor_side must be 'upper' or 'lower'")
    raise ValueError(f"unknown MNAR variant {variant!r}")


def simulate(X, spec: MissingnessSpec) -> np.ndarray:
    if spec.mechanism == "MCAR":
        return simulate_mcar(X, spec.rate, spec.seed)
    if spec.mechanism == "MAR":
        return simulate_mar(X, spec.rate, spec.mar_observed_fraction, spec.seed)[0]
    return simulate_mnar(X, spec.rate, spec.mechanism, spec.mar_observed_fraction,
                         spec.seed, spec.censor_side)

