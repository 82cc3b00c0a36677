"""Imputation quality on the masked cells: RMSE, 1-D Wasserstein, AUROC.

Both RMSE and WD work on columns min-max scaled to [0, 1] with the ground
truth's column range.  Constant columns contribute zero error.  Categorical
columns count a wrong label as distance 1 for RMSE and use their scaled
integer codes for WD.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata


@dataclass
class EvalReport:
    rmse: float
    wd: float
    per_column: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"rmse": self.rmse, "wd": self.wd,
                "per_column": {str(k): v for k, v in self.per_column.items()}}


def _scaled(imputed, truth):
    imputed = np.asarray(imputed, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if imputed.shape != truth.shape:
        raise ValueError(f"shape mismatch {imputed.shape} vs {truth.shape}")
    lo = truth.min(axis=0)
    span = truth.max(axis=0) - lo
    const = span == 0
    span = np.where(const, 1.0, span)
    a = (imputed - lo) / span
    b = (truth - lo) / span
    a[:, const] = b[:, const]
    return a, b


def _missing(mask):
    miss = ~np.asarray(mask, dtype=bool)
    if not miss.any():
        raise ValueError("no missing cells to evaluate")
    return miss


def _cat_columns(kinds, D):
    if not kinds:
        return np.zeros(D, dtype=bool)
    return np.array([k.is_categorical for k in kinds])


def _squared_errors(imputed, truth, kinds):
    a, b = _scaled(imputed, truth)
    err = (a - b) ** 2
    cat = _cat_columns(kinds, a.shape[1])
    if cat.any():
        raw_diff = np.asarray(imputed)[:, cat] != np.asarray(truth)[:, cat]
        err[:, cat] = raw_diff.astype(float)
    return err


def rmse_missing(imputed, truth, mask, kinds=()) -> float:
    """Root of the mean squared scaled error pooled over every missing cell."""
    miss = _missing(mask)
    err = _squared_errors(imputed, truth, kinds)
    return float(np.sqrt(err[miss].mean()))


def wasserstein_1d(u, v) -> float:
    """Exact W1 between two empirical distributions on the real line."""
    u = np.sort(np.asarray(u, dtype=np.float64))
    v = np.sort(np.asarray(v, dtype=np.float64))
    if u.size == 0 or v.size == 0:
        raise ValueError("empty sample")
    if u.size == v.size:
        return float(np.mean(np.abs(u - v)))
    # integrate |F_u - F_v| over the merged support
    grid = np.sort(np.concatenate([u, v]))
    Fu = np.searchsorted(u, grid[:-1], side="right") / u.size
    Fv = np.searchsorted(v, grid[:-1], side="right") / v.size
    return float(np.sum(np.abs(Fu - Fv) * np.diff(grid)))


def wasserstein_missing(imputed, truth, mask, kinds=()) -> float:
    """Mean over columns with missing cells of the scaled 1-D W1."""
    miss = _missing(mask)
    a, b = _scaled(imputed, truth)
    vals = [wasserstein_1d(a[miss[:, j], j], b[miss[:, j], j])
            for j in range(a.shape[1]) if miss[:, j].any()]
    return float(np.mean(vals))


def evaluate(imputed, truth, mask, kinds=()) -> EvalReport:
    miss = _missing(mask)
    err = _squared_errors(imputed, truth, kinds)
    a, b = _scaled(imputed, truth)
    per = {}
    for j in range(a.shape[1]):
        m = miss[:, j]
        if m.any():
            per[j] = {"rmse": float(np.sqrt(err[m, j].mean())),
                      "wd": wasserstein_1d(a[m, j], b[m, j]),
                      "n_missing": int(m.sum())}
    return EvalReport(rmse=float(np.sqrt(err[miss].mean())),
                      wd=float(np.mean([c["wd"] for c in per.values()])), per_column=per)


def auroc(scores, labels) -> float:
    """Mann-Whitney estimate of P(score_pos > score_neg), ties counting 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs both classes present")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def macro_auroc(proba, codes) -> float | None:
    """One-vs-rest macro AUROC over classes with both positives and negatives present."""
    proba = np.asarray(proba)
    codes = np.asarray(codes)
    vals = []
    for c in range(proba.shape[1]):
        pos = codes == c
        if pos.any() and not pos.all():
            vals.append(auroc(proba[:, c], pos))
    if not vals:
        return None
    return float(np.mean(vals))
