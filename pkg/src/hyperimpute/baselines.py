"""Reference imputers: mean, chained linear, chained random forest, k-NN and SoftImpute."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .data import ImputedDataset, IncompleteDataset
from .engine import EngineConfig, ablation_config, baseline_impute, run_hyperimpute

BASELINES = ("mean", "ice_linear", "iterative_forest", "knn", "softimpute")


class SVDError(ArithmeticError):
    """The Jacobi sweeps did not converge."""


@dataclass(frozen=True)
class BaselineKind:
    kind: str = "mean"
    k: int = 5
    lam: float | None = None  # None: max singular value / 50
    max_iters: int = 100
    tol: float = 1e-9

    def __post_init__(self):
        if self.kind not in BASELINES:
            raise ValueError(f"unknown baseline {self.kind!r}; choose from {BASELINES}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")


def impute_mean(dataset: IncompleteDataset) -> ImputedDataset:
    return baseline_impute(dataset)


def _ice(dataset, learner, K, tol, seed):
    cfg = replace(ablation_config("ice_fixed", learner), max_outer_iters=K, tol_imp=tol)
    return run_hyperimpute(dataset, cfg, seed).imputed


def impute_ice_linear(dataset: IncompleteDataset, K: int = 10, tol: float = 1e-3,
                      seed: int = 0) -> ImputedDataset:
    """Chained equations with ridge (continuous) or logistic (categorical) models."""
    return _ice(dataset, "ridge", K, tol, seed)


def impute_iterative_forest(dataset: IncompleteDataset, K: int = 10, tol: float = 1e-3,
                            seed: int = 0) -> ImputedDataset:
    """Chained equations with a random forest per column."""
    return _ice(dataset, "forest", K, tol, seed)


# --- k-NN -----------------------------------------------------------------------

def impute_knn(dataset: IncompleteDataset, k: int = 5) -> ImputedDataset:
    """Fill each missing cell from its k nearest donors under a pairwise-deletion distance.

    Distances use the standardized coordinates observed in both rows, rescaled
    by the fraction of usable coordinates.  Donors must observe the target
    column; ties go to the lowest row index.  Continuous cells take the donor
    mean, categorical cells the donor mode (ties to the smallest level).
    """
    X, M = dataset.values, dataset.mask
    N, D = X.shape
    if k > N - 1:
        raise ValueError(f"k={k} exceeds N-1={N - 1}")
    mu = np.array([X[M[:, j], j].mean() for j in range(D)])
    sd = np.array([X[M[:, j], j].std() for j in range(D)])
    sd[sd == 0] = 1.0
    Z = np.where(M, (np.nan_to_num(X) - mu) / sd, 0.0)
    Mf = M.astype(np.float64)
    out = X.copy()
    for n in np.flatnonzero(~M.all(axis=1)):
        common = Mf * Mf[n]
        used = common.sum(axis=1)
        sq = (((Z - Z[n]) ** 2) * common).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            dist = np.where(used > 0, sq * D / used, np.inf)
        dist[n] = np.inf
        for j in np.flatnonzero(~M[n]):
            donors = np.flatnonzero(M[:, j] & np.isfinite(dist))
            if donors.size == 0:
                out[n, j] = mu[j]
                continue
            chosen = donors[np.argsort(dist[donors], kind="stable")[:k]]
            vals = X[chosen, j]
            if dataset.kinds[j].is_categorical:
                levels, counts = np.unique(vals, return_counts=True)
                out[n, j] = levels[np.argmax(counts)]
            else:
                out[n, j] = vals.mean()
    return ImputedDataset(out, M.copy(), dataset.kinds, dataset.names)


# --- SoftImpute ---------------------------------------------------------------

@njit(cache=True)
def _jacobi_svd(A, tol, max_sweeps):
    """One-sided Jacobi SVD of a tall matrix; returns U, s (descending), V and a convergence flag."""
    m, n = A.shape
    U = A.copy()
    V = np.eye(n)
    fro2 = 0.0
    for i in range(m):
        for j in range(n):
            fro2 += A[i, j] * A[i, j]
    # columns below this squared norm are numerically zero and need no rotation
    tiny = 1e-30 * fro2
    converged = False
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for i in range(m):
                    alpha += U[i, p] * U[i, p]
                    beta += U[i, q] * U[i, q]
                    gamma += U[i, p] * U[i, q]
                if gamma == 0.0 or alpha <= tiny or beta <= tiny:
                    continue
                denom = np.sqrt(alpha * beta)
                r = abs(gamma) / denom
                if r > off:
                    off = r
                if r <= tol:
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                sgn = 1.0 if zeta >= 0 else -1.0
                t = sgn / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                for i in range(m):
                    up = U[i, p]
                    uq = U[i, q]
                    U[i, p] = c * up - s * uq
                    U[i, q] = s * up + c * uq
                for i in range(n):
                    vp = V[i, p]
                    vq = V[i, q]
                    V[i, p] = c * vp - s * vq
                    V[i, q] = s * vp + c * vq
        if off <= tol:
            converged = True
            break
    sv = np.empty(n)
    for j in range(n):
        nrm = 0.0
        for i in range(m):
            nrm += U[i, j] * U[i, j]
        nrm = np.sqrt(nrm)
        sv[j] = nrm
        if nrm > 0:
            for i in range(m):
                U[i, j] /= nrm
    order = np.argsort(-sv)
    return U[:, order], sv[order], V[:, order], converged


def svd(A, tol: float = 1e-12, max_sweeps: int = 60):
    """Thin SVD ``A = U diag(s) V^T`` with singular values in descending order."""
    A = np.ascontiguousarray(np.asarray(A, dtype=np.float64))
    if A.ndim != 2 or A.size == 0:
        raise ValueError("svd needs a non-empty 2-D array")
    if not np.isfinite(A).all():
        raise SVDError("non-finite input")
    wide = A.shape[0] < A.shape[1]
    if wide:
        A = np.ascontiguousarray(A.T)
    U, s, V, ok = _jacobi_svd(A, tol, max_sweeps)
    if not ok:
        raise SVDError(f"Jacobi SVD did not converge in {max_sweeps} sweeps")
    return (V, s, U) if wide else (U, s, V)


@dataclass
class SoftImputeResult:
    imputed: ImputedDataset
    objective: list
    iterations: int


def _expand(dataset):
    """Standardized continuous columns and 0/1 one-hot blocks for categoricals."""
    X, M = dataset.values, dataset.mask
    cols, obs, layout = [], [], []
    for j, kind in enumerate(dataset.kinds):
        x, m = X[:, j], M[:, j]
        if kind.is_categorical:
            codes = kind.encode(np.where(m, x, kind.levels[0]))
            block = np.eye(kind.cardinality)[codes]
            mu = block[m].mean(axis=0)
            block = block - mu
            cols.append(block)
            obs.append(np.repeat(m[:, None], kind.cardinality, axis=1))
            layout.append(("cat", mu, None))
        else:
            mu, sd = x[m].mean(), x[m].std()
            sd = sd if sd > 0 else 1.0
            cols.append(((np.where(m, x, mu) - mu) / sd)[:, None])
            obs.append(m[:, None])
            layout.append(("num", mu, sd))
    return np.hstack(cols), np.hstack(obs), layout


def softimpute(dataset: IncompleteDataset, lam: float | None = None, max_iters: int = 100,
               tol: float = 1e-9, n_lambdas: int = 20) -> SoftImputeResult:
    """Matrix completion by iterated singular-value soft-thresholding.

    Works on standardized columns with the model ``Z = 1 mu^T + L``, where only
    the low-rank part ``L`` is penalized.  Each iteration fills the missing
    cells from ``Z``, sets ``mu`` to the column means of the filled matrix and
    ``L`` to its soft-thresholded centered SVD.  The target ``lam`` is
    approached along a geometric path of ``n_lambdas`` values starting at the
    largest singular value of the zero-filled data, each stage
    warm-started from the previous one and run for at most ``max_iters``
    iterations or until the relative squared Frobenius change is at most
    ``tol``.  ``objective[i]`` is ``0.5 * ||P_obs(X - Z_i)||^2 + lam_i * ||L_i||_*``
    with ``lam_i`` the stage's threshold; since thresholds only decrease, the
    sequence is non-increasing.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if n_lambdas < 1:
        raise ValueError("n_lambdas must be >= 1")
    A, O, layout = _expand(dataset)
    filled = np.where(O, A, 0.0)
    top = svd(filled - filled.mean(axis=0))[1][0]
    if lam is None:
        lam = top / 50.0
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if top <= lam or n_lambdas == 1:
        path = [lam]
    else:
        path = list(np.geomspace(top, max(lam, 1e-12), n_lambdas))
        path[-1] = lam
    Z = np.zeros_like(A)
    objective = []
    total = 0
    for stage_lam in path:
        for _ in range(max_iters):
            F = np.where(O, A, Z)
            mu = F.mean(axis=0)
            U, s, V = svd(F - mu)
            shrunk = np.maximum(s - stage_lam, 0.0)
            Z_new = mu + (U * shrunk) @ V.T
            objective.append(0.5 * float((((A - Z_new) * O) ** 2).sum()) + stage_lam * float(shrunk.sum()))
            denom = max(float((Z ** 2).sum()), 1e-12)
            change = float(((Z_new - Z) ** 2).sum()) / denom
            Z = Z_new
            total += 1
            if change <= tol:
                break
    out = dataset.values.copy()
    M = dataset.mask
    c = 0
    for j, (kind, mu, sd) in enumerate(layout):
        miss = ~M[:, j]
        if kind == "num":
            out[miss, j] = Z[miss, c] * sd + mu
            c += 1
        else:
            spec = dataset.kinds[j]
            block = Z[:, c:c + spec.cardinality] + mu
            out[miss, j] = spec.decode(np.argmax(block[miss], axis=1))
            c += spec.cardinality
    imputed = ImputedDataset(out, M.copy(), dataset.kinds, dataset.names, {"lambda": lam})
    return SoftImputeResult(imputed, objective, total)


def impute_softimpute(dataset: IncompleteDataset, lam: float | None = None, max_iters: int = 100,
                      tol: float = 1e-9) -> ImputedDataset:
    return softimpute(dataset, lam, max_iters, tol).imputed


def run_baseline(kind: BaselineKind, dataset: IncompleteDataset, seed: int = 0,
                 engine: EngineConfig | None = None) -> ImputedDataset:
    """Dispatch one baseline; ``engine`` supplies K and tol for the chained variants."""
    engine = engine or EngineConfig()
    if kind.kind == "mean":
        return impute_mean(dataset)
    if kind.kind == "ice_linear":
        return impute_ice_linear(dataset, engine.max_outer_iters, engine.tol_imp, seed)
    if kind.kind == "iterative_forest":
        return impute_iterative_forest(dataset, engine.max_outer_iters, engine.tol_imp, seed)
    if kind.kind == "knn":
        return impute_knn(dataset, kind.k)
    return impute_softimpute(dataset, kind.lam, kind.max_iters, kind.tol)
