"""Tabular containers: incomplete datasets, masks, column kinds and CSV I/O.

Missing cells are tracked by a boolean mask (True = observed).  The value
array also carries NaN in missing cells for convenience, but the mask is the
single source of truth.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

DEFAULT_NA_TOKENS = ("", "NA", "nan", "NaN")
DEFAULT_MAX_CATEGORICAL = 20
CSV_PRECISION = 12


class DataError(ValueError):
    """Raised for malformed or inconsistent tabular input."""


@dataclass(frozen=True)
class ColumnKind:
    """Continuous or categorical column.

    Categorical columns keep the sorted tuple of their observed values in
    ``levels``; learners see integer codes ``0..K-1`` derived from it.
    ``labels`` optionally maps levels back to the original strings of a
    label-encoded text column.
    """

    kind: str = "continuous"
    levels: tuple = ()
    labels: tuple = ()

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical"):
            raise ValueError(f"unknown column kind {self.kind!r}")
        if self.kind == "categorical" and len(self.levels) < 2:
            raise ValueError("categorical columns need at least 2 levels")

    @classmethod
    def categorical(cls, levels: Sequence[float], labels: Sequence[str] = ()) -> "ColumnKind":
        return cls("categorical", tuple(float(v) for v in sorted(levels)), tuple(labels))

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"

    @property
    def cardinality(self) -> int | None:
        return len(self.levels) if self.is_categorical else None

    def encode(self, values: np.ndarray) -> np.ndarray:
        """Map level values to codes 0..K-1 (unknown values go to the nearest level)."""
        levels = np.asarray(self.levels)
        idx = np.searchsorted(levels, values)
        idx = np.clip(idx, 0, len(levels) - 1)
        lower = np.clip(idx - 1, 0, len(levels) - 1)
        closer = np.abs(levels[lower] - values) < np.abs(levels[idx] - values)
        return np.where(closer, lower, idx).astype(np.int64)

    def decode(self, codes: np.ndarray) -> np.ndarray:
        return np.asarray(self.levels)[np.asarray(codes, dtype=np.int64)]

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.is_categorical:
            out["levels"] = list(self.levels)
            if self.labels:
                out["labels"] = list(self.labels)
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "ColumnKind":
        if obj["kind"] == "categorical":
            return cls.categorical(obj["levels"], obj.get("labels", ()))
        return cls()


CONTINUOUS = ColumnKind()


@dataclass(frozen=True, eq=False)
class IncompleteDataset:
    values: np.ndarray
    mask: np.ndarray
    kinds: tuple
    names: tuple = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        mask = np.array(self.mask, dtype=bool)
        if values.ndim != 2 or mask.shape != values.shape:
            raise DataError(f"values {values.shape} and mask {mask.shape} must be equal 2-D shapes")
        n, d = values.shape
        if n < 1 or d < 2:
            raise DataError(f"need N >= 1 and D >= 2, got N={n}, D={d}")
        if len(self.kinds) != d:
            raise DataError("one ColumnKind per column required")
        if np.isnan(values[mask]).any():
            raise DataError("NaN found in an observed cell")
        values[~mask] = np.nan
        values.setflags(write=False)
        mask.setflags(write=False)
        names = tuple(self.names) if self.names else tuple(f"x{j}" for j in range(d))
        if len(names) != d:
            raise DataError("one name per column required")
        if len(set(names)) != d:
            raise DataError("duplicate column names")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "kinds", tuple(self.kinds))
        object.__setattr__(self, "names", names)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_missing(self) -> int:
        return int((~self.mask).sum())

    def missing_columns(self) -> list[int]:
        return [j for j in range(self.shape[1]) if not self.mask[:, j].all()]

    def with_mask(self, mask: np.ndarray) -> "IncompleteDataset":
        """Re-mask the observed values; cells missing here stay missing."""
        mask = np.asarray(mask, dtype=bool) & self.mask
        return IncompleteDataset(np.where(mask, self.values, np.nan), mask, self.kinds, self.names)


@dataclass(frozen=True, eq=False)
class ImputedDataset:
    values: np.ndarray
    source_mask: np.ndarray
    kinds: tuple = ()
    names: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if np.isnan(values).any():
            raise DataError("imputed dataset contains NaN")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def apply_mask(complete, mask, kinds=None, names=(), max_categorical_card=DEFAULT_MAX_CATEGORICAL):
    """Hide the cells of ``complete`` where ``mask`` is False."""
    complete = np.asarray(complete, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if complete.shape != mask.shape:
        raise DataError(f"shape mismatch: data {complete.shape} vs mask {mask.shape}")
    if np.isnan(complete).any():
        raise DataError("complete matrix contains NA")
    if kinds is None:
        kinds = infer_column_kinds(complete, max_categorical_card)
    return IncompleteDataset(np.where(mask, complete, np.nan), mask, tuple(kinds), names)


def from_array(X, kinds=None, names=(), max_categorical_card=DEFAULT_MAX_CATEGORICAL):
    """Build an IncompleteDataset from an array with NaN marking missing cells."""
    X = np.asarray(X, dtype=np.float64)
    mask = ~np.isnan(X)
    if kinds is None:
        kinds = infer_column_kinds(X, max_categorical_card)
    return IncompleteDataset(X, mask, tuple(kinds), names)


def merge_imputations(incomplete: IncompleteDataset, fills: Mapping) -> ImputedDataset:
    """Write ``fills[(n, d)]`` into the missing cells of ``incomplete``."""
    out = incomplete.values.copy()
    mask = incomplete.mask
    for (n, d), v in fills.items():
        if mask[n, d]:
            raise DataError(f"observed cell overwrite at ({n}, {d})")
        out[n, d] = v
    if np.isnan(out).any():
        n, d = map(int, np.argwhere(np.isnan(out))[0])
        raise DataError(f"no fill supplied for missing cell ({n}, {d})")
    return ImputedDataset(out, mask.copy(), incomplete.kinds, incomplete.names)


@dataclass(frozen=True, eq=False)
class ColumnSplit:
    target_obs: np.ndarray
    regressors_obs: np.ndarray
    regressors_mis: np.ndarray
    mis_row_indices: np.ndarray
    obs_row_indices: np.ndarray


def split_column(current, mask, d: int) -> ColumnSplit:
    """Partition rows by whether the *target* column ``d`` is observed."""
    values = current.values if isinstance(current, ImputedDataset) else np.asarray(current)
    mask = np.asarray(mask, dtype=bool)
    D = values.shape[1]
    if not 0 <= d < D:
        raise IndexError(f"column {d} out of range for D={D}")
    obs = mask[:, d]
    others = np.delete(values, d, axis=1)
    return ColumnSplit(
        target_obs=values[obs, d],
        regressors_obs=others[obs],
        regressors_mis=others[~obs],
        mis_row_indices=np.flatnonzero(~obs),
        obs_row_indices=np.flatnonzero(obs),
    )


def infer_column_kinds(raw, max_categorical_card: int = DEFAULT_MAX_CATEGORICAL) -> list[ColumnKind]:
    """Integer-valued columns with at most ``max_categorical_card`` levels are categorical."""
    if max_categorical_card < 2:
        raise ValueError("max_categorical_card must be >= 2")
    raw = np.asarray(raw, dtype=np.float64)
    kinds = []
    for j in range(raw.shape[1]):
        col = raw[:, j]
        col = col[~np.isnan(col)]
        if col.size == 0:
            raise DataError(f"fully missing column {j}")
        levels = np.unique(col)
        if 2 <= levels.size <= max_categorical_card and np.all(levels == np.round(levels)):
            kinds.append(ColumnKind.categorical(levels))
        else:
            kinds.append(CONTINUOUS)
    return kinds


def _is_na(token: str, na_tokens) -> bool:
    return token.strip() in na_tokens


def read_csv(path, na_tokens=DEFAULT_NA_TOKENS, max_categorical_card=DEFAULT_MAX_CATEGORICAL,
             kinds_sidecar=None) -> IncompleteDataset:
    """Read a header-first CSV.  Text columns are label-encoded to codes 1..K.

    ``kinds_sidecar`` (or ``<path>.kinds.json`` if present) overrides column
    kind inference; it holds ``{"columns": {name: ColumnKind-json}}``.
    """
    path = Path(path)
    na_tokens = set(na_tokens)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError("empty CSV file")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise DataError("duplicate column names in header")
    body = rows[1:]
    D = len(header)
    cells = []
    for lineno, row in enumerate(body, start=2):
        if len(row) == 0:
            continue
        if len(row) != D:
            raise DataError(f"ragged row at line {lineno}: {len(row)} fields, expected {D}")
        cells.append(row)
    N = len(cells)
    values = np.full((N, D), np.nan)
    text_labels: dict[int, tuple] = {}
    for j in range(D):
        col = [r[j] for r in cells]
        parsed = []
        numeric = True
        for tok in col:
            if _is_na(tok, na_tokens):
                parsed.append(math.nan)
                continue
            try:
                parsed.append(float(tok))
            except ValueError:
                numeric = False
                break
        if numeric:
            values[:, j] = parsed
        else:
            labels = sorted({tok.strip() for tok in col if not _is_na(tok, na_tokens)})
            code = {lab: i + 1 for i, lab in enumerate(labels)}
            values[:, j] = [math.nan if _is_na(t, na_tokens) else code[t.strip()] for t in col]
            text_labels[j] = tuple(labels)
    sidecar = Path(kinds_sidecar) if kinds_sidecar else path.with_suffix(path.suffix + ".kinds.json")
    declared = {}
    if sidecar.exists():
        declared = json.loads(sidecar.read_text())["columns"]
    kinds = []
    for j, name in enumerate(header):
        if name in declared:
            kinds.append(ColumnKind.from_json(declared[name]))
            continue
        col = values[:, j][~np.isnan(values[:, j])]
        if col.size == 0:
            raise DataError(f"fully missing column {name!r}")
        if j in text_labels:
            labels = text_labels[j]
            if len(labels) < 2:
                raise DataError(f"text column {name!r} has a single level")
            kinds.append(ColumnKind.categorical(range(1, len(labels) + 1), labels))
        else:
            kinds.append(infer_column_kinds(values[:, [j]], max_categorical_card)[0])
    return IncompleteDataset(values, ~np.isnan(values), tuple(kinds), tuple(header))


def _format(v: float, kind: ColumnKind) -> str:
    if kind.is_categorical and kind.labels:
        return kind.labels[int(round(v)) - 1]
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return f"{v:.{CSV_PRECISION}g}"


def write_csv(dataset, path, names=None) -> None:
    """Write a dataset (imputed, incomplete or a bare array) with fixed 12-digit precision."""
    if isinstance(dataset, (ImputedDataset, IncompleteDataset)):
        values = dataset.values
        kinds = dataset.kinds or (CONTINUOUS,) * values.shape[1]
        names = names or dataset.names
    else:
        values = np.asarray(dataset, dtype=np.float64)
        kinds = (CONTINUOUS,) * values.shape[1]
    names = names or tuple(f"x{j}" for j in range(values.shape[1]))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in values:
            w.writerow(["" if np.isnan(v) else _format(v, k) for v, k in zip(row, kinds)])


def write_kinds_sidecar(dataset, path) -> None:
    cols = {name: k.to_json() for name, k in zip(dataset.names, dataset.kinds)}
    Path(path).write_text(json.dumps({"columns": cols}, indent=2))


def write_mask_csv(mask, names, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in np.asarray(mask, dtype=bool):
            w.writerow([int(b) for b in row])
