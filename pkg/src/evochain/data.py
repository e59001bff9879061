"""Datasets whose features carry acquisition costs.

Rows are split 50/25/25 (train/validation/test) stratified by label;
imputation statistics and standardization always come from the train
split only.  Costs arrive either as explicit per-feature values or as
cost classes mapped through a linear (a*T) or exponential (10**T)
schedule.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .evolution import round_half_away

__all__ = [
    "CostedDataset",
    "CostSchedule",
    "SyntheticSpec",
    "split_50_25_25",
    "generate_synthetic",
    "assemble_dataset",
    "load_dataset",
]


@dataclass
class CostedDataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    costs: np.ndarray
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        self.costs = np.asarray(self.costs, dtype=np.float64)
        n_records, n_features = self.features.shape
        if len(self.labels) != n_records:
            raise ValueError(f"{n_records} rows but {len(self.labels)} labels")
        if len(self.feature_names) != n_features:
            raise ValueError(f"{n_features} features but {len(self.feature_names)} names")
        if self.costs.shape != (n_features,):
            raise ValueError(f"need one cost per feature, got shape {self.costs.shape}")
        if not np.all(np.isfinite(self.costs)) or np.any(self.costs <= 0):
            raise ValueError("feature costs must be positive and finite")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite values after ingestion")
        splits = np.concatenate([self.train_idx, self.val_idx, self.test_idx])
        if len(np.unique(splits)) != len(splits) or len(splits) != n_records:
            raise ValueError("train/val/test indices must partition the rows")

    @property
    def n_records(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def total_cost(self) -> float:
        return float(math.fsum(self.costs.tolist()))

    @property
    def X_train(self) -> np.ndarray:
        return self.features[self.train_idx]

    @property
    def y_train(self) -> np.ndarray:
        return self.labels[self.train_idx]

    @property
    def X_val(self) -> np.ndarray:
        return self.features[self.val_idx]

    @property
    def y_val(self) -> np.ndarray:
        return self.labels[self.val_idx]

    @property
    def X_test(self) -> np.ndarray:
        return self.features[self.test_idx]

    @property
    def y_test(self) -> np.ndarray:
        return self.labels[self.test_idx]


def split_50_25_25(labels, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic stratified 50/25/25 split.

    Each class is shuffled with the given seed and cut at rounded
    proportions, so per-stratum counts are within one row of exact.
    Classes with fewer than three rows trigger a warning and an
    unstratified fallback.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if n < 4:
        raise ValueError(f"need at least 4 records to split 50/25/25, got {n}")
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(labels, return_counts=True)
    if counts.min() < 3:
        warnings.warn(
            "a class has fewer than 3 records; falling back to an unstratified split",
            UserWarning,
        )
        strata = [np.arange(n)]
    else:
        strata = [np.flatnonzero(labels == c) for c in classes]
    train: list[int] = []
    val: list[int] = []
    test: list[int] = []
    for idx in strata:
        idx = idx.copy()
        rng.shuffle(idx)
        m = len(idx)
        n_train = round_half_away(0.5 * m)
        n_val = round_half_away(0.25 * m)
        train.extend(idx[:n_train])
        val.extend(idx[n_train : n_train + n_val])
        test.extend(idx[n_train + n_val :])
    return (
        np.array(sorted(train), dtype=np.intp),
        np.array(sorted(val), dtype=np.intp),
        np.array(sorted(test), dtype=np.intp),
    )


@dataclass
class CostSchedule:
    """Per-feature costs, explicit or derived from cost classes.

    mode 'explicit': ``values`` holds one positive cost per feature.
    mode 'class_linear': cost = scale * T for cost class T >= 1.
    mode 'class_exponential': cost = 10 ** T.
    Classes/values may be positional lists or name-keyed mappings.
    """

    mode: str
    values: object = None
    classes: object = None
    scale: float = 1.0

    _MODES = ("explicit", "class_linear", "class_exponential")

    def __post_init__(self) -> None:
        self.mode = str(self.mode).replace("-", "_")
        if self.mode not in self._MODES:
            raise ValueError(f"unknown cost schedule mode {self.mode!r}; expected one of {self._MODES}")
        if self.mode == "explicit" and self.values is None:
            raise ValueError("explicit cost schedule needs 'values'")
        if self.mode != "explicit" and self.classes is None:
            raise ValueError(f"{self.mode} cost schedule needs 'classes'")
        if self.mode == "class_linear" and self.scale <= 0:
            raise ValueError(f"linear cost scale must be positive, got {self.scale}")

    @classmethod
    def from_config(cls, obj: dict) -> "CostSchedule":
        if not isinstance(obj, dict) or "mode" not in obj:
            raise ValueError("cost schedule config must be a mapping with a 'mode' key")
        known = {"mode", "values", "classes", "scale"}
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown cost schedule keys {sorted(extra)}")
        return cls(
            mode=obj["mode"],
            values=obj.get("values"),
            classes=obj.get("classes"),
            scale=float(obj.get("scale", 1.0)),
        )

    def _resolve(self, raw, feature_names: tuple[str, ...], what: str) -> list[float]:
        if isinstance(raw, dict):
            unknown = set(raw) - set(feature_names)
            if unknown:
                raise ValueError(f"cost schedule names unknown features {sorted(unknown)}")
            missing = [f for f in feature_names if f not in raw]
            if missing:
                raise ValueError(f"cost schedule missing {what} for features {missing}")
            return [float(raw[f]) for f in feature_names]
        seq = list(raw)
        if len(seq) != len(feature_names):
            raise ValueError(
                f"cost schedule has {len(seq)} {what} but the dataset has "
                f"{len(feature_names)} features"
            )
        return [float(v) for v in seq]

    def costs_for(self, feature_names) -> np.ndarray:
        feature_names = tuple(feature_names)
        if self.mode == "explicit":
            costs = self._resolve(self.values, feature_names, "values")
        else:
            classes = self._resolve(self.classes, feature_names, "classes")
            for t in classes:
                if t < 1 or t != int(t):
                    raise ValueError(f"cost classes must be integers >= 1, got {t}")
            if self.mode == "class_linear":
                costs = [self.scale * t for t in classes]
            else:
                costs = [10.0**t for t in classes]
        arr = np.asarray(costs, dtype=np.float64)
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise ValueError("resolved feature costs must be positive and finite")
        return arr


@dataclass
class SyntheticSpec:
    """Gaussian-cluster classification problem.

    Informative features sit first: each (class, cluster) pair gets a
    distinct +/-class_sep hypercube corner as its centroid with unit
    noise around it; the remaining features are pure standard noise.
    Classes are exactly balanced before label noise, which flips a
    rounded fraction of labels to a different class.
    """

    n_features: int
    n_informative: int
    n_records: int
    n_classes: int = 2
    clusters_per_class: int = 2
    class_sep: float = 1.0
    label_noise: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_features < 1 or not 1 <= self.n_informative <= self.n_features:
            raise ValueError(
                f"need 1 <= n_informative <= n_features, got {self.n_informative}/{self.n_features}"
            )
        if self.n_classes < 2:
            raise ValueError(f"n_classes must be >= 2, got {self.n_classes}")
        if self.n_records < self.n_classes:
            raise ValueError("need at least one record per class")
        if self.clusters_per_class < 1:
            raise ValueError("clusters_per_class must be >= 1")
        if not 0.0 <= self.label_noise < 1.0:
            raise ValueError(f"label_noise must lie in [0, 1), got {self.label_noise}")
        if self.class_sep <= 0:
            raise ValueError(f"class_sep must be positive, got {self.class_sep}")


def generate_synthetic(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    """Draw (features, labels) for a SyntheticSpec, deterministically by seed."""
    rng = np.random.default_rng(spec.seed)
    n_centroids = spec.n_classes * spec.clusters_per_class
    if spec.n_informative <= 60 and n_centroids > 2**spec.n_informative:
        raise ValueError(
            f"{n_centroids} clusters need distinct corners but only "
            f"{2 ** spec.n_informative} exist; raise n_informative"
        )
    corners: list[tuple[float, ...]] = []
    used: set[tuple[float, ...]] = set()
    while len(corners) < n_centroids:
        corner = tuple(rng.choice([-1.0, 1.0], size=spec.n_informative))
        if corner not in used:
            used.add(corner)
            corners.append(corner)
    centroids = np.asarray(corners) * spec.class_sep  # (classes*clusters, d_inf)

    base, rem = divmod(spec.n_records, spec.n_classes)
    counts = [base + (1 if c < rem else 0) for c in range(spec.n_classes)]
    rows: list[np.ndarray] = []
    labels: list[int] = []
    for c, count in enumerate(counts):
        class_centroids = centroids[c * spec.clusters_per_class : (c + 1) * spec.clusters_per_class]
        cluster_of = np.arange(count) % spec.clusters_per_class
        informative = class_centroids[cluster_of] + rng.standard_normal(
            (count, spec.n_informative)
        )
        noise = rng.standard_normal((count, spec.n_features - spec.n_informative))
        rows.append(np.hstack([informative, noise]))
        labels.extend([c] * count)
    X = np.vstack(rows)
    y = np.asarray(labels)

    n_flips = round_half_away(spec.label_noise * spec.n_records)
    if n_flips:
        flip_at = rng.choice(spec.n_records, size=n_flips, replace=False)
        for i in flip_at:
            shifted = int(rng.integers(spec.n_classes - 1))
            y[i] = shifted + 1 if shifted >= y[i] else shifted
    perm = rng.permutation(spec.n_records)
    return X[perm], y[perm]


def assemble_dataset(
    features,
    labels,
    costs,
    split_seed: int,
    feature_names=None,
) -> CostedDataset:
    """Bundle arrays into a CostedDataset with a fresh 50/25/25 split."""
    features = np.asarray(features, dtype=np.float64)
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(features.shape[1]))
    train_idx, val_idx, test_idx = split_50_25_25(labels, split_seed)
    return CostedDataset(
        features=features,
        labels=np.asarray(labels),
        feature_names=tuple(feature_names),
        costs=costs,
        train_idx=train_idx,
        val_idx=val_idx,
        test_idx=test_idx,
    )


def _encode_labels(series: pd.Series, path) -> np.ndarray:
    if series.isna().any():
        raise ValueError(f"{path}: label column has missing values")
    if pd.api.types.is_numeric_dtype(series):
        values = series.to_numpy()
        if not np.all(values == np.floor(values)):
            raise ValueError(f"{path}: labels must be integers or categories")
        return values.astype(np.int64)
    mapping = {v: i for i, v in enumerate(sorted(series.unique()))}
    return series.map(mapping).to_numpy(dtype=np.int64)


def load_dataset(
    path,
    schedule: CostSchedule,
    split_seed: int,
    label_column: str = "label",
) -> CostedDataset:
    """Ingest a headed CSV: encode categoricals, split, impute, attach costs.

    Categorical feature columns become integer codes (sorted value order).
    Missing feature values are filled with the train-split median (numeric)
    or train-split mode (categorical, ties to the smallest code); the
    imputed matrix is what every split sees.
    """
    df = pd.read_csv(path)
    if len(df) == 0:
        raise ValueError(f"{path}: dataset is empty")
    for col in df.columns:
        try:
            float(col)
        except (TypeError, ValueError):
            continue
        raise ValueError(
            f"{path}: column name {col!r} looks like data; the first row must be a header"
        )
    if label_column not in df.columns:
        raise ValueError(f"{path}: no {label_column!r} column (set label_column to rename)")

    y = _encode_labels(df[label_column], path)
    feature_df = df.drop(columns=[label_column])
    if feature_df.shape[1] == 0:
        raise ValueError(f"{path}: no feature columns besides the label")

    categorical: set[str] = set()
    matrix = np.empty((len(df), feature_df.shape[1]), dtype=np.float64)
    for j, col in enumerate(feature_df.columns):
        series = feature_df[col]
        if pd.api.types.is_numeric_dtype(series):
            matrix[:, j] = series.to_numpy(dtype=np.float64)
        else:
            categorical.add(col)
            codes = {v: float(i) for i, v in enumerate(sorted(series.dropna().unique()))}
            matrix[:, j] = series.map(codes).to_numpy(dtype=np.float64)

    train_idx, val_idx, test_idx = split_50_25_25(y, split_seed)
    for j, col in enumerate(feature_df.columns):
        column = matrix[:, j]
        holes = np.isnan(column)
        if not holes.any():
            continue
        train_vals = column[train_idx]
        train_vals = train_vals[~np.isnan(train_vals)]
        if len(train_vals) == 0:
            raise ValueError(f"{path}: feature {col!r} has no observed training values")
        if col in categorical:
            codes, freq = np.unique(train_vals, return_counts=True)
            fill = codes[freq == freq.max()].min()  # mode, ties to smallest code
        else:
            fill = float(np.median(train_vals))
        column[holes] = fill

    names = tuple(str(c) for c in feature_df.columns)
    return CostedDataset(
        features=matrix,
        labels=y,
        feature_names=names,
        costs=schedule.costs_for(names),
        train_idx=train_idx,
        val_idx=val_idx,
        test_idx=test_idx,
    )
