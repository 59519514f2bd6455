"""Synthetic regression tasks, CSV ingestion and the train/val/test split."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


class DataError(ValueError):
    pass


class MissingFileError(DataError, FileNotFoundError):
    pass


class MissingColumnError(DataError, KeyError):
    def __str__(self):
        return str(self.args[0])


class EmptyDataError(DataError):
    pass


class MalformedRowError(DataError):
    def __init__(self, row: int, msg: str):
        self.row = row
        super().__init__(f"row {row}: {msg}")


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    name: str = "dataset"
    target_shift: float = 0.0
    # indices whose targets were deliberately corrupted
    contaminated: tuple[int, ...] = ()

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.targets, dtype=np.float64).ravel()
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != y.size:
            raise DataError(f"{x.shape[0]} feature rows but {y.size} targets")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DataError("features and targets must be finite")
        if np.any(y <= 0):
            raise DataError("targets must be strictly positive (apply positive_shift)")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "targets", y)

    def __len__(self) -> int:
        return self.targets.size

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx, name: str | None = None) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        pos = {int(v): n for n, v in enumerate(idx)}
        cont = tuple(sorted(pos[c] for c in self.contaminated if c in pos))
        return replace(self, features=self.features[idx], targets=self.targets[idx],
                       name=name or self.name, contaminated=cont)


def positive_shift(y) -> float:
    """Offset making every target positive: -min + 0.1*range when min <= 0, else 0."""
    y = np.asarray(y, dtype=np.float64)
    lo, hi = float(y.min()), float(y.max())
    if lo > 0:
        return 0.0
    spread = hi - lo if hi > lo else 1.0
    return -lo + 0.1 * spread


def _from_raw(x, y, name) -> Dataset:
    shift = positive_shift(y)
    return Dataset(x, np.asarray(y) + shift, name=name, target_shift=shift)


def gen_linear(n: int, d: int, noise_std: float = 0.1, seed: int = 0) -> Dataset:
    """y = w.x + eps with x ~ U(-1, 1)^d, eps ~ N(0, noise_std), shifted positive."""
    if n < 10 or d < 1 or noise_std < 0:
        raise ValueError("gen_linear needs n >= 10, d >= 1, noise_std >= 0")
    rng = np.random.default_rng(seed)
    w = rng.normal(size=d)
    x = rng.uniform(-1.0, 1.0, size=(n, d))
    y = x @ w + rng.normal(0.0, noise_std, size=n)
    return _from_raw(x, y, f"linear(n={n},d={d},noise={noise_std})")


def monotone_weights(d: int, seed: int = 0, scale: float = 1.5) -> np.ndarray:
    """Latent direction of :func:`gen_monotone`: a seeded normal draw rescaled to norm ``scale``."""
    w = np.random.default_rng(seed).normal(size=d)
    return w * (scale / np.linalg.norm(w))


def gen_monotone(
    n: int, d: int, seed: int = 0, noise: float = 0.05, scale: float = 1.5
) -> Dataset:
    """y = exp(w.x) * (1 + u), u ~ U(-noise, noise); positive by construction.

    ``scale`` is |w|; larger values give a more skewed target distribution.
    """
    if n < 10 or d < 1 or not 0 <= noise < 1 or scale <= 0:
        raise ValueError("gen_monotone needs n >= 10, d >= 1, 0 <= noise < 1, scale > 0")
    w = monotone_weights(d, seed, scale)
    rng = np.random.default_rng([seed, 1])
    x = rng.uniform(-1.0, 1.0, size=(n, d))
    y = np.exp(x @ w) * (1.0 + rng.uniform(-noise, noise, size=n))
    return Dataset(x, y, name=f"monotone(n={n},d={d},noise={noise},scale={scale})")


def gen_outlier_contaminated(
    base: Dataset, contaminate_frac: float, magnitude: float = 3.0, seed: int = 0
) -> Dataset:
    """Replace a seeded ``round(frac*n)`` subset of targets with target*(1+magnitude)."""
    if not 0 <= contaminate_frac < 0.5:
        raise ValueError("contaminate_frac must be in [0, 0.5)")
    if magnitude <= -1:
        raise ValueError("magnitude must exceed -1 to keep targets positive")
    n = len(base)
    k = int(round(contaminate_frac * n))
    if k == 0:
        return base
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=k, replace=False))
    y = base.targets.copy()
    y[idx] *= 1.0 + magnitude
    return replace(base, targets=y, name=f"{base.name}+outliers({contaminate_frac},{magnitude})",
                   contaminated=tuple(sorted(set(base.contaminated) | set(idx.tolist()))))


def load_csv(path, target_column: str) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyDataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if target_column not in header:
            raise MissingColumnError(f"{path}: no column {target_column!r} in {header}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise MalformedRowError(lineno, f"expected {len(header)} fields, got {len(raw)}")
            try:
                rows.append([float(c) for c in raw])
            except ValueError:
                raise MalformedRowError(lineno, f"non-numeric cell in {raw}") from None
            if not all(math.isfinite(v) for v in rows[-1]):
                raise MalformedRowError(lineno, "non-finite value")
    if not rows:
        raise EmptyDataError(f"{path}: no data rows")
    table = np.array(rows, dtype=np.float64)
    t = header.index(target_column)
    x = np.delete(table, t, axis=1)
    if x.shape[1] == 0:
        raise EmptyDataError(f"{path}: no feature columns besides {target_column!r}")
    return _from_raw(x, table[:, t], path.stem)


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.60
    val_frac: float = 0.15
    test_frac: float = 0.25
    seed: int = 0

    def __post_init__(self):
        fr = (self.train_frac, self.val_frac, self.test_frac)
        if min(fr) <= 0 or abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must be positive and sum to 1, got {fr}")


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    perm = np.random.default_rng(spec.seed).permutation(n)
    n_val = int(round(spec.val_frac * n))
    n_test = int(round(spec.test_frac * n))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise DataError(f"n={n} too small for split {spec}")
    return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]


def split(ds: Dataset, spec: SplitSpec = SplitSpec()) -> tuple[Dataset, Dataset, Dataset]:
    tr, va, te = split_indices(len(ds), spec)
    return ds.subset(tr, "train"), ds.subset(va, "val"), ds.subset(te, "test")


@dataclass
class Standardizer:
    """Feature z-scoring fitted on the training split."""

    mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    scale: np.ndarray = field(default_factory=lambda: np.ones(0))

    @classmethod
    def fit(cls, x) -> "Standardizer":
        x = np.asarray(x, dtype=np.float64)
        sd = x.std(axis=0)
        return cls(x.mean(axis=0), np.where(sd > 0, sd, 1.0))

    def __call__(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.scale
