"""Evaluation metrics: Pearson, Spearman, Kendall tau-b, absolute/relative error.

Correlations on a constant input return 0.0 rather than NaN; callers that
need to know use :func:`is_degenerate`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError(f"need at least 2 samples, got {x.size}")
    return x, y


def is_degenerate(x, y) -> bool:
    """True if either vector is constant, so no correlation is defined."""
    x, y = _pair(x, y)
    return bool(np.all(x == x[0]) or np.all(y == y[0]))


def pearson(x, y) -> float:
    x, y = _pair(x, y)
    if is_degenerate(x, y):
        return 0.0
    dx = x - x.mean()
    dy = y - y.mean()
    r = float(np.sum(dx * dy) / np.sqrt(np.sum(dx * dx) * np.sum(dy * dy)))
    return min(1.0, max(-1.0, r))


def rank(x) -> np.ndarray:
    """1-based ranks, ties get the average of the ranks they span."""
    return rankdata(np.asarray(x, dtype=np.float64), method="average")


def spearman(x, y) -> float:
    x, y = _pair(x, y)
    return pearson(rank(x), rank(y))


def _pair_counts(x: np.ndarray, y: np.ndarray) -> tuple[int, int, int, int]:
    """(concordant - discordant, pairs untied in x, pairs untied in y, total pairs)."""
    iu = np.triu_indices(x.size, 1)
    sx = np.sign(x[:, None] - x[None, :])[iu]
    sy = np.sign(y[:, None] - y[None, :])[iu]
    s = int(np.sum(sx * sy))
    return s, int(np.count_nonzero(sx)), int(np.count_nonzero(sy)), sx.size


def tau_b(s: int, untied_x: int, untied_y: int) -> float:
    if untied_x == 0 or untied_y == 0:
        return 0.0
    return s / np.sqrt(float(untied_x) * float(untied_y))


def kendall(x, y) -> float:
    """Kendall tau-b over all n(n-1)/2 pairs."""
    x, y = _pair(x, y)
    s, ux, uy, _ = _pair_counts(x, y)
    return float(min(1.0, max(-1.0, tau_b(s, ux, uy))))


@dataclass(frozen=True)
class ErrorStats:
    ae_mean: float
    ae_std: float
    re_mean: float
    re_std: float


def abs_rel_error(pred, target, relative: bool = True) -> ErrorStats:
    """Mean and population std of |pred - target| and of 100*|pred - target|/|target|."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    if pred.shape != target.shape:
        raise ValueError(f"length mismatch: {pred.size} vs {target.size}")
    if pred.size < 1:
        raise ValueError("need at least 1 sample")
    ae = np.abs(pred - target)
    if not relative:
        return ErrorStats(float(ae.mean()), float(ae.std()), float("nan"), float("nan"))
    zero = np.flatnonzero(target == 0)
    if zero.size:
        raise ValueError(f"relative error undefined: target is zero at index {int(zero[0])}")
    re = 100.0 * ae / np.abs(target)
    return ErrorStats(float(ae.mean()), float(ae.std()), float(re.mean()), float(re.std()))


def mean_std(values, ddof: int = 0) -> tuple[float, float]:
    """Mean and std across runs; ddof=0 is population, ddof=1 sample."""
    v = np.asarray(values, dtype=np.float64)
    if v.size <= ddof:
        return float(v.mean()) if v.size else float("nan"), 0.0
    return float(v.mean()), float(v.std(ddof=ddof))


@dataclass
class MetricsReport:
    plc: float
    src: float
    klc: float
    ae_mean: float
    ae_std: float
    re_mean: float
    re_std: float
    n: int
    degenerate: bool = False
    residuals: list[tuple[float, float]] = field(default_factory=list, repr=False)

    FIELDS = ("plc", "src", "klc", "ae_mean", "ae_std", "re_mean", "re_std")

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in self.FIELDS}


def evaluate(pred, target) -> MetricsReport:
    pred, target = _pair(pred, target)
    err = abs_rel_error(pred, target)
    return MetricsReport(
        plc=pearson(pred, target),
        src=spearman(pred, target),
        klc=kendall(pred, target),
        ae_mean=err.ae_mean,
        ae_std=err.ae_std,
        re_mean=err.re_mean,
        re_std=err.re_std,
        n=int(pred.size),
        degenerate=is_degenerate(pred, target),
        residuals=list(zip(pred.tolist(), target.tolist())),
    )
