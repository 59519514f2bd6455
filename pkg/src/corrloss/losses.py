"""Correlation losses for regression: robust Pearson loss and coarse-to-fine rank loss.

All losses build nodes on the ``ndgrad`` tape. Anything that selects or
orders samples (outlier split, band membership, triplet ordering) is computed
on detached values and carries no gradient.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Literal

import numpy as np

from . import ndgrad as nd
from .ndgrad import Node

Phase = Literal["warmup", "correlation"]


@dataclass
class LossConfig:
    outlier_fraction: float = 0.10
    alpha: float = 0.25
    w_plc: float = 1.0
    w_src: float = 1.0
    w_mse: float = 0.1
    tuple_budget: int = 512
    epsilon: float = nd.EPS
    # which triplet hinges are active: "both", "ascent" or "descent"
    fine_terms: str = "both"
    # MSE weight during warm-up; negative means "same as w_mse"
    w_mse_warmup: float = -1.0

    def __post_init__(self):
        if not 0.0 <= self.outlier_fraction < 0.5:
            raise ValueError("outlier_fraction must be in [0, 0.5)")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if min(self.w_plc, self.w_src, self.w_mse) < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.tuple_budget < 1:
            raise ValueError("tuple_budget must be >= 1")
        if self.fine_terms not in ("both", "ascent", "descent"):
            raise ValueError(f"unknown fine_terms {self.fine_terms!r}")

    @property
    def warmup_weight(self) -> float:
        return self.w_mse if self.w_mse_warmup < 0 else self.w_mse_warmup

    @classmethod
    def mse_only(cls, **kw) -> "LossConfig":
        return cls(w_mse=1.0, w_plc=0.0, w_src=0.0, **kw)


@dataclass
class Batch:
    """One step's predictions (vector node), targets and embeddings (m x k node)."""

    predictions: Node
    targets: np.ndarray
    embeddings: Node | None = None

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.predictions.value.ndim != 1 or self.predictions.shape != self.targets.shape:
            raise nd.ShapeError("batch", self.predictions.shape, self.targets.shape)
        if self.embeddings is not None and (
            self.embeddings.value.ndim != 2 or self.embeddings.shape[0] != self.targets.size
        ):
            raise nd.ShapeError("batch embeddings", self.embeddings.shape, self.targets.shape)

    @property
    def size(self) -> int:
        return self.targets.size


def _zero() -> Node:
    return Node(0.0)


def loss_mse(pred: Node, target) -> Node:
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise nd.ShapeError("loss_mse", pred.shape, target.shape)
    if target.size < 1:
        raise ValueError("loss_mse needs at least one sample")
    return nd.mean(nd.square(pred - Node(target)))


def select_outliers(pred, target, fraction: float) -> np.ndarray:
    """Boolean mask of the floor(fraction*m) samples with the largest |pred - target|.

    Ties are broken towards the lower index.
    """
    pred = np.asarray(pred.value if isinstance(pred, Node) else pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    m = target.size
    k = int(math.floor(fraction * m + 1e-12))
    mask = np.zeros(m, dtype=bool)
    if k:
        err = np.abs(pred - target)
        order = np.lexsort((np.arange(m), -err))
        mask[order[:k]] = True
    return mask


def plc_node(pred: Node, target: np.ndarray, eps: float = nd.EPS) -> Node:
    """Pearson correlation between a prediction node and constant targets."""
    t = Node(target - target.mean())
    dp = pred - nd.mean(pred)
    denom = nd.l2_norm(dp, eps) * float(np.linalg.norm(t.value))
    return nd.div(nd.dot(dp, t), denom, eps)


def plc_correlation_term(pred: Node, target, eps: float = nd.EPS) -> Node:
    """1 - PLC^2 + (mean gap)^2 + (std gap)^2 over a set of samples."""
    target = np.asarray(target, dtype=np.float64)
    if target.size < 2:
        raise ValueError("correlation term needs at least 2 samples")
    r = plc_node(pred, target, eps)
    mean_gap = nd.mean(pred) - float(target.mean())
    std_gap = nd.std(pred, eps) - float(target.std())
    return 1.0 - nd.square(r) + nd.square(mean_gap) + nd.square(std_gap)


def loss_plc(batch: Batch, cfg: LossConfig) -> Node:
    """Outlier MSE plus the correlation/moment term on the remaining samples."""
    mask = select_outliers(batch.predictions.value, batch.targets, cfg.outlier_fraction)
    normal = np.flatnonzero(~mask)
    if normal.size < 2:
        raise ValueError(
            f"loss_plc: only {normal.size} non-outlier samples in a batch of {batch.size}; "
            "use a larger batch or a smaller outlier_fraction"
        )
    pred, y = batch.predictions, batch.targets
    if normal.size == batch.size:
        out = plc_correlation_term(pred, y, cfg.epsilon)
    else:
        out = plc_correlation_term(nd.take(pred, normal), y[normal], cfg.epsilon)
    outliers = np.flatnonzero(mask)
    if outliers.size:
        out = out + loss_mse(nd.take(pred, outliers), y[outliers])
    return out


# ---------------------------------------------------------------- rank loss


def proxy_similarity(r_i: float, r_j: float) -> float:
    """Target ratio folded into (0, 1]."""
    if r_i <= 0 or r_j <= 0:
        raise ValueError(f"proxy similarity needs positive targets, got {r_i}, {r_j}")
    return min(r_i / r_j, r_j / r_i)


def proxy_matrix(targets) -> np.ndarray:
    r = np.asarray(targets, dtype=np.float64)
    if np.any(r <= 0):
        raise ValueError("proxy similarity needs strictly positive targets")
    ratio = r[:, None] / r[None, :]
    return np.minimum(ratio, 1.0 / ratio)


def in_band(abs_s, p, alpha: float):
    """Open-band test p < |s| < p + alpha (works elementwise on arrays)."""
    return (p < abs_s) & (abs_s < p + alpha)


def loss_coarse(s_ij: Node, p_ij: float, alpha: float) -> Node | None:
    """Squared pull of |s| towards p, or None if |s| already sits in the band."""
    a = nd.abs(s_ij)
    if in_band(float(a.value), p_ij, alpha):
        return None
    return nd.square(a - p_ij)


def fine_hinges(
    s_ij: Node, s_ik: Node, s_jk: Node, p_ij: float, p_ik: float, p_jk: float
) -> tuple[Node, Node]:
    """(ascent, descent) hinges with proxy-difference margins."""
    a_ij, a_ik, a_jk = nd.abs(s_ij), nd.abs(s_ik), nd.abs(s_jk)
    ascent = nd.relu((p_ij - p_ik) - (a_ij - a_ik))
    descent = nd.relu((p_jk - p_ik) - (a_jk - a_ik))
    return ascent, descent


def loss_fine(tup: tuple[int, int, int], batch: Batch) -> Node:
    """Ascent + descent hinge for one triplet ordered by descending target."""
    i, j, k = tup
    r = batch.targets
    if not r[i] > r[j] > r[k]:
        raise ValueError(f"triplet {tup} is not strictly descending in target: {r[[i, j, k]]}")
    e = batch.embeddings
    rows = [nd.row(e, t) for t in (i, j, k)]
    s_ij = nd.cosine_similarity(rows[0], rows[1])
    s_ik = nd.cosine_similarity(rows[0], rows[2])
    s_jk = nd.cosine_similarity(rows[1], rows[2])
    asc, desc = fine_hinges(
        s_ij, s_ik, s_jk,
        proxy_similarity(r[i], r[j]), proxy_similarity(r[i], r[k]), proxy_similarity(r[j], r[k]),
    )
    return asc + desc


@lru_cache(maxsize=8)
def _combos(m: int) -> np.ndarray:
    arr = np.fromiter(
        (v for c in combinations(range(m), 3) for v in c), dtype=np.intp, count=3 * math.comb(m, 3)
    )
    arr = arr.reshape(-1, 3)
    arr.setflags(write=False)
    return arr


_ENUMERATE_LIMIT = 700_000


def banded_triplets(
    targets: np.ndarray, band: np.ndarray, budget: int, rng: np.random.Generator
) -> np.ndarray:
    """Triplets (i, j, k), R_i > R_j > R_k, whose three pairs are all in band.

    At most ``budget`` are returned, sampled without replacement by ``rng``.
    """
    m = targets.size
    if m < 3:
        return np.empty((0, 3), dtype=np.intp)
    order = np.argsort(-targets, kind="stable")
    if math.comb(m, 3) <= _ENUMERATE_LIMIT:
        pos = _combos(m)
    else:
        pos = np.sort(rng.choice(m, size=(budget * 50, 3)), axis=1)
        pos = pos[(pos[:, 0] < pos[:, 1]) & (pos[:, 1] < pos[:, 2])]
        pos = np.unique(pos, axis=0)
    i, j, k = order[pos[:, 0]], order[pos[:, 1]], order[pos[:, 2]]
    ok = (targets[i] > targets[j]) & (targets[j] > targets[k])
    ok &= band[i, j] & band[i, k] & band[j, k]
    trip = np.stack([i[ok], j[ok], k[ok]], axis=1)
    if len(trip) > budget:
        pick = np.sort(rng.choice(len(trip), size=budget, replace=False))
        trip = trip[pick]
    return trip


@dataclass
class SrcParts:
    coarse: Node | None
    fine: Node | None
    n_violating: int
    n_triplets: int
    triplets: np.ndarray = field(repr=False, default_factory=lambda: np.empty((0, 3), np.intp))

    @property
    def degenerate(self) -> bool:
        return self.coarse is None and self.fine is None


def src_parts(batch: Batch, cfg: LossConfig, rng: np.random.Generator | None = None) -> SrcParts:
    """Coarse (pairwise band) and fine (triplet hinge) terms of the rank loss."""
    if batch.embeddings is None:
        raise ValueError("loss_src needs embeddings")
    m = batch.size
    if m < 2:
        raise ValueError("loss_src needs at least 2 samples")
    rng = np.random.default_rng(0) if rng is None else rng
    p = proxy_matrix(batch.targets)
    a = nd.abs(nd.cosine_matrix(batch.embeddings, cfg.epsilon))
    band = in_band(a.value, p, cfg.alpha)

    iu, ju = np.triu_indices(m, 1)
    viol = ~band[iu, ju]
    coarse = None
    if viol.any():
        vi, vj = iu[viol], ju[viol]
        coarse = nd.mean(nd.square(nd.gather(a, vi, vj) - p[vi, vj]))

    trip = banded_triplets(batch.targets, band, cfg.tuple_budget, rng)
    fine = None
    if len(trip):
        i, j, k = trip.T
        a_ij, a_ik, a_jk = nd.gather(a, i, j), nd.gather(a, i, k), nd.gather(a, j, k)
        terms = []
        if cfg.fine_terms in ("both", "ascent"):
            terms.append(nd.relu((p[i, j] - p[i, k]) - (a_ij - a_ik)))
        if cfg.fine_terms in ("both", "descent"):
            terms.append(nd.relu((p[j, k] - p[i, k]) - (a_jk - a_ik)))
        fine = nd.mean(terms[0] if len(terms) == 1 else terms[0] + terms[1])
    return SrcParts(coarse, fine, int(viol.sum()), len(trip), trip)


def loss_src(batch: Batch, cfg: LossConfig, rng: np.random.Generator | None = None) -> Node:
    """Mean coarse penalty over out-of-band pairs plus mean hinge over banded triplets."""
    parts = src_parts(batch, cfg, rng)
    if parts.degenerate:
        return _zero()
    if parts.coarse is None:
        return parts.fine
    if parts.fine is None:
        return parts.coarse
    return parts.coarse + parts.fine


def loss_terms(
    batch: Batch, cfg: LossConfig, phase: Phase, rng: np.random.Generator | None = None
) -> dict[str, Node]:
    """Weighted loss terms active in ``phase``, keyed by name."""
    if phase not in ("warmup", "correlation"):
        raise ValueError(f"unknown phase {phase!r}")
    w = cfg.warmup_weight if phase == "warmup" else cfg.w_mse
    terms = {"mse": nd.scalar_mul(loss_mse(batch.predictions, batch.targets), w)}
    if phase == "correlation":
        if cfg.w_plc > 0:
            terms["plc"] = nd.scalar_mul(loss_plc(batch, cfg), cfg.w_plc)
        if cfg.w_src > 0:
            terms["src"] = nd.scalar_mul(loss_src(batch, cfg, rng), cfg.w_src)
    return terms


def loss_total(
    batch: Batch, cfg: LossConfig, phase: Phase, rng: np.random.Generator | None = None
) -> Node:
    out = None
    for t in loss_terms(batch, cfg, phase, rng).values():
        out = t if out is None else out + t
    return out
