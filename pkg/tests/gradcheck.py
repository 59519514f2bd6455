"""Central finite-difference gradient checking shared by the test modules."""
from __future__ import annotations

import numpy as np

from corrloss import losses as L
from corrloss import ndgrad as nd

H = 1e-5
TOL = 1e-4


def numeric_grad(f, x0: np.ndarray, h: float = H) -> np.ndarray:
    x0 = np.asarray(x0, dtype=np.float64)
    g = np.zeros_like(x0)
    for i in np.ndindex(x0.shape):
        xp = x0.copy()
        xp[i] += h
        xm = x0.copy()
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def rel_err(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    """Norm-wise relative error; the floor keeps all-zero gradients comparable."""
    den = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / den)


def check(build, inputs: list[np.ndarray], h: float = H) -> float:
    """Worst relative error over ``inputs`` of ``build(*nodes) -> scalar Node``."""
    nodes = [nd.param(x) for x in inputs]
    out = build(*nodes)
    nd.backward(out)
    worst = 0.0
    for k, x in enumerate(inputs):
        def f(v, k=k):
            args = [nd.param(u) for u in inputs]
            args[k] = nd.param(v)
            return build(*args).item()

        worst = max(worst, rel_err(nodes[k].grad, numeric_grad(f, x, h)))
    return worst


def _weights(shape, rng):
    return nd.tensor(rng.normal(size=shape))


def _project(out: nd.Node, rng) -> nd.Node:
    """Reduce any-shaped output to a scalar through fixed random weights."""
    if out.value.ndim == 0:
        return out
    return nd.sum(out * _weights(out.shape, rng))


def away_from(x: np.ndarray, points=(0.0,), margin: float = 1e-3) -> bool:
    return all(np.all(np.abs(x - p) > margin) for p in points)


# name -> (input sampler(rng), op(*nodes), smoothness predicate on inputs)
def _vec(n):
    return lambda rng: [rng.normal(size=n)]


def _pair(shape):
    return lambda rng: [rng.normal(size=shape), rng.normal(size=shape)]


OPS = {
    "add": (_pair((3, 4)), nd.add, None),
    "add_scalar_broadcast": (lambda r: [r.normal(size=5), np.array(r.normal())], nd.add, None),
    "sub": (_pair(6), nd.sub, None),
    "mul": (_pair((2, 3)), nd.mul, None),
    "mul_scalar_broadcast": (lambda r: [np.array(r.normal()), r.normal(size=4)], nd.mul, None),
    "div": (lambda r: [r.normal(size=5), r.choice([-1, 1], 5) * r.uniform(0.5, 2, 5)], nd.div, None),
    "matmul": (lambda r: [r.normal(size=(3, 4)), r.normal(size=(4, 2))], nd.matmul, None),
    "matvec": (lambda r: [r.normal(size=(3, 4)), r.normal(size=4)], nd.matmul, None),
    "scalar_mul": (_vec(5), lambda a: nd.scalar_mul(a, 2.5), None),
    "neg": (_vec(4), nd.neg, None),
    "sum": (_vec((3, 3)), nd.sum, None),
    "mean": (_vec(7), nd.mean, None),
    "variance": (_vec(6), nd.variance, None),
    "std": (_vec(6), nd.std, None),
    "sqrt": (lambda r: [r.uniform(0.2, 3.0, 5)], nd.sqrt, None),
    "square": (_vec(5), nd.square, None),
    "abs": (_vec(6), nd.abs, lambda xs: away_from(xs[0])),
    "relu": (_vec(6), nd.relu, lambda xs: away_from(xs[0])),
    "max_with_zero": (_vec((2, 3)), nd.max_with_zero, lambda xs: away_from(xs[0])),
    "tanh": (_vec((2, 4)), nd.tanh, None),
    "dot": (_pair(5), nd.dot, None),
    "l2_norm": (_vec(5), nd.l2_norm, None),
    "cosine_similarity": (_pair(6), nd.cosine_similarity, None),
    "cosine_matrix": (_vec((5, 4)), nd.cosine_matrix, None),
    "add_bias": (lambda r: [r.normal(size=(3, 4)), r.normal(size=4)], nd.add_bias, None),
    "reshape": (_vec((2, 3)), lambda a: nd.reshape(a, (6,)), None),
    "take": (_vec(6), lambda a: nd.take(a, [0, 2, 2, 5]), None),
    "gather": (_vec((4, 4)), lambda a: nd.gather(a, [0, 1, 1, 3], [2, 0, 0, 3]), None),
    "row": (_vec((3, 5)), lambda a: nd.row(a, 1), None),
}


def op_instance(name: str, seed: int) -> float:
    sampler, op, smooth = OPS[name]
    rng = np.random.default_rng(seed)
    while True:
        xs = sampler(rng)
        if smooth is None or smooth(xs):
            break
    wseed = int(rng.integers(1 << 30))
    return check(lambda *ns: _project(op(*ns), np.random.default_rng(wseed)), xs)


# ---------------------------------------------------------------- loss instances


def plc_batch(rng, m=None):
    m = m or int(rng.integers(4, 33))
    y = rng.uniform(1.0, 3.0, m)
    pred = y + rng.normal(0, 0.5, m)
    return pred, y


def plc_smooth(pred, y, cfg, margin=1e-3) -> bool:
    """Outlier selection must not change under an h-sized perturbation."""
    k = int(np.floor(cfg.outlier_fraction * y.size + 1e-12))
    err = np.sort(np.abs(pred - y))[::-1]
    if k and err[k - 1] - err[k] < margin:
        return False
    return True


def src_batch(rng, m=None, k=4):
    m = m or int(rng.integers(4, 33))
    return rng.uniform(1.0, 2.0, m), rng.uniform(0.0, 1.0, (m, k))


def src_smooth(emb, y, cfg, margin=1e-4) -> bool:
    """No pair within ``margin`` of a band edge or of |s| = 0, and no hinge near its kink."""
    s = nd.cosine_matrix(nd.tensor(emb)).value
    a = np.abs(s)
    p = L.proxy_matrix(y)
    iu = np.triu_indices(y.size, 1)
    if not (away_from(a[iu] - p[iu], margin=margin)
            and away_from(a[iu] - p[iu] - cfg.alpha, margin=margin)
            and away_from(s[iu], margin=margin)):
        return False
    band = L.in_band(a, p, cfg.alpha)
    trip = L.banded_triplets(y, band, cfg.tuple_budget, np.random.default_rng(0))
    if len(trip):
        i, j, k = trip.T
        asc = (p[i, j] - p[i, k]) - (a[i, j] - a[i, k])
        desc = (p[j, k] - p[i, k]) - (a[j, k] - a[i, k])
        if not (away_from(asc, margin=margin) and away_from(desc, margin=margin)):
            return False
    return True


def loss_instance(name: str, seed: int) -> float:
    rng = np.random.default_rng(seed)
    cfg = L.LossConfig()
    if name == "loss_mse":
        pred, y = plc_batch(rng)
        return check(lambda p: L.loss_mse(p, y), [pred])
    if name == "loss_plc":
        while True:
            pred, y = plc_batch(rng)
            if plc_smooth(pred, y, cfg):
                break
        return check(lambda p: L.loss_plc(L.Batch(p, y), cfg), [pred])
    if name in ("loss_src", "loss_total"):
        while True:
            y, emb = src_batch(rng)
            pred, _ = plc_batch(rng, y.size)
            if src_smooth(emb, y, cfg) and plc_smooth(pred, y, cfg):
                break
        if name == "loss_src":
            return check(
                lambda e: L.loss_src(L.Batch(nd.param(np.zeros(y.size)), y, e), cfg,
                                     np.random.default_rng(1)), [emb])
        return check(
            lambda p, e: L.loss_total(L.Batch(p, y, e), cfg, "correlation", np.random.default_rng(1)),
            [pred, emb])
    if name == "loss_coarse":
        while True:
            p = rng.uniform(0.2, 0.9)
            v = rng.normal(size=(2, 5))
            s = nd.cosine_similarity(nd.tensor(v[0]), nd.tensor(v[1])).item()
            if away_from(np.array([abs(s) - p, abs(s) - p - cfg.alpha, s]), margin=1e-4):
                if not L.in_band(abs(s), p, cfg.alpha):
                    break
        return check(lambda a, b: L.loss_coarse(nd.cosine_similarity(a, b), p, cfg.alpha), [v[0], v[1]])
    if name == "loss_fine":
        while True:
            y = np.sort(rng.uniform(1.0, 3.0, 3))[::-1].copy()
            emb = rng.uniform(0, 1, (3, 6))
            s = nd.cosine_matrix(nd.tensor(emb)).value
            P = L.proxy_matrix(y)
            asc = (P[0, 1] - P[0, 2]) - (s[0, 1] - s[0, 2])
            desc = (P[1, 2] - P[0, 2]) - (s[1, 2] - s[0, 2])
            if away_from(np.array([asc, desc]), margin=1e-4) and (asc > 0 or desc > 0):
                break
        return check(lambda e: L.loss_fine((0, 1, 2), L.Batch(nd.param(np.zeros(3)), y, e)), [emb])
    raise KeyError(name)


LOSSES = ("loss_mse", "loss_plc", "loss_src", "loss_total", "loss_coarse", "loss_fine")


def embed_from_cos(cos: np.ndarray) -> np.ndarray:
    """Rows whose pairwise cosines equal ``cos`` (unit diagonal, positive definite)."""
    return np.linalg.cholesky(np.asarray(cos, dtype=np.float64))
