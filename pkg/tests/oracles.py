"""Independent reference implementations the metric tests compare against."""
from __future__ import annotations

import math

import mpmath
import numpy as np


def brute_ranks(x) -> list[float]:
    """Average ranks by counting: 1 + #smaller + (#equal - 1)/2."""
    x = list(map(float, x))
    return [1 + sum(v < xi for v in x) + (sum(v == xi for v in x) - 1) / 2 for xi in x]


def count_ranks(x) -> np.ndarray:
    """Same counting rule as :func:`brute_ranks`, vectorized for long vectors."""
    x = np.asarray(x, dtype=np.float64)
    less = (x[None, :] < x[:, None]).sum(axis=1)
    equal = (x[None, :] == x[:, None]).sum(axis=1)
    return 1.0 + less + (equal - 1) / 2.0


def kendall_pair_scan(x, y) -> tuple[int, int, int]:
    """(concordant - discordant, pairs untied in x, pairs untied in y) by explicit loops."""
    x, y = list(map(float, x)), list(map(float, y))
    s = ux = uy = 0
    for i in range(len(x)):
        for j in range(i + 1, len(x)):
            dx = (x[i] > x[j]) - (x[i] < x[j])
            dy = (y[i] > y[j]) - (y[i] < y[j])
            s += dx * dy
            ux += dx != 0
            uy += dy != 0
    return s, ux, uy


def kendall_scan(x, y) -> float:
    s, ux, uy = kendall_pair_scan(x, y)
    if ux == 0 or uy == 0:
        return 0.0
    return s / math.sqrt(float(ux) * float(uy))


def pearson_mp(x, y, dps: int = 50) -> float:
    with mpmath.workdps(dps):
        xs = [mpmath.mpf(float(v)) for v in x]
        ys = [mpmath.mpf(float(v)) for v in y]
        mx, my = mpmath.fsum(xs) / len(xs), mpmath.fsum(ys) / len(ys)
        cov = mpmath.fsum((a - mx) * (b - my) for a, b in zip(xs, ys))
        vx = mpmath.fsum((a - mx) ** 2 for a in xs)
        vy = mpmath.fsum((b - my) ** 2 for b in ys)
        return float(cov / mpmath.sqrt(vx * vy))


def plc_term_mp(pred, target, dps: int = 50) -> float:
    """1 - r^2 + (mean gap)^2 + (population std gap)^2 in extended precision."""
    with mpmath.workdps(dps):
        p = [mpmath.mpf(float(v)) for v in pred]
        t = [mpmath.mpf(float(v)) for v in target]
        n = len(p)
        mp_, mt = mpmath.fsum(p) / n, mpmath.fsum(t) / n
        cov = mpmath.fsum((a - mp_) * (b - mt) for a, b in zip(p, t))
        vp = mpmath.fsum((a - mp_) ** 2 for a in p)
        vt = mpmath.fsum((b - mt) ** 2 for b in t)
        r = cov / mpmath.sqrt(vp * vt)
        sp, st = mpmath.sqrt(vp / n), mpmath.sqrt(vt / n)
        return float(1 - r**2 + (mp_ - mt) ** 2 + (sp - st) ** 2)
