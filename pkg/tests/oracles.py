"""Brute-force reference implementations used as test oracles.

Every function here is written from the textbook definition with plain
Python loops over pairs or cells, sharing no code with the package.
Running this module rewrites ``data/frozen_oracles.json`` from fixed
seeded inputs; the committed file is what the tests compare against.
"""
from __future__ import annotations

import json
import math
import random
from pathlib import Path

FROZEN_PATH = Path(__file__).parent / "data" / "frozen_oracles.json"


def mean(x):
    return math.fsum(x) / len(x)


def pearson(x, y):
    mx, my = mean(x), mean(y)
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def average_ranks(x):
    out = []
    for v in x:
        below = sum(1 for w in x if w < v)
        equal = sum(1 for w in x if w == v)
        out.append(below + (equal + 1) / 2.0)
    return out


def spearman(x, y):
    return pearson(average_ranks(x), average_ranks(y))


def kendall_tau_b(x, y):
    n = len(x)
    conc = disc = tie_x = tie_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx, dy = x[i] - x[j], y[i] - y[j]
            if dx == 0 and dy == 0:
                tie_x += 1
                tie_y += 1
            elif dx == 0:
                tie_x += 1
            elif dy == 0:
                tie_y += 1
            elif (dx > 0) == (dy > 0):
                conc += 1
            else:
                disc += 1
    n0 = n * (n - 1) // 2
    return (conc - disc) / math.sqrt((n0 - tie_x) * (n0 - tie_y))


def cosine(x, y):
    dot = math.fsum(a * b for a, b in zip(x, y))
    return dot / math.sqrt(math.fsum(a * a for a in x) * math.fsum(b * b for b in y))


def bin_of(v, lo, hi, bins):
    """Equal-width cell over [lo, hi], the right edge belonging to the last cell."""
    if hi == lo:
        return bins // 2
    k = int(math.floor((v - lo) / (hi - lo) * bins))
    return min(k, bins - 1)


def joint_cells(x, y, bins):
    lx, hx, ly, hy = min(x), max(x), min(y), max(y)
    p = [[0.0] * bins for _ in range(bins)]
    for a, b in zip(x, y):
        p[bin_of(a, lx, hx, bins)][bin_of(b, ly, hy, bins)] += 1.0
    n = len(x)
    return [[c / n for c in row] for row in p]


def _marginals(p):
    bins = len(p)
    px = [math.fsum(p[i][j] for j in range(bins)) for i in range(bins)]
    py = [math.fsum(p[i][j] for i in range(bins)) for j in range(bins)]
    return px, py


def mutual_information(x, y, bins):
    p = joint_cells(x, y, bins)
    px, py = _marginals(p)
    terms = []
    for i in range(bins):
        for j in range(bins):
            if p[i][j] > 0:
                terms.append(p[i][j] * math.log(p[i][j] / (px[i] * py[j])))
    return math.fsum(terms)


def jaccard(x, y, bins, linear=False):
    p = joint_cells(x, y, bins)
    px, py = _marginals(p)
    lo, hi = [], []
    for i in range(bins):
        for j in range(bins):
            q = (1.0 / bins if i == j else 0.0) if linear else px[i] * py[j]
            lo.append(min(p[i][j], q))
            hi.append(max(p[i][j], q))
    return math.fsum(lo) / math.fsum(hi)


def minmax(x):
    lo, hi = min(x), max(x)
    return [0.5 if hi == lo else (v - lo) / (hi - lo) for v in x]


def univariate(x, bins=20):
    n = len(x)
    m = mean(x)
    sd = math.sqrt(math.fsum((v - m) ** 2 for v in x) / n)
    lo, hi = min(x), max(x)
    counts = [0] * bins
    for v in x:
        counts[bin_of(v, lo, hi, bins)] += 1
    ent = -math.fsum((c / n) * math.log(c / n) for c in counts if c)
    # sup |F_n(u) - u| over the scaled sample, checked at both sides of each jump
    u = sorted(minmax(x))
    ks = 0.0
    for i, v in enumerate(u, start=1):
        ks = max(ks, i / n - v, v - (i - 1) / n)
    s = sorted(x)
    med = s[n // 2] if n % 2 else (s[n // 2 - 1] + s[n // 2]) / 2.0
    sym = 0.0 if sd == 0 else (m - med) / sd
    return [m, sd, max(ent, 0.0), ks, sym]


def kl_standard_normal(mu, log_var):
    return -0.5 * math.fsum(1.0 + lv - m * m - math.exp(lv) for m, lv in zip(mu, log_var))


def bce(x, p):
    return -math.fsum(a * math.log(b) + (1 - a) * math.log(1 - b) for a, b in zip(x, p))


def cross_2d(u, v):
    return u[0] * v[1] - u[1] * v[0]


# --------------------------------------------------------------------------
# seeded input pairs shared by the tests and the frozen file


def random_pair(seed: int):
    """One (x, y) pair, length <= 100, mixing continuous, tied, and dependent draws."""
    r = random.Random(seed)
    n = r.randint(5, 100)
    kind = seed % 4
    x = [r.gauss(0, 1) for _ in range(n)]
    if kind == 0:
        y = [a * r.uniform(-2, 2) + r.gauss(0, 1) for a in x]
    elif kind == 1:
        x = [float(r.randint(0, 4)) for _ in range(n)]
        y = [float(r.randint(0, 3)) for _ in range(n)]
    elif kind == 2:
        y = [math.exp(a) + 0.1 * r.random() for a in x]
    else:
        y = [float(r.random() < 0.5) for _ in range(n)]
    # guarantee variation in both vectors
    x[0], x[1] = -3.0, 3.0
    y[0], y[1] = 0.0, 1.0
    return x, y


def oracle_row(seed: int, bins: int = 6):
    x, y = random_pair(seed)
    return {
        "seed": seed,
        "pearson": pearson(x, y),
        "spearman": spearman(x, y),
        "kendall": kendall_tau_b(x, y),
        "cosine": cosine(minmax(x), minmax(y)),
        "mutual_info": mutual_information(x, y, bins),
        "jaccard": jaccard(x, y, bins),
        "jaccard_linear": jaccard(x, y, bins, linear=True),
        "bins": bins,
    }


def freeze(path: Path = FROZEN_PATH) -> None:
    rows = [oracle_row(s) for s in range(200)]
    stats = [{"seed": s, "values": univariate(random_pair(s)[0])} for s in range(50)]
    path.write_text(json.dumps({"pairs": rows, "univariate": stats}, indent=1) + "\n", encoding="utf-8")


def finite_difference_check(model, loss_fn, analytic, h=1e-4, floor=1e-7):
    """Largest relative gap between ``analytic`` gradients and central differences of ``loss_fn``.

    Uses the five-point central stencil so a step well above float64
    round-off still has O(h^4) truncation error. ``loss_fn(model)`` returns
    the scalar loss at the current parameters; the gap of one entry is
    |a - n| / max(|a|, |n|, floor).
    """
    worst = 0.0
    for key, param in model.params.items():
        flat = param.reshape(-1)
        a = analytic[key].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            vals = []
            for step in (2 * h, h, -h, -2 * h):
                flat[i] = orig + step
                vals.append(loss_fn(model))
            flat[i] = orig
            num = (-vals[0] + 8 * vals[1] - 8 * vals[2] + vals[3]) / (12 * h)
            worst = max(worst, abs(a[i] - num) / max(abs(a[i]), abs(num), floor))
    return worst

if __name__ == "__main__":
    freeze()
