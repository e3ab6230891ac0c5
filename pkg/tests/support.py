"""Shared builders and independent oracles for the test suite.

Oracles here deliberately avoid the implementation's algorithms: the beta
oracle enumerates candidate tests as subset-plus-one-fractional-point
vertices of the linear program, and the smoothing oracles bisect the
monotone feasibility functions.  Expected values asserted in the tests are
computed by these oracles, not copied from the code under test.
"""

from __future__ import annotations

import math

import numpy as np

from skconverse import Alphabet, JointDist

BIT = Alphabet(("0", "1"))


def ber(p: float, name: str = "X") -> JointDist:
    """Binary distribution with mass p on symbol '0'."""
    return JointDist(((name, BIT),), [p, 1.0 - p])


def dsbs(p: float, names=("X1", "X2")) -> JointDist:
    """Uniform bit plus an independent binary symmetric noise copy."""
    a, b = names
    pmf = [0.5 * (1 - p), 0.5 * p, 0.5 * p, 0.5 * (1 - p)]
    return JointDist(((a, BIT), (b, BIT)), pmf)


def uniform_bits(k: int, name: str = "X") -> JointDist:
    symbols = tuple(format(v, f"0{k}b") for v in range(1 << k))
    return JointDist(((name, Alphabet(symbols)),), [1.0 / (1 << k)] * (1 << k))


def random_dist(rng, sizes, names=None, full_support=True, eve=None) -> JointDist:
    names = names or [f"X{i+1}" for i in range(len(sizes))]
    cells = int(np.prod(sizes))
    pmf = rng.random(cells) + (0.02 if full_support else 0.0)
    if not full_support:
        pmf[rng.random(cells) < 0.25] = 0.0
        if pmf.sum() == 0:
            pmf[0] = 1.0
    pmf /= pmf.sum()
    vars = tuple(
        (n, Alphabet(tuple(str(s) for s in range(k)))) for n, k in zip(names, sizes)
    )
    return JointDist(vars, pmf, eve=eve)


def random_channel_rows(rng, n_in: int, n_out: int) -> dict:
    rows = {}
    for i in range(n_in):
        r = rng.random(n_out) + 0.01
        rows[(i,)] = r / r.sum()
    return rows


def binary_entropy(p: float) -> float:
    if p <= 0 or p >= 1:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


# ---------------------------------------------------------------------------
# beta oracle: enumerate subset-plus-one-fractional-point candidate tests


def beta_oracle(P: JointDist, Q: JointDist, eps: float) -> float:
    """LP-vertex enumeration: minimal Q-mass over all tests that include a
    subset fully plus at most one outcome fractionally, at P-mass 1-eps."""
    p, q = P.pmf, Q.pmf
    n = p.size
    target = 1.0 - eps
    best = math.inf
    for bits in range(1 << n):
        sel = [(bits >> i) & 1 for i in range(n)]
        pmass = sum(p[i] for i in range(n) if sel[i])
        qmass = sum(q[i] for i in range(n) if sel[i])
        if pmass >= target - 1e-12:
            best = min(best, qmass)
            continue
        for j in range(n):
            if sel[j] or p[j] == 0:
                continue
            if pmass + p[j] >= target - 1e-12:
                frac = (target - pmass) / p[j]
                best = min(best, qmass + frac * q[j])
    return best


# ---------------------------------------------------------------------------
# smoothing oracles: bisection on the monotone feasibility functions


def h_min_smooth_oracle(pmf: np.ndarray, eps: float, iters: int = 200) -> float:
    """Bisect the cap c with sum max(p - c, 0) = 2*eps; value is -log2 c."""
    budget = 2.0 * eps
    lo, hi = 0.0, float(pmf.max())
    if budget <= 0:
        return -math.log2(hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        removed = float(np.maximum(pmf - mid, 0.0).sum())
        if removed > budget:
            lo = mid
        else:
            hi = mid
    return -math.log2(0.5 * (lo + hi))


def d_max_smooth_oracle(p: np.ndarray, q: np.ndarray, eps: float, iters: int = 200) -> float:
    """Bisect the least lam with sum min(p, q*2^lam) >= 1 - eps."""
    target = float(p.sum()) - eps
    if float(p[q > 0].sum()) < target - 1e-12:
        return math.inf
    lo, hi = -60.0, 60.0
    mask = q > 0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        cover = float(np.minimum(p[mask], q[mask] * 2.0**mid).sum())
        if cover >= target:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def h_min_cond_grid_oracle(P: JointDist, x_vars, y_vars, steps: int = 20000) -> float:
    """Maximize min_{x, y in supp Q} log2 Q(y)/P(x,y) over a dense Q_Y grid.

    Only for |Y| = 2: Q = (t, 1-t) on a uniform grid.
    """
    x_vars = [x_vars] if isinstance(x_vars, str) else list(x_vars)
    y_vars = [y_vars] if isinstance(y_vars, str) else list(y_vars)
    arr = np.transpose(
        P.array(), [P.axis(n) for n in x_vars] + [P.axis(n) for n in y_vars]
    )
    flat = arr.reshape(-1, arr.shape[-1])
    assert flat.shape[1] == 2, "grid oracle supports binary Y only"
    best = -math.inf
    col_max = flat.max(axis=0)
    for k in range(1, steps):
        t = k / steps
        qy = np.array([t, 1 - t])
        with np.errstate(divide="ignore"):
            vals = np.log2(qy) - np.log2(col_max)
        best = max(best, float(vals.min()))
    return best


# ---------------------------------------------------------------------------
# brute-force marginals / conditionals


def marginal_oracle(J: JointDist, keep) -> np.ndarray:
    """Direct summation over symbol tuples, no axis tricks."""
    keep = [keep] if isinstance(keep, str) else list(keep)
    keep_pos = [J.var_names.index(n) for n in keep]
    shape = tuple(len(J.alphabet(n)) for n in keep)
    out = np.zeros(shape)
    for flat, w in enumerate(J.pmf):
        idx = np.unravel_index(flat, J.shape)
        out[tuple(idx[i] for i in keep_pos)] += w
    return out.reshape(-1)
