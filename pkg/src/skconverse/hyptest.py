"""Optimal type-II error of binary hypothesis tests, exactly.

beta_epsilon(P, Q, eps) is the infimum of Q[T] over tests T with
P[T] >= 1 - eps.  The optimum has Neyman-Pearson structure: sort outcomes by
the likelihood ratio P(x)/Q(x) in decreasing order (Q(x)=0 with P(x)>0 first,
ties broken by outcome index), accept greedily until the accepted P-mass is
exactly 1 - eps, including the boundary outcome fractionally.  The returned
certificate reconstructs the achieving randomized threshold test.

The IID variant aggregates outcomes of P^n vs Q^n into type classes, on which
the ratio is constant, so its value is identical to the dense computation but
reaches n = 10^4 for small alphabets.  beta itself can underflow a float64
there, so certificates carry log2(beta) as the primary quantity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import parallel_map
from ._typeclasses import DEFAULT_CLASS_CAP, typeclass_table
from .errors import PreconditionError
from .probcore import LOG2_ZERO, JointDist, _check_same_shape, divergence, log2_pmf

_MASS_SLACK = 1e-15


@dataclass(frozen=True)
class BetaCertificate:
    """Optimal type-II error plus the achieving randomized threshold test.

    Outcomes `order[:n_full]` are accepted with probability 1 and
    `order[n_full]` with probability `gamma`; everything later is rejected.
    For the type-class variant, indices refer to classes and
    `outcome_labels` carries their count vectors.
    """

    beta: float
    log2_beta: float
    eps: float
    order: tuple[int, ...]
    n_full: int
    gamma: float
    type1_error: float
    outcome_labels: tuple | None = None

    @property
    def neg_log2_beta(self) -> float:
        return math.inf if self.log2_beta == -math.inf else -self.log2_beta

    def test_vector(self) -> np.ndarray:
        """T(0|x) over outcomes, in the original outcome order."""
        t = np.zeros(len(self.order))
        idx = np.asarray(self.order)
        t[idx[: self.n_full]] = 1.0
        if self.n_full < len(self.order) and self.gamma > 0:
            t[idx[self.n_full]] = self.gamma
        return t


def _ratio_order(logp: np.ndarray, logq: np.ndarray) -> np.ndarray:
    """Indices sorted by decreasing log-ratio, ties by index (stable)."""
    ratio = logp - logq
    # p == 0 outcomes can never help; force them last regardless of q
    ratio[logp <= LOG2_ZERO] = -np.inf
    return np.lexsort((np.arange(ratio.size), -ratio))


def _greedy_threshold(p_sorted: np.ndarray, target: float):
    """Accept prefix mass exactly `target`; returns (n_full, gamma, covered)."""
    cum = np.cumsum(p_sorted)
    total = float(cum[-1]) if cum.size else 0.0
    target = min(target, total)
    b = int(np.searchsorted(cum, target - _MASS_SLACK, side="left"))
    before = float(cum[b - 1]) if b > 0 else 0.0
    if b >= p_sorted.size or target - before <= _MASS_SLACK:
        return b, 0.0, before
    gamma = min(1.0, (target - before) / float(p_sorted[b]))
    return b, gamma, before + gamma * float(p_sorted[b])


def beta_epsilon(P: JointDist, Q: JointDist, eps: float) -> BetaCertificate:
    """Exact optimum of the type-II error linear program."""
    _check_same_shape(P, Q)
    if not 0.0 <= eps < 1.0:
        raise PreconditionError("eps must lie in [0, 1)")
    p, q = P.pmf, Q.pmf
    order = _ratio_order(log2_pmf(p), log2_pmf(q))
    ps, qs = p[order], q[order]
    b, gamma, covered = _greedy_threshold(ps, 1.0 - eps)
    beta = float(qs[:b].sum())
    if gamma > 0:
        beta += gamma * float(qs[b])
    log2_beta = math.log2(beta) if beta > 0 else -math.inf
    return BetaCertificate(
        beta=beta,
        log2_beta=log2_beta,
        eps=eps,
        order=tuple(int(i) for i in order),
        n_full=b,
        gamma=gamma,
        type1_error=1.0 - covered,
    )


def beta_epsilon_iid(
    P: JointDist,
    Q: JointDist,
    n: int,
    eps: float,
    cap: int = DEFAULT_CLASS_CAP,
) -> BetaCertificate:
    """beta_eps(P^n, Q^n) via type classes; equals the dense value exactly.

    The likelihood ratio depends on an outcome only through its empirical
    counts, so greedy acceptance at class granularity with one fractional
    class realizes the same optimum as outcome granularity.
    """
    _check_same_shape(P, Q)
    if len(P.vars) != 1:
        raise PreconditionError("IID variant expects one shared variable")
    if n < 1:
        raise PreconditionError("n must be >= 1")
    if not 0.0 <= eps < 1.0:
        raise PreconditionError("eps must lie in [0, 1)")
    counts, logp, logq = typeclass_table(P.pmf, Q.pmf, n, cap=cap)
    order = _ratio_order(logp, logq)
    ps = np.exp2(logp[order])
    logq_sorted = logq[order]
    b, gamma, covered = _greedy_threshold(ps, 1.0 - eps)
    with np.errstate(invalid="ignore"):
        q_prefix = np.logaddexp2.accumulate(logq_sorted) if logq_sorted.size else None
    log2_beta = float(q_prefix[b - 1]) if b > 0 else LOG2_ZERO
    if gamma > 0:
        log2_beta = float(np.logaddexp2(log2_beta, math.log2(gamma) + logq_sorted[b]))
    if log2_beta <= LOG2_ZERO / 2:
        log2_beta = -math.inf
    return BetaCertificate(
        beta=float(np.exp2(log2_beta)) if log2_beta > -math.inf else 0.0,
        log2_beta=log2_beta,
        eps=eps,
        order=tuple(int(i) for i in order),
        n_full=b,
        gamma=gamma,
        type1_error=1.0 - covered,
        outcome_labels=tuple(tuple(int(c) for c in counts[i]) for i in order),
    )


@dataclass(frozen=True)
class TailBound:
    """Upper bound on -log2 beta_eps from the log-ratio tail probability."""

    value: float
    gamma: float | None
    feasible: bool


def default_gamma_grid(P: JointDist, Q: JointDist) -> np.ndarray:
    """Distinct finite log-ratio values plus midpoints."""
    p, q = P.pmf, Q.pmf
    mask = (p > 0) & (q > 0)
    vals = np.unique(np.log2(p[mask] / q[mask]))
    if vals.size == 0:
        return np.array([0.0])
    mids = (vals[:-1] + vals[1:]) / 2.0
    return np.unique(np.concatenate([vals, mids]))


def np_tail_bound(P: JointDist, Q: JointDist, eps: float, gammas=None) -> TailBound:
    """min over the grid of gamma - log2(Pr_P[log2 P/Q <= gamma] - eps).

    Sound upper bound on -log2 beta_eps(P, Q) for every grid; grid points
    with a nonpositive argument are skipped.  Returns +inf with a flag when
    the whole grid is infeasible.
    """
    _check_same_shape(P, Q)
    if gammas is None:
        gammas = default_gamma_grid(P, Q)
    gammas = np.atleast_1d(np.asarray(gammas, dtype=np.float64))
    if gammas.size == 0:
        raise PreconditionError("gamma grid must be nonempty")
    p, q = P.pmf, Q.pmf
    ratio = log2_pmf(p) - log2_pmf(q)
    ratio[p == 0] = np.inf  # zero P-mass points never enter the tail
    best, best_gamma = math.inf, None
    for g in gammas:
        tail = float(p[ratio <= g].sum())
        if tail - eps <= 0:
            continue
        val = float(g - math.log2(tail - eps))
        if val < best:
            best, best_gamma = val, float(g)
    return TailBound(value=best, gamma=best_gamma, feasible=best < math.inf)


def renyi_beta_bound(
    P: JointDist, Q: JointDist, eps: float, eps_prime: float, alpha: float
) -> float:
    """Closed-form bound D_alpha + log2(1-eps-eps')/(1-alpha) - log2 eps'."""
    if alpha <= 1.0:
        raise PreconditionError("alpha must exceed 1")
    if eps_prime <= 0.0 or eps + eps_prime >= 1.0:
        raise PreconditionError("need eps' > 0 and eps + eps' < 1")
    d_alpha = divergence(P, Q, kind="renyi", alpha=alpha)
    return (
        d_alpha
        + math.log2(1.0 - eps - eps_prime) / (1.0 - alpha)
        - math.log2(eps_prime)
    )


def stein_scan(
    P: JointDist,
    Q: JointDist,
    eps: float,
    ns,
    cap: int = DEFAULT_CLASS_CAP,
) -> list[tuple[int, float]]:
    """Table of (n, -(1/n) log2 beta_eps(P^n, Q^n)); converges to D(P||Q)."""
    ns = [int(n) for n in ns]

    def one(n: int) -> tuple[int, float]:
        cert = beta_epsilon_iid(P, Q, n, eps, cap=cap)
        return n, cert.neg_log2_beta / n

    return parallel_map(one, ns)


def stein_scan_csv(P: JointDist, Q: JointDist, eps: float, ns, cap: int = DEFAULT_CLASS_CAP) -> str:
    kl = divergence(P, Q, kind="kl")
    lines = ["n,neg_log_beta_over_n,kl_limit"]
    for n, v in stein_scan(P, Q, eps, ns, cap=cap):
        lines.append(f"{n},{v:.12g},{kl:.12g}")
    return "\n".join(lines) + "\n"
