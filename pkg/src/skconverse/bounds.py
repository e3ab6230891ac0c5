"""Converse bounds and necessary conditions for key agreement primitives.

Every bound is reported together with the intermediate quantities (optimal
type-II error, smooth max-divergence, entropies) so that the stated value can
be recomputed from the report.  Slack parameters are caller-supplied and
validated; ``even_slack_split`` provides the documented default split of the
available budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._parallel import parallel_map
from .errors import PreconditionError
from .hyptest import BetaCertificate, beta_epsilon
from .probcore import (
    Channel,
    JointDist,
    conditional_family,
    conditional_product,
    divergence,
    entropy,
    extend_with_channel,
    factorizes,
    marginal,
    mutual_information,
    pushforward_function,
)
from .smoothinfo import d_max, d_max_smooth, h_min_smooth
from .structure import Labeling, Partition, attach_label, enum_partitions, mcf, mss

_TOL = 1e-12


@dataclass(frozen=True)
class BoundReport:
    """A bound value plus everything needed to recompute it."""

    kind: str
    value: float
    params: dict = field(default_factory=dict)
    partition: Partition | None = None
    intermediates: dict = field(default_factory=dict)

    def as_json(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "params": dict(self.params),
            "partition": str(self.partition) if self.partition else None,
            "intermediates": {
                k: (str(v) if isinstance(v, Partition) else v)
                for k, v in self.intermediates.items()
            },
        }


@dataclass(frozen=True)
class CheckReport:
    """Verdict of a necessary-condition check; failure is data, not error."""

    passed: bool
    lhs: float
    rhs: float
    slack: float
    partition: Partition | None
    per_partition: tuple
    params: dict = field(default_factory=dict)

    def as_json(self) -> dict:
        return {
            "passed": self.passed,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "partition": str(self.partition) if self.partition else None,
            "per_partition": [
                {"partition": str(p), "rhs": r, "slack": s}
                for p, r, s in self.per_partition
            ],
            "params": dict(self.params),
        }


def _z_names(J: JointDist, z) -> list[str]:
    if z is None:
        return [J.eve] if J.eve is not None else []
    if isinstance(z, str):
        return [z]
    return list(z)


def _party_vars(J: JointDist, z_names: Sequence[str]) -> list[str]:
    return [n for n in J.var_names if n not in set(z_names)]


def neg_log2_beta(cert: BetaCertificate) -> float:
    return cert.neg_log2_beta


# ---------------------------------------------------------------------------
# secret key agreement


def cit_bound(
    J: JointDist,
    partition: Partition,
    eps: float,
    eta: float,
    z=None,
    q: JointDist | None = None,
) -> BoundReport:
    """Conditional independence testing bound on the secret key length.

    (1/(|pi|-1)) * [ -log2 beta_{eps+eta}(P, Q^pi) + |pi| log2(1/eta) ],
    where Q^pi conditionally factorizes across the partition given Z.  The
    default Q^pi is the conditional product induced by P itself; a supplied
    Q is validated against the factorization test.
    """
    if not 0.0 <= eps < 1.0:
        raise PreconditionError("eps must lie in [0, 1)")
    if not 0.0 < eta < 1.0 - eps:
        raise PreconditionError("need 0 < eta < 1 - eps")
    zs = _z_names(J, z)
    parties = _party_vars(J, zs)
    if partition.m != len(parties):
        raise PreconditionError(
            f"partition is over {partition.m} parties but J has {len(parties)}"
        )
    if q is None:
        q = conditional_product(J, partition, zs if zs else None)
    else:
        if q.vars != J.vars:
            raise PreconditionError("supplied Q has a different variable structure")
        if not factorizes(q, partition, zs if zs else None):
            raise PreconditionError(
                "supplied Q fails the conditional factorization test"
            )
    cert = beta_epsilon(J, q, eps + eta)
    l = partition.num_blocks
    value = (cert.neg_log2_beta + l * math.log2(1.0 / eta)) / (l - 1)
    return BoundReport(
        kind="cit",
        value=value,
        params={"eps": eps, "eta": eta, "z": zs},
        partition=partition,
        intermediates={
            "neg_log2_beta": cert.neg_log2_beta,
            "beta": cert.beta,
            "eps_plus_eta": eps + eta,
            "num_blocks": l,
        },
    )


def cit_bound_best(J: JointDist, eps: float, eta: float, z=None) -> BoundReport:
    """Minimum of the testing bound over all partitions (default Q each)."""
    zs = _z_names(J, z)
    m = len(_party_vars(J, zs))
    if m > 12:
        raise PreconditionError("party count must be at most 12")
    parts = enum_partitions(m)
    reports = parallel_map(lambda p: cit_bound(J, p, eps, eta, z=zs), parts)
    best = min(range(len(reports)), key=lambda i: (reports[i].value, i))
    return reports[best]


def sk_capacity_formula(J: JointDist) -> tuple[float, Partition]:
    """min over partitions of D(P || product of block marginals)/(|pi|-1).

    Valid when the eavesdropper has no side information (no eve variable).
    """
    if J.eve is not None:
        raise PreconditionError(
            "capacity formula requires constant eavesdropper side information"
        )
    m = len(J.vars)
    best_val, best_pi = math.inf, None
    for pi in enum_partitions(m):
        q = conditional_product(J, pi, None)
        val = divergence(J, q, kind="kl") / (pi.num_blocks - 1)
        if val < best_val - _TOL:
            best_val, best_pi = val, pi
    return best_val, best_pi


def aux_singleshot_bound(
    J: JointDist,
    u_channel: Channel,
    eps: float,
    delta: float,
    eta: float,
    eta1: float,
    eta2: float,
    z=None,
) -> BoundReport:
    """Single-shot key-length bound with a user-supplied auxiliary channel.

    -log2 beta_{eps+2delta+eta}(P_{X1 X2 Z U}, P_{X1|ZU} P_{X2 Z U})
      + D_max^{eta1}(P_{X1 X2 Z U} || P_{X1 X2 Z} P_{U|Z})
      + 4 log2(1/(eta - eta1 - eta2)) + 1,
    with U generated by composing the channel onto J.  The output is an
    upper bound for the given auxiliary channel; no optimization over U.
    """
    if eps < 0 or delta < 0 or eps + 2 * delta >= 1:
        raise PreconditionError("need eps, delta >= 0 with eps + 2*delta < 1")
    if not (0 <= eta1 and 0 <= eta2 and eta1 + eta2 < eta < 1 - eps - 2 * delta):
        raise PreconditionError("need 0 <= eta1 + eta2 < eta < 1 - eps - 2*delta")
    zs = _z_names(J, z)
    parties = _party_vars(J, zs)
    if len(parties) != 2:
        raise PreconditionError("this bound is for two parties")
    J2 = extend_with_channel(J, u_channel)
    u_names = [n for n, _ in u_channel.out_vars]
    cond_vars = zs + u_names
    pi2 = Partition((frozenset([1]), frozenset([2])), 2)
    q_beta = conditional_product(J2, pi2, cond_vars)
    cert = beta_epsilon(J2, q_beta, eps + 2 * delta + eta)
    base = marginal(J2, parties + zs)
    u_given_z = conditional_family(J2, u_names, zs)
    q_dmax = extend_with_channel(base, u_given_z)
    if eta1 > 0:
        dterm = d_max_smooth(J2, q_dmax, eta1).value
    else:
        dterm = d_max(J2, q_dmax)
    tail = 4 * math.log2(1.0 / (eta - eta1 - eta2)) + 1.0
    value = cert.neg_log2_beta + dterm + tail
    return BoundReport(
        kind="aux_singleshot",
        value=value,
        params={
            "eps": eps,
            "delta": delta,
            "eta": eta,
            "eta1": eta1,
            "eta2": eta2,
            "z": zs,
            "u": u_names,
        },
        intermediates={
            "neg_log2_beta": cert.neg_log2_beta,
            "dmax_term": dterm,
            "tail_term": tail,
        },
    )


def aux_capacity_bound(J: JointDist, u_channel: Channel, z=None) -> float:
    """I(X1; X2 | U) + I(X1, X2; U | Z) in bits for the given channel."""
    zs = _z_names(J, z)
    parties = _party_vars(J, zs)
    if len(parties) != 2:
        raise PreconditionError("this bound is for two parties")
    J2 = extend_with_channel(J, u_channel)
    u_names = [n for n, _ in u_channel.out_vars]
    first = mutual_information(J2, [parties[0]], [parties[1]], given=u_names)
    second = mutual_information(J2, parties, u_names, given=zs if zs else None)
    return first + second


# ---------------------------------------------------------------------------
# oblivious transfer and bit commitment


def _two_party_names(J: JointDist) -> tuple[str, str]:
    if len(J.vars) != 2:
        raise PreconditionError("expected a bivariate distribution (X1, X2)")
    return J.var_names[0], J.var_names[1]


def duplicated_statistic_joint(J: JointDist, lab: Labeling) -> tuple[JointDist, JointDist]:
    """The pair (P_{V V X2}, P_{V|X2} P_{V|X2} P_{X2}) for a statistic of X1.

    The first places identical copies of the statistic on two coordinates;
    the second draws the two copies independently given X2.
    """
    x1, x2 = _two_party_names(J)
    JV = attach_label(J, lab, "_V")
    pv_x2 = marginal(JV, ["_V", x2])
    arr = np.transpose(pv_x2.array(), (pv_x2.axis("_V"), pv_x2.axis(x2)))
    k, n2 = arr.shape
    px2 = arr.sum(axis=0)
    rows = np.zeros_like(arr)
    pos = px2 > 0
    rows[:, pos] = arr[:, pos] / px2[pos]

    p_dup = np.zeros((k, k, n2))
    for v in range(k):
        p_dup[v, v, :] = arr[v, :]
    q_dup = rows[:, None, :] * rows[None, :, :] * px2[None, None, :]

    v_alpha = lab.label_alphabet()
    vars3 = (
        ("V1", v_alpha),
        ("V1b", v_alpha),
        (x2, J.alphabet(x2)),
    )
    return (
        JointDist(vars3, p_dup.reshape(-1)),
        JointDist(vars3, q_dup.reshape(-1)),
    )


def ot_bounds(
    J: JointDist, eps: float, delta1: float, delta2: float, xi: float
) -> BoundReport:
    """Both single-shot bounds on oblivious transfer length, and their min.

    bound1 tests P_{X1 X2 V0} against P_{X1|V0} P_{X2|V0} P_{V0} with V0 the
    maximum common function; bound2 tests the duplicated minimum sufficient
    statistic joint.  Both use type-I budget eta = eps + delta1 + 2*delta2 + xi.
    """
    if xi <= 0:
        raise PreconditionError("xi must be positive")
    if min(eps, delta1, delta2) < 0:
        raise PreconditionError("error parameters must be nonnegative")
    eta = eps + delta1 + 2 * delta2 + xi
    if eta >= 1:
        raise PreconditionError("need eps + delta1 + 2*delta2 + xi < 1")
    x1, x2 = _two_party_names(J)
    two_log_xi = 2 * math.log2(1.0 / xi)

    lab0, _ = mcf(J, x1, x2)
    JV0 = attach_label(J, lab0, "V0")
    pi2 = Partition((frozenset([1]), frozenset([2])), 2)
    q1 = conditional_product(JV0, pi2, "V0")
    cert1 = beta_epsilon(JV0, q1, eta)
    bound1 = cert1.neg_log2_beta + two_log_xi

    lab1 = mss(J, given=x1, target=x2)
    p_dup, q_dup = duplicated_statistic_joint(J, lab1)
    cert2 = beta_epsilon(p_dup, q_dup, eta)
    bound2 = cert2.neg_log2_beta + two_log_xi

    return BoundReport(
        kind="ot",
        value=min(bound1, bound2),
        params={"eps": eps, "delta1": delta1, "delta2": delta2, "xi": xi, "eta": eta},
        intermediates={
            "bound1": bound1,
            "bound2": bound2,
            "neg_log2_beta_1": cert1.neg_log2_beta,
            "neg_log2_beta_2": cert2.neg_log2_beta,
            "mcf_labels": lab0.num_labels,
            "mss_labels": lab1.num_labels,
        },
    )


def ot_capacity_bound(J: JointDist) -> float:
    """min{ I(X1; X2 | V0), H(V1 | X2) } in bits."""
    x1, x2 = _two_party_names(J)
    lab0, _ = mcf(J, x1, x2)
    JV0 = attach_label(J, lab0, "V0")
    first = mutual_information(JV0, [x1], [x2], given=["V0"])
    return min(first, bc_capacity_bound(J))


def bc_bound(
    J: JointDist, eps: float, delta1: float, delta2: float, xi: float
) -> BoundReport:
    """Single-shot bound on bit commitment length.

    Tests the duplicated minimum-sufficient-statistic joint at type-I budget
    eta = eps + delta1 + delta2 + xi.
    """
    if xi <= 0:
        raise PreconditionError("xi must be positive")
    if min(eps, delta1, delta2) < 0:
        raise PreconditionError("error parameters must be nonnegative")
    if eps + delta1 + delta2 >= 1:
        raise PreconditionError("need eps + delta1 + delta2 < 1")
    eta = eps + delta1 + delta2 + xi
    if eta >= 1:
        raise PreconditionError("need eps + delta1 + delta2 + xi < 1")
    x1, x2 = _two_party_names(J)
    lab1 = mss(J, given=x1, target=x2)
    p_dup, q_dup = duplicated_statistic_joint(J, lab1)
    cert = beta_epsilon(p_dup, q_dup, eta)
    value = cert.neg_log2_beta + 2 * math.log2(1.0 / xi)
    return BoundReport(
        kind="bc",
        value=value,
        params={"eps": eps, "delta1": delta1, "delta2": delta2, "xi": xi, "eta": eta},
        intermediates={
            "neg_log2_beta": cert.neg_log2_beta,
            "mss_labels": lab1.num_labels,
        },
    )


def bc_capacity_bound(J: JointDist) -> float:
    """H(V1 | X2) in bits, V1 the minimum sufficient statistic of X1 for X2."""
    x1, x2 = _two_party_names(J)
    lab1 = mss(J, given=x1, target=x2)
    JV1 = attach_label(J, lab1, "V1")
    return entropy(JV1, ["V1", x2]) - entropy(JV1, [x2])


# ---------------------------------------------------------------------------
# secure computing by trusted parties


def sc_necessary_check(
    J: JointDist,
    g,
    eps: float,
    delta: float,
    xi: float,
    zeta: float,
    eta: float,
    partition: Partition | None = None,
) -> CheckReport:
    """Necessary condition for (eps, delta)-secure computability of g.

    Compares H_min^xi of the function's law against, per partition,
    (1/(|pi|-1)) [ -log2 beta_mu(P, Q^pi) + |pi| log2(1/eta) ]
      + 2 log2(1/(2 zeta)) + 1,       mu = eps + delta + 2 xi + zeta + eta.
    A violation for any partition certifies that g is not securely
    computable; check failure is a verdict, not an error.
    """
    if min(xi, zeta, eta) <= 0:
        raise PreconditionError("xi, zeta, eta must be positive")
    if min(eps, delta) < 0:
        raise PreconditionError("eps and delta must be nonnegative")
    mu = eps + delta + 2 * xi + zeta + eta
    if mu >= 1:
        raise PreconditionError("need eps + delta + 2*xi + zeta + eta < 1")
    if J.eve is not None:
        raise PreconditionError("secure computing check expects no eve variable")
    p_g = pushforward_function(J, g)
    lhs = h_min_smooth(p_g, xi).value
    parts = [partition] if partition is not None else enum_partitions(len(J.vars))
    rows = []
    for pi in parts:
        qpi = conditional_product(J, pi, None)
        cert = beta_epsilon(J, qpi, mu)
        l = pi.num_blocks
        rhs = (cert.neg_log2_beta + l * math.log2(1.0 / eta)) / (l - 1)
        rhs += 2 * math.log2(1.0 / (2 * zeta)) + 1.0
        rows.append((pi, rhs, rhs - lhs))
    worst = min(range(len(rows)), key=lambda i: rows[i][2])
    pi_w, rhs_w, slack_w = rows[worst]
    return CheckReport(
        passed=slack_w >= -_TOL,
        lhs=lhs,
        rhs=rhs_w,
        slack=slack_w,
        partition=pi_w,
        per_partition=tuple(rows),
        params={
            "eps": eps, "delta": delta, "xi": xi, "zeta": zeta, "eta": eta, "mu": mu,
        },
    )


def secure_transmission_check(
    P_M: JointDist,
    kappa: float,
    eps: float,
    delta: float,
    xi: float,
    zeta: float,
    eta: float,
) -> CheckReport:
    """Necessary condition for (eps, delta)-secure transmission of M.

    Checks H_min^xi(P_M) <= kappa + 2 log2(1/eta) + log2(1/(1-mu))
                              + 2 log2(1/(2 zeta)) + 1.
    """
    if min(xi, zeta, eta) <= 0:
        raise PreconditionError("xi, zeta, eta must be positive")
    if min(eps, delta) < 0:
        raise PreconditionError("eps and delta must be nonnegative")
    if kappa < 0:
        raise PreconditionError("kappa must be nonnegative")
    mu = eps + delta + 2 * xi + zeta + eta
    if mu >= 1:
        raise PreconditionError("need eps + delta + 2*xi + zeta + eta < 1")
    lhs = h_min_smooth(P_M, xi).value
    rhs = (
        kappa
        + 2 * math.log2(1.0 / eta)
        + math.log2(1.0 / (1.0 - mu))
        + 2 * math.log2(1.0 / (2 * zeta))
        + 1.0
    )
    return CheckReport(
        passed=lhs <= rhs + _TOL,
        lhs=lhs,
        rhs=rhs,
        slack=rhs - lhs,
        partition=None,
        per_partition=(),
        params={
            "kappa": kappa, "eps": eps, "delta": delta,
            "xi": xi, "zeta": zeta, "eta": eta, "mu": mu,
        },
    )


def even_slack_split(eps: float, delta: float, fraction: float = 0.9) -> dict:
    """Default slack assignment: split a fraction of 1 - eps - delta evenly
    across the three remaining budget consumers (2*xi, zeta, eta)."""
    budget = 1.0 - eps - delta
    if budget <= 0:
        raise PreconditionError("eps + delta must be below 1")
    share = fraction * budget / 3.0
    return {"xi": share / 2.0, "zeta": share, "eta": share}
