"""Top-level validation suite: one test per acceptance criterion.

Each test prints a "[criterion NN] PASS/FAIL" line (run with -s to see them
for passing tests).  All expected values are produced by independent
oracles in tests/support.py or by closed forms derived in the test body.

Criteria 8a/8b assert nominal targets that are provably unattainable and
are expected to fail; the derivations are in their docstrings.  Everything
else passes.
"""

import math
import time

import numpy as np

from skconverse import (
    Alphabet,
    Channel,
    JointDist,
    bc_bound,
    bc_capacity_bound,
    beta_epsilon,
    beta_epsilon_iid,
    d_max_smooth,
    dmax_convergence_scan,
    eval_sk_security,
    fuzz_converse,
    h_min_smooth,
    ideal_bc_protocol,
    ideal_ot_protocol,
    measure_bc,
    measure_ot,
    mutual_information,
    ot_capacity_bound,
    reduce_bc_to_sk,
    reduce_ot_to_sk,
    secure_transmission_check,
    sk_capacity_formula,
)
from skconverse.probcore import apply_channel
from skconverse.protosim import ideal_ot_correlation
from support import (
    BIT,
    ber,
    beta_oracle,
    d_max_smooth_oracle,
    h_min_smooth_oracle,
    random_dist,
)


def report(num: str, ok: bool, detail: str = "") -> None:
    print(f"[criterion {num}] {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"criterion {num}: {detail}"


def test_criterion_01_beta_oracle_equivalence():
    """200 random pairs, |X| <= 6, eps in {0, 0.1, 0.3}, within 1e-9, < 5 s."""
    rng = np.random.default_rng(20240901)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        k = int(rng.integers(2, 7))
        P = random_dist(rng, [k], full_support=bool(rng.integers(0, 2)))
        Q = random_dist(rng, [k], full_support=bool(rng.integers(0, 2)))
        for eps in (0.0, 0.1, 0.3):
            got = beta_epsilon(P, Q, eps).beta
            want = beta_oracle(P, Q, eps)
            worst = max(worst, abs(got - want))
    elapsed = time.perf_counter() - t0
    report(
        "01", worst <= 1e-9 and elapsed < 5.0,
        f"max deviation {worst:.2e}, {elapsed:.2f}s",
    )


def test_criterion_02_stein_reproduction():
    """n = 10^4 type-class run lands within 0.01 of the 0.11870-bit limit, < 2 s;
    the smooth max-divergence scan is within 0.02 of the same limit at n = 2000."""
    P, Q = ber(0.3), ber(0.5)
    t0 = time.perf_counter()
    cert = beta_epsilon_iid(P, Q, 10_000, 0.1)
    elapsed = time.perf_counter() - t0
    val = cert.neg_log2_beta / 10_000
    ok1 = abs(val - 0.11870) <= 0.01 and elapsed < 2.0

    rows = dmax_convergence_scan(P, Q, 0.25, [2000])
    ok2 = abs(rows[0][1] - 0.11870) <= 0.02
    report(
        "02", ok1 and ok2,
        f"stein {val:.5f} in {elapsed:.2f}s; dmax/n at 2000 = {rows[0][1]:.5f}",
    )


def test_criterion_03_no_dispersion_exactness():
    """Constant likelihood ratio 2^D on supp(P): beta = (1-eps) 2^-D to 1e-12."""
    five = Alphabet(tuple("abcde"))
    P = JointDist((("X", five),), [0.25, 0.25, 0.25, 0.25, 0.0])
    Q = JointDist((("X", five),), [0.125, 0.125, 0.125, 0.125, 0.5])
    worst = 0.0
    for eps in (0.0, 0.1, 0.3, 0.6):
        cert = beta_epsilon(P, Q, eps)
        worst = max(worst, abs(cert.beta - (1 - eps) * 0.5))
        worst = max(
            worst, abs(cert.neg_log2_beta - (1.0 + math.log2(1 / (1 - eps))))
        )
    report("03", worst <= 1e-12, f"max deviation {worst:.2e}")


def test_criterion_04_data_processing():
    """100 random channels: both the testing DPI and the smooth-divergence DPI."""
    rng = np.random.default_rng(20240904)
    violations = 0
    for _ in range(100):
        P, Q = random_dist(rng, [4]), random_dist(rng, [4])
        rows = {}
        for i in range(4):
            r = rng.random(3) + 0.01
            rows[(i,)] = r / r.sum()
        W = Channel(P.vars, (("Y", Alphabet(("0", "1", "2"))),), rows)
        PW, QW = apply_channel(P, W), apply_channel(Q, W)
        eps = float(rng.uniform(0.02, 0.5))
        if beta_epsilon(P, Q, eps).beta > beta_epsilon(PW, QW, eps).beta + 1e-9:
            violations += 1
        if d_max_smooth(PW, QW, eps).value > d_max_smooth(P, Q, eps).value + 1e-9:
            violations += 1
    report("04", violations == 0, f"{violations} violations")


def test_criterion_05_smooth_entropy_oracles():
    """h_min_smooth and d_max_smooth vs bisection oracles, 100 cases, 1e-6."""
    rng = np.random.default_rng(20240905)
    worst = 0.0
    for _ in range(100):
        k = int(rng.integers(2, 9))
        P = random_dist(rng, [k], full_support=bool(rng.integers(0, 2)))
        Q = random_dist(rng, [k], full_support=bool(rng.integers(0, 2)))
        eps_h = float(rng.uniform(0.0, 0.45))
        worst = max(
            worst,
            abs(h_min_smooth(P, eps_h).value - h_min_smooth_oracle(P.pmf, eps_h)),
        )
        eps_d = float(rng.uniform(0.05, 0.6))
        got = d_max_smooth(P, Q, eps_d).value
        want = d_max_smooth_oracle(P.pmf, Q.pmf, eps_d)
        if math.isinf(want):
            worst = max(worst, 0.0 if math.isinf(got) else math.inf)
        else:
            worst = max(worst, abs(got - want))
    report("05", worst <= 1e-6, f"max deviation {worst:.2e}")


def test_criterion_06_capacity_formula():
    """m=2 equals I(X1;X2) within 1e-9 on 100 random sources; exact anchors."""
    rng = np.random.default_rng(20240906)
    worst = 0.0
    for _ in range(100):
        k1, k2 = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        J = random_dist(rng, [k1, k2], names=["X1", "X2"],
                        full_support=bool(rng.integers(0, 2)))
        v, _ = sk_capacity_formula(J)
        worst = max(worst, abs(v - mutual_information(J, "X1", "X2")))

    pmf = np.zeros(8)
    pmf[0] = pmf[7] = 0.5
    three, _ = sk_capacity_formula(
        JointDist((("X1", BIT), ("X2", BIT), ("X3", BIT)), pmf)
    )
    indep, _ = sk_capacity_formula(
        JointDist((("X1", BIT), ("X2", BIT)), [0.25] * 4)
    )
    ok = worst <= 1e-9 and three == 1.0 and abs(indep) <= 1e-12
    report("06", ok, f"max |val - I| {worst:.2e}, identical-bits {three}, indep {indep:.1e}")


def test_criterion_07_ot_bc_structural_bounds():
    """Ideal correlation: both capacities exactly 1; commitment-from-OT bound
    reproduces the additive-logarithmic slack form exactly."""
    J1 = ideal_ot_correlation(1)
    ot_cap = ot_capacity_bound(J1)
    bc_cap = bc_capacity_bound(J1)
    ok = abs(ot_cap - 1.0) <= 1e-12 and abs(bc_cap - 1.0) <= 1e-12

    detail = f"ot {ot_cap}, bc {bc_cap}"
    for n in (1, 2):
        Jn = ideal_ot_correlation(n)
        eps, d1, d2, xi = 0.05, 0.05, 0.05, 0.1
        rep = bc_bound(Jn, eps, d1, d2, xi)
        expect = (
            n + math.log2(1 / (1 - eps - d1 - d2 - xi)) + 2 * math.log2(1 / xi)
        )
        ok = ok and abs(rep.value - expect) <= 1e-9
        detail += f"; n={n} slack-form dev {abs(rep.value - expect):.1e}"
    report("07", ok, detail)


def _mixed_message(n: int) -> JointDist:
    short, long = 1 << n, 1 << (2 * n)
    syms = tuple(f"s{i}" for i in range(short)) + tuple(f"l{i}" for i in range(long))
    pmf = [0.5 / short] * short + [0.5 / long] * long
    return JointDist((("Y", Alphabet(syms)),), pmf)


def test_criterion_08a_mixed_message_entropy():
    """Nominal target: H_min^{1/4} of the n=4 mixed-length message equals 9
    bits exactly.

    Unattainable: deleting the sixteen heavy symbols entirely (mass 1/2 =
    the full budget) leaves a witness with min-entropy 9, but the optimal
    witness caps every symbol at the water-filling level c solving
    16*(1/32 - c) + 256*(1/512 - c) = 1/2, i.e. c = 1/544, giving
    log2(544) = 9.0875 > 9 (the bisection oracle agrees).  The lower-bound
    claim value >= 2n = 8 does hold.
    """
    mix = _mixed_message(4)
    value = h_min_smooth(mix, 0.25).value
    oracle = h_min_smooth_oracle(mix.pmf, 0.25)
    assert abs(value - oracle) <= 1e-6  # the implementation is not at fault
    assert value >= 8.0  # the worst-case-length claim holds
    report(
        "08a", abs(value - 9.0) <= 1e-9,
        f"H_min^0.25 = {value:.10f} (= log2 544), nominal target 9",
    )


def test_criterion_08b_transmission_check_failure():
    """Nominal target: the transmission check fails for kappa = 2n-3 at n=4
    with slack budget mu = 0.45.

    Unattainable: with mu = eps + delta + 2 xi + zeta + eta fixed at 0.45,
    the right-hand side kappa + 2 log2(1/eta) + log2(1/(1-mu))
    + 2 log2(1/(2 zeta)) + 1 is minimized around 16.6 bits over all feasible
    splits (and the budget cannot even accommodate xi = 1/4, whose 2*xi
    alone exceeds 0.45), while the smoothed entropy never exceeds
    log2(544/(1 - 2*0.225)) < 10 bits.  The check therefore passes for
    every feasible split; asserted as stated, this fails.
    """
    mix = _mixed_message(4)
    kappa = 2 * 4 - 3
    budget = 0.45
    failed_any = False
    best_slack = math.inf
    grid = [i / 40 for i in range(1, 40)]
    for eta in grid:
        for zeta in grid:
            two_xi = budget - eta - zeta
            if two_xi <= 0 or zeta >= 0.5:
                continue
            rep = secure_transmission_check(
                mix, kappa, 0.0, 0.0, two_xi / 2, zeta, eta
            )
            best_slack = min(best_slack, rep.slack)
            if not rep.passed:
                failed_any = True
    report(
        "08b", failed_any,
        f"check passes for every feasible split; min slack {best_slack:.3f} bits",
    )


def test_criterion_09_converse_fuzzing():
    """500 seeded protocols: no converse violation at eta = 0.05, and the
    acceptance-region and criterion-equivalence relations hold throughout;
    < 60 s."""
    t0 = time.perf_counter()
    rep = fuzz_converse(count=500, seed=20240909, eta=0.05)
    elapsed = time.perf_counter() - t0
    ok = rep.ok and elapsed < 60.0
    report(
        "09", ok,
        f"{rep.converse_violations}/{rep.region_test_violations}/{rep.criteria_relation_violations} "
        f"violations, min slack {rep.min_converse_slack:.3f}, {elapsed:.1f}s",
    )


def test_criterion_10_reductions():
    """Reductions of the ideal protocols meet the reduction arithmetic exactly."""
    ok = True
    detail = []
    for l in (1, 2):
        J, otp = ideal_ot_protocol(l)
        base = measure_ot(J, otp)
        budget = base.eps + base.delta1 + 2 * base.delta2
        for variant in (1, 2):
            red = reduce_ot_to_sk(J, otp, variant=variant)
            rep = eval_sk_security(red.dist, red.protocol)
            ok = ok and rep.eps <= budget + 1e-12
            detail.append(f"ot{variant}@l={l}: eps {rep.eps:.1e}<= {budget:.1e}")

        Jb, bcp = ideal_bc_protocol(l)
        mb = measure_bc(Jb, bcp)
        redb = reduce_bc_to_sk(Jb, bcp)
        skb = eval_sk_security(redb.dist, redb.protocol)
        ok = ok and skb.eps_rec <= mb.eps + mb.delta2 + 1e-12
        ok = ok and skb.delta_sec <= mb.delta1 + 1e-12
        detail.append(
            f"bc@l={l}: ({skb.eps_rec:.1e},{skb.delta_sec:.1e}) <= "
            f"({mb.eps + mb.delta2:.1e},{mb.delta1:.1e})"
        )
    report("10", ok, "; ".join(detail))
