"""Exact evaluation of explicit small-alphabet interactive protocols.

Protocols are finite objects: per-round, per-party message maps plus key
maps, over named observation variables, optional local randomness, and
optional eavesdropper variables.  The joint law of (keys, transcript,
eavesdropper view) is computed by exact enumeration of the product state
space (capped at 10^7 points), so every security parameter reported here is
exact, not sampled.  Maps may be dict tables keyed by
(observation, randomness, transcript) or plain callables; values may be a
symbol or a {symbol: probability} dict for stochastic behaviour.

All randomness is seeded; identical seeds give identical reports.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .bounds import cit_bound, cit_bound_best
from .errors import CapExceededError, PreconditionError
from .probcore import (
    Alphabet,
    JointDist,
    conditional_product,
    factorizes,
    fuse_vars,
    marginal,
)
from .smoothinfo import h_min_cond, h_min_smooth
from .structure import Partition, attach_label, enum_partitions, mcf, mss

STATE_CAP = 10_000_000
_TOL = 1e-12

MapLike = Callable | Mapping


@dataclass(frozen=True)
class LocalRand:
    """Distribution of one party's locally generated randomness."""

    symbols: tuple[str, ...]
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "symbols", tuple(str(s) for s in self.symbols))
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if len(probs) != len(self.symbols):
            raise PreconditionError("randomness symbols and probs differ in length")
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise PreconditionError("randomness probabilities must form a pmf")

    @classmethod
    def uniform(cls, symbols: Sequence[str]) -> "LocalRand":
        n = len(symbols)
        return cls(tuple(symbols), tuple(1.0 / n for _ in range(n)))


@dataclass(frozen=True)
class Protocol:
    """Explicit interactive protocol: schedule, message maps, key maps.

    The round schedule is F_11..F_m1, ..., F_1r..F_mr (party order inside
    every round).  A missing message map means the party stays silent that
    round (constant '-').  Key maps take (observation, randomness, full
    transcript) and must return values in ``key_symbols``.
    """

    num_parties: int
    obs_vars: tuple[tuple[str, ...], ...]
    rounds: int
    message_maps: Mapping[tuple[int, int], MapLike]
    key_maps: tuple[MapLike, ...]
    key_symbols: tuple[str, ...]
    eve_vars: tuple[str, ...] = ()
    randomness: tuple[LocalRand | None, ...] = ()

    def __post_init__(self) -> None:
        if self.num_parties < 1:
            raise PreconditionError("need at least one party")
        if len(self.obs_vars) != self.num_parties:
            raise PreconditionError("one observation tuple per party required")
        if len(self.key_maps) != self.num_parties:
            raise PreconditionError("one key map per party required")
        if self.rounds < 0:
            raise PreconditionError("rounds must be nonnegative")
        if not self.key_symbols:
            raise PreconditionError("key alphabet must be nonempty")
        rnd = self.randomness or tuple([None] * self.num_parties)
        if len(rnd) != self.num_parties:
            raise PreconditionError("one randomness entry per party required")
        object.__setattr__(self, "randomness", tuple(rnd))
        object.__setattr__(
            self, "obs_vars", tuple(tuple(v) for v in self.obs_vars)
        )
        object.__setattr__(self, "eve_vars", tuple(self.eve_vars))
        object.__setattr__(self, "key_symbols", tuple(self.key_symbols))
        for (j, i) in self.message_maps:
            if not (1 <= j <= self.rounds and 1 <= i <= self.num_parties):
                raise PreconditionError(
                    f"message map ({j},{i}) outside the round schedule"
                )

    @property
    def key_len_bits(self) -> float:
        return math.log2(len(self.key_symbols))

    def schedule(self) -> list[tuple[int, int]]:
        return [
            (j, i)
            for j in range(1, self.rounds + 1)
            for i in range(1, self.num_parties + 1)
        ]


def _map_value(m: MapLike, obs, rand, transcript):
    if callable(m):
        return m(obs, rand, transcript)
    try:
        return m[(obs, rand, transcript)]
    except KeyError:
        raise PreconditionError(
            f"map table is not total: missing entry for obs={obs} rand={rand} "
            f"transcript={transcript}"
        ) from None


def _branches(value) -> list[tuple[str, float]]:
    if isinstance(value, str):
        return [(value, 1.0)]
    items = sorted((str(k), float(p)) for k, p in value.items())
    total = sum(p for _, p in items)
    if abs(total - 1.0) > 1e-9 or any(p < 0 for _, p in items):
        raise PreconditionError("stochastic map values must form a pmf")
    return [(s, p) for s, p in items if p > 0]


def _rand_space(p: Protocol) -> list[tuple[tuple, float]]:
    space = [((), 1.0)]
    for r in p.randomness:
        syms = [(None, 1.0)] if r is None else list(zip(r.symbols, r.probs))
        space = [
            (combo + (s,), w * pw) for combo, w in space for s, pw in syms if pw > 0
        ]
    return space


def protocol_law(
    J: JointDist,
    p: Protocol,
    with_outcomes: bool = False,
    cap: int = STATE_CAP,
) -> dict:
    """Exact joint law keyed (keys, transcript, eve_view[, outcome]).

    ``outcome`` is the full symbol tuple of J, included on request for
    factorization checks.  Raises when the enumeration would exceed ``cap``.
    """
    positions = {n: i for i, n in enumerate(J.var_names)}
    for group in p.obs_vars:
        for n in group:
            if n not in positions:
                raise PreconditionError(f"protocol observes unknown variable {n!r}")
    for n in p.eve_vars:
        if n not in positions:
            raise PreconditionError(f"unknown eavesdropper variable {n!r}")
    rand_space = _rand_space(p)
    support = int(np.count_nonzero(J.pmf))
    if support * len(rand_space) > cap:
        raise CapExceededError(
            f"{support} outcomes x {len(rand_space)} randomness points "
            f"exceed the cap {cap}"
        )
    obs_pos = [tuple(positions[n] for n in group) for group in p.obs_vars]
    eve_pos = tuple(positions[n] for n in p.eve_vars)
    sched = p.schedule()
    law: dict = defaultdict(float)
    key_set = set(p.key_symbols)

    symbols_cache = list(J.outcomes())
    for flat_idx, prob in enumerate(J.pmf):
        if prob == 0.0:
            continue
        syms = symbols_cache[flat_idx]
        obs = tuple(tuple(syms[k] for k in pos) for pos in obs_pos)
        z = tuple(syms[k] for k in eve_pos)
        for rand, rw in rand_space:
            stack = [((), prob * rw, 0)]
            while stack:
                transcript, w, pos = stack.pop()
                if pos < len(sched):
                    j, i = sched[pos]
                    m = p.message_maps.get((j, i))
                    if m is None:
                        stack.append((transcript + ("-",), w, pos + 1))
                        continue
                    val = _map_value(m, obs[i - 1], rand[i - 1], transcript)
                    for sym, pw in _branches(val):
                        stack.append((transcript + (sym,), w * pw, pos + 1))
                    continue
                # transcript complete: evaluate keys, branching if stochastic
                key_stack = [((), w)]
                for i in range(p.num_parties):
                    val = _map_value(p.key_maps[i], obs[i], rand[i], transcript)
                    nxt = []
                    for keys, kw in key_stack:
                        for sym, pw in _branches(val):
                            if sym not in key_set:
                                raise PreconditionError(
                                    f"key map returned {sym!r} outside the key alphabet"
                                )
                            nxt.append((keys + (sym,), kw * pw))
                    key_stack = nxt
                for keys, kw in key_stack:
                    if with_outcomes:
                        law[(keys, transcript, z, syms)] += kw
                    else:
                        law[(keys, transcript, z)] += kw
    return dict(law)


@dataclass(frozen=True)
class SecurityReport:
    """Exact secret-key security figures of one protocol run.

    ``eps`` is the distance of (K_M, F, Z) from an ideal uniform agreed key
    times the real (F, Z) marginal; ``eps_rec`` and ``delta_sec`` are the
    split recoverability/secrecy figures for the same run.
    """

    eps: float
    eps_rec: float
    delta_sec: float
    key_len_bits: float
    num_key_values: int

    def as_json(self) -> dict:
        return {
            "eps": self.eps,
            "eps_rec": self.eps_rec,
            "delta_sec": self.delta_sec,
            "key_len_bits": self.key_len_bits,
            "num_key_values": self.num_key_values,
        }


def eval_sk_security(J: JointDist, p: Protocol, cap: int = STATE_CAP) -> SecurityReport:
    """Measure a protocol's exact secret-key parameters on J."""
    law = protocol_law(J, p, cap=cap)
    nk = len(p.key_symbols)
    pfz: dict = defaultdict(float)
    agree = 0.0
    for (keys, f, z), w in law.items():
        pfz[(f, z)] += w
        if all(k == keys[0] for k in keys):
            agree += w

    # combined criterion: distance to uniform agreed keys x real (F, Z)
    total = 0.0
    seen = set()
    for (keys, f, z), w in law.items():
        if all(k == keys[0] for k in keys):
            total += abs(w - pfz[(f, z)] / nk)
            seen.add((keys[0], f, z))
        else:
            total += w
    for (f, z), m in pfz.items():
        for k in p.key_symbols:
            if (k, f, z) not in seen:
                total += m / nk
    eps = 0.5 * total

    # split criteria on the first party's key
    law1: dict = defaultdict(float)
    for (keys, f, z), w in law.items():
        law1[(keys[0], f, z)] += w
    total1 = 0.0
    for (k, f, z), w in law1.items():
        total1 += abs(w - pfz[(f, z)] / nk)
    for (f, z), m in pfz.items():
        for k in p.key_symbols:
            if (k, f, z) not in law1:
                total1 += m / nk
    delta_sec = 0.5 * total1

    return SecurityReport(
        eps=float(eps),
        eps_rec=float(1.0 - agree),
        delta_sec=float(delta_sec),
        key_len_bits=p.key_len_bits,
        num_key_values=nk,
    )


def _party_var_blocks(J: JointDist, p: Protocol) -> list[list[str]]:
    """Per party, the observed variables that are not eavesdropper variables.

    These blocks must partition J's non-eve variables: every secret variable
    belongs to exactly one party.
    """
    eve = set(p.eve_vars)
    blocks = [[n for n in group if n not in eve] for group in p.obs_vars]
    flat = [n for b in blocks for n in b]
    nonz = [n for n in J.var_names if n not in eve]
    if sorted(flat) != sorted(nonz):
        raise PreconditionError(
            "party observations must partition the non-eavesdropper variables"
        )
    return blocks


def _q_pi(J: JointDist, p: Protocol, partition: Partition) -> JointDist:
    """Conditional product across party blocks given the eve variables."""
    blocks = _party_var_blocks(J, p)
    nonz = [n for n in J.var_names if n not in set(p.eve_vars)]
    index_of = {n: i + 1 for i, n in enumerate(nonz)}
    var_blocks = [
        frozenset(index_of[n] for i in b for n in blocks[i - 1])
        for b in partition.blocks
    ]
    return conditional_product(
        J, var_blocks, list(p.eve_vars) if p.eve_vars else None
    )


@dataclass(frozen=True)
class ConverseReport:
    eps: float
    key_len_bits: float
    bound: float
    slack: float
    partition: Partition | None
    trivial: bool

    @property
    def ok(self) -> bool:
        return self.key_len_bits <= self.bound + 1e-9

    def as_json(self) -> dict:
        return {
            "eps": self.eps,
            "key_len_bits": self.key_len_bits,
            "bound": self.bound,
            "slack": self.slack,
            "partition": str(self.partition) if self.partition else None,
            "trivial": self.trivial,
            "ok": self.ok,
        }


def sk_instance_dist(J: JointDist, p: Protocol) -> JointDist:
    """J reduced to one fused variable per party plus a fused eve variable."""
    blocks = _party_var_blocks(J, p)
    keep = [n for b in blocks for n in b] + list(p.eve_vars)
    sub = marginal(J, keep)
    groups = [b for b in blocks]
    names = [f"P{i+1}" for i in range(len(blocks))]
    if p.eve_vars:
        groups = groups + [list(p.eve_vars)]
        names = names + ["Z"]
    fused = fuse_vars(sub, groups, names)
    if p.eve_vars:
        fused = JointDist(fused.vars, fused.pmf, eve="Z")
    return fused


def check_converse(
    J: JointDist,
    p: Protocol,
    eta: float,
    partition: Partition | None = None,
    cap: int = STATE_CAP,
) -> ConverseReport:
    """Assert the achieved key length against the testing bound at achieved eps.

    When the achieved eps leaves no room for eta (eps + eta >= 1) the bound
    is vacuously +inf and the check passes trivially.
    """
    rep = eval_sk_security(J, p, cap=cap)
    inst = sk_instance_dist(J, p)
    if rep.eps + eta >= 1.0:
        return ConverseReport(rep.eps, rep.key_len_bits, math.inf, math.inf, None, True)
    if partition is None:
        br = cit_bound_best(inst, rep.eps, eta)
    else:
        br = cit_bound(inst, partition, rep.eps, eta)
    return ConverseReport(
        eps=rep.eps,
        key_len_bits=rep.key_len_bits,
        bound=br.value,
        slack=br.value - rep.key_len_bits,
        partition=br.partition,
        trivial=False,
    )


@dataclass(frozen=True)
class RegionTestReport:
    lam: float
    type1: float
    type1_bound: float
    type2: float
    type2_bound: float

    @property
    def ok(self) -> bool:
        return (
            self.type1 <= self.type1_bound + _TOL
            and self.type2 <= self.type2_bound + _TOL
        )

    def as_json(self) -> dict:
        return {
            "lambda": self.lam,
            "type1": self.type1,
            "type1_bound": self.type1_bound,
            "type2": self.type2,
            "type2_bound": self.type2_bound,
            "ok": self.ok,
        }


def acceptance_region_test(
    J: JointDist,
    p: Protocol,
    partition: Partition,
    eta: float,
    cap: int = STATE_CAP,
) -> RegionTestReport:
    """Run the explicit acceptance-region test behind the converse bound.

    The region accepts (k_M, f, z) whenever
    log2[ unif(k_M) / Q^pi(k_M | f, z) ] >= lam, with
    lam = (|pi|-1) log2|K| - |pi| log2(1/eta); points with a vanishing Q
    conditional are accepted.  Checks exactly that the Q-mass of the region
    is at most |K|^(1-|pi|) eta^(-|pi|) and its P-complement is at most
    achieved-eps + eta.
    """
    if eta <= 0 or eta >= 1:
        raise PreconditionError("eta must lie in (0, 1)")
    rep = eval_sk_security(J, p, cap=cap)
    nk = len(p.key_symbols)
    l = partition.num_blocks
    lam = (l - 1) * math.log2(nk) - l * math.log2(1.0 / eta)

    p_law = protocol_law(J, p, cap=cap)
    q_dist = _q_pi(J, p, partition)
    q_law = protocol_law(q_dist, p, cap=cap)
    q_fz: dict = defaultdict(float)
    for (keys, f, z), w in q_law.items():
        q_fz[(f, z)] += w

    def in_region(keys, f, z) -> bool:
        qw = q_law.get((keys, f, z), 0.0)
        mfz = q_fz.get((f, z), 0.0)
        if qw == 0.0 or mfz == 0.0:
            return True
        if not all(k == keys[0] for k in keys):
            return False  # ideal mass 0, conditional positive
        qc = qw / mfz
        return -math.log2(nk) - math.log2(qc) >= lam - 1e-12

    type2 = sum(w for (keys, f, z), w in q_law.items() if in_region(keys, f, z))
    type1 = sum(w for (keys, f, z), w in p_law.items() if not in_region(keys, f, z))
    return RegionTestReport(
        lam=lam,
        type1=float(type1),
        type1_bound=float(rep.eps + eta),
        type2=float(type2),
        type2_bound=float(nk ** (1 - l) * eta ** (-l)),
    )


def interactive_independence_check(
    J: JointDist,
    p: Protocol,
    partition: Partition,
    z=None,
    tol: float = 1e-9,
    cap: int = STATE_CAP,
) -> bool:
    """Verify that conditional independence survives interactive communication.

    Requires J to factorize across the partition given z; then checks that
    P(x_M | f, z) factorizes across the partition for every transcript-z
    pair of positive probability.
    """
    z_names = list(p.eve_vars) if z is None else ([z] if isinstance(z, str) else list(z))
    blocks = [[n for n in group if n not in set(z_names)] for group in p.obs_vars]
    nonz = [n for n in J.var_names if n not in set(z_names)]
    if sorted(n for b in blocks for n in b) != sorted(nonz):
        raise PreconditionError(
            "party observations must partition the non-conditioning variables"
        )
    index_of = {n: i + 1 for i, n in enumerate(nonz)}
    var_blocks = [
        frozenset(index_of[n] for i in b for n in blocks[i - 1])
        for b in partition.blocks
    ]
    if not factorizes(J, var_blocks, z_names if z_names else None, tol=tol):
        raise PreconditionError(
            "J does not conditionally factorize across the partition"
        )
    law = protocol_law(J, p, with_outcomes=True, cap=cap)
    positions = {n: i for i, n in enumerate(J.var_names)}
    nonz_pos = [positions[n] for n in nonz]
    shape = tuple(len(J.alphabet(n)) for n in nonz)
    sym_index = [
        {s: k for k, s in enumerate(J.alphabet(n).symbols)} for n in nonz
    ]
    slices: dict = defaultdict(lambda: np.zeros(shape))
    for (keys, f, z_view, syms), w in law.items():
        idx = tuple(sym_index[a][syms[pos]] for a, pos in enumerate(nonz_pos))
        slices[(f, z_view)][idx] += w

    axis_blocks = [sorted(i - 1 for i in b) for b in var_blocks]
    for (f, z_view), arr in slices.items():
        mass = arr.sum()
        if mass <= 0:
            continue
        cond = arr / mass
        prod = np.ones_like(cond)
        for axes in axis_blocks:
            other = tuple(a for a in range(cond.ndim) if a not in axes)
            bm = cond.sum(axis=other) if other else cond
            shape_b = [1] * cond.ndim
            for a in axes:
                shape_b[a] = shape[a]
            prod = prod * bm.reshape(shape_b)
        if np.max(np.abs(cond - prod)) > tol:
            return False
    return True


# ---------------------------------------------------------------------------
# leftover hashing


@dataclass(frozen=True)
class LeftoverHashResult:
    out_len: int
    seed: int
    distance: float

    def as_json(self) -> dict:
        return {"out_len": self.out_len, "seed": self.seed, "distance": self.distance}


def _toeplitz(seed: int, out_len: int, in_len: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    s = rng.integers(0, 2, size=max(out_len + in_len - 1, 0), dtype=np.int64)
    if out_len == 0:
        return np.zeros((0, in_len), dtype=np.int64)
    idx = np.subtract.outer(np.arange(out_len), np.arange(in_len)) + in_len - 1
    return s[idx]


def leftover_hash(
    J: JointDist,
    x_vars,
    y_vars,
    out_len: int,
    seed: int,
    matrix: np.ndarray | None = None,
) -> LeftoverHashResult:
    """Hash the X part with a seeded Toeplitz matrix; exact output distance.

    X assignments are encoded as fixed-width bit strings of their row-major
    index; the key is the matrix-vector product over GF(2).  Returns the
    exact variational distance of (K(X), Y) from uniform x P_Y.
    """
    x_vars = [x_vars] if isinstance(x_vars, str) else list(x_vars)
    y_vars = [y_vars] if isinstance(y_vars, str) else list(y_vars)
    if sorted(x_vars + y_vars) != sorted(J.var_names):
        raise PreconditionError("x_vars and y_vars must partition the variables")
    arr = np.transpose(
        J.array(), [J.axis(n) for n in x_vars] + [J.axis(n) for n in y_vars]
    )
    x_size = int(np.prod(arr.shape[: len(x_vars)], dtype=np.int64))
    flat = arr.reshape(x_size, -1)
    nbits = max(1, math.ceil(math.log2(x_size)))
    if out_len < 0 or out_len > nbits:
        raise PreconditionError(
            f"output length must lie in [0, {nbits}] for {x_size} X values"
        )
    T = _toeplitz(seed, out_len, nbits) if matrix is None else np.asarray(matrix)
    bits = ((np.arange(x_size)[:, None] >> np.arange(nbits - 1, -1, -1)[None, :]) & 1)
    keys = (bits @ T.T) % 2 if out_len else np.zeros((x_size, 0), dtype=np.int64)
    key_idx = keys @ (1 << np.arange(out_len - 1, -1, -1)) if out_len else np.zeros(
        x_size, dtype=np.int64
    )
    nk = 1 << out_len
    pky = np.zeros((nk, flat.shape[1]))
    for x in range(x_size):
        pky[int(key_idx[x])] += flat[x]
    py = flat.sum(axis=0)
    ideal = np.tile(py / nk, (nk, 1))
    distance = 0.5 * float(np.abs(pky - ideal).sum())
    return LeftoverHashResult(out_len=out_len, seed=seed, distance=distance)


@dataclass(frozen=True)
class LeftoverHashSearch:
    out_len: int
    entropy_bits: float
    threshold: float
    best: LeftoverHashResult
    ok: bool

    def as_json(self) -> dict:
        return {
            "out_len": self.out_len,
            "entropy_bits": self.entropy_bits,
            "threshold": self.threshold,
            "best": self.best.as_json(),
            "ok": self.ok,
        }


def leftover_hash_search(
    J: JointDist,
    x_vars,
    y_vars,
    eps: float,
    eta: float,
    num_seeds: int = 64,
    base_seed: int = 0,
) -> LeftoverHashSearch:
    """Witness the leftover-hash existence claim over a bounded seed set.

    Output length floor(H_min^eps(X|Y) - 2 log2(1/(2 eta))); the claim is
    that some 2-universal hash of that length lands within 2*eps + eta of
    uniform-independent.  With side information present the smoothed entropy
    is only implemented at eps = 0 (the exact conditional min-entropy).
    """
    if eta <= 0:
        raise PreconditionError("eta must be positive")
    x_vars = [x_vars] if isinstance(x_vars, str) else list(x_vars)
    y_vars = [y_vars] if isinstance(y_vars, str) else list(y_vars)
    if eps == 0:
        hval = h_min_cond(J, x_vars, y_vars)
    elif not y_vars:
        hval = h_min_smooth(J, eps).value
    else:
        raise PreconditionError(
            "smoothed conditional min-entropy is only supported at eps=0"
        )
    out_len = max(0, math.floor(hval - 2 * math.log2(1.0 / (2 * eta))))
    best = None
    for k in range(num_seeds):
        res = leftover_hash(J, x_vars, y_vars, out_len, base_seed + k)
        if best is None or res.distance < best.distance - _TOL:
            best = res
    threshold = 2 * eps + eta
    return LeftoverHashSearch(
        out_len=out_len,
        entropy_bits=hval,
        threshold=threshold,
        best=best,
        ok=best.distance <= threshold + _TOL,
    )


# ---------------------------------------------------------------------------
# oblivious transfer protocols and reductions

def _xor_bits(a: str, b: str) -> str:
    return "".join("1" if x != y else "0" for x, y in zip(a, b))


def _bit_strings(l: int) -> list[str]:
    return [format(v, f"0{l}b") for v in range(1 << l)] if l else [""]


@dataclass(frozen=True)
class OTProtocol:
    """One-of-two string OT protocol over a correlated resource.

    Party 1 privately generates the strings (K0, K1) and party 2 the choice
    bit B; both are uniform local randomness, independent of the resource
    (X1, X2).  Message maps read (resource observation, private input,
    transcript); ``khat`` is party 2's estimate of K_B from
    (X2, B, transcript).
    """

    length: int
    rounds: int
    message_maps: Mapping[tuple[int, int], MapLike]
    khat: Callable

    def strings(self) -> list[str]:
        return _bit_strings(self.length)


@dataclass(frozen=True)
class OTReport:
    eps: float
    delta1: float
    delta2: float

    def as_json(self) -> dict:
        return {"eps": self.eps, "delta1": self.delta1, "delta2": self.delta2}


def _tv_dict(joint: Mapping, split) -> float:
    """TV distance between a dict law and the product of its split marginals.

    ``split(key)`` returns (a, b); the product law is P_A x P_B.
    """
    pa: dict = defaultdict(float)
    pb: dict = defaultdict(float)
    for key, w in joint.items():
        a, b = split(key)
        pa[a] += w
        pb[b] += w
    total = 0.0
    seen = set()
    for key, w in joint.items():
        a, b = split(key)
        total += abs(w - pa[a] * pb[b])
        seen.add((a, b))
    for a, wa in pa.items():
        for b, wb in pb.items():
            if (a, b) not in seen:
                total += wa * wb
    return 0.5 * total


def _ot_transcripts(J: JointDist, otp: OTProtocol):
    """Yield (x1, x2, k0, k1, b, transcript, weight) over the whole space."""
    if len(J.vars) != 2:
        raise PreconditionError("OT resource must be a bivariate distribution")
    l = otp.length
    strings = otp.strings()
    pair_w = 1.0 / (len(strings) ** 2)
    sched = [(j, i) for j in range(1, otp.rounds + 1) for i in (1, 2)]
    arr = J.array()
    a1, a2 = J.vars[0][1].symbols, J.vars[1][1].symbols
    for i1, x1 in enumerate(a1):
        for i2, x2 in enumerate(a2):
            prob = float(arr[i1, i2])
            if prob == 0.0:
                continue
            for k0 in strings:
                for k1 in strings:
                    for b in ("0", "1"):
                        base = prob * pair_w * 0.5
                        stack = [((), base, 0)]
                        while stack:
                            tr, w, pos = stack.pop()
                            if pos == len(sched):
                                yield (x1, x2, k0, k1, b, tr, w)
                                continue
                            j, i = sched[pos]
                            m = otp.message_maps.get((j, i))
                            if m is None:
                                stack.append((tr + ("-",), w, pos + 1))
                                continue
                            if i == 1:
                                val = _map_value(m, (x1,), k0 + k1, tr)
                            else:
                                val = _map_value(m, (x2,), b, tr)
                            for sym, pw in _branches(val):
                                stack.append((tr + (sym,), w * pw, pos + 1))


def measure_ot(J: JointDist, otp: OTProtocol) -> OTReport:
    """Exact (eps, delta1, delta2) of an OT protocol on resource J.

    eps is the probability the estimate misses K_B; delta1 the distance of
    K_{not-B} from independent of party 2's view; delta2 the distance of B
    from independent of party 1's view.
    """
    err = 0.0
    law1: dict = defaultdict(float)  # (K_{not B}; X2, B, F)
    law2: dict = defaultdict(float)  # (B; K0, K1, X1, F)
    for x1, x2, k0, k1, b, tr, w in _ot_transcripts(J, otp):
        kb = k0 if b == "0" else k1
        kbar = k1 if b == "0" else k0
        guess = otp.khat(x2, b, tr)
        if guess != kb:
            err += w
        law1[(kbar, (x2, b, tr))] += w
        law2[(b, (k0, k1, x1, tr))] += w
    d1 = _tv_dict(law1, lambda key: key)
    d2 = _tv_dict(law2, lambda key: key)
    return OTReport(eps=float(err), delta1=float(d1), delta2=float(d2))


def ideal_ot_correlation(l: int, cap: int = STATE_CAP) -> JointDist:
    """Uniform OT correlation: X1 = (K0', K1'), X2 = (B', K'_{B'})."""
    strings = _bit_strings(l)
    n1 = len(strings) ** 2
    n2 = 2 * len(strings)
    if n1 * n2 > cap:
        raise CapExceededError("OT correlation exceeds the state cap")
    sym1 = [s0 + s1 for s0 in strings for s1 in strings]
    sym2 = [b + k for b in ("0", "1") for k in strings]
    pmf = np.zeros((n1, n2))
    for i, s in enumerate(sym1):
        k0p, k1p = s[:l], s[l:]
        for j, t in enumerate(sym2):
            bp, kp = t[0], t[1:]
            held = k0p if bp == "0" else k1p
            if kp == held:
                pmf[i, j] = (1.0 / n1) * 0.5
    return JointDist((("X1", Alphabet(tuple(sym1))), ("X2", Alphabet(tuple(sym2)))),
                     pmf.reshape(-1))


def ideal_ot_protocol(l: int, cap: int = STATE_CAP) -> tuple[JointDist, OTProtocol]:
    """The standard OT-from-OT-correlation construction; measures (0, 0, 0).

    Round 1: party 2 announces C = B xor B'.  Round 2: party 1 sends
    (K0 xor K'_C, K1 xor K'_{not C}); party 2 unmasks with K'_{B'}.
    """
    J = ideal_ot_correlation(l, cap=cap)

    def msg_receiver(obs, rand, tr):
        bprime = obs[0][0]
        return str(int(rand) ^ int(bprime))

    def msg_sender(obs, rand, tr):
        c = tr[1]
        k0p, k1p = obs[0][:l], obs[0][l:]
        kc = k0p if c == "0" else k1p
        kcbar = k1p if c == "0" else k0p
        k0, k1 = rand[:l], rand[l:]
        return _xor_bits(k0, kc) + _xor_bits(k1, kcbar)

    def khat(x2, b, tr):
        m = tr[2]
        m0, m1 = m[:l], m[l:]
        kp = x2[1:]
        return _xor_bits(m0 if b == "0" else m1, kp)

    otp = OTProtocol(
        length=l,
        rounds=2,
        message_maps={(1, 2): msg_receiver, (2, 1): msg_sender},
        khat=khat,
    )
    return J, otp


@dataclass(frozen=True)
class ReducedSK:
    """A secret-key instance produced by a reduction, ready for evaluation."""

    dist: JointDist
    protocol: Protocol
    used_fallback: bool = False


def reduce_ot_to_sk(J: JointDist, otp: OTProtocol, variant: int) -> ReducedSK:
    """Turn an OT protocol into a secret-key protocol (two known routes).

    Variant 1 broadcasts B and keys on (K_B, estimate), with the maximum
    common function as the eavesdropper's side information.  Variant 2 has
    party 2 resample a fresh X2 as if its bit had been flipped, broadcasts
    B, and keys on (K_{not B}, estimate from the resampled view); the
    eavesdropper sees X2 itself and party 2 additionally holds the minimum
    sufficient statistic.  Resampling against a transcript unreachable
    under the flipped bit falls back to the statistic-conditional law and
    is flagged.
    """
    if variant not in (1, 2):
        raise PreconditionError("variant must be 1 or 2")
    x1, x2 = J.var_names
    l = otp.length
    strings = otp.strings()
    rand1 = LocalRand.uniform([s0 + s1 for s0 in strings for s1 in strings])
    rand2 = LocalRand.uniform(["0", "1"])
    n_ot_msgs = 2 * otp.rounds

    def ot_messages() -> dict:
        maps = {}
        for (j, i), m in otp.message_maps.items():
            maps[(j, i)] = m
        return maps

    if variant == 1:
        lab0, _ = mcf(J, x1, x2)
        JV = attach_label(J, lab0, "V0")

        maps = ot_messages()
        maps[(otp.rounds + 1, 2)] = lambda obs, rand, tr: rand  # broadcast B

        def key1(obs, rand, tr):
            b = tr[-1]
            return rand[:l] if b == "0" else rand[l:]

        def key2(obs, rand, tr):
            return otp.khat(obs[0], rand, tr[:n_ot_msgs])

        proto = Protocol(
            num_parties=2,
            obs_vars=((x1,), (x2,)),
            rounds=otp.rounds + 1,
            message_maps=maps,
            key_maps=(key1, key2),
            key_symbols=tuple(strings),
            eve_vars=("V0",),
            randomness=(rand1, rand2),
        )
        return ReducedSK(dist=JV, protocol=proto)

    # variant 2: resample X2 under the flipped choice bit
    lab1 = mss(J, given=x1, target=x2)
    JV = attach_label(J, lab1, "V1")

    # conditional law of X2 given (V1, B, OT transcript), from an exact run
    cond: dict = defaultdict(lambda: defaultdict(float))
    cond_v: dict = defaultdict(lambda: defaultdict(float))
    label_of = {s: str(lab1.label_of(s)) for s in J.alphabet(x1).symbols}
    for x1s, x2s, k0, k1, b, tr, w in _ot_transcripts(J, otp):
        v = label_of[x1s]
        cond[(v, b, tr)][x2s] += w
        cond_v[v][x2s] += w

    def _normalized(d: Mapping) -> dict:
        tot = sum(d.values())
        return {k: v / tot for k, v in d.items() if v > 0}

    cond = {k: _normalized(v) for k, v in cond.items()}
    cond_v = {k: _normalized(v) for k, v in cond_v.items()}
    fallback_hit = False

    # party 2 now observes (V1, X2); OT maps expect (X2,) alone
    def _x2_view(m):
        return lambda obs, rand, tr: _map_value(m, (obs[1],), rand, tr)

    maps = {}
    for (j, i), m in otp.message_maps.items():
        maps[(j, i)] = _x2_view(m) if i == 2 else m
    maps[(otp.rounds + 1, 2)] = lambda obs, rand, tr: rand  # broadcast B

    def key1(obs, rand, tr):
        b = tr[-1]
        return rand[l:] if b == "0" else rand[:l]  # K_{not B}

    def key2(obs, rand, tr):
        nonlocal fallback_hit
        v = obs[0]
        bbar = "1" if rand == "0" else "0"
        f_ot = tr[:n_ot_msgs]
        table = cond.get((v, bbar, f_ot))
        if table is None:
            fallback_hit = True
            table = cond_v[v]
        out: dict = defaultdict(float)
        for x2s, pw in table.items():
            out[otp.khat(x2s, bbar, f_ot)] += pw
        return dict(out)

    proto = Protocol(
        num_parties=2,
        obs_vars=((x1,), ("V1", x2)),
        rounds=otp.rounds + 1,
        message_maps=maps,
        key_maps=(key1, key2),
        key_symbols=tuple(strings),
        eve_vars=(x2,),
        randomness=(rand1, rand2),
    )
    # probe every reachable key-map input so the fallback flag is accurate
    eval_sk_security(JV, proto)
    return ReducedSK(dist=JV, protocol=proto, used_fallback=fallback_hit)


# ---------------------------------------------------------------------------
# bit commitment protocols and reduction


@dataclass(frozen=True)
class BCProtocol:
    """Commit-phase protocol plus the reveal-phase test function.

    Party 1 commits a uniform ``key_bits``-bit string K; commit messages may
    depend on (X1, K) for party 1 and on X2 for party 2.  ``test`` maps a
    claimed (K', X1', X2, transcript) to an acceptance probability.
    """

    key_bits: int
    rounds: int
    message_maps: Mapping[tuple[int, int], MapLike]
    test: Callable

    def keys(self) -> list[str]:
        return _bit_strings(self.key_bits)


@dataclass(frozen=True)
class BCReport:
    eps: float
    delta1: float
    delta2: float

    def as_json(self) -> dict:
        return {"eps": self.eps, "delta1": self.delta1, "delta2": self.delta2}


def _bc_commit_law(J: JointDist, bcp: BCProtocol):
    """Yield (k, x1, x2, transcript, weight) over the commit phase."""
    if len(J.vars) != 2:
        raise PreconditionError("BC resource must be a bivariate distribution")
    keys = bcp.keys()
    kw = 1.0 / len(keys)
    sched = [(j, i) for j in range(1, bcp.rounds + 1) for i in (1, 2)]
    arr = J.array()
    a1, a2 = J.vars[0][1].symbols, J.vars[1][1].symbols
    for i1, x1 in enumerate(a1):
        for i2, x2 in enumerate(a2):
            prob = float(arr[i1, i2])
            if prob == 0.0:
                continue
            for k in keys:
                stack = [((), prob * kw, 0)]
                while stack:
                    tr, w, pos = stack.pop()
                    if pos == len(sched):
                        yield (k, x1, x2, tr, w)
                        continue
                    j, i = sched[pos]
                    m = bcp.message_maps.get((j, i))
                    if m is None:
                        stack.append((tr + ("-",), w, pos + 1))
                        continue
                    if i == 1:
                        val = _map_value(m, (x1,), k, tr)
                    else:
                        val = _map_value(m, (x2,), None, tr)
                    for sym, pw in _branches(val):
                        stack.append((tr + (sym,), w * pw, pos + 1))


def measure_bc(J: JointDist, bcp: BCProtocol) -> BCReport:
    """Exact (eps, delta1, delta2) of a bit commitment protocol on J.

    eps: probability the honest reveal is rejected.  delta1 (hiding):
    distance of K from independent of party 2's commit view.  delta2
    (binding): total probability of the best cheating reveal, optimized
    pointwise over party 1's view.
    """
    x1_syms = J.vars[0][1].symbols
    keys = bcp.keys()
    err = 0.0
    law_hide: dict = defaultdict(float)
    view: dict = defaultdict(lambda: defaultdict(float))
    for k, x1, x2, tr, w in _bc_commit_law(J, bcp):
        err += w * (1.0 - float(bcp.test(k, x1, x2, tr)))
        law_hide[(k, (x2, tr))] += w
        view[(k, x1, tr)][x2] += w
    d1 = _tv_dict(law_hide, lambda key: key)
    d2 = 0.0
    for (k, x1, tr), x2_law in view.items():
        best = 0.0
        for kprime in keys:
            if kprime == k:
                continue
            for x1prime in x1_syms:
                acc = sum(
                    w * float(bcp.test(kprime, x1prime, x2, tr))
                    for x2, w in x2_law.items()
                )
                if acc > best:
                    best = acc
        d2 += best
    return BCReport(eps=float(err), delta1=float(d1), delta2=float(d2))


def ideal_bc_protocol(l: int, cap: int = STATE_CAP) -> tuple[JointDist, BCProtocol]:
    """XOR commitment over the uniform OT correlation.

    Party 1 commits K by announcing K xor K0' xor K1'; the reveal is checked
    against the coordinate of (K0', K1') that party 2 holds.  Measured
    figures: eps = 0, delta1 = 0 (the pad is uniform given party 2's view),
    delta2 = 1/2 (a cheater must flip one string and guess which one is
    checked).  A perfectly binding and perfectly hiding commitment of
    positive length is impossible, so this is the canonical near-ideal
    instance.
    """
    J = ideal_ot_correlation(l, cap=cap)

    def commit(obs, rand, tr):
        k0p, k1p = obs[0][:l], obs[0][l:]
        return _xor_bits(rand, _xor_bits(k0p, k1p))

    def test(kprime, x1prime, x2, tr):
        k0p, k1p = x1prime[:l], x1prime[l:]
        if _xor_bits(_xor_bits(k0p, k1p), kprime) != tr[0]:
            return 0.0
        bp, kp = x2[0], x2[1:]
        held = k0p if bp == "0" else k1p
        return 1.0 if held == kp else 0.0

    bcp = BCProtocol(
        key_bits=l,
        rounds=1,
        message_maps={(1, 1): commit},
        test=test,
    )
    return J, bcp


def reduce_bc_to_sk(J: JointDist, bcp: BCProtocol) -> ReducedSK:
    """Turn a commitment protocol into a secret-key protocol.

    The key is the committed string; party 2 (who also holds the minimum
    sufficient statistic) decodes by maximizing the acceptance probability
    of the reveal test over claimed (key, X1) pairs, ties broken in
    canonical order.  The eavesdropper observes X2.
    """
    x1, x2 = J.var_names
    lab1 = mss(J, given=x1, target=x2)
    JV = attach_label(J, lab1, "V1")
    keys = bcp.keys()
    x1_syms = J.alphabet(x1).symbols
    label_of = {s: str(lab1.label_of(s)) for s in x1_syms}

    # P(x2 | v1, transcript) from the exact commit law
    by_vf: dict = defaultdict(lambda: defaultdict(float))
    for k, x1s, x2s, tr, w in _bc_commit_law(J, bcp):
        by_vf[(label_of[x1s], tr)][x2s] += w

    decoder: dict = {}
    for (v, tr), x2_law in by_vf.items():
        tot = sum(x2_law.values())
        best, best_pair = -1.0, None
        for khat in keys:
            for x1hat in x1_syms:
                acc = sum(
                    (w / tot) * float(bcp.test(khat, x1hat, x2s, tr))
                    for x2s, w in x2_law.items()
                )
                if acc > best + _TOL:
                    best, best_pair = acc, (khat, x1hat)
        decoder[(v, tr)] = best_pair[0]

    rand1 = LocalRand.uniform(keys)

    # party 2 now observes (V1, X2); commit maps expect (X2,) alone
    def _x2_view(m):
        return lambda obs, rand, tr: _map_value(m, (obs[1],), None, tr)

    maps = {}
    for (j, i), m in bcp.message_maps.items():
        maps[(j, i)] = _x2_view(m) if i == 2 else m

    def key1(obs, rand, tr):
        return rand

    def key2(obs, rand, tr):
        return decoder[(obs[0], tr)]

    proto = Protocol(
        num_parties=2,
        obs_vars=((x1,), ("V1", x2)),
        rounds=bcp.rounds,
        message_maps=maps,
        key_maps=(key1, key2),
        key_symbols=tuple(keys),
        eve_vars=(x2,),
        randomness=(rand1, None),
    )
    return ReducedSK(dist=JV, protocol=proto)


# ---------------------------------------------------------------------------
# converse fuzzing harness


@dataclass(frozen=True)
class FuzzReport:
    count: int
    converse_violations: int
    region_test_violations: int
    criteria_relation_violations: int
    max_eps: float
    min_converse_slack: float

    @property
    def ok(self) -> bool:
        return (
            self.converse_violations == 0
            and self.region_test_violations == 0
            and self.criteria_relation_violations == 0
        )

    def as_json(self) -> dict:
        return {
            "count": self.count,
            "converse_violations": self.converse_violations,
            "region_test_violations": self.region_test_violations,
            "criteria_relation_violations": self.criteria_relation_violations,
            "max_eps": self.max_eps,
            "min_converse_slack": self.min_converse_slack,
            "ok": self.ok,
        }


def random_sk_instance(
    seed, m: int = 2, rounds: int = 2, with_eve: bool | None = None,
    key_size: int | None = None,
) -> tuple[JointDist, Protocol]:
    """Seeded random protocol on a random joint source, binary observations.

    Message alphabets are binary; maps are extensional full-domain tables;
    every identical seed reproduces the identical instance.
    """
    rng = np.random.default_rng(seed)
    if with_eve is None:
        with_eve = bool(rng.integers(0, 2))
    if key_size is None:
        key_size = int(rng.choice([2, 3, 4]))
    names = [f"X{i+1}" for i in range(m)] + (["Z"] if with_eve else [])
    shape = [2] * len(names)
    pmf = rng.random(int(np.prod(shape))) + 0.05
    pmf /= pmf.sum()
    J = JointDist(
        tuple((n, Alphabet(("0", "1"))) for n in names),
        pmf,
        eve="Z" if with_eve else None,
    )

    use_rand = bool(rng.integers(0, 4) == 0)  # occasional binary local coin
    randomness = tuple(
        LocalRand.uniform(["0", "1"]) if (use_rand and i == 0) else None
        for i in range(m)
    )
    rand_syms = [("0", "1") if r is not None else (None,) for r in randomness]

    def transcripts(k: int):
        if k == 0:
            yield ()
            return
        for prefix in transcripts(k - 1):
            for s in ("0", "1"):
                yield prefix + (s,)

    maps = {}
    pos = 0
    for j in range(1, rounds + 1):
        for i in range(1, m + 1):
            table = {}
            for obs in (("0",), ("1",)):
                for rs in rand_syms[i - 1]:
                    for tr in transcripts(pos):
                        table[(obs, rs, tr)] = str(rng.integers(0, 2))
            maps[(j, i)] = table
            pos += 1

    key_symbols = tuple(str(v) for v in range(key_size))
    key_maps = []
    for i in range(1, m + 1):
        table = {}
        for obs in (("0",), ("1",)):
            for rs in rand_syms[i - 1]:
                for tr in transcripts(pos):
                    table[(obs, rs, tr)] = str(rng.integers(0, key_size))
        key_maps.append(table)

    proto = Protocol(
        num_parties=m,
        obs_vars=tuple((n,) for n in names[:m]),
        rounds=rounds,
        message_maps=maps,
        key_maps=tuple(key_maps),
        key_symbols=key_symbols,
        eve_vars=("Z",) if with_eve else (),
        randomness=randomness,
    )
    return J, proto


def fuzz_converse(
    count: int = 500,
    seed: int = 20240913,
    eta: float = 0.05,
    ms: Sequence[int] = (2, 3),
) -> FuzzReport:
    """Exercise the converse, the acceptance-region test, and the two
    security-criterion relations on seeded random protocols.

    Returns counts of violations; a correct implementation reports zero of
    each, for every seed.
    """
    conv_bad = region_bad = relation_bad = 0
    max_eps = 0.0
    min_slack = math.inf
    for idx in range(count):
        m = int(ms[idx % len(ms)])
        rounds = 1 + (idx % 2)
        J, proto = random_sk_instance([seed, idx], m=m, rounds=rounds)
        rep = eval_sk_security(J, proto)
        max_eps = max(max_eps, rep.eps)

        # relations between the combined and split security criteria
        if rep.eps > rep.eps_rec + rep.delta_sec + _TOL:
            relation_bad += 1
        if rep.eps_rec > rep.eps + _TOL or rep.delta_sec > rep.eps + _TOL:
            relation_bad += 1

        conv = check_converse(J, proto, eta)
        if not conv.ok:
            conv_bad += 1
        if not conv.trivial:
            min_slack = min(min_slack, conv.slack)

        for pi in enum_partitions(m):
            lem = acceptance_region_test(J, proto, pi, eta)
            if not lem.ok:
                region_bad += 1
    return FuzzReport(
        count=count,
        converse_violations=conv_bad,
        region_test_violations=region_bad,
        criteria_relation_violations=relation_bad,
        max_eps=float(max_eps),
        min_converse_slack=float(min_slack),
    )


# ---------------------------------------------------------------------------
# protocol JSON interchange
#
# Map tables are keyed by delimited strings "obs=a,b|rand=r|tr=m1,m2" (empty
# rand for parties without local randomness); values are a message symbol or
# a {symbol: probability} object.  Only table-based protocols serialize.


def _encode_key(obs, rand, transcript) -> str:
    return "obs={}|rand={}|tr={}".format(
        ",".join(obs), "" if rand is None else rand, ",".join(transcript)
    )


def _decode_key(text: str):
    try:
        obs_part, rand_part, tr_part = text.split("|")
        obs = tuple(s for s in obs_part[len("obs="):].split(",") if s != "")
        rand = rand_part[len("rand="):] or None
        tr = tuple(s for s in tr_part[len("tr="):].split(",") if s != "")
    except ValueError:
        raise PreconditionError(f"malformed map key {text!r}") from None
    return obs, rand, tr


def _table_from_json(obj: Mapping) -> dict:
    table = {}
    for key, val in obj.items():
        table[_decode_key(key)] = (
            val if isinstance(val, str) else {str(s): float(p) for s, p in val.items()}
        )
    return table


def _table_to_json(table: Mapping) -> dict:
    out = {}
    for (obs, rand, tr), val in sorted(table.items()):
        out[_encode_key(obs, rand, tr)] = (
            val if isinstance(val, str) else {s: p for s, p in sorted(val.items())}
        )
    return out


def protocol_from_json(obj: Mapping) -> Protocol:
    try:
        randomness = tuple(
            None if r is None else LocalRand(tuple(r["symbols"]), tuple(r["probs"]))
            for r in obj.get("randomness", [None] * int(obj["parties"]))
        )
        maps = {}
        for key, table in obj.get("messages", {}).items():
            rnd, party = key.split(":")
            maps[(int(rnd), int(party))] = _table_from_json(table)
        return Protocol(
            num_parties=int(obj["parties"]),
            obs_vars=tuple(tuple(g) for g in obj["obs_vars"]),
            rounds=int(obj["rounds"]),
            message_maps=maps,
            key_maps=tuple(_table_from_json(t) for t in obj["keys"]),
            key_symbols=tuple(obj["key_symbols"]),
            eve_vars=tuple(obj.get("eve_vars", ())),
            randomness=randomness,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise PreconditionError(f"malformed protocol JSON: {exc}") from None


def protocol_to_json(p: Protocol) -> dict:
    for m in list(p.message_maps.values()) + list(p.key_maps):
        if callable(m):
            raise PreconditionError("only table-based protocols serialize to JSON")
    return {
        "parties": p.num_parties,
        "obs_vars": [list(g) for g in p.obs_vars],
        "eve_vars": list(p.eve_vars),
        "rounds": p.rounds,
        "randomness": [
            None if r is None else {"symbols": list(r.symbols), "probs": list(r.probs)}
            for r in p.randomness
        ],
        "key_symbols": list(p.key_symbols),
        "messages": {
            f"{j}:{i}": _table_to_json(t) for (j, i), t in sorted(p.message_maps.items())
        },
        "keys": [_table_to_json(t) for t in p.key_maps],
    }
