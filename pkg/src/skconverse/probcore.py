"""Finite-alphabet joint distributions with exact information measures.

Distributions are dense, row-major mass functions over a named product
alphabet.  Everything here is desk-scale by design: the number of cells is
capped (default 10^7) and all arithmetic is plain float64 with no rounding
beyond construction-time normalization checks.  All information quantities
are in bits.

Values are immutable after construction and every operation is a pure
function, so concurrent use from multiple threads needs no synchronization.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import CapExceededError, PreconditionError, ShapeMismatchError

DEFAULT_CELL_CAP = 10_000_000

#: construction-time tolerance on the total mass of a normalized pmf
SUM_TOL = 1e-9
#: slack allowed above 1 for the total mass of a subnormalized function
SUBNORM_TOL = 1e-12

#: stand-in for log2(0); finite so that 0 * log 0 style products stay exact,
#: while exp2() of it underflows to exactly 0.0
LOG2_ZERO = -1e18


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of distinct symbol labels."""

    symbols: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "symbols", tuple(str(s) for s in self.symbols))
        if not self.symbols:
            raise PreconditionError("alphabet must be nonempty")
        if len(set(self.symbols)) != len(self.symbols):
            raise PreconditionError("alphabet symbols must be unique")

    def __len__(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise PreconditionError(f"unknown symbol {symbol!r}") from None


Var = tuple[str, Alphabet]


def _normalize_vars(vars: Sequence) -> tuple[Var, ...]:
    out = []
    for v in vars:
        name, alpha = v
        if not isinstance(alpha, Alphabet):
            alpha = Alphabet(tuple(alpha))
        out.append((str(name), alpha))
    names = [n for n, _ in out]
    if len(set(names)) != len(names):
        raise PreconditionError("variable names must be unique")
    return tuple(out)


class _MassMixin:
    """Shared helpers for JointDist / SubDist."""

    vars: tuple[Var, ...]
    pmf: np.ndarray

    @property
    def var_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.vars)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for _, a in self.vars)

    @property
    def n_cells(self) -> int:
        return int(self.pmf.size)

    def axis(self, name: str) -> int:
        for i, (n, _) in enumerate(self.vars):
            if n == name:
                return i
        raise PreconditionError(f"unknown variable name {name!r}")

    def alphabet(self, name: str) -> Alphabet:
        return self.vars[self.axis(name)][1]

    def array(self) -> np.ndarray:
        """The pmf reshaped to one axis per variable (read-only view)."""
        return self.pmf.reshape(self.shape)

    def total_mass(self) -> float:
        return float(self.pmf.sum())

    def outcomes(self) -> Iterable[tuple[str, ...]]:
        """Row-major iteration over symbol tuples."""
        alphas = [a.symbols for _, a in self.vars]
        for idx in np.ndindex(*self.shape):
            yield tuple(alphas[i][j] for i, j in enumerate(idx))

    def same_structure(self, other: "_MassMixin") -> bool:
        return self.vars == other.vars


def _prepare_pmf(vars: tuple[Var, ...], pmf) -> np.ndarray:
    arr = np.asarray(pmf, dtype=np.float64).reshape(-1).copy()
    want = math.prod(len(a) for _, a in vars)
    if arr.size != want:
        raise PreconditionError(
            f"pmf length {arr.size} does not equal product alphabet size {want}"
        )
    if arr.min(initial=0.0) < -1e-12:
        raise PreconditionError("pmf entries must be nonnegative")
    np.clip(arr, 0.0, None, out=arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class JointDist(_MassMixin):
    """Dense probability mass function over a named product alphabet.

    ``eve`` optionally names the variable holding the eavesdropper's side
    information; bound computations use it as the default conditioning
    variable.  It carries no weight in equality or arithmetic.
    """

    vars: tuple[Var, ...]
    pmf: np.ndarray
    eve: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "vars", _normalize_vars(self.vars))
        object.__setattr__(self, "pmf", _prepare_pmf(self.vars, self.pmf))
        total = self.pmf.sum()
        if abs(total - 1.0) > SUM_TOL:
            raise PreconditionError(f"pmf sums to {total}, expected 1 within {SUM_TOL}")
        if self.eve is not None and self.eve not in self.var_names:
            raise PreconditionError(f"eve variable {self.eve!r} not among variables")


@dataclass(frozen=True)
class SubDist(_MassMixin):
    """Subnormalized nonnegative mass function (total mass at most 1)."""

    vars: tuple[Var, ...]
    pmf: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "vars", _normalize_vars(self.vars))
        object.__setattr__(self, "pmf", _prepare_pmf(self.vars, self.pmf))
        total = self.pmf.sum()
        if total > 1.0 + SUBNORM_TOL:
            raise PreconditionError(f"subnormalized mass {total} exceeds 1")


@dataclass(frozen=True)
class Channel:
    """Conditional pmf: one distribution over the outputs per input row.

    Rows are keyed by input index tuples.  Rows for zero-probability
    conditioning inputs may be absent; ``omitted`` records them so that
    downstream code can treat them as "never occurs".
    """

    in_vars: tuple[Var, ...]
    out_vars: tuple[Var, ...]
    rows: Mapping[tuple[int, ...], np.ndarray]
    omitted: frozenset = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "in_vars", _normalize_vars(self.in_vars))
        object.__setattr__(self, "out_vars", _normalize_vars(self.out_vars))
        out_size = math.prod(len(a) for _, a in self.out_vars)
        rows = {}
        for key, row in self.rows.items():
            arr = np.asarray(row, dtype=np.float64).reshape(-1).copy()
            if arr.size != out_size:
                raise PreconditionError("channel row has wrong length")
            if arr.min(initial=0.0) < -1e-12:
                raise PreconditionError("channel row entries must be nonnegative")
            np.clip(arr, 0.0, None, out=arr)
            if abs(arr.sum() - 1.0) > SUM_TOL:
                raise PreconditionError("channel row must sum to 1")
            arr.setflags(write=False)
            rows[tuple(int(i) for i in key)] = arr
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "omitted", frozenset(self.omitted))

    @property
    def in_shape(self) -> tuple[int, ...]:
        return tuple(len(a) for _, a in self.in_vars)

    @property
    def out_shape(self) -> tuple[int, ...]:
        return tuple(len(a) for _, a in self.out_vars)

    def row_for_symbols(self, symbols: Sequence[str]) -> np.ndarray | None:
        key = tuple(a.index(s) for (_, a), s in zip(self.in_vars, symbols))
        return self.rows.get(key)


# ---------------------------------------------------------------------------
# basic manipulation


def _resolve_names(J: _MassMixin, names) -> list[str]:
    if isinstance(names, str):
        names = [names]
    names = list(names)
    for n in names:
        J.axis(n)  # raises on unknown
    return names


def marginal(J, keep) -> "JointDist | SubDist":
    """Sum out all variables not in ``keep``; order of kept vars preserved."""
    keep = _resolve_names(J, keep)
    if not keep:
        raise PreconditionError("must keep at least one variable")
    keep_set = set(keep)
    drop_axes = tuple(i for i, (n, _) in enumerate(J.vars) if n not in keep_set)
    arr = J.array().sum(axis=drop_axes) if drop_axes else J.array()
    new_vars = tuple(v for v in J.vars if v[0] in keep_set)
    cls = JointDist if isinstance(J, JointDist) else SubDist
    if cls is JointDist:
        eve = J.eve if J.eve in keep_set else None
        return JointDist(new_vars, arr.reshape(-1), eve=eve)
    return SubDist(new_vars, arr.reshape(-1))


def conditional_family(J, targets, given) -> Channel:
    """Channel of conditional rows P(targets | given).

    Rows exist only for conditioning assignments of positive probability;
    zero-probability rows are omitted and recorded on the channel.
    """
    targets = _resolve_names(J, targets)
    given = _resolve_names(J, given)
    if set(targets) & set(given):
        raise PreconditionError("targets and given must be disjoint")
    sub = marginal(J, targets + given)
    # axes in sub follow J's variable order; move given axes to the front
    g_axes = tuple(sub.axis(n) for n in given)
    t_axes = tuple(sub.axis(n) for n in targets)
    arr = np.transpose(sub.array(), g_axes + t_axes)
    g_shape = arr.shape[: len(given)]
    flat = arr.reshape(int(np.prod(g_shape, dtype=np.int64)), -1)
    masses = flat.sum(axis=1)
    if masses.sum() <= 0:
        raise PreconditionError("conditioning marginal is identically zero")
    rows = {}
    omitted = set()
    for i, m in enumerate(masses):
        key = tuple(int(k) for k in np.unravel_index(i, g_shape)) if g_shape else ()
        if m > 0:
            rows[key] = flat[i] / m
        else:
            omitted.add(key)
    in_vars = tuple((n, J.alphabet(n)) for n in given)
    out_vars = tuple((n, J.alphabet(n)) for n in targets)
    return Channel(in_vars, out_vars, rows, frozenset(omitted))


def _partition_blocks(partition) -> list[list[int]]:
    blocks = getattr(partition, "blocks", partition)
    return [sorted(int(i) for i in b) for b in blocks]


def conditional_product(J: JointDist, partition, z=None) -> JointDist:
    """Product distribution across partition blocks, conditioned on ``z``.

    The non-``z`` variables are numbered 1..m in their order of appearance
    and partitioned by ``partition``.  The result Q keeps P's marginal on
    ``z`` and, per z-slice, replaces the conditional law by the product of
    its block marginals.  With ``z=None`` it is the plain product of block
    marginals.
    """
    z_names = _resolve_names(J, z) if z is not None else []
    nonz = [n for n in J.var_names if n not in set(z_names)]
    blocks = _partition_blocks(partition)
    covered = sorted(i for b in blocks for i in b)
    if covered != list(range(1, len(nonz) + 1)) or len(blocks) < 2:
        raise PreconditionError(
            "partition must split the non-conditioning variables into >= 2 blocks"
        )
    if any(not b for b in blocks):
        raise PreconditionError("partition blocks must be nonempty")

    # reorder axes: z first, then non-z in original order
    perm = [J.axis(n) for n in z_names] + [J.axis(n) for n in nonz]
    arr = np.transpose(J.array(), perm)
    z_shape = arr.shape[: len(z_names)]
    x_shape = arr.shape[len(z_names):]
    out = np.zeros_like(arr)
    block_axes = [[i - 1 for i in b] for b in blocks]

    z_iter = np.ndindex(*z_shape) if z_names else iter([()])
    for zi in z_iter:
        sl = arr[zi]
        mass = sl.sum()
        if mass <= 0.0:
            continue
        cond = sl / mass
        prod = np.ones_like(cond)
        for axes in block_axes:
            other = tuple(a for a in range(len(x_shape)) if a not in axes)
            bm = cond.sum(axis=other) if other else cond
            shape = [1] * len(x_shape)
            for a in axes:
                shape[a] = x_shape[a]
            # bm axes follow sorted block order, matching `axes` (sorted)
            prod = prod * bm.reshape(shape)
        out[zi] = prod * mass

    inv = np.argsort(perm)
    out = np.transpose(out, inv)
    return JointDist(J.vars, out.reshape(-1), eve=J.eve)


def factorizes(J: JointDist, partition, z=None, tol: float = 1e-9) -> bool:
    """True if J's conditional law given z is a product across the partition."""
    Q = conditional_product(J, partition, z)
    return bool(np.max(np.abs(Q.pmf - J.pmf)) <= tol)


def iid_extend(J: JointDist, n: int, cap: int = DEFAULT_CELL_CAP) -> JointDist:
    """n-fold product distribution with time-indexed variable names."""
    if n < 1:
        raise PreconditionError("n must be >= 1")
    if J.n_cells ** n > cap:
        raise CapExceededError(
            f"{J.n_cells}^{n} cells exceed the cap {cap}; "
            "use the type-class operations instead"
        )
    if n == 1:
        return J
    pmf = J.pmf
    out = pmf
    for _ in range(n - 1):
        out = np.kron(out, pmf)
    vars = tuple(
        (f"{name}#{t}", alpha) for t in range(1, n + 1) for name, alpha in J.vars
    )
    return JointDist(vars, out)


def fuse_vars(J: JointDist, groups: Sequence[Sequence[str]], names: Sequence[str]) -> JointDist:
    """Fuse each group of variables into a single product-alphabet variable.

    Groups must cover all variables.  Fused symbols join the member symbols
    with '|'.  Used to treat a block of per-round variables as one party
    observation.
    """
    groups = [list(g) for g in groups]
    if sorted(n for g in groups for n in g) != sorted(J.var_names):
        raise PreconditionError("groups must cover all variables exactly once")
    perm = [J.axis(n) for g in groups for n in g]
    arr = np.transpose(J.array(), perm)
    new_vars = []
    for g, nm in zip(groups, names):
        alphas = [J.alphabet(n).symbols for n in g]
        symbols = ["|".join(combo) for combo in _product_symbols(alphas)]
        new_vars.append((nm, Alphabet(tuple(symbols))))
    shape = tuple(len(a) for _, a in new_vars)
    return JointDist(tuple(new_vars), arr.reshape(shape).reshape(-1))


def _product_symbols(alphas: Sequence[Sequence[str]]):
    if not alphas:
        yield ()
        return
    for head in alphas[0]:
        for rest in _product_symbols(alphas[1:]):
            yield (head,) + rest


def apply_channel(J: JointDist, ch: Channel) -> JointDist:
    """Pushforward of J through a channel consuming all of J's variables."""
    if ch.in_vars != J.vars:
        raise PreconditionError("channel input variables must match J exactly")
    out_size = math.prod(ch.out_shape)
    out = np.zeros(out_size)
    flat = J.pmf
    for i, p in enumerate(flat):
        if p == 0.0:
            continue
        key = tuple(int(k) for k in np.unravel_index(i, J.shape))
        row = ch.rows.get(key)
        if row is None:
            raise PreconditionError(
                f"channel has no row for positive-probability input {key}"
            )
        out += p * row
    return JointDist(ch.out_vars, out)


def extend_with_channel(J: JointDist, ch: Channel) -> JointDist:
    """Joint law over J's variables plus the channel outputs.

    The channel inputs must be a subset of J's variables; the output law is
    P(x) * W(u | x_in).
    """
    in_names = [n for n, _ in ch.in_vars]
    for n, a in ch.in_vars:
        if J.alphabet(n).symbols != a.symbols:
            raise PreconditionError(f"channel input {n!r} has mismatched alphabet")
    for n, _ in ch.out_vars:
        if n in J.var_names:
            raise PreconditionError(f"channel output name {n!r} already present")
    in_axes = [J.axis(n) for n in in_names]
    rest_axes = [i for i in range(len(J.vars)) if i not in in_axes]
    arr = np.transpose(J.array(), in_axes + rest_axes)
    in_shape = arr.shape[: len(in_axes)]
    in_size = int(np.prod(in_shape, dtype=np.int64))
    rest_size = int(np.prod(arr.shape[len(in_axes):], dtype=np.int64))
    flat = arr.reshape(in_size, rest_size)
    out_size = math.prod(ch.out_shape)
    W = np.zeros((in_size, out_size))
    for i in range(in_size):
        key = tuple(int(k) for k in np.unravel_index(i, in_shape)) if in_shape else ()
        row = ch.rows.get(key)
        if row is not None:
            W[i] = row
        elif flat[i].sum() > 0:
            raise PreconditionError(
                f"channel has no row for positive-probability input {key}"
            )
    big = np.einsum("ir,io->iro", flat, W)
    big = big.reshape(in_shape + arr.shape[len(in_axes):] + ch.out_shape)
    # restore original variable order, outputs appended
    inv = [0] * len(J.vars)
    for pos, ax in enumerate(in_axes + rest_axes):
        inv[ax] = pos
    big = np.transpose(big, inv + list(range(len(J.vars), len(J.vars) + len(ch.out_shape))))
    new_vars = J.vars + ch.out_vars
    return JointDist(new_vars, big.reshape(-1), eve=J.eve)


def pushforward_function(
    J: JointDist,
    fn: Callable[[tuple[str, ...]], str] | Sequence[str] | Mapping,
    name: str = "G",
) -> JointDist:
    """Law of a deterministic function of the full outcome tuple.

    ``fn`` may be a callable on symbol tuples, a mapping keyed by symbol
    tuples, or a row-major sequence of output labels.  The output alphabet
    is the sorted set of labels that appear.
    """
    labels = _function_table(J, fn)
    uniq = sorted(set(labels))
    idx = {s: i for i, s in enumerate(uniq)}
    out = np.zeros(len(uniq))
    for lab, p in zip(labels, J.pmf):
        out[idx[lab]] += p
    return JointDist(((name, Alphabet(tuple(uniq))),), out)


def _function_table(J: JointDist, fn) -> list[str]:
    if callable(fn):
        return [str(fn(sym)) for sym in J.outcomes()]
    if isinstance(fn, Mapping):
        try:
            return [str(fn[sym]) for sym in J.outcomes()]
        except KeyError as exc:
            raise PreconditionError(f"function table missing outcome {exc}") from None
    table = [str(v) for v in fn]
    if len(table) != J.n_cells:
        raise PreconditionError("function table length must match the outcome count")
    return table


# ---------------------------------------------------------------------------
# distances and divergences


def _check_same_shape(P, Q) -> None:
    if P.vars != Q.vars:
        raise ShapeMismatchError("distributions do not share a variable structure")


def tv_distance(P, Q) -> float:
    """Variational distance (1/2) sum |P - Q|."""
    _check_same_shape(P, Q)
    return float(0.5 * np.abs(P.pmf - Q.pmf).sum())


def log2_pmf(pmf: np.ndarray) -> np.ndarray:
    """Elementwise log2 with zeros mapped to the LOG2_ZERO sentinel."""
    out = np.full(pmf.shape, LOG2_ZERO)
    mask = pmf > 0
    out[mask] = np.log2(pmf[mask])
    return out


def logsumexp2(values: np.ndarray) -> float:
    """log2 of the sum of 2**values, stable for large negative inputs."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return LOG2_ZERO
    m = values.max()
    if m <= LOG2_ZERO:
        return LOG2_ZERO
    return float(m + np.log2(np.exp2(values - m).sum()))


def divergence(P: JointDist, Q: JointDist, kind: str = "kl", alpha: float | None = None) -> float:
    """KL or Renyi divergence in bits, with the 0*log(0/0)=0 convention.

    KL returns +inf when P's support is not contained in Q's.  The Renyi
    order must satisfy alpha > 0, alpha != 1.
    """
    _check_same_shape(P, Q)
    p, q = P.pmf, Q.pmf
    if kind == "kl":
        mask = p > 0
        if np.any(q[mask] == 0):
            return math.inf
        return float(np.sum(p[mask] * np.log2(p[mask] / q[mask])))
    if kind == "renyi":
        if alpha is None or alpha <= 0 or alpha == 1.0:
            raise PreconditionError("renyi divergence requires alpha > 0, alpha != 1")
        if alpha > 1 and np.any((p > 0) & (q == 0)):
            return math.inf
        mask = (p > 0) & (q > 0)
        if not np.any(mask):
            return math.inf
        terms = alpha * np.log2(p[mask]) + (1.0 - alpha) * np.log2(q[mask])
        return logsumexp2(terms) / (alpha - 1.0)
    raise PreconditionError(f"unknown divergence kind {kind!r}")


def entropy(J: JointDist, of=None) -> float:
    """Shannon entropy H(S) in bits; S defaults to all variables."""
    sub = J if of is None else marginal(J, of)
    p = sub.pmf
    mask = p > 0
    return float(-(p[mask] * np.log2(p[mask])).sum())


def mutual_information(J: JointDist, a, b, given=None) -> float:
    """I(A; B) or I(A; B | C) in bits; A and B must be disjoint."""
    a = _resolve_names(J, a)
    b = _resolve_names(J, b)
    if set(a) & set(b):
        raise PreconditionError("queried variable sets must be disjoint")
    if given is None:
        return entropy(J, a) + entropy(J, b) - entropy(J, a + b)
    c = _resolve_names(J, given)
    if set(c) & (set(a) | set(b)):
        raise PreconditionError("conditioning variables must be disjoint from A and B")
    return (
        entropy(J, a + c)
        + entropy(J, b + c)
        - entropy(J, a + b + c)
        - entropy(J, c)
    )


# ---------------------------------------------------------------------------
# JSON interchange

# {"variables": [{"name": "X1", "symbols": ["0","1"]}, ...],
#  "pmf": [...row-major...], "eve": "Z"}   (eve optional)


def dist_from_json(obj: Mapping) -> JointDist:
    try:
        vars = tuple(
            (v["name"], Alphabet(tuple(v["symbols"]))) for v in obj["variables"]
        )
        pmf = obj["pmf"]
    except (KeyError, TypeError) as exc:
        raise PreconditionError(f"malformed distribution JSON: {exc}") from None
    return JointDist(vars, pmf, eve=obj.get("eve"))


def dist_to_json(J: JointDist) -> dict:
    out = {
        "variables": [{"name": n, "symbols": list(a.symbols)} for n, a in J.vars],
        "pmf": [float(x) for x in J.pmf],
    }
    if J.eve is not None:
        out["eve"] = J.eve
    return out


def load_dist(path) -> JointDist:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PreconditionError(f"malformed JSON in {path}: {exc}") from None
    return dist_from_json(obj)


def save_dist(J: JointDist, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dist_to_json(J), fh, sort_keys=True)
