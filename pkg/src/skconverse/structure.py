"""Structural statistics of bivariate distributions and set partitions.

mcf labels the connected components of the bipartite support graph: the
finest random variable computable with probability 1 from either argument
alone.  mss groups symbols whose conditional rows agree, i.e. the coarsest
function of the conditioning variable through which it influences the
target.  Partitions of the party set are enumerated via restricted growth
strings, which gives a canonical, allocation-light order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import PreconditionError
from .probcore import Alphabet, JointDist, marginal


@dataclass(frozen=True)
class Partition:
    """Partition of the party set {1..m} into disjoint nonempty blocks."""

    blocks: tuple[frozenset, ...]
    m: int

    def __post_init__(self) -> None:
        blocks = tuple(
            sorted((frozenset(int(i) for i in b) for b in self.blocks), key=min)
        )
        object.__setattr__(self, "blocks", blocks)
        members = sorted(i for b in blocks for i in b)
        if members != list(range(1, self.m + 1)):
            raise PreconditionError(
                f"blocks must partition {{1..{self.m}}}, got {members}"
            )
        if any(not b for b in blocks):
            raise PreconditionError("partition blocks must be nonempty")

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    def __str__(self) -> str:
        return "|".join(",".join(str(i) for i in sorted(b)) for b in self.blocks)

    @classmethod
    def parse(cls, text: str, m: int) -> "Partition":
        """Parse "1,2|3" style block lists."""
        try:
            blocks = [
                frozenset(int(tok) for tok in part.split(","))
                for part in text.split("|")
            ]
        except ValueError:
            raise PreconditionError(f"cannot parse partition {text!r}") from None
        return cls(tuple(blocks), m)


def _rgs(m: int) -> Iterator[tuple[int, ...]]:
    """Restricted growth strings of length m, lexicographic order."""
    a = [0] * m

    def rec(i: int, top: int):
        if i == m:
            yield tuple(a)
            return
        for v in range(top + 2):
            a[i] = v
            yield from rec(i + 1, max(top, v))

    yield from rec(1, 0) if m > 1 else iter([(0,)])


def enum_partitions(m: int, min_blocks: int = 2) -> list[Partition]:
    """All set partitions of {1..m} with at least ``min_blocks`` blocks.

    Canonical order (restricted-growth-string lexicographic); for
    min_blocks=2 the count is Bell(m) - 1.
    """
    if not 2 <= m <= 12:
        raise PreconditionError("party count must lie in [2, 12]")
    out = []
    for labels in _rgs(m):
        k = max(labels) + 1
        if k < min_blocks:
            continue
        blocks = [set() for _ in range(k)]
        for party, lab in enumerate(labels, start=1):
            blocks[lab].add(party)
        out.append(Partition(tuple(frozenset(b) for b in blocks), m))
    return out


@dataclass(frozen=True)
class Labeling:
    """Total label assignment for one variable's symbols.

    Labels are contiguous integers from 0.  Symbols outside the support
    all share one distinguished extra label (recorded separately) so the
    assignment stays total.
    """

    var: str
    alphabet: Alphabet
    labels: tuple[int, ...]
    num_labels: int
    unsupported_label: int | None = None

    def label_of(self, symbol: str) -> int:
        return self.labels[self.alphabet.index(symbol)]

    def label_alphabet(self) -> Alphabet:
        return Alphabet(tuple(str(i) for i in range(self.num_labels)))

    def as_table(self) -> dict:
        return {s: int(l) for s, l in zip(self.alphabet.symbols, self.labels)}


def _finalize_labels(var, alphabet, raw: list[int | None]) -> Labeling:
    """Renumber in order of first appearance; unsupported symbols last."""
    remap: dict[int, int] = {}
    out = []
    for lab in raw:
        if lab is None:
            out.append(None)
            continue
        if lab not in remap:
            remap[lab] = len(remap)
        out.append(remap[lab])
    k = len(remap)
    unsupported = None
    if any(l is None for l in out):
        unsupported = k
        out = [unsupported if l is None else l for l in out]
        k += 1
    return Labeling(var, alphabet, tuple(out), k, unsupported)


def mcf(J: JointDist, v1: str, v2: str) -> tuple[Labeling, Labeling]:
    """Maximum common function of two variables.

    Components of the bipartite graph on the support of their joint
    marginal; the two labelings agree with probability 1 and are maximal
    among common functions.
    """
    if v1 == v2:
        raise PreconditionError("mcf needs two distinct variables")
    sub = marginal(J, [v1, v2])
    arr = np.transpose(sub.array(), (sub.axis(v1), sub.axis(v2)))
    n1, n2 = arr.shape
    parent = list(range(n1 + n2))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in zip(*np.nonzero(arr > 0)):
        a, b = find(int(i)), find(int(n1 + j))
        if a != b:
            parent[max(a, b)] = min(a, b)

    sup1 = arr.sum(axis=1) > 0
    sup2 = arr.sum(axis=0) > 0
    # shared renumbering by first appearance scanning v1 then v2 symbols
    remap: dict[int, int] = {}
    raw1: list[int | None] = []
    for i in range(n1):
        if not sup1[i]:
            raw1.append(None)
            continue
        root = find(i)
        remap.setdefault(root, len(remap))
        raw1.append(remap[root])
    raw2: list[int | None] = []
    for j in range(n2):
        if not sup2[j]:
            raw2.append(None)
            continue
        root = find(n1 + j)
        remap.setdefault(root, len(remap))
        raw2.append(remap[root])
    k = len(remap)
    unsup = k if (any(l is None for l in raw1) or any(l is None for l in raw2)) else None
    total = k + (1 if unsup is not None else 0)
    lab1 = Labeling(
        v1,
        J.alphabet(v1),
        tuple(unsup if l is None else l for l in raw1),
        total,
        unsup if any(l is None for l in raw1) else None,
    )
    lab2 = Labeling(
        v2,
        J.alphabet(v2),
        tuple(unsup if l is None else l for l in raw2),
        total,
        unsup if any(l is None for l in raw2) else None,
    )
    return lab1, lab2


def mss(J: JointDist, given: str, target: str, tol: float = 1e-9) -> Labeling:
    """Minimum sufficient statistic of ``given`` for ``target``.

    Groups given-symbols whose conditional target rows agree within
    L-infinity ``tol``, closed transitively; tol=0 demands exact equality.
    Float-derived inputs rarely tie exactly, hence the nonzero default.
    """
    if given == target:
        raise PreconditionError("mss needs two distinct variables")
    if tol < 0:
        raise PreconditionError("tolerance must be nonnegative")
    sub = marginal(J, [given, target])
    arr = np.transpose(sub.array(), (sub.axis(given), sub.axis(target)))
    masses = arr.sum(axis=1)
    n = arr.shape[0]
    rows = np.zeros_like(arr)
    pos = masses > 0
    rows[pos] = arr[pos] / masses[pos, None]

    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    sup = [i for i in range(n) if pos[i]]
    for ai in range(len(sup)):
        for bi in range(ai + 1, len(sup)):
            i, j = sup[ai], sup[bi]
            if np.max(np.abs(rows[i] - rows[j])) <= tol:
                a, b = find(i), find(j)
                if a != b:
                    parent[max(a, b)] = min(a, b)

    raw: list[int | None] = [find(i) if pos[i] else None for i in range(n)]
    return _finalize_labels(given, J.alphabet(given), raw)


def attach_label(J: JointDist, labeling: Labeling, name: str) -> JointDist:
    """Append the label of ``labeling.var`` as a new deterministic variable."""
    if name in J.var_names:
        raise PreconditionError(f"variable name {name!r} already present")
    axis = J.axis(labeling.var)
    arr = J.array()
    k = labeling.num_labels
    out_shape = arr.shape + (k,)
    out = np.zeros(out_shape)
    labels = np.asarray(labeling.labels)
    for lab in range(k):
        sel = [slice(None)] * arr.ndim
        take = np.nonzero(labels == lab)[0]
        if take.size == 0:
            continue
        sel[axis] = take
        mask = np.zeros(arr.shape)
        mask_sel = tuple(sel)
        mask[mask_sel] = arr[mask_sel]
        out[..., lab] = mask
    new_vars = J.vars + ((name, labeling.label_alphabet()),)
    return JointDist(new_vars, out.reshape(-1), eve=J.eve)
