"""Set partitions, non-crossing partitions and the constrained classes used by
the diagram formulas.

Elements of the ground set are ``1..n``.  A partition is stored as a tuple of
sorted blocks, the blocks ordered by their least element, so that equal
partitions compare equal.

The constrained classes all live on ``[m*q]`` together with the block
partition ``pi* = q x ... x q`` (``m`` consecutive intervals of length ``q``):

========================  ==================================================
class                     members
========================  ==================================================
``NC``                    non-crossing, respects and connects ``pi*``
``NC0``                   non-crossing, respects ``pi*``
``NC2``, ``NC_GE2``       ``NC`` with all blocks of size 2 / at least 2
``NC0_2``, ``NC0_GE2``    ``NC0`` with all blocks of size 2 / at least 2
``P_CONNECTING_RESPECTING``      any partition, respects and connects
``P_GE2_CONNECTING_RESPECTING``  the same with no singletons
``P_RESPECTING``                 any partition that respects ``pi*``
========================  ==================================================
"""
from __future__ import annotations

import enum
import functools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import CapExceededError, SizeMismatchError

DEFAULT_CAP = 14  # classes drawn from the full lattice (Bell growth)
NC_CAP = 24  # non-crossing classes, pruned during growth


@dataclass(frozen=True)
class SetPartition:
    """A partition of ``{1, ..., n}``.

    Use :meth:`from_blocks` to build one from arbitrary iterables; the
    constructor assumes the blocks are already canonical.
    """

    n: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("ground set must be non-empty")
        seen = sorted(x for b in self.blocks for x in b)
        if seen != list(range(1, self.n + 1)):
            raise ValueError(f"blocks {self.blocks} do not partition [1..{self.n}]")
        if any(len(b) == 0 for b in self.blocks):
            raise ValueError("empty block")

    @classmethod
    def _trusted(cls, n: int, blocks: tuple[tuple[int, ...], ...]) -> "SetPartition":
        # canonical input from internal callers; skips validation
        obj = object.__new__(cls)
        object.__setattr__(obj, "n", n)
        object.__setattr__(obj, "blocks", blocks)
        return obj

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], n: int | None = None) -> "SetPartition":
        bl = [tuple(sorted(b)) for b in blocks]
        bl = [b for b in bl if b]
        bl.sort(key=lambda b: b[0])
        if n is None:
            n = max((b[-1] for b in bl), default=0)
        return cls(n, tuple(bl))

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "SetPartition":
        """Build from a label per element (element ``i+1`` gets ``labels[i]``)."""
        groups: dict = {}
        for i, lab in enumerate(labels):
            groups.setdefault(lab, []).append(i + 1)
        # insertion order of first occurrences is already least-element order
        return cls._trusted(len(labels), tuple(tuple(g) for g in groups.values()))

    @classmethod
    def finest(cls, n: int) -> "SetPartition":
        return cls(n, tuple((i,) for i in range(1, n + 1)))

    @classmethod
    def coarsest(cls, n: int) -> "SetPartition":
        return cls(n, (tuple(range(1, n + 1)),))

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def labels(self) -> list[int]:
        """Block index (0-based, least-element order) of each element."""
        return list(self._labels)

    @functools.cached_property
    def _labels(self) -> tuple[int, ...]:
        lab = [0] * self.n
        for k, b in enumerate(self.blocks):
            for x in b:
                lab[x - 1] = k
        return tuple(lab)

    def is_finest(self) -> bool:
        return len(self.blocks) == self.n

    def is_coarsest(self) -> bool:
        return len(self.blocks) == 1

    def as_lists(self) -> list[list[int]]:
        return [list(b) for b in self.blocks]

    def __str__(self) -> str:
        return "{" + ", ".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks) + "}"


@dataclass(frozen=True)
class BlockPartition:
    """Interval partition ``n_1 x n_2 x ... x n_r`` of ``[n_1 + ... + n_r]``."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        if not self.sizes or any(s < 1 for s in self.sizes):
            raise ValueError("block sizes must be positive")

    @classmethod
    def uniform(cls, m: int, q: int) -> "BlockPartition":
        return cls((q,) * m)

    @property
    def n(self) -> int:
        return sum(self.sizes)

    def owner(self) -> list[int]:
        """Interval index of each element ``1..n`` (0-based list)."""
        out = []
        for k, s in enumerate(self.sizes):
            out.extend([k] * s)
        return out

    def as_partition(self) -> SetPartition:
        blocks, start = [], 1
        for s in self.sizes:
            blocks.append(tuple(range(start, start + s)))
            start += s
        return SetPartition(self.n, tuple(blocks))


def _check_same_n(a: SetPartition, b: SetPartition | BlockPartition):
    if a.n != b.n:
        raise SizeMismatchError(f"ground sets differ: {a.n} != {b.n}")


def _crossing_bruteforce(p: SetPartition) -> bool:
    lab = p.labels()
    n = p.n
    for a in range(n):
        for b in range(a + 1, n):
            if lab[a] == lab[b]:
                continue
            for c in range(b + 1, n):
                if lab[c] != lab[a]:
                    continue
                for d in range(c + 1, n):
                    if lab[d] == lab[b]:
                        return True
    return False


def is_noncrossing(p: SetPartition) -> bool:
    """Non-crossing test by repeated removal of interval blocks.

    A partition is non-crossing iff some block is an interval of the
    remaining elements and the partition left after deleting it is again
    non-crossing.
    """
    remaining = list(range(1, p.n + 1))
    blocks = [set(b) for b in p.blocks]
    while blocks:
        pos = {x: i for i, x in enumerate(remaining)}
        for k, b in enumerate(blocks):
            idx = sorted(pos[x] for x in b)
            if idx[-1] - idx[0] == len(idx) - 1:
                remaining = [x for x in remaining if x not in b]
                del blocks[k]
                break
        else:
            return False
    return True


def meet(a: SetPartition, b: SetPartition) -> SetPartition:
    """Coarsest common refinement: non-empty pairwise block intersections."""
    _check_same_n(a, b)
    return SetPartition.from_labels(list(zip(a._labels, b._labels)))


def join_in_P(a: SetPartition, b: SetPartition) -> SetPartition:
    """Join in the lattice of all partitions (connected components of overlaps)."""
    _check_same_n(a, b)
    parent = list(range(a.n + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for part in (a, b):
        for blk in part.blocks:
            r = find(blk[0])
            for x in blk[1:]:
                parent[find(x)] = r
    return SetPartition.from_labels([find(x) for x in range(1, a.n + 1)])


def respects(s: SetPartition, bp: BlockPartition) -> bool:
    """True iff no block of ``s`` holds two elements of one interval of ``bp``."""
    _check_same_n(s, bp)
    own = bp.owner()
    for blk in s.blocks:
        hit = [own[x - 1] for x in blk]
        if len(set(hit)) != len(hit):
            return False
    return True


def connects(s: SetPartition, bp: BlockPartition) -> bool:
    """True iff the graph on the intervals of ``bp`` linked by ``s`` is connected."""
    _check_same_n(s, bp)
    own = bp.owner()
    r = len(bp.sizes)
    parent = list(range(r))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for blk in s.blocks:
        first = find(own[blk[0] - 1])
        for x in blk[1:]:
            parent[find(own[x - 1])] = first
    return len({find(i) for i in range(r)}) == 1


class PartitionClass(enum.Enum):
    NC = "nc"
    NC0 = "nc0"
    NC2 = "nc2"
    NC_GE2 = "ncge2"
    NC0_2 = "nc02"
    NC0_GE2 = "nc0ge2"
    P_CONNECTING_RESPECTING = "pcr"
    P_GE2_CONNECTING_RESPECTING = "pcrge2"
    P_RESPECTING = "pr"

    @classmethod
    def parse(cls, name: "str | PartitionClass") -> "PartitionClass":
        if isinstance(name, cls):
            return name
        key = str(name).lower().replace("_", "").replace("-", "")
        aliases = {
            "nc": cls.NC, "nc0": cls.NC0, "nc2": cls.NC2, "ncge2": cls.NC_GE2,
            "nc02": cls.NC0_2, "nc0ge2": cls.NC0_GE2,
            "pcr": cls.P_CONNECTING_RESPECTING,
            "pconnectingrespecting": cls.P_CONNECTING_RESPECTING,
            "pcrge2": cls.P_GE2_CONNECTING_RESPECTING,
            "pge2connectingrespecting": cls.P_GE2_CONNECTING_RESPECTING,
            "pr": cls.P_RESPECTING, "prespecting": cls.P_RESPECTING,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown partition class {name!r}") from None

    @property
    def noncrossing(self) -> bool:
        return self.value.startswith("nc")

    @property
    def connecting(self) -> bool:
        return self in (PartitionClass.NC, PartitionClass.NC2, PartitionClass.NC_GE2,
                        PartitionClass.P_CONNECTING_RESPECTING,
                        PartitionClass.P_GE2_CONNECTING_RESPECTING)

    @property
    def size_rule(self) -> str | None:
        if self in (PartitionClass.NC2, PartitionClass.NC0_2):
            return "eq2"
        if self in (PartitionClass.NC_GE2, PartitionClass.NC0_GE2,
                    PartitionClass.P_GE2_CONNECTING_RESPECTING):
            return "ge2"
        return None


def class_predicate(s: SetPartition, m: int, q: int, cls: PartitionClass) -> bool:
    """Membership test straight from the class definition (used as a brute-force reference)."""
    cls = PartitionClass.parse(cls)
    pistar = _pistar(m, q)
    rule = cls.size_rule
    if rule == "eq2" and any(len(b) != 2 for b in s.blocks):
        return False
    if rule == "ge2" and any(len(b) < 2 for b in s.blocks):
        return False
    if not meet(s, pistar).is_finest():
        return False
    if cls.connecting and not join_in_P(s, pistar).is_coarsest():
        return False
    if cls.noncrossing and not is_noncrossing(s):
        return False
    return True


@functools.lru_cache(maxsize=None)
def _pistar(m: int, q: int) -> SetPartition:
    return BlockPartition.uniform(m, q).as_partition()


def all_partitions(n: int) -> Iterator[SetPartition]:
    """Every partition of ``[n]``, in restricted-growth-string order."""
    if n < 1:
        return
    labels = [0] * n

    def rec(i, nb):
        if i == n:
            yield SetPartition.from_labels(labels)
            return
        for k in range(nb + 1):
            labels[i] = k
            yield from rec(i + 1, max(nb, k + 1))

    yield from rec(1, 1)


def _grow(m: int, q: int, cls: PartitionClass) -> Iterator[tuple[tuple[int, ...], ...]]:
    """Depth-first growth over elements 1..mq with incremental pruning.

    Each element joins an existing block (lowest block index first) or opens
    a new one, which yields restricted-growth-string order.  For the
    non-crossing classes only blocks on the open stack may be extended, and
    extending a block closes every block opened after its last element.
    """
    n = m * q
    rule = cls.size_rule
    nc = cls.noncrossing
    blocks: list[list[int]] = []
    # NC: open blocks in stack order; all-partitions: every block stays open
    stack: list[int] = []
    singles = [0]  # current number of singleton blocks

    def owner(x):
        return (x - 1) // q

    def rec(e):
        if e > n:
            if rule == "ge2" and singles[0]:
                return
            if rule == "eq2" and any(len(b) != 2 for b in blocks):
                return
            yield tuple(tuple(b) for b in blocks)
            return
        remaining = n - e + 1
        # every singleton still needs a partner from the remaining elements
        if rule is not None and singles[0] > remaining:
            return
        pe = owner(e)
        if nc:
            candidates = sorted(range(len(stack)), key=lambda pos: stack[pos])
        else:
            candidates = range(len(blocks))
        for c in candidates:
            b = stack[c] if nc else c
            blk = blocks[b]
            if owner(blk[-1]) == pe:
                continue
            if rule == "eq2" and len(blk) >= 2:
                continue
            if nc:
                closed = stack[c + 1:]
                if rule is not None and any(len(blocks[x]) < 2 for x in closed):
                    continue
            was_single = len(blk) == 1
            blk.append(e)
            if was_single:
                singles[0] -= 1
            if nc:
                del stack[c + 1:]
            yield from rec(e + 1)
            if nc:
                stack.extend(closed)
            if was_single:
                singles[0] += 1
            blk.pop()
        blocks.append([e])
        singles[0] += 1
        if nc:
            stack.append(len(blocks) - 1)
        yield from rec(e + 1)
        if nc:
            stack.pop()
        singles[0] -= 1
        blocks.pop()

    yield from rec(1)


def enumerate_class(m: int, q: int, cls: "PartitionClass | str", cap: int | None = None) -> Iterator[SetPartition]:
    """Yield the members of a constrained partition class of ``[m*q]``.

    Parameters
    ----------
    m, q : int
        Number of copies and their order; ``pi* = q x ... x q`` (``m`` times).
    cls : PartitionClass or str
        Class selector, see the module docstring.
    cap : int, optional
        Largest admissible ``m*q``; defaults to :func:`default_cap`.

    Raises
    ------
    CapExceededError
        If ``m*q > cap``.
    """
    cls = PartitionClass.parse(cls)
    if cap is None:
        cap = default_cap(cls)
    if m < 1 or q < 1:
        raise ValueError("m and q must be positive")
    if m * q > cap:
        raise CapExceededError(f"m*q = {m * q} exceeds enumeration cap {cap}")
    bp = BlockPartition.uniform(m, q)
    n = m * q
    for blocks in _grow(m, q, cls):
        s = SetPartition._trusted(n, blocks)
        if cls.connecting and not connects(s, bp):
            continue
        yield s


def default_cap(cls) -> int:
    return NC_CAP if PartitionClass.parse(cls).noncrossing else DEFAULT_CAP


@functools.lru_cache(maxsize=None)
def partition_class(m: int, q: int, cls: PartitionClass, cap: int | None = None) -> tuple[SetPartition, ...]:
    """Memoized tuple form of :func:`enumerate_class`."""
    return tuple(enumerate_class(m, q, cls, cap=cap))


def count_class(m: int, q: int, cls, cap: int | None = None) -> int:
    return len(partition_class(m, q, PartitionClass.parse(cls), cap))


def catalan(n: int) -> int:
    if n < 0:
        raise ValueError("n must be non-negative")
    return math.comb(2 * n, n) // (n + 1)


def riordan_by_blocks(m: int, j: int) -> int:
    """Number of non-crossing partitions of ``[m]`` with ``j`` blocks, none a singleton."""
    if m < 0 or j < 0:
        raise ValueError("arguments must be non-negative")
    if m == 0:
        return 1 if j == 0 else 0
    if j == 0 or 2 * j > m:
        return 0
    return math.comb(m + 1, j) * math.comb(m - j - 1, j - 1) // (m + 1)


def riordan(m: int) -> int:
    """Number of non-crossing partitions of ``[m]`` without singletons (``R_0 = 1``)."""
    return sum(riordan_by_blocks(m, j) for j in range(m // 2 + 1))


def write_jsonl(partitions: Iterable[SetPartition], fh) -> int:
    """Write one partition per line as a JSON array of blocks; return the count."""
    count = 0
    for p in partitions:
        fh.write(json.dumps(p.as_lists()) + "\n")
        count += 1
    return count


def read_jsonl(fh) -> list[SetPartition]:
    return [SetPartition.from_blocks(json.loads(line)) for line in fh if line.strip()]
