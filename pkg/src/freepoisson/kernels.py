"""Elementary kernels on a finite family of disjoint boxes.

An order-``q`` kernel is a finite linear combination of indicator tensors
``1_{A_{i1}} x ... x 1_{A_iq}`` over the cells of a :class:`CellFamily`.  It is
stored sparsely as integer index rows plus complex coefficients.  Every
integral of such kernels (inner products, contractions, partition-tensor
integrals) is then a finite sum weighted by cell measures, which is what this
module evaluates.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import tensor
from ._numeric import csum
from .errors import ArityError, CapExceededError, FamilyMismatchError, HypothesisError
from .partitions import PartitionClass, SetPartition, default_cap, partition_class

FORMAT_VERSION = 1
# dense tables are used for partition integrals while ncells**q stays below this
DENSE_LIMIT = 1 << 14


class CellFamily:
    """Pairwise disjoint, bounded, axis-aligned boxes in ``R^d``.

    ``lows`` and ``highs`` have shape ``(ncells, d)``.
    """

    def __init__(self, lows, highs, check: bool = True):
        lows = np.atleast_2d(np.asarray(lows, dtype=float))
        highs = np.atleast_2d(np.asarray(highs, dtype=float))
        if lows.shape != highs.shape:
            raise ValueError("lows and highs must have the same shape")
        self.lows = lows
        self.highs = highs
        self.lows.flags.writeable = False
        self.highs.flags.writeable = False
        self.measures = np.prod(highs - lows, axis=1)
        self.measures.flags.writeable = False
        if check:
            self._validate()

    @property
    def dim(self) -> int:
        return self.lows.shape[1]

    def __len__(self) -> int:
        return self.lows.shape[0]

    @property
    def centers(self) -> np.ndarray:
        return (self.lows + self.highs) / 2

    def _validate(self):
        if not np.all(np.isfinite(self.lows)) or not np.all(np.isfinite(self.highs)):
            raise ValueError("cells must be bounded")
        if np.any(self.highs <= self.lows):
            raise ValueError("cells must have strictly positive measure")
        # sweep along the first axis; only boxes whose x-ranges overlap can collide
        order = np.argsort(self.lows[:, 0], kind="stable")
        lo, hi = self.lows[order], self.highs[order]
        reach = np.searchsorted(lo[:, 0], hi[:, 0], side="left")
        for i in range(len(order)):
            if reach[i] <= i + 1:
                continue
            others = slice(i + 1, reach[i])
            overlap = np.all(np.maximum(lo[others], lo[i]) < np.minimum(hi[others], hi[i]), axis=1)
            if overlap.any():
                j = order[i + 1 + int(np.argmax(overlap))]
                raise ValueError(f"cells {order[i]} and {j} overlap")

    @classmethod
    def from_measures(cls, measures: Sequence[float]) -> "CellFamily":
        """Consecutive intervals on the line with the given lengths."""
        mus = np.asarray(measures, dtype=float)
        if np.any(mus <= 0):
            raise ValueError("measures must be positive")
        edges = np.concatenate([[0.0], np.cumsum(mus)])
        return cls(edges[:-1, None], edges[1:, None])

    @classmethod
    def unit(cls, ncells: int) -> "CellFamily":
        return cls.from_measures(np.ones(ncells))

    @classmethod
    def grid(cls, low: float, high: float, step: float, dim: int = 1) -> "CellFamily":
        """Tile ``[low, high]^dim`` by cubes of side ``step`` (row-major order)."""
        per_axis = int(round((high - low) / step))
        if per_axis < 1 or not math.isclose(per_axis * step, high - low, rel_tol=1e-9):
            raise ValueError("step must divide the side length")
        ticks = low + step * np.arange(per_axis)
        mesh = np.stack(np.meshgrid(*([ticks] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
        return cls(mesh, mesh + step, check=False)

    def same_as(self, other: "CellFamily") -> bool:
        return self is other or (
            self.lows.shape == other.lows.shape
            and np.array_equal(self.lows, other.lows)
            and np.array_equal(self.highs, other.highs)
        )

    def to_json(self) -> dict:
        return {"dim": self.dim,
                "boxes": [list(lo) + list(hi) for lo, hi in zip(self.lows.tolist(), self.highs.tolist())]}

    @classmethod
    def from_json(cls, data: Mapping) -> "CellFamily":
        d = int(data["dim"])
        boxes = np.asarray(data["boxes"], dtype=float).reshape(-1, 2 * d)
        return cls(boxes[:, :d], boxes[:, d:])


def _merge(coords: np.ndarray, vals: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray]:
    vals = np.asarray(vals, dtype=np.complex128).reshape(-1)
    coords = np.asarray(coords, dtype=np.int64).reshape(len(vals), q)
    if q == 0:
        total = vals.sum() if len(vals) else 0.0
        if total == 0:
            return np.zeros((0, 0), np.int64), np.zeros(0, np.complex128)
        return np.zeros((1, 0), np.int64), np.array([total], np.complex128)
    if len(vals):
        coords, inv = np.unique(coords, axis=0, return_inverse=True)
        inv = inv.ravel()
        vals = np.bincount(inv, weights=vals.real, minlength=len(coords)) + 1j * np.bincount(
            inv, weights=vals.imag, minlength=len(coords))
    keep = vals != 0
    return coords[keep], vals[keep]


@dataclass(eq=False)
class ElementaryKernel:
    """Sparse order-``q`` kernel over a cell family.

    Rows of ``coords`` are cell-index tuples, sorted lexicographically and
    unique; ``vals`` holds the matching nonzero coefficients.
    """

    family: CellFamily
    order: int
    coords: np.ndarray
    vals: np.ndarray
    _dense: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.order < 0:
            raise ArityError("order must be non-negative")
        self.coords, self.vals = _merge(self.coords, self.vals, self.order)
        if len(self.vals) and self.order and (self.coords.min() < 0 or self.coords.max() >= len(self.family)):
            raise ArityError("cell index out of range")
        self.coords.flags.writeable = False
        self.vals.flags.writeable = False

    # construction
    @classmethod
    def zero(cls, family: CellFamily, order: int) -> "ElementaryKernel":
        return cls(family, order, np.zeros((0, order), np.int64), np.zeros(0))

    @classmethod
    def scalar(cls, family: CellFamily, value: complex) -> "ElementaryKernel":
        return cls(family, 0, np.zeros((1, 0), np.int64), [value])

    @classmethod
    def indicator(cls, family: CellFamily, cells: Sequence[int], coeff: complex = 1.0) -> "ElementaryKernel":
        """``coeff * 1_{A_c1} x ... x 1_{A_cq}``."""
        return cls(family, len(cells), np.asarray([list(cells)], np.int64).reshape(1, len(cells)), [coeff])

    @classmethod
    def from_dict(cls, family: CellFamily, order: int, table: Mapping[tuple, complex]) -> "ElementaryKernel":
        keys = list(table)
        return cls(family, order, np.asarray(keys, np.int64).reshape(len(keys), order),
                   [table[k] for k in keys])

    @classmethod
    def from_dense(cls, family: CellFamily, array) -> "ElementaryKernel":
        array = np.asarray(array, dtype=complex)
        idx = np.argwhere(array != 0)
        return cls(family, array.ndim, idx, array[tuple(idx.T)])

    # inspection
    @property
    def nnz(self) -> int:
        return len(self.vals)

    @property
    def purely_nondiagonal(self) -> bool:
        if self.order < 2 or not self.nnz:
            return True
        s = np.sort(self.coords, axis=1)
        return not np.any(s[:, 1:] == s[:, :-1])

    @property
    def is_zero(self) -> bool:
        return self.nnz == 0

    def value(self) -> complex:
        """The scalar of an order-0 kernel."""
        if self.order:
            raise ArityError("value() needs an order-0 kernel")
        return complex(self.vals[0]) if self.nnz else 0j

    def as_dict(self) -> dict[tuple, complex]:
        return {tuple(int(i) for i in c): complex(v) for c, v in zip(self.coords, self.vals)}

    def dense(self) -> np.ndarray:
        if self._dense is None:
            size = len(self.family) ** self.order
            if size > 1 << 24:
                raise CapExceededError(f"dense table of {size} entries refused")
            arr = np.zeros((len(self.family),) * self.order, dtype=complex)
            if self.nnz:
                arr[tuple(self.coords.T)] = self.vals
            arr.flags.writeable = False
            self._dense = arr
        return self._dense

    # algebra
    def _check_compat(self, other: "ElementaryKernel"):
        if not self.family.same_as(other.family):
            raise FamilyMismatchError("kernels live on different cell families")

    def __add__(self, other: "ElementaryKernel") -> "ElementaryKernel":
        self._check_compat(other)
        if self.order != other.order:
            raise ArityError("cannot add kernels of different orders")
        return ElementaryKernel(self.family, self.order, np.concatenate([self.coords, other.coords]),
                                np.concatenate([self.vals, other.vals]))

    def __neg__(self) -> "ElementaryKernel":
        return ElementaryKernel(self.family, self.order, self.coords, -self.vals)

    def __sub__(self, other: "ElementaryKernel") -> "ElementaryKernel":
        return self + (-other)

    def __mul__(self, c: complex) -> "ElementaryKernel":
        return ElementaryKernel(self.family, self.order, self.coords, self.vals * complex(c))

    __rmul__ = __mul__

    def conj(self) -> "ElementaryKernel":
        return ElementaryKernel(self.family, self.order, self.coords, self.vals.conj())

    def abs(self) -> "ElementaryKernel":
        return ElementaryKernel(self.family, self.order, self.coords, np.abs(self.vals))

    def permute(self, perm: Sequence[int]) -> "ElementaryKernel":
        """Kernel ``g(t_1..t_q) = f(t_perm[0], ..., t_perm[q-1])``."""
        perm = list(perm)
        if sorted(perm) != list(range(self.order)):
            raise ArityError("not a permutation of the slots")
        inv = np.argsort(perm)
        return ElementaryKernel(self.family, self.order, self.coords[:, inv], self.vals)

    def symmetrize(self) -> "ElementaryKernel":
        parts = [self.permute(p) for p in itertools.permutations(range(self.order))]
        out = parts[0]
        for p in parts[1:]:
            out = out + p
        return out * (1.0 / len(parts))

    def allclose(self, other: "ElementaryKernel", rel: float = 1e-10, abs_: float = 1e-12) -> bool:
        self._check_compat(other)
        if self.order != other.order:
            return False
        diff = self - other
        if not diff.nnz:
            return True
        scale = max(np.abs(self.vals).max(initial=0.0), np.abs(other.vals).max(initial=0.0))
        return float(np.abs(diff.vals).max()) <= max(abs_, rel * scale)

    # serialization
    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "order": self.order,
            "cells": self.family.to_json(),
            "coeffs": [[*map(int, c), float(v.real), float(v.imag)] for c, v in zip(self.coords, self.vals)],
        }

    @classmethod
    def from_json(cls, data: Mapping, family: CellFamily | None = None) -> "ElementaryKernel":
        if int(data.get("format_version", FORMAT_VERSION)) != FORMAT_VERSION:
            raise ValueError(f"unsupported kernel format_version {data.get('format_version')}")
        q = int(data["order"])
        fam = family if family is not None else CellFamily.from_json(data["cells"])
        rows = data.get("coeffs", [])
        for r in rows:
            if len(r) not in (q + 1, q + 2):
                raise ValueError(f"coefficient row {r} does not match order {q}")
        coords = np.asarray([r[:q] for r in rows], dtype=np.int64).reshape(len(rows), q)
        vals = np.asarray([complex(r[q], r[q + 1] if len(r) > q + 1 else 0.0) for r in rows], dtype=complex)
        return cls(fam, q, coords, vals)

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "ElementaryKernel":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def adjoint(f: ElementaryKernel) -> ElementaryKernel:
    """Conjugate and reverse the argument order."""
    return ElementaryKernel(f.family, f.order, f.coords[:, ::-1], f.vals.conj())


def is_mirror_symmetric(f: ElementaryKernel, rel: float = 1e-12) -> bool:
    return f.allclose(adjoint(f), rel=rel, abs_=0.0)


def is_fully_symmetric(f: ElementaryKernel, rel: float = 1e-12) -> bool:
    return all(f.allclose(f.permute(p), rel=rel, abs_=0.0)
               for p in itertools.permutations(range(f.order)))


def star_contraction(f: ElementaryKernel, g: ElementaryKernel, k: int, j: int) -> ElementaryKernel:
    """``f star_k^j g``: identify ``k`` argument pairs, integrate ``j`` of them.

    The last ``k`` slots of ``f`` are paired with the first ``k`` slots of ``g``
    in mirror order (last of ``f`` with first of ``g``).  The innermost ``j``
    pairs are integrated against the cell measure; the outer ``k - j`` pairs
    share a variable that stays in the result.  Result slots: free slots of
    ``f``, shared slots, free slots of ``g``; order ``m + n - k - j``.
    """
    f._check_compat(g)
    m, n = f.order, g.order
    if not (0 <= j <= k <= min(m, n)):
        raise ArityError(f"need 0 <= j <= k <= min(m, n); got k={k}, j={j}, m={m}, n={n}")
    kept = k - j
    out_order = m + n - k - j
    # variable labels: f slots then g slots, paired slots share a label
    f_vars = list(range(m))
    g_vars = list(range(m, m + n))
    for p in range(k):
        g_vars[k - 1 - p] = f_vars[m - k + p]
    fa = tensor.Factor(tuple(f_vars), f.coords, f.vals)
    ga = tensor.Factor(tuple(g_vars), g.coords, g.vals)
    joined = tensor._join(fa, ga)
    vals = joined.vals
    mu = f.family.measures
    integrated = [f_vars[m - k + p] for p in range(kept, k)]
    for v in integrated:
        vals = vals * mu[joined.coords[:, joined.vars.index(v)]]
    out_vars = f_vars[: m - k] + f_vars[m - k: m - k + kept] + g_vars[k:]
    cols = [joined.vars.index(v) for v in out_vars]
    coords = joined.coords[:, cols] if len(vals) else np.zeros((0, out_order), np.int64)
    return ElementaryKernel(f.family, out_order, coords, vals)


def arc_contraction(f: ElementaryKernel, g: ElementaryKernel, k: int) -> ElementaryKernel:
    return star_contraction(f, g, k, k)


def tensor_product(f: ElementaryKernel, g: ElementaryKernel) -> ElementaryKernel:
    return star_contraction(f, g, 0, 0)


def l2_inner(f: ElementaryKernel, g: ElementaryKernel) -> complex:
    """``<f, g> = sum c_f conj(c_g) prod mu``."""
    f._check_compat(g)
    if f.order != g.order:
        raise ArityError("inner product needs equal orders")
    if f.order == 0:
        return f.value() * np.conj(g.value())
    return star_contraction(f, adjoint(g), f.order, f.order).value()


def l2_norm(f: ElementaryKernel) -> float:
    mu = f.family.measures
    w = np.prod(mu[f.coords], axis=1) if f.order else np.ones(f.nnz)
    return math.sqrt(math.fsum((np.abs(f.vals) ** 2 * w).tolist()))


def l4_norm(f: ElementaryKernel) -> float:
    mu = f.family.measures
    w = np.prod(mu[f.coords], axis=1) if f.order else np.ones(f.nnz)
    return math.fsum((np.abs(f.vals) ** 4 * w).tolist()) ** 0.25


def _block_vars(s: SetPartition, m: int, q: int) -> list[tuple[int, ...]]:
    labels = s._labels
    return [tuple(labels[i * q:(i + 1) * q]) for i in range(m)]


def partition_tensor_integral(f: ElementaryKernel, s: SetPartition, m: int,
                              absolute: bool = False) -> complex:
    """Integral of ``f_sigma``: ``m`` copies of ``f`` on consecutive slots of
    ``[m*q]``, with the variables of each block of ``s`` identified.

    Evaluated exactly as the sum over one cell per block of the product of the
    ``m`` coefficients times the product of the block cells' measures.
    ``absolute=True`` uses ``|f|`` instead of ``f``.
    """
    q = f.order
    if s.n != m * q:
        raise ArityError(f"partition of [{s.n}] does not match m*q = {m * q}")
    vals = np.abs(f.vals) if absolute else f.vals
    if q == 0:
        return complex((vals[0] if f.nnz else 0.0) ** m)
    if not f.nnz:
        return 0j
    groups = _block_vars(s, m, q)
    mu = f.family.measures
    if len(f.family) ** q <= DENSE_LIMIT and len(s) <= 52:
        table = np.abs(f.dense()) if absolute else f.dense()
        return tensor.contract_dense([(table, g) for g in groups], mu, len(s))
    factors = [tensor.Factor(g, f.coords, vals) for g in groups]
    return tensor.contract_sparse(factors, mu, len(s))


def tensor_integral_sum(f: ElementaryKernel, m: int, cls, cap: int | None = None,
                        absolute: bool = False) -> tuple[complex, int]:
    """Sum of :func:`partition_tensor_integral` over a partition class; returns (value, #terms)."""
    parts = partition_class(m, f.order, PartitionClass.parse(cls), cap)
    terms = [partition_tensor_integral(f, s, m, absolute=absolute) for s in parts]
    return csum(terms), len(parts)


@dataclass
class TamednessReport:
    m_max: int
    table: dict = field(default_factory=dict)  # (m, sigma) -> max over the sequence
    per_kernel: list = field(default_factory=list)  # list of {(m, sigma): value}
    hypotheses: dict | None = None

    @property
    def max_bound(self) -> float:
        return max(self.table.values(), default=0.0)

    @property
    def hypotheses_hold(self) -> bool | None:
        if self.hypotheses is None:
            return None
        return all(v for k, v in self.hypotheses.items() if k.startswith("("))


def lemma_hypotheses(family: Sequence[ElementaryKernel], M: Sequence[float], z: Sequence[float],
                     alpha: Sequence[float], m_max: int, slope_tol: float = 1e-6) -> dict:
    """Check the sufficient tamedness conditions on a finite kernel sequence.

    (a) every support cell lies in the box ``[-z_n, z_n]^d``;
    (b) ``|f_n| <= M_n``;
    (c) support tuples have cell centers pairwise within ``alpha_n``;
    (d) ``n -> M_n^m z_n^d alpha_n^{d(m-1)}`` does not grow along the sequence
        (no log-log increase beyond ``slope_tol``) for ``q <= m <= m_max``,
        and ``alpha_n / z_n`` decreases.
    """
    if not (len(family) == len(M) == len(z) == len(alpha)):
        raise ValueError("metadata length must match the kernel sequence")
    a = b = c = True
    for f, Mn, zn, an in zip(family, M, z, alpha):
        if not f.nnz:
            continue
        cells = np.unique(f.coords)
        lo, hi = f.family.lows[cells], f.family.highs[cells]
        eps = 1e-12 * max(1.0, zn)
        a &= bool(np.all(lo >= -zn - eps) and np.all(hi <= zn + eps))
        b &= bool(np.abs(f.vals).max() <= Mn * (1 + 1e-12))
        cen = f.family.centers
        for i, jj in itertools.combinations(range(f.order), 2):
            dist = np.linalg.norm(cen[f.coords[:, i]] - cen[f.coords[:, jj]], axis=1)
            c &= bool(np.all(dist <= an * (1 + 1e-12)))
    q = family[0].order if family else 1
    d = family[0].family.dim if family else 1
    dd = True
    growth = {}
    for m in range(max(q, 2), m_max + 1):
        seq = np.array([Mn ** m * zn ** d * an ** (d * (m - 1)) for Mn, zn, an in zip(M, z, alpha)])
        logs = np.log(seq)
        steps = np.diff(logs)
        growth[m] = float(steps.max(initial=0.0))
        dd &= bool(np.all(steps <= slope_tol * np.maximum(1.0, np.abs(logs[:-1]))))
    ratio = np.asarray(alpha, float) / np.asarray(z, float)
    dd &= bool(np.all(np.diff(ratio) < 0)) if len(ratio) > 1 else True
    return {"(a) support in box": a, "(b) bounded by M_n": b, "(c) diameter within alpha_n": c,
            "(d) growth bounded": dd, "log_growth": growth}


def tamedness_bound(family: Sequence[ElementaryKernel], m_max: int, metadata: Mapping | None = None,
                    cap: int | None = None) -> TamednessReport:
    """Largest ``int |f_n|_sigma`` over the sequence for every respecting ``sigma``, ``2 <= m <= m_max``.

    ``metadata`` may carry sequences ``M``, ``z`` and ``alpha`` (one entry per
    kernel) for the sufficient-condition check, see :func:`lemma_hypotheses`.
    """
    if not family:
        raise ValueError("empty kernel sequence")
    q = family[0].order
    if any(f.order != q for f in family):
        raise ArityError("all kernels in a sequence must share the order")
    rep = TamednessReport(m_max=m_max)
    per = [dict() for _ in family]
    for m in range(2, m_max + 1):
        limit = default_cap(PartitionClass.P_RESPECTING) if cap is None else cap
        if m * q > limit:
            raise CapExceededError(f"m*q = {m * q} exceeds enumeration cap {limit}")
        for s in partition_class(m, q, PartitionClass.P_RESPECTING, cap):
            key = (m, str(s))
            vals = [abs(partition_tensor_integral(f, s, m, absolute=True)) for f in family]
            for dct, v in zip(per, vals):
                dct[key] = v
            rep.table[key] = max(vals)
    rep.per_kernel = per
    if metadata is not None:
        rep.hypotheses = lemma_hypotheses(family, metadata["M"], metadata["z"], metadata["alpha"], m_max)
    return rep


def random_kernel(family: CellFamily, order: int, rng: np.random.Generator, nnz: int | None = None,
                  nondiagonal: bool = True, complex_: bool = True, mirror: bool = False) -> ElementaryKernel:
    """Random sparse kernel with standard normal coefficients.

    ``nondiagonal`` keeps only tuples of pairwise distinct cells; ``mirror``
    returns ``(f + f*) / 2``.
    """
    ncells = len(family)
    order = int(order)
    if order == 0:
        c = rng.standard_normal() + (1j * rng.standard_normal() if complex_ and not mirror else 0)
        return ElementaryKernel.scalar(family, c)
    if nondiagonal and order > ncells:
        raise ValueError("not enough cells for a non-diagonal kernel of this order")
    if nondiagonal:
        pool = list(itertools.permutations(range(ncells), order))
    else:
        pool = list(itertools.product(range(ncells), repeat=order))
    if nnz is None:
        nnz = int(rng.integers(1, len(pool) + 1))
    pick = rng.choice(len(pool), size=min(nnz, len(pool)), replace=False)
    coords = np.asarray([pool[i] for i in sorted(pick)], np.int64).reshape(-1, order)
    vals = rng.standard_normal(len(coords))
    if complex_:
        vals = vals + 1j * rng.standard_normal(len(coords))
    f = ElementaryKernel(family, order, coords, vals)
    if mirror:
        f = (f + adjoint(f)) * 0.5
    return f


def require_nondiagonal(f: ElementaryKernel):
    from .errors import DiagonalKernelError
    if not f.purely_nondiagonal:
        raise DiagonalKernelError()


def require_mirror(f: ElementaryKernel):
    if not is_mirror_symmetric(f, rel=1e-10):
        raise HypothesisError("kernel must be mirror symmetric")
