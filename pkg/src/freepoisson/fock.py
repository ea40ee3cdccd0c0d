"""Truncated full Fock space over a cell alphabet.

A basis vector is a string of cell indices ``s_1 s_2 ... s_L`` standing for
the tensor ``1_{A_s1} x ... x 1_{A_sL}``; the empty string is the vacuum.
Inner products carry the weight ``mu(A_s1) ... mu(A_sL)`` so that cells never
need normalising.  Level ``L`` of a state is stored as a dense array of shape
``(ncells,) * L`` (first letter on the first axis) and only allocated once it
receives a contribution.

Measure operators act on a string as

* creation ``a+(A)``: prepend ``A``;
* annihilation ``a-(A)``: strip a leading ``A`` with weight ``mu(A)``, kill
  strings starting with another letter and the vacuum;
* gauge ``a0(A)``: keep strings starting with ``A``, kill the rest.

The centered free Poisson measure is ``a+ + a- + a0`` and the semicircular one
``a+ + a-``.  Multiple integrals are built from these exactly as products of
centered Charlier / Tchebycheff polynomials over runs of equal cells.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CapExceededError, DepthOverflowError, FamilyMismatchError, HypothesisError
from .kernels import (CellFamily, ElementaryKernel, adjoint, arc_contraction, l2_inner,
                      star_contraction)
from .polynomials import OrthogonalPolySpec, PolyKind, poly_coeffs

FORMAT_VERSION = 1
LEVEL_CAP = 1 << 24


class MeasureKind(enum.Enum):
    FREE_POISSON = "free_poisson"
    SEMICIRCULAR = "semicircular"

    @classmethod
    def parse(cls, name) -> "MeasureKind":
        if isinstance(name, cls):
            return name
        key = str(name).lower().replace("-", "_")
        if key in ("free_poisson", "poisson", "n", "nhat"):
            return cls.FREE_POISSON
        if key in ("semicircular", "s", "semi"):
            return cls.SEMICIRCULAR
        raise ValueError(f"unknown measure kind {name!r}")

    @property
    def has_gauge(self) -> bool:
        return self is MeasureKind.FREE_POISSON

    @property
    def poly_kind(self) -> PolyKind:
        return PolyKind.CHARLIER if self.has_gauge else PolyKind.TCHEBYCHEFF


class FockState:
    """Immutable-by-convention truncated Fock vector."""

    def __init__(self, family: CellFamily, depth: int, levels: dict[int, np.ndarray] | None = None):
        self.family = family
        self.depth = int(depth)
        self.levels: dict[int, np.ndarray] = dict(levels or {})
        for L in self.levels:
            if L > self.depth:
                raise DepthOverflowError(f"level {L} beyond depth {self.depth}")

    @classmethod
    def vacuum(cls, family: CellFamily, depth: int) -> "FockState":
        return cls(family, depth, {0: np.ones((), dtype=complex)})

    @classmethod
    def zero(cls, family: CellFamily, depth: int) -> "FockState":
        return cls(family, depth)

    @classmethod
    def from_strings(cls, family: CellFamily, depth: int, amps: Mapping[tuple, complex]) -> "FockState":
        st = cls(family, depth)
        for s, a in amps.items():
            st._level(len(s))[tuple(s)] += a
        return st

    # internals
    def _level(self, L: int) -> np.ndarray:
        if L > self.depth:
            raise DepthOverflowError(f"a creation operator would exceed truncation depth {self.depth}")
        arr = self.levels.get(L)
        if arr is None:
            n = len(self.family)
            if n ** L > LEVEL_CAP:
                raise CapExceededError(f"level {L} needs {n ** L} amplitudes (cap {LEVEL_CAP})")
            arr = np.zeros((n,) * L, dtype=complex)
            self.levels[L] = arr
        return arr

    def _compatible(self, other: "FockState"):
        if not self.family.same_as(other.family):
            raise FamilyMismatchError("states over different cell families")

    # vector space structure
    def __add__(self, other: "FockState") -> "FockState":
        self._compatible(other)
        out = FockState(self.family, max(self.depth, other.depth))
        for src in (self, other):
            for L, arr in src.levels.items():
                if L in out.levels:
                    out.levels[L] = out.levels[L] + arr
                else:
                    out.levels[L] = arr.copy()
        return out

    def __sub__(self, other: "FockState") -> "FockState":
        return self + other * -1.0

    def __mul__(self, c: complex) -> "FockState":
        return FockState(self.family, self.depth, {L: arr * c for L, arr in self.levels.items()})

    __rmul__ = __mul__

    def amplitude(self, string: Sequence[int]) -> complex:
        arr = self.levels.get(len(string))
        return 0j if arr is None else complex(arr[tuple(string)])

    @property
    def vacuum_amplitude(self) -> complex:
        return self.amplitude(())

    def inner(self, other: "FockState") -> complex:
        """``<self, other>``, linear in ``self``."""
        self._compatible(other)
        mu = self.family.measures
        total = 0j
        for L, arr in self.levels.items():
            o = other.levels.get(L)
            if o is None:
                continue
            prod = arr * o.conj()
            for _ in range(L):
                prod = np.tensordot(prod, mu, axes=([0], [0]))
            total += complex(prod)
        return total

    def norm(self) -> float:
        return math.sqrt(max(self.inner(self).real, 0.0))

    def max_abs_diff(self, other: "FockState") -> float:
        diff = self - other
        return max((float(np.abs(a).max(initial=0.0)) for a in diff.levels.values()), default=0.0)

    def max_abs(self) -> float:
        return max((float(np.abs(a).max(initial=0.0)) for a in self.levels.values()), default=0.0)

    def strings(self) -> dict[tuple, complex]:
        out = {}
        for L, arr in sorted(self.levels.items()):
            if L == 0:
                if arr != 0:
                    out[()] = complex(arr)
                continue
            for idx in zip(*np.nonzero(arr)):
                out[tuple(int(i) for i in idx)] = complex(arr[idx])
        return out

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "depth": self.depth,
            "amplitudes": {",".join(map(str, s)): [a.real, a.imag] for s, a in self.strings().items()},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    def with_depth(self, depth: int) -> "FockState":
        return FockState(self.family, depth, {L: a for L, a in self.levels.items()})


def _check_cell(v: FockState, A: int):
    if not 0 <= A < len(v.family):
        raise ValueError(f"unknown cell {A}")


def apply_creation(A: int, v: FockState) -> FockState:
    _check_cell(v, A)
    out = FockState(v.family, v.depth)
    for L, arr in v.levels.items():
        if L + 1 > v.depth:
            if np.any(arr):
                raise DepthOverflowError(f"creation beyond truncation depth {v.depth}")
            continue
        out._level(L + 1)[A] += arr
    return out


def apply_annihilation(A: int, v: FockState) -> FockState:
    _check_cell(v, A)
    out = FockState(v.family, v.depth)
    mu = v.family.measures[A]
    for L, arr in v.levels.items():
        if L >= 1:
            out._level(L - 1)[...] += mu * arr[A]
    return out


def apply_gauge(A: int, v: FockState) -> FockState:
    _check_cell(v, A)
    out = FockState(v.family, v.depth)
    for L, arr in v.levels.items():
        if L >= 1:
            out._level(L)[A] += arr[A]
    return out


def apply_measure(A: int, kind, v: FockState) -> FockState:
    """``X(A) v`` with ``X = a+ + a- (+ a0 for the free Poisson kind)``."""
    kind = MeasureKind.parse(kind)
    _check_cell(v, A)
    out = FockState(v.family, v.depth)
    mu = v.family.measures[A]
    for L, arr in v.levels.items():
        if L + 1 > v.depth:
            if np.any(arr):
                raise DepthOverflowError(f"creation beyond truncation depth {v.depth}")
        else:
            out._level(L + 1)[A] += arr
        if L >= 1:
            out._level(L - 1)[...] += mu * arr[A]
            if kind.has_gauge:
                out._level(L)[A] += arr[A]
    return out


@dataclass(frozen=True)
class MeasureOperator:
    kind: MeasureKind
    cell: int

    def __call__(self, v: FockState) -> FockState:
        return apply_measure(self.cell, self.kind, v)


def _runs(t: Sequence[int]) -> list[tuple[int, int]]:
    """Maximal runs of equal consecutive letters as (cell, length)."""
    runs = []
    for c in t:
        if runs and runs[-1][0] == c:
            runs[-1] = (c, runs[-1][1] + 1)
        else:
            runs.append((c, 1))
    return runs


def _apply_run(cell: int, length: int, kind: MeasureKind, v: FockState) -> FockState:
    if length == 1:
        return apply_measure(cell, kind, v)
    mu = float(v.family.measures[cell])
    coeffs = poly_coeffs(OrthogonalPolySpec(kind.poly_kind, mu, length))
    acc = v * complex(coeffs[-1])
    for c in reversed(coeffs[:-1]):
        acc = apply_measure(cell, kind, acc)
        if c:
            acc = acc + v * complex(c)
    return acc


def apply_multiple_integral(f: ElementaryKernel, kind, v: FockState) -> FockState:
    """``I_q(f) v``: per coefficient tuple, the product over runs ``(A, k)`` of
    ``P_k(X(A), mu(A))`` (Charlier for free Poisson, Tchebycheff for
    semicircular), applied right to left; summed with the coefficients.
    """
    kind = MeasureKind.parse(kind)
    if not f.family.same_as(v.family):
        raise FamilyMismatchError("kernel and state live on different cell families")
    if f.order == 0:
        return v * f.value()
    total = FockState(v.family, v.depth)
    # tuples sorted by their reversal so consecutive ones share suffix work
    order = sorted(range(f.nnz), key=lambda r: tuple(f.coords[r][::-1]))
    stack: list[tuple[tuple, FockState]] = []
    for r in order:
        t = tuple(int(i) for i in f.coords[r])
        runs = _runs(t)
        keys = []
        pos = len(t)
        for cell, ln in reversed(runs):
            pos -= ln
            keys.append((t[pos:], cell, ln))
        depth = 0
        while depth < min(len(stack), len(keys)) and stack[depth][0] == keys[depth][0]:
            depth += 1
        del stack[depth:]
        state = stack[-1][1] if stack else v
        for key, cell, ln in keys[depth:]:
            state = _apply_run(cell, ln, kind, state)
            stack.append((key, state))
        total = total + state * complex(f.vals[r])
    return total


def tensor_state(f: ElementaryKernel, depth: int | None = None) -> FockState:
    """The Fock vector whose strings are the coefficient tuples of ``f``."""
    st = FockState(f.family, f.order if depth is None else depth)
    if f.order == 0:
        if f.nnz:
            st._level(0)[...] += f.value()
        return st
    arr = st._level(f.order)
    arr[tuple(f.coords.T)] += f.vals
    return st


Term = tuple  # (ElementaryKernel, kind)


def _default_depth(ops: Sequence[Term]) -> int:
    return sum(k.order for k, _ in ops) + 2


def vacuum_expectation(op_sequence: Sequence[Term], depth: int | None = None, split: bool = True,
                       family: CellFamily | None = None) -> complex:
    """``phi(T_1 ... T_r) = <T_1 ... T_r Omega, Omega>`` for ``T_i = I(kernel_i)``.

    With ``split=True`` the product is evaluated as
    ``<T_{k+1} ... T_r Omega, T_k* ... T_1* Omega>`` (using ``I(f)* = I(f*)``),
    which roughly halves the Fock depth needed.
    """
    ops = list(op_sequence)
    if not ops:
        return 1 + 0j
    fam = family or ops[0][0].family
    if not split:
        D = _default_depth(ops) if depth is None else depth
        v = FockState.vacuum(fam, D)
        for kern, kind in reversed(ops):
            v = apply_multiple_integral(kern, kind, v)
        return v.vacuum_amplitude
    # split where the creation budgets of both halves balance
    orders = [k.order for k, _ in ops]
    best, cut = None, 0
    for c in range(len(ops) + 1):
        cost = max(sum(orders[:c]), sum(orders[c:]))
        if best is None or cost < best:
            best, cut = cost, c
    D = best + 2 if depth is None else depth
    right = FockState.vacuum(fam, D)
    for kern, kind in reversed(ops[cut:]):
        right = apply_multiple_integral(kern, kind, right)
    left = FockState.vacuum(fam, D)
    for kern, kind in ops[:cut]:
        left = apply_multiple_integral(adjoint(kern), kind, left)
    return right.inner(left)


def moment_sequence(f: ElementaryKernel, kind, m_max: int, depth: int | None = None) -> list[complex]:
    """``[phi(I(f)^m) for m = 0..m_max]`` via ``<X^b Omega, (X*)^a Omega>``."""
    kind = MeasureKind.parse(kind)
    b_max = (m_max + 1) // 2
    D = b_max * f.order + 2 if depth is None else depth
    fs = adjoint(f)
    right = [FockState.vacuum(f.family, D)]
    for _ in range(b_max):
        right.append(apply_multiple_integral(f, kind, right[-1]))
    left = [FockState.vacuum(f.family, D)]
    for _ in range(m_max // 2):
        left.append(apply_multiple_integral(fs, kind, left[-1]))
    out = []
    for m in range(m_max + 1):
        b = (m + 1) // 2
        out.append(right[b].inner(left[m - b]))
    return out


@dataclass
class OracleReport:
    name: str
    max_discrepancy: float
    tolerance: float
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.max_discrepancy <= self.tolerance


def product_formula_terms(f: ElementaryKernel, g: ElementaryKernel, kind) -> list[ElementaryKernel]:
    """Kernels whose integrals sum to ``I(f) I(g)``: arc contractions for every
    ``k``, plus the ``(k, k-1)`` star contractions for free Poisson."""
    kind = MeasureKind.parse(kind)
    terms = [arc_contraction(f, g, k) for k in range(min(f.order, g.order) + 1)]
    if kind.has_gauge:
        terms += [star_contraction(f, g, k, k - 1) for k in range(1, min(f.order, g.order) + 1)]
    return terms


def verify_product_formula(f: ElementaryKernel, g: ElementaryKernel, kind, tol: float = 1e-10,
                           probe: FockState | None = None) -> OracleReport:
    """Compare ``I(f) I(g) v`` with the sum of the contraction integrals applied to ``v``.

    ``v`` is the vacuum unless ``probe`` is given.  The discrepancy is the
    largest coefficient difference relative to the largest coefficient.
    """
    kind = MeasureKind.parse(kind)
    if probe is None:
        probe = FockState.vacuum(f.family, f.order + g.order + 2)
    else:
        probe = probe.with_depth(max(probe.depth, max(probe.levels, default=0) + f.order + g.order + 2))
    lhs = apply_multiple_integral(f, kind, apply_multiple_integral(g, kind, probe))
    rhs = FockState.zero(f.family, probe.depth)
    for h in product_formula_terms(f, g, kind):
        rhs = rhs + apply_multiple_integral(h, kind, probe)
    scale = max(lhs.max_abs(), rhs.max_abs(), 1e-300)
    return OracleReport("product_formula", lhs.max_abs_diff(rhs) / scale if scale > 1e-300 else 0.0, tol,
                        {"kind": kind.value, "m": f.order, "n": g.order})


def verify_isometry(f: ElementaryKernel, g: ElementaryKernel, kind, tol: float = 1e-10) -> OracleReport:
    """``phi(I(g)* I(f))`` against ``<f, g> 1{q = q'}``."""
    kind = MeasureKind.parse(kind)
    oracle = vacuum_expectation([(adjoint(g), kind), (f, kind)])
    expected = l2_inner(f, g) if f.order == g.order else 0j
    err = abs(oracle - expected) / max(1.0, abs(expected))
    return OracleReport("isometry", err, tol, {"oracle": oracle, "expected": expected})


def _as_cells(f) -> list[int]:
    if isinstance(f, ElementaryKernel):
        if f.nnz != 1 or f.vals[0] != 1:
            raise HypothesisError("expected a single indicator tensor 1_A1 x ... x 1_Aq")
        return [int(c) for c in f.coords[0]]
    if isinstance(f, (int, np.integer)):
        return [int(f)]
    return [int(c) for c in f]


def verify_wick_recursion(f0, f, kind, family: CellFamily | None = None, probe: FockState | None = None,
                          tol: float = 1e-10) -> OracleReport:
    """Check ``I(1_B x f) = I(1_B) I(f) - <1_B, f_1> I(f_2..) - delta I((1_B f_1) x f_2..)``.

    ``f0`` is the cell ``B`` (or its indicator kernel), ``f`` the tensor
    ``1_{A_1} x ... x 1_{A_q}`` (or its cell list).  Both sides act on
    ``probe`` (default: the vacuum).  ``delta`` is 1 for free Poisson, 0 for
    semicircular.  Distinct cells of a family are disjoint, so the requirement
    ``B = A_1`` or ``B`` disjoint from ``A_1`` always holds.
    """
    kind = MeasureKind.parse(kind)
    if family is None:
        family = probe.family if probe is not None else getattr(f0, "family", None) or getattr(f, "family", None)
    if family is None:
        raise ValueError("a cell family is required")
    B = _as_cells(f0)
    if len(B) != 1:
        raise HypothesisError("f0 must be a single cell indicator")
    B = B[0]
    cells = _as_cells(f)
    q = len(cells)
    base = FockState.vacuum(family, 0) if probe is None else probe
    probe = base.with_depth(max(base.levels, default=0) + q + 3)
    ind = lambda cs: ElementaryKernel.indicator(family, cs)
    lhs = apply_multiple_integral(ind([B] + cells), kind, probe)
    rhs = apply_multiple_integral(ind([B]), kind, apply_multiple_integral(ind(cells), kind, probe))
    overlap = q >= 1 and cells[0] == B
    if overlap:
        mu = float(family.measures[B])
        rhs = rhs - apply_multiple_integral(ind(cells[1:]), kind, probe) * mu
        if kind.has_gauge:
            rhs = rhs - apply_multiple_integral(ind(cells), kind, probe)
    scale = max(lhs.max_abs(), rhs.max_abs(), 1e-300)
    return OracleReport("wick_recursion", lhs.max_abs_diff(rhs) / scale, tol,
                        {"kind": kind.value, "B": B, "cells": cells, "overlap": overlap})


class OperatorPolynomial:
    """Linear combination of words in measure operators: ``{(c1, ..., ck): coeff}``.

    The empty word is the identity; a word acts right to left.
    """

    def __init__(self, family: CellFamily, kind, terms: Mapping[tuple, complex]):
        self.family = family
        self.kind = MeasureKind.parse(kind)
        self.terms = {tuple(int(c) for c in w): complex(a) for w, a in terms.items()}

    @classmethod
    def measure(cls, family: CellFamily, cell: int, kind, centered: bool = True) -> "OperatorPolynomial":
        """``N^(A)`` / ``S(A)``; the uncentered Poisson ``N(A) = N^(A) + mu(A)``."""
        terms = {(cell,): 1.0}
        if not centered:
            terms[()] = float(family.measures[cell])
        return cls(family, kind, terms)

    @property
    def cells(self) -> set[int]:
        return {c for w in self.terms for c in w}

    @property
    def degree(self) -> int:
        return max((len(w) for w in self.terms), default=0)

    def apply(self, v: FockState) -> FockState:
        out = FockState.zero(v.family, v.depth)
        for w, a in self.terms.items():
            st = v
            for c in reversed(w):
                st = apply_measure(c, self.kind, st)
            out = out + st * a
        return out


def expectation_of_product(polys: Sequence[OperatorPolynomial], depth: int | None = None) -> complex:
    """``phi(P_1 ... P_r)`` on the vacuum."""
    if not polys:
        return 1 + 0j
    fam = polys[0].family
    D = sum(p.degree for p in polys) + 1 if depth is None else depth
    v = FockState.vacuum(fam, D)
    for p in reversed(polys):
        v = p.apply(v)
    return v.vacuum_amplitude


def free_independence_probe(X: OperatorPolynomial, Y: OperatorPolynomial, tol: float = 1e-10) -> OracleReport:
    """Check ``phi(XYXY) = phi(Y)^2 phi(X^2) + phi(X)^2 phi(Y^2) - phi(X)^2 phi(Y)^2``
    for polynomials over disjoint cell sets."""
    if X.cells & Y.cells:
        raise HypothesisError("probe needs X and Y supported on disjoint cells")
    phi = expectation_of_product
    lhs = phi([X, Y, X, Y])
    px, py = phi([X]), phi([Y])
    rhs = py ** 2 * phi([X, X]) + px ** 2 * phi([Y, Y]) - px ** 2 * py ** 2
    err = abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))
    return OracleReport("free_independence", err, tol, {"lhs": lhs, "rhs": rhs})


def check_self_adjoint(A: int, kind, v: FockState, w: FockState) -> float:
    """``|<X v, w> - <v, X w>|`` for the measure operator ``X(A)``."""
    return abs(apply_measure(A, kind, v).inner(w) - v.inner(apply_measure(A, kind, w)))
