"""Moments and cumulants of multiple integrals from partition diagrams.

For a purely non-diagonal kernel ``f`` of order ``q`` and ``pi* = q x ... x q``
(``m`` blocks):

=====================================  ==================================
quantity                               partitions summed over
=====================================  ==================================
free Poisson cumulant ``kappa_m``      ``NC_GE2``
free Poisson moment ``phi(I^m)``       ``NC0_GE2``
semicircular cumulant / moment         ``NC2`` / ``NC0_2``
classical Poisson cumulant ``chi_m``   ``P_GE2_CONNECTING_RESPECTING``
=====================================  ==================================

each term being :func:`partition_tensor_integral`.
"""
from __future__ import annotations

import csv
import enum
import functools
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Mapping, Sequence

import numpy as np

from ._numeric import csum
from .errors import CapExceededError, HypothesisError
from .kernels import (ElementaryKernel, arc_contraction, is_mirror_symmetric, l2_norm,
                      partition_tensor_integral, require_nondiagonal, star_contraction)
from .partitions import PartitionClass, catalan, default_cap, partition_class

FORMAT_VERSION = 1


class Kind(enum.Enum):
    FREE_POISSON = "free_poisson"
    SEMICIRCULAR = "semicircular"
    CLASSICAL_POISSON = "classical_poisson"

    @classmethod
    def parse(cls, name) -> "Kind":
        if isinstance(name, cls):
            return name
        key = str(name).lower().replace("-", "_")
        table = {"free_poisson": cls.FREE_POISSON, "poisson": cls.FREE_POISSON,
                 "semicircular": cls.SEMICIRCULAR, "semi": cls.SEMICIRCULAR,
                 "classical_poisson": cls.CLASSICAL_POISSON, "classical": cls.CLASSICAL_POISSON}
        try:
            return table[key]
        except KeyError:
            raise ValueError(f"unknown kind {name!r}") from None


_CUMULANT_CLASS = {
    Kind.FREE_POISSON: PartitionClass.NC_GE2,
    Kind.SEMICIRCULAR: PartitionClass.NC2,
    Kind.CLASSICAL_POISSON: PartitionClass.P_GE2_CONNECTING_RESPECTING,
}
_MOMENT_CLASS = {
    Kind.FREE_POISSON: PartitionClass.NC0_GE2,
    Kind.SEMICIRCULAR: PartitionClass.NC0_2,
}


def _diagram_sum(f: ElementaryKernel, m: int, cls: PartitionClass, cap: int) -> complex:
    require_nondiagonal(f)
    q = f.order
    cap = default_cap(cls) if cap is None else cap
    if m * q > cap:
        raise CapExceededError(f"m*q = {m * q} exceeds enumeration cap {cap}")
    parts = partition_class(m, q, cls, cap)
    return csum([partition_tensor_integral(f, s, m) for s in parts])


def _order_zero(f: ElementaryKernel, m: int, moment: bool) -> complex:
    c = f.value()
    if moment:
        return c ** m
    return c if m == 1 else 0j


def free_cumulant_poisson(f: ElementaryKernel, m: int, cap: int | None = None) -> complex:
    """``kappa_m(I_q(f))`` for the centered free Poisson measure."""
    if f.order == 0:
        return _order_zero(f, m, False)
    return _diagram_sum(f, m, PartitionClass.NC_GE2, cap)


def free_moment_poisson(f: ElementaryKernel, m: int, cap: int | None = None) -> complex:
    """``phi(I_q(f)^m)`` for the centered free Poisson measure."""
    if m == 0:
        return 1 + 0j
    if f.order == 0:
        return _order_zero(f, m, True)
    return _diagram_sum(f, m, PartitionClass.NC0_GE2, cap)


def free_cumulant_semicircular(f: ElementaryKernel, m: int, cap: int | None = None) -> complex:
    if f.order == 0:
        return _order_zero(f, m, False)
    if (m * f.order) % 2:
        require_nondiagonal(f)
        return 0j
    return _diagram_sum(f, m, PartitionClass.NC2, cap)


def free_moment_semicircular(f: ElementaryKernel, m: int, cap: int | None = None) -> complex:
    if m == 0:
        return 1 + 0j
    if f.order == 0:
        return _order_zero(f, m, True)
    if (m * f.order) % 2:
        require_nondiagonal(f)
        return 0j
    return _diagram_sum(f, m, PartitionClass.NC0_2, cap)


def classical_cumulant_poisson(f: ElementaryKernel, m: int, cap: int | None = None) -> complex:
    """``chi_m(I_q(f))`` for a compensated classical Poisson measure: sum over all
    partitions that respect and connect ``pi*`` and have no singleton."""
    if f.order == 0:
        return _order_zero(f, m, False)
    return _diagram_sum(f, m, PartitionClass.P_GE2_CONNECTING_RESPECTING, cap)


def cumulant(f: ElementaryKernel, m: int, kind, cap: int | None = None) -> complex:
    kind = Kind.parse(kind)
    return {Kind.FREE_POISSON: free_cumulant_poisson, Kind.SEMICIRCULAR: free_cumulant_semicircular,
            Kind.CLASSICAL_POISSON: classical_cumulant_poisson}[kind](f, m, cap)


def moment(f: ElementaryKernel, m: int, kind, cap: int | None = None) -> complex:
    kind = Kind.parse(kind)
    if kind is Kind.CLASSICAL_POISSON:
        kappa = CumulantReport(kind, "diagram", {k: classical_cumulant_poisson(f, k, cap) for k in range(1, m + 1)})
        return moments_from_cumulants(kappa, m, "all").values[m]
    return (free_moment_poisson if kind is Kind.FREE_POISSON else free_moment_semicircular)(f, m, cap)


@dataclass
class CumulantReport:
    """Values ``m -> complex`` of a cumulant or moment sequence, with provenance."""

    kind: Kind
    method: str
    values: dict[int, complex]
    quantity: str = "cumulant"
    discrepancy: dict[int, float] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = Kind.parse(self.kind)
        self.values = {int(k): _scalar(v) for k, v in self.values.items()}

    @property
    def orders(self) -> list[int]:
        return sorted(self.values)

    def __getitem__(self, m: int) -> complex:
        return self.values[m]

    @property
    def exact(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.values.values())

    def as_complex(self) -> dict[int, complex]:
        return {m: complex(v) for m, v in self.values.items()}

    def rows(self) -> list[dict]:
        out = []
        for m in self.orders:
            v = complex(self.values[m])
            row = {"kind": self.kind.value, "method": self.method, "m": m,
                   "re": repr(v.real), "im": repr(v.imag)}
            if self.discrepancy is not None:
                row["discrepancy"] = repr(float(self.discrepancy.get(m, float("nan"))))
            out.append(row)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["kind", "method", "m", "re", "im"] + (["discrepancy"] if self.discrepancy is not None else [])
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\r\n")
        w.writeheader()
        w.writerows(self.rows())
        return buf.getvalue()

    def to_json(self) -> dict:
        d = {"format_version": FORMAT_VERSION, "kind": self.kind.value, "method": self.method,
             "quantity": self.quantity,
             "values": [{"m": m, "re": v.real, "im": v.imag} for m, v in sorted(self.as_complex().items())]}
        if self.discrepancy is not None:
            d["discrepancy"] = {str(m): v for m, v in sorted(self.discrepancy.items())}
        if self.meta:
            d["meta"] = self.meta
        return d

    @classmethod
    def from_json(cls, data: Mapping) -> "CumulantReport":
        vals = {int(r["m"]): complex(r["re"], r["im"]) for r in data["values"]}
        disc = data.get("discrepancy")
        return cls(data["kind"], data["method"], vals, data.get("quantity", "cumulant"),
                   {int(k): float(v) for k, v in disc.items()} if disc else None, dict(data.get("meta", {})))


def cumulant_report(f: ElementaryKernel, kind, m_max: int, cap: int | None = None,
                    quantity: str = "cumulant") -> CumulantReport:
    kind = Kind.parse(kind)
    fn = cumulant if quantity == "cumulant" else moment
    vals = {m: fn(f, m, kind, cap) for m in range(1, m_max + 1)}
    return CumulantReport(kind, "diagram", vals, quantity)


# moment <-> cumulant conversion through block-type counts

def _integer_partitions(n: int, largest: int | None = None):
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for k in range(min(n, largest), 0, -1):
        for rest in _integer_partitions(n - k, k):
            yield (k,) + rest


@functools.lru_cache(maxsize=None)
def type_counts(n: int, lattice: str) -> tuple[tuple[tuple[int, ...], int], ...]:
    """Number of partitions of ``[n]`` with each block-size type.

    ``lattice="nc"`` counts non-crossing partitions (Kreweras' formula
    ``n! / ((n - k + 1)! prod m_i!)`` for ``k`` blocks), ``"all"`` counts all set
    partitions (``n! / prod (i!^{m_i} m_i!)``).
    """
    out = []
    for lam in _integer_partitions(n):
        mult: dict[int, int] = {}
        for part in lam:
            mult[part] = mult.get(part, 0) + 1
        k = len(lam)
        denom = math.prod(math.factorial(c) for c in mult.values())
        if lattice == "nc":
            cnt = math.factorial(n) // (math.factorial(n - k + 1) * denom)
        elif lattice == "all":
            cnt = math.factorial(n) // (denom * math.prod(math.factorial(s) ** c for s, c in mult.items()))
        else:
            raise ValueError(f"unknown lattice {lattice!r}")
        out.append((lam, cnt))
    return tuple(out)


def _lattice(name) -> str:
    key = str(getattr(name, "value", name)).lower()
    if key in ("nc", "noncrossing", "free"):
        return "nc"
    if key in ("all", "p", "classical"):
        return "all"
    raise ValueError(f"unknown lattice {name!r}")


def _scalar(v):
    """Rationals stay exact; anything else becomes complex."""
    return Fraction(v) if isinstance(v, Rational) else complex(v)


class _Series:
    """Moment/cumulant bookkeeping shared by both conversion directions.

    Non-crossing: ``M(z) = 1 + sum_s kappa_s z^s M(z)^s``, so
    ``M_n = sum_s kappa_s [z^{n-s}] M(z)^s``.  All partitions:
    ``M_n = sum_k C(n-1, k-1) kappa_k M_{n-k}`` (condition on the block of
    element 1).  Both are polynomial in ``n`` and exact for rational input.
    """

    def __init__(self, lattice: str, exact: bool):
        self.lattice = lattice
        self.exact = exact
        self.zero = Fraction(0) if exact else 0j
        self.M = [Fraction(1) if exact else 1 + 0j]
        self.kappa = [self.zero]
        self._pow: dict[tuple[int, int], complex] = {}

    def _sum(self, terms):
        return sum(terms, self.zero) if self.exact else csum(terms)

    def _coef(self, s: int, j: int):
        """``[z^j] M(z)^s``; only reads ``M_0..M_j``."""
        if j == 0:
            return self.M[0]
        if s == 1:
            return self.M[j]
        key = (s, j)
        if key not in self._pow:
            self._pow[key] = self._sum([self.M[i] * self._coef(s - 1, j - i) for i in range(j + 1)])
        return self._pow[key]

    def _rest(self, n: int):
        """``M_n - kappa_n`` from the lower orders."""
        if self.lattice == "all":
            return self._sum([math.comb(n - 1, k - 1) * self.kappa[k] * self.M[n - k] for k in range(1, n)])
        return self._sum([self.kappa[s] * self._coef(s, n - s) for s in range(1, n)])

    def push_cumulant(self, k):
        rest = self._rest(len(self.M))
        self.kappa.append(k)
        self.M.append(rest + k)

    def push_moment(self, m):
        rest = self._rest(len(self.M))
        self.kappa.append(m - rest)
        self.M.append(m)


def moments_from_cumulants(kappa: CumulantReport, m_max: int, lattice="nc") -> CumulantReport:
    """``phi(X^m) = sum_pi prod_B kappa_|B|`` over non-crossing (``"nc"``) or all
    (``"all"``) partitions of ``[m]``, for ``m = 1..m_max``.  Exact if the
    cumulants are rational (``int`` or ``Fraction``)."""
    lat = _lattice(lattice)
    ser = _Series(lat, kappa.exact)
    for m in range(1, m_max + 1):
        ser.push_cumulant(_scalar(kappa.values.get(m, ser.zero)))
    vals = {m: ser.M[m] for m in range(1, m_max + 1)}
    return CumulantReport(kappa.kind, kappa.method, vals, "moment", meta={"lattice": lat})


def cumulants_from_moments(moments: CumulantReport, m_max: int, lattice="nc") -> CumulantReport:
    """Inverse of :func:`moments_from_cumulants` (triangular solve, order by order).

    Exact when every moment is rational.  In floating point the solve inherits
    the size of the moments: with ``|phi(X^8)|`` in the thousands, expect
    roundtrip errors near ``1e-11``.
    """
    lat = _lattice(lattice)
    ser = _Series(lat, moments.exact)
    for m in range(1, m_max + 1):
        ser.push_moment(_scalar(moments.values.get(m, ser.zero)))
    kappa = {m: ser.kappa[m] for m in range(1, m_max + 1)}
    return CumulantReport(moments.kind, moments.method, kappa, "cumulant", meta={"lattice": lat})


# fourth moment

@dataclass
class FourthMomentDecomposition:
    leading: float  # 2 ||f||^4
    arc_terms: dict[int, float]  # k -> ||f arc_k f||^2, k = 1..q-1
    star_terms: dict[int, float]  # k -> ||f star_k^{k-1} f||^2, k = 1..q

    @property
    def gap(self) -> float:
        return math.fsum(list(self.arc_terms.values()) + list(self.star_terms.values()))

    @property
    def total(self) -> float:
        return math.fsum([self.leading] + list(self.arc_terms.values()) + list(self.star_terms.values()))

    def to_json(self) -> dict:
        return {"leading": self.leading, "arc_terms": {str(k): v for k, v in self.arc_terms.items()},
                "star_terms": {str(k): v for k, v in self.star_terms.items()}, "total": self.total}


def fourth_moment_identity(f: ElementaryKernel) -> FourthMomentDecomposition:
    """``2 ||f||^4 + sum_{k<q} ||f arc_k f||^2 + sum_{k<=q} ||f star_k^{k-1} f||^2``;
    equals ``phi(I_q(f)^4)`` for mirror-symmetric ``f``."""
    if not is_mirror_symmetric(f, rel=1e-10):
        raise HypothesisError("fourth-moment decomposition needs a mirror-symmetric kernel")
    q = f.order
    arc = {k: l2_norm(arc_contraction(f, f, k)) ** 2 for k in range(1, q)}
    star = {k: l2_norm(star_contraction(f, f, k, k - 1)) ** 2 for k in range(1, q + 1)}
    return FourthMomentDecomposition(2 * l2_norm(f) ** 4, arc, star)


# spectral radius

def spectral_bound_poisson(f: ElementaryKernel, D: float | None = None, K: float | None = None) -> float:
    """``4^q max(1, D K)^{q/2}`` with ``|f| <= D`` and support in ``B^q``, ``mu(B) = K``.

    Defaults: ``D = max |coeff|`` and ``K`` the total measure of the cells in the support.
    """
    q = f.order
    if D is None:
        D = float(np.abs(f.vals).max(initial=0.0))
    if K is None:
        K = float(f.family.measures[np.unique(f.coords)].sum()) if f.nnz and q else 0.0
    return 4.0 ** q * max(1.0, D * K) ** (q / 2)


def spectral_bound_semicircular(f: ElementaryKernel) -> float:
    """``(q + 1) ||f||``."""
    return (f.order + 1) * l2_norm(f)


@dataclass
class SpectralEstimate:
    value: float
    method: str
    m_reached: int
    sequence: list[float]


def even_moments(f: ElementaryKernel, kind, m_max: int, cap: int | None = None) -> dict[int, float]:
    """``{m: phi(F^{2m})}`` for ``m = 1..m_max`` as far as the engines allow.

    Order-one kernels use the closed-form cumulants ``int f^k dmu`` and the
    non-crossing conversion, so any ``m`` is reachable; higher orders use the
    diagram sums and stop at the enumeration cap.
    """
    kind = Kind.parse(kind)
    if kind is Kind.CLASSICAL_POISSON:
        raise ValueError("spectral estimates concern the free measures")
    out = {}
    if f.order == 1:
        mu = f.family.measures[f.coords[:, 0]]
        def k_m(k):
            if kind is Kind.SEMICIRCULAR:
                return complex(np.sum(f.vals ** 2 * mu)) if k == 2 else 0j
            return csum(f.vals ** k * mu) if k >= 2 else 0j
        kappa = CumulantReport(kind, "closed_form", {k: k_m(k) for k in range(1, 2 * m_max + 1)})
        mom = moments_from_cumulants(kappa, 2 * m_max, "nc").values
        return {m: mom[2 * m].real for m in range(1, m_max + 1)}
    for m in range(1, m_max + 1):
        limit = default_cap(_MOMENT_CLASS[kind]) if cap is None else cap
        if 2 * m * f.order > limit:
            break
        out[m] = moment(f, 2 * m, kind, cap).real
    return out


def spectral_radius_estimate(f: ElementaryKernel, kind, m_max: int, method: str = "root",
                             cap: int | None = None) -> SpectralEstimate:
    """Lower estimate of the spectral radius of a self-adjoint integral.

    ``method="root"``: ``max_m phi(F^{2m})^{1/(2m)}``.
    ``method="ratio"``: ``sqrt(phi(F^{2m+2}) / phi(F^{2m}))`` at the largest
    reachable ``m``; also a lower bound, and it converges faster.
    """
    if not is_mirror_symmetric(f, rel=1e-10):
        raise HypothesisError("spectral estimates need a mirror-symmetric (self-adjoint) kernel")
    if f.is_zero:
        return SpectralEstimate(0.0, method, m_max, [0.0] * m_max)
    if method == "root":
        mom = even_moments(f, kind, m_max, cap)
        seq = [max(v, 0.0) ** (1 / (2 * m)) for m, v in sorted(mom.items())]
        run = list(np.maximum.accumulate(seq))
        return SpectralEstimate(run[-1], method, max(mom), run)
    if method == "ratio":
        mom = even_moments(f, kind, m_max + 1, cap)
        ms = sorted(mom)
        seq = [math.sqrt(mom[m + 1] / mom[m]) for m in ms[:-1] if mom[m] > 0]
        return SpectralEstimate(max(seq), method, ms[-1] - 1, seq)
    raise ValueError(f"unknown method {method!r}")


def semicircle_moment(m: int, t: float) -> float:
    """``phi(S^{2m}) = C_m t^m``."""
    return catalan(m) * t ** m
