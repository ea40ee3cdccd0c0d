"""Tchebycheff polynomials ``H_{0,m}(x, t)`` and centered free Charlier polynomials
``C_{0,m}(x, lam)``, generated by their three-term recurrences

    x H_m = H_{m+1} + t H_{m-1}
    x C_m = C_{m+1} + C_m + lam C_{m-1}

with ``H_0 = C_0 = 1`` and ``H_1 = C_1 = x``.  Coefficient arrays are in
ascending powers of ``x``.  An integer or :class:`fractions.Fraction`
parameter gives exact rational coefficients; a float gives floats.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational


class PolyKind(enum.Enum):
    TCHEBYCHEFF = "tchebycheff"
    CHARLIER = "charlier"

    @classmethod
    def parse(cls, name) -> "PolyKind":
        if isinstance(name, cls):
            return name
        key = str(name).lower()
        if key in ("tchebycheff", "chebyshev", "semicircular", "h"):
            return cls.TCHEBYCHEFF
        if key in ("charlier", "poisson", "free_poisson", "c"):
            return cls.CHARLIER
        raise ValueError(f"unknown polynomial kind {name!r}")


@dataclass(frozen=True)
class OrthogonalPolySpec:
    kind: PolyKind
    parameter: float | Fraction
    degree: int

    def __post_init__(self):
        object.__setattr__(self, "kind", PolyKind.parse(self.kind))
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        if not self.parameter > 0:
            raise ValueError("parameter must be positive")


def _as_scalar(p):
    return Fraction(p) if isinstance(p, Rational) else float(p)


def _family(kind: PolyKind, param, degree: int) -> list[list]:
    """All polynomials of degree ``0..degree``."""
    one = _as_scalar(1) if isinstance(param, Rational) else 1.0
    zero = one - one
    polys = [[one], [zero, one]]
    shift = 1 if kind is PolyKind.CHARLIER else 0
    for m in range(1, degree):
        prev, cur = polys[m - 1], polys[m]
        nxt = [zero] + list(cur)  # x * P_m
        for i, c in enumerate(cur):
            nxt[i] -= shift * c
        for i, c in enumerate(prev):
            nxt[i] -= param * c
        polys.append(nxt)
    return polys[: degree + 1]


def poly_coeffs(spec: OrthogonalPolySpec) -> list:
    """Coefficients of ``H_{0,m}`` or ``C_{0,m}`` in ascending powers of ``x``."""
    return _family(spec.kind, _as_scalar(spec.parameter), spec.degree)[spec.degree]


def poly_mul(a: list, b: list) -> list:
    out = [a[0] * 0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _add_into(acc: list, p: list, scale) -> None:
    for i, c in enumerate(p):
        acc[i] += scale * c


@dataclass
class ProductIdentityReport:
    m: int
    n: int
    kind: PolyKind
    parameter: float
    lhs: list
    rhs: list
    max_discrepancy: float

    @property
    def ok(self) -> bool:
        return self.max_discrepancy <= 1e-12 * max(1.0, max(abs(c) for c in self.lhs))


def linearize(m: int, n: int, parameter, kind) -> dict[int, object]:
    """Coefficients ``c_r`` with ``P_m P_n = sum_r c_r P_r`` from the product rule.

    Tchebycheff: ``sum_k t^k H_{m+n-2k}``.  Charlier adds
    ``sum_{k>=1} lam^{k-1} C_{m+n-2k+1}``.
    """
    kind = PolyKind.parse(kind)
    p = _as_scalar(parameter)
    coef: dict[int, object] = {}
    for k in range(min(m, n) + 1):
        coef[m + n - 2 * k] = coef.get(m + n - 2 * k, 0) + p ** k
    if kind is PolyKind.CHARLIER:
        for k in range(1, min(m, n) + 1):
            coef[m + n - 2 * k + 1] = coef.get(m + n - 2 * k + 1, 0) + p ** (k - 1)
    return coef


def verify_product_identity(m: int, n: int, parameter, kind) -> ProductIdentityReport:
    """Expand ``P_m P_n`` and the linearization sum as polynomials in ``x`` and compare."""
    kind = PolyKind.parse(kind)
    p = _as_scalar(parameter)
    polys = _family(kind, p, m + n)
    lhs = poly_mul(polys[m], polys[n])
    rhs = [lhs[0] * 0] * len(lhs)
    for r, c in linearize(m, n, p, kind).items():
        _add_into(rhs, polys[r], c)
    disc = max(abs(float(a - b)) for a, b in zip(lhs, rhs))
    return ProductIdentityReport(m, n, kind, float(p), lhs, rhs, disc)


def evaluate_operator_poly(coeffs: list, apply, v):
    """``P(X) v`` by Horner's rule, where ``apply(w)`` computes ``X w``.

    ``v`` must support ``+`` and scalar ``*``.
    """
    acc = v * complex(coeffs[-1])
    for c in reversed(coeffs[:-1]):
        acc = apply(acc) + v * complex(c)
    return acc
