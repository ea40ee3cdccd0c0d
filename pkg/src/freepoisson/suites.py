"""Seeded kernel suites shared by ``freepoisson verify`` and the acceptance tests.

Each generator is deterministic in its seed, so a check can be replayed on
exactly the kernels another check used.
"""
from __future__ import annotations

import numpy as np

from .kernels import CellFamily, ElementaryKernel, adjoint, random_kernel

KINDS = ("free_poisson", "semicircular")


def _family(rng, low=1, high=4) -> CellFamily:
    return CellFamily.from_measures(rng.uniform(0.2, 1.5, int(rng.integers(low, high + 1))))


def oracle_suite(seed: int = 1, count: int = 50) -> list[tuple[ElementaryKernel, str]]:
    """Purely non-diagonal kernels, ``q`` in 1..3, at most 4 cells, with a kind each."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        q = int(rng.integers(1, 4))
        fam = _family(rng, low=q)
        out.append((random_kernel(fam, q, rng), KINDS[int(rng.integers(2))]))
    return out


def product_suite(seed: int = 2, count: int = 50) -> list[tuple[ElementaryKernel, ElementaryKernel, str]]:
    """Pairs of arbitrary (diagonal allowed) kernels of orders 1..3 on a shared family."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        fam = _family(rng, low=2)
        f = random_kernel(fam, int(rng.integers(1, 4)), rng, nondiagonal=False)
        g = random_kernel(fam, int(rng.integers(1, 4)), rng, nondiagonal=False)
        out.append((f, g, KINDS[int(rng.integers(2))]))
    return out


def closed_form_suite(seed: int = 3, count: int = 4) -> list[ElementaryKernel]:
    """Single-cell indicators ``1_A`` with assorted ``mu(A)`` (including 1)."""
    rng = np.random.default_rng(seed)
    mus = [1.0] + list(rng.uniform(0.2, 3.0, count - 1))
    return [ElementaryKernel.indicator(CellFamily.from_measures([m]), [0]) for m in mus]


def fourth_moment_suite(seed: int = 4, count: int = 20) -> list[ElementaryKernel]:
    """Mirror-symmetric non-diagonal kernels, ``q`` in 1..3."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        q = int(rng.integers(1, 4))
        out.append(random_kernel(_family(rng, low=max(q, 2)), q, rng, mirror=True))
    return out


def self_adjoint(f: ElementaryKernel) -> ElementaryKernel:
    return (f + adjoint(f)) * 0.5


def spectral_suite() -> list[ElementaryKernel]:
    """Every kernel of the four suites above, made self-adjoint, zeros dropped."""
    ks = [f for f, _ in oracle_suite()]
    for f, g, _ in product_suite():
        ks += [f, g]
    ks += closed_form_suite() + fourth_moment_suite()
    out = [self_adjoint(f) for f in ks]
    return [f for f in out if not f.is_zero]


def fock_root_estimate(f: ElementaryKernel, kind: str, budget: int = 12) -> float:
    """``max_m |phi(F^{2m})|^{1/(2m)}`` from the Fock oracle, for ``2 m q <= budget``."""
    from .fock import moment_sequence
    m_max = max(1, budget // (2 * max(f.order, 1)))
    mom = moment_sequence(f, kind, 2 * m_max)
    return max(abs(mom[2 * m]) ** (1 / (2 * m)) for m in range(1, m_max + 1))
