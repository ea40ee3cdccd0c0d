import itertools
import json
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from freepoisson.diagrams import (CumulantReport, Kind, classical_cumulant_poisson, cumulant, cumulant_report,
                                  cumulants_from_moments, even_moments, fourth_moment_identity,
                                  free_cumulant_poisson, free_cumulant_semicircular, free_moment_poisson,
                                  free_moment_semicircular, moment, moments_from_cumulants, semicircle_moment,
                                  spectral_bound_poisson, spectral_bound_semicircular,
                                  spectral_radius_estimate, type_counts)
from freepoisson.errors import DiagonalKernelError, HypothesisError
from freepoisson.fock import moment_sequence
from freepoisson.kernels import CellFamily, ElementaryKernel, l2_norm, random_kernel
from freepoisson.partitions import all_partitions, catalan, is_noncrossing


def centered_poisson_moment(k, lam):
    """E[(N - lam)^k] for N ~ Poisson(lam): singleton-free set partitions of [k]."""
    if k == 0:
        return 1.0
    return sum(lam ** len(p) for p in all_partitions(k) if min(p.sizes) >= 2)


def classical_moments(f, m_max):
    """E[I(f)^m] with I(f) = sum_t c_t prod_i (N_{t_i} - mu_{t_i}), cells independent."""
    mu = f.family.measures
    table = list(f.as_dict().items())
    out = {}
    for m in range(1, m_max + 1):
        tot = 0j
        for combo in itertools.product(table, repeat=m):
            coeff = math.prod(c for _, c in combo)
            counts = Counter(i for t, _ in combo for i in t)
            tot += coeff * math.prod(centered_poisson_moment(k, mu[a]) for a, k in counts.items())
        out[m] = tot
    return out


def brute_moments(kappa, m_max, noncrossing):
    out = {}
    for m in range(1, m_max + 1):
        out[m] = sum(math.prod(kappa[len(b)] for b in p.blocks) for p in all_partitions(m)
                     if not noncrossing or is_noncrossing(p))
    return out


@pytest.mark.parametrize("kind", ["free_poisson", "semicircular"])
def test_diagram_moments_match_fock(rng, kind):
    for _ in range(12):
        q = int(rng.integers(1, 4))
        fam = CellFamily.from_measures(rng.uniform(0.2, 1.5, 4))
        f = random_kernel(fam, q, rng)
        oracle = moment_sequence(f, kind, 5)
        for m in range(1, 6):
            assert np.isclose(moment(f, m, kind), oracle[m], rtol=1e-10, atol=1e-12)


def test_indicator_cumulants():
    fam = CellFamily.from_measures([1.0])
    f = ElementaryKernel.indicator(fam, [0])
    for m in range(2, 7):
        assert np.isclose(free_cumulant_poisson(f, m), 1.0)
        assert np.isclose(free_cumulant_semicircular(f, m), 1.0 if m == 2 else 0.0)
    assert free_moment_poisson(f, 1) == 0


def test_triangle_kernel_third_cumulant():
    fam = CellFamily.from_measures([0.5, 1.0, 2.0])
    table = {(0, 1): 1.0, (1, 2): 2.0, (2, 0): -1.5}
    f = ElementaryKernel.from_dict(fam, 2, table)
    mu = fam.measures
    ref = sum(table.get((x, y), 0) * table.get((y, z), 0) * table.get((z, x), 0) * mu[x] * mu[y] * mu[z]
              for x, y, z in itertools.product(range(3), repeat=3))
    assert np.isclose(free_cumulant_poisson(f, 3), ref)


def test_odd_semicircular_vanishes(rng):
    fam = CellFamily.from_measures([0.5, 1.0, 2.0])
    f = random_kernel(fam, 3, rng)
    assert free_moment_semicircular(f, 3) == 0 and free_cumulant_semicircular(f, 5) == 0


@pytest.mark.parametrize("q", [1, 2])
def test_classical_cumulants_match_poisson_expansion(rng, q):
    for _ in range(4):
        fam = CellFamily.from_measures(rng.uniform(0.3, 1.5, 3))
        f = random_kernel(fam, q, rng, nnz=3, complex_=False)
        mom = classical_moments(f, 4)
        rep = CumulantReport("classical_poisson", "oracle", mom, quantity="moment")
        kap = cumulants_from_moments(rep, 4, "all").values
        for m in range(2, 5):
            assert np.isclose(classical_cumulant_poisson(f, m), kap[m], rtol=1e-10, atol=1e-12)
        assert np.isclose(moment(f, 4, "classical_poisson"), mom[4], rtol=1e-10)


def test_classical_second_cumulant_symmetric(rng):
    fam = CellFamily.from_measures([0.5, 1.0, 2.0])
    f = random_kernel(fam, 2, rng, complex_=False).symmetrize()
    assert np.isclose(classical_cumulant_poisson(f, 2), 2 * l2_norm(f) ** 2)
    assert classical_cumulant_poisson(ElementaryKernel.indicator(fam, [1]), 1) == 0


def test_diagonal_kernel_rejected():
    fam = CellFamily.unit(2)
    with pytest.raises(DiagonalKernelError):
        free_cumulant_poisson(ElementaryKernel.indicator(fam, [1, 1]), 3)


@given(st.integers(0, 10_000))
def test_conversions_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    kap = {m: float(rng.standard_normal()) for m in range(1, 8)}
    for lattice, nc in (("nc", True), ("all", False)):
        got = moments_from_cumulants(CumulantReport("free_poisson", "t", kap), 7, lattice).values
        ref = brute_moments(kap, 7, nc)
        for m in range(1, 8):
            assert np.isclose(got[m], ref[m], rtol=1e-12, atol=1e-12)


def test_type_counts_totals():
    for n in range(1, 10):
        assert sum(c for _, c in type_counts(n, "nc")) == catalan(n)
        assert sum(c for _, c in type_counts(n, "all")) == sum(1 for _ in all_partitions(n))


def test_conversion_closed_forms():
    t, lam = 1.7, 0.6
    semi = moments_from_cumulants(CumulantReport("semicircular", "t", {2: t}), 10, "nc").values
    for m in range(1, 6):
        assert np.isclose(semi[2 * m], catalan(m) * t ** m) and semi[2 * m - 1] == 0
    pois = moments_from_cumulants(CumulantReport("free_poisson", "t", {m: lam for m in range(1, 9)}), 8).values
    fam = CellFamily.from_measures([lam])
    oracle = moment_sequence(ElementaryKernel.indicator(fam, [0], 1.0), "free_poisson", 8)
    # uncentered free Poisson: shift the centered oracle by lam
    shifted = {m: sum(math.comb(m, k) * oracle[k] * lam ** (m - k) for k in range(m + 1)) for m in range(1, 9)}
    for m in range(1, 9):
        assert np.isclose(pois[m], shifted[m])
    zero = moments_from_cumulants(CumulantReport("free_poisson", "t", {}), 5).values
    assert all(v == 0 for v in zero.values())


def test_exact_roundtrip():
    from fractions import Fraction
    rng = np.random.default_rng(3)
    for lattice in ("nc", "all"):
        kap = {m: Fraction(float(rng.standard_normal())) for m in range(1, 9)}
        rep = moments_from_cumulants(CumulantReport("free_poisson", "t", kap), 8, lattice)
        assert rep.exact
        assert cumulants_from_moments(rep, 8, lattice).values == kap


@given(st.lists(st.floats(-3, 3), min_size=8, max_size=8), st.sampled_from(["nc", "all"]))
def test_float_roundtrip(vals, lattice):
    kap = {m: v for m, v in enumerate(vals, 1)}
    rep = moments_from_cumulants(CumulantReport("free_poisson", "t", kap), 8, lattice)
    back = cumulants_from_moments(rep, 8, lattice).values
    assert all(abs(back[m] - kap[m]) <= 1e-10 * max(1.0, abs(kap[m])) for m in kap)


def test_report_serialization():
    fam = CellFamily.from_measures([1.0])
    rep = cumulant_report(ElementaryKernel.indicator(fam, [0]), "free_poisson", 4)
    again = CumulantReport.from_json(json.loads(json.dumps(rep.to_json())))
    assert again.values == rep.values and again.kind is Kind.FREE_POISSON
    csv_text = rep.to_csv()
    assert csv_text.startswith("kind,method,m,re,im\r\n") and csv_text.count("\r\n") == 5


@pytest.mark.parametrize("q", [1, 2, 3])
def test_fourth_moment_decomposition(rng, q):
    for _ in range(5):
        fam = CellFamily.from_measures(rng.uniform(0.3, 1.5, 4))
        f = random_kernel(fam, q, rng, mirror=True)
        dec = fourth_moment_identity(f)
        assert np.isclose(dec.total, free_moment_poisson(f, 4).real, rtol=1e-10)
        assert dec.gap > 0
    zero = ElementaryKernel.zero(CellFamily.unit(3), 2)
    assert fourth_moment_identity(zero).total == 0
    with pytest.raises(HypothesisError):
        fourth_moment_identity(ElementaryKernel.indicator(CellFamily.unit(2), [0, 1]))


def test_spectral_bounds_examples():
    fam = CellFamily.from_measures([1.0])
    f = ElementaryKernel.indicator(fam, [0])
    assert spectral_bound_poisson(f, D=1, K=1) == 4
    assert spectral_bound_semicircular(f) == 2
    # free Poisson(1) centered lives on [-1, 3]: radius 3 <= 4
    assert spectral_radius_estimate(f, "free_poisson", 40, method="ratio").value <= 3 + 1e-9


def test_poisson_bound_fails_for_large_sup():
    """Centered free Poisson of rate K scaled by D has radius D (1 + 2 sqrt K) (for K <= 1),
    which exceeds 4^q max(1, DK)^{q/2} = 4 once D > 4 / (1 + 2 sqrt K)."""
    D, K = 10.0, 0.01
    f = ElementaryKernel.indicator(CellFamily.from_measures([K]), [0], D)
    radius = D * (1 + 2 * math.sqrt(K))
    est = spectral_radius_estimate(f, "free_poisson", 60, method="ratio").value
    assert est <= radius + 1e-9 and est > spectral_bound_poisson(f)


def test_semicircle_estimates():
    f = ElementaryKernel.indicator(CellFamily.from_measures([1.0]), [0])
    mom = even_moments(f, "semicircular", 12)
    assert all(np.isclose(mom[m], semicircle_moment(m, 1.0)) for m in mom)
    root = spectral_radius_estimate(f, "semicircular", 12).value
    ratio = spectral_radius_estimate(f, "semicircular", 12, method="ratio").value
    assert root < ratio < 2
    assert abs(ratio - 2) / 2 < 0.10


def test_cumulant_dispatch(rng):
    fam = CellFamily.from_measures([0.5, 1.0, 2.0])
    f = random_kernel(fam, 2, rng)
    assert cumulant(f, 3, "semicircular") == free_cumulant_semicircular(f, 3)
    with pytest.raises(ValueError):
        Kind.parse("gaussian-ish")
