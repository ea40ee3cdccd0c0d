"""Clique kernels and finite-n convergence diagnostics.

The clique kernel of order ``q`` on ``Q_n = [-n^{1/d}/2, n^{1/d}/2]^d`` takes the
value ``1/q!`` on ``q``-tuples of distinct points that are pairwise within
distance ``r_n = n^{-1/((q-1) d)}``.  Here it is discretised on a grid of cubes
of side ``h`` (default ``r_n / 2``), the distance test applied to cube centres.
Because centres differ by ``h`` times an integer vector, admissible tuples are
generated from a fixed set of integer offsets.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .diagrams import (classical_cumulant_poisson, free_cumulant_poisson, free_moment_poisson,
                       fourth_moment_identity)
from .errors import ArityError, HypothesisError
from .kernels import (CellFamily, ElementaryKernel, is_mirror_symmetric, l2_norm, l4_norm,
                      lemma_hypotheses, star_contraction, tamedness_bound)

FORMAT_VERSION = 1


@dataclass(frozen=True)
class CliqueKernelSpec:
    q: int = 2
    d: int = 1
    n: float = 8
    h: float | None = None  # grid step, default r_n / 2
    r: float | None = None  # radius, default n^{-1/((q-1) d)}

    def __post_init__(self):
        if self.q < 2:
            raise ValueError("clique kernels need q >= 2")
        if self.d < 1 or self.n <= 0:
            raise ValueError("need d >= 1 and n > 0")

    @property
    def radius(self) -> float:
        return self.r if self.r is not None else self.n ** (-1.0 / ((self.q - 1) * self.d))

    @property
    def half_side(self) -> float:
        return self.n ** (1.0 / self.d) / 2

    @property
    def per_axis(self) -> int:
        """Cells per axis; the side is split into the fewest cubes of side at most ``h``."""
        h = self.h if self.h is not None else self.radius / 2
        if h > self.radius * (1 + 1e-12):
            raise ValueError(f"grid step {h} exceeds the radius {self.radius}")
        return int(math.ceil(2 * self.half_side / h - 1e-9))

    @property
    def step(self) -> float:
        return 2 * self.half_side / self.per_axis

    def halved(self) -> "CliqueKernelSpec":
        return CliqueKernelSpec(self.q, self.d, self.n, self.step / 2, self.r)


def _offsets(c: float, d: int) -> list[tuple[int, ...]]:
    """Nonzero integer vectors of Euclidean length at most ``c``."""
    lim = int(math.floor(c + 1e-9))
    tol = c * c * (1 + 1e-12)
    return [v for v in itertools.product(range(-lim, lim + 1), repeat=d)
            if any(v) and sum(x * x for x in v) <= tol]


def _offset_tuples(q: int, d: int, c: float) -> list[tuple[tuple[int, ...], ...]]:
    """``(q-1)``-tuples of distinct nonzero offsets, pairwise within ``c``."""
    offs = _offsets(c, d)
    tol = c * c * (1 + 1e-12)
    out = []
    for combo in itertools.permutations(offs, q - 1):
        if all(sum((a - b) ** 2 for a, b in zip(u, v)) <= tol for u, v in itertools.combinations(combo, 2)):
            out.append(combo)
    return out


def clique_alpha(q: int, d: int, c: float) -> float:
    """``lim q! ||f_n||^2`` for the discretised kernel with ``c = r_n / h`` cells per radius.

    Away from the boundary each cell anchors ``K_c`` admissible tuples, with
    ``K_c`` the number of offset tuples from :func:`_offset_tuples`, so
    ``q! ||f_n||^2 -> K_c / (q! c^{d(q-1)})``.
    """
    K = len(_offset_tuples(q, d, c))
    return K / (math.factorial(q) * c ** (d * (q - 1)))


def spec_alpha(spec: CliqueKernelSpec) -> float:
    return clique_alpha(spec.q, spec.d, spec.radius / spec.step)


def build_clique_kernel(spec: CliqueKernelSpec) -> ElementaryKernel:
    q, d = spec.q, spec.d
    P, h, z = spec.per_axis, spec.step, spec.half_side
    fam = CellFamily.grid(-z, z, h, d)
    combos = _offset_tuples(q, d, spec.radius / h)
    grid_idx = np.stack(np.meshgrid(*([np.arange(P)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    strides = P ** np.arange(d - 1, -1, -1)
    rows = []
    for combo in combos:
        cols = [grid_idx]
        ok = np.ones(len(grid_idx), dtype=bool)
        for off in combo:
            pos = grid_idx + np.asarray(off)
            ok &= np.all((pos >= 0) & (pos < P), axis=1)
            cols.append(pos)
        tup = np.stack([c[ok] @ strides for c in cols], axis=1)
        rows.append(tup)
    coords = np.concatenate(rows) if rows else np.zeros((0, q), np.int64)
    return ElementaryKernel(fam, q, coords, np.full(len(coords), 1.0 / math.factorial(q)))


def clique_metadata(specs: Sequence[CliqueKernelSpec]) -> dict:
    """``M_n = 1/q!``, ``z_n = n^{1/d}/2``, ``alpha_n = r_n`` for each spec."""
    return {"M": [1.0 / math.factorial(s.q) for s in specs],
            "z": [s.half_side for s in specs],
            "alpha": [s.radius for s in specs]}


def contraction_pairs(q: int) -> list[tuple[int, int]]:
    """``(r, l)`` with ``r = 1..q`` and ``l = 1..min(r, q-1)``."""
    return [(r, l) for r in range(1, q + 1) for l in range(1, min(r, q - 1) + 1)]


@dataclass
class ExperimentRow:
    n: float
    q: int
    d: int
    h: float
    r_n: float
    ncells: int
    nnz: int
    qfact_norm2: float
    norm2: float
    l4: float
    contraction_norms: dict
    kappa: dict
    chi: dict
    runtimes: dict = field(default_factory=dict)

    def flat(self) -> dict:
        out = {k: getattr(self, k) for k in ("n", "q", "d", "h", "r_n", "ncells", "nnz", "qfact_norm2",
                                             "norm2", "l4")}
        for (r, l), v in sorted(self.contraction_norms.items()):
            out[f"star_{r}_{l}"] = v
        for m, v in sorted(self.kappa.items()):
            out[f"kappa_{m}"] = v
        for m, v in sorted(self.chi.items()):
            out[f"chi_{m}"] = v
        return out

    def to_json(self) -> dict:
        d = self.flat()
        d["runtimes"] = dict(self.runtimes)
        return d


def experiment_row(spec: CliqueKernelSpec, m_max: int = 4, classical: bool = True) -> ExperimentRow:
    t0 = time.perf_counter()
    f = build_clique_kernel(spec)
    t1 = time.perf_counter()
    norm2 = l2_norm(f) ** 2
    cn = {(r, l): l2_norm(star_contraction(f, f, r, l)) for r, l in contraction_pairs(spec.q)}
    t2 = time.perf_counter()
    kappa = {m: free_cumulant_poisson(f, m).real for m in range(2, m_max + 1)}
    t3 = time.perf_counter()
    chi = {m: classical_cumulant_poisson(f, m).real for m in range(2, m_max + 1)} if classical else {}
    t4 = time.perf_counter()
    return ExperimentRow(
        n=spec.n, q=spec.q, d=spec.d, h=spec.step, r_n=spec.radius, ncells=len(f.family), nnz=f.nnz,
        qfact_norm2=math.factorial(spec.q) * norm2, norm2=norm2, l4=l4_norm(f),
        contraction_norms=cn, kappa=kappa, chi=chi,
        runtimes={"build": t1 - t0, "contractions": t2 - t1, "free": t3 - t2, "classical": t4 - t3},
    )


def contraction_norm_sweep(specs: Sequence[CliqueKernelSpec], m_max: int = 4, jobs: int = 1,
                           classical: bool = True) -> list[ExperimentRow]:
    """One :class:`ExperimentRow` per spec, in input order."""
    if not specs:
        raise ValueError("empty sweep grid")
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(experiment_row, specs, [m_max] * len(specs), [classical] * len(specs)))
    return [experiment_row(s, m_max, classical) for s in specs]


sweep = contraction_norm_sweep


def default_grid(q: int = 2, d: int = 1, ns: Sequence[float] = (8, 16, 32, 64)) -> list[CliqueKernelSpec]:
    return [CliqueKernelSpec(q=q, d=d, n=n) for n in ns]


def _strictly_decreasing(xs: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


def _extrapolate(ns: Sequence[float], ys: Sequence[float]) -> float:
    """Limit of ``y = a + b/n`` fitted through the last two points."""
    if len(ns) < 2:
        return float(ys[-1])
    n1, n2 = ns[-2], ns[-1]
    y1, y2 = ys[-2], ys[-1]
    return (n2 * y2 - n1 * y1) / (n2 - n1)


@dataclass
class ConvergenceReport:
    rows: list[ExperimentRow]
    alpha: float
    flags: dict
    extrapolated: dict
    deviations: dict
    thresholds: dict

    @property
    def ok(self) -> bool:
        return all(v for k, v in self.flags.items() if k in ("free_cumulants_vanish", "classical_chi3_near_alpha",
                                                              "contractions_decrease"))

    def to_json(self) -> dict:
        return {"format_version": FORMAT_VERSION, "alpha": self.alpha, "flags": self.flags,
                "extrapolated": self.extrapolated, "deviations": self.deviations,
                "thresholds": self.thresholds, "rows": [r.to_json() for r in self.rows]}


def convergence_report(specs: Sequence[CliqueKernelSpec], m_max: int = 4, ratio_gate: float = 0.5,
                       alpha_gate: float = 0.15, rows: Sequence[ExperimentRow] | None = None,
                       jobs: int = 1) -> ConvergenceReport:
    """Finite-n trend checks for the four limits of the clique sequence.

    * free Poisson and semicircular: free ``kappa_3``, ``kappa_4`` decrease and
      shrink by ``ratio_gate`` over the grid;
    * classical Poisson: ``chi_3`` at the largest ``n`` within ``alpha_gate`` of
      the analytic ``alpha``;
    * Gaussian (via contraction conditions): every ``||f star_r^l f||``
      decreases along the grid, while ``||f||_4`` does not vanish.
    """
    specs = list(specs)
    if not specs:
        raise ValueError("empty sweep grid")
    if len({(s.q, s.d) for s in specs}) != 1:
        raise ValueError("a convergence grid needs a single (q, d)")
    alpha = spec_alpha(specs[-1])
    rows = list(rows) if rows is not None else contraction_norm_sweep(specs, m_max, jobs)
    ns = [r.n for r in rows]
    flags, extra, dev = {}, {}, {}
    free_ok = True
    for m in (3, 4):
        if m > m_max:
            continue
        seq = [abs(r.kappa[m]) for r in rows]
        ratio = seq[-1] / seq[0] if seq[0] else 0.0
        dev[f"kappa_{m}_ratio"] = ratio
        extra[f"kappa_{m}"] = _extrapolate(ns, [r.kappa[m] for r in rows])
        free_ok &= _strictly_decreasing(seq) and ratio < ratio_gate
    flags["free_cumulants_vanish"] = free_ok
    chi_ok = True
    for m in range(3, m_max + 1):
        last = rows[-1].chi.get(m)
        if last is None:
            continue
        dev[f"chi_{m}_rel_to_alpha"] = abs(last - alpha) / alpha
        extra[f"chi_{m}"] = _extrapolate(ns, [r.chi[m] for r in rows])
    if 3 <= m_max and rows[-1].chi:
        chi_ok = dev["chi_3_rel_to_alpha"] < alpha_gate
    flags["classical_chi3_near_alpha"] = chi_ok
    cn_ok = all(_strictly_decreasing([r.contraction_norms[p] for r in rows]) for p in rows[0].contraction_norms)
    flags["contractions_decrease"] = cn_ok
    flags["l4_norm_persists"] = rows[-1].l4 > 0.5 * rows[0].l4
    flags["isometry_rows"] = all(math.isclose(r.kappa[2], r.norm2, rel_tol=1e-10) for r in rows)
    extra["qfact_norm2"] = _extrapolate(ns, [r.qfact_norm2 for r in rows])
    dev["qfact_norm2_rel_to_alpha"] = abs(rows[-1].qfact_norm2 - alpha) / alpha
    return ConvergenceReport(rows, alpha, flags, extra, dev,
                             {"ratio_gate": ratio_gate, "alpha_gate": alpha_gate})


def discretization_stability(spec: CliqueKernelSpec, m_max: int = 4) -> dict:
    """Relative change of each reported quantity when the grid step is halved."""
    a = experiment_row(spec, m_max)
    b = experiment_row(spec.halved(), m_max)
    fa, fb = a.flat(), b.flat()
    out = {}
    for k, v in fa.items():
        if k in ("n", "q", "d", "h", "r_n", "ncells", "nnz"):
            continue
        w = fb[k]
        out[k] = abs(w - v) / max(abs(v), 1e-300)
    return out


@dataclass
class FourthMomentCheck:
    moment4: float
    leading: float
    gap: float
    decomposition: dict
    gap_matches: bool

    @property
    def strictly_positive(self) -> bool:
        return self.gap > 0


def fourth_moment_equivalence_check(f: ElementaryKernel, rel: float = 1e-10) -> FourthMomentCheck:
    """Gap ``phi(I^4) - 2 ||f||^4`` from the diagram formula, against the sum of
    squared contraction norms."""
    if not is_mirror_symmetric(f, rel=1e-10):
        raise HypothesisError("fourth-moment check needs a mirror-symmetric kernel")
    dec = fourth_moment_identity(f)
    m4 = free_moment_poisson(f, 4).real
    gap = m4 - dec.leading
    ok = abs(gap - dec.gap) <= max(1e-12, rel * max(abs(m4), 1.0))
    return FourthMomentCheck(m4, dec.leading, gap, dec.to_json(), ok)


@dataclass
class SingleIntegralReport:
    int_f4: list[float]
    norm2: list[float]
    kappa3_free: list[float]
    chi3_classical: list[float]
    criterion: str  # "satisfied", "fails" or "degenerate"


def single_integral_criteria(f_seq: Sequence[ElementaryKernel], ratio_gate: float = 0.5) -> SingleIntegralReport:
    """For order-one kernels, track ``int f^4`` (semicircular / normal criterion),
    ``||f||^2`` and the third cumulants ``int f^3`` (free and classical agree).

    The criterion counts as satisfied when ``int f^4`` strictly decreases and
    shrinks by ``ratio_gate`` over the sequence.
    """
    f_seq = list(f_seq)
    if any(f.order != 1 for f in f_seq):
        raise ArityError("single-integral criteria need order-one kernels")
    if any(np.abs(f.vals.imag).max(initial=0.0) > 0 for f in f_seq):
        raise HypothesisError("single-integral criteria need real kernels")

    def power(f, p):
        mu = f.family.measures[f.coords[:, 0]]
        return math.fsum((f.vals.real ** p * mu).tolist())

    f4 = [power(f, 4) for f in f_seq]
    n2 = [power(f, 2) for f in f_seq]
    k3 = [power(f, 3) for f in f_seq]
    chi3 = [classical_cumulant_poisson(f, 3).real for f in f_seq]
    if all(v == 0 for v in f4):
        crit = "degenerate"
    elif len(f4) > 1 and _strictly_decreasing(f4) and f4[-1] < ratio_gate * f4[0]:
        crit = "satisfied"
    else:
        crit = "fails"
    return SingleIntegralReport(f4, n2, k3, chi3, crit)


def tamedness_check(specs: Sequence[CliqueKernelSpec], m_max: int = 3):
    """:func:`tamedness_bound` on clique kernels with their natural metadata."""
    kernels = [build_clique_kernel(s) for s in specs]
    return tamedness_bound(kernels, m_max, clique_metadata(specs))


# output

def rows_to_csv(rows: Sequence[ExperimentRow]) -> str:
    buf = io.StringIO()
    flat = [r.flat() for r in rows]
    cols = list(flat[0]) if flat else []
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\r\n")
    w.writeheader()
    for row in flat:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def rows_to_json(rows: Sequence[ExperimentRow], include_runtimes: bool = False) -> dict:
    out = []
    for r in rows:
        d = r.flat()
        if include_runtimes:
            d["runtimes"] = dict(r.runtimes)
        out.append(d)
    return {"format_version": FORMAT_VERSION, "rows": out}


def write_dat_files(rows: Sequence[ExperimentRow], directory) -> list:
    """One two-column ``n value`` file per tracked quantity."""
    import pathlib
    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    if not rows:
        return written
    for key in rows[0].flat():
        if key in ("n", "q", "d"):
            continue
        path = directory / f"{key}.dat"
        with open(path, "w") as fh:
            fh.write(f"# n {key}\n")
            for r in rows:
                fh.write(f"{r.n!r} {r.flat()[key]!r}\n")
        written.append(path)
    return written
