"""Exact contraction of small tensor networks over a finite cell alphabet.

A network is a list of factors.  Each factor names the variables it depends
on and carries a coefficient table, either sparse (coordinate rows plus
values) or dense (an ndarray indexed by cell).  Every variable is summed over
the alphabet with a per-cell weight (the cell measures).  Dense networks go
through :func:`numpy.einsum`; sparse ones through greedy variable elimination
built from sort-based joins, so that kernels on thousands of cells never get
materialised densely.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass
class Factor:
    """Sparse factor: ``coords[r, i]`` is the cell of ``vars[i]`` in row ``r``."""

    vars: tuple[int, ...]
    coords: np.ndarray
    vals: np.ndarray

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.int64).reshape(len(self.vals), len(self.vars))
        self.vals = np.asarray(self.vals, dtype=np.complex128)

    def with_distinct_vars(self) -> "Factor":
        """Restrict to the diagonal where repeated variable labels coincide."""
        if len(set(self.vars)) == len(self.vars):
            return self
        keep_cols, seen = [], {}
        mask = np.ones(len(self.vals), dtype=bool)
        for i, v in enumerate(self.vars):
            if v in seen:
                mask &= self.coords[:, i] == self.coords[:, seen[v]]
            else:
                seen[v] = i
                keep_cols.append(i)
        return Factor(tuple(self.vars[i] for i in keep_cols),
                      self.coords[mask][:, keep_cols], self.vals[mask])


def _group_sum(coords: np.ndarray, vals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if coords.shape[1] == 0:
        return np.zeros((1, 0), dtype=np.int64), np.array([vals.sum()], dtype=np.complex128)
    if len(vals) == 0:
        return coords, vals
    uniq, inv = np.unique(coords, axis=0, return_inverse=True)
    inv = inv.ravel()
    re = np.bincount(inv, weights=vals.real, minlength=len(uniq))
    im = np.bincount(inv, weights=vals.imag, minlength=len(uniq))
    return uniq, re + 1j * im


def _join(a: Factor, b: Factor) -> Factor:
    shared = [v for v in a.vars if v in b.vars]
    ia = [a.vars.index(v) for v in shared]
    ib = [b.vars.index(v) for v in shared]
    extra_b = [i for i, v in enumerate(b.vars) if v not in shared]
    out_vars = a.vars + tuple(b.vars[i] for i in extra_b)
    if len(a.vals) == 0 or len(b.vals) == 0:
        return Factor(out_vars, np.zeros((0, len(out_vars)), np.int64), np.zeros(0, np.complex128))
    if shared:
        both = np.concatenate([a.coords[:, ia], b.coords[:, ib]], axis=0)
        _, key = np.unique(both, axis=0, return_inverse=True)
        key = key.ravel()
        ka, kb = key[: len(a.vals)], key[len(a.vals):]
    else:
        ka = np.zeros(len(a.vals), np.int64)
        kb = np.zeros(len(b.vals), np.int64)
    order = np.argsort(kb, kind="stable")
    kb_sorted = kb[order]
    lo = np.searchsorted(kb_sorted, ka, side="left")
    hi = np.searchsorted(kb_sorted, ka, side="right")
    cnt = hi - lo
    rows_a = np.repeat(np.arange(len(ka)), cnt)
    # offsets within each matching run of b
    starts = np.repeat(lo, cnt)
    run_pos = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    rows_b = order[starts + run_pos]
    coords = np.concatenate([a.coords[rows_a], b.coords[rows_b][:, extra_b]], axis=1)
    return Factor(out_vars, coords, a.vals[rows_a] * b.vals[rows_b])


def _sum_out(f: Factor, var: int) -> Factor:
    i = f.vars.index(var)
    keep = [j for j in range(len(f.vars)) if j != i]
    coords, vals = _group_sum(f.coords[:, keep], f.vals)
    return Factor(tuple(f.vars[j] for j in keep), coords, vals)


def contract_sparse(factors: Sequence[Factor], weights: np.ndarray, n_vars: int) -> complex:
    """Sum over all variable assignments of the product of factors and weights.

    Every variable ``0..n_vars-1`` is summed over the alphabet with weight
    ``weights[cell]``.
    """
    weights = np.asarray(weights, dtype=float)
    work = [f.with_distinct_vars() for f in factors]
    scalar = 1.0 + 0j
    # attach each variable's weight to the first factor that mentions it
    for v in range(n_vars):
        for k, f in enumerate(work):
            if v in f.vars:
                col = f.vars.index(v)
                work[k] = Factor(f.vars, f.coords, f.vals * weights[f.coords[:, col]])
                break
        else:
            scalar *= weights.sum()
    pending = set(range(n_vars)) & {v for f in work for v in f.vars}
    while pending:
        # greedy: eliminate the variable whose joined factors are smallest
        def cost(v):
            return math.prod(len(f.vals) + 1 for f in work if v in f.vars)

        v = min(sorted(pending), key=cost)
        touching = [f for f in work if v in f.vars]
        work = [f for f in work if v not in f.vars]
        acc = touching[0]
        for f in touching[1:]:
            acc = _join(acc, f)
        work.append(_sum_out(acc, v))
        pending.discard(v)
    for f in work:
        scalar *= f.vals.sum() if len(f.vals) else 0.0
    return complex(scalar)


_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


def contract_dense(operands: Sequence[tuple[np.ndarray, Sequence[int]]], weights: np.ndarray,
                   n_vars: int) -> complex:
    """Dense counterpart of :func:`contract_sparse` via ``numpy.einsum``.

    ``operands`` pairs each dense table with the variable labels of its axes;
    repeated labels inside one operand take the diagonal.
    """
    if n_vars > len(_LETTERS):
        raise ValueError("too many variables for einsum")
    args = []
    for arr, labels in operands:
        args.append(arr)
        args.append(list(labels))
    w = np.asarray(weights, dtype=float)
    for v in range(n_vars):
        args.append(w)
        args.append([v])
    args.append([])
    return complex(np.einsum(*args, optimize="greedy"))
