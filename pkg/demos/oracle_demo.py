"""Diagram formulas against the Fock-space oracle on a small random kernel."""
import numpy as np

from freepoisson.diagrams import moment
from freepoisson.fock import moment_sequence
from freepoisson.kernels import CellFamily, random_kernel
from freepoisson.suites import self_adjoint

rng = np.random.default_rng(0)
fam = CellFamily.from_measures([0.5, 1.0, 1.5])
f = self_adjoint(random_kernel(fam, 2, rng))

for kind in ("free_poisson", "semicircular"):
    oracle = moment_sequence(f, kind, 5)
    print(kind)
    for m in range(1, 6):
        d = moment(f, m, kind)
        print(f"  m={m}  diagram={d.real: .10f}  fock={oracle[m].real: .10f}  diff={abs(d - oracle[m]):.1e}")
