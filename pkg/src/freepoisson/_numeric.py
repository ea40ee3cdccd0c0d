import math

import numpy as np

REL_TOL = 1e-10
ABS_TOL = 1e-12


def csum(values) -> complex:
    """Compensated sum of complex numbers (real and imaginary parts separately)."""
    vals = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=complex)
    return complex(math.fsum(vals.real.tolist()), math.fsum(vals.imag.tolist()))


def close(a, b, rel: float = REL_TOL, abs_: float = ABS_TOL) -> bool:
    return abs(complex(a) - complex(b)) <= max(abs_, rel * max(abs(complex(a)), abs(complex(b))))


def rel_err(a, b, floor: float = ABS_TOL) -> float:
    a, b = complex(a), complex(b)
    return abs(a - b) / max(floor, abs(a), abs(b))
