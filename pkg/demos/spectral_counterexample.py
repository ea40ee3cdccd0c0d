"""A single-cell kernel whose free Poisson integral escapes 4^q max(1, DK)^(q/2).

With f = D on a cell of measure K, the integral is D times a centered free
Poisson variable of rate K, whose spectrum reaches D (1 + 2 sqrt K) when K <= 1.
For D = 10, K = 0.01 that is 12 against a bound of 4.  Pulling D outside,
4^q D max(1, K)^(q/2) = 40, does hold.
"""
import math

from freepoisson.diagrams import spectral_bound_poisson, spectral_radius_estimate
from freepoisson.kernels import CellFamily, ElementaryKernel

D, K = 10.0, 0.01
f = ElementaryKernel.indicator(CellFamily.from_measures([K]), [0], D)
print(f"exact spectral radius        {D * (1 + 2 * math.sqrt(K)):.3f}")
print(f"moment ratio estimate (m=60) {spectral_radius_estimate(f, 'free_poisson', 60, method='ratio').value:.3f}")
print(f"4^q max(1, DK)^(q/2)         {spectral_bound_poisson(f):.3f}")
print(f"4^q D max(1, K)^(q/2)        {4 * D * max(1.0, K) ** 0.5:.3f}")
