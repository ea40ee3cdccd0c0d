"""Multiple integrals against free Poisson and semicircular measures: partition
enumeration, diagram formulas, a full Fock space oracle and clique-kernel
convergence diagnostics."""
from .diagrams import Kind, cumulant, moment
from .errors import (ArityError, CapExceededError, DepthOverflowError, DiagonalKernelError,
                     FamilyMismatchError, FreePoissonError, HypothesisError, SizeMismatchError)
from .kernels import CellFamily, ElementaryKernel, star_contraction
from .partitions import PartitionClass, SetPartition, enumerate_class

__version__ = "0.1.0"
