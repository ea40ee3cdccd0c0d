"""Exception types shared across the package."""


class FreePoissonError(Exception):
    """Base class for all package errors."""


class CapExceededError(FreePoissonError):
    """An enumeration or state-space cap would be exceeded."""


class SizeMismatchError(FreePoissonError, ValueError):
    """Two partitions (or a partition and a block partition) live on different ground sets."""


class FamilyMismatchError(FreePoissonError, ValueError):
    """Kernels defined over different cell families were combined."""


class ArityError(FreePoissonError, ValueError):
    """Index or order arguments are incompatible with the kernels involved."""


class DiagonalKernelError(FreePoissonError, ValueError):
    """A diagram formula received a kernel that is not purely non-diagonal."""

    def __init__(self, msg=None):
        super().__init__(
            msg
            or "kernel carries coefficients on tuples with repeated cells; "
            "refine the cell family so that every support tuple has pairwise "
            "distinct cells"
        )


class DepthOverflowError(FreePoissonError):
    """A creation operator would push a Fock state past its truncation depth."""


class HypothesisError(FreePoissonError, ValueError):
    """An input violates the hypothesis an identity check is stated under."""
