"""Error types raised by the skspline services.

Every error carries the exit code the command line maps it to.
"""

from typing import Optional, Sequence


class SkSplineError(Exception):
    exit_code: int = 1


class ArgumentError(SkSplineError, ValueError):
    """Malformed input: wrong lengths, non-positive tolerances, unresolved grids."""

    exit_code = 2


class DomainError(SkSplineError, ValueError):
    """Input outside the mathematical domain of an operation."""

    exit_code = 2


class HypothesisError(DomainError):
    """A hypothesis of the approximation theorem does not hold."""


class OutputError(SkSplineError, OSError):
    exit_code = 3


class NumericalError(SkSplineError):
    exit_code = 4


class SingularKernelError(NumericalError):
    def __init__(self, index: Sequence[int], value: float, tol: float):
        self.index = tuple(int(i) for i in index)
        self.value = value
        super().__init__(
            f"rho_j(0) = {value:.3e} <= {tol:.1e} for j = {self.index}; "
            "the fundamental sk-spline does not exist for this kernel"
        )


class NumericalRankError(NumericalError):
    def __init__(self, size: int, rank: Optional[int] = None, detail: str = ""):
        self.size = size
        self.rank = rank
        msg = f"interpolation system of size {size} is numerically singular"
        if rank is not None:
            msg += f" (rank {rank})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class TruncationError(NumericalError):
    def __init__(self, what: str, bound: float, tol: float):
        self.bound = bound
        self.tol = tol
        super().__init__(
            f"{what}: certified tail {bound:.3e} does not reach tol {tol:.1e} "
            "inside the frequency budget (raise MAX_FREQUENCIES or loosen tol)"
        )
