import logging
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import linalg, sparse

from app.core.config import settings
from app.core.exceptions import ArgumentError, NumericalRankError
from app.models.schema import FourierRep, GridSpec, KernelSpec, SplineCoefficients
from app.services import kernel_engine, torus_lattice
from app.services.kernel_engine import KernelTable

logger = logging.getLogger(__name__)

_CHUNK = 1 << 14


def realized_kernel(kernel: KernelSpec, grid: GridSpec, tol: Optional[float] = None) -> KernelTable:
    """The truncated kernel shared by every spline built on this grid."""
    kernel_engine.check_dimension(kernel, grid.d)
    cap = settings.max_radius(grid.d)
    if cap < max(grid.n):
        raise ArgumentError(
            f"frequency budget {settings.MAX_FREQUENCIES} allows radius {cap} in d = {grid.d}; "
            f"n = {grid.n} needs at least {max(grid.n)}"
        )
    return kernel_engine.realize(kernel, grid.d, tol, min_radius=min(4 * max(grid.n), cap))


class FundamentalSpline:
    """
    The cardinal sk-spline: 1 at the zero knot, 0 at every other knot.

    Holds the exponential coefficients (1/N at m = 0, a_m / (N S_r(m)) where
    r(m) is not zero, nothing on the lattice 2nZ^d) and the equivalent
    sk-spline form 1/N + sum c_k K(x - x_k).
    """

    def __init__(
        self,
        kernel: KernelSpec,
        grid: GridSpec,
        table: KernelTable,
        rho0: np.ndarray,
        fourier: FourierRep,
        residue_index: np.ndarray,
        coeffs: SplineCoefficients,
    ):
        self.kernel = kernel
        self.grid = grid
        self.table = table
        self.rho0 = rho0
        self.fourier = fourier
        self.residue_index = residue_index
        self.coeffs = coeffs

    def __repr__(self) -> str:
        return f"FundamentalSpline(n={self.grid.n}, gamma={self.kernel.gamma:g}, terms={len(self.fourier.coeffs)})"

    @property
    def d(self) -> int:
        return self.grid.d

    @property
    def N(self) -> int:
        return self.grid.N

    def evaluate(self, points) -> np.ndarray:
        return self.fourier.evaluate(torus_lattice.to_torus(points, self.d)).real

    def evaluate_direct(self, points) -> np.ndarray:
        """1/N + (1/N) sum over j != 0 of rho_j(x) / rho_j(0), with rho_j expanded over its coset."""
        pts = torus_lattice.to_torus(points, self.d)
        r = self.table.residues(self.grid)
        live = r != 0
        weights = 2.0 * self.table.coeffs[live] / self.rho0[r[live]]
        freqs = self.table.freqs[live].astype(np.float64)
        total = np.zeros(len(pts))
        for start in range(0, len(freqs), _CHUNK):
            phase = pts @ freqs[start:start + _CHUNK].T
            total += np.cos(phase) @ weights[start:start + _CHUNK]
        return (1.0 + total) / self.N

    def translates(self, points) -> np.ndarray:
        """
        (P, N) matrix of s(x_p - x_k).

        Bins e^{i m.x_p} s_m by the residue of m, then one forward DFT over
        the residue axes shifts every translate at once.
        """
        pts = torus_lattice.to_torus(points, self.d)
        freqs = self.fourier.freqs.astype(np.float64)
        binned = np.zeros((self.N, len(pts)), dtype=np.complex128)
        for start in range(0, len(freqs), _CHUNK):
            stop = start + _CHUNK
            rows = self.residue_index[start:stop]
            binning = sparse.csr_array(
                (np.ones(len(rows)), (rows, np.arange(len(rows)))), shape=(self.N, len(rows))
            )
            waves = np.exp(1j * (freqs[start:stop] @ pts.T)) * self.fourier.coeffs[start:stop, None]
            binned += binning @ waves
        shaped = binned.T.reshape((len(pts),) + self.grid.shape)
        axes = tuple(range(1, self.d + 1))
        return np.fft.fftn(shaped, axes=axes).reshape(len(pts), self.N).real


def build_fundamental(kernel: KernelSpec, grid: GridSpec, tol: Optional[float] = None) -> FundamentalSpline:
    """
    Construct the fundamental sk-spline of the realized kernel.

    Args:
        kernel: Radial kernel law
        grid: Knot lattice
        tol: Truncation tolerance for the realized kernel and the lower
            bound every rho_j(0), j != 0, has to exceed

    Returns:
        FundamentalSpline

    Raises:
        SingularKernelError: some rho_j(0) <= tol
    """
    tol = kernel_engine.check_tol(settings.DERIVED_TOL if tol is None else tol)
    table = realized_kernel(kernel, grid, tol)
    rho0 = kernel_engine.rho_zero_all(table, grid, tol)
    N = grid.N

    r = table.residues(grid)
    live = r != 0
    d = grid.d
    freqs = np.vstack([np.zeros((1, d), dtype=np.int64), table.freqs[live]])
    coeffs = np.concatenate([[1.0 / N], 2.0 * table.coeffs[live] / (N * rho0[r[live]])]).astype(np.complex128)
    residue_index = np.concatenate([[0], r[live]])
    fourier = FourierRep(
        freqs=freqs,
        coeffs=coeffs,
        truncation_tail=2.0 * table.tail / (N * float(rho0[1:].min())) if N > 1 else 0.0,
    )

    w = np.zeros(N)
    w[1:] = 1.0 / rho0[1:]
    knot_coeffs = (2.0 / N) * np.fft.ifftn(w.reshape(grid.shape)).real.reshape(-1)
    spline_coeffs = SplineCoefficients(constant=1.0 / N, knot_coeffs=knot_coeffs)

    logger.info("Built fundamental sk-spline n=%s gamma=%g (%d terms)", grid.n, kernel.gamma, len(coeffs))
    return FundamentalSpline(kernel, grid, table, rho0, fourier, residue_index, spline_coeffs)


def fundamental_eval(fs: FundamentalSpline, x) -> np.ndarray:
    return fs.evaluate(x)


def fundamental_eval_direct(fs: FundamentalSpline, x) -> np.ndarray:
    return fs.evaluate_direct(x)


def cardinality_deviation(fs: FundamentalSpline) -> float:
    """max over knots of |s(x_k) - delta_k|."""
    values = fs.evaluate(torus_lattice.knots(fs.grid))
    delta = np.zeros(fs.N)
    delta[0] = 1.0
    return float(np.abs(values - delta).max())


class Interpolant:
    """sk_n(f, x) = sum over k of f(x_k) s(x - x_k)."""

    def __init__(self, fundamental: FundamentalSpline, samples: np.ndarray):
        self.fundamental = fundamental
        self.samples = samples
        self.spectrum = np.fft.fftn(samples.reshape(fundamental.grid.shape)).reshape(-1)

    @property
    def grid(self) -> GridSpec:
        return self.fundamental.grid

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.samples)

    @cached_property
    def fourier(self) -> FourierRep:
        fs = self.fundamental
        return FourierRep(
            freqs=fs.fourier.freqs,
            coeffs=fs.fourier.coeffs * self.spectrum[fs.residue_index],
            truncation_tail=fs.fourier.truncation_tail * float(np.abs(self.samples).sum()),
        )

    def _cast(self, values: np.ndarray) -> np.ndarray:
        return values.real if self.is_real else values

    def evaluate(self, points, method: str = "fourier") -> np.ndarray:
        """
        Evaluate at (P, d) points.

        method "fourier" sums the convolved coefficients (sample DFT times the
        fundamental's weights); "translates" forms every s(x - x_k) and
        contracts with the samples.
        """
        pts = torus_lattice.to_torus(points, self.grid.d)
        if method == "fourier":
            return self._cast(self.fourier.evaluate(pts))
        if method == "translates":
            return self._cast(self.fundamental.translates(pts) @ self.samples)
        raise ArgumentError(f"unknown evaluation method {method!r}")

    def evaluate_on_grid(self, M: int) -> np.ndarray:
        """Values on the uniform M^d grid, exact up to rounding for the truncated series."""
        return self._cast(self.fourier.evaluate_on_grid(M))


def _check_samples(samples, grid: GridSpec) -> np.ndarray:
    values = np.asarray(samples)
    if values.ndim != 1 or values.shape[0] != grid.N:
        raise ArgumentError(f"expected {grid.N} samples over Omega_n, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ArgumentError("samples must be finite")
    if np.iscomplexobj(values):
        return values.astype(np.complex128)
    return values.astype(np.float64)


def interpolate(fs: FundamentalSpline, samples) -> Interpolant:
    return Interpolant(fs, _check_samples(samples, fs.grid))


def interpolant_eval(ip: Interpolant, x, method: str = "fourier") -> np.ndarray:
    return ip.evaluate(x, method=method)


def gram_matrix(table: KernelTable, grid: GridSpec) -> np.ndarray:
    """K_L(x_i - x_k) over Omega_n x Omega_n."""
    values = table.knot_values(grid)
    omega = torus_lattice.omega_array(grid)
    flat = np.zeros((grid.N, grid.N), dtype=np.int64)
    stride = 1
    for axis in reversed(range(grid.d)):
        col = omega[:, axis]
        flat += np.mod(col[:, None] - col[None, :], grid.shape[axis]) * stride
        stride *= grid.shape[axis]
    return values[flat]


def solve_linear_system(
    kernel: KernelSpec,
    grid: GridSpec,
    samples,
    tol: Optional[float] = None,
) -> SplineCoefficients:
    """
    Dense oracle: solve the augmented (N+1) system

        [ G  1 ] [ c_k ]   [ y ]
        [ 1' 0 ] [ c   ] = [ 0 ]

    with G the Gram matrix of the realized kernel, by LU with partial pivoting.

    Raises:
        ArgumentError: N above DENSE_SOLVE_MAX_N or complex samples
        NumericalRankError: the factorization is singular
    """
    values = _check_samples(samples, grid)
    if np.iscomplexobj(values):
        raise ArgumentError("the dense oracle takes real samples")
    if grid.N > settings.DENSE_SOLVE_MAX_N:
        raise ArgumentError(f"N = {grid.N} exceeds the dense solve limit {settings.DENSE_SOLVE_MAX_N}")
    tol = kernel_engine.check_tol(settings.DERIVED_TOL if tol is None else tol)
    table = realized_kernel(kernel, grid, tol)

    N = grid.N
    system = np.zeros((N + 1, N + 1))
    system[:N, :N] = gram_matrix(table, grid)
    system[:N, N] = 1.0
    system[N, :N] = 1.0
    rhs = np.concatenate([values, [0.0]])

    lu, piv = linalg.lu_factor(system, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= np.finfo(float).eps * (N + 1) * pivots.max():
        rank = int(np.count_nonzero(pivots > np.finfo(float).eps * (N + 1) * pivots.max()))
        raise NumericalRankError(N + 1, rank, "Gram pivots collapsed")
    solution = linalg.lu_solve((lu, piv), rhs)

    knot_coeffs = solution[:N]
    logger.info("Solved dense interpolation system of size %d", N + 1)
    try:
        return SplineCoefficients(constant=float(solution[N]), knot_coeffs=knot_coeffs)
    except ValueError as exc:
        raise NumericalRankError(N + 1, detail=str(exc)) from exc


def spline_fourier(coeffs: SplineCoefficients, table: KernelTable, grid: GridSpec) -> FourierRep:
    """Exponential coefficients of c + sum c_k K_L(x - x_k): a_m C(r(m)) and c at m = 0."""
    C = np.fft.fftn(coeffs.knot_coeffs.reshape(grid.shape)).reshape(-1)
    r = table.residues(grid)
    freqs = np.vstack([np.zeros((1, grid.d), dtype=np.int64), table.freqs])
    values = np.concatenate([[coeffs.constant], table.coeffs * C[r]]).astype(np.complex128)
    return FourierRep(freqs=freqs, coeffs=values, truncation_tail=table.tail * float(np.abs(coeffs.knot_coeffs).sum()))


def spline_eval(coeffs: SplineCoefficients, table: KernelTable, grid: GridSpec, points) -> np.ndarray:
    return spline_fourier(coeffs, table, grid).evaluate(torus_lattice.to_torus(points, grid.d)).real


def knot_gram(fs: FundamentalSpline) -> np.ndarray:
    """Translates of the fundamental spline evaluated at the knots; the identity by cardinality."""
    return fs.translates(torus_lattice.knots(fs.grid))


def knot_rank(fs: FundamentalSpline) -> int:
    return int(np.linalg.matrix_rank(knot_gram(fs)))
