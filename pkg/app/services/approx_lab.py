import logging
import math
from typing import List, Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed
from scipy import special

from app.core.config import settings
from app.core.exceptions import ArgumentError, DomainError, HypothesisError, TruncationError
from app.models.schema import (
    FourierRep,
    GridSpec,
    KernelSpec,
    RateSpec,
    StudyResult,
    StudyRow,
    TestFunction,
)
from app.services import kernel_engine, sk_spline, torus_lattice
from app.services.kernel_engine import KernelTable
from app.services.sk_spline import FundamentalSpline

logger = logging.getLogger(__name__)

SUP_REFINE_TOLERANCE = 0.05


def _default_M(bandwidth: int) -> int:
    return max(8, 8 * bandwidth)


def lp_norm(g: Union[FourierRep, np.ndarray], p: float, M: Optional[int] = None) -> float:
    """
    L^p norm for the normalized measure on the torus, by uniform quadrature.

    Args:
        g: Trigonometric series, or values already sampled on an M^d grid
        p: Exponent in [1, inf]
        M: Points per axis; must be at least 4x the bandwidth of a series

    Returns:
        (mean |g|^p)^(1/p) over the grid, or max |g| for p = inf
    """
    if not (p >= 1):
        raise ArgumentError(f"p must lie in [1, inf], got {p}")
    if isinstance(g, FourierRep):
        bandwidth = g.bandwidth()
        M = _default_M(bandwidth) if M is None else int(M)
        if M < 4 * bandwidth or M < 1:
            raise ArgumentError(f"M = {M} cannot resolve bandwidth {bandwidth}; need M >= {4 * bandwidth}")
        values = g.evaluate_on_grid(M)
    else:
        values = np.asarray(g)
    magnitude = np.abs(values)
    if math.isinf(p):
        return float(magnitude.max())
    return float(np.mean(magnitude ** p) ** (1.0 / p))


def knot_samples(target: FourierRep, grid: GridSpec) -> np.ndarray:
    """
    Values of a trigonometric polynomial on the knots.

    The imaginary part is dropped only when it is rounding noise relative
    to the largest sample; a genuinely complex target stays complex.
    """
    samples = target.evaluate(torus_lattice.knots(grid))
    scale = max(1.0, float(np.abs(samples).max()))
    if np.all(np.abs(samples.imag) <= 1e-14 * scale):
        return samples.real
    return samples


def multiplier(kernel: KernelSpec, phi: FourierRep) -> FourierRep:
    """K * phi: every coefficient of phi multiplied by a_m."""
    return FourierRep(freqs=phi.freqs, coeffs=kernel_engine.coefficients(kernel, phi.freqs) * phi.coeffs)


def sobolev_instance(
    kernel: KernelSpec,
    phi: FourierRep,
    p: float,
    normalize: bool = True,
    M: Optional[int] = None,
) -> TestFunction:
    """
    Build f = K * phi for a finite trigonometric polynomial phi.

    With normalize, phi is rescaled to unit L^p norm (quadrature at M) so
    that f belongs to K * U_p.
    """
    if len(phi.coeffs) == 0:
        raise ArgumentError("phi must have at least one term")
    if not (1 <= p <= 2):
        raise DomainError(f"p must lie in [1, 2], got {p}")
    norm = lp_norm(phi, p, M)
    if normalize:
        if norm == 0.0:
            raise ArgumentError("cannot normalize phi with zero L^p norm")
        phi = FourierRep(freqs=phi.freqs, coeffs=phi.coeffs / norm)
        norm = lp_norm(phi, p, M)
    return TestFunction(
        phi_coeffs=phi,
        f_coeffs=multiplier(kernel, phi),
        p=p,
        p_norm_of_phi=norm,
        normalized=normalize,
    )


def _error_grid(f: FourierRep, ip: sk_spline.Interpolant, M: int) -> np.ndarray:
    return f.evaluate_on_grid(M) - ip.fourier.evaluate_on_grid(M)


def approximation_error(
    f: TestFunction,
    kernel: KernelSpec,
    grid: GridSpec,
    q: float,
    M: Optional[int] = None,
    tol: Optional[float] = None,
    fundamental: Optional[FundamentalSpline] = None,
) -> float:
    """
    ||f - sk_n(f, .)||_q measured on an M^d grid.

    The sup norm is measured at M and at 2M; the 2M value is returned and a
    warning is logged when the two differ by more than 5 %.
    """
    target = f.f_coeffs
    if target.d != grid.d:
        raise ArgumentError(f"test function lives in d = {target.d}, grid in d = {grid.d}")
    bandwidth = target.bandwidth()
    floor = max(4 * bandwidth, 2 * max(grid.shape))
    M = max(_default_M(bandwidth), 2 * max(grid.shape)) if M is None else int(M)
    if M < floor:
        raise ArgumentError(f"M = {M} too small for bandwidth {bandwidth} on n = {grid.n}; need M >= {floor}")

    fs = fundamental or sk_spline.build_fundamental(kernel, grid, tol)
    ip = sk_spline.interpolate(fs, knot_samples(target, grid))

    error = lp_norm(_error_grid(target, ip, M), q)
    if math.isinf(q):
        refined = lp_norm(_error_grid(target, ip, 2 * M), q)
        if error > 0 and abs(refined - error) > SUP_REFINE_TOLERANCE * max(refined, error):
            logger.warning("Sup-norm grid maximum moved %.1f%% from M=%d to M=%d", 100 * abs(refined - error) / max(refined, error), M, 2 * M)
        error = refined
    return error


def check_rate_spec(spec: RateSpec) -> RateSpec:
    message = spec.hypothesis_violation()
    if message:
        raise HypothesisError(message)
    return spec


def rate_exponent(spec: RateSpec) -> float:
    """Predicted log-log slope -gamma + d (1/p - 1/q)."""
    check_rate_spec(spec)
    return -spec.gamma + spec.d * spec.gap


def _tail_sum_power(kernel: KernelSpec, grid: GridSpec, s: float, tol: float) -> float:
    """Sum of a_l^s over |l| >= |n|, with the truncation checked against tol."""
    n_vec = np.asarray(grid.n, dtype=np.int64)
    radius = float(kernel_engine.frequency_norms(kernel, n_vec.reshape(1, -1))[0])
    if grid.d == 1 and kernel.is_power_law:
        return 2.0 * kernel.scale ** s * float(special.zeta(s * kernel.gamma, radius))

    if kernel.is_power_law and kernel.norm_kind == "l2":
        # full lattice sum minus the finitely many l with 0 < |l| < |n|; the
        # difference is small, so the full sum is taken well below tol
        full, _ = kernel_engine.epstein_sum(
            s * kernel.gamma, np.zeros(grid.d, dtype=np.int64), np.ones(grid.d, dtype=np.int64),
            np.zeros(grid.d), min(tol, 1e-14) / kernel.scale ** s,
        )
        reach = int(math.ceil(radius))
        axis = np.arange(-reach, reach + 1, dtype=np.int64)
        freqs = np.stack(np.meshgrid(*([axis] * grid.d), indexing="ij"), axis=-1).reshape(-1, grid.d)
        norms = kernel_engine.frequency_norms(kernel, freqs)
        inner = kernel_engine.coefficients(kernel, freqs[norms < radius - 1e-12]) ** s
        return max(kernel.scale ** s * full.real - float(inner.sum()), 0.0)

    cap = settings.max_radius(grid.d)
    L = 1 << int(math.ceil(math.log2(max(radius, 2.0))))
    while L < cap and kernel_engine.box_tail(kernel, grid.d, L, s) > tol:
        L *= 2
    L = min(L, cap)
    tail = kernel_engine.box_tail(kernel, grid.d, L, s)
    if tail > tol:
        logger.warning("Theoretical bound tail %.3e exceeds tol %.1e at radius %d", tail, tol, L)

    axis = np.arange(-L, L + 1, dtype=np.int64)
    freqs = np.stack(np.meshgrid(*([axis] * grid.d), indexing="ij"), axis=-1).reshape(-1, grid.d)
    norms = kernel_engine.frequency_norms(kernel, freqs)
    keep = norms >= radius - 1e-12
    return float((kernel_engine.coefficients(kernel, freqs[keep]) ** s).sum())


def theoretical_bound(kernel: KernelSpec, grid: GridSpec, spec: RateSpec, tol: Optional[float] = None) -> float:
    """
    Shape of the error bound: (sum over |l| >= |n| of a_l^s)^(1/p - 1/q)
    with s = qp/(q - p), and s = p when q = inf. The constant is taken as 1.
    """
    check_rate_spec(spec)
    tol = kernel_engine.check_tol(settings.DERIVED_TOL if tol is None else tol)
    kernel_engine.check_dimension(kernel, grid.d)
    s = spec.tail_exponent
    if kernel.is_power_law and s * kernel.gamma <= grid.d:
        raise DomainError(f"tail of a_l^{s:g} diverges for gamma = {kernel.gamma:g}, d = {grid.d}")
    return _tail_sum_power(kernel, grid, s, tol) ** spec.gap


def fit_slope(n_values: Sequence[int], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(n); the smallest n is dropped when more than two remain."""
    n_arr = np.asarray(n_values, dtype=np.float64)
    e_arr = np.maximum(np.asarray(errors, dtype=np.float64), np.finfo(float).tiny)
    if len(n_arr) > 2:
        n_arr, e_arr = n_arr[1:], e_arr[1:]
    slope, _ = np.polyfit(np.log(n_arr), np.log(e_arr), 1)
    return float(slope)


def observed_orders(rows: Sequence[StudyRow]) -> List[float]:
    """Per-step orders log(e_{i+1}/e_i) / log(n_{i+1}/n_i)."""
    orders = []
    for prev, curr in zip(rows, rows[1:]):
        if prev.measured_error <= 0 or curr.measured_error <= 0:
            orders.append(float("nan"))
            continue
        orders.append(math.log(curr.measured_error / prev.measured_error) / math.log(curr.n / prev.n))
    return orders


def study_M(phi: FourierRep, n_list: Sequence[int]) -> int:
    """One quadrature size for every row: 8 max(bandwidth(phi), 2 max n)."""
    return 8 * max(phi.bandwidth(), 2 * max(n_list))


def _study_row(
    kernel: KernelSpec,
    spec: RateSpec,
    phi: FourierRep,
    n: int,
    M: int,
    tol: float,
    normalize: bool,
) -> StudyRow:
    grid = GridSpec.uniform(n, spec.d)
    f = sobolev_instance(kernel, phi, spec.p, normalize=normalize, M=M)
    error = approximation_error(f, kernel, grid, spec.q, M=M, tol=tol)
    bound = theoretical_bound(kernel, grid, spec, tol)
    logger.info("Study row n=%d: error=%.4e bound=%.4e", n, error, bound)
    return StudyRow(
        n=n,
        q=spec.q,
        p=spec.p,
        gamma=spec.gamma,
        d=spec.d,
        measured_error=error,
        theoretical_bound=bound,
        bound_exponent=rate_exponent(spec),
    )


def run_convergence_study(
    kernel: KernelSpec,
    spec: RateSpec,
    phi: FourierRep,
    n_list: Sequence[int],
    M: Optional[int] = None,
    tol: Optional[float] = None,
    normalize: bool = True,
    n_jobs: Optional[int] = None,
) -> StudyResult:
    """
    Measure ||f - sk_n(f, .)||_q for a fixed representative f = K * phi over
    increasing n and fit the log-log slope.

    Rows are computed in parallel threads (one spline per n) and returned in
    n order.
    """
    check_rate_spec(spec)
    if abs(kernel.gamma - spec.gamma) > 1e-12:
        raise ArgumentError(f"kernel gamma {kernel.gamma:g} differs from rate gamma {spec.gamma:g}")
    n_list = [int(n) for n in n_list]
    if len(n_list) < 2 or any(b <= a for a, b in zip(n_list, n_list[1:])) or n_list[0] < 1:
        raise ArgumentError(f"n_list must be positive, increasing, with at least two entries: {n_list}")
    if phi.d != spec.d:
        raise ArgumentError(f"phi lives in d = {phi.d}, study in d = {spec.d}")
    tol = kernel_engine.check_tol(settings.DERIVED_TOL if tol is None else tol)
    M = study_M(phi, n_list) if M is None else int(M)

    rows = Parallel(n_jobs=settings.n_jobs() if n_jobs is None else n_jobs, prefer="threads")(
        delayed(_study_row)(kernel, spec, phi, n, M, tol, normalize) for n in n_list
    )
    rows = sorted(rows, key=lambda row: row.n)
    slope = fit_slope([row.n for row in rows], [row.measured_error for row in rows])
    return StudyResult(
        rows=rows,
        fitted_slope=slope,
        predicted_exponent=rate_exponent(spec),
        observed_orders=observed_orders(rows),
    )


def harmonic_response(fs: FundamentalSpline, l: Sequence[int], points) -> np.ndarray:
    """sum over j of e^{i l.x_j} s(x - x_j), from the explicit translates."""
    phases = np.exp(1j * (torus_lattice.knots(fs.grid) @ np.asarray(l, dtype=np.float64)))
    return fs.translates(points) @ phases


def single_harmonic(table: KernelTable, l: Sequence[int], grid: GridSpec, points) -> np.ndarray:
    """lambda_l(x) / rho_l(0), written as (rho_l(x) + i sigma_l(x)) / rho_l(0)."""
    rho, sigma = table.rho_sigma(l, grid, points)
    rho0 = 2.0 * table.coset_sums(grid)[torus_lattice.flat_index(torus_lattice.residue(l, grid), grid)]
    return (rho + 1j * sigma) / rho0


def deviation(fs: FundamentalSpline, l: Sequence[int], points) -> np.ndarray:
    """theta_{n,l}(x) = e^{i l.x} - sum over j of e^{i l.x_j} s(x - x_j)."""
    pts = torus_lattice.to_torus(points, fs.d)
    return np.exp(1j * (pts @ np.asarray(l, dtype=np.float64))) - harmonic_response(fs, l, pts)


def deviations(fs: FundamentalSpline, ls: Sequence[Sequence[int]], points) -> np.ndarray:
    """theta_{n,l} for many l at once, shape (len(ls), P); the translates are built once."""
    pts = torus_lattice.to_torus(points, fs.d)
    ll = np.asarray(ls, dtype=np.float64).reshape(-1, fs.d)
    translates = fs.translates(pts)
    phases = np.exp(1j * (torus_lattice.knots(fs.grid) @ ll.T))
    return (np.exp(1j * (pts @ ll.T)) - translates @ phases).T


def deviation_bound(kernel: KernelSpec, grid: GridSpec, l: Sequence[int], x=None, tol: Optional[float] = None) -> float:
    """
    Upper bound on |theta_{n,l}(x)|.

    |e^{i l.x} - 1| when l = 0 mod 2n (needs x), min(4, 4 C a_{2n-|l|} / a_l)
    when 0 < |l_i| <= n_i with C the coset domination constant, 4 otherwise.
    When C cannot be certified at tol the bound falls back to 4.
    """
    ll = np.asarray(l, dtype=np.int64).reshape(-1)
    if torus_lattice.is_lattice_zero(ll, grid):
        if x is None:
            return 2.0
        point = torus_lattice.to_torus(x, grid.d)[0]
        return float(abs(np.exp(1j * float(ll @ point)) - 1.0))
    n = np.asarray(grid.n, dtype=np.int64)
    if np.all(np.abs(ll) <= n):
        try:
            C = kernel_engine.coset_domination_constant(kernel, grid, tol)
        except TruncationError as exc:
            logger.warning("Coset domination constant for n = %s not certified (%s); using 4", grid.n, exc)
            return 4.0
        ratio = kernel_engine.coeff(kernel, tuple(2 * n - np.abs(ll))) / kernel_engine.coeff(kernel, tuple(ll))
        return float(min(4.0, 4.0 * C * ratio))
    return 4.0


def translate_identity_residual(table: KernelTable, j: Sequence[int], grid: GridSpec, k: Sequence[int], points) -> float:
    """max |rho_j(x - x_k) - rho_j(x) cos(j.x_k) - sigma_j(x) sin(j.x_k)| over the points."""
    pts = torus_lattice.to_torus(points, grid.d)
    xk = torus_lattice.knot(k, grid)
    shifted, _ = table.rho_sigma(j, grid, pts - xk)
    rho, sigma = table.rho_sigma(j, grid, pts)
    phase = float(np.asarray(j, dtype=np.float64) @ xk)
    return float(np.abs(shifted - rho * math.cos(phase) - sigma * math.sin(phase)).max())


def convolve_by_quadrature(table: KernelTable, phi: FourierRep, M: int) -> np.ndarray:
    """
    (K * phi)(x) = integral of K(x - y) phi(y) dnu(y) on the M^d grid, as a
    discrete circular convolution of grid samples.
    """
    if phi.d != table.d:
        raise ArgumentError(f"phi lives in d = {phi.d}, kernel table in d = {table.d}")
    kernel_grid = table.grid_values(M)
    phi_grid = phi.evaluate_on_grid(M)
    return np.fft.ifftn(np.fft.fftn(kernel_grid) * np.fft.fftn(phi_grid)) / M ** table.d
