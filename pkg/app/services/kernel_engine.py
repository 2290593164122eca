import logging
import math
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import special

from app.core.config import settings
from app.core.exceptions import ArgumentError, DomainError, SingularKernelError, TruncationError
from app.models.schema import FourierRep, GridSpec, KernelSpec, LatticeSumValue
from app.services import torus_lattice

logger = logging.getLogger(__name__)

_CHUNK = 1 << 20


def check_tol(tol: float) -> float:
    if not (isinstance(tol, (int, float)) and math.isfinite(tol) and tol > 0):
        raise ArgumentError(f"tolerance must be a positive finite number, got {tol!r}")
    return float(tol)


def check_dimension(spec: KernelSpec, d: int) -> None:
    """Power-law kernels are absolutely summable only for gamma > d."""
    if d < 1:
        raise ArgumentError(f"dimension must be positive, got {d}")
    if spec.is_power_law and spec.gamma <= d:
        raise DomainError(f"gamma = {spec.gamma:g} must exceed d = {d}")


def frequency_norms(spec: KernelSpec, freqs: np.ndarray) -> np.ndarray:
    m = np.abs(np.asarray(freqs, dtype=np.float64))
    if m.ndim == 1:
        m = m[:, None]
    if spec.norm_kind == "linf":
        return m.max(axis=1)
    return np.sqrt((m * m).sum(axis=1))


def radial(spec: KernelSpec, t: np.ndarray) -> np.ndarray:
    """a(t) for t > 0, scale included."""
    t = np.asarray(t, dtype=np.float64)
    if spec.is_power_law:
        return spec.scale * t ** (-spec.gamma)
    return spec.scale * np.asarray(spec.coeff_law(t), dtype=np.float64)


def coefficients(spec: KernelSpec, freqs: np.ndarray) -> np.ndarray:
    """Vectorized a_l over an (F, d) frequency array; a_0 = 0."""
    norms = frequency_norms(spec, freqs)
    out = np.zeros_like(norms)
    positive = norms > 0
    out[positive] = radial(spec, norms[positive])
    return out


def coeff(spec: KernelSpec, l: Sequence[int]) -> float:
    return float(coefficients(spec, np.asarray(l, dtype=np.int64).reshape(1, -1))[0])


@lru_cache(maxsize=32)
def shell_constant(d: int, norm_kind: str = "l2") -> float:
    """
    C_d with #{l : j-1 <= |l| < j} <= C_d j^(d-1) for every j >= 1.

    For the max norm the bound d 2^d holds exactly. For the Euclidean norm
    the shells up to SHELL_COUNT_RADIUS are counted exhaustively (from the
    number of representations as a sum of d squares) and the remaining ones
    are covered by the volume of the unit-cube annulus.
    """
    if norm_kind == "linf":
        return float(d * 2 ** d)

    R = settings.SHELL_COUNT_RADIUS
    top = R * R
    squares = np.zeros(top + 1, dtype=np.float64)
    k = np.arange(0, R + 1)
    squares[k * k] = np.where(k == 0, 1.0, 2.0)
    reps = squares.copy()
    for _ in range(d - 1):
        reps = np.convolve(reps, squares)[: top + 1]

    exhaustive = 0.0
    for j in range(1, R + 1):
        count = reps[(j - 1) ** 2: j * j].sum()
        exhaustive = max(exhaustive, count / j ** (d - 1))

    half_diag = math.sqrt(d) / 2.0
    ball = math.pi ** (d / 2.0) / special.gamma(d / 2.0 + 1.0)
    volume = d * ball * (1.0 + math.sqrt(d)) * (1.0 + half_diag / R) ** (d - 1)
    return float(max(exhaustive, volume))


def shell_tail_bound(d: int, exponent: float, R: float, norm_kind: str = "l2") -> float:
    """
    Certified upper bound on the sum of |l|^-exponent over |l| >= R.

    Args:
        d: Lattice dimension
        exponent: Decay exponent, must exceed d
        R: Radius, at least 1
        norm_kind: l2 or linf

    Returns:
        C_d (1 + 1/R)^(d-1) [2 R^(d-1-e) + R^(d-e) / (e - d)]
    """
    if exponent <= d:
        raise DomainError(f"tail of |l|^-{exponent:g} diverges in dimension {d}")
    R = max(float(R), 1.0)
    C = shell_constant(d, norm_kind)
    return C * (1.0 + 1.0 / R) ** (d - 1) * (
        2.0 * R ** (d - 1 - exponent) + R ** (d - exponent) / (exponent - d)
    )


def box_tail(spec: KernelSpec, d: int, radius: int, power: float = 1.0) -> float:
    """Bound on the sum of a_l^power over frequencies outside |l|_inf <= radius."""
    if spec.is_power_law:
        return spec.scale ** power * shell_tail_bound(d, spec.gamma * power, radius + 1, spec.norm_kind)
    return float(spec.tail_law(float(radius + 1), float(power)))


def _coset_tail(spec: KernelSpec, grid: GridSpec, P: int) -> float:
    """Bound on the sum of a_m over m = j + 2np with |p|_inf > P, any j."""
    n_min = min(grid.n)
    if spec.is_power_law:
        return spec.scale * n_min ** (-spec.gamma) * shell_tail_bound(grid.d, spec.gamma, P + 1, "linf")
    # every omitted m has |m| >= |m|_inf >= n_min (2P + 1)
    return float(spec.tail_law(float(n_min * (2 * P + 1)), 1.0))


def choose_radius(spec: KernelSpec, d: int, tol: float, min_radius: int = 1) -> Tuple[int, float]:
    """
    Smallest power-of-two box radius L >= min_radius whose dropped mass is
    below tol, capped by the frequency budget.

    Returns:
        Tuple of (radius, certified tail of the dropped coefficients)
    """
    check_tol(tol)
    check_dimension(spec, d)
    cap = settings.max_radius(d)
    if cap < min_radius:
        raise ArgumentError(
            f"frequency budget {settings.MAX_FREQUENCIES} allows radius {cap} in d = {d}, "
            f"below the required {min_radius}"
        )
    L = 1 << max(int(math.ceil(math.log2(max(min_radius, 1)))), 0)
    while L < cap and box_tail(spec, d, L) > tol:
        L *= 2
    L = min(L, cap)
    tail = box_tail(spec, d, L)
    if tail > tol:
        logger.warning(
            "Kernel truncation capped at radius %d (d=%d): dropped mass %.3e exceeds tol %.1e",
            L, d, tail, tol,
        )
    return L, tail


class KernelTable:
    """
    The realized kernel K_L: every coefficient a_m with |m|_inf <= L.

    Splines, Gram matrices and lattice sums built from one table share the
    same truncated kernel, so interpolation identities hold to rounding.
    """

    def __init__(self, spec: KernelSpec, d: int, radius: int, tail: float):
        self.spec = spec
        self.d = d
        self.radius = radius
        self.tail = tail

        axis = np.arange(-radius, radius + 1, dtype=np.int64)
        full = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
        a = coefficients(spec, full)
        keep = a > 0
        self.freqs = full[keep]
        self.coeffs = a[keep]
        self.freqs.setflags(write=False)
        self.coeffs.setflags(write=False)

    def __repr__(self) -> str:
        return f"KernelTable(d={self.d}, radius={self.radius}, terms={len(self.coeffs)}, tail={self.tail:.2e})"

    def as_fourier(self) -> FourierRep:
        return FourierRep(freqs=self.freqs, coeffs=self.coeffs.astype(np.complex128), truncation_tail=self.tail)

    def kernel_values(self, points: np.ndarray) -> np.ndarray:
        pts = torus_lattice.to_torus(points, self.d)
        return self.as_fourier().evaluate(pts).real

    def grid_values(self, M: int) -> np.ndarray:
        return self.as_fourier().evaluate_on_grid(M).real

    def residues(self, grid: GridSpec) -> np.ndarray:
        if grid.d != self.d:
            raise ArgumentError(f"grid has d = {grid.d}, kernel table has d = {self.d}")
        return torus_lattice.residues(self.freqs, grid)

    def coset_sums(self, grid: GridSpec) -> np.ndarray:
        """S_j = sum of a_m over m = j mod 2n, for every j in Omega_n (flat order)."""
        return np.bincount(self.residues(grid), weights=self.coeffs, minlength=grid.N)

    def knot_values(self, grid: GridSpec) -> np.ndarray:
        """K_L(x_k) for k in Omega_n, from the coset sums by one inverse FFT."""
        S = self.coset_sums(grid).reshape(grid.shape)
        return (np.fft.ifftn(S) * grid.N).real.reshape(-1)

    def rho_sigma(self, j: Sequence[int], grid: GridSpec, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """rho_j and sigma_j of the realized kernel at (P, d) points."""
        flat = torus_lattice.flat_index(torus_lattice.residue(j, grid), grid)
        pts = torus_lattice.to_torus(points, self.d)
        mask = self.residues(grid) == flat
        phase = pts @ self.freqs[mask].astype(np.float64).T
        # sign of j only matters through the residue class
        weights = self.coeffs[mask]
        return 2.0 * np.cos(phase) @ weights, 2.0 * np.sin(phase) @ weights


@lru_cache(maxsize=16)
def _realize(spec: KernelSpec, d: int, min_radius: int, tol: float) -> KernelTable:
    L, tail = choose_radius(spec, d, tol, min_radius)
    table = KernelTable(spec, d, L, tail)
    logger.info("Realized kernel: %r", table)
    return table


def realize(spec: KernelSpec, d: int, tol: Optional[float] = None, min_radius: int = 1) -> KernelTable:
    """Build (or reuse) the truncated kernel table for this spec and dimension."""
    tol = check_tol(settings.DERIVED_TOL if tol is None else tol)
    return _realize(spec, d, int(min_radius), tol)


def _series_1d(spec: KernelSpec, x: float, L: int) -> float:
    """2 * sum_{l=1..L} a_l cos(l x), summed in chunks."""
    total = 0.0
    for start in range(1, L + 1, _CHUNK):
        l = np.arange(start, min(start + _CHUNK, L + 1), dtype=np.float64)
        total += float(np.dot(radial(spec, l), np.cos(l * x)))
    return 2.0 * total


def _abs_tail_1d(spec: KernelSpec, L: int) -> float:
    if spec.is_power_law:
        g = spec.gamma
        return 2.0 * spec.scale * ((L + 1) ** (-g) + (L + 1) ** (1.0 - g) / (g - 1.0))
    return float(spec.tail_law(float(L + 1), 1.0))


def _kernel_eval_1d(spec: KernelSpec, x: float, tol: float) -> float:
    x = float(np.mod(x, 2 * np.pi))
    if x == 0.0 and spec.is_power_law:
        return 2.0 * spec.scale * float(special.zeta(spec.gamma))

    s = abs(math.sin(x / 2.0))
    budget = settings.SERIES_MAX_TERMS

    def bound(L: int) -> float:
        oscillating = 2.0 * float(radial(spec, L + 1)) / s if s > 0 else math.inf
        return min(oscillating, _abs_tail_1d(spec, L))

    L = 64
    while bound(L) > tol and L < budget:
        L *= 2
    L = min(L, budget)
    if bound(L) > tol:
        raise TruncationError(f"kernel_eval at x = {x:.6g}", bound(L), tol)
    return _series_1d(spec, x, L)


def kernel_eval(spec: KernelSpec, x: Sequence[float], tol: Optional[float] = None) -> float:
    """
    K(x) = sum of a_l cos(l.x) over Z^d, truncated with a certified tail.

    In one dimension the zero point uses 2 zeta(gamma) and other points a
    summation-by-parts bound on the cosine tail. The Euclidean power law in
    higher dimensions goes through the Ewald split; other laws sum the box
    |l|_inf <= L and bound the rest by shell counting.
    """
    tol = check_tol(spec.tail_tol if tol is None else tol)
    point = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if not np.all(np.isfinite(point)):
        raise ArgumentError("torus points must be finite")
    d = point.shape[0]
    check_dimension(spec, d)
    if d == 1:
        return _kernel_eval_1d(spec, float(point[0]), tol)
    if _uses_ewald(spec, d):
        point = torus_lattice.to_torus(point, d)[0]
        value, _ = epstein_sum(spec.gamma, np.zeros(d, dtype=np.int64), np.ones(d, dtype=np.int64), point,
                               tol / spec.scale)
        return spec.scale * value.real

    cap = settings.max_radius(d)
    L = 8
    while L < cap and box_tail(spec, d, L) > tol:
        L *= 2
    L = min(L, cap)
    tail = box_tail(spec, d, L)
    if tail > tol:
        raise TruncationError(f"kernel_eval in d = {d}", tail, tol)
    table = KernelTable(spec, d, L, tail)
    return float(table.kernel_values(point.reshape(1, d))[0])


def _centered(j: Sequence[int], grid: GridSpec) -> np.ndarray:
    """Representative of j mod 2n with entries in (-n, n]."""
    r = np.asarray(torus_lattice.residue(j, grid), dtype=np.int64)
    n = np.asarray(grid.n, dtype=np.int64)
    return np.where(r > n, r - 2 * n, r)


def _coset_members(j: Sequence[int], grid: GridSpec, P: int) -> np.ndarray:
    axis = np.arange(-P, P + 1, dtype=np.int64)
    p = np.stack(np.meshgrid(*([axis] * grid.d), indexing="ij"), axis=-1).reshape(-1, grid.d)
    return _centered(j, grid) + 2 * np.asarray(grid.n, dtype=np.int64) * p


def _coset_radius_budget(d: int) -> int:
    if d == 1:
        return settings.SERIES_MAX_TERMS // 2
    return settings.max_radius(d)


def _hurwitz_coset_1d(spec: KernelSpec, j: int, n: int) -> float:
    period = 2 * n
    r = j % period
    g = spec.gamma
    if r == 0:
        return 2.0 * spec.scale * period ** (-g) * float(special.zeta(g))
    q = r / period
    return spec.scale * period ** (-g) * float(special.zeta(g, q) + special.zeta(g, 1.0 - q))


def _uses_ewald(spec: KernelSpec, d: int) -> bool:
    return d >= 2 and spec.is_power_law and spec.norm_kind == "l2"


def upper_gamma(a: float, z: np.ndarray) -> np.ndarray:
    """
    Non-regularized upper incomplete gamma Gamma(a, z) for z > 0 and any real a.

    Non-positive orders start from E_1 or Gamma(a0, z) with a0 in (0, 1)
    and recur downwards through Gamma(a, z) = (Gamma(a + 1, z) - z^a e^-z) / a.
    """
    z = np.asarray(z, dtype=np.float64)
    if a > 0:
        return special.gammaincc(a, z) * special.gamma(a)
    steps = int(math.ceil(-a))
    order = a + steps
    if order == 0.0:
        value = special.exp1(z)
    else:
        value = special.gammaincc(order, z) * special.gamma(order)
    decay = np.exp(-z)
    for _ in range(steps):
        order -= 1.0
        value = (value - z ** order * decay) / order
    return value


def _box(center: np.ndarray, half: np.ndarray) -> np.ndarray:
    axes = [np.arange(c - h, c + h + 1, dtype=np.int64) for c, h in zip(center, half)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))


def _shell_remainder(spacings: np.ndarray, r0: float, magnitude, width: float) -> float:
    """
    Bound on the sum of magnitude(|y|) over a shifted rectangular lattice
    with the given spacings, restricted to |y| >= r0.

    magnitude must be decreasing. A ball of radius r meets at most
    prod(2r/h_i + 1) lattice points; shells of thickness min(h) are summed
    until magnitude has dropped by e^-800 relative to width.
    """
    h = float(spacings.min())
    steps = int(math.ceil(math.sqrt(800.0) * width / h)) + 2
    inner = r0 + h * np.arange(steps, dtype=np.float64)
    counts = np.prod(2.0 * (inner[:, None] + h) / spacings[None, :] + 1.0, axis=1)
    return float(np.sum(counts * magnitude(inner)))


def _grow_radius(spacings: np.ndarray, magnitude, width: float, tol: float, what: str) -> Tuple[np.ndarray, float]:
    """Half-widths of the smallest box whose dropped remainder is below tol."""
    for factor in range(1, settings.EWALD_MAX_FACTOR + 1):
        half = np.ceil(factor * width / spacings - 0.5).astype(np.int64)
        covered = float(np.min(spacings * (half + 0.5)))
        remainder = _shell_remainder(spacings, covered, magnitude, width)
        if remainder <= tol:
            return half, remainder
    raise TruncationError(what, remainder, tol)


def epstein_sum(
    exponent: float,
    offset: Sequence[int],
    period: Sequence[int],
    x: Sequence[float],
    tol: float,
) -> Tuple[complex, float]:
    """
    Sum of |m|^-exponent e^{i m.x} over m = offset + period * p, p in Z^d,
    m != 0, for the Euclidean norm.

    The Mellin integral of |m|^-2nu is split at alpha = pi / V^(2/d), with V
    the product of the periods. Below alpha the Gaussians are moved to the
    reciprocal lattice by Poisson summation, above it they stay direct, so
    both halves converge like Gaussians:

        direct      sum |m|^-e Q(nu, alpha |m|^2) e^{i m.x}
        reciprocal  pi^(d/2) / (V Gamma(nu)) sum_G e^{i G.c} b^s Gamma(-s, b / alpha)

    with nu = e/2, s = nu - d/2, G = 2 pi k / period, b = |G - x|^2 / 4 and
    c the centred offset. The m = 0 term, alpha^nu / (nu Gamma(nu)), is taken
    out when the coset contains the origin.

    Args:
        exponent: Decay exponent, must exceed d
        offset: Coset representative
        period: Positive integer period per axis
        x: Twist
        tol: Target for the two dropped remainders together

    Returns:
        Tuple of (value, certified bound on the dropped remainders)

    Raises:
        TruncationError: tol is below what the box sizes allow
    """
    per = np.asarray(period, dtype=np.int64).reshape(-1)
    d = per.shape[0]
    if exponent <= d:
        raise DomainError(f"tail of |l|^-{exponent:g} diverges in dimension {d}")
    c = np.mod(np.asarray(offset, dtype=np.int64).reshape(-1), per)
    c = np.where(2 * c > per, c - per, c)
    twist = np.asarray(x, dtype=np.float64).reshape(-1)
    spacing = per.astype(np.float64)

    nu = exponent / 2.0
    s = nu - d / 2.0
    volume = float(np.prod(spacing))
    alpha = math.pi / volume ** (2.0 / d)
    gamma_nu = float(special.gamma(nu))

    def direct(r: np.ndarray) -> np.ndarray:
        return r ** (-exponent) * special.gammaincc(nu, alpha * r * r)

    half, direct_rest = _grow_radius(spacing, direct, 1.0 / math.sqrt(alpha), tol / 2.0, "Ewald direct sum")
    members = c + per * _box(np.zeros(d, dtype=np.int64), half)
    r = np.sqrt((members.astype(np.float64) ** 2).sum(axis=1))
    nonzero = r > 0
    phase = members[nonzero].astype(np.float64) @ twist
    value = complex(np.sum(direct(r[nonzero]) * np.exp(1j * phase)))

    h = 2.0 * math.pi / spacing
    prefactor = math.pi ** (d / 2.0) / (volume * gamma_nu)

    def gaussian_tail(b: np.ndarray) -> np.ndarray:
        out = np.full(b.shape, alpha ** s / s)
        positive = b > 0
        out[positive] = b[positive] ** s * upper_gamma(-s, b[positive] / alpha)
        return out

    def reciprocal(rho: np.ndarray) -> np.ndarray:
        return prefactor * gaussian_tail(rho * rho / 4.0)

    center = np.round(twist / h).astype(np.int64)
    khalf, reciprocal_rest = _grow_radius(h, reciprocal, 2.0 * math.sqrt(alpha), tol / 2.0, "Ewald reciprocal sum")
    G = h * _box(center, khalf)
    shifted = G - twist
    b = (shifted * shifted).sum(axis=1) / 4.0
    value += prefactor * complex(np.sum(gaussian_tail(b) * np.exp(1j * (G @ c.astype(np.float64)))))

    if not c.any():
        value -= alpha ** nu / (nu * gamma_nu)
    return value, direct_rest + reciprocal_rest


def coset_sum(spec: KernelSpec, j: Sequence[int], grid: GridSpec, tol: Optional[float] = None) -> LatticeSumValue:
    """
    S_j = sum of a_m over the coset m = j mod 2n.

    Closed form through the Hurwitz zeta function for the one-dimensional
    power law and the Ewald split for the Euclidean power law in d >= 2;
    otherwise a box of lattice vectors p grown geometrically until the
    certified remainder drops below tol.
    """
    tol = check_tol(spec.tail_tol if tol is None else tol)
    check_dimension(spec, grid.d)
    torus_lattice.residue(j, grid)
    if grid.d == 1 and spec.is_power_law:
        value = _hurwitz_coset_1d(spec, int(np.asarray(j).reshape(-1)[0]), grid.n[0])
        return LatticeSumValue(value=value, tail_bound=0.0, tol=tol)
    if _uses_ewald(spec, grid.d):
        value, rest = epstein_sum(spec.gamma, j, grid.shape, np.zeros(grid.d), tol / spec.scale)
        return LatticeSumValue(value=spec.scale * value.real, tail_bound=spec.scale * rest, tol=tol)

    budget = _coset_radius_budget(grid.d)
    P = 4
    while P < budget and _coset_tail(spec, grid, P) > tol:
        P *= 2
    P = min(P, budget)
    tail = _coset_tail(spec, grid, P)
    if tail > tol:
        raise TruncationError(f"coset sum for j = {tuple(np.asarray(j).tolist())}", tail, tol)
    members = _coset_members(j, grid, P)
    value = float(coefficients(spec, members).sum())
    return LatticeSumValue(value=value, tail_bound=tail, tol=tol)


def rho_zero(spec: KernelSpec, j: Sequence[int], grid: GridSpec, tol: Optional[float] = None) -> LatticeSumValue:
    """
    rho_j(0) = sum over p of a_{2np+j} + a_{2np-j} = 2 S_j.

    Raises:
        TruncationError: tol cannot be certified inside the frequency budget
    """
    tol = check_tol(spec.tail_tol if tol is None else tol)
    half = coset_sum(spec, j, grid, tol / 2.0)
    return LatticeSumValue(value=2.0 * half.value, tail_bound=2.0 * half.tail_bound, tol=tol)


def rho_zero_all(table: KernelTable, grid: GridSpec, tol: float) -> np.ndarray:
    """rho_j(0) of the realized kernel for every j in Omega_n; checks j != 0 against tol."""
    rho0 = 2.0 * table.coset_sums(grid)
    bad = np.nonzero(rho0[1:] <= tol)[0]
    if bad.size:
        flat = int(bad[0]) + 1
        raise SingularKernelError(np.unravel_index(flat, grid.shape), float(rho0[flat]), tol)
    return rho0


def _on_knot_lattice(x: np.ndarray, grid: GridSpec) -> bool:
    scaled = x * np.asarray(grid.n, dtype=np.float64) / np.pi
    return bool(np.all(np.abs(scaled - np.round(scaled)) < 1e-13 * np.maximum(1.0, np.abs(scaled))))


def rho_sigma_eval(
    spec: KernelSpec,
    j: Sequence[int],
    x: Sequence[float],
    grid: GridSpec,
    tol: Optional[float] = None,
) -> Tuple[float, float]:
    """
    rho_j(x) and sigma_j(x), twice the real and imaginary parts of the sum of
    a_m e^{i m.x} over m = j mod 2n.

    On the knot lattice both reduce to rho_j(0) times cos or sin of j.x.
    One-dimensional points elsewhere use a summation-by-parts tail bound,
    the Euclidean power law in higher dimensions the Ewald split, and any
    other kernel the absolute coset remainder.
    """
    tol = check_tol(spec.tail_tol if tol is None else tol)
    check_dimension(spec, grid.d)
    point = torus_lattice.to_torus(x, grid.d)[0]
    jj = np.asarray(j, dtype=np.int64).reshape(-1)
    torus_lattice.residue(jj, grid)
    if not np.any(point):
        return rho_zero(spec, jj, grid, tol).value, 0.0
    if _on_knot_lattice(point, grid):
        r0 = rho_zero(spec, jj, grid, tol).value
        phase = float(jj @ point)
        return r0 * math.cos(phase), r0 * math.sin(phase)
    if _uses_ewald(spec, grid.d):
        value, _ = epstein_sum(spec.gamma, jj, grid.shape, point, tol / (2.0 * spec.scale))
        return 2.0 * spec.scale * value.real, 2.0 * spec.scale * value.imag

    budget = _coset_radius_budget(grid.d)
    if grid.d == 1:
        n = grid.n[0]
        s = abs(math.sin(n * point[0]))

        def bound(P: int) -> float:
            oscillating = 4.0 * float(radial(spec, n * (2 * P + 1))) / s if s > 0 else math.inf
            return min(oscillating, 2.0 * _coset_tail(spec, grid, P))
    else:
        def bound(P: int) -> float:
            return 2.0 * _coset_tail(spec, grid, P)

    P = 4
    while P < budget and bound(P) > tol:
        P *= 2
    P = min(P, budget)
    if bound(P) > tol:
        raise TruncationError(f"rho/sigma for j = {tuple(jj.tolist())}", bound(P), tol)

    members = _coset_members(jj, grid, P)
    weights = coefficients(spec, members)
    rho = sigma = 0.0
    for start in range(0, len(members), _CHUNK):
        phase = members[start:start + _CHUNK].astype(np.float64) @ point
        w = weights[start:start + _CHUNK]
        rho += float(np.dot(w, np.cos(phase)))
        sigma += float(np.dot(w, np.sin(phase)))
    return 2.0 * rho, 2.0 * sigma


def unit_vector_norm(spec: KernelSpec, d: int) -> float:
    """|(1, ..., 1)| in the kernel norm."""
    return 1.0 if spec.norm_kind == "linf" else math.sqrt(d)


def monotone_tail_constant(spec: KernelSpec, d: int) -> float:
    """2^gamma C_d |1|^gamma / (gamma - d): bounds the sum of a_{2np}/a_{2n} over p != 0."""
    if not spec.is_power_law:
        raise DomainError("the explicit tail constant is only known for the power law")
    check_dimension(spec, d)
    g = spec.gamma
    return 2.0 ** g * shell_constant(d, spec.norm_kind) * unit_vector_norm(spec, d) ** g / (g - d)


def lattice_tail_ratio(spec: KernelSpec, grid: GridSpec, tol: Optional[float] = None) -> float:
    """Sum over p of a_{2np} divided by a_{2n} (the p = 0 term is a_0 = 0)."""
    s0 = coset_sum(spec, (0,) * grid.d, grid, tol)
    return s0.value / coeff(spec, tuple(2 * v for v in grid.n))


@lru_cache(maxsize=64)
def _domination(spec: KernelSpec, grid: GridSpec, tol: Optional[float]) -> float:
    best = 0.0
    for k in np.ndindex(*(v + 1 for v in grid.n)):
        kk = np.asarray(k, dtype=np.int64)
        total = coset_sum(spec, -kk, grid, tol).value
        best = max(best, total / coeff(spec, tuple(2 * np.asarray(grid.n) - kk)))
    return best


def coset_domination_constant(spec: KernelSpec, grid: GridSpec, tol: Optional[float] = None) -> float:
    """max_k Sum_p a_{2np-k} / a_{2n-k} over 0 <= k_i <= n_i, cached per (kernel, grid, tol)."""
    return _domination(spec, grid, tol)
