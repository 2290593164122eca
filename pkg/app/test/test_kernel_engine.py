import itertools
import logging
import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import special

from app.core.exceptions import ArgumentError, DomainError, TruncationError
from app.models.schema import GridSpec, KernelSpec
from app.services import kernel_engine, torus_lattice


def exp_law(t):
    return np.exp(-np.asarray(t, dtype=np.float64))


def exp_tail(R, s):
    return 2.0 * math.exp(-s * R) / (1.0 - math.exp(-s))


EXP_KERNEL = KernelSpec(gamma=1.0, coeff_law=exp_law, tail_law=exp_tail)


def test_coefficient_examples(quadratic):
    assert kernel_engine.coeff(quadratic, (0,)) == 0.0
    assert kernel_engine.coeff(quadratic, (1,)) == 1.0
    assert kernel_engine.coeff(quadratic, (3, 4)) == pytest.approx(1 / 25)
    assert kernel_engine.coeff(KernelSpec(gamma=2.0, norm_kind="linf"), (3, 4)) == pytest.approx(1 / 16)
    assert kernel_engine.coeff(KernelSpec(gamma=2.0, scale=3.0), (2,)) == pytest.approx(0.75)


def test_norm_aliases():
    assert KernelSpec(gamma=3.0, norm_kind="inf").norm_kind == "linf"
    assert KernelSpec(gamma=3.0, norm_kind="Euclidean").norm_kind == "l2"
    with pytest.raises(ValidationError):
        KernelSpec(gamma=3.0, norm_kind="l1")


@pytest.mark.parametrize(
    "x, expected",
    [
        (0.0, math.pi ** 2 / 3),
        (math.pi, -math.pi ** 2 / 6),
        (math.pi / 2, -math.pi ** 2 / 24),
        (1.0, math.pi ** 2 / 3 - math.pi + 0.5),
    ],
)
def test_kernel_eval_quadratic_closed_form(quadratic, x, expected):
    assert kernel_engine.kernel_eval(quadratic, [x], tol=1e-10) == pytest.approx(expected, abs=1e-9)


def test_kernel_eval_is_even_and_periodic(cubic):
    for x in (0.3, 1.7, 2.9):
        value = kernel_engine.kernel_eval(cubic, [x], tol=1e-10)
        assert kernel_engine.kernel_eval(cubic, [-x], tol=1e-10) == pytest.approx(value, abs=1e-12)
        assert kernel_engine.kernel_eval(cubic, [x + 2 * math.pi], tol=1e-10) == pytest.approx(value, abs=1e-9)


def test_kernel_eval_two_dimensional_symmetry():
    spec = KernelSpec(gamma=4.0)
    a = kernel_engine.kernel_eval(spec, [0.4, 1.3])
    assert kernel_engine.kernel_eval(spec, [1.3, 0.4]) == pytest.approx(a, abs=1e-9)
    assert kernel_engine.kernel_eval(spec, [-0.4, 1.3]) == pytest.approx(a, abs=1e-9)
    assert kernel_engine.kernel_eval(spec, [0.4, 1.3 + 2 * math.pi]) == pytest.approx(a, abs=1e-9)


def dirichlet_beta(s):
    return 4.0 ** -s * (special.zeta(s, 0.25) - special.zeta(s, 0.75))


@pytest.mark.parametrize("gamma", [3.0, 4.0, 5.0])
def test_kernel_eval_two_dimensional_zero_point(gamma):
    # sum of |m|^-2s over Z^2 \ {0} is 4 zeta(s) beta(s)
    s = gamma / 2.0
    expected = 4.0 * special.zeta(s) * dirichlet_beta(s)
    assert kernel_engine.kernel_eval(KernelSpec(gamma=gamma), [0.0, 0.0]) == pytest.approx(expected, abs=1e-9)
    scaled = KernelSpec(gamma=gamma, scale=2.5)
    assert kernel_engine.kernel_eval(scaled, [0.0, 0.0]) == pytest.approx(2.5 * expected, abs=1e-9)


def test_kernel_eval_two_dimensional_matches_direct_sum():
    spec = KernelSpec(gamma=4.0)
    table = kernel_engine.realize(spec, 2, tol=1e-4, min_radius=64)
    for point in ([0.4, 1.3], [3.0, 0.0], [2.2, 5.9]):
        direct = table.kernel_values(np.array([point]))[0]
        assert kernel_engine.kernel_eval(spec, point) == pytest.approx(direct, abs=table.tail + 1e-9)


def test_kernel_eval_three_dimensional_zero_point():
    # |m|^-4 over Z^3 splits into the cosets of 2Z^3
    spec = KernelSpec(gamma=4.0)
    grid = GridSpec(n=(1, 1, 1))
    total = sum(kernel_engine.coset_sum(spec, j, grid, tol=1e-12).value for j in torus_lattice.enumerate_omega(grid))
    assert kernel_engine.kernel_eval(spec, [0.0, 0.0, 0.0], tol=1e-12) == pytest.approx(total, abs=1e-9)


def test_kernel_eval_errors(quadratic):
    with pytest.raises(ArgumentError):
        kernel_engine.kernel_eval(quadratic, [0.5], tol=0.0)
    with pytest.raises(ArgumentError):
        kernel_engine.kernel_eval(quadratic, [0.5], tol=-1.0)
    with pytest.raises(ArgumentError):
        kernel_engine.kernel_eval(quadratic, [float("inf")])
    with pytest.raises(DomainError):
        kernel_engine.kernel_eval(quadratic, [0.1, 0.2])
    with pytest.raises(DomainError):
        kernel_engine.kernel_eval(KernelSpec(gamma=0.5), [0.1])
    with pytest.raises(TruncationError):
        kernel_engine.kernel_eval(KernelSpec(gamma=2.5, norm_kind="linf"), [0.3, 0.4], tol=1e-12)


def test_rho_zero_closed_forms(quadratic):
    grid = GridSpec(n=(2,))
    assert kernel_engine.rho_zero(quadratic, (1,), grid).value == pytest.approx(math.pi ** 2 / 4, abs=1e-9)
    assert kernel_engine.rho_zero(quadratic, (3,), grid).value == pytest.approx(math.pi ** 2 / 4, abs=1e-9)
    assert kernel_engine.rho_zero(quadratic, (2,), grid).value == pytest.approx(math.pi ** 2 / 8, abs=1e-9)
    assert kernel_engine.coset_sum(quadratic, (2,), grid).value == pytest.approx(math.pi ** 2 / 16, abs=1e-9)
    assert kernel_engine.rho_zero(quadratic, (1,), grid).certified


def test_coset_sum_custom_law():
    grid = GridSpec(n=(2,))
    value = kernel_engine.coset_sum(EXP_KERNEL, (1,), grid, tol=1e-12)
    expected = (math.exp(-1) + math.exp(-3)) / (1 - math.exp(-4))
    assert value.value == pytest.approx(expected, abs=1e-12)
    assert value.tail_bound <= 1e-12


def test_coset_sum_matches_realized_table():
    grid = GridSpec(n=(2, 3))
    spec = KernelSpec(gamma=3.0)
    table = kernel_engine.realize(spec, 2, tol=1e-2, min_radius=16)
    sums = table.coset_sums(grid)
    for j in [(0, 1), (1, 0), (3, 5)]:
        exact = kernel_engine.coset_sum(spec, j, grid, tol=1e-2).value
        # both truncations drop less than their certified tails
        assert sums[torus_lattice.flat_index(j, grid)] == pytest.approx(exact, abs=2e-2 + table.tail)


def test_rho_zero_two_dimensional_at_default_tol(cubic):
    grid = GridSpec(n=(2, 2))
    for j in torus_lattice.enumerate_omega(grid):
        value = kernel_engine.rho_zero(cubic, j, grid)
        assert value.certified
        assert value.value > 0
    # the cosets partition Z^2 \ {0}
    total = sum(kernel_engine.coset_sum(cubic, j, grid, tol=1e-12).value for j in torus_lattice.enumerate_omega(grid))
    assert total == pytest.approx(4.0 * special.zeta(1.5) * dirichlet_beta(1.5), abs=1e-9)


def test_rho_zero_two_dimensional_anisotropic(cubic):
    grid = GridSpec(n=(3, 1))
    total = sum(kernel_engine.coset_sum(cubic, j, grid, tol=1e-12).value for j in torus_lattice.enumerate_omega(grid))
    assert total == pytest.approx(kernel_engine.kernel_eval(cubic, [0.0, 0.0], tol=1e-12), abs=1e-9)
    # reflections of a coset give the same sum
    assert kernel_engine.coset_sum(cubic, (1, 1), grid).value == pytest.approx(
        kernel_engine.coset_sum(cubic, (5, 1), grid).value, abs=1e-9
    )


def test_rho_zero_max_norm_two_dimensional_needs_loose_tol():
    spec = KernelSpec(gamma=3.0, norm_kind="linf")
    grid = GridSpec(n=(2, 2))
    assert kernel_engine.rho_zero(spec, (1, 0), grid, tol=2e-2).value > 0
    with pytest.raises(TruncationError):
        kernel_engine.rho_zero(spec, (1, 0), grid, tol=1e-10)


def test_upper_gamma_negative_orders():
    z = np.array([0.05, 0.7, 3.0, 12.0])
    assert kernel_engine.upper_gamma(0.0, z) == pytest.approx(special.exp1(z), rel=1e-12)
    assert kernel_engine.upper_gamma(-1.0, z) == pytest.approx(np.exp(-z) / z - special.exp1(z), rel=1e-10)
    assert kernel_engine.upper_gamma(1.5, z) == pytest.approx(special.gammaincc(1.5, z) * special.gamma(1.5), rel=1e-12)
    for a in (-0.25, -0.5, -1.75):
        # Gamma(a + 1, z) = a Gamma(a, z) + z^a e^-z
        lhs = kernel_engine.upper_gamma(a + 1.0, z)
        rhs = a * kernel_engine.upper_gamma(a, z) + z ** a * np.exp(-z)
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_epstein_sum_one_dimensional_matches_hurwitz(cubic):
    for n, j in [(2, 1), (2, 0), (3, 2), (5, 4)]:
        value, rest = kernel_engine.epstein_sum(3.0, (j,), (2 * n,), (0.0,), 1e-13)
        exact = kernel_engine.coset_sum(cubic, (j,), GridSpec(n=(n,))).value
        assert value.real == pytest.approx(exact, abs=1e-11)
        assert abs(value.imag) <= 1e-12
        assert rest <= 1e-13


def test_epstein_sum_one_dimensional_twisted(cubic):
    grid = GridSpec(n=(2,))
    for x in (0.7, 2.3, 5.1):
        value, _ = kernel_engine.epstein_sum(3.0, (1,), (4,), (x,), 1e-12)
        rho, sigma = kernel_engine.rho_sigma_eval(cubic, (1,), [x], grid, tol=1e-11)
        assert 2.0 * value.real == pytest.approx(rho, abs=1e-9)
        assert 2.0 * value.imag == pytest.approx(sigma, abs=1e-9)


def test_epstein_sum_needs_summable_exponent():
    with pytest.raises(DomainError):
        kernel_engine.epstein_sum(2.0, (0, 0), (1, 1), (0.0, 0.0), 1e-10)


def test_rho_sigma_on_knot_lattice(quadratic):
    grid = GridSpec(n=(2,))
    rho, sigma = kernel_engine.rho_sigma_eval(quadratic, (1,), [0.0], grid)
    assert rho == pytest.approx(math.pi ** 2 / 4, abs=1e-9)
    assert sigma == 0.0
    rho, sigma = kernel_engine.rho_sigma_eval(quadratic, (1,), [math.pi / 2], grid)
    assert rho == pytest.approx(0.0, abs=1e-9)
    assert sigma == pytest.approx(math.pi ** 2 / 4, abs=1e-9)


def test_rho_sigma_parity_in_j(cubic):
    grid = GridSpec(n=(2,))
    rho, sigma = kernel_engine.rho_sigma_eval(cubic, (1,), [0.7], grid, tol=1e-10)
    rho_m, sigma_m = kernel_engine.rho_sigma_eval(cubic, (-1,), [0.7], grid, tol=1e-10)
    assert rho_m == pytest.approx(rho, abs=1e-9)
    assert sigma_m == pytest.approx(-sigma, abs=1e-9)


def test_rho_sigma_match_knot_sums_of_kernel(cubic):
    grid = GridSpec(n=(2,))
    x = 0.7
    xs = torus_lattice.knots(grid)[:, 0]
    K = np.array([kernel_engine.kernel_eval(cubic, [x - xk], tol=1e-11) for xk in xs])
    for j in (1, 2, 3):
        rho, sigma = kernel_engine.rho_sigma_eval(cubic, (j,), [x], grid, tol=1e-10)
        assert (2 / grid.N) * np.dot(np.cos(j * xs), K) == pytest.approx(rho, abs=1e-8)
        assert (2 / grid.N) * np.dot(np.sin(j * xs), K) == pytest.approx(sigma, abs=1e-8)


@pytest.mark.parametrize("n", [(1, 1), (2, 1), (2, 2)])
def test_rho_sigma_match_knot_sums_of_kernel_two_dimensional(cubic, n):
    grid = GridSpec(n=n)
    tol = 1e-10
    x = np.array([0.7, 2.1])
    xs = torus_lattice.knots(grid)
    K = np.array([kernel_engine.kernel_eval(cubic, x - xk, tol=1e-12) for xk in xs])
    for j in torus_lattice.enumerate_omega(grid):
        rho, sigma = kernel_engine.rho_sigma_eval(cubic, j, x, grid, tol=tol)
        phase = xs @ np.asarray(j, dtype=np.float64)
        assert (2 / grid.N) * np.dot(np.cos(phase), K) == pytest.approx(rho, abs=10 * tol)
        assert (2 / grid.N) * np.dot(np.sin(phase), K) == pytest.approx(sigma, abs=10 * tol)


@pytest.mark.parametrize("n, js", [((3,), [(1,), (2,), (3,)]), ((2, 2), [(1, 0), (1, 3), (2, 1)])])
def test_rho_sigma_symmetries(cubic, rng, n, js):
    grid = GridSpec(n=n)
    tol = 1e-8
    period = 2 * np.asarray(n, dtype=np.int64)
    shift = period * np.array([1, -2][: len(n)])
    points = rng.uniform(0.0, 2 * math.pi, size=(50, len(n)))
    for j in js:
        jj = np.asarray(j, dtype=np.int64)
        for x in points:
            rho, sigma = kernel_engine.rho_sigma_eval(cubic, jj, x, grid, tol=tol)
            rho_p, sigma_p = kernel_engine.rho_sigma_eval(cubic, jj + shift, x, grid, tol=tol)
            rho_m, sigma_m = kernel_engine.rho_sigma_eval(cubic, -jj, x, grid, tol=tol)
            _, sigma_r = kernel_engine.rho_sigma_eval(cubic, shift - jj, x, grid, tol=tol)
            assert rho_p == pytest.approx(rho, abs=10 * tol)
            assert sigma_p == pytest.approx(sigma, abs=10 * tol)
            assert rho_m == pytest.approx(rho, abs=10 * tol)
            assert sigma_m == pytest.approx(-sigma, abs=10 * tol)
            assert sigma_r == pytest.approx(-sigma, abs=10 * tol)


def test_table_rho_sigma_matches_certified_sums(cubic):
    grid = GridSpec(n=(2,))
    table = kernel_engine.realize(cubic, 1, tol=1e-8)
    points = np.array([[0.3], [0.7], [2.2]])
    rho_t, sigma_t = table.rho_sigma((1,), grid, points)
    for i, x in enumerate(points[:, 0]):
        rho, sigma = kernel_engine.rho_sigma_eval(cubic, (1,), [x], grid, tol=1e-10)
        assert rho_t[i] == pytest.approx(rho, abs=1e-7)
        assert sigma_t[i] == pytest.approx(sigma, abs=1e-7)


def test_realized_radius_for_cubic_kernel(cubic):
    L, tail = kernel_engine.choose_radius(cubic, 1, 1e-8)
    assert L == 16384
    assert tail <= 1e-8


def test_choose_radius_warns_when_capped(quadratic, caplog):
    with caplog.at_level(logging.WARNING, logger="app.services.kernel_engine"):
        L, tail = kernel_engine.choose_radius(quadratic, 1, 1e-10)
    assert L == 131071
    assert tail > 1e-10
    assert "capped" in caplog.text


def test_choose_radius_respects_min_radius(cubic):
    L, _ = kernel_engine.choose_radius(cubic, 2, 1.0, min_radius=20)
    assert L == 32
    with pytest.raises(ArgumentError):
        kernel_engine.choose_radius(KernelSpec(gamma=5.0), 4, 1.0, min_radius=64)


def test_table_knot_values_match_direct_sum():
    spec = KernelSpec(gamma=3.0)
    for grid in (GridSpec(n=(4,)), GridSpec(n=(2, 3))):
        table = kernel_engine.realize(spec, grid.d, tol=1e-2, min_radius=16)
        direct = table.kernel_values(torus_lattice.knots(grid))
        assert table.knot_values(grid) == pytest.approx(direct, abs=1e-9)


def test_table_agrees_with_kernel_eval(cubic):
    table = kernel_engine.realize(cubic, 1, tol=1e-8)
    for x in (0.0, 0.9, 3.0):
        assert table.kernel_values([x])[0] == pytest.approx(kernel_engine.kernel_eval(cubic, [x], tol=1e-10), abs=1e-7)


@pytest.mark.parametrize("d, norm_kind", [(1, "l2"), (2, "l2"), (3, "l2"), (2, "linf")])
def test_shell_constant_covers_shell_counts(d, norm_kind):
    C = kernel_engine.shell_constant(d, norm_kind)
    R = 12
    axis = np.arange(-R, R + 1)
    freqs = np.array(list(itertools.product(axis, repeat=d)))
    norms = kernel_engine.frequency_norms(KernelSpec(gamma=d + 1.0, norm_kind=norm_kind), freqs)
    for j in range(1, R + 1):
        count = np.count_nonzero((norms >= j - 1) & (norms < j))
        assert count <= C * j ** (d - 1) + 1e-9


@pytest.mark.parametrize("d, exponent, R", [(1, 2.0, 3), (2, 3.0, 5), (2, 4.0, 2)])
def test_shell_tail_bound_dominates_partial_sums(d, exponent, R):
    box = 200 if d == 2 else 100000
    if d == 1:
        l = np.arange(R, box + 1, dtype=np.float64)
        partial = 2.0 * np.sum(l ** -exponent)
    else:
        axis = np.arange(-box, box + 1)
        grid = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
        norms = np.sqrt((grid.astype(np.float64) ** 2).sum(axis=1))
        partial = np.sum(norms[norms >= R] ** -exponent)
    assert partial <= kernel_engine.shell_tail_bound(d, exponent, R)


def test_shell_tail_bound_needs_summable_exponent():
    with pytest.raises(DomainError):
        kernel_engine.shell_tail_bound(2, 2.0, 10)


def test_monotone_tail_constant_bounds_lattice_ratio(cubic):
    grid = GridSpec(n=(2, 2))
    ratio = kernel_engine.lattice_tail_ratio(cubic, grid, tol=1e-2)
    assert 0 < ratio <= kernel_engine.monotone_tail_constant(cubic, 2)
    with pytest.raises(DomainError):
        kernel_engine.monotone_tail_constant(EXP_KERNEL, 1)


def test_coset_domination_constant(cubic):
    # dominated by k = 1: the coset of -1 holds a_1 itself against a_5
    C = kernel_engine.coset_domination_constant(cubic, GridSpec(n=(3,)))
    expected = 6.0 ** -3 * (special.zeta(3.0, 1 / 6) + special.zeta(3.0, 5 / 6)) * 5.0 ** 3
    assert C == pytest.approx(expected, rel=1e-9)


def test_custom_law_needs_tail_bound():
    with pytest.raises(ValidationError):
        KernelSpec(gamma=1.0, coeff_law=exp_law)


def test_custom_law_kernel_eval():
    # 2 sum e^{-l} cos(l x) = 2 Re(e^{ix - 1} / (1 - e^{ix - 1}))
    for x in (0.0, 1.0):
        z = np.exp(1j * x - 1.0)
        expected = 2.0 * (z / (1.0 - z)).real
        assert kernel_engine.kernel_eval(EXP_KERNEL, [x], tol=1e-12) == pytest.approx(expected, abs=1e-11)
