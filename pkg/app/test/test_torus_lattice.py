import itertools
import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.exceptions import ArgumentError, DomainError
from app.models.schema import GridSpec
from app.services import torus_lattice

CLOSED = {
    "cos_cos": torus_lattice.cos_cos_lattice_sum,
    "sin_sin": torus_lattice.sin_sin_lattice_sum,
    "cos_sin": torus_lattice.cos_sin_lattice_sum,
}


def test_enumerate_omega_order():
    assert torus_lattice.enumerate_omega(GridSpec(n=(2,))) == [(0,), (1,), (2,), (3,)]
    assert torus_lattice.enumerate_omega(GridSpec(n=(1, 1))) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert torus_lattice.enumerate_omega_star(GridSpec(n=(1, 1))) == [(0, 1), (1, 0), (1, 1)]


def test_enumerate_matches_c_order_flattening():
    grid = GridSpec(n=(3, 2))
    for pos, k in enumerate(torus_lattice.enumerate_omega(grid)):
        assert torus_lattice.flat_index(k, grid) == pos


def test_knot_examples():
    assert torus_lattice.knot((1,), GridSpec(n=(2,)))[0] == pytest.approx(math.pi / 2)
    x = torus_lattice.knot((3, 1), GridSpec(n=(2, 1)))
    assert x == pytest.approx([3 * math.pi / 2, math.pi])


@pytest.mark.parametrize("k", [(4,), (-1,)])
def test_knot_outside_omega(k):
    with pytest.raises(DomainError):
        torus_lattice.knot(k, GridSpec(n=(2,)))
    with pytest.raises(DomainError):
        torus_lattice.flat_index(k, GridSpec(n=(2,)))


def test_knots_are_distinct_on_the_torus():
    for grid in (GridSpec(n=(3,)), GridSpec(n=(2, 3)), GridSpec(n=(1, 1, 2))):
        xs = torus_lattice.knots(grid)
        assert xs.shape == (grid.N, grid.d)
        assert len(np.unique(np.round(xs, 12), axis=0)) == grid.N
        assert np.all(xs >= 0) and np.all(xs < 2 * math.pi)


def test_wrong_index_length():
    with pytest.raises(ArgumentError):
        torus_lattice.residue((1, 2), GridSpec(n=(2,)))


def test_residue():
    grid = GridSpec(n=(2, 3))
    assert torus_lattice.residue((-1, 7), grid) == (3, 1)
    assert torus_lattice.is_lattice_zero((4, -6), grid)
    assert not torus_lattice.is_lattice_zero((2, 0), grid)
    flat = torus_lattice.residues(np.array([[-1, 7], [0, 0], [4, 6]]), grid)
    assert flat.tolist() == [3 * 6 + 1, 0, 0]


def test_to_torus_shapes_and_wrapping():
    assert torus_lattice.to_torus(-0.5, 1)[0, 0] == pytest.approx(2 * math.pi - 0.5)
    assert torus_lattice.to_torus([7.0, -1.0], 2).shape == (1, 2)
    assert torus_lattice.to_torus(np.zeros((5, 3)), 3).shape == (5, 3)
    assert torus_lattice.to_torus([0.1, 0.2, 0.3], 1).shape == (3, 1)
    assert torus_lattice.to_torus(-1e-20, 1)[0, 0] == 0.0


def test_to_torus_rejects_bad_points():
    with pytest.raises(ArgumentError):
        torus_lattice.to_torus([float("nan")], 1)
    with pytest.raises(ArgumentError):
        torus_lattice.to_torus(np.zeros((4, 3)), 2)


@pytest.mark.parametrize("n", [(0,), (2, 0), (-1,), ()])
def test_grid_needs_positive_degrees(n):
    with pytest.raises(ValidationError):
        GridSpec(n=n)


def test_grid_sizes():
    grid = GridSpec.uniform(3, 2)
    assert grid.n == (3, 3)
    assert grid.shape == (6, 6)
    assert grid.N == 36


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_exp_lattice_sum_matches_summation(d, n):
    grid = GridSpec.uniform(n, d)
    span = range(-4 * n, 4 * n + 1)
    for l in itertools.product(span, repeat=d):
        brute = torus_lattice.brute_lattice_sum("exp", grid, l)
        assert abs(brute - torus_lattice.exp_lattice_sum(l, grid)) <= 1e-9 * grid.N
        assert abs(brute.real - torus_lattice.cos_lattice_sum(l, grid)) <= 1e-9 * grid.N
        assert abs(brute.imag - torus_lattice.sin_lattice_sum(l, grid)) <= 1e-9 * grid.N


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("kind", sorted(CLOSED))
def test_product_lattice_sums_match_summation(d, n, kind):
    grid = GridSpec.uniform(n, d)
    omega = torus_lattice.enumerate_omega(grid)
    for j in omega:
        for l in omega:
            brute = torus_lattice.brute_lattice_sum(kind, grid, l, j)
            assert abs(brute.real - CLOSED[kind](j, l, grid)) <= 1e-9 * grid.N
            assert abs(brute.imag) <= 1e-12


def test_product_sum_values():
    grid = GridSpec(n=(2,))
    N = grid.N
    assert torus_lattice.cos_cos_lattice_sum((0,), (0,), grid) == N
    assert torus_lattice.cos_cos_lattice_sum((2,), (2,), grid) == N
    assert torus_lattice.cos_cos_lattice_sum((1,), (1,), grid) == N / 2
    assert torus_lattice.sin_sin_lattice_sum((1,), (1,), grid) == N / 2
    assert torus_lattice.sin_sin_lattice_sum((1,), (3,), grid) == -N / 2
    assert torus_lattice.sin_sin_lattice_sum((2,), (2,), grid) == 0.0


def test_brute_lattice_sum_arguments():
    grid = GridSpec(n=(2,))
    with pytest.raises(ArgumentError):
        torus_lattice.brute_lattice_sum("cos_cos", grid, (1,))
    with pytest.raises(ArgumentError):
        torus_lattice.brute_lattice_sum("tan", grid, (1,), (1,))
