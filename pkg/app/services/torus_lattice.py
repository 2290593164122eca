import logging
from functools import lru_cache
from typing import List, Sequence, Union

import numpy as np

from app.core.exceptions import ArgumentError, DomainError
from app.models.schema import GridSpec, MultiIndex

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi

IndexLike = Union[MultiIndex, Sequence[int], np.ndarray]


def _as_index(l: IndexLike, grid: GridSpec) -> np.ndarray:
    arr = np.asarray(l, dtype=np.int64).reshape(-1)
    if arr.shape[0] != grid.d:
        raise ArgumentError(f"multi-index {tuple(arr)} has length {arr.shape[0]}, grid has d = {grid.d}")
    return arr


@lru_cache(maxsize=64)
def _omega_array(n: tuple) -> np.ndarray:
    shape = tuple(2 * v for v in n)
    arr = np.indices(shape, dtype=np.int64).reshape(len(shape), -1).T
    arr.setflags(write=False)
    return arr


def omega_array(grid: GridSpec) -> np.ndarray:
    """Omega_n as an (N, d) read-only array, lexicographic (last axis fastest)."""
    return _omega_array(grid.n)


def enumerate_omega(grid: GridSpec) -> List[MultiIndex]:
    """
    List the index box Omega_n = {0 <= j_l <= 2n_l - 1}.

    The lexicographic order returned here is the layout used for every
    knot-indexed vector (samples, spline coefficients, Gram rows). It
    coincides with the C-order flattening of an array of shape 2n.

    Args:
        grid: Degree vector holder

    Returns:
        List of N multi-indices
    """
    return [tuple(int(v) for v in row) for row in omega_array(grid)]


def enumerate_omega_star(grid: GridSpec) -> List[MultiIndex]:
    return enumerate_omega(grid)[1:]


def in_omega(k: IndexLike, grid: GridSpec) -> bool:
    arr = _as_index(k, grid)
    return bool(np.all(arr >= 0) and np.all(arr < np.asarray(grid.shape)))


def flat_index(k: IndexLike, grid: GridSpec) -> int:
    """Position of k inside enumerate_omega(grid)."""
    if not in_omega(k, grid):
        raise DomainError(f"index {tuple(np.asarray(k).tolist())} is outside Omega_n for n = {grid.n}")
    return int(np.ravel_multi_index(tuple(int(v) for v in k), grid.shape))


def knot(k: IndexLike, grid: GridSpec) -> np.ndarray:
    """Knot x_k with coordinates pi*k_l/n_l."""
    if not in_omega(k, grid):
        raise DomainError(f"index {tuple(np.asarray(k).tolist())} is outside Omega_n for n = {grid.n}")
    return np.pi * np.asarray(k, dtype=np.float64) / np.asarray(grid.n, dtype=np.float64)


def knots(grid: GridSpec) -> np.ndarray:
    """All knots as an (N, d) array in Omega_n order."""
    return np.pi * omega_array(grid).astype(np.float64) / np.asarray(grid.n, dtype=np.float64)


def to_torus(x, d: int) -> np.ndarray:
    """
    Canonical representative(s) in [0, 2pi)^d.

    Accepts a single point of length d, a (P, d) array, or for d = 1 a
    flat vector of P coordinates. Always returns a (P, d) array.
    """
    pts = np.asarray(x, dtype=np.float64)
    if pts.ndim <= 1 and d == 1:
        pts = pts.reshape(-1, 1)
    elif pts.ndim == 1 and pts.shape[0] == d:
        pts = pts.reshape(1, d)
    if pts.ndim != 2 or pts.shape[1] != d:
        raise ArgumentError(f"points of shape {pts.shape} do not live on the {d}-torus")
    if not np.all(np.isfinite(pts)):
        raise ArgumentError("torus points must be finite")
    out = np.mod(pts, TWO_PI)
    # mod can round up to exactly 2pi for tiny negative inputs
    out[out >= TWO_PI] = 0.0
    return out


def residue(m: IndexLike, grid: GridSpec) -> MultiIndex:
    """Representative of m modulo 2n inside Omega_n."""
    arr = _as_index(m, grid)
    return tuple(int(v) for v in np.mod(arr, np.asarray(grid.shape)))


def residues(freqs: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Vectorized residue: (F, d) frequencies to (F,) flat Omega_n positions."""
    folded = np.mod(freqs, np.asarray(grid.shape, dtype=np.int64))
    return np.ravel_multi_index(tuple(folded.T), grid.shape)


def is_lattice_zero(l: IndexLike, grid: GridSpec) -> bool:
    """True when l = 0 mod 2n."""
    return not any(residue(l, grid))


def exp_lattice_sum(l: IndexLike, grid: GridSpec) -> complex:
    """Sum over the knots of e^{i l.x_k}: N when l = 0 mod 2n, else 0."""
    return complex(grid.N) if is_lattice_zero(l, grid) else 0j


def cos_lattice_sum(l: IndexLike, grid: GridSpec) -> float:
    return float(grid.N) if is_lattice_zero(l, grid) else 0.0


def sin_lattice_sum(l: IndexLike, grid: GridSpec) -> float:
    _as_index(l, grid)
    return 0.0


def _plus_minus(j: IndexLike, l: IndexLike, grid: GridSpec):
    jj = _as_index(j, grid)
    ll = _as_index(l, grid)
    return is_lattice_zero(ll - jj, grid), is_lattice_zero(ll + jj, grid)


def cos_cos_lattice_sum(j: IndexLike, l: IndexLike, grid: GridSpec) -> float:
    """
    Sum over the knots of cos(j.x_k) cos(l.x_k).

    N if both l - j and l + j vanish mod 2n, N/2 if exactly one does,
    0 otherwise.
    """
    minus, plus = _plus_minus(j, l, grid)
    return 0.5 * grid.N * (int(minus) + int(plus))


def sin_sin_lattice_sum(j: IndexLike, l: IndexLike, grid: GridSpec) -> float:
    """N/2 when only l - j vanishes mod 2n, -N/2 when only l + j does, 0 otherwise."""
    minus, plus = _plus_minus(j, l, grid)
    return 0.5 * grid.N * (int(minus) - int(plus))


def cos_sin_lattice_sum(j: IndexLike, l: IndexLike, grid: GridSpec) -> float:
    _plus_minus(j, l, grid)
    return 0.0


def brute_lattice_sum(kind: str, grid: GridSpec, l: IndexLike, j: IndexLike = None) -> complex:
    """
    Numerical summation over the knots, used to cross-check the closed forms.

    kind is one of exp, cos, sin, cos_cos, sin_sin, cos_sin.
    """
    xs = knots(grid)
    lx = xs @ _as_index(l, grid).astype(np.float64)
    if kind == "exp":
        return complex(np.exp(1j * lx).sum())
    if kind == "cos":
        return complex(np.cos(lx).sum())
    if kind == "sin":
        return complex(np.sin(lx).sum())
    if j is None:
        raise ArgumentError(f"lattice sum {kind!r} needs a second multi-index")
    jx = xs @ _as_index(j, grid).astype(np.float64)
    if kind == "cos_cos":
        return complex((np.cos(jx) * np.cos(lx)).sum())
    if kind == "sin_sin":
        return complex((np.sin(jx) * np.sin(lx)).sum())
    if kind == "cos_sin":
        return complex((np.cos(jx) * np.sin(lx)).sum())
    raise ArgumentError(f"unknown lattice sum {kind!r}")
