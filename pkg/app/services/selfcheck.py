"""Invariant suite behind the `selfcheck` command."""

import itertools
import logging
import math
from typing import Callable, List

import numpy as np
from scipy import special

from app.models.schema import CheckResult, GridSpec, KernelSpec
from app.services import approx_lab, kernel_engine, sk_spline, torus_lattice

logger = logging.getLogger(__name__)

_LATTICE_KINDS = ("cos_cos", "sin_sin", "cos_sin")


def _result(name: str, measured: float, threshold: float) -> CheckResult:
    passed = bool(np.isfinite(measured) and measured <= threshold)
    level = logging.INFO if passed else logging.WARNING
    logger.log(level, "%s: %.3e (threshold %.1e)", name, measured, threshold)
    return CheckResult(name=name, measured=float(measured), threshold=threshold, passed=passed)


def check_lattice_sums() -> CheckResult:
    worst = 0.0
    closed = {
        "cos_cos": torus_lattice.cos_cos_lattice_sum,
        "sin_sin": torus_lattice.sin_sin_lattice_sum,
        "cos_sin": torus_lattice.cos_sin_lattice_sum,
    }
    for d in (1, 2):
        for n in (1, 2, 3):
            grid = GridSpec.uniform(n, d)
            span = range(-4 * n, 4 * n + 1)
            for l in np.ndindex(*([len(span)] * d)):
                ll = tuple(span[i] for i in l)
                brute = torus_lattice.brute_lattice_sum("exp", grid, ll)
                worst = max(worst, abs(brute - torus_lattice.exp_lattice_sum(ll, grid)) / grid.N)
            for j in torus_lattice.enumerate_omega(grid):
                for l in torus_lattice.enumerate_omega(grid):
                    for kind in _LATTICE_KINDS:
                        brute = torus_lattice.brute_lattice_sum(kind, grid, l, j)
                        worst = max(worst, abs(brute - closed[kind](j, l, grid)) / grid.N)
    return _result("lattice sums (closed form vs summation, / N)", worst, 1e-9)


def check_rho_zero() -> CheckResult:
    spec = KernelSpec(gamma=2.0)
    grid = GridSpec(n=(2,))
    worst = max(
        abs(kernel_engine.rho_zero(spec, (1,), grid).value - math.pi ** 2 / 4),
        abs(kernel_engine.rho_zero(spec, (3,), grid).value - math.pi ** 2 / 4),
        abs(kernel_engine.coset_sum(spec, (2,), grid).value - math.pi ** 2 / 16),
    )
    # d = 2: the cosets of 2n partition Z^2, and sum |m|^-3 = 4 zeta(3/2) beta(3/2)
    cubic = KernelSpec(gamma=3.0)
    grid = GridSpec(n=(2, 2))
    beta = 4.0 ** -1.5 * (special.zeta(1.5, 0.25) - special.zeta(1.5, 0.75))
    lattice_zeta = 4.0 * float(special.zeta(1.5)) * float(beta)
    total = sum(kernel_engine.coset_sum(cubic, j, grid, 1e-12).value for j in torus_lattice.enumerate_omega(grid))
    worst = max(worst, abs(total - lattice_zeta), abs(kernel_engine.kernel_eval(cubic, [0.0, 0.0], 1e-12) - lattice_zeta))
    return _result("rho_j(0) closed forms, d=1 gamma=2 and d=2 gamma=3", worst, 1e-9)


def check_cardinality() -> CheckResult:
    worst = 0.0
    for d, n, gamma in itertools.product((1, 2), (2, 3, 4), (2.0, 2.5, 3.0)):
        if gamma <= d:
            continue
        fs = sk_spline.build_fundamental(KernelSpec(gamma=gamma), GridSpec.uniform(n, d))
        worst = max(worst, sk_spline.cardinality_deviation(fs))
    return _result("cardinality at knots", worst, 1e-8)


def check_partition_of_unity(rng: np.random.Generator) -> CheckResult:
    grid = GridSpec(n=(3, 2))
    fs = sk_spline.build_fundamental(KernelSpec(gamma=3.0), grid)
    points = rng.uniform(0.0, 2 * np.pi, size=(100, grid.d))
    values = sk_spline.interpolate(fs, np.ones(grid.N)).evaluate(points, method="translates")
    return _result("partition of unity", float(np.abs(values - 1.0).max()), 1e-8)


def check_oracle(rng: np.random.Generator) -> CheckResult:
    spec = KernelSpec(gamma=3.0)
    worst = 0.0
    for grid in (GridSpec(n=(4,)), GridSpec(n=(2, 2))):
        samples = rng.standard_normal(grid.N)
        points = rng.uniform(0.0, 2 * np.pi, size=(100, grid.d))
        fs = sk_spline.build_fundamental(spec, grid)
        translate_sum = sk_spline.interpolate(fs, samples).evaluate(points, method="translates")
        coeffs = sk_spline.solve_linear_system(spec, grid, samples)
        dense = sk_spline.spline_eval(coeffs, fs.table, grid, points)
        worst = max(worst, float(np.abs(translate_sum - dense).max()))
    return _result("translate sum vs dense oracle", worst, 1e-7)


def check_deviation(rng: np.random.Generator) -> CheckResult:
    spec = KernelSpec(gamma=3.0)
    worst = 0.0
    for grid in (GridSpec(n=(4,)), GridSpec(n=(2, 2))):
        fs = sk_spline.build_fundamental(spec, grid)
        points = rng.uniform(0.0, 2 * np.pi, size=(50, grid.d))
        reach = 4 * max(grid.n)
        ls = [l for l in itertools.product(range(-reach, reach + 1), repeat=grid.d) if any(l)]
        thetas = np.abs(approx_lab.deviations(fs, ls, points))
        for l, theta in zip(ls, thetas):
            if torus_lattice.is_lattice_zero(l, grid):
                exact = np.abs(np.exp(1j * (points @ np.asarray(l, dtype=np.float64))) - 1.0)
                worst = max(worst, float(np.abs(theta - exact).max()))
            else:
                worst = max(worst, float((theta - approx_lab.deviation_bound(spec, grid, l)).max()))
    return _result("deviation bound", max(worst, 0.0), 1e-6)


def run_selfcheck(seed: int = 0) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    checks: List[Callable[[], CheckResult]] = [
        check_lattice_sums,
        check_rho_zero,
        check_cardinality,
        lambda: check_partition_of_unity(rng),
        lambda: check_oracle(rng),
        lambda: check_deviation(rng),
    ]
    return [check() for check in checks]
