import math
import os
import re
import sys
from pathlib import Path
from typing import Callable, List, Optional

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import typer
from dotenv import load_dotenv
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table
from typing_extensions import Annotated

from app.core.config import settings
from app.core.exceptions import ArgumentError, SkSplineError
from app.core.log import configure_logging
from app.models.schema import FourierRep, GridSpec, KernelSpec
from app.repositories import artifacts
from app.services import approx_lab, kernel_engine, selfcheck, sk_spline

load_dotenv()

app = typer.Typer(
    name=settings.APP_NAME,
    help="sk-spline interpolation on the d-torus: kernels, fundamental splines, convergence studies.",
    add_completion=False,
    no_args_is_help=True,
)
err_console = Console(stderr=True)

_PI_TOKEN = re.compile(r"^([+-]?(?:\d+(?:\.\d*)?|\.\d+)?)\*?pi(?:/(\d+(?:\.\d*)?))?$")


def parse_point(token: str) -> float:
    """Parse 0, 1.5, pi, -pi/2, 3pi/4 or 2*pi/3."""
    text = token.strip().lower().replace("π", "pi").replace(" ", "")
    match = _PI_TOKEN.match(text)
    try:
        if match:
            head, den = match.groups()
            factor = {"": 1.0, "+": 1.0, "-": -1.0}.get(head, None)
            factor = float(head) if factor is None else factor
            value = factor * math.pi / (float(den) if den else 1.0)
        elif "/" in text:
            num, den = text.split("/", 1)
            value = float(num) / float(den)
        else:
            value = float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ArgumentError(f"cannot parse point {token!r}") from exc
    if not math.isfinite(value):
        raise ArgumentError(f"point {token!r} is not finite")
    return value


def parse_int_list(text: str, name: str) -> List[int]:
    try:
        values = [int(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ArgumentError(f"{name} must be a comma list of integers, got {text!r}") from exc
    if not values:
        raise ArgumentError(f"{name} is empty")
    return values


def parse_phi(entries: List[str], d: int) -> FourierRep:
    """Each entry is 'm_1,...,m_d,re[,im]'."""
    terms = {}
    for entry in entries:
        parts = [v for v in entry.split(",") if v.strip()]
        if len(parts) not in (d + 1, d + 2):
            raise ArgumentError(f"phi entry {entry!r} needs d frequencies and re[,im]")
        try:
            m = tuple(int(v) for v in parts[:d])
            value = complex(float(parts[d]), float(parts[d + 1]) if len(parts) == d + 2 else 0.0)
        except ValueError as exc:
            raise ArgumentError(f"cannot parse phi entry {entry!r}") from exc
        terms[m] = terms.get(m, 0.0) + value
    if not terms:
        raise ArgumentError("phi needs at least one term")
    return FourierRep.from_terms(terms)


def _finite(name: str, value: Optional[float]) -> None:
    if value is not None and not math.isfinite(value):
        raise ArgumentError(f"--{name} must be finite, got {value}")


def _check_dim(d: int) -> None:
    if not 1 <= d <= settings.CLI_MAX_DIM:
        raise ArgumentError(f"--d must lie in 1..{settings.CLI_MAX_DIM}, got {d}")


def _grid(n: str, d: Optional[int]) -> GridSpec:
    degrees = parse_int_list(n, "--n")
    if len(degrees) == 1 and d:
        degrees = degrees * d
    if d and len(degrees) != d:
        raise ArgumentError(f"--n has {len(degrees)} entries but --d is {d}")
    _check_dim(len(degrees))
    try:
        return GridSpec(n=tuple(degrees))
    except ValidationError as exc:
        raise ArgumentError(artifacts._first_error(exc)) from exc


def _kernel(gamma: float, norm: str, tol: Optional[float] = None) -> KernelSpec:
    _finite("gamma", gamma)
    _finite("tol", tol)
    try:
        if tol is None:
            return KernelSpec(gamma=gamma, norm_kind=norm)
        return KernelSpec(gamma=gamma, norm_kind=norm, tail_tol=tol)
    except ValidationError as exc:
        raise ArgumentError(artifacts._first_error(exc)) from exc


def _slice_points(d: int, axis: int, num: int, points: Optional[str]) -> np.ndarray:
    if points:
        coords = np.array([parse_point(tok) for tok in points.split(",") if tok.strip()])
    else:
        if num < 1:
            raise ArgumentError("--num must be positive")
        coords = 2 * np.pi * np.arange(num) / num
    if not 0 <= axis < d:
        raise ArgumentError(f"--axis must lie in 0..{d - 1}")
    out = np.zeros((len(coords), d))
    out[:, axis] = coords
    return out


def _run(body: Callable[[], None]) -> None:
    try:
        body()
    except SkSplineError as exc:
        err_console.print(f"[bold red]error:[/] {exc}")
        raise typer.Exit(code=exc.exit_code)
    except ValidationError as exc:
        err_console.print(f"[bold red]error:[/] {artifacts._first_error(exc)}")
        raise typer.Exit(code=2)


@app.callback()
def main(
    log_level: Annotated[Optional[str], typer.Option("--log-level", help="Logging level (default from LOG_LEVEL)")] = None,
):
    configure_logging(log_level)


@app.command("kernel")
def cmd_kernel(
    gamma: Annotated[float, typer.Option(help="Decay exponent, must exceed d")],
    d: Annotated[int, typer.Option(help="Torus dimension")] = 1,
    norm: Annotated[str, typer.Option(help="l2 or linf")] = "l2",
    points: Annotated[Optional[str], typer.Option(help="Comma list along the slice axis, e.g. 0,pi/2,pi")] = None,
    num: Annotated[int, typer.Option(help="Uniform slice size when --points is absent")] = 8,
    axis: Annotated[int, typer.Option(help="Slice axis")] = 0,
    tol: Annotated[Optional[float], typer.Option(help="Certified truncation tolerance")] = None,
):
    """Print x, K(x) over a one-dimensional slice of the torus as CSV."""

    def body():
        _check_dim(d)
        spec = _kernel(gamma, norm, tol)
        kernel_engine.check_dimension(spec, d)
        tolerance = settings.LATTICE_TOL if tol is None else tol
        typer.echo("x,K")
        for point in _slice_points(d, axis, num, points):
            value = kernel_engine.kernel_eval(spec, point, tolerance)
            typer.echo(f"{float(point[axis])!r},{value!r}")

    _run(body)


@app.command("fundamental")
def cmd_fundamental(
    n: Annotated[str, typer.Option(help="Degree n, or one entry per axis: 4 or 4,2")],
    gamma: Annotated[float, typer.Option(help="Decay exponent, must exceed d")],
    d: Annotated[Optional[int], typer.Option(help="Dimension when --n has one entry")] = None,
    norm: Annotated[str, typer.Option(help="l2 or linf")] = "l2",
    tol: Annotated[Optional[float], typer.Option(help="Kernel truncation tolerance")] = None,
    output: Annotated[Optional[Path], typer.Option(help="Fourier JSON path")] = None,
    coefficients: Annotated[Optional[Path], typer.Option(help="Also write c and c_k as JSON")] = None,
):
    """Build the fundamental sk-spline, write its Fourier JSON and report cardinality."""

    def body():
        grid = _grid(n, d)
        spec = _kernel(gamma, norm)
        _finite("tol", tol)
        fs = sk_spline.build_fundamental(spec, grid, tol)
        target = output or Path(settings.RESULTS_DIR) / f"fundamental_n{'x'.join(map(str, grid.n))}_g{gamma:g}.json"
        artifacts.dump_fourier_json(fs.fourier, spec, grid, target)
        if coefficients:
            artifacts.dump_coefficients_json(fs.coeffs, spec, grid, coefficients)
        typer.echo(f"N={grid.N}")
        typer.echo(f"radius={fs.table.radius}")
        typer.echo(f"coefficient_at_zero={fs.fourier.coefficient((0,) * grid.d).real!r}")
        typer.echo(f"cardinality_deviation={sk_spline.cardinality_deviation(fs):.3e}")
        typer.echo(f"truncation_tail={fs.fourier.truncation_tail:.3e}")
        typer.echo(f"json={target}")

    _run(body)


@app.command("interpolate")
def cmd_interpolate(
    n: Annotated[str, typer.Option(help="Degree n, or one entry per axis")],
    gamma: Annotated[float, typer.Option(help="Decay exponent, must exceed d")],
    phi: Annotated[List[str], typer.Option(help="Term 'm_1,...,m_d,re[,im]' of phi; repeatable")],
    d: Annotated[Optional[int], typer.Option(help="Dimension when --n has one entry")] = None,
    norm: Annotated[str, typer.Option(help="l2 or linf")] = "l2",
    num: Annotated[int, typer.Option(help="Points on the slice")] = 16,
    axis: Annotated[int, typer.Option(help="Slice axis")] = 0,
    method: Annotated[str, typer.Option(help="fourier or translates")] = "fourier",
    tol: Annotated[Optional[float], typer.Option(help="Kernel truncation tolerance")] = None,
):
    """Interpolate f = K * phi on the knots and print x, f, sk_n(f), |error| as CSV."""

    def body():
        grid = _grid(n, d)
        spec = _kernel(gamma, norm)
        _finite("tol", tol)
        f = approx_lab.multiplier(spec, parse_phi(phi, grid.d))
        fs = sk_spline.build_fundamental(spec, grid, tol)
        ip = sk_spline.interpolate(fs, approx_lab.knot_samples(f, grid))
        pts = _slice_points(grid.d, axis, num, None)
        exact = f.evaluate(pts)
        approx = ip.evaluate(pts, method=method)
        typer.echo("x,f,sk,abs_error")
        for x, fx, sx in zip(pts[:, axis], exact, approx):
            typer.echo(f"{float(x)!r},{float(np.real(fx))!r},{float(np.real(sx))!r},{float(abs(fx - sx))!r}")

    _run(body)


@app.command("study")
def cmd_study(
    config: Annotated[Optional[Path], typer.Option(help="StudyConfig JSON; flags override its values")] = None,
    d: Annotated[Optional[int], typer.Option()] = None,
    gamma: Annotated[Optional[float], typer.Option()] = None,
    norm: Annotated[Optional[str], typer.Option()] = None,
    p: Annotated[Optional[float], typer.Option()] = None,
    q: Annotated[Optional[float], typer.Option(help="Error norm exponent, inf for the sup norm")] = None,
    n_list: Annotated[Optional[str], typer.Option("--n-list", help="Comma list, e.g. 4,8,16,32")] = None,
    M: Annotated[Optional[int], typer.Option("--M", help="Quadrature points per axis")] = None,
    phi: Annotated[Optional[List[str]], typer.Option(help="Term 'm_1,...,m_d,re[,im]'; repeatable")] = None,
    normalize: Annotated[Optional[bool], typer.Option("--normalize/--no-normalize")] = None,
    output: Annotated[Optional[Path], typer.Option(help="CSV path; stdout when absent")] = None,
    tol: Annotated[Optional[float], typer.Option()] = None,
    seed: Annotated[Optional[int], typer.Option()] = None,
):
    """Run a convergence study and emit the CSV plus a fitted-slope summary."""

    def body():
        payload = artifacts.load_study_config(config) if config else {}
        for name, value in (("gamma", gamma), ("p", p), ("tol", tol)):
            _finite(name, value)
        overrides = {
            "d": d, "gamma": gamma, "norm_kind": norm, "p": p, "q": q, "M": M,
            "normalize": normalize, "tol": tol, "seed": seed,
            "output": str(output) if output else None,
            "n_list": parse_int_list(n_list, "--n-list") if n_list else None,
        }
        payload.update({k: v for k, v in overrides.items() if v is not None})
        payload.setdefault("seed", settings.DEFAULT_SEED)
        payload.setdefault("tol", settings.DERIVED_TOL)
        if phi:
            dim = int(payload.get("d", 1))
            rep = parse_phi(phi, dim)
            payload["phi"] = [[*m, c.real, c.imag] for m, c in rep.terms.items()]
        cfg = artifacts.parse_study_config(payload)
        _check_dim(cfg.d)

        result = approx_lab.run_convergence_study(
            cfg.kernel_spec(), cfg.rate_spec(), cfg.phi_rep(), cfg.n_list,
            M=cfg.M, tol=cfg.tol, normalize=cfg.normalize,
        )
        summary = f"fitted_slope={result.fitted_slope:.4f} predicted_exponent={result.predicted_exponent:.4f}"
        if cfg.output:
            artifacts.write_study_csv(result, cfg.output)
            typer.echo(summary)
        else:
            typer.echo(artifacts.study_csv_text(result), nl=False)
            err_console.print(summary)

    _run(body)


@app.command("selfcheck")
def cmd_selfcheck(
    seed: Annotated[int, typer.Option(help="Seed for random evaluation points")] = settings.DEFAULT_SEED,
):
    """Run the invariant suite; exit 4 when any check fails."""

    def body():
        results = selfcheck.run_selfcheck(seed)
        table = Table(title="skspline selfcheck")
        table.add_column("check")
        table.add_column("measured", justify="right")
        table.add_column("threshold", justify="right")
        table.add_column("status")
        for res in results:
            table.add_row(res.name, f"{res.measured:.3e}", f"{res.threshold:.1e}", "ok" if res.passed else "FAIL")
        Console().print(table)
        if not all(res.passed for res in results):
            raise typer.Exit(code=4)

    _run(body)


if __name__ == "__main__":
    app()
