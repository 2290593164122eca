import sys
import os

# Add the project root to the python path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from rich.console import Console
from rich.table import Table

from app.core.log import configure_logging
from app.core.exceptions import SkSplineError
from app.repositories.artifacts import read_study_csv
from app.services.approx_lab import fit_slope, observed_orders


def convergence_table(path: str) -> int:
    rows = read_study_csv(path)
    orders = observed_orders(rows)

    table = Table(title=f"Observed orders: {path}")
    for column in ("n", "measured_error", "theoretical_bound", "order", "predicted"):
        table.add_column(column, justify="right")
    for i, row in enumerate(rows):
        order = f"{orders[i - 1]:.3f}" if i > 0 else "-"
        table.add_row(str(row.n), f"{row.measured_error:.4e}", f"{row.theoretical_bound:.4e}", order, f"{row.bound_exponent:.3f}")

    console = Console()
    console.print(table)
    slope = fit_slope([row.n for row in rows], [row.measured_error for row in rows])
    console.print(f"least-squares slope (smallest n dropped): {slope:.4f}")
    return 0


if __name__ == "__main__":
    if len(sys.argv) != 2:
        print("usage: python scripts/convergence_table.py results/study.csv")
        sys.exit(2)
    configure_logging()
    try:
        sys.exit(convergence_table(sys.argv[1]))
    except SkSplineError as exc:
        print(f"error: {exc}")
        sys.exit(exc.exit_code)
