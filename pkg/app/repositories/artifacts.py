import logging
from pathlib import Path
from typing import Union

import numpy as np
import orjson
import pandas as pd
from pydantic import ValidationError

from app.core.exceptions import ArgumentError, OutputError
from app.models.schema import FourierRep, GridSpec, KernelSpec, SplineCoefficients, StudyConfig, StudyResult, StudyRow

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

STUDY_COLUMNS = ["n", "q", "p", "gamma", "d", "measured_error", "theoretical_bound", "exponent"]


def study_frame(result: StudyResult) -> pd.DataFrame:
    records = [
        {**row.model_dump(exclude={"bound_exponent"}), "exponent": row.bound_exponent}
        for row in result.rows
    ]
    return pd.DataFrame.from_records(records, columns=STUDY_COLUMNS)


def study_csv_text(result: StudyResult) -> str:
    return study_frame(result).to_csv(index=False, lineterminator="\n")


def _write_bytes(path: PathLike, payload: bytes) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(payload)
    except OSError as exc:
        raise OutputError(f"cannot write {target}: {exc}") from exc
    logger.info("Wrote %s (%d bytes)", target, len(payload))
    return target


def _read_bytes(path: PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from exc


def write_study_csv(result: StudyResult, path: PathLike) -> Path:
    return _write_bytes(path, study_csv_text(result).encode("utf-8"))


def read_study_csv(path: PathLike) -> list[StudyRow]:
    try:
        frame = pd.read_csv(path)
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from exc
    missing = set(STUDY_COLUMNS) - set(frame.columns)
    if missing:
        raise ArgumentError(f"{path} lacks study columns {sorted(missing)}")
    return [
        StudyRow(
            n=int(rec["n"]),
            q=float(rec["q"]),
            p=float(rec["p"]),
            gamma=float(rec["gamma"]),
            d=int(rec["d"]),
            measured_error=float(rec["measured_error"]),
            theoretical_bound=float(rec["theoretical_bound"]),
            bound_exponent=float(rec["exponent"]),
        )
        for rec in frame.to_dict(orient="records")
    ]


def fourier_payload(rep: FourierRep, kernel: KernelSpec, grid: GridSpec) -> dict:
    """JSON object with terms [m_1, ..., m_d, re, im] sorted lexicographically by frequency."""
    order = np.lexsort(rep.freqs.T[::-1])
    terms = [
        [*(int(v) for v in rep.freqs[i]), float(rep.coeffs[i].real), float(rep.coeffs[i].imag)]
        for i in order
    ]
    return {
        "d": grid.d,
        "n": list(grid.n),
        "gamma": kernel.gamma,
        "norm": kernel.norm_kind,
        "truncation_tail": rep.truncation_tail,
        "terms": terms,
    }


def dump_fourier_json(rep: FourierRep, kernel: KernelSpec, grid: GridSpec, path: PathLike) -> Path:
    return _write_bytes(path, orjson.dumps(fourier_payload(rep, kernel, grid)))


def load_fourier_json(path: PathLike) -> FourierRep:
    try:
        payload = orjson.loads(_read_bytes(path))
        d = int(payload["d"])
        terms = {
            tuple(int(v) for v in entry[:d]): complex(entry[d], entry[d + 1])
            for entry in payload["terms"]
        }
        return FourierRep.from_terms(terms, truncation_tail=float(payload.get("truncation_tail", 0.0)))
    except (orjson.JSONDecodeError, KeyError, IndexError, TypeError, ValueError) as exc:
        raise ArgumentError(f"{path} is not a Fourier dump: {exc}") from exc


def dump_coefficients_json(coeffs: SplineCoefficients, kernel: KernelSpec, grid: GridSpec, path: PathLike) -> Path:
    payload = {
        "d": grid.d,
        "n": list(grid.n),
        "gamma": kernel.gamma,
        "norm": kernel.norm_kind,
        "constant": coeffs.constant,
        "knot_coeffs": coeffs.knot_coeffs,
    }
    return _write_bytes(path, orjson.dumps(payload, option=orjson.OPT_SERIALIZE_NUMPY))


def load_study_config(path: PathLike) -> dict:
    """Raw config mapping; validation happens once flags are merged in."""
    try:
        payload = orjson.loads(_read_bytes(path))
    except orjson.JSONDecodeError as exc:
        raise ArgumentError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ArgumentError(f"{path} must hold a JSON object")
    return payload


def parse_study_config(payload: dict) -> StudyConfig:
    try:
        return StudyConfig.model_validate(payload)
    except ValidationError as exc:
        raise ArgumentError(_first_error(exc)) from exc


def _first_error(exc: ValidationError) -> str:
    err = exc.errors()[0]
    where = ".".join(str(part) for part in err.get("loc", ())) or "config"
    return f"{where}: {err.get('msg', str(exc))}"
