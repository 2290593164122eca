import math
from typing import Callable, ClassVar, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

MultiIndex = Tuple[int, ...]
NormKind = Literal["l2", "linf"]

_NORM_ALIASES = {
    "l2": "l2", "2": "l2", "euclid": "l2", "euclidean": "l2",
    "linf": "linf", "inf": "linf", "infinity": "linf", "max": "linf", "sup": "linf",
}


def normalize_norm_kind(value) -> str:
    key = str(value).strip().lower().replace("ℓ", "l").replace("∞", "inf")
    if key not in _NORM_ALIASES:
        raise ValueError(f"unknown norm {value!r}; use l2 or linf")
    return _NORM_ALIASES[key]


class GridSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: Tuple[int, ...] = Field(description="Degree vector n, one positive entry per axis")

    @field_validator("n")
    @classmethod
    def _positive_degrees(cls, n: Tuple[int, ...]) -> Tuple[int, ...]:
        if len(n) == 0:
            raise ValueError("degree vector must have at least one axis")
        if any(int(v) < 1 for v in n):
            raise ValueError(f"degrees must be positive integers, got {tuple(n)}")
        return tuple(int(v) for v in n)

    @classmethod
    def uniform(cls, n: int, d: int) -> "GridSpec":
        return cls(n=(n,) * d)

    @property
    def d(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> Tuple[int, ...]:
        """Axis lengths 2n_l of the knot lattice."""
        return tuple(2 * v for v in self.n)

    @property
    def N(self) -> int:
        return int(np.prod(self.shape))


class KernelSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    gamma: float = Field(gt=0, description="Decay exponent of the radial coefficient law")
    norm_kind: NormKind = Field(default="l2", description="Norm used for |l|")
    tail_tol: float = Field(default=1e-10, gt=0, description="Default truncation tolerance")
    scale: float = Field(default=1.0, gt=0, description="Positive factor on every coefficient")
    coeff_law: Optional[Callable[[np.ndarray], np.ndarray]] = Field(
        default=None, exclude=True,
        description="Custom a(t) for t >= 0, vectorized; None selects t^-gamma",
    )
    tail_law: Optional[Callable[[float, float], float]] = Field(
        default=None, exclude=True,
        description="Bound on sum_{|l|>=R} a_l^s as a function of (R, s)",
    )

    @field_validator("norm_kind", mode="before")
    @classmethod
    def _norm_alias(cls, value):
        return normalize_norm_kind(value)

    @model_validator(mode="after")
    def _custom_law_needs_tail(self) -> "KernelSpec":
        if self.coeff_law is not None and self.tail_law is None:
            raise ValueError("a custom coefficient law needs a tail bound callback")
        return self

    @property
    def is_power_law(self) -> bool:
        return self.coeff_law is None


class LatticeSumValue(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float
    tail_bound: float = Field(ge=0, description="Certified bound on the truncation error")
    tol: float = Field(gt=0, description="Tolerance requested at call time")

    @property
    def certified(self) -> bool:
        return self.tail_bound <= self.tol


class FourierRep(BaseModel):
    """Sparse trigonometric series sum_m c_m e^{i m.x} stored as parallel arrays."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    freqs: np.ndarray = Field(description="(F, d) integer frequencies")
    coeffs: np.ndarray = Field(description="(F,) complex coefficients")
    truncation_tail: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def _shapes(self) -> "FourierRep":
        if self.freqs.ndim != 2 or self.coeffs.ndim != 1 or len(self.freqs) != len(self.coeffs):
            raise ValueError("freqs must be (F, d) and coeffs (F,)")
        return self

    @classmethod
    def from_terms(cls, terms: Dict[MultiIndex, complex], truncation_tail: float = 0.0) -> "FourierRep":
        if not terms:
            raise ValueError("a Fourier representation needs at least one term")
        keys = sorted(terms)
        d = len(keys[0])
        freqs = np.array(keys, dtype=np.int64).reshape(len(keys), d)
        coeffs = np.array([complex(terms[k]) for k in keys], dtype=np.complex128)
        return cls(freqs=freqs, coeffs=coeffs, truncation_tail=truncation_tail)

    @property
    def d(self) -> int:
        return self.freqs.shape[1]

    @property
    def terms(self) -> Dict[MultiIndex, complex]:
        return {tuple(int(v) for v in m): complex(c) for m, c in zip(self.freqs, self.coeffs)}

    def coefficient(self, m: MultiIndex) -> complex:
        hit = np.all(self.freqs == np.asarray(m, dtype=np.int64), axis=1)
        return complex(self.coeffs[hit].sum()) if hit.any() else 0.0j

    def bandwidth(self, eps: float = 0.0) -> int:
        """Largest |m|_inf among coefficients with modulus above eps."""
        active = np.abs(self.coeffs) > eps
        if not active.any():
            return 0
        return int(np.abs(self.freqs[active]).max())

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        table = self.terms
        return all(abs(c - np.conj(table.get(tuple(-v for v in m), 0.0))) <= atol for m, c in table.items())

    def evaluate(self, points: np.ndarray, chunk: int = 4096) -> np.ndarray:
        """Direct summation at (P, d) points."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        out = np.zeros(len(pts), dtype=np.complex128)
        freqs = self.freqs.astype(np.float64)
        for start in range(0, len(freqs), chunk):
            phase = pts @ freqs[start:start + chunk].T
            out += np.exp(1j * phase) @ self.coeffs[start:start + chunk]
        return out

    def evaluate_on_grid(self, M: int) -> np.ndarray:
        """Exact values at the uniform grid 2*pi*t/M, t in {0..M-1}^d (frequencies folded mod M)."""
        folded = np.zeros((M,) * self.d, dtype=np.complex128)
        np.add.at(folded, tuple(np.mod(self.freqs, M).T), self.coeffs)
        return np.fft.ifftn(folded) * (M ** self.d)


class SplineCoefficients(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    constant: float = Field(description="The constant term c")
    knot_coeffs: np.ndarray = Field(description="c_k over Omega_n in lexicographic order")

    @model_validator(mode="after")
    def _zero_sum(self) -> "SplineCoefficients":
        total = float(np.sum(self.knot_coeffs))
        scale = max(1.0, float(np.sum(np.abs(self.knot_coeffs))))
        if abs(total) > 1e-10 * scale:
            raise ValueError(f"knot coefficients must sum to zero, got {total:.3e}")
        return self


class RateSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    p: float = Field(ge=1, le=2, description="Exponent of the class U_p")
    q: float = Field(ge=2, description="Error norm exponent; math.inf for the sup norm")
    gamma: float = Field(gt=0)
    d: int = Field(ge=1)

    @property
    def inv_p(self) -> float:
        return 1.0 / self.p

    @property
    def inv_q(self) -> float:
        return 0.0 if math.isinf(self.q) else 1.0 / self.q

    @property
    def gap(self) -> float:
        """1/p - 1/q."""
        return self.inv_p - self.inv_q

    @property
    def tail_exponent(self) -> float:
        """s = qp/(q-p), with s = p for q = inf."""
        return self.p if math.isinf(self.q) else self.q * self.p / (self.q - self.p)

    @property
    def p_conjugate(self) -> float:
        return math.inf if self.p == 1 else self.p / (self.p - 1)

    @property
    def q_conjugate(self) -> float:
        return 1.0 if math.isinf(self.q) else self.q / (self.q - 1)

    def hypothesis_violation(self) -> Optional[str]:
        if self.gap < 0.5 - 1e-12:
            return (f"1/p - 1/q = {self.gap:.4g} < 1/2: the error theorem needs "
                    "1 <= p <= 2 <= q <= inf with 1/p - 1/q >= 1/2")
        if self.gamma <= self.d:
            return f"gamma = {self.gamma:g} must exceed d = {self.d} for an absolutely summable kernel"
        return None


class TestFunction(BaseModel):
    """f = K*phi together with the phi it came from."""

    __test__: ClassVar[bool] = False
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    phi_coeffs: FourierRep
    f_coeffs: FourierRep
    p: float
    p_norm_of_phi: float
    normalized: bool = False


class StudyRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    q: float
    p: float
    gamma: float
    d: int
    measured_error: float = Field(ge=0)
    theoretical_bound: float = Field(ge=0)
    bound_exponent: float


class StudyResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    rows: List[StudyRow]
    fitted_slope: float
    predicted_exponent: float
    observed_orders: List[float] = Field(default_factory=list)


class CheckResult(BaseModel):
    name: str
    measured: float = Field(description="Largest observed deviation")
    threshold: float
    passed: bool


class StudyConfig(BaseModel):
    d: int = Field(ge=1)
    gamma: float = Field(gt=0)
    norm_kind: NormKind = "l2"
    p: float = Field(ge=1, le=2)
    q: float = Field(ge=2)
    n_list: List[int] = Field(min_length=2)
    M: Optional[int] = Field(default=None, ge=4, description="Quadrature points per axis")
    phi: List[List[float]] = Field(description="Entries [m_1, ..., m_d, re, im]")
    normalize: bool = True
    output: Optional[str] = None
    tol: float = Field(default=1e-8, gt=0)
    seed: int = 0

    @field_validator("norm_kind", mode="before")
    @classmethod
    def _norm_alias(cls, value):
        return normalize_norm_kind(value)

    @field_validator("n_list")
    @classmethod
    def _increasing(cls, n_list: List[int]) -> List[int]:
        if any(v < 1 for v in n_list) or any(b <= a for a, b in zip(n_list, n_list[1:])):
            raise ValueError(f"n_list must be positive and strictly increasing, got {n_list}")
        return n_list

    @model_validator(mode="after")
    def _feasible(self) -> "StudyConfig":
        message = self.rate_spec().hypothesis_violation()
        if message:
            raise ValueError(message)
        for entry in self.phi:
            if len(entry) != self.d + 2:
                raise ValueError(f"phi entry {entry} must have d + 2 = {self.d + 2} numbers")
        if not self.phi:
            raise ValueError("phi needs at least one term")
        return self

    def rate_spec(self) -> RateSpec:
        return RateSpec(p=self.p, q=self.q, gamma=self.gamma, d=self.d)

    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(gamma=self.gamma, norm_kind=self.norm_kind)

    def phi_rep(self) -> FourierRep:
        terms: Dict[MultiIndex, complex] = {}
        for entry in self.phi:
            m = tuple(int(round(v)) for v in entry[: self.d])
            terms[m] = terms.get(m, 0.0) + complex(entry[self.d], entry[self.d + 1])
        return FourierRep.from_terms(terms)
