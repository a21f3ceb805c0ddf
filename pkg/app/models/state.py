from typing import Dict, List, Optional, Any, Literal, TypedDict
import math

import mpmath
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

LawKind = Literal["special", "mixture-powerlaw", "mixture-lacunary", "custom"]
RegionKind = Literal["Localized", "Delocalized", "Critical"]


def _mp_to_pair(z: Any) -> Dict[str, float]:
    z = mpmath.mpc(z)
    return {"re": float(z.real), "im": float(z.imag)}


class PrecisionPolicy(BaseModel):
    """Working precision for degree-N work: base_bits + ceil(per_degree_bits * N)."""
    base_bits: int = 256
    per_degree_bits: float = 1.5
    quadrature_tol: float = 1e-30

    @field_validator("base_bits")
    @classmethod
    def _check_base(cls, value: int) -> int:
        if value < 128:
            raise ValueError(f"base_bits must be at least 128, got {value}")
        return value

    @field_validator("per_degree_bits", "quadrature_tol")
    @classmethod
    def _check_positive(cls, value: float) -> float:
        if value < 0:
            raise ValueError("precision parameters must be non-negative")
        return value

    def bits_for(self, degree: int) -> int:
        """Effective precision in bits for polynomials of the given degree."""
        return max(128, self.base_bits + math.ceil(self.per_degree_bits * degree))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "base_bits": self.base_bits,
            "per_degree_bits": self.per_degree_bits,
            "quadrature_tol": self.quadrature_tol,
        }


class InterArrivalLaw(BaseModel):
    """Discrete law K(n) on the positive integers."""
    kind: LawKind = "special"
    alpha: float = 0.5
    truncation_N: int = 0
    values: List[str] = Field(default_factory=list)
    tail_exponent: Optional[float] = None

    @model_validator(mode="after")
    def _check(self) -> "InterArrivalLaw":
        if self.kind != "custom" and not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0,1), got {self.alpha}")
        if self.kind == "custom":
            if not self.values:
                raise ValueError("custom law needs a non-empty value table")
            if self.tail_exponent is None:
                raise ValueError("custom law must declare its tail exponent")
            if mpmath.mpf(self.values[0]) <= 0:
                raise ValueError("custom law needs K(1) > 0")
            if any(mpmath.mpf(v) < 0 for v in self.values):
                raise ValueError("custom law has negative masses")
        return self

    @classmethod
    def special(cls, alpha: float, truncation_N: int = 0) -> "InterArrivalLaw":
        return cls(kind="special", alpha=alpha, truncation_N=truncation_N)

    @classmethod
    def custom(cls, values: List[Any], tail_exponent: float) -> "InterArrivalLaw":
        return cls(kind="custom", values=[str(v) for v in values], tail_exponent=tail_exponent,
                   alpha=tail_exponent if 0 < tail_exponent < 1 else 0.5)

    def truncation_for(self, N: int) -> int:
        """Largest n materialized for normalization diagnostics (default 4N)."""
        return self.truncation_N if self.truncation_N > 0 else 4 * N

    def descriptor(self) -> Dict[str, Any]:
        """Canonical description used in file headers and cache keys."""
        data: Dict[str, Any] = {"kind": self.kind, "alpha": self.alpha}
        if self.kind == "custom":
            data["values"] = list(self.values)
            data["tail_exponent"] = self.tail_exponent
        return data

    def to_dict(self) -> Dict[str, Any]:
        data = self.descriptor()
        data["truncation_N"] = self.truncation_N
        return data


class RenewalTable(BaseModel):
    """Triangular array P(tau_j = n), stored by renewal index: rows[j-1][n-j] = P(tau_j = n)."""
    model_config = ConfigDict(frozen=True)

    N: int
    law: InterArrivalLaw
    precision_bits: int
    rows: List[List[Any]]
    underflow_count: int = 0

    def entry(self, j: int, n: int) -> Any:
        """P(tau_j = n); zero for j > n."""
        if j > n:
            return mpmath.mpf(0)
        return self.rows[j - 1][n - j]

    def column(self, n: int) -> List[Any]:
        """(P(tau_j = n))_{j=1..n}, the coefficients of P_n."""
        return [self.rows[j - 1][n - j] for j in range(1, n + 1)]


class PartitionPolynomial(BaseModel):
    """P_N(w) = sum_j c_j w^j with c_j = P(tau_j = N), j = 1..N."""
    model_config = ConfigDict(frozen=True)

    N: int
    coeffs: List[Any]
    law: InterArrivalLaw
    precision_bits: int

    @property
    def degree(self) -> int:
        return self.N

    def leading_coefficient(self) -> Any:
        return self.coeffs[-1]

    def value_at_one(self) -> Any:
        return mpmath.fsum(self.coeffs)


class ZeroSet(BaseModel):
    """The N-1 zeros of h -> Z_{N,h} in the cylinder, ordered and conjugate-paired."""
    N: int
    law: InterArrivalLaw
    precision_bits: int
    zeros: List[Any] = Field(default_factory=list)
    residuals: List[float] = Field(default_factory=list)
    radii: List[float] = Field(default_factory=list)
    converged: bool = True
    iterations: int = 0
    flags: List[str] = Field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.zeros)

    def as_complex(self) -> List[complex]:
        return [complex(float(z.real), float(z.imag)) for z in self.zeros]

    def upper_half(self) -> List[Any]:
        """Representatives with Im h >= 0."""
        return [z for z in self.zeros if z.imag >= 0]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.N,
            "law": self.law.descriptor(),
            "precision_bits": self.precision_bits,
            "zeros": [dict(_mp_to_pair(z), residual=r) for z, r in zip(self.zeros, self.residuals)],
            "radii": list(self.radii),
            "converged": self.converged,
            "iterations": self.iterations,
            "flags": list(self.flags),
        }


class EmpiricalMeasure(BaseModel):
    """Uniform probability on the N-1 zeros."""
    atoms: List[Any] = Field(default_factory=list)

    @property
    def weight(self) -> float:
        return 1.0 / len(self.atoms)

    def mass(self) -> float:
        return self.weight * len(self.atoms)

    def mean(self) -> complex:
        return complex(sum(complex(z) for z in self.atoms) * self.weight)


class CurveModel(BaseModel):
    """Sampled critical curve: theta grid, points h(theta) and arclength s(theta)."""
    alpha: float
    resolution: int
    thetas: List[float] = Field(default_factory=list)
    points: List[complex] = Field(default_factory=list)
    arclengths: List[float] = Field(default_factory=list)

    def to_rows(self, densities: Optional[List[Optional[float]]] = None) -> List[Dict[str, Any]]:
        densities = densities or [None] * len(self.thetas)
        return [
            {"theta": t, "re": h.real, "im": h.imag, "s": s, "density": d}
            for t, h, s, d in zip(self.thetas, self.points, self.arclengths, densities)
        ]


class RegionLabel(BaseModel):
    """Localized / Delocalized / Critical(tolerance) label of a point of the cylinder."""
    kind: RegionKind
    tolerance: Optional[float] = None
    gap: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "tolerance": self.tolerance, "gap": self.gap}


class ScalingZero(BaseModel):
    """Zero of F_0 with positive imaginary part."""
    index: int
    zeta: Any
    seed: Any
    certified: bool = False
    residual: float = 0.0

    @property
    def gap(self) -> float:
        return float(abs(mpmath.mpc(self.zeta) - mpmath.mpc(self.seed)))

    def to_dict(self) -> Dict[str, Any]:
        z = mpmath.mpc(self.zeta)
        s = mpmath.mpc(self.seed)
        return {
            "n": self.index,
            "re": float(z.real),
            "im": float(z.imag),
            "seed_re": float(s.real),
            "seed_im": float(s.imag),
            "gap": self.gap,
            "certified": self.certified,
        }


class GriffithsConstants(BaseModel):
    """Constants of the Griffiths-coefficient asymptotics."""
    p: float
    alpha: float = 0.5
    window_scaled: bool = True
    a: float
    b: float
    c: float
    d: float
    A: float
    B: float
    C: float
    b1: float
    b2: float
    C1: float
    C2: float
    z0: Any
    z1: Any
    z2: Any

    def to_dict(self) -> Dict[str, Any]:
        data = {k: getattr(self, k) for k in ("p", "alpha", "window_scaled", "a", "b", "c", "d",
                                              "A", "B", "C", "b1", "b2", "C1", "C2")}
        for name in ("z0", "z1", "z2"):
            data[name] = _mp_to_pair(getattr(self, name))
        return data


class GriffithsRun(BaseModel):
    """Zero store n -> ZeroSet and the Taylor coefficients t_k computed from it."""
    p: float
    alpha: float = 0.5
    n0: int = 3
    n_max: int
    precision_bits: int = 256
    zero_store: Dict[int, ZeroSet] = Field(default_factory=dict)
    coefficients: Dict[int, float] = Field(default_factory=dict)

    @field_validator("p")
    @classmethod
    def _check_p(cls, value: float) -> float:
        if not 0 < value < 1:
            raise ValueError(f"p must lie in (0,1), got {value}")
        return value


class VerifyState(TypedDict):
    """State carried through the acceptance workflow."""
    profile: str
    settings: Dict[str, Any]
    results: List[Dict[str, Any]]
    artifacts: Dict[str, Any]
    errors: List[str]
    metadata: Dict[str, Any]
