"""Partition function Z_{N,h}, its h-derivative, the partition polynomial and the
closed-form asymptotic evaluators.

Z_{N,h} = sum_j e^{hj} P(tau_j = N) = P_N(e^h). Two routes are provided: the
renewal table (O(N^3) once, then O(N) per h) and the renewal equation
Z_n = e^h sum_m K(m) Z_{n-m} (O(N^2) per h, mpmath or float64).
"""
import logging
from typing import Any, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
from mpmath import mp, mpc, mpf

from app.models.state import InterArrivalLaw, PartitionPolynomial, RenewalTable
from app.pinning import critcurve
from app.pinning.renewal import k_value, k_values
from app.utils.errors import ConvergenceError, DomainError
from app.utils.numerics import Number, complex_pow, resolve_bits, to_mpc

logger = logging.getLogger(__name__)

GUARD_BITS = 32
MOMENT_GUARD = 0.05
POLE_TOLERANCE = mpf("1e-30")


def evaluate_polynomial(coeffs: Sequence[Any], w: Number, weighted: bool = False) -> mpc:
    """sum_j c_j w^j (or sum_j j c_j w^j when weighted), coeffs[j-1] = c_j.

    Horner in w for |w| <= 1, in 1/w otherwise, so w^N is never formed term by term.
    """
    w = to_mpc(w)
    n = len(coeffs)
    terms = [c * (j + 1) for j, c in enumerate(coeffs)] if weighted else list(coeffs)
    if abs(w) <= 1:
        acc = mpc(0)
        for c in reversed(terms):
            acc = acc * w + c
        return acc * w
    u = 1 / w
    acc = mpc(0)
    for c in terms:
        acc = acc * u + c
    return acc * w ** n


def _check_degree(table: RenewalTable, N: int) -> None:
    if not 1 <= N <= table.N:
        raise DomainError(f"N={N} outside the renewal table range 1..{table.N}")


def partition_value(table: RenewalTable, N: int, h: Number) -> mpc:
    """Z_{N,h} = sum_j e^{hj} P(tau_j = N)."""
    _check_degree(table, N)
    with mp.workprec(table.precision_bits + GUARD_BITS):
        value = evaluate_polynomial(table.column(N), mpmath.exp(to_mpc(h)))
    with mp.workprec(table.precision_bits):
        return +value


def partition_derivative(table: RenewalTable, N: int, h: Number) -> mpc:
    """d/dh Z_{N,h} = sum_j j e^{hj} P(tau_j = N)."""
    _check_degree(table, N)
    with mp.workprec(table.precision_bits + GUARD_BITS):
        value = evaluate_polynomial(table.column(N), mpmath.exp(to_mpc(h)), weighted=True)
    with mp.workprec(table.precision_bits):
        return +value


def partition_polynomial(table: RenewalTable, N: int) -> PartitionPolynomial:
    _check_degree(table, N)
    return PartitionPolynomial(N=N, coeffs=table.column(N), law=table.law,
                               precision_bits=table.precision_bits)


def polynomial_value(poly: PartitionPolynomial, h: Number, weighted: bool = False) -> mpc:
    """Z_{N,h} (or Z'_{N,h}) straight from a PartitionPolynomial."""
    with mp.workprec(poly.precision_bits + GUARD_BITS):
        return evaluate_polynomial(poly.coeffs, mpmath.exp(to_mpc(h)), weighted=weighted)


def partition_by_renewal(law: InterArrivalLaw, N: int, h: Number, with_derivative: bool = False,
                         dtype: str = "mpmath", bits: Optional[int] = None) -> Tuple[Any, Optional[Any]]:
    """(Z_{N,h}, Z'_{N,h}) from the renewal equation, Z_0 = 1.

    Z_n = e^h sum_{m=1}^n K(m) Z_{n-m} and Z'_n = e^h sum_m K(m) (Z_{n-m} + Z'_{n-m}).
    dtype "float64" runs the convolution in numpy complex128.
    """
    if N < 1:
        raise DomainError(f"partition_by_renewal needs N >= 1, got {N}")
    bits = resolve_bits(bits)
    with mp.workprec(bits):
        K = k_values(law, N)
        w = mpmath.exp(to_mpc(h))
    if dtype == "float64":
        K_arr = np.array([float(k) for k in K], dtype=np.float64)
        w_c = complex(float(w.real), float(w.imag))
        Z = np.zeros(N + 1, dtype=np.complex128)
        D = np.zeros(N + 1, dtype=np.complex128)
        Z[0] = 1.0
        for n in range(1, N + 1):
            # Z[n-1::-1][:n] pairs Z_{n-m} with K(m), m = 1..n
            past = Z[n - 1::-1]
            Z[n] = w_c * np.dot(K_arr[:n], past)
            if with_derivative:
                D[n] = w_c * np.dot(K_arr[:n], past + D[n - 1::-1])
        return complex(Z[N]), (complex(D[N]) if with_derivative else None)
    if dtype != "mpmath":
        raise DomainError(f"unknown dtype {dtype!r}; use 'mpmath' or 'float64'")
    with mp.workprec(bits):
        Z: List[mpc] = [mpc(1)]
        D: List[mpc] = [mpc(0)]
        for n in range(1, N + 1):
            past = Z[::-1]
            Z.append(w * mpmath.fdot(K[:n], past))
            if with_derivative:
                D.append(w * mpmath.fdot(K[:n], [a + b for a, b in zip(past, D[::-1])]))
            if n % 1000 == 0:
                logger.debug(f"renewal convolution step {n}/{N}")
        return Z[N], (D[N] if with_derivative else None)


def critical_growth_exponent(law: InterArrivalLaw, Ns: Sequence[int]) -> float:
    """Decay exponent of Z_{N,0} = P(N in tau): minus the least-squares slope of log Z_{N,0}
    against log N, which tends to 1 - alpha for power-law tails."""
    top = max(Ns)
    K = np.array([float(k) for k in k_values(law, top, bits=64)])
    Z = np.zeros(top + 1)
    Z[0] = 1.0
    for n in range(1, top + 1):
        Z[n] = np.dot(K[:n], Z[n - 1::-1])
    logs = np.log(np.array(Ns, dtype=np.float64))
    slope, _ = np.polyfit(logs, np.log(Z[list(Ns)]), 1)
    return float(-slope)


def _pole_guard(h: mpc) -> mpc:
    one_minus = 1 - mpmath.exp(h)
    if abs(one_minus) < POLE_TOLERANCE:
        raise DomainError(f"pole of the delocalized asymptotics at h={mpmath.nstr(h, 8)}")
    return one_minus


def asymptotic_deloc(law: InterArrivalLaw, N: int, h: Number, bits: Optional[int] = None) -> mpc:
    """K(N) e^h / (1 - e^h)^2, valid for Re h < 0 and, in the special family, on D_alpha."""
    with mp.workprec(resolve_bits(bits)):
        h = to_mpc(h)
        one_minus = _pole_guard(h)
        if h.real >= 0:
            if law.kind != "special":
                raise DomainError(f"delocalized asymptotics need Re h < 0 for law {law.kind}")
            label = critcurve.classify(law.alpha, h)
            if label.kind != "Delocalized":
                raise DomainError(f"h={mpmath.nstr(h, 8)} is {label.kind}, not Delocalized")
        return k_value(law, N) * mpmath.exp(h) / one_minus ** 2


def asymptotic_deloc_powerlaw(alpha: Number, N: int, h: Number, bits: Optional[int] = None) -> mpc:
    """e^h N^{-1-alpha} / ((-Gamma(-alpha)) (1 - e^h)^2), the special-family tail form."""
    with mp.workprec(resolve_bits(bits)):
        alpha = mpf(alpha)
        h = to_mpc(h)
        one_minus = _pole_guard(h)
        return mpmath.exp(h) / (-mpmath.gamma(-alpha) * one_minus ** 2) * mpf(N) ** (-1 - alpha)


def _pole_prefactor(alpha: mpf, h: mpc) -> mpc:
    return complex_pow(1 - mpmath.exp(-h), (1 - alpha) / alpha) / (alpha * mpmath.exp(h))


def asymptotic_loc(alpha: Number, N: int, h: Number, bits: Optional[int] = None) -> mpc:
    """(1 - e^{-h})^{(1-alpha)/alpha} / (alpha e^h) * z_{alpha,h}^{-(N+1)} on L_alpha."""
    with mp.workprec(resolve_bits(bits)):
        alpha = mpf(alpha)
        h = to_mpc(h)
        label = critcurve.classify(alpha, h)
        if label.kind != "Localized":
            raise DomainError(f"h={mpmath.nstr(h, 8)} is {label.kind}, not Localized")
        z = critcurve.pole_location(alpha, h)
        return _pole_prefactor(alpha, h) * z ** (-(N + 1))


def asymptotic_crit(alpha: Number, N: int, h: Number, bits: Optional[int] = None) -> mpc:
    """Pole term with phase e^{-i(N+1) arg z} plus the N^{-1-alpha} term, for h on C_alpha."""
    with mp.workprec(resolve_bits(bits)):
        alpha = mpf(alpha)
        h = to_mpc(h)
        if abs(h) < POLE_TOLERANCE:
            raise DomainError("h = 0 is the singular point of the critical curve")
        z = critcurve.pole_location(alpha, h)
        if abs(abs(z) - 1) > mpf("1e-8"):
            raise DomainError(f"h={mpmath.nstr(h, 8)} is not on the critical curve (|z|={mpmath.nstr(abs(z), 8)})")
        phase = mpmath.expj(-(N + 1) * mpmath.arg(z))
        return _pole_prefactor(alpha, h) * phase + asymptotic_deloc_powerlaw(alpha, N, h)


def moment_density_half(h: Number, x: Number) -> mpc:
    """Absolutely continuous part of the alpha=1/2 moment measure at x in (0,1)."""
    h = to_mpc(h)
    x = mpf(x)
    eh = mpmath.exp(h)
    return eh * mpmath.sqrt(x * (1 - x)) / (mp.pi * x * (x * (1 - 2 * eh) + eh * eh))


def moment_atom_half(h: Number) -> Tuple[mpc, mpc]:
    """(weight, location) of the atom present for Re h > 0."""
    h = to_mpc(h)
    eh = mpmath.exp(h)
    return 2 * (eh - 1) / (2 * eh - 1), eh * eh / (2 * eh - 1)


def moment_oracle_half(h: Number, N: int, tol: Number = mpf("1e-20"), bits: Optional[int] = None) -> mpc:
    """Z_{N,h} for the alpha=1/2 special family as the N-th moment of a measure on [0,1].

    The quadrature is split at 1 - 10|h|^2, where the integrand has a near-pole.
    """
    with mp.workprec(resolve_bits(bits)):
        h = to_mpc(h)
        tol = mpf(tol)
        if abs(h.real) < MOMENT_GUARD:
            raise DomainError(f"moment oracle needs |Re h| >= {MOMENT_GUARD}, got {float(h.real)}")
        split = 1 - 10 * abs(h) ** 2
        points = [0, split, 1] if 0 < split < 1 else [0, 1]
        integral, error = mpmath.quad(lambda x: x ** N * moment_density_half(h, x), points,
                                      method="tanh-sinh", error=True)
        scale = max(abs(integral), mpf(2) ** (-mp.prec))
        if error > tol * scale:
            logger.error(f"moment quadrature stalled: error {mpmath.nstr(error, 5)} at h={mpmath.nstr(h, 8)}")
            raise ConvergenceError(f"moment quadrature error {mpmath.nstr(error, 5)} above tolerance",
                                   achieved=float(error / scale))
        if h.real > 0:
            weight, location = moment_atom_half(h)
            integral += weight * location ** N
        return integral


def g_n(zeta: Number, N: int, bits: Optional[int] = None) -> mpc:
    """Atom contribution at h = zeta/sqrt(N): 2(e^h - 1) e^{2 zeta sqrt N} / (2e^h - 1)^{N+1}."""
    with mp.workprec(resolve_bits(bits)):
        zeta = to_mpc(zeta)
        root = mpmath.sqrt(N)
        eh = mpmath.exp(zeta / root)
        return 2 * (eh - 1) * mpmath.exp(2 * zeta * root) / (2 * eh - 1) ** (N + 1)


def g_n_expansion(zeta: Number, N: int, bits: Optional[int] = None) -> mpc:
    """Three-term large-N expansion of g_n."""
    with mp.workprec(resolve_bits(bits)):
        zeta = to_mpc(zeta)
        N = mpf(N)
        e = mpmath.exp(zeta ** 2)
        return (2 * zeta * e / mpmath.sqrt(N)
                - zeta ** 2 * (3 + 2 * zeta ** 2) * e / N
                + zeta ** 3 * (26 + 31 * zeta ** 2 + 6 * zeta ** 4) * e / (6 * N ** mpf(1.5)))
