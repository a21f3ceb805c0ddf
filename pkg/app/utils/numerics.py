"""Arbitrary-precision complex helpers and the special functions used across the lab.

Every function runs inside its own ``mpmath.workprec`` block: the result does not
depend on whatever global precision the caller left behind. Values are plain
``mpmath.mpf`` / ``mpmath.mpc`` objects.
"""
import logging
import math
from typing import Any, Optional, Union

import mpmath
from mpmath import mp, mpc, mpf

from app.utils.errors import ConvergenceError, DomainError

logger = logging.getLogger(__name__)

# Arbitrary-precision complex number; mpc carries its own mantissa width.
BigComplex = mpc
Number = Union[int, float, complex, str, mpf, mpc]

MIN_BITS = 64
DEFAULT_BITS = 128
ERFC_SPLIT_RADIUS = 4
ERFC_SERIES_STRIP = 2
ERFC_MAX_TERMS = 20000
POLYLOG_DECREASING_RUN = 50
POLYLOG_MAX_TERMS = 10 ** 7


def resolve_bits(bits: Optional[int] = None) -> int:
    """Working precision for a call: explicit bits, else the ambient mpmath precision."""
    if bits is None:
        bits = mp.prec
    return max(int(bits), MIN_BITS)


def to_mpc(z: Number) -> mpc:
    """Convert any scalar (including strings) to mpc at the current precision."""
    if isinstance(z, mpc):
        return +z
    if isinstance(z, complex):
        return mpc(z.real, z.imag)
    return mpc(z)


def principal_log(z: Number, bits: Optional[int] = None) -> mpc:
    """Principal logarithm, imaginary part in (-pi, pi], Log(x) = log|x| + i*pi for x < 0."""
    with mp.workprec(resolve_bits(bits)):
        z = to_mpc(z)
        if z == 0:
            raise DomainError("logarithm of zero")
        if z.imag == 0 and z.real < 0:
            return mpc(mpmath.log(-z.real), +mp.pi)
        return mpc(mpmath.log(z))


def complex_pow(z: Number, c: Number, bits: Optional[int] = None) -> mpc:
    """z**c := exp(c Log z) with the principal branch (argument +pi on the negative axis)."""
    with mp.workprec(resolve_bits(bits)):
        z = to_mpc(z)
        c = mpf(c)
        if z == 0:
            if c > 0:
                return mpc(0)
            raise DomainError(f"0 raised to non-positive power {c}")
        return mpmath.exp(c * principal_log(z))


def _erf_series(z: mpc) -> mpc:
    """Maclaurin series of erf; guard bits absorb the e^{|z|^2} cancellation."""
    r2 = float(abs(z)) ** 2
    guard = int(2 * r2 * math.log2(math.e)) + 20
    with mp.workprec(mp.prec + guard):
        z = +z
        mz2 = -z * z
        term = z
        total = z
        eps = mpf(2) ** (-mp.prec)
        n = 0
        while True:
            n += 1
            term = term * mz2 / n
            piece = term / (2 * n + 1)
            total += piece
            if n > r2 and abs(piece) <= eps * abs(total):
                break
            if n > ERFC_MAX_TERMS:
                raise ConvergenceError(f"erf series did not converge at z={z}", achieved=float(abs(piece)))
        return 2 * total / mpmath.sqrt(mp.pi)


def _erfc_continued_fraction(z: mpc) -> Optional[mpc]:
    """Laplace continued fraction for Re z > 0, evaluated with the modified Lentz method.

    Returns None when the fraction has not settled within ERFC_MAX_TERMS.
    """
    with mp.workprec(mp.prec + 10):
        z = +z
        tiny = mpf(2) ** (-4 * mp.prec)
        eps = mpf(2) ** (-mp.prec)
        f = z
        c_lentz = z
        d_lentz = mpc(0)
        for n in range(1, ERFC_MAX_TERMS):
            a = mpf(n) / 2
            d_lentz = z + a * d_lentz
            if d_lentz == 0:
                d_lentz = tiny
            c_lentz = z + a / c_lentz
            if c_lentz == 0:
                c_lentz = tiny
            d_lentz = 1 / d_lentz
            delta = c_lentz * d_lentz
            f *= delta
            if abs(delta - 1) < eps:
                return mpmath.exp(-z * z) / (mpmath.sqrt(mp.pi) * f)
    return None


def erfc_complex(z: Number, bits: Optional[int] = None) -> mpc:
    """Complementary error function of a complex argument.

    Power series for |z| < 4 or |Re z| < 2, continued fraction otherwise, with
    erfc(-z) = 2 - erfc(z) keeping the fraction in Re > 0.
    """
    with mp.workprec(resolve_bits(bits)):
        z = to_mpc(z)
        if abs(z) < ERFC_SPLIT_RADIUS or abs(z.real) < ERFC_SERIES_STRIP:
            return 1 - _erf_series(z)
        if z.real < 0:
            return 2 - erfc_complex(-z)
        value = _erfc_continued_fraction(z)
        if value is None:
            logger.debug(f"erfc continued fraction stalled at z={mpmath.nstr(z, 8)}; using series")
            return 1 - _erf_series(z)
        return value


def erfc_reference(z: Number, bits: Optional[int] = None) -> mpc:
    """mpmath's own erfc, the oracle for erfc_complex."""
    with mp.workprec(resolve_bits(bits)):
        return mpc(mpmath.erfc(to_mpc(z)))


def log_gamma_real(x: Number, bits: Optional[int] = None) -> mpf:
    """log Gamma(x) for real x > 0."""
    with mp.workprec(resolve_bits(bits)):
        x = mpf(x)
        if x <= 0:
            raise DomainError(f"log_gamma_real needs x > 0, got {x}")
        return mpmath.loggamma(x)


def polylog_direct(s: Number, x: Number, tol: Number = mpf("1e-30"), bits: Optional[int] = None) -> mpf:
    """Li_s(x) = sum_{n>=1} x^n / n^s for 0 < x < 1, summed directly.

    Stops once the summand has decreased for 50 consecutive terms and the
    geometric majorant of the tail is below tol relative to the partial sum.
    """
    with mp.workprec(resolve_bits(bits)):
        s = mpf(s)
        x = mpf(x)
        tol = mpf(tol)
        if not 0 < x < 1:
            raise DomainError(f"polylog_direct needs 0 < x < 1, got {x}")
        log_x = mpmath.log(x)
        total = mpf(0)
        previous = None
        decreasing = 0
        n = 0
        while n < POLYLOG_MAX_TERMS:
            n += 1
            term = mpmath.exp(n * log_x - s * mpmath.log(n))
            total += term
            if previous is not None and term < previous:
                decreasing += 1
            else:
                decreasing = 0
            if decreasing >= POLYLOG_DECREASING_RUN:
                ratio = term / previous if s < 0 else x
                if ratio < 1:
                    tail = term * ratio / (1 - ratio)
                    if tail <= tol * total:
                        return total
            previous = term
        raise ConvergenceError(f"polylog_direct({s}, {x}) exceeded {POLYLOG_MAX_TERMS} terms")


def polylog_leading(beta: Number, p: Number, bits: Optional[int] = None) -> mpf:
    """T_beta = Gamma(1+beta) / |log p|^{1+beta}, the large-beta size of Li_{-beta}(p)."""
    with mp.workprec(resolve_bits(bits)):
        beta = mpf(beta)
        p = mpf(p)
        if not 0 < p < 1:
            raise DomainError(f"p must lie in (0,1), got {p}")
        return mpmath.exp(mpmath.loggamma(1 + beta) - (1 + beta) * mpmath.log(abs(mpmath.log(p))))


def as_complex(z: Any) -> complex:
    """Down-convert an mpmath scalar to a Python complex."""
    z = to_mpc(z)
    return complex(float(z.real), float(z.imag))
