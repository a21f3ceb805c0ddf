"""Inter-arrival laws, the renewal mass table P(tau_j = n) and the 1/2-stable density."""
import logging
import math
from typing import Any, Dict, List, Optional

import mpmath
from mpmath import mp, mpf

from app.models.state import InterArrivalLaw, PrecisionPolicy, RenewalTable
from app.utils.errors import DomainError
from app.utils.numerics import Number, complex_pow, resolve_bits, to_mpc

logger = logging.getLogger(__name__)

# Beyond this index K(n) of the special family comes from the gamma ratio.
PRODUCT_FORM_LIMIT = 4096


def _zeta2() -> mpf:
    return mp.pi ** 2 / 6


def _zeta4() -> mpf:
    return mp.pi ** 4 / 90


def _special_k(alpha: mpf, n: int) -> mpf:
    if n <= PRODUCT_FORM_LIMIT:
        value = alpha
        for m in range(1, n):
            value *= (m - alpha) / (m + 1)
        return value
    return mpmath.exp(mpmath.loggamma(n - alpha) - mpmath.loggamma(n + 1)) / (-mpmath.gamma(-alpha))


def _mixture_component(law: InterArrivalLaw, n: int) -> mpf:
    if law.kind == "mixture-powerlaw":
        return 1 / (mpf(n) ** 2 * _zeta2())
    root = math.isqrt(n)
    if root * root == n:
        return 1 / (mpf(n) ** 2 * _zeta4())
    return mpf(0)


def k_value(law: InterArrivalLaw, n: int, bits: Optional[int] = None) -> mpf:
    """K(n) for the given law."""
    if n < 1:
        raise DomainError(f"K(n) needs n >= 1, got {n}")
    with mp.workprec(resolve_bits(bits)):
        if law.kind == "custom":
            return mpf(law.values[n - 1]) if n <= len(law.values) else mpf(0)
        alpha = mpf(law.alpha)
        special = _special_k(alpha, n)
        if law.kind == "special":
            return special
        return (special + _mixture_component(law, n)) / 2


def k_values(law: InterArrivalLaw, n_max: int, bits: Optional[int] = None) -> List[mpf]:
    """[K(1), ..., K(n_max)] via the telescoping product K(n+1) = K(n)(n - alpha)/(n + 1)."""
    with mp.workprec(resolve_bits(bits)):
        if law.kind == "custom":
            return [k_value(law, n) for n in range(1, n_max + 1)]
        alpha = mpf(law.alpha)
        values = [alpha]
        for n in range(1, n_max):
            values.append(values[-1] * (n - alpha) / (n + 1))
        if law.kind == "special":
            return values
        return [(values[n - 1] + _mixture_component(law, n)) / 2 for n in range(1, n_max + 1)]


def khat(alpha: Number, z: Number, bits: Optional[int] = None) -> mpmath.mpc:
    """Generating function 1 - (1 - z)^alpha of the special family."""
    with mp.workprec(resolve_bits(bits)):
        z = to_mpc(z)
        if z.imag == 0 and z.real >= 1:
            if z.real == 1:
                logger.warning("khat evaluated at z=1, returning the boundary value 1")
                return mpmath.mpc(1)
            raise DomainError(f"khat: z={z.real} lies on the branch cut [1, inf)")
        return 1 - complex_pow(1 - z, alpha)


def tail_constant(law: InterArrivalLaw, bits: Optional[int] = None) -> mpf:
    """Effective c in K(n) ~ c n^{-1-alpha}; mixtures keep half the special-family value."""
    with mp.workprec(resolve_bits(bits)):
        if law.kind == "custom":
            n = len(law.values)
            return mpf(law.values[-1]) * mpf(n) ** (1 + mpf(law.tail_exponent))
        c = 1 / (-mpmath.gamma(-mpf(law.alpha)))
        return c if law.kind == "special" else c / 2


def law_normalization(law: InterArrivalLaw, n_max: int, bits: Optional[int] = None) -> Dict[str, Any]:
    """Partial mass sum_{n<=n_max} K(n), its deficit and the tail constant."""
    with mp.workprec(resolve_bits(bits)):
        total = mpmath.fsum(k_values(law, n_max))
        exponent = law.tail_exponent if law.kind == "custom" else law.alpha
        return {
            "n_max": n_max,
            "mass": total,
            "deficit": 1 - total,
            "tail_constant": tail_constant(law),
            "tail_exponent": exponent,
        }


def renewal_table(law: InterArrivalLaw, N: int, policy: Optional[PrecisionPolicy] = None) -> RenewalTable:
    """Full triangular table P(tau_j = n), 1 <= j <= n <= N.

    P(tau_1 = n) = K(n) and P(tau_{j+1} = n+1) = sum_{m=j}^{n} P(tau_j = m) K(n+1-m).
    """
    if N < 1:
        raise DomainError(f"renewal_table needs N >= 1, got {N}")
    policy = policy or PrecisionPolicy()
    bits = policy.bits_for(N)
    logger.info(f"Building renewal table: law={law.kind}, alpha={law.alpha}, N={N}, bits={bits}")
    with mp.workprec(bits):
        K = k_values(law, N)
        rows: List[List[mpf]] = [[K[0]]]
        for n in range(1, N):
            rows[0].append(K[n])
            for j in range(1, n + 1):
                # rows[j-1][m-j] = P(tau_j = m) for m = j..n, against K(n+1-m)
                value = mpmath.fdot(rows[j - 1][: n - j + 1], K[n - j::-1])
                if j == n:
                    rows.append([value])
                else:
                    rows[j].append(value)
            if n % 100 == 0:
                logger.debug(f"renewal table column {n + 1}/{N} done")
        floor = mpf(2) ** (-bits)
        underflow = sum(1 for row in rows for v in row if 0 < v < floor)
    if underflow:
        logger.warning(f"renewal table N={N}: {underflow} entries below 2^-{bits}")
    return RenewalTable(N=N, law=law, precision_bits=bits, rows=rows, underflow_count=underflow)


def closed_form_half(j: int, n: int, bits: Optional[int] = None) -> mpf:
    """P(tau_j = n) for the alpha = 1/2 special family: (j/(2n-j)) 2^{-2n+j} C(2n-j, n)."""
    if not 1 <= j <= n:
        raise DomainError(f"closed form needs 1 <= j <= n, got j={j}, n={n}")
    with mp.workprec(resolve_bits(bits)):
        return mpf(j) / (2 * n - j) * mpmath.ldexp(mpmath.binomial(2 * n - j, n), -2 * n + j)


def stable_density_half(x: Number, bits: Optional[int] = None) -> mpf:
    """Density of the 1/2-stable law: exp(-1/(4x)) / sqrt(4 pi x^3)."""
    with mp.workprec(resolve_bits(bits)):
        x = mpf(x)
        if x <= 0:
            raise DomainError(f"stable density needs x > 0, got {x}")
        return mpmath.exp(-1 / (4 * x)) / mpmath.sqrt(4 * mp.pi * x ** 3)


def stable_density_asymptotics(alpha: Number, x: Number, side: str, bits: Optional[int] = None) -> mpf:
    """Small-x or large-x asymptotic form of the alpha-stable density (diagnostic only)."""
    with mp.workprec(resolve_bits(bits)):
        alpha = mpf(alpha)
        x = mpf(x)
        if x <= 0:
            raise DomainError(f"stable asymptotics need x > 0, got {x}")
        if side == "infinity":
            return mpmath.gamma(1 + alpha) * mpmath.sin(mp.pi * alpha) / mp.pi * x ** (-1 - alpha)
        if side == "zero":
            ratio = alpha / x
            prefactor = (2 * mp.pi * alpha * (1 - alpha)) ** mpf(-0.5)
            power = ratio ** ((2 - alpha) / (2 * (1 - alpha)))
            return prefactor * power * mpmath.exp(-(1 - alpha) * ratio ** (alpha / (1 - alpha)))
        raise DomainError(f"unknown side {side!r}; use 'zero' or 'infinity'")
