"""alpha = 1/2 scaling function F0(zeta) = lim sqrt(N) Z_{N, zeta/sqrt(N)}, its zeros and
the finite-N corrections F1, F2 and z1, z2 of the closest zeros.
"""
import logging
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import mpmath
from mpmath import mp, mpc, mpf

from app.models.state import InterArrivalLaw, RenewalTable, ScalingZero
from app.pinning.partition import partition_by_renewal, partition_derivative, partition_value
from app.pinning.zeros import count_zeros_in_disk, count_zeros_in_rectangle
from app.utils.errors import ConvergenceError, DomainError, NumericalError
from app.utils.numerics import Number, erfc_complex, resolve_bits, to_mpc

logger = logging.getLogger(__name__)

NEWTON_STEPS = 100
CERTIFY_RADIUS = 0.2
CERTIFY_POINTS = 256
SWEEP_MARGIN = 1.0
SEED_OVERSHOOT = 0.5
SCALING_BITS = 128


def f0(zeta: Number, bits: Optional[int] = None) -> mpc:
    """F0(zeta) = zeta e^{zeta^2} erfc(-zeta) + 1/sqrt(pi)."""
    with mp.workprec(resolve_bits(bits or SCALING_BITS)):
        zeta = to_mpc(zeta)
        return zeta * mpmath.exp(zeta ** 2) * erfc_complex(-zeta) + 1 / mpmath.sqrt(mp.pi)


def f0_prime(zeta: Number, bits: Optional[int] = None) -> mpc:
    """F0'(zeta) = 2 zeta/sqrt(pi) + e^{zeta^2} (1 + 2 zeta^2)(1 + erf zeta)."""
    with mp.workprec(resolve_bits(bits or SCALING_BITS)):
        zeta = to_mpc(zeta)
        return 2 * zeta / mpmath.sqrt(mp.pi) + mpmath.exp(zeta ** 2) * (1 + 2 * zeta ** 2) * erfc_complex(-zeta)


def _shifted_exp(zeta: mpc) -> mpc:
    # e^{zeta^2} (1 + erf zeta)
    return mpmath.exp(zeta ** 2) * erfc_complex(-zeta)


def f1_f2_values(zeta: Number, bits: Optional[int] = None) -> Tuple[mpc, mpc]:
    """(F1(zeta), F2(zeta)), the 1/sqrt(N) and 1/N corrections to sqrt(N) Z_{N, zeta/sqrt(N)}."""
    with mp.workprec(resolve_bits(bits or SCALING_BITS)):
        z = to_mpc(zeta)
        E = _shifted_exp(z)
        root_pi = mpmath.sqrt(mp.pi)
        F1 = -z / 2 * (E * z * (2 * z ** 2 + 3) + 2 * (z ** 2 + 1) / root_pi)
        F2 = (2 * E * (6 * z ** 4 + 31 * z ** 2 + 26) * z ** 3
              + (12 * z ** 6 + 56 * z ** 4 + 30 * z ** 2 - 3) / root_pi) / 24
        return F1, F2


def f1_prime(zeta: Number, bits: Optional[int] = None) -> mpc:
    with mp.workprec(resolve_bits(bits or SCALING_BITS)):
        z = to_mpc(zeta)
        E = _shifted_exp(z)
        return -((4 * z ** 5 + 14 * z ** 3 + 6 * z) * E + (4 * z ** 4 + 12 * z ** 2 + 2) / mpmath.sqrt(mp.pi)) / 2


def f1_at_zero(z0: Number) -> mpc:
    """F1 at a zero of F0."""
    z0 = to_mpc(z0)
    return z0 / (2 * mpmath.sqrt(mp.pi))


def f2_at_zero(z0: Number) -> mpc:
    """F2 at a zero of F0."""
    z0 = to_mpc(z0)
    return -(6 * z0 ** 4 + 22 * z0 ** 2 + 3) / (24 * mpmath.sqrt(mp.pi))


def f1_prime_at_zero(z0: Number) -> mpc:
    z0 = to_mpc(z0)
    return (z0 ** 2 + 2) / mpmath.sqrt(mp.pi)


def f0_integral_representation(zeta: Number, bits: Optional[int] = None) -> mpc:
    """(2/pi) int_0^inf e^{-x^2} x^2 / (x^2 + zeta^2) dx.

    Equals F0(zeta) for Re zeta < 0 and F0(zeta) - 2 zeta e^{zeta^2} for Re zeta > 0.
    """
    with mp.workprec(resolve_bits(bits or SCALING_BITS)):
        zeta = to_mpc(zeta)
        if zeta.real == 0:
            raise DomainError("the integral representation is singular for Re zeta = 0")
        z2 = zeta ** 2
        integral = mpmath.quad(lambda x: mpmath.exp(-x ** 2) * x ** 2 / (x ** 2 + z2), [0, 1, mpmath.inf])
        return 2 * integral / mp.pi


def asymptotic_zero_seed(n: int, bits: Optional[int] = None) -> mpc:
    """lambda - L/(4 lambda) + i(lambda + L/(4 lambda)), lambda = sqrt(pi(n + 1/8)), L = log(8 sqrt(2 pi) lambda^3)."""
    if n < 1:
        raise DomainError(f"zero index must be >= 1, got {n}")
    with mp.workprec(resolve_bits(bits or SCALING_BITS)):
        lam = mpmath.sqrt(mp.pi * (n + mpf(1) / 8))
        shift = mpmath.log(8 * mpmath.sqrt(2 * mp.pi) * lam ** 3) / (4 * lam)
        return mpc(lam - shift, lam + shift)


def newton_f0(seed: Number, index: int = 0, bits: Optional[int] = None) -> mpc:
    """Damped Newton on F0: the step is halved while the residual grows."""
    bits = resolve_bits(bits or SCALING_BITS)
    with mp.workprec(bits):
        zeta = to_mpc(seed)
        tol = mpf(2) ** (-(bits // 2))
        value = f0(zeta)
        for step in range(1, NEWTON_STEPS + 1):
            delta = value / f0_prime(zeta)
            candidate = zeta - delta
            new_value = f0(candidate)
            damping = 0
            while abs(new_value) > abs(value) and damping < 30:
                delta /= 2
                candidate = zeta - delta
                new_value = f0(candidate)
                damping += 1
            zeta, value = candidate, new_value
            if abs(delta) < tol:
                logger.debug(f"F0 zero {index}: converged after {step} steps")
                return zeta
        raise ConvergenceError(f"Newton on F0 diverged for zero n={index} from seed {mpmath.nstr(to_mpc(seed), 8)}",
                               achieved=float(abs(delta)))


@lru_cache(maxsize=64)
def f0_zero(n: int, bits: int = SCALING_BITS) -> mpc:
    """The n-th zero of F0 in the first quadrant, ordered by modulus."""
    return newton_f0(asymptotic_zero_seed(n, bits), index=n, bits=bits)


def _f0_evaluator(zeta: complex) -> Tuple[mpc, mpc]:
    return f0(zeta, bits=64), f0_prime(zeta, bits=64)


def f0_zeros(n_max: int, certify: bool = True, sweep: bool = True, bits: int = SCALING_BITS) -> List[ScalingZero]:
    """First n_max zeros of F0 with positive imaginary part, certified one by one.

    The sweep counts all zeros of the rectangle (0, Re seed(n_max) + 1) x (0, Im seed(n_max) + 1)
    and checks the count against the zeros located by seeded Newton.
    """
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}")
    logger.info(f"Computing {n_max} zeros of F0")
    result: List[ScalingZero] = []
    for n in range(1, n_max + 1):
        seed = asymptotic_zero_seed(n, bits)
        zeta = f0_zero(n, bits)
        with mp.workprec(bits):
            residual = float(abs(f0(zeta, bits)))
        certified = False
        if certify:
            certified = count_zeros_in_disk(_f0_evaluator, complex(zeta), CERTIFY_RADIUS, CERTIFY_POINTS) == 1
            if not certified:
                logger.warning(f"F0 zero {n} at {mpmath.nstr(zeta, 8)} failed disk certification")
        result.append(ScalingZero(index=n, zeta=zeta, seed=seed, certified=certified, residual=residual))
    if sweep:
        _sweep_certify(result, bits)
    return result


def _sweep_certify(found: List[ScalingZero], bits: int) -> None:
    corner = mpc(found[-1].seed)
    x1 = float(corner.real) + SWEEP_MARGIN
    y1 = float(corner.imag) + SWEEP_MARGIN
    known = [complex(mpc(z.zeta)) for z in found]
    n = len(found)
    while True:
        n += 1
        seed = complex(asymptotic_zero_seed(n, bits))
        if seed.real > x1 + SEED_OVERSHOOT or seed.imag > y1 + SEED_OVERSHOOT:
            break
        known.append(complex(f0_zero(n, bits)))
    inside = sum(1 for z in known if 0 < z.real < x1 and 0 < z.imag < y1)
    counted = count_zeros_in_rectangle(lambda z: f0(z, bits=64), 0.0, x1, 0.0, y1)
    logger.info(f"F0 sweep over (0,{x1:.3f})x(0,{y1:.3f}): {counted} zeros counted, {inside} located")
    if counted != inside:
        raise NumericalError(f"F0 sweep counted {counted} zeros but {inside} were located by Newton")


def zero_expansion(j: int, bits: int = SCALING_BITS) -> Tuple[mpc, mpc, mpc]:
    """(z0, z1, z2) with z0 = zeta_j, z1 = z0^2/2, z2 = (sqrt(pi)/24) z0 (12 z0^4 + 2 z0^2 - 3)."""
    z0 = f0_zero(j, bits)
    with mp.workprec(bits):
        z1 = z0 ** 2 / 2
        z2 = mpmath.sqrt(mp.pi) / 24 * z0 * (12 * z0 ** 4 + 2 * z0 ** 2 - 3)
        return z0, z1, z2


def expansion_prediction(j: int, N: int, bits: int = SCALING_BITS) -> mpc:
    """z0/sqrt(N) + z1/N + z2/N^{3/2}, the predicted j-th closest zero of Z_N."""
    z0, z1, z2 = zero_expansion(j, bits)
    with mp.workprec(bits):
        root = mpmath.sqrt(N)
        return z0 / root + z1 / N + z2 / root ** 3


def _scaled_value(source: Union[RenewalTable, InterArrivalLaw], N: int, zeta: mpc,
                  derivative: bool = False) -> complex:
    h = zeta / mpmath.sqrt(N)
    if isinstance(source, RenewalTable):
        value = partition_derivative(source, N, h) if derivative else partition_value(source, N, h)
        return complex(value)
    Z, D = partition_by_renewal(source, N, h, with_derivative=derivative, dtype="float64")
    return complex(D if derivative else Z)


def scaling_limit_check(source: Union[RenewalTable, InterArrivalLaw], N: int,
                        zeta_grid: Sequence[Number]) -> Dict[str, Any]:
    """max over the grid of |sqrt(N) Z_{N, zeta/sqrt(N)} - F0(zeta)|, with the F1 budget."""
    law = source.law if isinstance(source, RenewalTable) else source
    if law.kind != "special" or abs(law.alpha - 0.5) > 1e-15:
        raise DomainError("the scaling limit F0 is available for the alpha = 1/2 special family only")
    rows = []
    with mp.workprec(SCALING_BITS):
        for zeta in zeta_grid:
            zeta = to_mpc(zeta)
            scaled = mpmath.sqrt(N) * _scaled_value(source, N, zeta)
            limit = complex(f0(zeta))
            correction = complex(f1_f2_values(zeta)[0])
            rows.append({
                "zeta_re": float(zeta.real),
                "zeta_im": float(zeta.imag),
                "scaled": [float(mpc(scaled).real), float(mpc(scaled).imag)],
                "f0": [limit.real, limit.imag],
                "deviation": abs(complex(scaled) - limit),
                "f1_abs": abs(correction),
            })
    deviation = max(r["deviation"] for r in rows)
    budget = max(r["f1_abs"] for r in rows) / mpmath.sqrt(N)
    logger.info(f"Scaling check N={N}: max deviation {deviation:.3e}, first-correction size {float(budget):.3e}")
    return {"N": N, "max_deviation": deviation, "f1_budget": float(budget), "points": rows}


def scaling_derivative_check(source: Union[RenewalTable, InterArrivalLaw], N: int, zeta: Number) -> float:
    """|Z'_{N, zeta/sqrt(N)} - F0'(zeta)|."""
    with mp.workprec(SCALING_BITS):
        zeta = to_mpc(zeta)
        return abs(_scaled_value(source, N, zeta, derivative=True) - complex(f0_prime(zeta)))


def first_correction(source: Union[RenewalTable, InterArrivalLaw], N: int, zeta: Number) -> Tuple[complex, complex]:
    """(sqrt(N)(sqrt(N) Z_{N, zeta/sqrt(N)} - F0(zeta)), F1(zeta)); the first tends to the second."""
    with mp.workprec(SCALING_BITS):
        zeta = to_mpc(zeta)
        root = float(mpmath.sqrt(N))
        measured = root * (root * _scaled_value(source, N, zeta) - complex(f0(zeta)))
        return measured, complex(f1_f2_values(zeta)[0])


def first_zeros_table(n_max: int = 7) -> List[Dict[str, Any]]:
    """Rows n, re, im, seed_re, seed_im, gap for the first n_max zeros of F0."""
    return [{k: v for k, v in z.to_dict().items() if k != "certified"} for z in f0_zeros(n_max)]
