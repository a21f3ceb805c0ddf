"""Zeros of the partition polynomial.

All N-1 non-trivial zeros come from an Ehrlich-Aberth iteration on P_N(w)/w in
w-coordinates (double-precision warm start, then multiprecision polish), and are
mapped to the cylinder by h = Log w. Single zeros can be refined by Newton on
Z_{N,h}; zero counts inside disks and rectangles come from the argument principle.
"""
import cmath
import logging
import math
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
from mpmath import mp, mpc, mpf
from scipy import stats
from scipy.optimize import minimize_scalar

from app.models.state import (
    CurveModel,
    EmpiricalMeasure,
    InterArrivalLaw,
    PartitionPolynomial,
    PrecisionPolicy,
    RenewalTable,
    ZeroSet,
)
from app.pinning import critcurve
from app.pinning.partition import partition_by_renewal, partition_derivative, partition_value, polynomial_value
from app.utils.errors import ContourError, ConvergenceError, DomainError
from app.utils.numerics import Number, principal_log, resolve_bits, to_mpc

logger = logging.getLogger(__name__)

ABERTH_FLOAT_ITERATIONS = 300
ABERTH_MP_ITERATIONS = 100
NEWTON_MAX_STEPS = 200
CONTOUR_POINTS = 4096
CONTOUR_MAX_DOUBLINGS = 5
CONTOUR_FLOOR = 1e-12
INTEGER_SLACK = 0.1
ARG_STEP_LIMIT = 0.3
# Starting angle offset on each Newton-polygon circle.
INITIAL_ROTATION = 0.7

Evaluator = Callable[[complex], Tuple[Any, Any]]


def _newton_polygon_guesses(coeffs: Sequence[Any]) -> np.ndarray:
    """Starting points on circles whose radii come from the upper hull of log|a_k|."""
    n = len(coeffs) - 1
    logs = [float(mpmath.log(abs(c))) if c != 0 else -math.inf for c in coeffs]
    hull: List[int] = []
    for k in range(n + 1):
        if logs[k] == -math.inf:
            continue
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            # drop j when it lies on or below the chord from i to k
            if (logs[j] - logs[i]) * (k - i) <= (logs[k] - logs[i]) * (j - i):
                hull.pop()
            else:
                break
        hull.append(k)
    guesses: List[complex] = []
    for i, j in zip(hull, hull[1:]):
        count = j - i
        radius = math.exp((logs[i] - logs[j]) / count)
        for m in range(count):
            angle = 2 * math.pi * m / count + 2 * math.pi * i / n + INITIAL_ROTATION
            guesses.append(radius * cmath.exp(1j * angle))
    return np.array(guesses, dtype=np.complex128)


def _ratio_float(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    """p(z)/p'(z) for the ascending coefficient array, Horner in z or in 1/z."""
    n = len(coeffs) - 1
    inside = np.abs(z) <= 1
    ratio = np.empty_like(z)
    if inside.any():
        zi = z[inside]
        p = np.full_like(zi, coeffs[-1])
        dp = np.zeros_like(zi)
        for a in coeffs[-2::-1]:
            dp = dp * zi + p
            p = p * zi + a
        ratio[inside] = p / dp
    if (~inside).any():
        zo = z[~inside]
        u = 1 / zo
        q = np.full_like(zo, coeffs[0])
        dq = np.zeros_like(zo)
        for a in coeffs[1:]:
            dq = dq * u + q
            q = q * u + a
        ratio[~inside] = zo * q / (n * q - u * dq)
    return ratio


def _ratio_mp(coeffs: Sequence[Any], z: mpc) -> mpc:
    n = len(coeffs) - 1
    if abs(z) <= 1:
        p = mpc(coeffs[-1])
        dp = mpc(0)
        for a in coeffs[-2::-1]:
            dp = dp * z + p
            p = p * z + a
        return p / dp
    u = 1 / z
    q = mpc(coeffs[0])
    dq = mpc(0)
    for a in coeffs[1:]:
        dq = dq * u + q
        q = q * u + a
    return z * q / (n * q - u * dq)


def _relative_residual(coeffs: Sequence[Any], z: mpc) -> mpf:
    """|p(z)| / sum_k |a_k| |z|^k, evaluated so that no power of z overflows."""
    r = abs(z)
    if r <= 1:
        p = mpc(0)
        s = mpf(0)
        for a in reversed(coeffs):
            p = p * z + a
            s = s * r + abs(a)
        return abs(p) / s
    u = 1 / z
    ru = 1 / r
    q = mpc(0)
    s = mpf(0)
    for a in coeffs:
        q = q * u + a
        s = s * ru + abs(a)
    return abs(q) / s


def _aberth_float(coeffs: Sequence[Any], guesses: np.ndarray) -> np.ndarray:
    scale = max(abs(c) for c in coeffs)
    with np.errstate(all="ignore"):
        arr = np.array([complex(c / scale) for c in coeffs], dtype=np.complex128)
        if np.any(arr == 0):
            logger.debug("coefficients underflow double precision; skipping warm start")
            return guesses
        roots = guesses.copy()
        for iteration in range(ABERTH_FLOAT_ITERATIONS):
            ratio = _ratio_float(arr, roots)
            diff = roots[:, None] - roots[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            correction = ratio / (1.0 - ratio * inv.sum(axis=1))
            if not np.all(np.isfinite(correction)):
                logger.debug(f"double-precision Aberth hit a non-finite step at iteration {iteration}")
                return guesses
            roots = roots - correction
            if np.max(np.abs(correction) / np.maximum(np.abs(roots), 1e-300)) < 1e-13:
                logger.debug(f"double-precision Aberth settled after {iteration + 1} iterations")
                break
    return roots


def _separate_duplicates(roots: List[mpc]) -> List[mpc]:
    """Nudge coincident starting points apart; Aberth cannot move exact duplicates."""
    seen = set()
    out = []
    for k, z in enumerate(roots):
        key = (float(z.real), float(z.imag))
        if key in seen:
            z = z * (1 + mpf(2) ** (-20) * mpmath.expj(k))
        seen.add((float(z.real), float(z.imag)))
        out.append(z)
    return out


def _aberth_mp(coeffs: Sequence[Any], roots: List[mpc]) -> Tuple[List[mpc], bool, int]:
    threshold = mpf(2) ** (-(mp.prec // 2))
    n = len(roots)
    for iteration in range(1, ABERTH_MP_ITERATIONS + 1):
        corrections = []
        for i in range(n):
            zi = roots[i]
            ratio = _ratio_mp(coeffs, zi)
            s = mpmath.fsum(1 / (zi - roots[j]) for j in range(n) if j != i)
            corrections.append(ratio / (1 - ratio * s))
        roots = [z - c for z, c in zip(roots, corrections)]
        worst = max(abs(c) / max(abs(z), threshold) for z, c in zip(roots, corrections))
        logger.debug(f"Aberth iteration {iteration}: max relative correction {mpmath.nstr(worst, 3)}")
        if worst < threshold:
            return roots, True, iteration
    return roots, False, ABERTH_MP_ITERATIONS


def _pair_conjugates(roots: List[mpc], radii: List[mpf]) -> Tuple[List[mpc], List[str]]:
    """Make the root multiset exactly conjugation-closed."""
    flags: List[str] = []
    upper, lower, real = [], [], []
    slack = mpf(2) ** (-(mp.prec // 2))
    for z, r in zip(roots, radii):
        if abs(z.imag) <= max(r, slack * abs(z)):
            real.append(mpc(z.real, 0))
        elif z.imag > 0:
            upper.append((z, r))
        else:
            lower.append((z, r))
    paired: List[mpc] = list(real)
    remaining = list(lower)
    for z, r in upper:
        if not remaining:
            flags.append(f"unpaired:{mpmath.nstr(z, 10)}")
            paired.append(z)
            continue
        best = min(range(len(remaining)), key=lambda k: abs(remaining[k][0] - mpmath.conj(z)))
        partner, pr = remaining.pop(best)
        if abs(partner - mpmath.conj(z)) > 2 * max(r, pr):
            flags.append(f"loose-pair:{mpmath.nstr(z, 10)}")
        paired.extend([z, mpmath.conj(z)])
    for z, _ in remaining:
        flags.append(f"unpaired:{mpmath.nstr(z, 10)}")
        paired.append(z)
    return paired, flags


def _ordering_key(h: mpc) -> Tuple[float, float, int]:
    upper = mpc(h.real, abs(h.imag))
    return float(abs(upper)), float(mpmath.arg(upper)), 0 if h.imag >= 0 else 1


def find_all_zeros(poly: PartitionPolynomial, policy: Optional[PrecisionPolicy] = None) -> ZeroSet:
    """All N-1 zeros of h -> Z_{N,h} in the cylinder, with residual certificates."""
    N = poly.N
    if N < 2:
        raise DomainError(f"zero finding needs degree >= 2, got N={N}")
    policy = policy or PrecisionPolicy()
    bits = max(policy.bits_for(N), poly.precision_bits)
    logger.info(f"Finding {N - 1} zeros: law={poly.law.kind}, alpha={poly.law.alpha}, N={N}, bits={bits}")
    with mp.workprec(bits):
        coeffs = [mpf(c) for c in poly.coeffs]
        if N == 2:
            roots = [mpc(-coeffs[0] / coeffs[1])]
            converged, iterations = True, 0
        else:
            guesses = _newton_polygon_guesses(coeffs)
            warm = _aberth_float(coeffs, guesses)
            start = _separate_duplicates([mpc(complex(z)) for z in warm])
            roots, converged, iterations = _aberth_mp(coeffs, start)
        degree = len(coeffs) - 1
        radii = [degree * abs(_ratio_mp(coeffs, z)) if degree else mpf(0) for z in roots]
        flags: List[str] = []
        if not converged:
            flags.append("unconverged")
            logger.warning(f"Aberth did not converge for N={N} within {ABERTH_MP_ITERATIONS} iterations")
        for i in range(len(roots)):
            for j in range(i + 1, len(roots)):
                if abs(roots[i] - roots[j]) <= max(radii[i], radii[j]):
                    flags.append(f"duplicate:{i},{j}")
        roots, pair_flags = _pair_conjugates(roots, radii)
        flags.extend(pair_flags)
        zeros = [principal_log(w) for w in roots]
        order = sorted(range(len(zeros)), key=lambda k: _ordering_key(zeros[k]))
        zeros = [zeros[k] for k in order]
        roots = [roots[k] for k in order]
        residuals = [float(_relative_residual(coeffs, w)) for w in roots]
        radii = [float(degree * abs(_ratio_mp(coeffs, w))) for w in roots]
    if flags:
        logger.warning(f"zero set N={N} carries flags: {flags[:5]}")
    logger.info(f"N={N}: {len(zeros)} zeros, max residual {max(residuals):.3e}, {iterations} iterations")
    return ZeroSet(N=N, law=poly.law, precision_bits=bits, zeros=zeros, residuals=residuals,
                   radii=radii, converged=converged, iterations=iterations, flags=flags)


def _law_evaluator(law: InterArrivalLaw, N: int, bits: int) -> Callable[[mpc], Tuple[mpc, mpc]]:
    def evaluate(h):
        return partition_by_renewal(law, N, h, with_derivative=True, bits=bits)
    return evaluate


def refine_zero_newton(source: Union[RenewalTable, InterArrivalLaw], N: int, seed: Number,
                       tol: Optional[Number] = None, bits: Optional[int] = None) -> mpc:
    """Newton on h -> Z_{N,h} from seed until |step| < tol.

    source is a renewal table (O(N) per step) or a law (renewal equation, O(N^2) per step).
    """
    if isinstance(source, RenewalTable):
        bits = bits or source.precision_bits

        def evaluate(h):
            return partition_value(source, N, h), partition_derivative(source, N, h)
    else:
        bits = resolve_bits(bits or 128)
        evaluate = _law_evaluator(source, N, bits)
    with mp.workprec(bits):
        h = to_mpc(seed)
        tol = mpf(tol) if tol is not None else mpf(2) ** (-(bits // 2))
        for step in range(1, NEWTON_MAX_STEPS + 1):
            value, derivative = evaluate(h)
            if derivative == 0:
                raise ConvergenceError(f"Newton hit a critical point at h={mpmath.nstr(h, 10)}")
            delta = value / derivative
            h -= delta
            logger.debug(f"Newton N={N} step {step}: |delta| = {mpmath.nstr(abs(delta), 3)}")
            if abs(delta) < tol:
                value, _ = evaluate(h)
                logger.info(f"Refined zero N={N}: h={mpmath.nstr(h, 12)} after {step} steps, |Z|={mpmath.nstr(abs(value), 3)}")
                return h
        raise ConvergenceError(f"Newton on Z_{N} did not converge from seed {seed}", achieved=float(abs(delta)))


def _winding(evaluator: Evaluator, center: complex, radius: float, points: int) -> Tuple[float, float, float]:
    total = 0j
    moduli = []
    for m in range(points):
        phase = cmath.exp(2j * math.pi * m / points)
        value, derivative = evaluator(center + radius * phase)
        value, derivative = complex(value), complex(derivative)
        moduli.append(abs(value))
        total += derivative / value * radius * phase
    return (total / points).real, min(moduli), max(moduli)


def count_zeros_in_disk(evaluator: Evaluator, center: Number, radius: float,
                        quadrature_points: int = CONTOUR_POINTS) -> int:
    """Number of zeros of f inside |h - center| < radius, from the trapezoid rule for f'/f.

    evaluator(h) returns (f(h), f'(h)). Points double until two estimates agree.
    """
    center = complex(center)
    previous, low, high = _winding(evaluator, center, radius, quadrature_points)
    if low < CONTOUR_FLOOR * high:
        raise ContourError(f"contour |h-{center}|={radius} passes near a zero (min |f| = {low:.3e})", min_modulus=low)
    points = quadrature_points
    for _ in range(CONTOUR_MAX_DOUBLINGS):
        points *= 2
        current, low, high = _winding(evaluator, center, radius, points)
        if abs(current - previous) < 1e-6:
            break
        logger.debug(f"winding {current:.6f} vs {previous:.6f} at {points} points; doubling")
        previous = current
    count = round(current)
    if abs(current - count) > INTEGER_SLACK:
        raise ContourError(f"winding number {current:.4f} is not close to an integer", min_modulus=low)
    return int(count)


def _edge_increment(f: Callable[[complex], complex], a: complex, b: complex, fa: complex, fb: complex,
                    floor: List[float], depth: int = 0) -> float:
    mid = (a + b) / 2
    fm = complex(f(mid))
    floor.append(abs(fm))
    first = cmath.phase(fm / fa)
    second = cmath.phase(fb / fm)
    if depth >= 40 or (abs(first) < ARG_STEP_LIMIT and abs(second) < ARG_STEP_LIMIT):
        return first + second
    return (_edge_increment(f, a, mid, fa, fm, floor, depth + 1)
            + _edge_increment(f, mid, b, fm, fb, floor, depth + 1))


def count_zeros_in_rectangle(f: Callable[[complex], Any], x0: float, x1: float, y0: float, y1: float,
                             step: float = 0.05) -> int:
    """Winding number of f around the rectangle [x0,x1] x [y0,y1], by tracking arg f."""
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    moduli: List[float] = []
    total = 0.0
    for a, b in zip(corners, corners[1:] + corners[:1]):
        pieces = max(1, math.ceil(abs(b - a) / step))
        nodes = [a + (b - a) * m / pieces for m in range(pieces + 1)]
        values = [complex(f(z)) for z in nodes]
        moduli.extend(abs(v) for v in values)
        for k in range(pieces):
            total += _edge_increment(f, nodes[k], nodes[k + 1], values[k], values[k + 1], moduli)
    # the median, not the max: F0 spans many orders of magnitude along a long boundary
    low, typical = min(moduli), float(np.median(moduli))
    if low < CONTOUR_FLOOR * typical:
        raise ContourError(f"rectangle boundary passes near a zero (min |f| = {low:.3e})", min_modulus=low)
    winding = total / (2 * math.pi)
    count = round(winding)
    if abs(winding - count) > INTEGER_SLACK:
        raise ContourError(f"rectangle winding {winding:.4f} is not close to an integer", min_modulus=low)
    return int(count)


def empirical_measure(zs: ZeroSet) -> EmpiricalMeasure:
    return EmpiricalMeasure(atoms=zs.as_complex())


def _cylinder_distance(z: complex, points: np.ndarray) -> np.ndarray:
    shifts = np.array([-2j * math.pi, 0, 2j * math.pi])
    return np.min(np.abs(z - points[:, None] + shifts[None, :]), axis=1)


def _curve_point_float(alpha: float, theta: float) -> complex:
    return complex(critcurve.curve_array(alpha, [theta])[0])


def project_to_curve(z: complex, curve: CurveModel) -> Tuple[float, float]:
    """(cylinder distance, theta) of the point of the curve closest to z."""
    points = np.array(curve.points, dtype=np.complex128)
    thetas = np.array(curve.thetas)
    step = 2 * math.pi / curve.resolution
    coarse = _cylinder_distance(z, points)
    k = int(np.argmin(coarse))
    lo = max(0.0, thetas[k] - step)
    hi = min(2 * math.pi, thetas[k] + step)
    result = minimize_scalar(
        lambda t: float(_cylinder_distance(z, np.array([_curve_point_float(curve.alpha, t)]))[0]),
        bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    if result.fun < coarse[k]:
        return float(result.fun), float(result.x)
    return float(coarse[k]), float(thetas[k])


def _check_alpha(zs: ZeroSet, curve: CurveModel) -> None:
    if abs(curve.alpha - zs.law.alpha) > 1e-12:
        raise DomainError(f"curve alpha {curve.alpha} does not match zero set alpha {zs.law.alpha}")


def distance_stats(zs: ZeroSet, curve: CurveModel) -> Dict[str, Any]:
    """Cylinder distance from each zero to the curve, refined around the nearest sample."""
    _check_alpha(zs, curve)
    distances: List[float] = []
    delocalized = 0
    for z in zs.as_complex():
        distances.append(project_to_curve(z, curve)[0])
        if critcurve.classify(curve.alpha, z).kind == "Delocalized":
            delocalized += 1
    count = max(len(distances), 1)
    return {
        "N": zs.N,
        "max": max(distances) if distances else 0.0,
        "mean": sum(distances) / count,
        "distances": distances,
        "delocalized_fraction": delocalized / count,
    }


def angle_uniformity_ks(zs: ZeroSet, curve: CurveModel) -> float:
    """KS distance between theta/pi of the upper-half zeros (projected on the curve) and U[0,1].

    The limit zero measure is uniform in theta, so this is the KS distance of the
    empirical arclength CDF against the limit one.
    """
    _check_alpha(zs, curve)
    fractions = []
    for z in zs.as_complex():
        if z.imag < 0:
            continue
        theta = project_to_curve(z, curve)[1]
        upper = theta if theta <= math.pi else 2 * math.pi - theta
        fractions.append(upper / math.pi)
    return float(stats.kstest(fractions, "uniform").statistic)


def zero_free_region(zs: ZeroSet) -> Dict[str, float]:
    """Extent of the zero set: no zero has Re h outside [min_re, max_re]."""
    zeros = zs.as_complex()
    return {
        "min_re": min(z.real for z in zeros),
        "max_re": max(z.real for z in zeros),
        "min_abs_im": min(abs(z.imag) for z in zeros),
    }


def zeros_in_w(zs: ZeroSet) -> List[complex]:
    return [cmath.exp(z) for z in zs.as_complex()]


def product_identity_gap(poly: PartitionPolynomial, zs: ZeroSet, h: Number) -> mpf:
    """Relative gap in log|Z_{N,h}| = N log K(1) + Re h + sum_j log|e^h - e^{h_j}|."""
    with mp.workprec(zs.precision_bits):
        h = to_mpc(h)
        lhs = mpmath.log(abs(polynomial_value(poly, h)))
        eh = mpmath.exp(h)
        # leading coefficient is K(1)^N
        rhs = mpmath.log(mpf(poly.coeffs[-1])) + h.real + mpmath.fsum(mpmath.log(abs(eh - mpmath.exp(z))) for z in zs.zeros)
        return abs(lhs - rhs) / max(abs(lhs), mpf(1))


def certify_expansion(law: InterArrivalLaw, N: int, j: int = 1, radius_factor: float = 1.0) -> int:
    """Argument-principle count around the expansion prediction of the j-th closest zero.

    The disk has radius radius_factor / N^2 and should hold exactly one zero.
    """
    from app.pinning.scaling import expansion_prediction

    center = complex(expansion_prediction(j, N))

    def evaluate(h):
        return partition_by_renewal(law, N, h, with_derivative=True, dtype="float64")

    count = count_zeros_in_disk(evaluate, center, radius_factor / N ** 2)
    logger.info(f"Expansion certificate N={N}, j={j}: {count} zero(s) in the disk")
    return count
