"""Critical curve C_alpha of the special family, the L_alpha / D_alpha split of the
cylinder, the free energy and the limit density of the zeros.

The curve is h(theta) = -Log(1 - (1 - e^{-i theta})^alpha), theta in [0, 2 pi);
its upper half (theta in [0, pi]) runs from the origin to -log(2^alpha - 1) + i pi.
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
from mpmath import mp, mpc, mpf
from scipy.optimize import brentq

from app.models.state import CurveModel, InterArrivalLaw, RegionLabel, ZeroSet
from app.utils.errors import DomainError
from app.utils.numerics import Number, complex_pow, principal_log, resolve_bits, to_mpc

logger = logging.getLogger(__name__)

CRITICAL_TOLERANCE = 1e-9
JUMP_OFFSET = 1e-4


def _wrap_imag(h: mpc) -> mpc:
    """Bring Im h into (-pi, pi]."""
    y = h.imag
    two_pi = 2 * mp.pi
    y = y - two_pi * mpmath.floor((y + mp.pi) / two_pi)
    if y <= -mp.pi:
        y += two_pi
    return mpc(h.real, y)


def curve_point(alpha: Number, theta: Number, bits: Optional[int] = None) -> mpc:
    """h(theta) = -Log(1 - (1 - e^{-i theta})^alpha)."""
    with mp.workprec(resolve_bits(bits)):
        theta = mpf(theta)
        if theta == 0:
            return mpc(0)
        u = 1 - mpmath.expj(-theta)
        return _wrap_imag(-principal_log(1 - complex_pow(u, alpha)))


def curve_xy(alpha: Number, theta: Number, bits: Optional[int] = None) -> Tuple[mpf, mpf]:
    """(f1(theta), f2(theta)) for theta in (0, pi], arctan taken in [0, pi]."""
    with mp.workprec(resolve_bits(bits)):
        alpha = mpf(alpha)
        theta = mpf(theta)
        if theta < 0 or theta > mp.pi:
            raise DomainError(f"curve_xy needs theta in (0, pi], got {theta}")
        if theta == 0:
            logger.warning("curve_xy at theta=0: returning the limit point (0, 0)")
            return mpf(0), mpf(0)
        radius = (2 * mpmath.sin(theta / 2)) ** alpha
        phi = alpha * (mp.pi - theta) / 2
        real = 1 - radius * mpmath.cos(phi)
        imag = radius * mpmath.sin(phi)
        f1 = -mpmath.log(real ** 2 + imag ** 2) / 2
        f2 = mpmath.atan2(imag, real)
        return f1, f2


def _curve_xy_float(alpha: float, theta: float) -> Tuple[float, float]:
    if theta <= 0:
        return 0.0, 0.0
    radius = (2 * math.sin(theta / 2)) ** alpha
    phi = alpha * (math.pi - theta) / 2
    real = 1 - radius * math.cos(phi)
    imag = radius * math.sin(phi)
    return -0.5 * math.log(real * real + imag * imag), math.atan2(imag, real)


def curve_derivative(alpha: Number, theta: Number, bits: Optional[int] = None) -> mpc:
    """dh/dtheta = alpha u^{alpha-1} i e^{-i theta} / (1 - u^alpha), u = 1 - e^{-i theta}."""
    with mp.workprec(resolve_bits(bits)):
        alpha = mpf(alpha)
        theta = mpf(theta)
        if theta == 0:
            raise DomainError("the curve is not differentiable at theta=0")
        u = 1 - mpmath.expj(-theta)
        u_alpha = complex_pow(u, alpha)
        return alpha * u_alpha / u * mpc(0, 1) * mpmath.expj(-theta) / (1 - u_alpha)


def crossing_angle(alpha: float, height: float) -> float:
    """theta* in [0, pi] with f2(theta*) = height (f2 increases from 0 to pi)."""
    if height <= 0:
        return 0.0
    if height >= math.pi:
        return math.pi
    return brentq(lambda t: _curve_xy_float(alpha, t)[1] - height, 0.0, math.pi, xtol=1e-15)


def classify(alpha: Number, h: Number, tol: float = CRITICAL_TOLERANCE) -> RegionLabel:
    """Localized, Delocalized or Critical, by inverting f2 along the upper half-curve."""
    alpha = float(alpha)
    with mp.workprec(64):
        h = _wrap_imag(to_mpc(h))
    x = float(h.real)
    if x <= 0:
        return RegionLabel(kind="Delocalized", gap=x)
    theta = crossing_angle(alpha, abs(float(h.imag)))
    edge = _curve_xy_float(alpha, theta)[0]
    gap = x - edge
    if gap > tol:
        return RegionLabel(kind="Localized", gap=gap)
    if gap < -tol:
        return RegionLabel(kind="Delocalized", gap=gap)
    return RegionLabel(kind="Critical", tolerance=tol, gap=gap)


def classify_algebraic(alpha: Number, h: Number, bits: Optional[int] = None) -> RegionLabel:
    """Localized iff |z_{alpha,h}| < 1 and |Arg(1 - e^{-h})| < alpha pi."""
    with mp.workprec(resolve_bits(bits)):
        alpha = mpf(alpha)
        h = to_mpc(h)
        if h == 0:
            return RegionLabel(kind="Critical", tolerance=0.0)
        u = 1 - mpmath.exp(-h)
        if u == 0:
            return RegionLabel(kind="Delocalized")
        z = 1 - complex_pow(u, 1 / alpha)
        inside = abs(z) < 1 and abs(principal_log(u).imag) < alpha * mp.pi
        return RegionLabel(kind="Localized" if inside else "Delocalized", gap=float(1 - abs(z)))


def pole_location(alpha: Number, h: Number, bits: Optional[int] = None) -> mpc:
    """z_{alpha,h} = 1 - (1 - e^{-h})^{1/alpha}."""
    with mp.workprec(resolve_bits(bits)):
        h = to_mpc(h)
        if h == 0:
            raise DomainError("h = 0 is the singular point of the critical curve")
        return 1 - complex_pow(1 - mpmath.exp(-h), 1 / mpf(alpha))


def free_energy(alpha: Number, h: Number, bits: Optional[int] = None) -> mpc:
    """Analytic free energy -Log z_{alpha,h} on C minus (-inf, 0]."""
    with mp.workprec(resolve_bits(bits)):
        h = to_mpc(h)
        if h.imag == 0 and h.real <= 0:
            raise DomainError(f"free energy continuation is cut along (-inf, 0], got h={h.real}")
        return -principal_log(pole_location(alpha, h))


def physical_free_energy(alpha: Number, h: Number, bits: Optional[int] = None) -> mpf:
    """lim (1/N) log|Z_{N,h}|: Re F on L_alpha, 0 on D_alpha and C_alpha."""
    if classify(alpha, h).kind != "Localized":
        return mpf(0)
    with mp.workprec(resolve_bits(bits)):
        return free_energy(alpha, h).real


def free_energy_general(law: InterArrivalLaw, h: Number, n_max: int = 4096,
                        with_bound: bool = False, bits: Optional[int] = None) -> Union[mpf, Tuple[mpf, mpf]]:
    """Solve sum_n K(n) e^{-nF} = e^{-h} for real h > 0 on the law truncated at n_max.

    The bound returned with with_bound=True covers the discarded tail.
    """
    from app.pinning.renewal import k_values

    with mp.workprec(resolve_bits(bits)):
        h = mpf(h)
        if h <= 0:
            return (mpf(0), mpf(0)) if with_bound else mpf(0)
        K = k_values(law, n_max)
        deficit = max(1 - mpmath.fsum(K), mpf(0))
        target = mpmath.exp(-h)

        def gap(F):
            return mpmath.fsum(k * mpmath.exp(-n * F) for n, k in enumerate(K, start=1)) - target

        low = max(mpf(0), h + mpmath.log(K[0]))
        value = mpmath.findroot(gap, (low, h), solver="illinois")
        slope = mpmath.fsum(n * k * mpmath.exp(-n * value) for n, k in enumerate(K, start=1))
        bound = deficit * mpmath.exp(-n_max * value) / slope
        logger.debug(f"free_energy_general h={mpmath.nstr(h, 8)}: F={mpmath.nstr(value, 12)}, tail bound {mpmath.nstr(bound, 3)}")
        return (value, bound) if with_bound else value


def arclength(alpha: Number, theta: Number, bits: Optional[int] = None) -> mpf:
    """Arclength of the curve from the origin to h(theta), theta in [0, pi]."""
    with mp.workprec(resolve_bits(bits)):
        theta = mpf(theta)
        if theta < 0 or theta > mp.pi:
            raise DomainError(f"arclength needs theta in [0, pi], got {theta}")
        if theta == 0:
            return mpf(0)
        return mpmath.quad(lambda t: abs(curve_derivative(alpha, t)), [0, theta])


def total_length(alpha: Number, bits: Optional[int] = None) -> mpf:
    """Length of the full closed curve (twice the upper half)."""
    with mp.workprec(resolve_bits(bits)):
        return 2 * arclength(alpha, mp.pi)


def theta_at_arclength(alpha: Number, s: Number, bits: Optional[int] = None) -> mpf:
    """Inverse of arclength on the upper half-curve."""
    with mp.workprec(resolve_bits(bits)):
        s = mpf(s)
        half = arclength(alpha, mp.pi)
        if s < 0 or s > half:
            raise DomainError(f"arclength {s} outside [0, {mpmath.nstr(half, 10)}]")
        if s == 0:
            return mpf(0)
        if s == half:
            return +mp.pi
        low, high = mpf(0), +mp.pi
        for _ in range(mp.prec):
            mid = (low + high) / 2
            if arclength(alpha, mid) < s:
                low = mid
            else:
                high = mid
            if high - low < mpf(2) ** (-mp.prec // 2):
                break
        return (low + high) / 2


def mu_density_theta(alpha: Number, theta: Number, bits: Optional[int] = None) -> mpf:
    """Density of the limit zero measure per unit arclength at h(theta), theta in (0, pi].

    The zeros are uniform in theta, so the conjugate halves each carry mass 1/2
    and the upper half is reported doubled: 1 / (pi |h'(theta)|).
    """
    with mp.workprec(resolve_bits(bits)):
        return 1 / (mp.pi * abs(curve_derivative(alpha, theta)))


def mu_density(alpha: Number, s: Number, bits: Optional[int] = None) -> mpf:
    """Density of the limit zero measure at arclength s along the upper half-curve."""
    with mp.workprec(resolve_bits(bits)):
        theta = theta_at_arclength(alpha, s)
        if theta == 0:
            return mpf(0)
        return mu_density_theta(alpha, theta)


def mu_cdf(alpha: Number, s: Number, bits: Optional[int] = None) -> mpf:
    """Doubled mass of the upper half-curve between the origin and arclength s."""
    with mp.workprec(resolve_bits(bits)):
        return theta_at_arclength(alpha, s) / mp.pi


def mu_density_closed_form(alpha: Number, value: Number, variable: str = "s", bits: Optional[int] = None) -> mpf:
    """Closed forms of the zero density.

    variable "s": sqrt(2)(1 - e^{-2s}) (alpha = 1/2); "x": 8 e^x sinh x / sqrt(6e^{2x} - e^{4x} - 1),
    the density in the real-part coordinate (alpha = 1/2); "small-s": s^{(1-alpha)/alpha} / (alpha cos(alpha pi/2)).
    The "s" and "small-s" forms are not normalized.
    """
    with mp.workprec(resolve_bits(bits)):
        alpha = mpf(alpha)
        value = mpf(value)
        if variable == "small-s":
            return value ** ((1 - alpha) / alpha) / (alpha * mpmath.cos(alpha * mp.pi / 2))
        if alpha != mpf(1) / 2:
            raise DomainError(f"the {variable!r} closed form exists only for alpha = 1/2")
        if variable == "s":
            return mpmath.sqrt(2) * (1 - mpmath.exp(-2 * value))
        if variable == "x":
            if value <= 0 or value >= mpmath.log(1 + mpmath.sqrt(2)):
                raise DomainError(f"x-form density needs 0 < x < log(1 + sqrt 2), got {value}")
            radicand = 6 * mpmath.exp(2 * value) - mpmath.exp(4 * value) - 1
            return 8 * mpmath.exp(value) * mpmath.sinh(value) / mpmath.sqrt(radicand)
        raise DomainError(f"unknown density variable {variable!r}")


def mu_density_jump(alpha: Number, theta: Number, offset: float = JUMP_OFFSET, bits: Optional[int] = None) -> mpf:
    """Density from the jump of the normal derivative of Re F across the curve.

    Re F vanishes on the delocalized side, so the one-sided second-order difference
    (4 f(eps) - f(2 eps)) / (2 eps) into L_alpha gives the jump.
    """
    with mp.workprec(resolve_bits(bits)):
        point = curve_point(alpha, theta)
        tangent = curve_derivative(alpha, theta)
        normal = -mpc(0, 1) * tangent / abs(tangent)
        eps = mpf(offset)
        near = free_energy(alpha, point + eps * normal).real
        far = free_energy(alpha, point + 2 * eps * normal).real
        return (4 * near - far) / (2 * eps) / mp.pi


def free_energy_from_measure(h: Number, zero_set: Optional[ZeroSet] = None, alpha: Number = 0.5,
                             bits: Optional[int] = None) -> mpf:
    """log alpha + integral of log|e^h - e^zeta| against the zero measure.

    With a ZeroSet the empirical atoms are used; otherwise the limit measure,
    uniform in theta along the curve.
    """
    with mp.workprec(resolve_bits(bits)):
        h = to_mpc(h)
        eh = mpmath.exp(h)
        if zero_set is not None:
            atoms = zero_set.zeros
            total = mpmath.fsum(mpmath.log(abs(eh - mpmath.exp(to_mpc(z)))) for z in atoms)
            return mpmath.log(mpf(alpha)) + total / len(atoms)

        def integrand(t):
            return mpmath.log(abs(eh - mpmath.exp(curve_point(alpha, t))))

        integral = mpmath.quad(integrand, [0, mp.pi, 2 * mp.pi])
        return mpmath.log(mpf(alpha)) + integral / (2 * mp.pi)


def tangent_angle(alpha: Number, theta: Number, bits: Optional[int] = None) -> mpf:
    """Arg h(theta); tends to alpha pi / 2 as theta decreases to 0."""
    with mp.workprec(resolve_bits(bits)):
        return mpmath.arg(curve_point(alpha, theta))


def sample_curve(alpha: float, resolution: int = 512) -> CurveModel:
    """Sample theta in [0, 2 pi) uniformly; s is signed (negative on the lower half)."""
    if resolution < 2:
        raise DomainError(f"curve resolution must be at least 2, got {resolution}")
    thetas = [float(t) for t in np.linspace(0.0, 2 * math.pi, resolution, endpoint=False)]
    points: List[complex] = []
    upper_s = {}
    with mp.workprec(64):
        previous_theta = 0.0
        running = mpf(0)
        for t in thetas:
            if t > math.pi:
                break
            if t > 0:
                running += mpmath.quad(lambda u: abs(curve_derivative(alpha, u)), [previous_theta, t])
            upper_s[t] = float(running)
            previous_theta = t
        arclengths: List[float] = []
        for t in thetas:
            h = curve_point(alpha, t)
            points.append(complex(float(h.real), float(h.imag)))
            if t <= math.pi:
                arclengths.append(upper_s[t])
            else:
                arclengths.append(-float(arclength(alpha, 2 * math.pi - t)))
    logger.info(f"Sampled critical curve alpha={alpha} at {resolution} points")
    return CurveModel(alpha=alpha, resolution=resolution, thetas=thetas, points=points, arclengths=arclengths)


def curve_densities(curve: CurveModel) -> List[Optional[float]]:
    """mu density per arclength at each sample (None at the non-smooth point theta=0)."""
    densities: List[Optional[float]] = []
    for t in curve.thetas:
        if t == 0:
            densities.append(None)
            continue
        upper = t if t <= math.pi else 2 * math.pi - t
        densities.append(float(mu_density_theta(curve.alpha, upper, bits=64)))
    return densities


def curve_array(alpha: float, thetas: Sequence[float]) -> np.ndarray:
    """complex128 samples of the curve for vectorised distance computations."""
    t = np.asarray(thetas, dtype=np.float64)
    u = 1 - np.exp(-1j * t)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.log(1 - np.where(t == 0, 0, u ** alpha))
    return np.where(h.imag <= -np.pi, h + 2j * np.pi, h)
