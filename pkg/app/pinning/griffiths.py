"""Taylor coefficients at h = 0 of the reduced disordered free energy

    f(h) = sum_{n >= n0} p^n sum_j log(1 - h / h_{n,j}),

built from stored zero sets, and their predicted large-k behaviour
C1 C2^k e^{A sqrt k} Gamma(alpha k + 1) cos(a k + b sqrt k + c).
"""
import logging
import math
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
from mpmath import mp, mpc, mpf
from scipy import stats

from app.models.state import GriffithsConstants, GriffithsRun, InterArrivalLaw, PrecisionPolicy
from app.pinning.scaling import zero_expansion
from app.utils.errors import DomainError
from app.utils.numerics import Number, polylog_leading, to_mpc

logger = logging.getLogger(__name__)

RATIO_BAND = (0.8, 1.25)
COSINE_CUTOFF = 0.2
EXTRA_BITS = 128


def window_center(alpha: float, p: float, k: int) -> int:
    """n_{p,k} = floor(alpha k / |log p|)."""
    return math.floor(alpha * k / abs(math.log(p)))


def window_half_width(k: int) -> float:
    """l_k = sqrt(k) log k."""
    return math.sqrt(k) * math.log(k) if k > 1 else 1.0


def required_n_max(alpha: float, p: float, k: int) -> int:
    return window_center(alpha, p, k) + math.ceil(window_half_width(k))


def _check_run(run: GriffithsRun, k: int) -> None:
    if k < 1:
        raise DomainError(f"Taylor order must be >= 1, got {k}")
    need = required_n_max(run.alpha, run.p, k)
    if run.n_max < need:
        raise DomainError(f"n_max={run.n_max} too small for k={k}: need at least {need}")


def _on_axis(h: mpc, slack: mpf) -> bool:
    """Im h = 0 or Im h = pi: x + i pi and x - i pi are the same zero on the cylinder."""
    return abs(h.imag - mp.pi) <= slack or abs(h.imag) <= slack


def _zero_sum(zeros: Sequence[mpc], k: int, paired: bool = True) -> mpc:
    """sum_j h_j^{-k} in log-polar form.

    A zero on Im h = pi enters as the half-weighted pair x +- i pi, i.e. by its real part.
    With paired=True each conjugate pair adds 2 Re; with paired=False both members are
    summed as stored, so the imaginary part of the result measures pairing defects.
    """
    total = []
    slack = mpf(2) ** (-(mp.prec // 2))
    for h in zeros:
        axis = _on_axis(h, slack)
        if paired and h.imag < 0 and not axis:
            continue
        log_mod = mpmath.log(abs(h))
        angle = mpmath.arg(h)
        term = mpmath.exp(-k * log_mod) * mpmath.expj(-k * angle)
        if axis:
            total.append(term.real)
        elif not paired:
            total.append(term)
        else:
            total.append(2 * term.real)
    return mpmath.fsum(total)


def _coefficient(run: GriffithsRun, k: int, ns: Sequence[int], select=None, paired: bool = True) -> mpc:
    with mp.workprec(max(run.precision_bits, k + EXTRA_BITS)):
        log_p = mpmath.log(mpf(run.p))
        terms = []
        for n in ns:
            zs = run.zero_store.get(n)
            if zs is None:
                continue
            zeros = zs.zeros if select is None else select(zs)
            terms.append(mpmath.exp(n * log_p) * _zero_sum([to_mpc(z) for z in zeros], k, paired))
        return -mpmath.fsum(terms) / k


def _orders(run: GriffithsRun) -> List[int]:
    return list(range(max(run.n0, 2), run.n_max + 1))


def taylor_coefficient(run: GriffithsRun, k: int) -> mpf:
    """t_k = f^{(k)}(0)/k! = -(1/k) sum_n p^n sum_j h_{n,j}^{-k}, real by pairing."""
    _check_run(run, k)
    value = _coefficient(run, k, _orders(run)).real
    run.coefficients[k] = float(value)
    return value


def raw_taylor_sum(run: GriffithsRun, k: int) -> mpc:
    """The same sum without conjugate pairing; its imaginary part measures pairing defects."""
    _check_run(run, k)
    return _coefficient(run, k, _orders(run), paired=False)


def truncated_coefficient(run: GriffithsRun, k: int) -> mpf:
    """t_k restricted to the window |n - n_{p,k}| <= l_k."""
    _check_run(run, k)
    center = window_center(run.alpha, run.p, k)
    width = window_half_width(k)
    ns = [n for n in _orders(run) if abs(n - center) <= width]
    return _coefficient(run, k, ns).real


def leading_pair_coefficient(run: GriffithsRun, k: int) -> mpf:
    """t_k from the closest conjugate pair h_{n,1}, h_{n,2} of every n only."""
    _check_run(run, k)
    return _coefficient(run, k, _orders(run), select=lambda zs: zs.zeros[:2]).real


def reduced_free_energy(run: GriffithsRun, h: Number) -> mpc:
    """sum_n p^n sum_j log(1 - h/h_{n,j}), the oracle for finite differences."""
    with mp.workprec(run.precision_bits):
        h = to_mpc(h)
        slack = mpf(2) ** (-(mp.prec // 2))
        total = []
        for n in _orders(run):
            zs = run.zero_store.get(n)
            if zs is None:
                continue
            terms = []
            for z in map(to_mpc, zs.zeros):
                if _on_axis(z, slack) and z.imag != 0:
                    terms.append((mpmath.log(1 - h / z) + mpmath.log(1 - h / mpmath.conj(z))) / 2)
                else:
                    terms.append(mpmath.log(1 - h / z))
            inner = mpmath.fsum(terms)
            total.append(mpf(run.p) ** n * inner)
        return mpmath.fsum(total)


def _expanded_b2(z0: mpc, z1: mpc, z2: mpc) -> mpf:
    x0, y0 = z0.real, z0.imag
    x1, y1 = z1.real, z1.imag
    x2, y2 = z2.real, z2.imag
    first = -x2 * y0 ** 3 + y0 ** 2 * y1 * x1 + y0 ** 2 * y2 * x0 - y0 * y1 ** 2 * x0
    second = -y0 * x0 ** 2 * x2 + y0 * x0 * x1 ** 2 - y1 * x0 ** 2 * x1 + y2 * x0 ** 3
    return (first + second) / abs(z0) ** 4


def compact_b2(z0: mpc, z1: mpc, z2: mpc) -> mpf:
    """Im(z2/z0 - z1^2/(2 z0^2)), the 1/n coefficient of arg(z0 + z1/sqrt n + z2/n)."""
    return (z2 / z0 - z1 ** 2 / (2 * z0 ** 2)).imag


def griffiths_constants(p: float, alpha: float = 0.5, window_scaled: bool = True) -> GriffithsConstants:
    """Constants of the prediction, from (z0, z1, z2) of the closest zero and p.

    window_scaled applies the factor alpha that the Gaussian window in n^{alpha k}
    puts on the C^2 - d^2 and Cd terms; without it the constants reduce to the
    alpha-free closed forms.
    """
    if not 0 < p < 1:
        raise DomainError(f"p must lie in (0,1), got {p}")
    z0, z1, z2 = zero_expansion(1)
    with mp.workprec(128):
        log_p = abs(mpmath.log(mpf(p)))
        alpha_mp = mpf(alpha)
        cp = mpmath.sqrt(log_p / alpha_mp)
        ratio1 = z1 / z0
        ratio2 = z2 / z0 - z1 ** 2 / (2 * z0 ** 2)
        a = mpmath.arg(z0)
        b1 = ratio1.imag
        b2 = _expanded_b2(z0, z1, z2)
        b = b1 * cp
        d = -b1 * cp ** 3 / 2
        A = -ratio1.real * cp
        B = -ratio2.real * cp ** 2
        C = ratio1.real * cp ** 3 / 2
        w = alpha_mp if window_scaled else mpf(1)
        c = b2 * cp ** 2 + w * C * d / log_p ** 2
        C1 = -(2 / log_p) * mpmath.exp(B + w * (C ** 2 - d ** 2) / (2 * log_p ** 2))
        C2 = log_p ** (-alpha_mp) / abs(z0)
    consts = GriffithsConstants(
        p=p, alpha=alpha, window_scaled=window_scaled,
        a=float(a), b=float(b), c=float(c), d=float(d), A=float(A), B=float(B), C=float(C),
        b1=float(b1), b2=float(b2), C1=float(C1), C2=float(C2), z0=z0, z1=z1, z2=z2,
    )
    logger.info(f"Griffiths constants p={p}: a={consts.a:.6f}, b1={consts.b1:.6f}, b={consts.b:.6f}, c={consts.c:.6f}")
    return consts


def phase(consts: GriffithsConstants, k: int) -> float:
    return consts.a * k + consts.b * math.sqrt(k) + consts.c


def griffiths_prediction(consts: GriffithsConstants, k: int) -> float:
    """C1 C2^k e^{A sqrt k} Gamma(alpha k + 1) cos(a k + b sqrt k + c), to compare with k t_k."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    with mp.workprec(128):
        log_size = (k * mpmath.log(mpf(consts.C2)) + consts.A * mpmath.sqrt(k)
                    + mpmath.loggamma(consts.alpha * k + 1))
        return float(consts.C1 * mpmath.exp(log_size) * mpmath.cos(phase(consts, k)))


def griffiths_sweep(run: GriffithsRun, consts: GriffithsConstants, ks: Sequence[int]) -> List[Dict[str, Any]]:
    """Per-k rows (k, t_k, prediction, ratio, cos) comparing k t_k with the prediction."""
    rows = []
    for k in ks:
        t_k = float(taylor_coefficient(run, k))
        prediction = griffiths_prediction(consts, k)
        rows.append({
            "k": k,
            "t_k": t_k,
            "prediction": prediction,
            "ratio": k * t_k / prediction if prediction != 0 else None,
            "cos": math.cos(phase(consts, k)),
        })
        logger.debug(f"k={k}: k t_k={k * t_k:.6e}, prediction={prediction:.6e}")
    return rows


def band_fraction(rows: Sequence[Dict[str, Any]], band: Tuple[float, float] = RATIO_BAND,
                  cutoff: float = COSINE_CUTOFF) -> float:
    """Fraction of rows with |cos| >= cutoff whose ratio lies in the band."""
    eligible = [r for r in rows if abs(r["cos"]) >= cutoff and r["ratio"] is not None]
    if not eligible:
        return 0.0
    inside = sum(1 for r in eligible if band[0] <= r["ratio"] <= band[1])
    return inside / len(eligible)


def griffiths_manifest(run: GriffithsRun, consts: GriffithsConstants, rows: Sequence[Dict[str, Any]],
                       band: Tuple[float, float] = RATIO_BAND, cutoff: float = COSINE_CUTOFF) -> Dict[str, Any]:
    return {
        "p": run.p,
        "alpha": run.alpha,
        "n0": run.n0,
        "n_max": run.n_max,
        "precision": run.precision_bits,
        "constants": consts.to_dict(),
        "band": list(band),
        "cosine_cutoff": cutoff,
        "band_fraction": band_fraction(rows, band, cutoff),
        "rows": list(rows),
    }


def polylog_window_sum(beta: Number, p: Number, modulator: str = "exp-cos", C: Number = 0, d: Number = 0,
                       bits: int = 128) -> Dict[str, Any]:
    """sum_{|n - n_beta| <= l_beta} p^n n^beta H((n - n_beta)/sqrt(beta)) and its Gaussian prediction.

    H(x) = e^{Cx} cos(dx) ("exp-cos") or e^{Cx} sin(dx) ("exp-sin"); the prediction is
    T_beta exp((C^2 - d^2)/(2 log^2 p)) cos(Cd/log^2 p) (sin for "exp-sin").
    """
    if modulator not in ("exp-cos", "exp-sin"):
        raise DomainError(f"unknown modulator {modulator!r}")
    with mp.workprec(bits):
        beta = mpf(beta)
        p = mpf(p)
        if beta < 10:
            raise DomainError(f"window sums need beta >= 10, got {beta}")
        if not 0 < p < 1:
            raise DomainError(f"p must lie in (0,1), got {p}")
        C = mpf(C)
        d = mpf(d)
        log_p = mpmath.log(p)
        center = int(mpmath.floor(beta / abs(log_p)))
        width = mpmath.sqrt(beta) * mpmath.log(beta)
        root_beta = mpmath.sqrt(beta)
        trig = mpmath.cos if modulator == "exp-cos" else mpmath.sin
        terms = []
        for n in range(max(1, int(center - width)), int(center + width) + 2):
            if abs(n - center) > width:
                continue
            x = (n - center) / root_beta
            terms.append(mpmath.exp(n * log_p + beta * mpmath.log(n)) * mpmath.exp(C * x) * trig(d * x))
        window = mpmath.fsum(terms)
        leading = polylog_leading(beta, p)
        prediction = leading * mpmath.exp((C ** 2 - d ** 2) / (2 * log_p ** 2)) * trig(C * d / log_p ** 2)
        return {
            "beta": float(beta),
            "p": float(p),
            "window_sum": window,
            "prediction": prediction,
            "leading": leading,
            "ratio": window / prediction if prediction != 0 else None,
        }


def _is_rational_turn(a: float) -> bool:
    turn = a / (2 * math.pi)
    return abs(float(Fraction(turn).limit_denominator(1000)) - turn) < 1e-12


def equidistribution_ks(a: float, b: float, c: float, n: int) -> float:
    """KS distance between {(a k + b sqrt k + c) mod 2 pi : k <= n} and the uniform law."""
    if b == 0 and _is_rational_turn(a):
        raise DomainError(f"a/(2 pi) = {a / (2 * math.pi)} is rational and b = 0: the sequence is periodic")
    k = np.arange(1, n + 1, dtype=np.float64)
    angles = np.mod(a * k + b * np.sqrt(k) + c, 2 * np.pi) / (2 * np.pi)
    return float(stats.kstest(angles, "uniform").statistic)


def build_griffiths_run(p: float, n0: int = 3, n_max: int = 300, policy: Optional[PrecisionPolicy] = None,
                        store=None, alpha: float = 0.5) -> GriffithsRun:
    """Zero sets of Z_n for n0 <= n <= n_max from one renewal table, cached through the store."""
    from app.utils.artifacts import ArtifactStore

    policy = policy or PrecisionPolicy()
    store = store or ArtifactStore()
    law = InterArrivalLaw.special(alpha)
    table = store.renewal_table(law, n_max, policy)
    run = GriffithsRun(p=p, alpha=alpha, n0=n0, n_max=n_max, precision_bits=policy.bits_for(n_max))
    for n in range(max(n0, 2), n_max + 1):
        run.zero_store[n] = store.zero_set(law, n, policy, table=table)
        if n % 25 == 0:
            logger.info(f"Griffiths zero store: {n}/{n_max}")
    return run
