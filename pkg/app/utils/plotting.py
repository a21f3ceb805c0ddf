"""Static SVG figures: zeros over the critical curve, curve families, zeros in w = e^h."""
import io
import logging
import math
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
from matplotlib import pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from app.models.state import ZeroSet  # noqa: E402
from app.pinning.critcurve import curve_array  # noqa: E402
from app.utils.artifacts import atomic_write_bytes  # noqa: E402

logger = logging.getLogger(__name__)

CURVE_SAMPLES = 2000
FAMILY_ALPHAS = (1 / 6, 1 / 3, 2 / 3)

# deterministic SVG: no date metadata, fixed hash salt for element ids
plt.rcParams.update({"svg.hashsalt": "pinning", "font.size": 11})
SVG_METADATA = {"Date": None}


def _save(fig, path: str) -> str:
    buffer = io.BytesIO()
    fig.savefig(buffer, format="svg", bbox_inches="tight", metadata=SVG_METADATA)
    plt.close(fig)
    atomic_write_bytes(path, buffer.getvalue())
    logger.info(f"Saved figure {path}")
    return path


def _upper_curve(alpha: float) -> np.ndarray:
    thetas = np.linspace(0.0, math.pi, CURVE_SAMPLES)
    return curve_array(alpha, thetas)


def plot_zeros_over_curve(zs: ZeroSet, path: str, upper_only: bool = True) -> str:
    """Zeros of Z_{N,h} in the h-cylinder with C_alpha drawn on top."""
    zeros = np.array(zs.as_complex())
    if upper_only:
        zeros = zeros[zeros.imag >= 0]
    curve = _upper_curve(zs.law.alpha)
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.plot(curve.real, curve.imag, "-", color="tab:red", linewidth=1.2, label=f"C_{zs.law.alpha:g}")
    if not upper_only:
        ax.plot(curve.real, -curve.imag, "-", color="tab:red", linewidth=1.2)
    ax.plot(zeros.real, zeros.imag, "o", color="tab:blue", markersize=2.5, label=f"zeros, N={zs.N}")
    ax.set_xlabel("Re(h)")
    ax.set_ylabel("Im(h)")
    ax.set_ylim(0 if upper_only else -math.pi, math.pi)
    ax.legend(loc="lower right")
    return _save(fig, path)


def plot_curve_family(path: str, alphas: Sequence[float] = FAMILY_ALPHAS) -> str:
    """Left: theta -> 1 - (1 - e^{-i theta})^alpha. Right: its logarithm, the curves C_alpha."""
    thetas = np.linspace(1e-6, 2 * math.pi - 1e-6, CURVE_SAMPLES)
    fig, (left, right) = plt.subplots(1, 2, figsize=(11, 5))
    for alpha in alphas:
        eta = 1 - (1 - np.exp(-1j * thetas)) ** alpha
        left.plot(eta.real, eta.imag, "-", label=f"alpha={alpha:.3g}")
        h = curve_array(alpha, thetas)
        right.plot(h.real, h.imag, "-", label=f"alpha={alpha:.3g}")
    left.set_xlabel("Re")
    left.set_ylabel("Im")
    left.set_aspect("equal")
    right.set_xlabel("Re(h)")
    right.set_ylabel("Im(h)")
    right.legend(loc="lower right")
    return _save(fig, path)


def plot_zeros_w(zero_sets: List[ZeroSet], path: str, labels: Optional[List[str]] = None) -> str:
    """Zeros in w = e^h together with the image of C_alpha, one colour per zero set."""
    fig, ax = plt.subplots(figsize=(6, 6))
    labels = labels or [zs.law.kind for zs in zero_sets]
    drawn = set()
    for zs, label in zip(zero_sets, labels):
        if zs.law.alpha not in drawn:
            thetas = np.linspace(1e-6, 2 * math.pi - 1e-6, CURVE_SAMPLES)
            w_curve = np.exp(curve_array(zs.law.alpha, thetas))
            ax.plot(w_curve.real, w_curve.imag, "-", color="black", linewidth=0.8)
            drawn.add(zs.law.alpha)
        w = np.exp(np.array(zs.as_complex()))
        ax.plot(w.real, w.imag, "o", markersize=2.5, label=f"{label}, N={zs.N}")
    ax.set_xlabel("Re(w)")
    ax.set_ylabel("Im(w)")
    ax.set_aspect("equal")
    ax.legend(loc="upper right")
    return _save(fig, path)
