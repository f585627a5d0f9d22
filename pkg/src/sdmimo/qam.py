"""Square QAM constellations, detection, Gray bit mapping, and the
per-component correct-detection probability used by the symbol-level
precoder.

The constellation is the set {s_R + j s_I : s_R, s_I odd integers in
[-(2D-1), 2D-1]}, i.e. 4*D^2 points.  Detection is per-axis nearest odd
integer with clipping; exact mid-ties round toward zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

__all__ = [
    "QamConstellation",
    "detect",
    "dp_real_component",
    "dp_components",
    "symbols_to_bits_errors",
]


@dataclass(frozen=True)
class QamConstellation:
    """4*D^2-point square QAM with odd-integer coordinates."""

    d: int

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("d must be a positive integer")

    @property
    def levels(self) -> np.ndarray:
        """Per-axis amplitude levels, [-(2d-1), ..., -1, 1, ..., 2d-1]."""
        return np.arange(-(2 * self.d - 1), 2 * self.d, 2)

    @property
    def points(self) -> np.ndarray:
        """All 4*d^2 constellation points."""
        lv = self.levels.astype(float)
        return (lv[:, None] + 1j * lv[None, :]).ravel()

    @property
    def bits_per_axis(self) -> int:
        return int(np.log2(2 * self.d))

    def random_symbols(self, rng: np.random.Generator, shape) -> np.ndarray:
        """Symbols drawn uniformly from the constellation."""
        re = rng.integers(0, 2 * self.d, size=shape)
        im = rng.integers(0, 2 * self.d, size=shape)
        lv = self.levels
        return lv[re].astype(float) + 1j * lv[im].astype(float)


def _nearest_odd_toward_zero(x: np.ndarray) -> np.ndarray:
    # nearest odd integer; exact ties between two odd levels go toward zero
    t = (x - 1.0) / 2.0
    k = np.where(x >= 0, np.ceil(t - 0.5), np.floor(t + 0.5))
    return k


def detect(r, beta, constellation: QamConstellation) -> np.ndarray:
    """Decide symbols from received values: per-axis nearest level of r/beta.

    Scaling invariant: ``detect(c*r, c*beta)`` equals ``detect(r, beta)``
    for any c > 0.
    """
    if np.any(np.asarray(beta) <= 0):
        raise ValueError("beta must be positive")
    z = np.asarray(r, dtype=complex) / beta
    d = constellation.d
    k_re = np.clip(_nearest_odd_toward_zero(z.real), -d, d - 1)
    k_im = np.clip(_nearest_odd_toward_zero(z.imag), -d, d - 1)
    return (2.0 * k_re + 1.0) + 1j * (2.0 * k_im + 1.0)


def dp_real_component(
    s_component: int, received_component: float, beta: float, sigma_eta: float, d: int
) -> float:
    """Probability of deciding one real/imaginary component correctly.

    With effective noise std `sigma_eta` (complex, so each axis has
    variance sigma_eta^2/2), margin offsets
    ``a = beta + beta*s - v`` and ``c = -beta + beta*s - v`` where `v` is
    the noise-free received component:

    * interior level (|s| < 2d-1):  Phi(sqrt(2) a / sigma) - Phi(sqrt(2) c / sigma)
    * top level (s = 2d-1):         Phi(-sqrt(2) c / sigma)
    * bottom level (s = -(2d-1)):   Phi(sqrt(2) a / sigma)
    """
    if sigma_eta <= 0:
        raise ValueError("sigma_eta must be positive")
    s = int(s_component)
    a = beta + beta * s - received_component
    c = -beta + beta * s - received_component
    rt2 = np.sqrt(2.0)
    if abs(s) < 2 * d - 1:
        return float(ndtr(rt2 * a / sigma_eta) - ndtr(rt2 * c / sigma_eta))
    if s == 2 * d - 1:
        return float(ndtr(-rt2 * c / sigma_eta))
    if s == -(2 * d - 1):
        return float(ndtr(rt2 * a / sigma_eta))
    raise ValueError(f"{s} is not an admissible level for d={d}")


def _phi_pdf(t: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * t * t) / np.sqrt(2.0 * np.pi)


def dp_components(s_axis, v_axis, beta, sigma_eta, d):
    """Vectorized per-component DP with the pieces needed for gradients.

    Parameters are broadcastable arrays: `s_axis` the true levels (odd
    ints), `v_axis` the noise-free received components, `beta` and
    `sigma_eta` per-user columns.  Returns ``(dp, phi_hi, phi_lo)`` where
    `phi_hi`/`phi_lo` are the Gaussian densities at the upper/lower
    margin-normalized offsets (zero where the corresponding branch has
    no finite threshold).
    """
    s = np.asarray(s_axis, dtype=float)
    v = np.asarray(v_axis, dtype=float)
    rt2 = np.sqrt(2.0)
    a = beta * (1.0 + s) - v
    c = beta * (s - 1.0) - v
    ta = rt2 * a / sigma_eta
    tc = rt2 * c / sigma_eta
    top = s >= 2 * d - 1
    bottom = s <= -(2 * d - 1)
    interior = ~(top | bottom)

    # stable difference: use the survival form when both arguments are high
    diff = np.where(ta + tc > 0, ndtr(-tc) - ndtr(-ta), ndtr(ta) - ndtr(tc))
    dp = np.where(interior, diff, np.where(top, ndtr(-tc), ndtr(ta)))

    phi_hi = np.where(top, 0.0, _phi_pdf(ta))
    phi_lo = np.where(bottom, 0.0, _phi_pdf(tc))
    return dp, phi_hi, phi_lo


# bit counts for one byte, used to tally Gray-coded bit errors
_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


def symbols_to_bits_errors(s_true, s_hat, constellation: QamConstellation) -> int:
    """Bit errors between true and detected symbols under per-axis Gray coding.

    Each axis carries log2(2d) bits; the level index k (0..2d-1) maps to
    the Gray code k ^ (k >> 1), so adjacent levels differ in one bit.
    """
    d = constellation.d

    def axis_errors(true_ax, hat_ax):
        kt = ((np.asarray(true_ax) + (2 * d - 1)) / 2).astype(np.int64)
        kh = ((np.asarray(hat_ax) + (2 * d - 1)) / 2).astype(np.int64)
        gt = kt ^ (kt >> 1)
        gh = kh ^ (kh >> 1)
        return int(_POPCOUNT[(gt ^ gh) & 0xFF].sum())

    s_true = np.asarray(s_true)
    s_hat = np.asarray(s_hat)
    return axis_errors(s_true.real, s_hat.real) + axis_errors(s_true.imag, s_hat.imag)
