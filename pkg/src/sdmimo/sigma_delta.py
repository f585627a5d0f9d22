"""Spatial sigma-delta modulators across the antenna index.

The modulators run the PA inside a feedback loop between adjacent
antennas of a ULA so that the PA distortion is pushed toward high
spatial frequencies (large angles).  First- and second-order loops are
provided, each with an optional tail-removing variant that puts ideal
(linear) PAs on the last one or two antennas so that the unshaped tail
distortion vanishes.

All frames are complex arrays of shape (n_antennas, n_samples); the
recurrence is sequential in the antenna index and vectorized over time
samples.  State is local to one call: the error feedback starts from
zero at every frame, so frames (and therefore OFDM blocks) are
independent.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .errors import OverloadWarning, ShapeMismatch
from .pa import PaModel, ShapingBudget, apply_pa

__all__ = [
    "ModulatorConfig",
    "modulate",
    "modulate_first_order",
    "modulate_second_order",
    "count_overloads",
    "shaped_distortion_power",
]

SCHEMES = ("sd1", "tsd1", "sd2", "tsd2")


@dataclass(frozen=True)
class ModulatorConfig:
    """Modulator order/variant plus the PA and amplitude budget it runs with."""

    order: int
    tail_removing: bool
    pa: PaModel
    budget: ShapingBudget

    def __post_init__(self) -> None:
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        if self.input_bound <= 0:
            raise ValueError(
                "empty no-overloading input set: need chi - psi > 0 "
                "(first order) or chi - 3*psi > 0 (second order)"
            )

    @classmethod
    def from_scheme(cls, scheme: str, pa: PaModel, budget: ShapingBudget) -> "ModulatorConfig":
        if scheme not in SCHEMES:
            raise ValueError(f"unknown modulator scheme {scheme!r}")
        return cls(
            order=1 if scheme in ("sd1", "tsd1") else 2,
            tail_removing=scheme.startswith("t"),
            pa=pa,
            budget=budget,
        )

    @property
    def input_bound(self) -> float:
        """Largest input amplitude with a no-overloading guarantee."""
        if self.order == 1:
            return self.budget.chi - self.budget.psi
        return self.budget.chi - 3.0 * self.budget.psi


def _check_frame(x: np.ndarray, min_rows: int) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.ndim != 2:
        raise ShapeMismatch(f"antenna frame must be 2-D, got shape {x.shape}")
    if x.shape[0] < min_rows:
        raise ShapeMismatch(f"need at least {min_rows} antennas, got {x.shape[0]}")
    return x


def _warn_overloads(cfg: ModulatorConfig, x: np.ndarray) -> None:
    n_over = count_overloads(cfg, x)
    if n_over:
        warnings.warn(
            f"{n_over} modulator input samples exceed the no-overloading "
            f"bound {cfg.input_bound:.6g}; the loop still runs but the "
            "distortion bounds no longer apply",
            OverloadWarning,
            stacklevel=3,
        )


def count_overloads(cfg: ModulatorConfig, x) -> int:
    """Number of input samples whose amplitude exceeds the bound."""
    return int(np.count_nonzero(np.abs(np.asarray(x)) > cfg.input_bound + 1e-12))


def _run_first_order(
    responses: list, gain: float, x: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """First-order loop: b_n = x_n - q_{n-1}, u_n = G_n(b_n), q_n = u_n/A - b_n."""
    u = np.empty_like(x)
    q = np.empty_like(x)
    b = np.empty_like(x)
    q_prev = np.zeros(x.shape[1], dtype=complex)
    for n in range(x.shape[0]):
        b[n] = x[n] - q_prev
        u[n] = responses[n](b[n])
        q[n] = u[n] / gain - b[n]
        q_prev = q[n]
    return u, q, b


def _run_second_order(
    responses: list, gain: float, x: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Second-order loop: b_n = x_n - 2 q_{n-1} + q_{n-2}."""
    u = np.empty_like(x)
    q = np.empty_like(x)
    b = np.empty_like(x)
    q_prev = np.zeros(x.shape[1], dtype=complex)
    q_prev2 = np.zeros(x.shape[1], dtype=complex)
    for n in range(x.shape[0]):
        b[n] = x[n] - 2.0 * q_prev + q_prev2
        u[n] = responses[n](b[n])
        q[n] = u[n] / gain - b[n]
        q_prev2 = q_prev
        q_prev = q[n]
    return u, q, b


def _responses(cfg: ModulatorConfig, n_antennas: int) -> list:
    """Per-antenna PA response callables; tail antennas get an ideal PA."""
    pa_fn: Callable = lambda z: apply_pa(cfg.pa, z)
    n_tail = 0
    if cfg.tail_removing:
        n_tail = 1 if cfg.order == 1 else 2
    if n_tail == 0 or cfg.pa.kind == "ideal":
        return [pa_fn] * n_antennas
    linear = PaModel.ideal(cfg.pa.gain, cfg.pa.r_max)
    lin_fn: Callable = lambda z: apply_pa(linear, z)
    return [pa_fn] * (n_antennas - n_tail) + [lin_fn] * n_tail


def modulate_first_order(cfg: ModulatorConfig, x) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run the first-order loop over an antenna frame.

    Parameters
    ----------
    cfg : ModulatorConfig
        Must have ``order == 1``.
    x : (N, T) complex array
        Modulator input frame.

    Returns
    -------
    (u, q, b) : three (N, T) complex arrays
        PA outputs, per-antenna distortion, and PA inputs.  The exact
        identity ``u_n = A*x_n + A*(q_n - q_{n-1})`` holds to machine
        precision.  If ``cfg.tail_removing``, the last antenna uses an
        ideal PA, so its distortion is zero whenever ``|b_N| <= r_max``.

    An :class:`OverloadWarning` is emitted when any input sample exceeds
    ``cfg.input_bound``; the loop still runs (the PA is total) so
    overload behaviour can be probed deliberately.
    """
    if cfg.order != 1:
        raise ValueError("config is not first order")
    x = _check_frame(x, min_rows=2 if cfg.tail_removing else 1)
    _warn_overloads(cfg, x)
    return _run_first_order(_responses(cfg, x.shape[0]), cfg.pa.gain, x)


def modulate_second_order(cfg: ModulatorConfig, x) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run the second-order loop (doubled feedback) over an antenna frame.

    Same contract as :func:`modulate_first_order` with the identity
    ``u_n = A*x_n + A*(q_n - 2 q_{n-1} + q_{n-2})`` and, for the
    tail-removing variant, ideal PAs on the last two antennas.
    """
    if cfg.order != 2:
        raise ValueError("config is not second order")
    x = _check_frame(x, min_rows=3 if cfg.tail_removing else 1)
    _warn_overloads(cfg, x)
    return _run_second_order(_responses(cfg, x.shape[0]), cfg.pa.gain, x)


def modulate(cfg: ModulatorConfig, x) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dispatch to the first- or second-order loop based on `cfg.order`."""
    if cfg.order == 1:
        return modulate_first_order(cfg, x)
    return modulate_second_order(cfg, x)


def shaped_distortion_power(
    theta: float,
    d_over_lambda: float,
    n_antennas: int,
    gain: float,
    psi: float,
    scheme: str,
) -> float:
    """Closed-form prediction of the beamformed distortion power at angle `theta`.

    Under the i.i.d. distortion model (amplitude uniform on [0, psi],
    phase uniform, independent across antennas, so E|q|^2 = psi^2/3):

    * ``"sd1"``   : 4 (N-1) A^2 psi^2 / 3 * sin^2(pi d/lambda sin(theta))
                    + A^2 psi^2 / 3                    (unshaped tail term)
    * ``"tsd1"``  : the sd1 expression without the tail term
    * ``"tsd2"``  : 16 (N-2) A^2 psi^2 / 3 * sin^4(pi d/lambda sin(theta)),
                    i.e. the squared second-difference high-pass gain
                    |1 - exp(-j w)|^4 applied to the N-2 shaped antennas
    * ``"sd2"``   : the tsd2 expression plus the two unshaped edge
                    antennas, A^2 psi^2/3 * (|1 - 2 e^{-j w}|^2 + 1)

    `theta` is in radians; `n_antennas` must be at least 2 (3 for the
    second-order schemes).
    """
    if n_antennas < 2:
        raise ValueError("need at least 2 antennas")
    half_w = math.pi * d_over_lambda * math.sin(theta)
    s2 = math.sin(half_w) ** 2
    base = gain**2 * psi**2 / 3.0
    if scheme == "sd1":
        return 4.0 * (n_antennas - 1) * base * s2 + base
    if scheme == "tsd1":
        return 4.0 * (n_antennas - 1) * base * s2
    if scheme in ("sd2", "tsd2"):
        if n_antennas < 3:
            raise ValueError("second-order schemes need at least 3 antennas")
        shaped = 16.0 * (n_antennas - 2) * base * s2 * s2
        if scheme == "tsd2":
            return shaped
        edge = abs(1.0 - 2.0 * complex(math.cos(2 * half_w), -math.sin(2 * half_w))) ** 2
        return shaped + base * (edge + 1.0)
    raise ValueError(f"unknown scheme {scheme!r} (expected sd1, tsd1, sd2 or tsd2)")
