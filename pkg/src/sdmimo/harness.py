"""End-to-end Monte Carlo experiments: BER curves, IQ scatter clouds, and
shaped-distortion angular spectra.

The chain wires the package together per trial: draw a channel, draw
QAM symbols, precode, push the time-domain block through the modulator
and PAs on the fine grid, propagate to the users, demodulate, detect,
and tally Gray-coded bit errors.

Reproducibility: trial t draws everything from a generator seeded by
``SeedSequence((master_seed, t))``, so results are independent of
execution order and adding trials never perturbs earlier ones.

Chain recipes
-------------
The precoder selector fixes the family, the amplitude budget, and the
default PA/modulator layout; the `scheme` config key (default "auto")
can override the modulator, e.g. ``{"precoder": "zf-sd", "scheme":
"none"}`` runs plain ZF through distorting PAs with no shaping loop.

==========  ======  =================  ==============  ==================
selector    family  budget             default scheme  PAs when scheme=none
==========  ======  =================  ==============  ==================
zf-sd       ZF      chi - psi          sd1             all nonlinear
zf-tsd      ZF      chi - psi          tsd1            all nonlinear
zf-bo       ZF      r_1dB              none            linear last antenna
zf-tp       ZF      total power        none            linear last antenna
zf-ref      ZF      chi - psi          none            all ideal
slp-*       SLP     as the ZF analog   as above        as above
==========  ======  =================  ==============  ==================

Second-order schemes (sd2/tsd2) shrink the budget to chi - 3 psi.

Scaling note: the unnormalized DFT pair makes the noise-free received
subcarrier value ``M * h_p^T z_p``, so detection divides by ``M *
beta_i``.  The noise axis is reported as 1/sigma_v^2 in dB with
sigma_v^2 the per-sample time-domain variance actually injected.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .channel import (
    ChannelRealization,
    RrcFilter,
    UlaGeometry,
    distortion_noise_power,
    draw_channel,
    propagate,
    psi_hat_bound,
    psi_hat_calibrated,
    steering_vector,
)
from .config import ExperimentConfig
from .errors import ConfigError, OverloadWarning
from .ofdm import OfdmParams, TimeGrid, idft_modulate, receiver_dft, sample_hold
from .pa import PaModel, ShapingBudget, apply_pa, compute_r1db
from .precoding import PrecodeResult, slp_precode, zf_precode
from .qam import QamConstellation, detect, symbols_to_bits_errors
from .sigma_delta import ModulatorConfig, count_overloads, modulate, shaped_distortion_power

__all__ = [
    "ChainSpec",
    "MetricRecord",
    "ScatterResult",
    "SpectrumRow",
    "resolve_chain",
    "substream",
    "run_ber",
    "run_scatter",
    "run_shaping_spectrum",
]


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Independent generator for a (seed, index...) path."""
    return np.random.default_rng(np.random.SeedSequence((master_seed, *path)))


@dataclass(frozen=True)
class ChainSpec:
    """Resolved transmit-chain recipe (see module docstring)."""

    family: str        # "zf" | "slp"
    budget_kind: str   # "headroom" | "backoff" | "total-power"
    scheme: str        # "sd1" | "tsd1" | "sd2" | "tsd2" | "none"
    pa_mode: str       # used when scheme == "none": "all" | "except_last" | "ideal"
    zf_variant: str


_CHAIN_DEFAULTS = {
    "zf-sd": ("zf", "headroom", "sd1", "all", "sigma-delta"),
    "zf-tsd": ("zf", "headroom", "tsd1", "all", "tail"),
    "zf-bo": ("zf", "backoff", "none", "except_last", "back-off"),
    "zf-tp": ("zf", "total-power", "none", "except_last", "total-power"),
    "zf-ref": ("zf", "headroom", "none", "ideal", "no-distortion"),
    "slp-sd": ("slp", "headroom", "sd1", "all", "sigma-delta"),
    "slp-tsd": ("slp", "headroom", "tsd1", "all", "tail"),
    "slp-bo": ("slp", "backoff", "none", "except_last", "back-off"),
    "slp-ref": ("slp", "headroom", "none", "ideal", "no-distortion"),
}


def resolve_chain(precoder_name: str, scheme: str = "auto") -> ChainSpec:
    """Map a precoder selector plus optional scheme override to a recipe."""
    if precoder_name not in _CHAIN_DEFAULTS:
        raise ConfigError(f"unknown precoder selector {precoder_name!r}")
    family, budget_kind, default_scheme, pa_mode, zf_variant = _CHAIN_DEFAULTS[precoder_name]
    if scheme != "auto":
        default_scheme = scheme
    return ChainSpec(family=family, budget_kind=budget_kind,
                     scheme=default_scheme, pa_mode=pa_mode, zf_variant=zf_variant)


@dataclass(frozen=True)
class _Context:
    """Per-run precomputed objects shared by every trial."""

    cfg: ExperimentConfig
    chain: ChainSpec
    ofdm: OfdmParams
    geom: UlaGeometry
    rx_filter: RrcFilter
    const: QamConstellation
    budget: ShapingBudget      # psi_hat holds the worst-case receive bound
    bound: float               # amplitude budget handed to the precoder


def build_context(cfg: ExperimentConfig) -> _Context:
    sys_ = cfg.system
    chain = resolve_chain(cfg.precoder.name, cfg.scheme)
    ofdm = sys_.ofdm
    geom = UlaGeometry(n=sys_.n, d_over_lambda=sys_.d_over_lambda)
    rx_filter = RrcFilter(rolloff=sys_.rrc_rolloff, span=sys_.rrc_span_ts)
    budget = ShapingBudget.from_pa(cfg.pa, cfg.chi_value)
    budget = dataclasses.replace(
        budget, psi_hat=psi_hat_bound(cfg.pa.gain, budget.psi, rx_filter, ofdm.osf))

    if chain.budget_kind == "headroom":
        bound = budget.chi - budget.psi
        if chain.scheme in ("sd2", "tsd2"):
            bound = budget.chi - 3.0 * budget.psi
        if bound <= 0:
            raise ConfigError("no-overloading budget is empty for this PA and chi")
    elif chain.budget_kind == "backoff":
        bound = compute_r1db(cfg.pa)
    else:  # total power reference amplitude
        bound = cfg.pa.r_max
    return _Context(cfg=cfg, chain=chain, ofdm=ofdm, geom=geom, rx_filter=rx_filter,
                    const=QamConstellation(d=sys_.qam_d), budget=budget, bound=bound)


def _draw_trial_channel(ctx: _Context, rng: np.random.Generator) -> ChannelRealization:
    sys_ = ctx.cfg.system
    return draw_channel(
        rng, ctx.geom, ctx.ofdm, sys_.k, sys_.j_paths, sys_.l_taps,
        rx_filter=ctx.rx_filter, pa_gain=ctx.cfg.pa.gain,
        angle_spread_deg=sys_.angle_spread_deg,
        delay_range_ts=(sys_.delay_min_ts, sys_.delay_max_ts),
    )


def _estimate_sigma_eta(ctx: _Context, chan: ChannelRealization,
                        symbols: np.ndarray, sigma_v2: float) -> np.ndarray:
    """Per-user effective noise std for the symbol-level design, in the
    units of the normalized decision statistic r / M.

    The distortion part uses the closed-form angular structure with the
    per-antenna distortion second moment measured by running the
    modulator on the zero-forcing block (the same drive statistics the
    final signal will have); the thermal and distortion variances are
    divided by the DFT round-trip gain M so the design margins match the
    detector's actual operating point.
    """
    sigma_xi2 = np.zeros(chan.n_users)
    if ctx.chain.scheme != "none":
        zf = zf_precode(chan, symbols, ctx.bound, variant="sigma-delta")
        x_fine = sample_hold(ctx.ofdm, zf.x.with_cp)
        mod_cfg = ModulatorConfig.from_scheme(ctx.chain.scheme, ctx.cfg.pa, ctx.budget)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OverloadWarning)
            _, q, _ = modulate(mod_cfg, x_fine)
        n_tail = (1 if ctx.chain.scheme == "tsd1" else
                  2 if ctx.chain.scheme == "tsd2" else 0)
        shaped = q[:-n_tail] if n_tail else q
        m2 = float(np.mean(np.abs(shaped) ** 2))
        psi_hat_eff = psi_hat_calibrated(ctx.cfg.pa.gain, m2, ctx.rx_filter,
                                         ctx.ofdm.osf)
        sigma_xi2 = distortion_noise_power(chan, psi_hat_eff, ctx.chain.scheme)
    return np.sqrt((sigma_xi2 + sigma_v2) / ctx.ofdm.m)


def _precode(ctx: _Context, chan: ChannelRealization, symbols: np.ndarray,
             sigma_v2: float) -> PrecodeResult:
    if ctx.chain.family == "zf":
        return zf_precode(chan, symbols, ctx.bound, variant=ctx.chain.zf_variant)
    sigma_eta = _estimate_sigma_eta(ctx, chan, symbols, sigma_v2)
    pc = ctx.cfg.precoder
    return slp_precode(
        chan, symbols, ctx.bound, sigma_eta,
        rho=pc.rho, admm_max_iter=pc.admm_max_iter, apg_max_iter=pc.apg_max_iter,
        ftol=pc.ftol, xtol=pc.xtol, apg_tol=pc.apg_tol, d=ctx.const.d,
    )


def _transmit(ctx: _Context, x_grid: TimeGrid) -> Tuple[np.ndarray, int]:
    """Fine-grid PA-array output for a precoded block, plus overload count."""
    x_fine = sample_hold(ctx.ofdm, x_grid.with_cp)
    pa = ctx.cfg.pa
    if ctx.chain.scheme != "none":
        mod_cfg = ModulatorConfig.from_scheme(ctx.chain.scheme, pa, ctx.budget)
        n_over = count_overloads(mod_cfg, x_fine)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OverloadWarning)
            u, _, _ = modulate(mod_cfg, x_fine)
        return u, n_over
    linear = PaModel.ideal(pa.gain, pa.r_max)
    if ctx.chain.pa_mode == "ideal":
        return apply_pa(linear, x_fine), 0
    u = apply_pa(pa, x_fine)
    if ctx.chain.pa_mode == "except_last":
        u[-1] = apply_pa(linear, x_fine[-1])
    return u, 0


def _detect_errors(ctx: _Context, r: np.ndarray, beta: np.ndarray,
                   symbols: np.ndarray) -> int:
    beta_eff = ctx.ofdm.m * beta[:, None]
    s_hat = detect(r, beta_eff, ctx.const)
    return symbols_to_bits_errors(symbols, s_hat, ctx.const)


@dataclass
class _TrialTally:
    errors: np.ndarray
    bits: np.ndarray
    beta_sum: float = 0.0
    beta_count: int = 0
    overloads: int = 0
    solves: int = 0
    solver_converged: int = 0
    solver_admm_iters: float = 0.0


def _run_trial(ctx: _Context, trial: int) -> _TrialTally:
    cfg = ctx.cfg
    rng = substream(cfg.run.seed, trial)
    chan = _draw_trial_channel(ctx, rng)
    n_snr = len(cfg.sigma_v2)
    bits_per_block = 2 * ctx.const.bits_per_axis * cfg.system.k * cfg.system.m_s
    tally = _TrialTally(errors=np.zeros(n_snr, dtype=np.int64),
                        bits=np.zeros(n_snr, dtype=np.int64))

    for _block in range(cfg.run.blocks_per_trial):
        symbols = ctx.const.random_symbols(rng, (cfg.system.k, cfg.system.m_s))
        if ctx.chain.family == "zf":
            result = _precode(ctx, chan, symbols, sigma_v2=0.0)
            u, n_over = _transmit(ctx, result.x)
            y0 = propagate(chan, u, 0.0)
            tally.beta_sum += float(result.beta.mean())
            tally.beta_count += 1
            tally.overloads += n_over
            for si, sv2 in enumerate(cfg.sigma_v2):
                y = y0
                if sv2 > 0:
                    noise = rng.standard_normal(y0.shape) + 1j * rng.standard_normal(y0.shape)
                    y = y0 + noise * math.sqrt(sv2 / 2.0)
                r = receiver_dft(ctx.ofdm, y)
                tally.errors[si] += _detect_errors(ctx, r, result.beta, symbols)
                tally.bits[si] += bits_per_block
        else:
            for si, sv2 in enumerate(cfg.sigma_v2):
                result = _precode(ctx, chan, symbols, sigma_v2=sv2)
                u, n_over = _transmit(ctx, result.x)
                y = propagate(chan, u, sv2, rng) if sv2 > 0 else propagate(chan, u, 0.0)
                r = receiver_dft(ctx.ofdm, y)
                tally.errors[si] += _detect_errors(ctx, r, result.beta, symbols)
                tally.bits[si] += bits_per_block
                tally.beta_sum += float(result.beta.mean())
                tally.beta_count += 1
                tally.overloads += n_over
                tally.solves += 1
                tally.solver_converged += int(result.diagnostics.get("converged", 0.0))
                tally.solver_admm_iters += result.diagnostics.get("admm_iterations", 0.0)
    return tally


@dataclass
class MetricRecord:
    """One BER point: scheme/precoder labels, noise level, and tallies."""

    scheme: str
    precoder: str
    sigma_v2: float
    snr_db: float
    ber: float
    bits: int
    errors: int
    mean_beta: float
    overloads: int
    solver_converged_frac: float
    solver_mean_admm_iters: float


def self_check_linear_chain(ctx: _Context, rel_tol: float = 1e-6) -> float:
    """Regression check: ideal PAs in the linear region must reproduce the
    frequency-domain model ``M * h_p^T z_p`` through the full chain.

    Uses a tap count that covers the whole delay + filter support so the
    discrete model is exact.  Returns the worst relative error; raises
    ``RuntimeError`` if it exceeds `rel_tol`.
    """
    cfg = ctx.cfg
    sys_ = cfg.system
    rng = substream(cfg.run.seed, 2**40)
    l_full = int(math.ceil(sys_.delay_max_ts + sys_.rrc_span_ts)) + 2
    chan = draw_channel(
        rng, ctx.geom, ctx.ofdm, sys_.k, sys_.j_paths, l_full,
        rx_filter=ctx.rx_filter, pa_gain=cfg.pa.gain,
        angle_spread_deg=sys_.angle_spread_deg,
        delay_range_ts=(sys_.delay_min_ts, sys_.delay_max_ts),
    )
    scale = 0.5 * cfg.pa.r_max / math.sqrt(sys_.n * ctx.ofdm.m)
    z = scale * (rng.standard_normal((sys_.n, ctx.ofdm.m_s))
                 + 1j * rng.standard_normal((sys_.n, ctx.ofdm.m_s)))
    x_grid = idft_modulate(ctx.ofdm, z)
    u = cfg.pa.gain * sample_hold(ctx.ofdm, x_grid.with_cp)
    y = propagate(chan, u, 0.0)
    r = receiver_dft(ctx.ofdm, y)
    model = ctx.ofdm.m * np.einsum("pkn,np->kp", chan.freq, z)
    err = float(np.max(np.abs(r - model)) / np.max(np.abs(model)))
    if err > rel_tol:
        raise RuntimeError(f"linear-chain self check failed: relative error {err:.3g}")
    return err


def run_ber(cfg: ExperimentConfig, workers: int = 1) -> List[MetricRecord]:
    """Monte Carlo BER sweep over the configured noise grid.

    Runs ``cfg.run.trials`` independent channel trials with
    ``cfg.run.blocks_per_trial`` OFDM blocks each and accumulates
    Gray-coded bit errors per noise point.  Trials that raise are
    excluded from the tallies and counted (a warning summarizes them).
    Deterministic for a fixed config and seed, for any worker count.
    """
    ctx = build_context(cfg)
    if cfg.run.self_check:
        self_check_linear_chain(ctx)

    tallies: List[Optional[_TrialTally]] = [None] * cfg.run.trials
    failures = 0
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = {t: pool.submit(_run_trial, ctx, t) for t in range(cfg.run.trials)}
            for t, fut in futs.items():
                try:
                    tallies[t] = fut.result()
                except Exception as exc:  # noqa: BLE001 - per-trial isolation
                    failures += 1
                    warnings.warn(f"trial {t} failed and was excluded: {exc}")
    else:
        for t in range(cfg.run.trials):
            try:
                tallies[t] = _run_trial(ctx, t)
            except Exception as exc:  # noqa: BLE001 - per-trial isolation
                failures += 1
                warnings.warn(f"trial {t} failed and was excluded: {exc}")
    if failures:
        warnings.warn(f"{failures} of {cfg.run.trials} trials failed")

    good = [t for t in tallies if t is not None]
    if not good:
        raise RuntimeError("all trials failed")

    records = []
    for si, sv2 in enumerate(cfg.sigma_v2):
        bits = int(sum(t.bits[si] for t in good))
        errors = int(sum(t.errors[si] for t in good))
        beta_count = sum(t.beta_count for t in good)
        solves = sum(t.solves for t in good)
        records.append(MetricRecord(
            scheme=ctx.chain.scheme,
            precoder=cfg.precoder.name,
            sigma_v2=sv2,
            snr_db=math.inf if sv2 == 0 else -10.0 * math.log10(sv2),
            ber=errors / bits if bits else math.nan,
            bits=bits,
            errors=errors,
            mean_beta=sum(t.beta_sum for t in good) / beta_count if beta_count else math.nan,
            overloads=int(sum(t.overloads for t in good)),
            solver_converged_frac=(sum(t.solver_converged for t in good) / solves) if solves else math.nan,
            solver_mean_admm_iters=(sum(t.solver_admm_iters for t in good) / solves) if solves else math.nan,
        ))
    return records


@dataclass
class ScatterResult:
    """Noise-free received points at one subcarrier, normalized by M*beta."""

    subcarrier: int
    points: np.ndarray      # (K, blocks) complex
    symbols: np.ndarray     # (K, blocks) intended constellation points
    rms_deviation: float


def run_scatter(cfg: ExperimentConfig, subcarrier: Optional[int] = None) -> ScatterResult:
    """Noise-free IQ cloud for one fixed channel over many OFDM blocks.

    Emits ``r_{i,p} / (M beta_i)`` per user and block at the requested
    subcarrier, plus the RMS distance of the cloud from the intended
    constellation points.
    """
    ctx = build_context(cfg)
    p = cfg.run.scatter_subcarrier if subcarrier is None else subcarrier
    if not (0 <= p < cfg.system.m_s):
        raise ConfigError(f"scatter subcarrier {p} out of range [0, {cfg.system.m_s})")
    rng = substream(cfg.run.seed, 0)
    chan = _draw_trial_channel(ctx, rng)

    n_blocks = cfg.run.blocks_per_trial
    points = np.empty((cfg.system.k, n_blocks), dtype=complex)
    intended = np.empty((cfg.system.k, n_blocks), dtype=complex)
    for blk in range(n_blocks):
        symbols = ctx.const.random_symbols(rng, (cfg.system.k, cfg.system.m_s))
        result = _precode(ctx, chan, symbols, sigma_v2=cfg.sigma_v2[0]
                          if ctx.chain.family == "slp" else 0.0)
        u, _ = _transmit(ctx, result.x)
        y = propagate(chan, u, 0.0)
        r = receiver_dft(ctx.ofdm, y)
        points[:, blk] = r[:, p] / (ctx.ofdm.m * result.beta)
        intended[:, blk] = symbols[:, p]
    rms = float(np.sqrt(np.mean(np.abs(points - intended) ** 2)))
    return ScatterResult(subcarrier=p, points=points, symbols=intended, rms_deviation=rms)


@dataclass
class SpectrumRow:
    theta_deg: float
    measured: float
    predicted: float


def run_shaping_spectrum(cfg: ExperimentConfig,
                         angles_deg: Optional[Sequence[float]] = None) -> List[SpectrumRow]:
    """Measured vs predicted beamformed distortion power over an angle grid.

    Feeds constant-envelope random-phase frames at the modulator's input
    bound, beamforms the distortion-only component ``a(theta)^T (u - A x)``,
    and averages its power over samples and frames.  The prediction is
    the closed-form shaped-power expression for the configured scheme.
    """
    ctx = build_context(cfg)
    if ctx.chain.scheme == "none":
        raise ConfigError("shaping spectrum requires a sigma-delta scheme (sd1/tsd1/sd2/tsd2)")
    angles = tuple(cfg.run.spectrum_angles_deg if angles_deg is None else angles_deg)
    mod_cfg = ModulatorConfig.from_scheme(ctx.chain.scheme, ctx.cfg.pa, ctx.budget)
    bound = mod_cfg.input_bound
    rng = substream(cfg.run.seed, 1)
    n = ctx.geom.n

    steer = np.stack([steering_vector(ctx.geom, math.radians(a)) for a in angles])
    acc = np.zeros(len(angles))
    count = 0
    for _frame in range(cfg.run.spectrum_frames):
        phase = rng.uniform(-np.pi, np.pi, size=(n, cfg.run.spectrum_samples))
        x = bound * np.exp(1j * phase)
        u, _, _ = modulate(mod_cfg, x)
        resid = u - ctx.cfg.pa.gain * x
        beams = steer @ resid                      # (angles, samples)
        acc += np.sum(np.abs(beams) ** 2, axis=1)
        count += cfg.run.spectrum_samples

    rows = []
    for ai, a in enumerate(angles):
        pred = shaped_distortion_power(
            math.radians(a), ctx.geom.d_over_lambda, n,
            ctx.cfg.pa.gain, ctx.budget.psi, ctx.chain.scheme,
        )
        rows.append(SpectrumRow(theta_deg=float(a), measured=float(acc[ai] / count),
                                predicted=pred))
    return rows
