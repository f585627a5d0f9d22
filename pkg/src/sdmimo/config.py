"""Experiment configuration: JSON schema, parsing, and validation.

One JSON document describes one experiment, with sections

    {"system": {...}, "pa": {...}, "scheme": "...", "precoder": {...},
     "noise": {...}, "run": {...}}

Unknown keys are rejected so that typos fail loudly.  All parse errors
raise :class:`ConfigError` naming the offending section and key.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Tuple

from .errors import ConfigError
from .ofdm import OfdmParams
from .pa import PaModel

__all__ = [
    "SystemConfig",
    "PrecoderConfig",
    "RunConfig",
    "ExperimentConfig",
    "load_config",
    "config_to_dict",
]

PRECODER_NAMES = (
    "zf-sd", "zf-tsd", "zf-bo", "zf-tp", "zf-ref",
    "slp-sd", "slp-tsd", "slp-bo", "slp-ref",
)
SCHEME_NAMES = ("auto", "sd1", "tsd1", "sd2", "tsd2", "none")


@dataclass(frozen=True)
class SystemConfig:
    n: int = 16
    k: int = 4
    d_over_lambda: float = 0.125
    m: int = 512
    m_s: int = 300
    m_cp: int = 40
    osf: int = 7
    j_paths: int = 4
    l_taps: int = 20
    angle_spread_deg: float = 35.0
    delay_min_ts: float = 5.0
    delay_max_ts: float = 15.0
    rrc_rolloff: float = 0.22
    rrc_span_ts: float = 5.0
    qam_d: int = 2

    @property
    def ofdm(self) -> OfdmParams:
        return OfdmParams(m=self.m, m_s=self.m_s, m_cp=self.m_cp, osf=self.osf)


@dataclass(frozen=True)
class PrecoderConfig:
    name: str = "zf-tsd"
    rho: Optional[float] = None    # None: scale-aware default, max(100, K*m_s/5)
    admm_max_iter: int = 30
    apg_max_iter: int = 50
    ftol: float = 1e-3
    xtol: float = 1e-3
    apg_tol: float = 1e-6


@dataclass(frozen=True)
class RunConfig:
    trials: int = 100
    blocks_per_trial: int = 10
    seed: int = 12345
    self_check: bool = True
    scatter_subcarrier: int = 0
    spectrum_angles_deg: Tuple[float, ...] = (0.0, 5.0, 10.0, 20.0, 30.0)
    spectrum_frames: int = 200
    spectrum_samples: int = 512


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    pa: PaModel = field(default_factory=lambda: PaModel.modified_rapp(
        gain=16.0, r_max=0.1187, phi=1.1, zeta=4.0, b=-345.0, c=0.17))
    chi: Optional[float] = None            # PA input disk radius; default r_max
    scheme: str = "auto"
    precoder: PrecoderConfig = field(default_factory=PrecoderConfig)
    sigma_v2: Tuple[float, ...] = (1e-4,)
    run: RunConfig = field(default_factory=RunConfig)

    @property
    def chi_value(self) -> float:
        return self.pa.r_max if self.chi is None else self.chi


def _take(section: dict, section_name: str, defaults) -> dict:
    """Filter a config section against a dataclass's fields."""
    allowed = set(defaults.__dataclass_fields__)
    bad = set(section) - allowed
    if bad:
        raise ConfigError(f"unknown key(s) in section '{section_name}': {sorted(bad)}")
    return section


def _pa_from_dict(block: dict) -> PaModel:
    allowed = {"kind", "A", "r_max", "phi", "zeta", "B", "C"}
    bad = set(block) - allowed
    if bad:
        raise ConfigError(f"unknown key(s) in section 'pa': {sorted(bad)}")
    kind = block.get("kind", "modified_rapp")
    try:
        return PaModel(
            kind=kind,
            gain=float(block.get("A", 16.0)),
            r_max=float(block.get("r_max", 0.1187)),
            phi=float(block.get("phi", 1.1)),
            zeta=float(block.get("zeta", 4.0)),
            b=float(block.get("B", -345.0)),
            c=float(block.get("C", 0.17)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid 'pa' section: {exc}") from exc


def _noise_from_dict(block: dict) -> Tuple[float, ...]:
    if "sigma_v2" in block and "inv_sigma_v2_db" in block:
        raise ConfigError("section 'noise': give either sigma_v2 or inv_sigma_v2_db, not both")
    if "sigma_v2" in block:
        values = [float(v) for v in block["sigma_v2"]]
    elif "inv_sigma_v2_db" in block:
        values = [10.0 ** (-float(db) / 10.0) for db in block["inv_sigma_v2_db"]]
    else:
        raise ConfigError("section 'noise' needs sigma_v2 or inv_sigma_v2_db")
    bad = set(block) - {"sigma_v2", "inv_sigma_v2_db"}
    if bad:
        raise ConfigError(f"unknown key(s) in section 'noise': {sorted(bad)}")
    if any(v < 0 for v in values):
        raise ConfigError("noise variances must be nonnegative")
    return tuple(values)


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a parsed JSON document."""
    known = {"system", "pa", "chi", "scheme", "precoder", "noise", "run"}
    bad = set(doc) - known
    if bad:
        raise ConfigError(f"unknown top-level key(s): {sorted(bad)}")
    try:
        system = SystemConfig(**_take(dict(doc.get("system", {})), "system", SystemConfig))
        precoder = PrecoderConfig(**_take(dict(doc.get("precoder", {})), "precoder", PrecoderConfig))
        run_sec = dict(doc.get("run", {}))
        if "spectrum_angles_deg" in run_sec:
            run_sec["spectrum_angles_deg"] = tuple(run_sec["spectrum_angles_deg"])
        run = RunConfig(**_take(run_sec, "run", RunConfig))
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    pa = _pa_from_dict(dict(doc.get("pa", {})))
    scheme = doc.get("scheme", "auto")
    if scheme not in SCHEME_NAMES:
        raise ConfigError(f"'scheme' must be one of {SCHEME_NAMES}, got {scheme!r}")
    if precoder.name not in PRECODER_NAMES:
        raise ConfigError(f"precoder.name must be one of {PRECODER_NAMES}, got {precoder.name!r}")
    noise = _noise_from_dict(dict(doc.get("noise", {"sigma_v2": [1e-4]})))
    chi = doc.get("chi")
    cfg = ExperimentConfig(
        system=system, pa=pa, chi=None if chi is None else float(chi),
        scheme=scheme, precoder=precoder, sigma_v2=noise, run=run,
    )
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    sys_ = cfg.system
    if sys_.k > sys_.n:
        raise ConfigError("system: need k <= n for zero-forcing feasibility")
    if sys_.k < 1 or sys_.n < 1:
        raise ConfigError("system: n and k must be positive")
    if not (0 < sys_.d_over_lambda <= 0.5):
        raise ConfigError("system: d_over_lambda must lie in (0, 1/2]")
    if sys_.qam_d < 1:
        raise ConfigError("system: qam_d must be >= 1")
    if sys_.delay_max_ts < sys_.delay_min_ts or sys_.delay_min_ts < 0:
        raise ConfigError("system: delay range must satisfy 0 <= min <= max")
    if sys_.delay_max_ts + sys_.rrc_span_ts > sys_.m_cp:
        raise ConfigError("system: m_cp must cover delay_max_ts + rrc_span_ts")
    try:
        sys_.ofdm
    except ValueError as exc:
        raise ConfigError(f"system: {exc}") from exc
    if cfg.run.trials < 1 or cfg.run.blocks_per_trial < 1:
        raise ConfigError("run: trials and blocks_per_trial must be >= 1")
    if cfg.chi_value <= 0:
        raise ConfigError("chi must be positive")


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON experiment configuration file."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: top level must be a JSON object")
    return config_from_dict(doc)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Round-trippable plain-dict snapshot of a configuration (for manifests)."""
    return {
        "system": asdict(cfg.system),
        "pa": {
            "kind": cfg.pa.kind, "A": cfg.pa.gain, "r_max": cfg.pa.r_max,
            "phi": cfg.pa.phi, "zeta": cfg.pa.zeta, "B": cfg.pa.b, "C": cfg.pa.c,
        },
        "chi": cfg.chi,
        "scheme": cfg.scheme,
        "precoder": asdict(cfg.precoder),
        "noise": {"sigma_v2": list(cfg.sigma_v2)},
        "run": {**asdict(cfg.run),
                "spectrum_angles_deg": list(cfg.run.spectrum_angles_deg)},
    }
