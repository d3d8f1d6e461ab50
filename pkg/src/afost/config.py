"""Experiment configuration and its INI-style file format.

A config file has one ``[experiment]`` section whose keys mirror the
fields of :class:`ExperimentConfig`::

    [experiment]
    phy_mode = AFOST
    scheduler = Opt
    n_senders = 2
    n_relays = 1
    snr_db_range = 0, 5, 10, 15, 20, 25, 30
    fec = 19,10
    bitrate = 203000
    fps = 30
    gop_size = 32
    startup_delay = 2
    n_trials = 200
"""

import configparser
from dataclasses import dataclass, fields, replace
from typing import Tuple

from .fec import FecConfig
from .media import StreamConfig

PHY_MODES = ("AFOST", "COOP", "DIR")
SCHEDULERS = ("Opt", "NoOpt")

_STREAM_KEYS = {"bitrate", "fps", "gop_size", "pattern", "startup_delay", "jitter"}


@dataclass(frozen=True)
class ExperimentConfig:
    phy_mode: str = "AFOST"
    scheduler: str = "NoOpt"
    n_senders: int = 2
    n_relays: int = 1
    snr_db_range: Tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    fec: FecConfig = FecConfig(19, 10)
    stream: StreamConfig = StreamConfig()
    n_trials: int = 200
    bandwidth_hz: float = 20e6
    base_seed: int = 0
    noise_variance: float = 1e-9
    n_gops: int = 10
    # TDMA slot length; one slot carries one FEC segment
    slot_duration_s: float = 2e-3
    n_rate_samples: int = 1000
    drop_expired: bool = True
    reset_lambda: bool = False
    single_relay: bool = False
    coop_mode_selection: bool = False
    csi_error_variance: float = 0.0
    verify_payload: bool = True
    n_workers: int = 1
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "snr_db_range", tuple(float(s) for s in self.snr_db_range))
        self.validate()

    def validate(self):
        if self.phy_mode not in PHY_MODES:
            raise ValueError(f"phy_mode must be one of {PHY_MODES}")
        if self.scheduler not in SCHEDULERS:
            raise ValueError(f"scheduler must be one of {SCHEDULERS}")
        if self.n_senders < 1:
            raise ValueError("need at least one sender")
        if self.phy_mode == "AFOST":
            need = min(1, self.n_senders - 1) if self.single_relay else self.n_senders - 1
            if self.n_relays < need:
                raise ValueError(f"AFOST needs M >= N-1 relays (N={self.n_senders}, "
                                 f"M={self.n_relays})")
        if self.phy_mode == "COOP" and self.n_relays < 1:
            raise ValueError("COOP needs at least one relay")
        if self.n_relays < 0:
            raise ValueError("n_relays must be non-negative")
        if self.n_trials < 1 or self.n_gops < 1:
            raise ValueError("n_trials and n_gops must be >= 1")
        if not self.snr_db_range:
            raise ValueError("empty SNR sweep")
        if self.slot_duration_s <= 0 or self.bandwidth_hz <= 0 or self.noise_variance < 0:
            raise ValueError("slot duration and bandwidth must be positive, noise non-negative")
        if self.n_workers < 1:
            raise ValueError("n_workers must be >= 1")

    @property
    def name(self) -> str:
        return self.label or f"{self.phy_mode}-{self.scheduler}-{self.fec}"

    @property
    def segment_symbols(self) -> int:
        return self.fec.segment_bytes * 8 // 2


def snr_range(lo: float, hi: float, step: float) -> Tuple[float, ...]:
    if step <= 0 or hi < lo:
        raise ValueError("need snr_min <= snr_max and a positive step")
    n = int(round((hi - lo) / step)) + 1
    return tuple(lo + i * step for i in range(n))


def _parse_bool(v: str) -> bool:
    v = v.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def parse_fec(text: str, segment_bytes: int = 188) -> FecConfig:
    parts = [p for p in text.replace("RS(", "").replace(")", "").split(",") if p.strip()]
    if len(parts) != 2:
        raise ValueError(f"FEC must be given as n,k; got {text!r}")
    return FecConfig(int(parts[0]), int(parts[1]), segment_bytes)


def apply_overrides(cfg: ExperimentConfig, values: dict) -> ExperimentConfig:
    """Return ``cfg`` with string-valued overrides applied (file or CLI)."""
    kinds = {f.name: f.type for f in fields(ExperimentConfig)}
    direct, stream = {}, {}
    seg = int(values.get("segment_bytes", cfg.fec.segment_bytes))
    snr_parts = {k: values[k] for k in ("snr_min", "snr_max", "snr_step") if k in values}
    for key, raw in values.items():
        if raw is None or key in ("snr_min", "snr_max", "snr_step", "segment_bytes"):
            continue
        raw = str(raw)
        if key in _STREAM_KEYS:
            stream[key] = raw
        elif key == "fec":
            direct["fec"] = parse_fec(raw, seg)
        elif key == "snr_db_range":
            direct[key] = tuple(float(s) for s in raw.replace(";", ",").split(",") if s.strip())
        elif key in kinds:
            kind = kinds[key]
            if kind in (bool, "bool"):
                direct[key] = _parse_bool(raw)
            elif kind in (int, "int"):
                direct[key] = int(raw)
            elif kind in (float, "float"):
                direct[key] = float(raw)
            else:
                direct[key] = raw.strip()
        else:
            raise ValueError(f"unknown config key {key!r}")
    if "fec" not in direct and seg != cfg.fec.segment_bytes:
        direct["fec"] = FecConfig(cfg.fec.n_total, cfg.fec.k_data, seg)
    if snr_parts:
        lo = float(snr_parts.get("snr_min", cfg.snr_db_range[0]))
        hi = float(snr_parts.get("snr_max", cfg.snr_db_range[-1]))
        step = float(snr_parts.get("snr_step", 5.0))
        direct["snr_db_range"] = snr_range(lo, hi, step)
    if stream:
        conv = {"gop_size": int, "pattern": str}
        direct["stream"] = replace(cfg.stream, **{k: conv.get(k, float)(v.strip())
                                                  for k, v in stream.items()})
    return replace(cfg, **direct)


def load_config(path, base: ExperimentConfig = None) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    if not parser.has_section("experiment"):
        raise ValueError(f"{path}: missing [experiment] section")
    return apply_overrides(base or ExperimentConfig(), dict(parser.items("experiment")))
