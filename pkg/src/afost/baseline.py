"""Direct (DIR) and orthogonal cooperative amplify-and-forward (COOP) links.

COOP sends each packet twice: the sender in one slot, a relay forwarding
its amplified observation in the next. The destination combines both
copies with maximal-ratio combining.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import ChannelRealization, PowerConfig, compute_relay_gain
from .phy import DetectionResult, SymbolBlock, _cnoise, slice_qpsk

SLOTS_PER_PACKET = {"DIR": 1, "COOP": 2}


@dataclass
class BaselineRate:
    mode: str
    avg_rate: float
    throughput: float


def dir_rate(h: complex, p: float, noise_variance: float,
             bandwidth_hz: float = 20e6, slot_share: float = 1.0) -> BaselineRate:
    if noise_variance <= 0:
        raise ValueError("noise_variance must be positive")
    rate = float(np.log2(1.0 + p * abs(h) ** 2 / noise_variance))
    return BaselineRate("DIR", rate, rate * bandwidth_hz * slot_share)


def af_snr(snr_direct, snr_sr, snr_rd):
    """Combined SNR of direct plus amplify-and-forward relayed copy."""
    snr_direct, snr_sr, snr_rd = (np.asarray(v, dtype=float) for v in (snr_direct, snr_sr, snr_rd))
    denom = snr_sr + snr_rd + 1.0
    return snr_direct + snr_sr * snr_rd / denom


def coop_af_rate(real: ChannelRealization, pc: Optional[PowerConfig], sender: int, relay: int,
                 dest: int, bandwidth_hz: float = 20e6, slot_share: float = 1.0) -> BaselineRate:
    """Half-duplex AF rate ``0.5 * log2(1 + SNR_d + SNR_sr SNR_rd / (SNR_sr + SNR_rd + 1))``."""
    s2 = real.noise_variance
    if s2 <= 0:
        raise ValueError("noise_variance must be positive")
    p = pc.tx_power if pc is not None else 1.0
    snr = af_snr(p * abs(real.h_sender_dest[sender, dest]) ** 2 / s2,
                 p * abs(real.h_sender_relay[sender, relay]) ** 2 / s2,
                 p * abs(real.h_relay_dest[relay, dest]) ** 2 / s2)
    rate = float(0.5 * np.log2(1.0 + snr))
    return BaselineRate("COOP", rate, rate * bandwidth_hz * slot_share)


def mrc_detect_batch(h_d, h_sr, h_rd, p, noise_variance, y_d, y_r, use_relay=True):
    """Combine a direct and a relayed copy of each packet, then slice.

    All gain arguments are length-B arrays; ``y_d`` and ``y_r`` are (B, L).
    Returns hard decisions (B, L) and the post-combining SNR (B,).
    """
    h_d, h_sr, h_rd = (np.asarray(v, dtype=complex) for v in (h_d, h_sr, h_rd))
    g = np.sqrt(p / (p * np.abs(h_sr) ** 2 + noise_variance))
    a_d = np.sqrt(p) * h_d
    a_r = np.sqrt(p) * g * h_rd * h_sr
    if noise_variance > 0:
        nu_d = np.full(h_d.shape, float(noise_variance))
        nu_r = noise_variance * (1.0 + g ** 2 * np.abs(h_rd) ** 2)
    else:
        nu_d = np.ones(h_d.shape)
        nu_r = np.ones(h_d.shape)
    if not use_relay:
        a_r = np.zeros_like(a_r)
    num = (np.conj(a_d) / nu_d)[:, None] * y_d + (np.conj(a_r) / nu_r)[:, None] * y_r
    energy = np.abs(a_d) ** 2 / nu_d + np.abs(a_r) ** 2 / nu_r
    with np.errstate(divide="ignore", invalid="ignore"):
        z = num / energy[:, None]
    snr = energy if noise_variance > 0 else np.full(h_d.shape, np.inf)
    return slice_qpsk(np.nan_to_num(z)), snr


def coop_transmit(real: ChannelRealization, pc: PowerConfig, block: SymbolBlock, relay: int,
                  dest: int, rng: np.random.Generator, use_relay: bool = True) -> DetectionResult:
    """Send one packet over the direct slot and the relay slot, combine with MRC."""
    n = block.sender_id
    p, s2 = pc.tx_power, real.noise_variance
    x = block.symbols
    h_d = real.h_sender_dest[n, dest]
    h_sr = real.h_sender_relay[n, relay]
    h_rd = real.h_relay_dest[relay, dest]
    g = compute_relay_gain(p, [abs(h_sr) ** 2], s2)
    y_d = np.sqrt(p) * h_d * x + _cnoise(rng, x.size, s2)
    y_relay = np.sqrt(p) * h_sr * x + _cnoise(rng, x.size, s2)
    y_r = h_rd * g * y_relay + _cnoise(rng, x.size, s2)
    est, snr = mrc_detect_batch([h_d], [h_sr], [h_rd], p, s2, y_d[None], y_r[None], use_relay)
    return DetectionResult(symbol_estimates=est, detection_order=[n], post_sinr=snr)


def dir_transmit(real: ChannelRealization, p: float, block: SymbolBlock, dest: int,
                 rng: np.random.Generator) -> DetectionResult:
    """Single-slot direct transmission with matched-filter detection."""
    n = block.sender_id
    h = real.h_sender_dest[n, dest]
    y = np.sqrt(p) * h * block.symbols + _cnoise(rng, len(block), real.noise_variance)
    z = y * np.conj(h) / max(abs(h) ** 2, np.finfo(float).tiny)
    snr = p * abs(h) ** 2 / real.noise_variance if real.noise_variance > 0 else np.inf
    return DetectionResult(symbol_estimates=slice_qpsk(z)[None], detection_order=[n],
                           post_sinr=np.array([snr]))
