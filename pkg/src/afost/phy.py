"""AFOST physical layer.

N senders broadcast concurrently, then N-1 relays amplify and forward what
they overheard, one per slot. Each destination stacks the N observations
and separates the superimposed packets with an MMSE receiver and ordered
successive interference cancellation (OSIC).

The detector works on batches of phases; :func:`osic_detect` and
:func:`mmse_weights` are single-phase views on the same code.
"""

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .channel import (ChannelRealization, EffectiveChannel, PowerConfig,
                      assemble_effective_channel, default_relay_order)

BITS_PER_SYMBOL = 2
_SQRT_HALF = np.sqrt(0.5)
# 2-bit Gray labels, index = 2*b0 + b1
QPSK_POINTS = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) * _SQRT_HALF


class DegenerateChannelError(Exception):
    """The effective channel is singular to working precision."""


@dataclass
class SymbolBlock:
    sender_id: int
    symbols: np.ndarray
    bits: np.ndarray

    def __len__(self):
        return self.symbols.size


@dataclass
class ReceivedBundle:
    y: np.ndarray                 # (rows, L)
    eff: EffectiveChannel
    dest_id: int
    tx_power: float
    active: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.y.shape[0] != self.eff.matrix.shape[0]:
            raise ValueError("received rows do not match the effective channel")


@dataclass
class DetectionResult:
    symbol_estimates: np.ndarray  # (N, L), sender order
    detection_order: list
    post_sinr: np.ndarray
    failed: bool = False


@dataclass
class RateEstimate:
    avg_rate: float
    throughput: float
    n_realizations: int
    per_sample: np.ndarray = field(default=None, repr=False)


# -- modulation ---------------------------------------------------------------

def modulate(bits, sender_id: int = 0) -> SymbolBlock:
    """Gray-mapped QPSK with unit average symbol energy."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size % BITS_PER_SYMBOL:
        raise ValueError(f"bit count {bits.size} is not a multiple of {BITS_PER_SYMBOL}")
    pairs = bits.reshape(-1, 2)
    symbols = ((1 - 2 * pairs[:, 0].astype(float)) + 1j * (1 - 2 * pairs[:, 1].astype(float))) * _SQRT_HALF
    return SymbolBlock(sender_id=sender_id, symbols=symbols, bits=bits)


def slice_qpsk(z: np.ndarray) -> np.ndarray:
    """Nearest QPSK point, componentwise."""
    z = np.asarray(z)
    out = np.empty(z.shape, dtype=complex)
    out.real = np.where(z.real >= 0, _SQRT_HALF, -_SQRT_HALF)
    out.imag = np.where(z.imag >= 0, _SQRT_HALF, -_SQRT_HALF)
    return out


def demodulate(symbols: np.ndarray) -> np.ndarray:
    """Hard-decision Gray demapping back to bits."""
    s = np.asarray(symbols).ravel()
    out = np.empty((s.size, 2), dtype=np.uint8)
    out[:, 0] = s.real < 0
    out[:, 1] = s.imag < 0
    return out.ravel()


def bytes_to_bits(data) -> np.ndarray:
    return np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8)
                         if not isinstance(data, np.ndarray) else data.astype(np.uint8))


# -- signal synthesis ---------------------------------------------------------

def _stack(blocks: Sequence[SymbolBlock]) -> np.ndarray:
    lengths = {len(b) for b in blocks}
    if len(lengths) != 1:
        raise ValueError(f"concurrent blocks must have equal length, got {sorted(lengths)}")
    return np.stack([b.symbols for b in blocks])


def _cnoise(rng, shape, variance) -> np.ndarray:
    if variance == 0:
        return np.zeros(shape, dtype=complex)
    shape = (shape,) if np.ndim(shape) == 0 else tuple(shape)
    w = rng.standard_normal(shape + (2,))
    w *= np.sqrt(variance / 2)
    return w.view(complex)[..., 0]


def relay_receive(real: ChannelRealization, blocks: Sequence[SymbolBlock], relay: int,
                  rng: np.random.Generator, tx_power: float = 1.0) -> np.ndarray:
    """Superimposed signal overheard by a relay during the broadcast slot."""
    x = _stack(blocks)
    senders = [b.sender_id for b in blocks]
    h = real.h_sender_relay[senders, relay]
    return np.sqrt(tx_power) * (h @ x) + _cnoise(rng, x.shape[1], real.noise_variance)


def relay_forward(relay_rx: np.ndarray, g: float) -> np.ndarray:
    """Amplify-and-forward: scale the stored observation, noise included."""
    return g * np.asarray(relay_rx)


def run_communication_phase(real: ChannelRealization, pc: PowerConfig,
                            blocks: Sequence[SymbolBlock], dest: int,
                            rng: np.random.Generator,
                            relay_order: Optional[Sequence[int]] = None,
                            relay_rx: Optional[dict] = None) -> ReceivedBundle:
    """Received observations at ``dest`` over one broadcast and N-1 forwarding slots.

    ``relay_rx`` maps relay index to an already simulated relay observation so
    several destinations can share the same relay noise; missing entries are
    simulated (and added to the dict).
    """
    n = real.n_senders
    if len(blocks) != n:
        raise ValueError(f"expected {n} blocks, one per sender")
    if relay_order is None:
        relay_order = default_relay_order(n, real.n_relays)
    x = _stack(blocks)
    p = pc.tx_power
    rows = [np.sqrt(p) * (real.h_sender_dest[:, dest] @ x)
            + _cnoise(rng, x.shape[1], real.noise_variance)]
    relay_rx = {} if relay_rx is None else relay_rx
    for r in relay_order:
        if r not in relay_rx:
            relay_rx[r] = relay_receive(real, blocks, r, rng, p)
        fwd = relay_forward(relay_rx[r], pc.relay_gains[r])
        rows.append(real.h_relay_dest[r, dest] * fwd
                    + _cnoise(rng, x.shape[1], real.noise_variance))
    eff = assemble_effective_channel(real, pc, dest, relay_order)
    active = np.array([np.any(b.symbols != 0) for b in blocks])
    return ReceivedBundle(y=np.vstack(rows), eff=eff, dest_id=dest, tx_power=p, active=active)


# -- MMSE / OSIC --------------------------------------------------------------

def _equalizers(a: np.ndarray, noise: np.ndarray, mask: np.ndarray) -> tuple:
    """MMSE (or ZF when noiseless) equalizers for a batch of channels.

    a: (B, R, N) composite channels, noise: (B, R) row noise variances,
    mask: (B, N) columns still to be detected. Returns the (B, N, R)
    equalizer applied to raw observations and the (B, N) post-MMSE SINR.
    """
    am = a * mask[:, None, :]
    if np.all(noise > 0):
        inv_sd = 1.0 / np.sqrt(noise)
        aw = am * inv_sd[:, :, None]
        awh = np.conj(np.swapaxes(aw, 1, 2))
        gram = awh @ aw + np.eye(a.shape[2])
        w = np.linalg.solve(gram, awh) * inv_sd[:, None, :]
        err = np.real(np.diagonal(np.linalg.inv(gram), axis1=1, axis2=2))
        with np.errstate(divide="ignore"):
            sinr = np.where(mask, 1.0 / err - 1.0, 0.0)
        return w, sinr
    if np.any(noise > 0):
        raise ValueError("mixed noiseless and noisy rows are not supported")
    w = np.linalg.pinv(am)
    return w, np.where(mask, np.inf, 0.0)


def degenerate_mask(a: np.ndarray, active: np.ndarray) -> np.ndarray:
    """Phases whose active columns are singular to working precision."""
    sv = np.linalg.svd(a * active[:, None, :], compute_uv=False)
    n_act = active.sum(axis=1)
    rank_idx = np.clip(n_act - 1, 0, sv.shape[1] - 1)
    smallest = sv[np.arange(len(sv)), rank_idx]
    too_many = n_act > sv.shape[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = smallest / sv[:, 0]
    bad = too_many | ~(ratio > np.finfo(float).eps)
    return bad & (n_act > 0)


def detection_order(a: np.ndarray, active: np.ndarray, order: str = "power") -> np.ndarray:
    """Per-phase stream order: strongest received column first, ties by id."""
    b, _, n = a.shape
    if order == "natural":
        return np.tile(np.arange(n), (b, 1))
    if order != "power":
        raise ValueError(f"unknown order {order!r}")
    power = np.sum(np.abs(a) ** 2, axis=1)
    power = np.where(active, power, -np.inf)
    return np.argsort(-power, axis=1, kind="stable")


def osic_detect_batch(a: np.ndarray, noise: np.ndarray, y: np.ndarray,
                      active: Optional[np.ndarray] = None, order: str = "power",
                      cancel: bool = True, targets: Optional[np.ndarray] = None):
    """MMSE-OSIC over a batch of phases.

    Parameters
    ----------
    a : (B, R, N) composite channels ``sqrt(P) * G @ H``.
    noise : (B, R) per-row noise variances.
    y : (B, R, L) observations.
    active : (B, N) senders on the air; idle columns are never detected.
    order : "power" for OSIC, "natural" for SIC in sender order.
    cancel : False gives plain linear MMSE (no cancellation).
    targets : optional (B,) sender index wanted per phase; detection stops
        once every target has been detected, leaving later streams zero.

    Returns
    -------
    estimates (B, N, L), order (B, N), post_sinr (B, N), failed (B,)
    """
    a = np.asarray(a, dtype=complex)
    y = np.array(y, dtype=complex)
    bsz, _, n = a.shape
    if active is None:
        active = np.ones((bsz, n), dtype=bool)
    active = np.asarray(active, dtype=bool)
    failed = degenerate_mask(a, active)
    perm = detection_order(a, active, order)
    est = np.zeros((bsz, n, y.shape[2]), dtype=complex)
    sinr = np.zeros((bsz, n))
    remaining = active.copy()
    rows = np.arange(bsz)
    done = np.zeros(bsz, dtype=bool)
    if targets is not None:
        targets = np.asarray(targets)
        done = ~active[rows, targets]
    for step in range(n):
        idx = perm[:, step]
        live = remaining[rows, idx]
        if not live.any():
            continue
        w, s = _equalizers(a, noise, remaining)
        z = np.einsum("br,brl->bl", w[rows, idx], y)
        xhat = slice_qpsk(z)
        xhat[~live] = 0
        est[rows[live], idx[live]] = xhat[live]
        sinr[rows[live], idx[live]] = s[rows[live], idx[live]]
        if cancel:
            y -= a[rows, :, idx][:, :, None] * xhat[:, None, :]
            remaining[rows, idx] = False
        if targets is not None:
            done |= live & (idx == targets)
            if done.all():
                break
    return est, perm, sinr, failed


def mmse_weights(eff: EffectiveChannel, tx_power: float = 1.0) -> np.ndarray:
    """MMSE equalizer for the noise-whitened stacked channel.

    With whitened channel ``A = diag(noise)^-1/2 sqrt(P) G H`` this is
    ``(A^H A + I)^-1 A^H diag(noise)^-1/2``, applied to raw observations;
    it tends to the zero-forcing pseudo-inverse as the noise vanishes.

    Raises
    ------
    DegenerateChannelError
        The channel is singular to working precision.
    """
    a = eff.composite(tx_power)[None]
    mask = np.ones((1, a.shape[2]), dtype=bool)
    if degenerate_mask(a, mask)[0]:
        raise DegenerateChannelError("effective channel is singular")
    w, _ = _equalizers(a, np.asarray(eff.noise_scaling, dtype=float)[None], mask)
    return w[0]


def osic_detect(bundle: ReceivedBundle, order: str = "power") -> DetectionResult:
    a = bundle.eff.composite(bundle.tx_power)
    n = a.shape[1]
    active = np.ones(n, dtype=bool) if bundle.active is None else bundle.active
    est, perm, sinr, failed = osic_detect_batch(
        a[None], np.asarray(bundle.eff.noise_scaling)[None], bundle.y[None],
        active[None], order=order)
    if failed[0]:
        return DetectionResult(symbol_estimates=np.full((n, bundle.y.shape[1]), np.nan + 0j),
                               detection_order=[int(i) for i in perm[0]],
                               post_sinr=np.zeros(n), failed=True)
    return DetectionResult(symbol_estimates=est[0], detection_order=[int(i) for i in perm[0]],
                           post_sinr=sinr[0])


# -- rate estimate ------------------------------------------------------------

def post_mmse_sinr(eff: EffectiveChannel, tx_power: float) -> np.ndarray:
    """Linear MMSE output SINR of every stream (noise-whitened)."""
    a = eff.composite(tx_power)
    mask = np.ones((1, a.shape[1]), dtype=bool)
    if np.any(np.asarray(eff.noise_scaling) <= 0):
        raise ValueError("rate estimate needs positive noise")
    _, sinr = _equalizers(a[None], np.asarray(eff.noise_scaling, dtype=float)[None], mask)
    return sinr[0]


def estimate_rate(reals: Iterable[ChannelRealization], tx_power: float, sender: int,
                  dest: int, n_samples: int = 1000, bandwidth_hz: float = 20e6,
                  relay_order: Optional[Sequence[int]] = None) -> RateEstimate:
    """Average achievable rate of ``sender -> dest`` under AFOST.

    Takes the first ``n_samples`` realizations, averages
    ``log2(1 + SINR)`` of the post-MMSE stream and converts it to a
    per-flow throughput: each flow owns one of the N slots of a phase.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rates = []
    n_senders = None
    for real in reals:
        n_senders = real.n_senders
        pc = PowerConfig.from_realization(real, tx_power)
        eff = assemble_effective_channel(real, pc, dest, relay_order)
        rates.append(np.log2(1.0 + post_mmse_sinr(eff, tx_power)[sender]))
        if len(rates) == n_samples:
            break
    if len(rates) < n_samples:
        raise ValueError(f"only {len(rates)} realizations supplied, need {n_samples}")
    rates = np.asarray(rates)
    avg = float(rates.mean())
    return RateEstimate(avg_rate=avg, throughput=avg * bandwidth_hz / n_senders,
                        n_realizations=n_samples, per_sample=rates)
