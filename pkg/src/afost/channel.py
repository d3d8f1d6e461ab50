"""Block-fading channel realizations and the cooperative effective channel.

All links are flat Rayleigh: each coefficient is an independent unit-variance
circularly-symmetric complex Gaussian, so the mean link SNR equals
``P / noise_variance``. One realization holds for a whole communication
phase.
"""

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class ChannelRealization:
    """Complex gains for one communication phase.

    Attributes
    ----------
    h_sender_relay : ndarray, shape (N, M)
    h_sender_dest : ndarray, shape (N, K)
    h_relay_dest : ndarray, shape (M, K)
    noise_variance : float
        AWGN variance at every receiving node, in watts.
    """
    h_sender_relay: np.ndarray
    h_sender_dest: np.ndarray
    h_relay_dest: np.ndarray
    noise_variance: float

    @property
    def n_senders(self) -> int:
        return self.h_sender_dest.shape[0]

    @property
    def n_relays(self) -> int:
        return self.h_relay_dest.shape[0]

    @property
    def n_dests(self) -> int:
        return self.h_sender_dest.shape[1]

    def with_noise(self, noise_variance: float) -> "ChannelRealization":
        return replace(self, noise_variance=noise_variance)


@dataclass(frozen=True)
class PowerConfig:
    tx_power: float
    relay_gains: np.ndarray

    @classmethod
    def from_realization(cls, real: ChannelRealization, tx_power: float,
                         active: Optional[Sequence[bool]] = None) -> "PowerConfig":
        """Relay gains for every relay given which senders are on the air."""
        gamma = np.abs(real.h_sender_relay) ** 2
        if active is not None:
            gamma = gamma[np.asarray(active, dtype=bool)]
        gains = np.array([compute_relay_gain(tx_power, gamma[:, m], real.noise_variance)
                          for m in range(real.n_relays)])
        return cls(tx_power=tx_power, relay_gains=gains)


@dataclass(frozen=True)
class EffectiveChannel:
    """Stacked channel seen by one destination over a communication phase.

    ``matrix`` row 0 holds the direct sender gains; row ``i >= 1`` holds
    ``h_sender_relay[:, r] * h_relay_dest[r, k]`` for the relay ``r`` that
    forwards in phase ``i``. ``gain_diag`` is ``[1, g_r1, g_r2, ...]`` and
    ``noise_scaling`` the per-row noise variance, so that
    ``y = sqrt(P) * diag(gain_diag) @ matrix @ x + w``.
    """
    matrix: np.ndarray
    gain_diag: np.ndarray
    noise_scaling: np.ndarray

    def composite(self, tx_power: float) -> np.ndarray:
        """The matrix mapping unit-energy symbols to received samples."""
        return np.sqrt(tx_power) * self.gain_diag[:, None] * self.matrix


def _crandn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def draw_realization(n_senders: int, n_relays: int, n_dests: int,
                     noise_variance: float, rng_seed=None) -> ChannelRealization:
    """Draw an independent Rayleigh block-fading realization.

    ``rng_seed`` may be an int, a seed sequence entropy list or a
    ``numpy.random.Generator``.
    """
    if min(n_senders, n_dests) < 1 or n_relays < 0:
        raise ValueError("need at least one sender and one destination")
    if n_relays == 0 and n_senders > 1:
        raise ValueError("relays required for more than one sender")
    if noise_variance < 0:
        raise ValueError("noise_variance must be non-negative")
    rng = np.random.default_rng(rng_seed)
    return ChannelRealization(
        h_sender_relay=_crandn(rng, (n_senders, n_relays)),
        h_sender_dest=_crandn(rng, (n_senders, n_dests)),
        h_relay_dest=_crandn(rng, (n_relays, n_dests)),
        noise_variance=float(noise_variance),
    )


def with_csi_error(real: ChannelRealization, error_variance: float,
                   rng: np.random.Generator) -> ChannelRealization:
    """Channel estimate with additive complex Gaussian error on every gain."""
    if error_variance <= 0:
        return real
    s = np.sqrt(error_variance)
    return replace(
        real,
        h_sender_relay=real.h_sender_relay + s * _crandn(rng, real.h_sender_relay.shape),
        h_sender_dest=real.h_sender_dest + s * _crandn(rng, real.h_sender_dest.shape),
        h_relay_dest=real.h_relay_dest + s * _crandn(rng, real.h_relay_dest.shape),
    )


def compute_relay_gain(p: float, gammas_to_relay, noise_variance: float) -> float:
    """Amplification keeping the relay's transmit power at ``p``."""
    gammas = np.asarray(gammas_to_relay, dtype=float)
    if p <= 0 or np.any(gammas < 0):
        raise ValueError("need p > 0 and non-negative channel powers")
    denom = p * gammas.sum() + noise_variance
    if denom <= 0:
        raise ValueError("relay receives neither signal nor noise")
    return float(np.sqrt(p / denom))


def default_relay_order(n_senders: int, n_relays: int, single_relay: bool = False):
    """Relay used in each of the ``n_senders - 1`` forwarding phases."""
    if single_relay:
        return [0] * (n_senders - 1) if n_senders > 1 else []
    if n_relays < n_senders - 1:
        raise ValueError(f"AFOST needs M >= N-1 relays, got N={n_senders}, M={n_relays}")
    return list(range(n_senders - 1))


def assemble_effective_channel(real: ChannelRealization, pc: PowerConfig, dest: int,
                               relay_order: Optional[Sequence[int]] = None) -> EffectiveChannel:
    n = real.n_senders
    if relay_order is None:
        relay_order = default_relay_order(n, real.n_relays)
    if len(relay_order) != n - 1:
        raise ValueError(f"need {n - 1} forwarding phases, got {len(relay_order)}")
    if not 0 <= dest < real.n_dests:
        raise ValueError(f"destination {dest} out of range")
    if len(pc.relay_gains) != real.n_relays:
        raise ValueError("power config does not match the realization's relay count")
    if any(not 0 <= r < real.n_relays for r in relay_order):
        raise ValueError("relay index out of range")
    order = np.asarray(relay_order, dtype=int)
    h_rd = real.h_relay_dest[order, dest]
    matrix = np.vstack([real.h_sender_dest[:, dest][None, :],
                        real.h_sender_relay[:, order].T * h_rd[:, None]])
    g = np.asarray(pc.relay_gains, dtype=float)[order]
    s2 = real.noise_variance
    noise = np.concatenate([[s2], g ** 2 * np.abs(h_rd) ** 2 * s2 + s2])
    return EffectiveChannel(matrix=matrix, gain_diag=np.concatenate([[1.0], g]),
                            noise_scaling=noise)
