"""Rayleigh channels, relay gains and the stacked channel a destination sees.

Run: python demos/01_channels_and_relays.py
"""
import numpy as np

from afost.channel import PowerConfig, assemble_effective_channel, draw_realization
from afost.phy import modulate, relay_receive

np.set_printoptions(precision=3, suppress=True)

# Two senders, one relay, two destinations. Noise variance is fixed and
# the transmit power sets the SNR.
noise = 1e-9
p = noise * 10 ** (20 / 10)  # 20 dB
real = draw_realization(n_senders=2, n_relays=1, n_dests=2, noise_variance=noise, rng_seed=7)
print("sender -> relay gains:\n", real.h_sender_relay)
print("sender -> destination gains:\n", real.h_sender_dest)

# The relay scales what it heard so that it transmits with the same power P.
pc = PowerConfig.from_realization(real, p)
print("\nrelay gain g =", pc.relay_gains)

rng = np.random.default_rng(0)
blocks = [modulate(rng.integers(0, 2, 20000), i) for i in range(2)]
y_relay = relay_receive(real, blocks, relay=0, rng=rng, tx_power=p)
print("relay output power / P =", np.mean(np.abs(pc.relay_gains[0] * y_relay) ** 2) / p)

# Destination 0 collects the direct superposition plus the relayed copy:
# a 2x2 MIMO channel built out of one antenna and one extra time slot.
eff = assemble_effective_channel(real, pc, dest=0)
print("\nstacked channel rows (direct, via relay):\n", eff.matrix)
print("per-row noise variance / sigma^2:", eff.noise_scaling / noise)
print("condition number of sqrt(P) G H:", np.linalg.cond(eff.composite(p)))
