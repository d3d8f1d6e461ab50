"""Erasure coding video units with a systematic Reed-Solomon code over GF(256).

Run: python demos/03_reed_solomon.py
"""
import numpy as np

from afost.fec import FecConfig, FecDecodeError, decode, encode, split_payload

cfg = FecConfig(12, 10, segment_bytes=188)
rng = np.random.default_rng(3)
data = rng.integers(0, 256, (10, 188), dtype=np.uint8)
coded = encode(data, cfg)
print(cfg, "->", coded.shape[0], "segments; first 10 are the data:",
      np.array_equal(coded[:10], data))

# Any 10 of the 12 segments rebuild the data...
rx = list(coded)
rx[0] = rx[7] = None
print("two erasures recovered:", np.array_equal(decode(rx, cfg), data))

# ...and three erasures are one too many.
rx[3] = None
try:
    decode(rx, cfg)
except FecDecodeError as exc:
    print("three erasures:", exc)

# A 3 KB frame becomes two blocks; the short one carries proportionally less parity.
blocks = split_payload(bytes(3000), FecConfig(19, 10))
print("3000-byte frame ->", [b.shape[0] for b in blocks], "data segments per block")
