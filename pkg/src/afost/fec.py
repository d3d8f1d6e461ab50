"""Systematic Reed-Solomon erasure coding over GF(256).

Codewords are built column-wise across equal-length byte segments: segment
``i`` of a block is codeword symbol ``i`` for every byte position. The
generator is the Vandermonde matrix on the points ``alpha**i`` normalised so
its top ``k`` rows are the identity, which keeps any ``k`` rows invertible.

Blocks shorter than ``k`` segments are shortened codes: the missing data
segments are virtual zeros and the parity count is scaled to keep the code
rate (``ceil(m * (n - k) / k)`` parity segments for ``m`` data segments).
"""

from dataclasses import dataclass
from functools import lru_cache
from math import ceil
from typing import Optional, Sequence

import numpy as np

from . import gf256

DEFAULT_SEGMENT_BYTES = 188


class FecDecodeError(Exception):
    """Raised when too many segments were erased to recover a block."""


@dataclass(frozen=True)
class FecConfig:
    n_total: int
    k_data: int
    segment_bytes: int = DEFAULT_SEGMENT_BYTES

    def __post_init__(self):
        if not 1 <= self.k_data <= self.n_total <= 255:
            raise ValueError(
                f"need 1 <= k <= n <= 255, got RS({self.n_total},{self.k_data})")
        if self.segment_bytes < 1:
            raise ValueError("segment_bytes must be positive")

    @property
    def rate(self) -> float:
        return self.k_data / self.n_total

    def parity_count(self, m: int) -> int:
        """Parity segments sent for a block holding ``m`` data segments."""
        if not 1 <= m <= self.k_data:
            raise ValueError(f"block must hold 1..{self.k_data} data segments")
        if m == self.k_data:
            return self.n_total - self.k_data
        return ceil(m * (self.n_total - self.k_data) / self.k_data)

    def __str__(self):
        return f"RS({self.n_total},{self.k_data})"


@lru_cache(maxsize=64)
def generator_matrix(n: int, k: int) -> np.ndarray:
    """Systematic (n, k) generator; rows ``k..n-1`` are the parity rows."""
    points = [gf256.power(2, i) for i in range(n)]
    vander = np.array([[gf256.power(p, j) for j in range(k)] for p in points],
                      dtype=np.uint8)
    gen = gf256.matmul(vander, gf256.inverse(vander[:k]))
    gen.setflags(write=False)
    return gen


def _as_segments(data, expected: Optional[int] = None) -> np.ndarray:
    rows = [np.frombuffer(bytes(s), dtype=np.uint8) if not isinstance(s, np.ndarray)
            else np.asarray(s, dtype=np.uint8) for s in data]
    if not rows:
        raise ValueError("no segments given")
    if expected is not None and len(rows) != expected:
        raise ValueError(f"expected {expected} segments, got {len(rows)}")
    length = rows[0].size
    if any(r.ndim != 1 or r.size != length for r in rows):
        raise ValueError("segments must be one-dimensional and of equal length")
    return np.stack(rows)


def encode_block(data, cfg: FecConfig) -> np.ndarray:
    """Encode ``m <= k`` data segments into ``m + parity_count(m)`` segments."""
    seg = _as_segments(data)
    m = seg.shape[0]
    p = cfg.parity_count(m)
    parity_rows = generator_matrix(cfg.n_total, cfg.k_data)[cfg.k_data:cfg.k_data + p, :m]
    return np.concatenate([seg, gf256.matmul(parity_rows, seg)])


def decode_block(received: Sequence, m: int, cfg: FecConfig) -> np.ndarray:
    """Recover ``m`` data segments from a (possibly shortened) codeword.

    ``received`` has one entry per transmitted segment; erased ones are None.

    Raises
    ------
    FecDecodeError
        Fewer than ``m`` segments survived.
    ValueError
        The codeword length or segment shapes are inconsistent.
    """
    total = m + cfg.parity_count(m)
    if len(received) != total:
        raise ValueError(f"expected {total} segment slots, got {len(received)}")
    present = [i for i, s in enumerate(received) if s is not None]
    if len(present) < m:
        raise FecDecodeError(
            f"{total - len(present)} erasures exceed the {total - m} the code can fill")
    if present[:m] == list(range(m)):
        return _as_segments([received[i] for i in range(m)])
    use = present[:m]
    rows = _as_segments([received[i] for i in use])
    gen = generator_matrix(cfg.n_total, cfg.k_data)
    # codeword row i < m is data row i; row i >= m is parity row (i - m)
    sub = np.stack([gen[i if i < m else cfg.k_data + (i - m), :m] for i in use])
    return gf256.matmul(gf256.inverse(sub), rows)


def encode(data_segments, cfg: FecConfig) -> np.ndarray:
    """Encode exactly ``k`` equal-length segments into ``n`` segments."""
    seg = _as_segments(data_segments, expected=cfg.k_data)
    return encode_block(seg, cfg)


def decode(segments: Sequence, cfg: FecConfig) -> np.ndarray:
    """Invert :func:`encode`; missing segments are given as None."""
    if len(segments) != cfg.n_total:
        raise ValueError(f"expected {cfg.n_total} segment slots, got {len(segments)}")
    return decode_block(segments, cfg.k_data, cfg)


def split_payload(payload: bytes, cfg: FecConfig) -> list:
    """Cut a video unit into zero-padded segments grouped into blocks of ``k``."""
    buf = np.frombuffer(bytes(payload), dtype=np.uint8)
    n_seg = max(1, ceil(buf.size / cfg.segment_bytes))
    padded = np.zeros(n_seg * cfg.segment_bytes, dtype=np.uint8)
    padded[:buf.size] = buf
    segs = padded.reshape(n_seg, cfg.segment_bytes)
    return [segs[i:i + cfg.k_data] for i in range(0, n_seg, cfg.k_data)]


def coded_segment_count(n_bytes: int, cfg: FecConfig) -> int:
    """Segments on the air for a video unit of ``n_bytes`` bytes."""
    n_seg = max(1, ceil(n_bytes / cfg.segment_bytes))
    full, rest = divmod(n_seg, cfg.k_data)
    count = full * cfg.n_total
    if rest:
        count += rest + cfg.parity_count(rest)
    return count
