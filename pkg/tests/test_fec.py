import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afost import gf256
from afost.fec import (FecConfig, FecDecodeError, coded_segment_count, decode, decode_block,
                       encode, encode_block, generator_matrix, split_payload)

bytes_ = st.integers(0, 255)
nonzero = st.integers(1, 255)


def slow_mul(a, b):
    """Carry-less multiply reduced by x^8+x^4+x^3+x^2+1, bit by bit."""
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        if a & 0x100:
            a ^= 0x11D
        b >>= 1
    return r


def test_mul_table_matches_bitwise_multiply():
    a = np.arange(256)
    for b in (0, 1, 2, 3, 0x53, 0x8E, 255):
        expect = [slow_mul(int(x), b) for x in a]
        assert gf256.mul(a, b).tolist() == expect


@given(bytes_, bytes_, bytes_)
def test_field_axioms(a, b, c):
    assert gf256.mul(a, b) == gf256.mul(b, a)
    assert gf256.mul(a, gf256.mul(b, c)) == gf256.mul(gf256.mul(a, b), c)
    assert gf256.mul(a, b ^ c) == gf256.mul(a, b) ^ gf256.mul(a, c)


@given(nonzero)
def test_inverse(a):
    assert gf256.mul(a, gf256.INV[a]) == 1


def test_power():
    assert gf256.power(2, 8) == 0x1D
    assert gf256.power(7, 0) == 1
    assert gf256.power(0, 3) == 0


def test_matrix_inverse_roundtrip():
    m = generator_matrix(12, 10)[[0, 3, 5, 7, 9, 10, 11, 1, 2, 4]]
    inv = gf256.inverse(m)
    assert np.array_equal(gf256.matmul(inv, m), np.eye(10, dtype=np.uint8))
    with pytest.raises(np.linalg.LinAlgError):
        gf256.inverse(np.zeros((3, 3), dtype=np.uint8))


def test_generator_is_systematic_and_mds_small():
    g = generator_matrix(7, 3)
    assert np.array_equal(g[:3], np.eye(3, dtype=np.uint8))
    for rows in itertools.combinations(range(7), 3):
        gf256.inverse(g[list(rows)])  # raises if any 3 rows are dependent


def test_config_validation_and_str():
    assert str(FecConfig(19, 10)) == "RS(19,10)"
    assert FecConfig(32, 10).rate == pytest.approx(10 / 32)
    for n, k in [(10, 11), (0, 0), (256, 10)]:
        with pytest.raises(ValueError):
            FecConfig(n, k)
    cfg = FecConfig(19, 10)
    assert cfg.parity_count(10) == 9
    assert cfg.parity_count(3) == 3  # ceil(27/10)
    with pytest.raises(ValueError):
        cfg.parity_count(11)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([(12, 10), (19, 10), (32, 10), (5, 1), (4, 4)]), st.data())
def test_any_k_segments_recover(code, data):
    n, k = code
    cfg = FecConfig(n, k, segment_bytes=8)
    rng = np.random.default_rng(data.draw(st.integers(0, 2 ** 32 - 1)))
    msg = rng.integers(0, 256, (k, 8), dtype=np.uint8)
    cw = encode(msg, cfg)
    assert np.array_equal(cw[:k], msg)
    keep = data.draw(st.sets(st.integers(0, n - 1), min_size=k, max_size=n))
    rx = [cw[i] if i in keep else None for i in range(n)]
    assert np.array_equal(decode(rx, cfg), msg)


@pytest.mark.parametrize("m", [1, 4, 9])
def test_shortened_block(m):
    cfg = FecConfig(19, 10, segment_bytes=4)
    msg = np.random.default_rng(m).integers(0, 256, (m, 4), dtype=np.uint8)
    cw = encode_block(msg, cfg)
    assert cw.shape[0] == m + cfg.parity_count(m)
    rx = list(cw)
    for i in range(cfg.parity_count(m)):
        rx[i] = None
    assert np.array_equal(decode_block(rx, m, cfg), msg)
    rx[cfg.parity_count(m)] = None
    with pytest.raises(FecDecodeError):
        decode_block(rx, m, cfg)


def test_decode_errors():
    cfg = FecConfig(12, 10, segment_bytes=2)
    cw = encode(np.zeros((10, 2), dtype=np.uint8), cfg)
    with pytest.raises(ValueError):
        decode(list(cw[:11]), cfg)
    with pytest.raises(ValueError):
        encode(np.zeros((9, 2), dtype=np.uint8), cfg)
    with pytest.raises(FecDecodeError):
        decode([None] * 3 + list(cw[3:]), cfg)


def test_split_payload_and_counts():
    cfg = FecConfig(19, 10, segment_bytes=188)
    payload = bytes(range(256)) * 10  # 2560 bytes -> 14 segments
    blocks = split_payload(payload, cfg)
    assert [b.shape[0] for b in blocks] == [10, 4]
    assert bytes(np.concatenate(blocks).ravel()[:len(payload)]) == payload
    assert coded_segment_count(len(payload), cfg) == 19 + 4 + 4
    assert coded_segment_count(1, cfg) == 1 + 1
