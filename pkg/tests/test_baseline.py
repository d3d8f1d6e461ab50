import numpy as np
import pytest

from afost.baseline import (SLOTS_PER_PACKET, af_snr, coop_af_rate, coop_transmit, dir_rate,
                            dir_transmit, mrc_detect_batch)
from afost.channel import ChannelRealization, PowerConfig, draw_realization
from afost.phy import modulate

# 0.5*log2(1 + 10 + 100/21), computed independently
COOP_RATE_10_10_10 = 1.9891849920142288


def unit_real(noise=1.0):
    one = np.ones((1, 1), complex)
    return ChannelRealization(one, one, one, noise)


def test_coop_rate_reference_point():
    pc = PowerConfig(10.0, np.ones(1))
    r = coop_af_rate(unit_real(), pc, 0, 0, 0, bandwidth_hz=1.0)
    assert r.avg_rate == pytest.approx(COOP_RATE_10_10_10, abs=1e-12)
    assert r.throughput == pytest.approx(COOP_RATE_10_10_10)
    assert af_snr(10, 10, 10) == pytest.approx(10 + 100 / 21)


def test_dir_rate():
    r = dir_rate(1 + 1j, 2.0, 0.5, bandwidth_hz=10.0, slot_share=0.5)
    assert r.avg_rate == pytest.approx(np.log2(1 + 8))
    assert r.throughput == pytest.approx(np.log2(9) * 5)
    with pytest.raises(ValueError):
        dir_rate(1.0, 1.0, 0.0)


def test_slot_costs():
    assert SLOTS_PER_PACKET == {"DIR": 1, "COOP": 2}


def test_noiseless_links_are_exact():
    rng = np.random.default_rng(0)
    for seed in range(10):
        real = draw_realization(2, 1, 2, 0.0, seed)
        blk = modulate(rng.integers(0, 2, 128), sender_id=1)
        pc = PowerConfig(1.0, np.ones(1))
        res = coop_transmit(real, pc, blk, 0, 1, rng)
        assert np.array_equal(res.symbol_estimates[0], blk.symbols)
        res = dir_transmit(real.with_noise(1e-30), 1.0, blk, 1, rng)
        assert np.array_equal(res.symbol_estimates[0], blk.symbols)


def test_mrc_snr_adds_branch_snrs():
    h_d, h_sr, h_rd, p, s2 = 0.5 + 0j, 1.0 + 0j, 2.0 + 0j, 4.0, 1.0
    _, snr = mrc_detect_batch([h_d], [h_sr], [h_rd], p, s2, np.zeros((1, 2)), np.zeros((1, 2)))
    expect = af_snr(p * abs(h_d) ** 2 / s2, p * abs(h_sr) ** 2 / s2, p * abs(h_rd) ** 2 / s2)
    assert snr[0] == pytest.approx(float(expect))
    _, snr_d = mrc_detect_batch([h_d], [h_sr], [h_rd], p, s2, np.zeros((1, 2)), np.zeros((1, 2)),
                                use_relay=False)
    assert snr_d[0] == pytest.approx(1.0)


def test_cooperation_lowers_error_rate():
    rng = np.random.default_rng(3)
    errs = {True: 0, False: 0}
    for seed in range(300):
        real = draw_realization(1, 1, 1, 1.0, seed)
        blk = modulate(rng.integers(0, 2, 64))
        pc = PowerConfig(10.0, np.ones(1))
        for use in (True, False):
            res = coop_transmit(real, pc, blk, 0, 0, rng, use_relay=use)
            errs[use] += np.count_nonzero(res.symbol_estimates[0] != blk.symbols)
    assert errs[True] < errs[False]
