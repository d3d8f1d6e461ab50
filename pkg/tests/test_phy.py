import itertools

import numpy as np
import pytest

from afost.channel import PowerConfig, assemble_effective_channel, draw_realization
from afost.phy import (QPSK_POINTS, DegenerateChannelError, EffectiveChannel, ReceivedBundle,
                       SymbolBlock, bytes_to_bits, demodulate, detection_order, estimate_rate,
                       mmse_weights, modulate, osic_detect, osic_detect_batch, post_mmse_sinr,
                       relay_receive, run_communication_phase, slice_qpsk)


def test_qpsk_gray_map():
    blk = modulate([0, 0, 0, 1, 1, 0, 1, 1])
    assert np.allclose(blk.symbols, QPSK_POINTS)
    assert np.allclose(np.abs(blk.symbols), 1.0)
    assert demodulate(blk.symbols).tolist() == [0, 0, 0, 1, 1, 0, 1, 1]
    with pytest.raises(ValueError):
        modulate([1, 0, 1])


def test_slice_and_bytes():
    z = np.array([0.3 - 2j, -1e-3 + 5j])
    assert np.allclose(slice_qpsk(z), np.array([1 - 1j, -1 + 1j]) / np.sqrt(2))
    assert bytes_to_bits(b"\x80").tolist() == [1, 0, 0, 0, 0, 0, 0, 0]


def _phase(n, m, noise, seed, n_sym=64):
    rng = np.random.default_rng(seed)
    real = draw_realization(n, m, n, noise, rng)
    bits = rng.integers(0, 2, (n, 2 * n_sym))
    blocks = [modulate(b, i) for i, b in enumerate(bits)]
    pc = PowerConfig.from_realization(real, 1.0)
    return real, pc, blocks, rng


@pytest.mark.parametrize("n", [2, 3, 4])
def test_noiseless_osic_is_exact(n):
    for seed in range(20):
        real, pc, blocks, rng = _phase(n, n - 1, 0.0, seed)
        for dest in range(n):
            bundle = run_communication_phase(real, pc, blocks, dest, rng)
            res = osic_detect(bundle)
            assert not res.failed
            assert np.array_equal(res.symbol_estimates, np.stack([b.symbols for b in blocks]))
            assert sorted(res.detection_order) == list(range(n))


def test_relays_share_observation_across_destinations():
    real, pc, blocks, rng = _phase(2, 1, 1e-2, 3)
    rx = {0: relay_receive(real, blocks, 0, rng)}
    a = run_communication_phase(real, pc, blocks, 0, rng, relay_rx=rx)
    b = run_communication_phase(real, pc, blocks, 1, rng, relay_rx=rx)
    assert a.y.shape == b.y.shape == (2, 64)


def sinr_oracle(a):
    """Per-stream MMSE SINR from the interference-plus-noise covariance."""
    n = a.shape[1]
    out = []
    for i in range(n):
        others = np.delete(a, i, axis=1)
        cov = others @ others.conj().T + np.eye(a.shape[0])
        out.append(np.real(a[:, i].conj() @ np.linalg.solve(cov, a[:, i])))
    return np.array(out)


@pytest.mark.parametrize("n", [2, 3])
def test_post_sinr_matches_covariance_formula(n):
    for seed in range(10):
        real, pc, _, _ = _phase(n, n - 1, 0.3, seed)
        eff = assemble_effective_channel(real, pc, 0)
        a = eff.composite(1.0) / np.sqrt(eff.noise_scaling)[:, None]
        assert np.allclose(post_mmse_sinr(eff, 1.0), sinr_oracle(a), rtol=1e-9)


def test_mmse_weights_tend_to_pseudo_inverse():
    real, pc, _, _ = _phase(2, 1, 1e-12, 0)
    eff = assemble_effective_channel(real, pc, 0)
    w = mmse_weights(eff, 1.0)
    assert np.allclose(w @ eff.composite(1.0), np.eye(2), atol=1e-6)


def test_degenerate_channel_flagged():
    eff = EffectiveChannel(matrix=np.array([[1, 1], [2, 2]], complex), gain_diag=np.ones(2),
                           noise_scaling=np.ones(2))
    with pytest.raises(DegenerateChannelError):
        mmse_weights(eff)
    bundle = ReceivedBundle(y=np.zeros((2, 4), complex), eff=eff, dest_id=0, tx_power=1.0)
    res = osic_detect(bundle)
    assert res.failed and np.isnan(res.symbol_estimates).all()


def test_detection_order_strongest_first():
    a = np.array([[[1.0, 3.0, 2.0], [0.0, 0.0, 0.0]]])
    active = np.ones((1, 3), bool)
    assert detection_order(a, active).tolist() == [[1, 2, 0]]
    assert detection_order(a, active, "natural").tolist() == [[0, 1, 2]]
    active[0, 1] = False
    assert detection_order(a, active)[0, -1] == 1


def test_idle_sender_not_detected():
    real, pc, blocks, rng = _phase(2, 1, 0.0, 1)
    eff = assemble_effective_channel(real, pc, 0)
    a = eff.composite(1.0)
    x = np.stack([blocks[0].symbols, np.zeros(64)])
    est, _, _, failed = osic_detect_batch(a[None], eff.noise_scaling[None], (a @ x)[None],
                                          np.array([[True, False]]))
    assert not failed[0]
    assert np.array_equal(est[0, 0], blocks[0].symbols)
    assert np.all(est[0, 1] == 0)


def ml_detect(a, noise, y):
    """Exhaustive ML over all QPSK tuples on the whitened channel."""
    n = a.shape[1]
    cands = np.array(list(itertools.product(QPSK_POINTS, repeat=n))).T  # (n, 4^n)
    aw = a / np.sqrt(noise)[:, None]
    yw = y / np.sqrt(noise)[:, None]
    d = np.abs(yw[:, :, None] - (aw @ cands)[:, None, :]) ** 2
    return cands[:, np.argmin(d.sum(axis=0), axis=1)]


def test_osic_agrees_with_ml_at_high_snr():
    agree = total = 0
    for seed in range(10):
        real, _, blocks, rng = _phase(2, 1, 1e-3, seed, n_sym=200)
        pc = PowerConfig.from_realization(real, 1.0)
        bundle = run_communication_phase(real, pc, blocks, 0, rng)
        res = osic_detect(bundle)
        ml = ml_detect(bundle.eff.composite(1.0), bundle.eff.noise_scaling, bundle.y)
        agree += np.count_nonzero(res.symbol_estimates == ml)
        total += ml.size
    assert agree / total >= 0.999


def test_rate_reduces_to_shannon():
    real = draw_realization(1, 0, 1, 1e-9, 2)
    p = 1e-9 * 10 ** 1.5
    est = estimate_rate([real], p, 0, 0, n_samples=1, bandwidth_hz=1.0)
    shannon = np.log2(1 + p * abs(real.h_sender_dest[0, 0]) ** 2 / 1e-9)
    assert abs(est.avg_rate - shannon) < 1e-9
    assert est.throughput == pytest.approx(shannon)


def test_rate_estimate_checks():
    reals = [draw_realization(2, 1, 2, 1.0, s) for s in range(5)]
    r = estimate_rate(reals, 10.0, 0, 0, n_samples=5)
    assert r.per_sample.shape == (5,)
    assert r.throughput == pytest.approx(r.avg_rate * 20e6 / 2)
    with pytest.raises(ValueError):
        estimate_rate(reals, 10.0, 0, 0, n_samples=6)


def test_bundle_validates_rows():
    real, pc, _, _ = _phase(2, 1, 1.0, 0)
    eff = assemble_effective_channel(real, pc, 0)
    with pytest.raises(ValueError):
        ReceivedBundle(y=np.zeros((3, 4), complex), eff=eff, dest_id=0, tx_power=1.0)


def test_symbol_block_len():
    assert len(SymbolBlock(0, np.zeros(5, complex), np.zeros(10))) == 5
