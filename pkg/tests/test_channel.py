import numpy as np
import pytest

from afost.channel import (ChannelRealization, PowerConfig, assemble_effective_channel,
                           compute_relay_gain, default_relay_order, draw_realization,
                           with_csi_error)


def test_draw_shapes_and_statistics():
    real = draw_realization(3, 2, 3, 1e-9, 0)
    assert real.h_sender_relay.shape == (3, 2)
    assert real.h_sender_dest.shape == (3, 3)
    assert real.h_relay_dest.shape == (2, 3)
    rng = np.random.default_rng(4)
    h = np.array([draw_realization(1, 1, 1, 1.0, rng).h_sender_dest[0, 0] for _ in range(20000)])
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.03)
    assert abs(np.mean(h)) < 0.02


def test_draw_is_seeded():
    a = draw_realization(2, 1, 2, 1e-9, 7)
    b = draw_realization(2, 1, 2, 1e-9, 7)
    assert np.array_equal(a.h_sender_relay, b.h_sender_relay)


@pytest.mark.parametrize("args", [(0, 1, 1, 1.0), (2, 0, 2, 1.0), (1, 1, 1, -1.0)])
def test_draw_rejects(args):
    with pytest.raises(ValueError):
        draw_realization(*args)


def test_relay_gain_formula():
    g = compute_relay_gain(2.0, [0.5, 1.5], 1.0)
    assert g == pytest.approx(np.sqrt(2.0 / (2.0 * 2.0 + 1.0)))
    with pytest.raises(ValueError):
        compute_relay_gain(0.0, [1.0], 1.0)
    with pytest.raises(ValueError):
        compute_relay_gain(1.0, [0.0], 0.0)


def test_relay_order():
    assert default_relay_order(4, 3) == [0, 1, 2]
    assert default_relay_order(3, 1, single_relay=True) == [0, 0]
    with pytest.raises(ValueError):
        default_relay_order(4, 2)


def test_effective_channel_entries():
    real = draw_realization(3, 2, 3, 0.1, 3)
    pc = PowerConfig.from_realization(real, 2.0)
    eff = assemble_effective_channel(real, pc, dest=1)
    assert eff.matrix.shape == (3, 3)
    assert np.allclose(eff.matrix[0], real.h_sender_dest[:, 1])
    for i, r in enumerate([0, 1], start=1):
        assert np.allclose(eff.matrix[i], real.h_sender_relay[:, r] * real.h_relay_dest[r, 1])
        g = pc.relay_gains[r]
        assert eff.noise_scaling[i] == pytest.approx(0.1 * (1 + g ** 2 * abs(real.h_relay_dest[r, 1]) ** 2))
    assert eff.noise_scaling[0] == 0.1
    assert np.allclose(eff.composite(2.0), np.sqrt(2.0) * eff.gain_diag[:, None] * eff.matrix)


def test_effective_channel_rejects_bad_input():
    real = draw_realization(3, 2, 3, 0.1, 3)
    pc = PowerConfig.from_realization(real, 1.0)
    with pytest.raises(ValueError):
        assemble_effective_channel(real, pc, dest=5)
    with pytest.raises(ValueError):
        assemble_effective_channel(real, pc, dest=0, relay_order=[0])
    with pytest.raises(ValueError):
        assemble_effective_channel(real, PowerConfig(1.0, np.ones(1)), dest=0)


def test_power_config_respects_active_senders():
    real = draw_realization(2, 1, 2, 1.0, 5)
    both = PowerConfig.from_realization(real, 1.0)
    one = PowerConfig.from_realization(real, 1.0, active=[True, False])
    assert one.relay_gains[0] == pytest.approx(1 / np.sqrt(abs(real.h_sender_relay[0, 0]) ** 2 + 1))
    assert one.relay_gains[0] > both.relay_gains[0]


def test_csi_error():
    real = draw_realization(2, 1, 2, 1.0, 5)
    assert with_csi_error(real, 0.0, np.random.default_rng(0)) is real
    noisy = with_csi_error(real, 0.01, np.random.default_rng(0))
    assert not np.allclose(noisy.h_sender_dest, real.h_sender_dest)
    assert isinstance(noisy, ChannelRealization)
