import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rasnc.channel import (
    ChannelConfig,
    LinkRealization,
    add_noise,
    compose,
    draw_link,
    propagate,
    relay_forward,
    relay_receive,
    shift,
    superpose,
)
from rasnc.errors import FrameOverflowError, InvalidArgumentError

QUIET = ChannelConfig(noise=False)
DYADIC = st.integers(0, 24).map(lambda k: k / 8)


def direct_shift(signal, delay, gain, frame_len):
    out = [0.0] * frame_len
    for k, v in enumerate(signal):
        out[delay + k] = gain * v
    return np.array(out)


class TestDrawLink:
    def test_zero_max_delay(self):
        rng = np.random.default_rng(0)
        cfg = ChannelConfig(max_delay=0)
        assert all(draw_link(cfg, rng).delay == 0 for _ in range(200))

    def test_unit_mean_square_gain(self):
        rng = np.random.default_rng(1)
        cfg = ChannelConfig()
        g = np.array([draw_link(cfg, rng).gain for _ in range(100_000)])
        assert np.all(g >= 0)
        assert abs(np.mean(g**2) - 1.0) <= 0.03

    def test_uniform_delays(self):
        rng = np.random.default_rng(2)
        cfg = ChannelConfig(max_delay=9)
        d = np.array([draw_link(cfg, rng).delay for _ in range(100_000)])
        freq = np.bincount(d, minlength=10) / len(d)
        assert len(freq) == 10
        assert np.all(np.abs(freq - 0.1) <= 0.005)

    def test_seeded(self):
        cfg = ChannelConfig(rng_seed=(4, 5))
        a = [draw_link(cfg, cfg.make_rng()) for _ in range(3)]
        b = [draw_link(cfg, cfg.make_rng()) for _ in range(3)]
        assert a == b


class TestPropagate:
    def test_identity_channel(self):
        x = np.array([1.0, -1.0, 1.0])
        out = propagate(x, LinkRealization(1.0, 0), QUIET, 5)
        np.testing.assert_array_equal(out, [1.0, -1.0, 1.0, 0.0, 0.0])

    def test_shift_and_scale(self):
        out = propagate([1.0, -1.0], LinkRealization(2.0, 3), QUIET, 6)
        np.testing.assert_array_equal(out, [0, 0, 0, 2, -2, 0])

    def test_frame_overflow(self):
        with pytest.raises(FrameOverflowError):
            propagate(np.ones(4), LinkRealization(1.0, 3), QUIET, 6)

    def test_noise_variance(self):
        cfg = ChannelConfig(snr_db=7.0)
        out = propagate(np.zeros(0), LinkRealization(1.0, 0), cfg, 100_000,
                        rng=np.random.default_rng(3))
        assert abs(out.var() / cfg.noise_variance - 1.0) <= 0.03

    def test_noise_only_where_enabled(self):
        cfg = ChannelConfig(snr_db=0.0)
        out = propagate([1.0, 1.0], LinkRealization(1.0, 0), cfg, 2, noisy=False)
        np.testing.assert_array_equal(out, [1.0, 1.0])

    def test_snr_calibration(self):
        cfg = ChannelConfig(snr_db=12.0)
        rng = np.random.default_rng(4)
        x = 2.0 * rng.integers(0, 2, size=1_000_000) - 1.0
        noise = add_noise(x, cfg, rng) - x
        snr = 10 * math.log10(np.mean(x**2) / np.mean(noise**2))
        assert abs(snr - 12.0) <= 0.2

    def test_seeded_noise_is_bitwise_identical(self):
        cfg = ChannelConfig(snr_db=3.0, rng_seed=99)
        a = propagate(np.ones(10), LinkRealization(0.7, 2), cfg, 20, rng=cfg.make_rng())
        b = propagate(np.ones(10), LinkRealization(0.7, 2), cfg, 20, rng=cfg.make_rng())
        assert a.tobytes() == b.tobytes()

    @settings(max_examples=50, deadline=None)
    @given(DYADIC, st.integers(0, 10), DYADIC, st.integers(0, 10), st.integers(0, 2**32 - 1))
    def test_composition_law(self, g1, d1, g2, d2, seed):
        # dyadic gains and integer samples keep every product exact
        x = np.random.default_rng(seed).integers(-3, 4, size=12).astype(float)
        two = propagate(propagate(x, LinkRealization(g1, d1), QUIET, 22),
                        LinkRealization(g2, d2), QUIET, 32)
        e2e = compose(LinkRealization(g1, d1), LinkRealization(g2, d2))
        one = propagate(x, LinkRealization(e2e.g, e2e.total_delay), QUIET, 32)
        np.testing.assert_array_equal(two, one)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), DYADIC, st.integers(0, 8))
    def test_linearity(self, seed, g, d):
        a, b = np.random.default_rng(seed).integers(-4, 5, size=(2, 10)).astype(float)
        link = LinkRealization(g, d)
        lhs = propagate(a + b, link, QUIET, 20)
        rhs = propagate(a, link, QUIET, 20) + propagate(b, link, QUIET, 20)
        np.testing.assert_array_equal(lhs, rhs)


class TestSuperpose:
    def test_additive_identity(self):
        x = np.array([1.0, 2.0, -3.0])
        np.testing.assert_array_equal(superpose([x, np.zeros(3)]), x)

    def test_cancellation(self):
        x = np.array([1.0, 2.0, -3.0])
        np.testing.assert_array_equal(superpose([x, -x]), np.zeros(3))

    def test_three_sequences(self):
        rng = np.random.default_rng(5)
        seqs = rng.normal(size=(3, 20))
        expected = [seqs[0][k] + seqs[1][k] + seqs[2][k] for k in range(20)]
        np.testing.assert_allclose(superpose(list(seqs)), expected, atol=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            superpose([np.zeros(3), np.zeros(4)])


class TestRelay:
    def test_pass_through(self):
        x = np.arange(5.0)
        np.testing.assert_array_equal(relay_forward(x, LinkRealization(1.0, 0), QUIET, 5), x)

    def test_two_hop_composition(self):
        x = np.array([1.0, -1.0, -1.0, 1.0])
        at_relay = propagate(x, LinkRealization(0.5, 2), QUIET, 10)
        out = relay_forward(at_relay, LinkRealization(0.8, 3), QUIET, 13)
        e2e = compose(LinkRealization(0.5, 2), LinkRealization(0.8, 3))
        assert e2e.g == pytest.approx(0.4)
        assert e2e.total_delay == 5
        np.testing.assert_allclose(out, direct_shift(x, 5, 0.4, 13), atol=1e-15)

    def test_two_sources_through_relay(self):
        rng = np.random.default_rng(6)
        r1, r2 = rng.normal(size=(2, 8))
        up1, up2, down = LinkRealization(0.9, 1), LinkRealization(1.7, 4), LinkRealization(0.6, 2)
        at_relay = relay_receive([r1, r2], [up1, up2], QUIET, rng)
        out = relay_forward(at_relay, down, QUIET, len(at_relay) + QUIET.max_delay)
        expected = (direct_shift(r1, 3, 0.9 * 0.6, len(out))
                    + direct_shift(r2, 6, 1.7 * 0.6, len(out)))
        np.testing.assert_allclose(out, expected, atol=1e-14)

    def test_relay_noise_switch(self):
        cfg = ChannelConfig(snr_db=0.0, noise_at_relay=False)
        x = np.ones(4)
        quiet = relay_receive([x], [LinkRealization(1.0, 0)], cfg, np.random.default_rng(0))
        np.testing.assert_array_equal(quiet[:4], x)
        noisy_cfg = ChannelConfig(snr_db=0.0, noise_at_relay=True)
        noisy = relay_receive([x], [LinkRealization(1.0, 0)], noisy_cfg, np.random.default_rng(0))
        assert not np.array_equal(noisy[:4], x)


def test_shift_rejects_negative_delay():
    with pytest.raises(InvalidArgumentError):
        shift([1.0], -1, 3)


def test_link_validation():
    with pytest.raises(InvalidArgumentError):
        LinkRealization(-0.1, 0)
