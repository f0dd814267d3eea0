import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rasnc.channel import ChannelConfig, LinkRealization, propagate, shift
from rasnc.digital import (
    QuantizerSpec,
    bits_to_code,
    cancel_self_interference,
    code_to_bits,
    dequantize,
    digital_decode,
    digital_encode,
    packet_from_bits,
    quantize,
    xor_bits,
)
from rasnc.errors import DegenerateGainError, InvalidArgumentError
from rasnc.seqkit import generate_pn


class TestQuantizer:
    def test_levels_and_step(self):
        spec = QuantizerSpec(8, 4.0)
        assert spec.levels == 256
        assert spec.step == 8.0 / 256

    def test_examples(self):
        spec = QuantizerSpec(3, 4.0)
        assert quantize(0.0, spec) == 4
        assert quantize(-4.0, spec) == 0
        assert quantize(3.999, spec) == 7
        assert dequantize(4, spec) == 0.5
        assert dequantize(0, spec) == -3.5

    def test_clamping(self):
        spec = QuantizerSpec(4, 4.0)
        assert quantize(100.0, spec) == 15
        assert quantize(-100.0, spec) == 0

    def test_invalid(self):
        with pytest.raises(InvalidArgumentError):
            QuantizerSpec(0)
        with pytest.raises(InvalidArgumentError):
            QuantizerSpec(4, 0.0)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 20), st.floats(-4.0, 3.9999))
    def test_in_range_error_bound(self, n_bits, r):
        spec = QuantizerSpec(n_bits, 4.0)
        assert abs(dequantize(quantize(r, spec), spec) - r) <= spec.step / 2 + 1e-12

    @pytest.mark.parametrize("n_bits", [4, 8, 12])
    def test_rms_monte_carlo(self, n_bits):
        spec = QuantizerSpec(n_bits, 4.0)
        r = np.random.default_rng(n_bits).uniform(-4.0, 4.0, 200_000)
        err = np.array([dequantize(quantize(v, spec), spec) for v in r]) - r
        rms = math.sqrt(np.mean(err ** 2))
        assert rms == pytest.approx(spec.step / math.sqrt(12.0), rel=0.05)
        assert spec.rms_error == spec.step / math.sqrt(12.0)


class TestBits:
    def test_code_zero(self):
        np.testing.assert_array_equal(code_to_bits(0, 4), [-1, -1, -1, -1])

    def test_code_five_msb_first(self):
        np.testing.assert_array_equal(code_to_bits(5, 4), [-1, 1, -1, 1])
        assert bits_to_code([-1, 1, -1, 1]) == 5

    def test_overflow(self):
        with pytest.raises(InvalidArgumentError):
            code_to_bits(16, 4)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 30).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, 2**n - 1))))
    def test_round_trip(self, pair):
        n, code = pair
        assert bits_to_code(code_to_bits(code, n)) == code

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 255), st.integers(0, 255))
    def test_xor_matches_integer_xor(self, a, b):
        out = xor_bits(code_to_bits(a, 8), code_to_bits(b, 8))
        assert bits_to_code(out) == a ^ b


class TestPacket:
    def test_layout_and_power(self):
        marker = generate_pn(1, 32)
        spec = QuantizerSpec(16)
        pkt = digital_encode(0.3, marker, spec, amplitude=2.0)
        assert len(pkt) == 48
        np.testing.assert_array_equal(pkt.stream[:32], 2.0 * marker.chips)
        assert np.mean(pkt.stream ** 2) == pytest.approx(4.0, abs=1e-12)
        assert pkt.code == quantize(0.3, spec)
        assert not pkt.clamped
        assert digital_encode(5.0, marker, spec).clamped

    def test_slot_overflow(self):
        with pytest.raises(InvalidArgumentError):
            digital_encode(0.0, generate_pn(1, 32), QuantizerSpec(30), slot_len=60)
        digital_encode(0.0, generate_pn(1, 32), QuantizerSpec(28), slot_len=60)

    def test_packet_from_bits(self):
        pkt = packet_from_bits(generate_pn(2, 8), code_to_bits(9, 6))
        assert pkt.code == 9


def two_packet_frame(seed, gains=(0.8, 0.5), delays=(3, 17), r=(0.7, -1.3), n_bits=45):
    spec = QuantizerSpec(n_bits)
    pkts = [digital_encode(r[i], generate_pn((seed, i), 45, i), spec) for i in range(2)]
    frame = 90 + 20
    y = sum(g * shift(p.stream, d, frame) for p, g, d in zip(pkts, gains, delays))
    return spec, pkts, y


class TestCancellationAndDecode:
    def test_cancel_removes_own_packet_exactly(self):
        spec, pkts, y = two_packet_frame(1, gains=(0.8, 0.0))
        resid = cancel_self_interference(y, pkts[0])
        np.testing.assert_allclose(resid, 0.0, atol=1e-12)

    def test_disabled_is_identity(self):
        spec, pkts, y = two_packet_frame(2)
        np.testing.assert_array_equal(cancel_self_interference(y, pkts[0], enabled=False), y)

    def test_noiseless_decode(self):
        ok = 0
        for seed in range(200):
            spec, pkts, y = two_packet_frame(seed)
            dec = digital_decode(cancel_self_interference(y, pkts[0]), pkts[1].marker, spec,
                                 true_bits=pkts[1].bits)
            ok += dec.bit_errors == 0 and dec.code == pkts[1].code
        assert ok >= 198

    def test_eight_bit_example(self):
        spec = QuantizerSpec(8, 4.0)
        marker = generate_pn(3, 64)
        pkt = digital_encode(0.25, marker, spec)
        y = shift(0.6 * pkt.stream, 5, 64 + 8 + 16)
        dec = digital_decode(y, marker, spec)
        assert dec.offset == 5
        assert abs(dec.r_hat - 0.25) <= 4.0 / 256

    def test_flipped_bits_are_all_counted(self):
        spec = QuantizerSpec(16)
        marker = generate_pn(4, 32)
        pkt = digital_encode(1.1, marker, spec)
        dec = digital_decode(pkt.stream, marker, spec, true_bits=-pkt.bits)
        assert dec.bit_errors == spec.n_bits

    def test_negative_gain_detected(self):
        spec = QuantizerSpec(10)
        marker = generate_pn(5, 32)
        pkt = digital_encode(-2.2, marker, spec)
        dec = digital_decode(-0.3 * pkt.stream, marker, spec)
        assert dec.code == pkt.code

    def test_zero_input_degenerate(self):
        with pytest.raises(DegenerateGainError):
            digital_decode(np.zeros(80), generate_pn(6, 32), QuantizerSpec(10))

    def test_frame_too_short(self):
        with pytest.raises(InvalidArgumentError):
            digital_decode(np.ones(20), generate_pn(6, 32), QuantizerSpec(10))

    def test_high_snr_single_hop(self):
        # 45-bit payload behind a 45-chip marker over one faded hop at 40 dB
        rng = np.random.default_rng(7)
        cfg = ChannelConfig(snr_db=40.0)
        spec = QuantizerSpec(45)
        clean = 0
        n = 2000
        for t in range(n):
            marker = generate_pn((7, t), 45)
            pkt = digital_encode(rng.standard_normal(), marker, spec)
            link = LinkRealization(float(rng.rayleigh(math.sqrt(0.5))), int(rng.integers(0, 17)))
            y = propagate(pkt.stream, link, cfg, 90 + 16, rng=rng)
            try:
                dec = digital_decode(y, marker, spec, true_bits=pkt.bits)
            except DegenerateGainError:
                continue
            clean += dec.bit_errors == 0
        assert clean / n >= 0.99
