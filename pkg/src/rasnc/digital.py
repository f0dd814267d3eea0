"""Digital packets: fixed-point quantised message sent as BPSK chips after a
PN marker, plus marker-based self-interference cancellation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import shift
from .errors import DegenerateGainError, InvalidArgumentError
from .seqkit import PnSignature, as_chips, locate_signature

DEFAULT_RANGE = 4.0
GAIN_RTOL = 1e-12


@dataclass(frozen=True)
class QuantizerSpec:
    """Midpoint uniform quantiser with ``2**n_bits`` levels on ``[-q_range, q_range]``."""

    n_bits: int
    q_range: float = DEFAULT_RANGE

    def __post_init__(self):
        if self.n_bits < 1:
            raise InvalidArgumentError("n_bits must be >= 1")
        if not self.q_range > 0:
            raise InvalidArgumentError("q_range must be positive")

    @property
    def levels(self) -> int:
        return 1 << self.n_bits

    @property
    def step(self) -> float:
        return 2.0 * self.q_range / self.levels

    @property
    def rms_error(self) -> float:
        """RMS error of uniformly distributed in-range inputs, ``step / sqrt(12)``."""
        return self.step / math.sqrt(12.0)


def quantize(r: float, spec: QuantizerSpec) -> int:
    """Index of the level cell holding ``r``; out-of-range values are clamped."""
    code = math.floor((float(r) + spec.q_range) / spec.step)
    return min(max(code, 0), spec.levels - 1)


def dequantize(code: int, spec: QuantizerSpec) -> float:
    return -spec.q_range + (code + 0.5) * spec.step


def code_to_bits(code: int, n_bits: int) -> np.ndarray:
    """MSB-first binary expansion mapped 0 -> -1, 1 -> +1."""
    if not 0 <= code < (1 << n_bits):
        raise InvalidArgumentError(f"code {code} does not fit in {n_bits} bits")
    return np.array([1.0 if (code >> (n_bits - 1 - k)) & 1 else -1.0 for k in range(n_bits)])


def bits_to_code(bits) -> int:
    code = 0
    for b in np.asarray(bits):
        code = (code << 1) | int(b > 0)
    return code


def xor_bits(a, b) -> np.ndarray:
    """XOR of two ±1 bit vectors in the same ±1 mapping."""
    return -np.asarray(a, dtype=float) * np.asarray(b, dtype=float)


@dataclass(frozen=True, eq=False)
class DigitalPacket:
    marker: PnSignature
    bits: np.ndarray
    r: float | None = None
    code: int | None = None
    amplitude: float = 1.0
    clamped: bool = False

    @property
    def chips(self) -> np.ndarray:
        """Unit-amplitude ±1 chips of the whole packet."""
        return np.concatenate([self.marker.chips, self.bits])

    @property
    def stream(self) -> np.ndarray:
        return self.amplitude * self.chips

    def __len__(self):
        return len(self.marker) + len(self.bits)


def digital_encode(r: float, marker: PnSignature, spec: QuantizerSpec, amplitude: float = 1.0,
                   slot_len: int | None = None) -> DigitalPacket:
    if slot_len is not None and len(marker) + spec.n_bits > slot_len:
        raise InvalidArgumentError(
            f"{len(marker)} marker chips + {spec.n_bits} bits exceed a {slot_len}-chip slot"
        )
    code = quantize(r, spec)
    return DigitalPacket(marker=marker, bits=code_to_bits(code, spec.n_bits), r=float(r),
                         code=code, amplitude=float(amplitude),
                         clamped=abs(r) > spec.q_range)


def packet_from_bits(marker: PnSignature, bits, amplitude: float = 1.0) -> DigitalPacket:
    bits = np.asarray(bits, dtype=float)
    return DigitalPacket(marker=marker, bits=bits, code=bits_to_code(bits), amplitude=float(amplitude))


def cancel_self_interference(received, own_packet: DigitalPacket, enabled: bool = True) -> np.ndarray:
    """Remove the receiver's own packet from ``received``.

    The own packet is located by correlating its full known chip pattern; the
    peak gives the delay and the end-to-end gain, and the scaled, shifted
    replica is subtracted. With ``enabled=False`` the input is returned
    unchanged.
    """
    rx = as_chips(received)
    if not enabled:
        return rx.copy()
    template = own_packet.chips
    est = locate_signature(rx, template, max_offset=len(rx) - len(template))
    return rx - est.gain_estimate * shift(template, est.offset, len(rx))


@dataclass(frozen=True)
class DigitalDecode:
    r_hat: float
    bits: np.ndarray
    code: int
    offset: int
    gain: float
    bit_errors: int | None = None


def digital_decode(residual, other_marker: PnSignature, spec: QuantizerSpec,
                   true_bits=None) -> DigitalDecode:
    """Frame-sync on ``other_marker``, then hard-detect ``spec.n_bits`` BPSK
    chips following it and dequantise.

    Raises :class:`DegenerateGainError` when the marker peak is too weak to
    give a usable gain sign.
    """
    rx = as_chips(residual)
    packet_len = len(other_marker) + spec.n_bits
    if packet_len > len(rx):
        raise InvalidArgumentError("received frame shorter than a packet")
    est = locate_signature(rx, other_marker, max_offset=len(rx) - packet_len)
    scale = float(np.max(np.abs(rx))) if len(rx) else 0.0
    if est.gain_estimate == 0.0 or abs(est.gain_estimate) < GAIN_RTOL * scale:
        raise DegenerateGainError([other_marker.node])
    start = est.offset + len(other_marker)
    soft = est.gain_estimate * rx[start : start + spec.n_bits]
    bits = np.where(soft >= 0.0, 1.0, -1.0)
    code = bits_to_code(bits)
    errors = None
    if true_bits is not None:
        errors = int(np.count_nonzero(bits != np.asarray(true_bits)))
    return DigitalDecode(r_hat=dequantize(code, spec), bits=bits, code=code,
                         offset=est.offset, gain=est.gain_estimate, bit_errors=errors)
