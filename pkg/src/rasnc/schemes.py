"""End-to-end trial runners for each relaying scheme.

``anc_ras``  two slots: simultaneous uplink, amplify-and-forward, RAS decode.
``dpnc``     two slots like ``anc_ras`` but with digital packets, decoded
             after self-interference cancellation.
``dnc_xor``  three slots: each source to the relay, relay broadcasts the XOR
             of the decoded bit vectors.
``routing``  four slots: the relay decodes and re-sends each direction.

In the three-node chain the time budget is split evenly over a scheme's
slots; each slot carries one packet of ``slot_len // 2`` marker chips and
the remaining chips as payload.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelConfig, draw_link, propagate, relay_forward, relay_receive
from .digital import (
    QuantizerSpec,
    bits_to_code,
    cancel_self_interference,
    dequantize,
    digital_decode,
    digital_encode,
    packet_from_bits,
    xor_bits,
)
from .errors import DegenerateGainError, InvalidArgumentError, RankDeficientError
from .ras import DEFAULT_SEGMENT_LEN, NodeLayout, ras_decode, ras_encode
from .seqkit import FIRST, SECOND, generate_pn

ANC = "anc_ras"
DPNC = "dpnc"
DNC = "dnc_xor"
ROUTING = "routing"
SCHEMES = (ANC, DNC, ROUTING, DPNC)
SLOTS = {ANC: 2, DPNC: 2, DNC: 3, ROUTING: 4}
DIGITAL = (DPNC, DNC, ROUTING)

CHAIN3 = "chain3"
STAR = "star"
RELAY = "relay"

DECODE_ERRORS = (RankDeficientError, DegenerateGainError)


@dataclass(frozen=True)
class Geometry:
    slot_len: int
    marker_len: int
    payload_len: int


def geometry(scheme: str, topology: str, signature_len: int, time_budget: int) -> Geometry:
    """Packet dimensions for ``scheme``.

    In a star, RAS packets use ``signature_len`` chips per signature. In the
    chain, the slot is ``time_budget // slots``; RAS uses ``slot // 2`` chips
    for both signatures, digital packets ``slot // 2`` marker chips and the
    rest as bits.
    """
    if scheme not in SLOTS:
        raise InvalidArgumentError(f"unknown scheme {scheme!r}")
    if topology == STAR:
        if scheme != ANC:
            raise InvalidArgumentError(f"scheme {scheme!r} is only defined on the chain3 topology")
        return Geometry(slot_len=2 * signature_len, marker_len=signature_len,
                        payload_len=signature_len)
    if topology != CHAIN3:
        raise InvalidArgumentError(f"unknown topology {topology!r}")
    slot = time_budget // SLOTS[scheme]
    marker = slot // 2
    if marker < 1 or slot - marker < 1:
        raise InvalidArgumentError(f"time budget {time_budget} too small for {scheme}")
    payload = marker if scheme == ANC else slot - marker
    return Geometry(slot_len=slot, marker_len=marker, payload_len=payload)


@dataclass(frozen=True)
class Scenario:
    topology: str = CHAIN3
    n_nodes: int = 2
    signature_len: int = 128
    segment_len: int = DEFAULT_SEGMENT_LEN
    time_budget: int = 180
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    anc_amplitude: float = 1.0
    digital_amplitude: float = 1.0
    cancellation: bool = True
    quant_range: float = 4.0
    locator: str = "successive"

    def __post_init__(self):
        if self.topology == CHAIN3 and self.n_nodes != 2:
            raise InvalidArgumentError("chain3 has exactly two source nodes")
        if self.topology == STAR and self.n_nodes < 2:
            raise InvalidArgumentError("a star needs at least two source nodes")


@dataclass(frozen=True)
class DirectionRecord:
    source: object
    dest: object
    r_true: float
    r_hat: float
    error: float
    failed: bool = False
    bit_errors: int | None = None
    n_bits: int | None = None


@dataclass(frozen=True)
class TrialRecord:
    scheme: str
    snr_db: float
    seed: tuple
    directions: tuple


def _ok(source, dest, r, r_hat, bit_errors=None, n_bits=None) -> DirectionRecord:
    return DirectionRecord(source, dest, float(r), float(r_hat), abs(float(r_hat) - float(r)),
                           bit_errors=bit_errors, n_bits=n_bits)


def _failed(source, dest, r, n_bits=None) -> DirectionRecord:
    return DirectionRecord(source, dest, float(r), float("nan"), float("nan"), failed=True,
                           n_bits=n_bits)


def _pn(rng, length, node, slot=FIRST):
    return generate_pn(int(rng.integers(0, 2**63 - 1)), length, node=node, slot=slot)


def _anc_trial(sc: Scenario, rng, geo: Geometry) -> list:
    cfg = sc.channel
    n = sc.n_nodes
    receivers = range(n) if sc.topology == CHAIN3 else (0,)
    L = geo.marker_len
    layouts = [NodeLayout(i, _pn(rng, L, i, FIRST), _pn(rng, L, i, SECOND)) for i in range(n)]
    r = rng.standard_normal(n)
    streams = [ras_encode(r[i], lay.marker, lay.signature, sc.anc_amplitude).stream
               for i, lay in enumerate(layouts)]
    uplinks = [draw_link(cfg, rng) for _ in range(n)]
    at_relay = relay_receive(streams, uplinks, cfg, rng)
    out = []
    for j in receivers:
        down = draw_link(cfg, rng)
        y = relay_forward(at_relay, down, cfg, len(at_relay) + cfg.max_delay, rng=rng)
        try:
            res = ras_decode(y, j, r[j], layouts, sc.segment_len, sc.anc_amplitude, sc.locator)
        except DECODE_ERRORS:
            out.extend(_failed(i, j, r[i]) for i in range(n) if i != j)
            continue
        out.extend(_ok(i, j, r[i], res.estimates[i]) for i in range(n) if i != j)
    return out


def _dpnc_trial(sc: Scenario, rng, geo: Geometry) -> list:
    cfg = sc.channel
    spec = QuantizerSpec(geo.payload_len, sc.quant_range)
    markers = [_pn(rng, geo.marker_len, i) for i in range(2)]
    r = rng.standard_normal(2)
    packets = [digital_encode(r[i], markers[i], spec, sc.digital_amplitude, geo.slot_len)
               for i in range(2)]
    uplinks = [draw_link(cfg, rng) for _ in range(2)]
    at_relay = relay_receive([p.stream for p in packets], uplinks, cfg, rng)
    out = []
    for j in range(2):
        i = 1 - j
        down = draw_link(cfg, rng)
        y = relay_forward(at_relay, down, cfg, len(at_relay) + cfg.max_delay, rng=rng)
        resid = cancel_self_interference(y, packets[j], enabled=sc.cancellation)
        try:
            dec = digital_decode(resid, markers[i], spec, true_bits=packets[i].bits)
        except DECODE_ERRORS:
            out.append(_failed(i, j, r[i], spec.n_bits))
            continue
        out.append(_ok(i, j, r[i], dec.r_hat, dec.bit_errors, spec.n_bits))
    return out


def _hop(stream, cfg: ChannelConfig, rng, noisy: bool):
    link = draw_link(cfg, rng)
    return propagate(stream, link, cfg, len(stream) + cfg.max_delay, rng=rng, noisy=noisy)


def _dnc_trial(sc: Scenario, rng, geo: Geometry) -> list:
    cfg = sc.channel
    spec = QuantizerSpec(geo.payload_len, sc.quant_range)
    markers = [_pn(rng, geo.marker_len, i) for i in range(2)]
    relay_marker = _pn(rng, geo.marker_len, RELAY)
    r = rng.standard_normal(2)
    packets = [digital_encode(r[i], markers[i], spec, sc.digital_amplitude, geo.slot_len)
               for i in range(2)]
    try:
        heard = [digital_decode(_hop(p.stream, cfg, rng, cfg.noise_at_relay), markers[i], spec).bits
                 for i, p in enumerate(packets)]
    except DECODE_ERRORS:
        return [_failed(1 - j, j, r[1 - j], spec.n_bits) for j in range(2)]
    coded = packet_from_bits(relay_marker, xor_bits(heard[0], heard[1]), sc.digital_amplitude)
    out = []
    for j in range(2):
        i = 1 - j
        y = _hop(coded.stream, cfg, rng, True)
        try:
            dec = digital_decode(y, relay_marker, spec)
        except DECODE_ERRORS:
            out.append(_failed(i, j, r[i], spec.n_bits))
            continue
        bits = xor_bits(dec.bits, packets[j].bits)
        errors = int(np.count_nonzero(bits != packets[i].bits))
        out.append(_ok(i, j, r[i], dequantize(bits_to_code(bits), spec), errors, spec.n_bits))
    return out


def _routing_trial(sc: Scenario, rng, geo: Geometry) -> list:
    cfg = sc.channel
    spec = QuantizerSpec(geo.payload_len, sc.quant_range)
    markers = [_pn(rng, geo.marker_len, i) for i in range(2)]
    relay_marker = _pn(rng, geo.marker_len, RELAY)
    r = rng.standard_normal(2)
    out = []
    for i in range(2):
        j = 1 - i
        packet = digital_encode(r[i], markers[i], spec, sc.digital_amplitude, geo.slot_len)
        try:
            relayed = digital_decode(_hop(packet.stream, cfg, rng, cfg.noise_at_relay),
                                     markers[i], spec)
            forward = packet_from_bits(relay_marker, relayed.bits, sc.digital_amplitude)
            dec = digital_decode(_hop(forward.stream, cfg, rng, True), relay_marker, spec,
                                 true_bits=packet.bits)
        except DECODE_ERRORS:
            out.append(_failed(i, j, r[i], spec.n_bits))
            continue
        out.append(_ok(i, j, r[i], dec.r_hat, dec.bit_errors, spec.n_bits))
    return out


_RUNNERS = {ANC: _anc_trial, DPNC: _dpnc_trial, DNC: _dnc_trial, ROUTING: _routing_trial}


def run_scheme(scheme: str, scenario: Scenario, seed) -> TrialRecord:
    """Run one independent trial of ``scheme``; identical seeds give identical records."""
    if scheme not in _RUNNERS:
        raise InvalidArgumentError(f"unknown scheme {scheme!r}")
    if scheme in DIGITAL and scenario.topology != CHAIN3:
        raise InvalidArgumentError(f"{scheme} runs on the chain3 topology only")
    geo = geometry(scheme, scenario.topology, scenario.signature_len, scenario.time_budget)
    seed = tuple(int(s) for s in seed) if isinstance(seed, (tuple, list)) else (int(seed),)
    rng = np.random.default_rng(list(seed))
    directions = _RUNNERS[scheme](scenario, rng, geo)
    return TrialRecord(scheme=scheme, snr_db=scenario.channel.snr_db, seed=seed,
                       directions=tuple(directions))
