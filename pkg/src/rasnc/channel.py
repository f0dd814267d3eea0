"""Chip-level relay channel: integer delay, Rayleigh block fading, AWGN.

Every link carries one :class:`LinkRealization` per packet block. Composing a
source link and a relay link gives an end-to-end gain equal to the product of
the link gains and an end-to-end delay equal to the sum of the link delays.
The relay forwards with unit amplification.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import FrameOverflowError, InvalidArgumentError
from .seqkit import as_chips

# Rayleigh scale giving E[h^2] = 2 * scale^2 = 1
RAYLEIGH_SCALE = math.sqrt(0.5)


@dataclass(frozen=True)
class LinkRealization:
    gain: float
    delay: int

    def __post_init__(self):
        if not self.gain >= 0.0:
            raise InvalidArgumentError(f"link gain must be >= 0, got {self.gain}")
        if self.delay < 0:
            raise InvalidArgumentError(f"link delay must be >= 0, got {self.delay}")


@dataclass(frozen=True)
class ChannelConfig:
    """Channel parameters for one SNR point.

    ``snr_db`` is the per-hop SNR relative to ``ref_power`` (the power of an
    unscaled ±1 chip). ``noise=False`` switches AWGN off everywhere, which is
    how noiseless runs are expressed.
    """

    snr_db: float = 0.0
    max_delay: int = 16
    noise_at_relay: bool = False
    rng_seed: object = 0
    ref_power: float = 1.0
    noise: bool = True

    def __post_init__(self):
        if self.max_delay < 0:
            raise InvalidArgumentError("max_delay must be >= 0")
        if not math.isfinite(self.snr_db):
            raise InvalidArgumentError("snr_db must be finite")
        if self.ref_power <= 0:
            raise InvalidArgumentError("ref_power must be positive")

    @property
    def noise_variance(self) -> float:
        return self.ref_power / 10.0 ** (self.snr_db / 10.0)

    def make_rng(self) -> np.random.Generator:
        seed = self.rng_seed
        if isinstance(seed, (tuple, list)):
            seed = [int(s) for s in seed]
        return np.random.default_rng(seed)


@dataclass(frozen=True)
class EndToEndGain:
    g: float
    total_delay: int


def compose(*links: LinkRealization) -> EndToEndGain:
    """End-to-end gain and delay of links traversed in sequence."""
    g = reduce(lambda a, b: a * b, (link.gain for link in links), 1.0)
    return EndToEndGain(g=g, total_delay=sum(link.delay for link in links))


def draw_link(cfg: ChannelConfig, rng: np.random.Generator) -> LinkRealization:
    """Draw one block realization: Rayleigh gain with unit mean square and a
    delay uniform on ``0..max_delay``."""
    gain = float(rng.rayleigh(RAYLEIGH_SCALE))
    delay = int(rng.integers(0, cfg.max_delay + 1))
    return LinkRealization(gain=gain, delay=delay)


def add_noise(signal, cfg: ChannelConfig, rng: np.random.Generator) -> np.ndarray:
    x = as_chips(signal)
    if not cfg.noise:
        return x.copy()
    return x + rng.normal(0.0, math.sqrt(cfg.noise_variance), size=x.shape)


def shift(signal, delay: int, frame_len: int) -> np.ndarray:
    """Place ``signal`` at ``delay`` inside a zero frame of ``frame_len`` chips."""
    x = as_chips(signal)
    if delay < 0:
        raise InvalidArgumentError("delay must be >= 0")
    if len(x) + delay > frame_len:
        raise FrameOverflowError(
            f"{len(x)} chips delayed by {delay} exceed frame of {frame_len}"
        )
    out = np.zeros(frame_len)
    out[delay : delay + len(x)] = x
    return out


def propagate(
    signal,
    link: LinkRealization,
    cfg: ChannelConfig,
    frame_len: int,
    rng: np.random.Generator | None = None,
    noisy: bool = True,
) -> np.ndarray:
    """Scale by the link gain, delay, and (if ``noisy`` and ``cfg.noise``) add
    AWGN of variance ``cfg.noise_variance`` on every sample of the frame."""
    out = link.gain * shift(signal, link.delay, frame_len)
    if noisy and cfg.noise:
        if rng is None:
            rng = cfg.make_rng()
        out = add_noise(out, cfg, rng)
    return out


def superpose(signals) -> np.ndarray:
    arrays = [as_chips(s) for s in signals]
    if not arrays:
        raise InvalidArgumentError("nothing to superpose")
    n = len(arrays[0])
    if any(len(a) != n for a in arrays):
        raise InvalidArgumentError("superposed signals must have equal length")
    return np.sum(arrays, axis=0)


def relay_forward(
    received,
    relay_link: LinkRealization,
    cfg: ChannelConfig,
    frame_len: int,
    rng: np.random.Generator | None = None,
    noisy: bool = True,
) -> np.ndarray:
    """Amplify-and-forward with unit relay gain: the relay retransmits exactly
    what it heard over ``relay_link``."""
    return propagate(received, relay_link, cfg, frame_len, rng=rng, noisy=noisy)


def relay_receive(sources, uplinks, cfg: ChannelConfig, rng: np.random.Generator) -> np.ndarray:
    """Superpose simultaneous uplink transmissions at the relay.

    The relay frame is ``longest packet + max_delay`` chips. Noise is added
    here only when ``cfg.noise_at_relay`` is set.
    """
    packet_len = max(len(as_chips(s)) for s in sources)
    frame_len = packet_len + cfg.max_delay
    at_relay = superpose(
        [propagate(s, link, cfg, frame_len, noisy=False) for s, link in zip(sources, uplinks)]
    )
    if cfg.noise_at_relay:
        at_relay = add_noise(at_relay, cfg, rng)
    return at_relay

