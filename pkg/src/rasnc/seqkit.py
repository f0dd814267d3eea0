"""PN signatures and correlation-based signature location.

Chip streams are plain 1-D ``float64`` numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

FIRST = "first"
SECOND = "second"


@dataclass(frozen=True, eq=False)
class PnSignature:
    """A ±1 chip sequence owned by one node.

    ``slot`` is ``"first"`` for the marker and ``"second"`` for the data
    signature.
    """

    chips: np.ndarray
    seed: object = None
    node: object = None
    slot: str = FIRST

    def __len__(self):
        return len(self.chips)


@dataclass(frozen=True)
class PeakEstimate:
    offset: int
    peak_value: float
    gain_estimate: float


def as_chips(x) -> np.ndarray:
    """Return the chips of a signature, or ``x`` itself as a float array."""
    if isinstance(x, PnSignature):
        return x.chips
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise InvalidArgumentError("chip sequences must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("chip sequences must be finite")
    return arr


def _seed_entropy(seed):
    if isinstance(seed, (tuple, list)):
        return [int(s) for s in seed]
    return seed


def generate_pn(seed, length: int, node=None, slot: str = FIRST) -> PnSignature:
    """Draw ``length`` i.i.d. equiprobable ±1 chips from a seeded generator.

    ``seed`` may be an int or a tuple of ints; the same seed always gives the
    same chips.
    """
    if length < 1:
        raise InvalidArgumentError(f"PN length must be >= 1, got {length}")
    rng = np.random.default_rng(_seed_entropy(seed))
    chips = 2.0 * rng.integers(0, 2, size=int(length)) - 1.0
    chips.setflags(write=False)
    return PnSignature(chips=chips, seed=seed, node=node, slot=slot)


def cross_correlate(received, signature) -> np.ndarray:
    """Unnormalised sliding inner product of ``signature`` over ``received``.

    ``out[d] = sum_k received[d + k] * signature[k]`` for every lag that keeps
    the signature inside the received stream.
    """
    rx = as_chips(received)
    sig = as_chips(signature)
    if len(sig) == 0:
        raise InvalidArgumentError("empty signature")
    if len(sig) > len(rx):
        raise InvalidArgumentError(
            f"signature ({len(sig)} chips) longer than received ({len(rx)} chips)"
        )
    return np.correlate(rx, sig, mode="valid")


def locate_signature(received, signature, max_offset: int | None = None) -> PeakEstimate:
    """Find the lag of the largest correlation peak.

    Ties go to the smallest lag. ``max_offset`` restricts the search to lags
    ``0..max_offset``. The gain estimate is the peak divided by the signature
    energy, i.e. by its length for ±1 chips.
    """
    corr = cross_correlate(received, signature)
    if max_offset is not None:
        if max_offset < 0:
            raise InvalidArgumentError("max_offset must be non-negative")
        corr = corr[: max_offset + 1]
    offset = int(np.argmax(corr))
    peak = float(corr[offset])
    energy = float(np.dot(as_chips(signature), as_chips(signature)))
    if energy == 0.0:
        raise InvalidArgumentError("signature has zero energy")
    return PeakEstimate(offset=offset, peak_value=peak, gain_estimate=peak / energy)
