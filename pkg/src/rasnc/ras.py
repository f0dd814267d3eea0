"""Real Amplitude Scaling (RAS) analog network coding.

A node sends ``[A * marker, X * signature]`` where the data-signature
amplitude ``X`` carries the real message. A receiver locates every node's
packet in the relayed composite, cuts the composite into fixed-length
segments, and writes one linear equation per segment::

    y_k = sum_i  C[k, z_i] * z_i + C[k, x_i] * x_i

``C[k, z_i]`` is the sum of node i's marker chips that fall in segment k and
``C[k, x_i]`` the same for its data signature. ``z_i`` is the end-to-end
gain seen by the marker and ``x_i = X_i * z_i / A``, so ``x_i / z_i``
recovers the amplitude ratio of node i.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGainError, InvalidArgumentError
from .linsys import LeastSquaresProblem, LeastSquaresSolution, solve_ls
from .seqkit import PeakEstimate, PnSignature, as_chips, locate_signature

DEFAULT_SEGMENT_LEN = 16
DEGENERACY_RTOL = 1e-12


def scale_message(r: float) -> float:
    """Map a standard-normal message to a transmit amplitude: ``(100 r + 40) / 40``."""
    return (100.0 * r + 40.0) / 40.0


def unscale_amplitude(x: float) -> float:
    """Inverse of :func:`scale_message`."""
    return (40.0 * x - 40.0) / 100.0


@dataclass(frozen=True)
class RasPacket:
    marker: PnSignature
    data_signature: PnSignature
    scale: float
    r: float
    amplitude: float = 1.0

    @property
    def stream(self) -> np.ndarray:
        return np.concatenate(
            [self.amplitude * self.marker.chips, self.scale * self.data_signature.chips]
        )

    @property
    def ratio(self) -> float:
        """Data-signature amplitude relative to the marker amplitude."""
        return self.scale / self.amplitude


def ras_encode(r: float, marker: PnSignature, data_signature: PnSignature,
               amplitude: float = 1.0) -> RasPacket:
    if len(marker) != len(data_signature):
        raise InvalidArgumentError(
            f"marker ({len(marker)}) and data signature ({len(data_signature)}) differ in length"
        )
    if amplitude <= 0:
        raise InvalidArgumentError("marker amplitude must be positive")
    return RasPacket(marker=marker, data_signature=data_signature,
                     scale=scale_message(r), r=float(r), amplitude=float(amplitude))


@dataclass(frozen=True)
class NodeLayout:
    """The two signatures of one node, as known to every receiver."""

    node: object
    marker: PnSignature
    signature: PnSignature

    @property
    def packet_len(self) -> int:
        return len(self.marker) + len(self.signature)


def locate_all_markers(received, markers, max_offset: int | None = None) -> list[PeakEstimate]:
    """Correlate the composite against each node's marker independently."""
    return [locate_signature(received, m, max_offset=max_offset) for m in markers]


def _placed(chips: np.ndarray, start: int, frame_len: int) -> np.ndarray:
    out = np.zeros(frame_len)
    lo, hi = max(start, 0), min(start + len(chips), frame_len)
    if hi > lo:
        out[lo:hi] = chips[lo - start : hi - start]
    return out


def locate_successive(received, layouts, own_node=None, own_ratio: float | None = None,
                      max_offset: int | None = None) -> list[PeakEstimate]:
    """Locate packets one at a time, strongest first, refitting as it goes.

    At each step every unlocated node is scored at every lag by the energy its
    marker and data signature capture from the current residual. The best
    (node, lag) pair is accepted, all accepted packets are refitted to the
    composite by sample-level least squares, and the residual is updated. The
    receiver's own packet is scored with its known amplitude ratio.

    Results are returned in ``layouts`` order.
    """
    rx = as_chips(received)
    frame_len = len(rx)
    packet_len = max(lay.packet_len for lay in layouts)
    if packet_len > frame_len:
        raise InvalidArgumentError("packet longer than received frame")
    last = frame_len - packet_len if max_offset is None else min(max_offset, frame_len - packet_len)

    found: dict[int, int] = {}
    columns: list[np.ndarray] = []
    resid = rx
    for _ in range(len(layouts)):
        best = None
        for idx, lay in enumerate(layouts):
            if idx in found:
                continue
            L = len(lay.marker)
            cm = np.correlate(resid, lay.marker.chips, "valid")[: last + 1]
            cs = np.correlate(resid[L:], lay.signature.chips, "valid")[: last + 1]
            if lay.node == own_node and own_ratio is not None:
                score = (cm + own_ratio * cs) ** 2 / (L * (1.0 + own_ratio**2))
            else:
                score = (cm**2 + cs**2) / L
            d = int(np.argmax(score))
            if best is None or score[d] > best[0]:
                best = (score[d], idx, d)
        _, idx, d = best
        found[idx] = d
        lay = layouts[idx]
        m = _placed(lay.marker.chips, d, frame_len)
        s = _placed(lay.signature.chips, d + len(lay.marker), frame_len)
        if lay.node == own_node and own_ratio is not None:
            columns.append(m + own_ratio * s)
        else:
            columns.extend([m, s])
        basis = np.column_stack(columns)
        coef, *_ = np.linalg.lstsq(basis, rx, rcond=None)
        resid = rx - basis @ coef

    out = []
    for idx, lay in enumerate(layouts):
        d = found[idx]
        peak = float(np.dot(rx[d : d + len(lay.marker)], lay.marker.chips))
        out.append(PeakEstimate(offset=d, peak_value=peak, gain_estimate=peak / len(lay.marker)))
    return out


@dataclass
class SegmentSystem:
    C: np.ndarray
    Y: np.ndarray
    col_map: dict
    segment_len: int
    n_segments: int
    extra_rows: int = 0

    @property
    def n_rows(self) -> int:
        return self.C.shape[0]


def build_segment_system(received, locations, layouts, segment_len: int = DEFAULT_SEGMENT_LEN) -> SegmentSystem:
    """Assemble ``C`` and ``Y`` for the located packets.

    Columns are ordered ``z_1, x_1, z_2, x_2, ...`` in ``layouts`` order. The
    last segment may be shorter than ``segment_len``. A segment overlapping
    both of a node's signatures gets both partial sums.
    """
    rx = as_chips(received)
    if len(rx) == 0:
        raise InvalidArgumentError("empty received sequence")
    if segment_len < 1:
        raise InvalidArgumentError("segment_len must be >= 1")
    if len(locations) != len(layouts):
        raise InvalidArgumentError("need exactly one location per node")
    frame_len = len(rx)
    starts = np.arange(0, frame_len, segment_len)
    n_seg = len(starts)
    C = np.zeros((n_seg, 2 * len(layouts)))
    col_map = {}
    for i, (lay, loc) in enumerate(zip(layouts, locations)):
        zc, xc = 2 * i, 2 * i + 1
        col_map[lay.node] = (zc, xc)
        m = _placed(lay.marker.chips, loc.offset, frame_len)
        s = _placed(lay.signature.chips, loc.offset + len(lay.marker), frame_len)
        C[:, zc] = np.add.reduceat(m, starts)
        C[:, xc] = np.add.reduceat(s, starts)
    Y = np.add.reduceat(rx, starts)
    return SegmentSystem(C=C, Y=Y, col_map=col_map, segment_len=segment_len, n_segments=n_seg)


def append_own_constraint(system: SegmentSystem, own_ratio: float, own_node) -> SegmentSystem:
    """Append the row ``own_ratio * z_own - x_own = 0``.

    ``own_ratio`` is the receiver's own data-to-marker amplitude ratio, which
    it knows because it sent the packet.
    """
    if own_node not in system.col_map:
        raise InvalidArgumentError(f"node {own_node!r} has no columns in the system")
    zc, xc = system.col_map[own_node]
    row = np.zeros((1, system.C.shape[1]))
    row[0, zc] = own_ratio
    row[0, xc] = -1.0
    return SegmentSystem(
        C=np.vstack([system.C, row]),
        Y=np.append(system.Y, 0.0),
        col_map=dict(system.col_map),
        segment_len=system.segment_len,
        n_segments=system.n_segments,
        extra_rows=system.extra_rows + 1,
    )


@dataclass(frozen=True)
class UnknownSolution:
    z: dict
    x: dict

    @classmethod
    def from_vector(cls, v, col_map) -> "UnknownSolution":
        return cls(z={n: float(v[zc]) for n, (zc, _) in col_map.items()},
                   x={n: float(v[xc]) for n, (_, xc) in col_map.items()})


def decode_ratios(solution: UnknownSolution, own_node=None) -> dict:
    """``x_i / z_i`` for every node except ``own_node``.

    Raises :class:`DegenerateGainError` if any ``|z_i|`` is below
    ``1e-12 * max|z|``.
    """
    z_inf = max((abs(v) for v in solution.z.values()), default=0.0)
    floor = DEGENERACY_RTOL * z_inf
    out, bad = {}, []
    for node, z in solution.z.items():
        if node == own_node:
            continue
        if z_inf == 0.0 or abs(z) < floor:
            bad.append(node)
        else:
            out[node] = solution.x[node] / z
    if bad:
        raise DegenerateGainError(bad)
    return out


@dataclass
class RasDecodeResult:
    estimates: dict
    ratios: dict
    solution: UnknownSolution
    locations: list
    system: SegmentSystem
    lsq: LeastSquaresSolution = field(repr=False)


def ras_decode(received, own_node, own_r: float, layouts, segment_len: int = DEFAULT_SEGMENT_LEN,
               amplitude: float = 1.0, locator: str = "successive",
               max_offset: int | None = None) -> RasDecodeResult:
    """Decode every other node's message from a relayed composite.

    Locate packets, build the segment system, add the own-message row, solve
    by least squares, take ``x / z`` and undo the amplitude scaling.
    ``locator="correlate"`` uses independent marker correlation instead of
    successive location.
    """
    own_ratio = scale_message(own_r) / amplitude
    if locator == "successive":
        locations = locate_successive(received, layouts, own_node, own_ratio, max_offset)
    elif locator == "correlate":
        locations = locate_all_markers(received, [lay.marker for lay in layouts], max_offset)
    else:
        raise InvalidArgumentError(f"unknown locator {locator!r}")
    system = build_segment_system(received, locations, layouts, segment_len)
    system = append_own_constraint(system, own_ratio, own_node)
    lsq = solve_ls(LeastSquaresProblem(system.C, system.Y))
    solution = UnknownSolution.from_vector(lsq.v, system.col_map)
    ratios = decode_ratios(solution, own_node)
    estimates = {n: unscale_amplitude(amplitude * q) for n, q in ratios.items()}
    return RasDecodeResult(estimates=estimates, ratios=ratios, solution=solution,
                           locations=locations, system=system, lsq=lsq)

