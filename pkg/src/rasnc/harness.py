"""Monte Carlo sweeps over SNR, aggregation and CSV output."""
from __future__ import annotations

import csv
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import ChannelConfig
from .errors import InfeasiblePowerError, InvalidArgumentError
from .ras import DEFAULT_SEGMENT_LEN
from .schemes import ANC, CHAIN3, DIGITAL, SCHEMES, STAR, Scenario, geometry, run_scheme

CSV_COLUMNS = (
    "scheme", "topology", "n_nodes", "signature_len", "segment_len",
    "snr_db", "trials", "failures", "mean_error", "median_error",
)

# The payload amplitude X = 2.5 R + 1 with R ~ N(0, 1) has E[X^2] = 7.25, so the
# payload half of an ANC packet contributes 7.25 / 2 per chip.
ANC_PAYLOAD_POWER = 3.625


def anc_power(amplitude: float) -> float:
    """Expected per-chip power of an ANC packet with marker amplitude ``amplitude``."""
    if amplitude < 0:
        raise InvalidArgumentError("amplitude must be >= 0")
    return 0.5 * amplitude**2 + ANC_PAYLOAD_POWER


@dataclass(frozen=True)
class SweepConfig:
    schemes: tuple = (ANC,)
    topology: str = STAR
    n_nodes: int = 3
    signature_len: int = 128
    segment_len: int = DEFAULT_SEGMENT_LEN
    snr_grid_db: tuple = (0.0,)
    trials: int = 2000
    time_budget: int = 180
    seed: int = 0
    power_mode: str = "unit"
    power_budget: float | None = None
    cancellation: bool = True
    noise_at_relay: bool = False
    noise: bool = True
    max_delay: int = 16
    quant_range: float = 4.0
    locator: str = "successive"

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        if self.trials < 1:
            raise InvalidArgumentError("trials must be >= 1")
        if not self.snr_grid_db:
            raise InvalidArgumentError("SNR grid is empty")
        if not self.schemes:
            raise InvalidArgumentError("no schemes selected")
        for s in self.schemes:
            if s not in SCHEMES:
                raise InvalidArgumentError(f"unknown scheme {s!r}")
        if self.topology == STAR:
            if self.n_nodes < 2:
                raise InvalidArgumentError("star topology needs at least 2 source nodes")
            if any(s in DIGITAL for s in self.schemes):
                raise InvalidArgumentError("digital schemes run on the chain3 topology only")
        elif self.topology == CHAIN3:
            if self.n_nodes != 2:
                raise InvalidArgumentError("chain3 has exactly 2 source nodes")
        else:
            raise InvalidArgumentError(f"unknown topology {self.topology!r}")
        if self.power_mode not in ("unit", "equal"):
            raise InvalidArgumentError(f"unknown power mode {self.power_mode!r}")
        if self.power_mode == "equal" and self.power_budget is None:
            raise InvalidArgumentError("equal power mode needs a power budget")
        if self.segment_len < 1 or self.signature_len < 1 or self.max_delay < 0:
            raise InvalidArgumentError("lengths must be positive")


def normalize_power(scheme: str, config: SweepConfig) -> float:
    """Marker/chip amplitude for ``scheme``.

    Unit mode uses 1 everywhere. Equal mode gives every scheme a per-chip
    power of ``config.power_budget``: digital packets have power ``A**2``,
    ANC packets ``anc_power(A)`` with the payload scaling unchanged.
    """
    if config.power_mode == "unit":
        return 1.0
    p0 = float(config.power_budget)
    if scheme == ANC:
        if p0 < ANC_PAYLOAD_POWER:
            raise InfeasiblePowerError(
                f"power budget {p0} is below the ANC payload power {ANC_PAYLOAD_POWER}"
            )
        return math.sqrt(2.0 * (p0 - ANC_PAYLOAD_POWER))
    if p0 <= 0:
        raise InfeasiblePowerError("power budget must be positive")
    return math.sqrt(p0)


def scheme_code(scheme: str) -> int:
    return zlib.crc32(scheme.encode())


def trial_seed(config: SweepConfig, scheme: str, snr_index: int, trial_index: int) -> tuple:
    return (int(config.seed), scheme_code(scheme), int(snr_index), int(trial_index))


def scenario_for(config: SweepConfig, scheme: str, snr_db: float) -> Scenario:
    amp = normalize_power(scheme, config)
    channel = ChannelConfig(snr_db=snr_db, max_delay=config.max_delay,
                            noise_at_relay=config.noise_at_relay, rng_seed=config.seed,
                            noise=config.noise)
    return Scenario(
        topology=config.topology, n_nodes=config.n_nodes, signature_len=config.signature_len,
        segment_len=config.segment_len, time_budget=config.time_budget, channel=channel,
        anc_amplitude=amp if scheme == ANC else 1.0,
        digital_amplitude=amp if scheme in DIGITAL else 1.0,
        cancellation=config.cancellation, quant_range=config.quant_range, locator=config.locator,
    )


@dataclass(frozen=True)
class PointResult:
    """Aggregates for one (scheme, SNR) point.

    ``failures`` counts failed decodes (one per source-destination direction);
    error statistics use the remaining directions only.
    """

    scheme: str
    snr_db: float
    signature_len: int
    trials: int
    directions: int
    failures: int
    mean_error: float
    median_error: float
    rms_error: float
    rms_message: float
    bit_errors: int = 0
    bits: int = 0

    @property
    def failure_rate(self) -> float:
        return self.failures / self.directions if self.directions else float("nan")

    @property
    def relative_error(self) -> float:
        """Mean absolute error over the RMS of the transmitted messages."""
        return self.mean_error / self.rms_message

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else float("nan")


def aggregate(scheme: str, snr_db: float, signature_len: int, records) -> PointResult:
    dirs = [d for rec in records for d in rec.directions]
    good = [d for d in dirs if not d.failed]
    err = np.array([d.error for d in good])
    msg = np.array([d.r_true for d in good])
    nan = float("nan")
    bit_dirs = [d for d in good if d.bit_errors is not None]
    return PointResult(
        scheme=scheme, snr_db=float(snr_db), signature_len=signature_len,
        trials=len(records), directions=len(dirs), failures=len(dirs) - len(good),
        mean_error=float(err.mean()) if len(err) else nan,
        median_error=float(np.median(err)) if len(err) else nan,
        rms_error=float(np.sqrt(np.mean(err**2))) if len(err) else nan,
        rms_message=float(np.sqrt(np.mean(msg**2))) if len(msg) else nan,
        bit_errors=sum(d.bit_errors for d in bit_dirs),
        bits=sum(d.n_bits for d in bit_dirs),
    )


@dataclass
class SweepResult:
    config: SweepConfig
    points: list = field(default_factory=list)
    records: dict = field(default_factory=dict)

    def curve(self, scheme: str) -> list:
        return sorted((p for p in self.points if p.scheme == scheme), key=lambda p: p.snr_db)

    def point(self, scheme: str, snr_db: float) -> PointResult:
        for p in self.points:
            if p.scheme == scheme and p.snr_db == float(snr_db):
                return p
        raise KeyError((scheme, snr_db))


def _run_point(args):
    config, scheme, snr_index, keep = args
    snr = config.snr_grid_db[snr_index]
    scenario = scenario_for(config, scheme, snr)
    records = [run_scheme(scheme, scenario, trial_seed(config, scheme, snr_index, t))
               for t in range(config.trials)]
    sig_len = geometry(scheme, config.topology, config.signature_len, config.time_budget).marker_len
    return aggregate(scheme, snr, sig_len, records), (records if keep else None)


def run_sweep(config: SweepConfig, workers: int = 1, keep_records: bool = False) -> SweepResult:
    """Run every (scheme, SNR, trial) combination.

    Each trial draws from its own stream keyed by (seed, scheme, SNR index,
    trial index), so results do not depend on ``workers``.
    """
    for scheme in config.schemes:
        normalize_power(scheme, config)
    jobs = [(config, scheme, k, keep_records)
            for scheme in sorted(set(config.schemes))
            for k in range(len(config.snr_grid_db))]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run_point, jobs))
    else:
        outputs = [_run_point(job) for job in jobs]
    result = SweepResult(config=config)
    for (_, scheme, k, _), (point, records) in zip(jobs, outputs):
        result.points.append(point)
        if keep_records:
            result.records[(scheme, config.snr_grid_db[k])] = records
    result.points.sort(key=lambda p: (p.scheme, p.snr_db))
    return result


@dataclass(frozen=True)
class ThresholdResult:
    threshold_db: float
    plateau_level: float
    plateau_found: bool


def detect_threshold(curve, scheme: str | None = None, fraction: float = 0.5,
                     flat_rtol: float = 0.25) -> ThresholdResult:
    """Lowest SNR at which the mean error drops below ``fraction`` of the
    low-SNR plateau.

    ``curve`` is a :class:`SweepResult` (with ``scheme``) or a sequence of
    ``(snr_db, mean_error)`` pairs. The plateau level is the mean of the
    three lowest-SNR points; it counts as a plateau only if those points lie
    within ``flat_rtol`` of that level of each other. The crossing is
    linearly interpolated between grid points. Without a plateau or a
    crossing the grid minimum is returned with ``plateau_found=False``.
    """
    if isinstance(curve, SweepResult):
        pts = [(p.snr_db, p.mean_error) for p in curve.curve(scheme)]
    else:
        pts = sorted((float(s), float(e)) for s, e in curve)
    if len(pts) < 4:
        raise InvalidArgumentError("need at least four grid points")
    snr = np.array([p[0] for p in pts])
    err = np.array([p[1] for p in pts])
    low = err[:3]
    level = float(low.mean())
    spread = float(low.max() - low.min())
    if not (np.all(np.isfinite(low)) and spread < flat_rtol * level):
        return ThresholdResult(float(snr[0]), level, False)
    target = fraction * level
    for k in range(3, len(err)):
        if err[k] < target:
            e0, e1 = err[k - 1], err[k]
            s0, s1 = snr[k - 1], snr[k]
            if not e0 > target:
                return ThresholdResult(float(s0), level, True)
            t = (e0 - target) / (e0 - e1)
            return ThresholdResult(float(s0 + t * (s1 - s0)), level, True)
    return ThresholdResult(float(snr[0]), level, False)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def emit_csv(result: SweepResult, path) -> Path:
    """Write one row per (scheme, SNR), schemes in lexicographic order and
    SNR ascending."""
    path = Path(path)
    cfg = result.config
    rows = sorted(result.points, key=lambda p: (p.scheme, p.snr_db))
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for p in rows:
                writer.writerow([_fmt(v) for v in (
                    p.scheme, cfg.topology, cfg.n_nodes, p.signature_len, cfg.segment_len,
                    p.snr_db, p.trials, p.failures, p.mean_error, p.median_error,
                )])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc
    return path


PLOT_TEMPLATE = '''import csv
import matplotlib.pyplot as plt

curves = {{}}
with open({csv!r}) as fh:
    for row in csv.DictReader(fh):
        curves.setdefault(row["scheme"], []).append(
            (float(row["snr_db"]), float(row["mean_error"])))
for scheme, pts in sorted(curves.items()):
    pts.sort()
    plt.semilogy([p[0] for p in pts], [p[1] for p in pts], marker="o", label=scheme)
plt.xlabel("SNR (dB)")
plt.ylabel("mean |r_hat - r|")
plt.grid(True, which="both")
plt.legend()
plt.savefig({png!r})
'''


def emit_plot_script(csv_path, path) -> Path:
    """Write a small matplotlib script that plots the CSV as error vs SNR."""
    csv_path, path = Path(csv_path), Path(path)
    path.write_text(PLOT_TEMPLATE.format(csv=str(csv_path), png=str(csv_path.with_suffix(".png"))))
    return path


def with_grid(config: SweepConfig, grid) -> SweepConfig:
    return replace(config, snr_grid_db=tuple(grid))
