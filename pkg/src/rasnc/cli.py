"""Command-line entry point.

Exit status: 0 on success, 2 on usage errors, 3 when a run fails.
"""
from __future__ import annotations

import argparse
import dataclasses
import datetime
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InfeasiblePowerError, InvalidArgumentError
from .harness import SweepConfig, emit_csv, emit_plot_script, normalize_power, run_sweep
from .schemes import ANC, CHAIN3, DNC, DPNC, ROUTING, STAR, geometry

EXIT_USAGE = 2
EXIT_RUNTIME = 3

SCHEME_FLAGS = {
    "ras": (ANC,),
    "dnc": (DNC,),
    "routing": (ROUTING,),
    "dpnc": (DPNC,),
    "all": (ANC, DNC, ROUTING),
}
STANDARD_GRID = (-10.0, 80.0, 5.0)
DEFAULT_GRID = (-10.0, 40.0, 5.0)
DEFAULT_OUT = "sweep.csv"
FIG7_POWER = 4.125


def snr_grid(lo: float, hi: float, step: float) -> tuple:
    if step <= 0:
        raise InvalidArgumentError("--snr-step must be positive")
    if hi < lo:
        raise InvalidArgumentError("--snr-max must be >= --snr-min")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return tuple(float(round(lo + k * step, 10)) for k in range(n))


def scenario_fig7(seed: int = 0) -> SweepConfig:
    """Three-node chain, 180-chip budget, all three schemes at equal per-chip power."""
    return SweepConfig(
        schemes=(ANC, DNC, ROUTING), topology=CHAIN3, n_nodes=2, time_budget=180,
        snr_grid_db=snr_grid(*STANDARD_GRID), seed=seed,
        power_mode="equal", power_budget=FIG7_POWER,
    )


def slot_lengths(config: SweepConfig) -> dict:
    return {s: geometry(s, config.topology, config.signature_len, config.time_budget).slot_len
            for s in config.schemes}


def _power(text: str):
    if text == "unit":
        return "unit", None
    if text.startswith("equal:"):
        try:
            return "equal", float(text.split(":", 1)[1])
        except ValueError:
            pass
    raise argparse.ArgumentTypeError(f"expected 'unit' or 'equal:P0', got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rasnc",
        description="Monte Carlo error-vs-SNR sweeps for relay network coding schemes.",
    )
    p.add_argument("--preset", choices=["fig7"], help="start from a preset scenario")
    p.add_argument("--manifest", type=Path, help="re-run the configuration stored in a manifest")
    p.add_argument("--scheme", choices=sorted(SCHEME_FLAGS), default="ras")
    p.add_argument("--topology", choices=[CHAIN3, STAR],
                   help="default: star for ras, chain3 otherwise")
    p.add_argument("--nodes", type=int, help="source nodes (star default 3; chain3 is always 2)")
    p.add_argument("--sig-len", type=int, default=128, help="star signature length in chips")
    p.add_argument("--segment-len", type=int, default=16)
    p.add_argument("--snr-min", type=float, default=DEFAULT_GRID[0])
    p.add_argument("--snr-max", type=float, default=DEFAULT_GRID[1])
    p.add_argument("--snr-step", type=float, default=DEFAULT_GRID[2])
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--budget", type=int, default=180, help="chain3 time budget in chips")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--power", type=_power, default=("unit", None), metavar="{unit,equal:P0}")
    p.add_argument("--no-cancellation", action="store_true",
                   help="disable self-interference cancellation (dpnc control arm)")
    p.add_argument("--noise-at-relay", action="store_true")
    p.add_argument("--noiseless", action="store_true", help="disable AWGN everywhere")
    p.add_argument("--max-delay", type=int, default=16, help="per-link max delay in chips")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path(DEFAULT_OUT))
    p.add_argument("--plot-script", action="store_true", help="also write a matplotlib script")
    p.add_argument("--dry-run", action="store_true", help="print the resolved manifest and exit")
    return p


def _given(argv, *flags) -> bool:
    return any(a == f or a.startswith(f + "=") for a in argv for f in flags)


def _config_from_args(ns, argv, parser) -> SweepConfig:
    if ns.manifest is not None:
        try:
            return read_manifest(ns.manifest)
        except (OSError, KeyError, ValueError) as exc:
            parser.error(f"cannot read manifest {ns.manifest}: {exc}")
    if ns.preset == "fig7":
        base = scenario_fig7(ns.seed)
        overrides = {}
        if _given(argv, "--trials"):
            overrides["trials"] = ns.trials
        if _given(argv, "--snr-min", "--snr-max", "--snr-step"):
            overrides["snr_grid_db"] = snr_grid(ns.snr_min, ns.snr_max, ns.snr_step)
        if _given(argv, "--budget"):
            overrides["time_budget"] = ns.budget
        if _given(argv, "--power"):
            overrides["power_mode"], overrides["power_budget"] = ns.power
        return dataclasses.replace(base, noise=not ns.noiseless,
                                   noise_at_relay=ns.noise_at_relay,
                                   max_delay=ns.max_delay, **overrides)
    schemes = SCHEME_FLAGS[ns.scheme]
    topology = ns.topology or (STAR if schemes == (ANC,) else CHAIN3)
    if topology == CHAIN3:
        if ns.nodes not in (None, 2):
            parser.error("chain3 has exactly 2 source nodes")
        nodes = 2
    else:
        nodes = 3 if ns.nodes is None else ns.nodes
        if nodes < 2:
            parser.error("star topology needs --nodes >= 2")
    power_mode, power_budget = ns.power
    return SweepConfig(
        schemes=schemes, topology=topology, n_nodes=nodes, signature_len=ns.sig_len,
        segment_len=ns.segment_len,
        snr_grid_db=snr_grid(ns.snr_min, ns.snr_max, ns.snr_step),
        trials=ns.trials, time_budget=ns.budget, seed=ns.seed,
        power_mode=power_mode, power_budget=power_budget,
        cancellation=not ns.no_cancellation, noise_at_relay=ns.noise_at_relay,
        noise=not ns.noiseless, max_delay=ns.max_delay,
    )


def _parse(argv):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        config = _config_from_args(ns, argv, parser)
        for scheme in config.schemes:
            normalize_power(scheme, config)
            geometry(scheme, config.topology, config.signature_len, config.time_budget)
    except (InvalidArgumentError, InfeasiblePowerError) as exc:
        parser.error(str(exc))
    if ns.workers < 1:
        parser.error("--workers must be >= 1")
    return config, ns


def parse_args(argv=None) -> SweepConfig:
    """Resolve command-line flags into a :class:`SweepConfig`.

    Usage errors exit with status 2.
    """
    return _parse(argv)[0]


# -- manifest -----------------------------------------------------------------

def _encode(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_encode(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def manifest_dict(config: SweepConfig, csv_path=None, manifest_path=None) -> dict:
    out = {"tool": "rasnc", "version": __version__,
           "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")}
    for f in dataclasses.fields(SweepConfig):
        out[f.name] = _encode(getattr(config, f.name))
    out["csv"] = _encode(str(csv_path) if csv_path is not None else None)
    out["manifest"] = _encode(str(manifest_path) if manifest_path is not None else None)
    return out


def format_manifest(manifest: dict) -> str:
    return "".join(f"{k}={v}\n" for k, v in manifest.items())


def write_manifest(path, config: SweepConfig, csv_path=None) -> Path:
    path = Path(path)
    path.write_text(format_manifest(manifest_dict(config, csv_path, path)))
    return path


def _decode_field(name: str, text: str):
    kind = {f.name: f for f in dataclasses.fields(SweepConfig)}[name]
    default = kind.default
    if text == "none":
        return None
    if name == "schemes":
        return tuple(text.split(","))
    if name == "snr_grid_db":
        return tuple(float(v) for v in text.split(","))
    if isinstance(default, bool):
        if text not in ("true", "false"):
            raise ValueError(f"{name}: expected true/false, got {text!r}")
        return text == "true"
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float) or name == "power_budget":
        return float(text)
    return text


def parse_manifest(text: str) -> SweepConfig:
    values = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    names = [f.name for f in dataclasses.fields(SweepConfig)]
    return SweepConfig(**{n: _decode_field(n, values[n]) for n in names})


def read_manifest(path) -> SweepConfig:
    return parse_manifest(Path(path).read_text())


def manifest_path_for(csv_path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + ".manifest")


def _print_table(result) -> None:
    print(f"{'scheme':<9} {'snr_db':>7} {'mean_err':>11} {'median_err':>11} {'fail':>6}")
    for p in result.points:
        print(f"{p.scheme:<9} {p.snr_db:>7.1f} {p.mean_error:>11.4g} {p.median_error:>11.4g} "
              f"{p.failures:>6d}")


def main(argv=None) -> int:
    try:
        config, ns = _parse(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    manifest_path = manifest_path_for(ns.out)
    if ns.dry_run:
        sys.stdout.write(format_manifest(manifest_dict(config, ns.out, manifest_path)))
        return 0
    try:
        result = run_sweep(config, workers=ns.workers)
        ns.out.parent.mkdir(parents=True, exist_ok=True)
        emit_csv(result, ns.out)
        write_manifest(manifest_path, config, ns.out)
        if ns.plot_script:
            emit_plot_script(ns.out, ns.out.with_suffix(".plot.py"))
    except Exception as exc:  # noqa: BLE001 - surfaced as exit status 3
        print(f"rasnc: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _print_table(result)
    print(f"wrote {ns.out} and {manifest_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
