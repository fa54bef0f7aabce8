"""Command-line runner: ``simulate``, ``compare`` and ``validate``.

Exit codes: 0 success, 1 failed invariants (validate), 2 configuration error,
3 regime precondition failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

from jchtransfer import __version__
from jchtransfer.config import SCHEMA_VERSION, ConfigError, ExperimentConfig, load_config
from jchtransfer.dynamics import (
    SingleExcitationState,
    atom_excitation_at,
    exact_propagator,
    from_amplitudes,
    photon_excitation_at,
)
from jchtransfer.errors import RegimePreconditionError
from jchtransfer.regimes import (
    RESONANT_KINDS,
    Channel,
    regime_deviation,
    regime_propagator,
)
from jchtransfer.topology import mode_basis
from jchtransfer.validation import SCOPES, run_validation

log = logging.getLogger("jchtransfer")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_REGIME = 0, 1, 2, 3
_BLOCK_NAMES = (("photon", "photon"), ("photon", "atom"), ("atom", "photon"), ("atom", "atom"))


def _fmt(x: float) -> str:
    # shortest round-trip representation
    return repr(float(x))


def _write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _time_columns(cfg: ExperimentConfig) -> tuple[list[str], Callable[[float], list[float]]]:
    """Absolute time plus time in units of 1/g (resonance runs) or 1/κ."""
    chain = cfg.chain
    if cfg.regime is not None and cfg.regime.kind in RESONANT_KINDS:
        label, scale = "time[1/g]", chain.atom_photon_coupling
    else:
        label, scale = "time[1/kappa]", chain.hop_strength
    if scale == 0.0:
        return ["time[abs]"], lambda t: [t]
    return ["time[abs]", label], lambda t: [t, t * scale]


def _initial_state(cfg: ExperimentConfig) -> SingleExcitationState:
    n = cfg.chain.n_cavities
    init = cfg.initial
    if init.channel is not None:
        make = photon_excitation_at if init.channel is Channel.PHOTON else atom_excitation_at
        return make(n, init.site)
    return from_amplitudes(np.concatenate([init.photon, init.atom]), normalize=init.normalize)


def _propagator_fn(cfg: ExperimentConfig) -> Callable[[float], np.ndarray]:
    if cfg.regime is None:
        basis = mode_basis(cfg.chain)
        return lambda t: exact_propagator(cfg.chain, t, basis)
    return lambda t: regime_propagator(cfg.regime, cfg.chain, t)


def _map_times(fn: Callable[[float], object], times: np.ndarray, threads: int) -> list:
    # executor.map keeps input order, so output does not depend on the worker count
    if threads <= 1:
        return [fn(float(t)) for t in times]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, [float(t) for t in times]))


def _manifest(command: str, config_path: str, cfg: ExperimentConfig, outputs: list,
              summary: dict, started: float, wall_start: _dt.datetime, threads: int) -> dict:
    chain = dataclasses.asdict(cfg.chain)
    chain["topology"] = cfg.chain.topology.value
    regime = None
    if cfg.regime is not None:
        regime = {"kind": cfg.regime.kind.value, "mode": cfg.regime.mode,
                  "dispersive": cfg.regime.dispersive}
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "jchtransfer", "version": __version__},
        "command": command,
        "config_path": os.path.abspath(config_path),
        "config": cfg.raw,
        "resolved": {
            "chain": chain,
            "detuning": cfg.chain.detuning,
            "regime": regime,
            "time_unit": cfg.time_unit,
            "n_times": int(cfg.times.shape[0]),
            "t_first": float(cfg.times[0]),
            "t_last": float(cfg.times[-1]),
        },
        "outputs": outputs,
        "summary": summary,
        "threads": threads,
        "started_at": wall_start.isoformat(),
        "wall_time_s": time.perf_counter() - started,
    }


def _write_manifest(out_dir: str, manifest: dict) -> None:
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _validity_rows(cfg: ExperimentConfig):
    report = cfg.regime.validity_report(cfg.chain)
    rows = [[name, float(value)] for name, value in report.ratios.items()]
    rows.append(["worst:" + report.worst_name, float(report.worst)])
    rows.append(["regime_tolerance", float(report.tolerance)])
    return report, rows


def cmd_simulate(config_path: str, out_dir: str, threads: int) -> int:
    started, wall_start = time.perf_counter(), _dt.datetime.now(_dt.timezone.utc)
    cfg = load_config(config_path)
    os.makedirs(out_dir, exist_ok=True)
    n = cfg.chain.n_cavities
    tcols, tvals = _time_columns(cfg)
    prop = _propagator_fn(cfg)
    props = _map_times(prop, cfg.times, threads)
    outputs, summary = [], {}

    if "site_populations" in cfg.observables:
        v0 = _initial_state(cfg).as_vector()
        header = tcols + [f"photon_{j}[dimensionless]" for j in range(n)] \
            + [f"atom_{j}[dimensionless]" for j in range(n)]
        rows = [tvals(float(t)) + list(np.abs(u @ v0) ** 2) for t, u in zip(cfg.times, props)]
        _write_csv(os.path.join(out_dir, "site_populations.csv"), header, rows)
        outputs.append({"observable": "site_populations", "file": "site_populations.csv"})

    for fid in cfg.fidelities:
        offset = 0 if fid.channel is Channel.PHOTON else n
        values = [abs(u[offset + fid.target, offset + fid.source]) for u in props]
        name = f"fidelity_{fid.channel.value}_{fid.source}_to_{fid.target}.csv"
        rows = [tvals(float(t)) + [float(v)] for t, v in zip(cfg.times, values)]
        _write_csv(os.path.join(out_dir, name), tcols + ["fidelity[dimensionless]"], rows)
        i = int(np.argmax(values))
        outputs.append({"observable": "transfer_fidelity", "file": name,
                        "source": fid.source, "target": fid.target, "channel": fid.channel.value})
        summary[name] = {"peak": float(values[i]), "argmax_time": float(cfg.times[i])}

    if "kernel_dump" in cfg.observables:
        header = tcols + ["to", "from", "row", "col", "re", "im"]
        rows = []
        for t, u in zip(cfg.times, props):
            tv = tvals(float(t))
            for r_blk, c_blk in _BLOCK_NAMES:
                r0 = 0 if r_blk == "photon" else n
                c0 = 0 if c_blk == "photon" else n
                for j in range(n):
                    for k in range(n):
                        z = u[r0 + j, c0 + k]
                        rows.append(tv + [r_blk, c_blk, j, k, float(z.real), float(z.imag)])
        _write_csv(os.path.join(out_dir, "kernel_dump.csv"), header, rows)
        outputs.append({"observable": "kernel_dump", "file": "kernel_dump.csv"})

    if "validity_report" in cfg.observables:
        report, rows = _validity_rows(cfg)
        _write_csv(os.path.join(out_dir, "validity_report.csv"), ["ratio", "value[dimensionless]"], rows)
        outputs.append({"observable": "validity_report", "file": "validity_report.csv"})
        summary["validity"] = report.as_dict()

    _write_manifest(out_dir, _manifest("simulate", config_path, cfg, outputs, summary,
                                       started, wall_start, threads))
    print(json.dumps({"out_dir": out_dir, "outputs": [o["file"] for o in outputs],
                      "summary": summary}, sort_keys=True, default=str))
    return EXIT_OK


def cmd_compare(config_path: str, out_dir: str, threads: int) -> int:
    started, wall_start = time.perf_counter(), _dt.datetime.now(_dt.timezone.utc)
    cfg = load_config(config_path)
    if cfg.regime is None:
        raise cfg.error("compare needs an approximate regime, not 'exact'", ("regime",))
    os.makedirs(out_dir, exist_ok=True)
    tcols, tvals = _time_columns(cfg)
    reports = _map_times(lambda t: regime_deviation(cfg.regime, cfg.chain, [t]), cfg.times, threads)
    gated = [float(r.gated[0]) for r in reports]
    info = [float(r.informational[0]) for r in reports]
    rows = [tvals(float(t)) + [g, i] for t, g, i in zip(cfg.times, gated, info)]
    header = tcols + ["deviation[dimensionless]", "deviation_unchecked_blocks[dimensionless]"]
    _write_csv(os.path.join(out_dir, "deviation.csv"), header, rows)
    validity, vrows = _validity_rows(cfg)
    _write_csv(os.path.join(out_dir, "validity_report.csv"), ["ratio", "value[dimensionless]"], vrows)
    max_dev = max(gated)
    summary = {
        "regime": cfg.regime.kind.value,
        "checked_blocks": list(reports[0].gated_blocks),
        "max_deviation": max_dev,
        "max_deviation_unchecked_blocks": max(info),
        "tolerance": validity.tolerance,
        "within_tolerance": bool(max_dev < validity.tolerance),
        "validity": validity.as_dict(),
    }
    outputs = [{"observable": "deviation", "file": "deviation.csv"},
               {"observable": "validity_report", "file": "validity_report.csv"}]
    _write_manifest(out_dir, _manifest("compare", config_path, cfg, outputs, summary,
                                       started, wall_start, threads))
    print(json.dumps(summary, sort_keys=True, default=str))
    return EXIT_OK


def cmd_validate(scope: str, seed: int, out_dir: str | None) -> int:
    started = time.perf_counter()
    results = run_validation(scope, seed)
    failed = [r.name for r in results if not r.passed]
    summary = {
        "scope": scope,
        "seed": seed,
        "passed": not failed,
        "failed": failed,
        "checks": [r.as_dict() for r in results],
        "wall_time_s": time.perf_counter() - started,
        "version": __version__,
    }
    text = json.dumps(summary, indent=2, sort_keys=True)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "validate.json"), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    if failed:
        print("failed invariants: " + ", ".join(failed), file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=None, help="directory for CSV/JSON output")
    common.add_argument("--threads", type=int, default=1, help="workers for time-grid evaluation")
    common.add_argument("--seed", type=int, default=0,
                        help="seed for randomized validation draws (never affects physics)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="jchtransfer",
        description="Single-excitation transfer in Jaynes-Cummings-Hubbard cavity arrays.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_sim = sub.add_parser("simulate", parents=[common], help="run an evolution and write CSVs")
    p_sim.add_argument("config")
    p_cmp = sub.add_parser("compare", parents=[common],
                           help="sup-norm deviation of a regime from exact evolution")
    p_cmp.add_argument("config")
    p_val = sub.add_parser("validate", parents=[common], help="run the invariant suite")
    p_val.add_argument("--scope", default="all", choices=("all",) + SCOPES)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "validate":
            return cmd_validate(args.scope, args.seed, args.out_dir)
        out_dir = args.out_dir or os.path.join(
            "runs", os.path.splitext(os.path.basename(args.config))[0])
        if args.command == "simulate":
            return cmd_simulate(args.config, out_dir, args.threads)
        return cmd_compare(args.config, out_dir, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RegimePreconditionError as exc:
        print(f"regime precondition failed: {exc}", file=sys.stderr)
        return EXIT_REGIME


if __name__ == "__main__":
    sys.exit(main())
