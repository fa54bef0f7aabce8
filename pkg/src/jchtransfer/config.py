"""Experiment configuration: YAML schema, validation and line-anchored errors.

Schema (unknown keys anywhere are errors)::

    chain:
      n_cavities: 8                  # N >= 2
      atom_freq: 0.0                 # ε
      cavity_freq: 0.0               # Ω
      atom_photon_coupling: 0.0      # g >= 0
      hop_strength: 1.0              # κ
      topology: linear_parabolic     # or cyclic_uniform
    initial:                         # one of the two forms
      channel: photon                # photon | atom
      site: 0
    # initial:
    #   photon: [1, 0, ...]          # raw amplitudes, complex as "1+2j"
    #   atom: [0, 0, ...]
    #   normalize: true
    regime: exact                    # or a mapping, see below
    # regime: {kind: resonance_degenerate, mode: 1, dispersive: false}
    time_grid:
      t_start: 0
      t_end: pi/2                    # arithmetic on numbers and pi
      n_points: 201
      unit: absolute                 # absolute | 1/kappa | 1/g
    # time_grid: {times: [0, pi/4, pi/2], unit: 1/kappa}
    outputs:
      - site_populations
      - transfer_fidelity: {source: 0, target: 7, channel: photon}
      - kernel_dump
      - validity_report
"""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml

from jchtransfer.regimes import Channel, RegimeKind, RegimeSpec
from jchtransfer.topology import ChainParams, Topology

SCHEMA_VERSION = 1
OBSERVABLES = ("site_populations", "transfer_fidelity", "kernel_dump", "validity_report")
TIME_UNITS = ("absolute", "1/kappa", "1/g")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


class _LineMap:
    """Maps key paths like ("chain", "n_cavities") to 1-based source lines."""

    def __init__(self, node: yaml.Node | None):
        self.lines: dict[tuple, int] = {}
        if node is not None:
            self._walk(node, ())

    def _walk(self, node: yaml.Node, path: tuple) -> None:
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                sub = path + (key.value,)
                self._walk(value, sub)
                self.lines[sub] = key.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                self._walk(item, path + (i,))

    def line(self, path: tuple) -> int | None:
        while path not in self.lines and path:
            path = path[:-1]
        return self.lines.get(path)


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def eval_number(value: Any) -> float:
    """A real number, or a string of arithmetic on numbers and ``pi``."""
    if isinstance(value, bool):
        raise ValueError("expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"expected a number, got {value!r}")

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](walk(node.operand))
        raise ValueError(f"unsupported expression {value!r}")

    try:
        out = walk(ast.parse(value.strip(), mode="eval"))
    except SyntaxError as exc:
        raise ValueError(f"cannot parse {value!r}") from exc
    except ZeroDivisionError as exc:
        raise ValueError(f"division by zero in {value!r}") from exc
    if not math.isfinite(out):
        raise ValueError(f"{value!r} is not finite")
    return out


def _complex(value: Any) -> complex:
    if isinstance(value, str):
        return complex(value.replace(" ", ""))
    if isinstance(value, bool):
        raise ValueError("expected a number")
    return complex(value)


@dataclass(frozen=True)
class InitialSpec:
    channel: Channel | None = None
    site: int | None = None
    photon: tuple[complex, ...] | None = None
    atom: tuple[complex, ...] | None = None
    normalize: bool = True


@dataclass(frozen=True)
class FidelitySpec:
    source: int
    target: int
    channel: Channel


@dataclass(frozen=True)
class ExperimentConfig:
    chain: ChainParams
    initial: InitialSpec
    regime: RegimeSpec | None
    times: np.ndarray
    time_unit: str
    observables: tuple[str, ...]
    fidelities: tuple[FidelitySpec, ...] = field(default=())
    raw: dict = field(default_factory=dict)
    source: str = "<config>"
    lines: _LineMap | None = field(default=None, repr=False, compare=False)

    def error(self, message: str, path: tuple) -> ConfigError:
        return ConfigError(message, self.lines.line(path) if self.lines else None, self.source)


class _Reader:
    def __init__(self, data: dict, lines: _LineMap, source: str):
        self.lines = lines
        self.source = source
        self.data = data

    def fail(self, message: str, path: tuple):
        raise ConfigError(message, self.lines.line(path), self.source)

    def mapping(self, value, path: tuple, allowed: set[str], required: set[str] = frozenset()):
        if not isinstance(value, dict):
            self.fail(f"'{'.'.join(map(str, path)) or 'top level'}' must be a mapping", path)
        for key in value:
            if key not in allowed:
                self.fail(f"unknown key '{key}' (allowed: {', '.join(sorted(allowed))})",
                          path + (key,))
        for key in sorted(required):
            if key not in value:
                self.fail(f"missing required key '{key}'", path)
        return value

    def number(self, value, path: tuple) -> float:
        try:
            return eval_number(value)
        except ValueError as exc:
            self.fail(str(exc), path)

    def integer(self, value, path: tuple) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(f"expected an integer, got {value!r}", path)
        return value


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None, source) from exc
    r = _Reader(data, _LineMap(node), source)
    top = r.mapping(data if data is not None else None, (),
                    {"chain", "initial", "regime", "time_grid", "outputs"},
                    {"chain", "initial", "time_grid", "outputs"})

    ch = r.mapping(top["chain"], ("chain",),
                   {"n_cavities", "atom_freq", "cavity_freq", "atom_photon_coupling",
                    "hop_strength", "topology"},
                   {"n_cavities", "atom_freq", "cavity_freq", "atom_photon_coupling",
                    "hop_strength", "topology"})
    try:
        topology = Topology(ch["topology"])
    except ValueError:
        r.fail(f"topology must be one of {[t.value for t in Topology]}", ("chain", "topology"))
    n = r.integer(ch["n_cavities"], ("chain", "n_cavities"))
    values = {k: r.number(ch[k], ("chain", k))
              for k in ("atom_freq", "cavity_freq", "atom_photon_coupling", "hop_strength")}
    try:
        chain = ChainParams(n_cavities=n, topology=topology, **values)
    except ValueError as exc:
        r.fail(str(exc), ("chain",))

    initial = _parse_initial(r, top["initial"], n)
    regime = _parse_regime(r, top.get("regime", "exact"), chain)
    times, unit = _parse_times(r, top["time_grid"], chain)
    observables, fidelities = _parse_outputs(r, top["outputs"], n)
    if "validity_report" in observables and regime is None:
        r.fail("validity_report needs an approximate regime, not 'exact'",
               ("outputs", top["outputs"].index("validity_report")))
    return ExperimentConfig(chain=chain, initial=initial, regime=regime, times=times,
                            time_unit=unit, observables=observables, fidelities=fidelities,
                            raw=data, source=source, lines=r.lines)


def _parse_initial(r: _Reader, value, n: int) -> InitialSpec:
    path = ("initial",)
    m = r.mapping(value, path, {"channel", "site", "photon", "atom", "normalize"})
    if "channel" in m or "site" in m:
        if "photon" in m or "atom" in m:
            r.fail("give either channel/site or raw photon/atom amplitudes, not both", path)
        if "channel" not in m or "site" not in m:
            r.fail("channel and site must be given together", path)
        try:
            channel = Channel(m["channel"])
        except ValueError:
            r.fail("channel must be 'photon' or 'atom'", path + ("channel",))
        site = r.integer(m["site"], path + ("site",))
        if not 0 <= site < n:
            r.fail(f"site {site} outside 0..{n - 1}", path + ("site",))
        return InitialSpec(channel=channel, site=site)
    amps = {}
    for key in ("photon", "atom"):
        raw = m.get(key, [0] * n)
        if not isinstance(raw, list) or len(raw) != n:
            r.fail(f"'{key}' must be a list of {n} amplitudes", path + (key,))
        try:
            amps[key] = tuple(_complex(v) for v in raw)
        except (TypeError, ValueError):
            r.fail(f"'{key}' entries must be numbers or complex strings like '1+2j'", path + (key,))
    normalize = m.get("normalize", True)
    if not isinstance(normalize, bool):
        r.fail("normalize must be true or false", path + ("normalize",))
    if not any(amps["photon"]) and not any(amps["atom"]):
        r.fail("initial state is the zero vector", path)
    return InitialSpec(photon=amps["photon"], atom=amps["atom"], normalize=normalize)


def _parse_regime(r: _Reader, value, chain: ChainParams) -> RegimeSpec | None:
    path = ("regime",)
    if value == "exact":
        return None
    if isinstance(value, str):
        value = {"kind": value}
    m = r.mapping(value, path, {"kind", "mode", "dispersive"}, {"kind"})
    try:
        kind = RegimeKind(m["kind"])
    except ValueError:
        r.fail(f"kind must be 'exact' or one of {[k.value for k in RegimeKind]}", path + ("kind",))
    mode = m.get("mode")
    if mode is not None:
        mode = r.integer(mode, path + ("mode",))
    dispersive = m.get("dispersive", True)
    if not isinstance(dispersive, bool):
        r.fail("dispersive must be true or false", path + ("dispersive",))
    try:
        spec = RegimeSpec(kind, mode, dispersive)
    except ValueError as exc:
        r.fail(str(exc), path)
    if spec.topology is not chain.topology:
        r.fail(f"regime {kind.value} needs a {spec.topology.value} chain", path + ("kind",))
    if mode is not None and not 0 <= mode < chain.n_cavities:
        r.fail(f"mode {mode} outside 0..{chain.n_cavities - 1}", path + ("mode",))
    return spec


def _parse_times(r: _Reader, value, chain: ChainParams) -> tuple[np.ndarray, str]:
    path = ("time_grid",)
    m = r.mapping(value, path, {"t_start", "t_end", "n_points", "times", "unit"})
    unit = m.get("unit", "absolute")
    if unit not in TIME_UNITS:
        r.fail(f"unit must be one of {list(TIME_UNITS)}", path + ("unit",))
    if "times" in m:
        if any(k in m for k in ("t_start", "t_end", "n_points")):
            r.fail("give either 'times' or t_start/t_end/n_points", path)
        if not isinstance(m["times"], list) or not m["times"]:
            r.fail("'times' must be a non-empty list", path + ("times",))
        times = np.array([r.number(v, path + ("times", i)) for i, v in enumerate(m["times"])])
    else:
        for key in ("t_start", "t_end", "n_points"):
            if key not in m:
                r.fail(f"missing required key '{key}'", path)
        t0 = r.number(m["t_start"], path + ("t_start",))
        t1 = r.number(m["t_end"], path + ("t_end",))
        npts = r.integer(m["n_points"], path + ("n_points",))
        if npts < 1:
            r.fail("n_points must be >= 1", path + ("n_points",))
        if t1 < t0:
            r.fail("t_end must be >= t_start", path + ("t_end",))
        times = np.array([t0]) if npts == 1 else np.linspace(t0, t1, npts)
    if unit != "absolute":
        scale = chain.hop_strength if unit == "1/kappa" else chain.atom_photon_coupling
        if scale == 0.0:
            r.fail(f"unit {unit} needs a nonzero {'hop_strength' if unit == '1/kappa' else 'coupling'}",
                   path + ("unit",))
        times = times / scale
    return times, unit


def _parse_outputs(r: _Reader, value, n: int):
    path = ("outputs",)
    if not isinstance(value, list) or not value:
        r.fail("'outputs' must be a non-empty list", path)
    observables: list[str] = []
    fidelities: list[FidelitySpec] = []
    for i, item in enumerate(value):
        ipath = path + (i,)
        if isinstance(item, str):
            name, body = item, None
        elif isinstance(item, dict) and len(item) == 1:
            name, body = next(iter(item.items()))
        else:
            r.fail("each output is a name or a single-key mapping", ipath)
        if name not in OBSERVABLES:
            r.fail(f"unknown output '{name}' (allowed: {', '.join(OBSERVABLES)})", ipath)
        if name == "transfer_fidelity":
            fp = ipath + (name,)
            body = r.mapping(body, fp, {"source", "target", "channel"},
                             {"source", "target", "channel"})
            try:
                channel = Channel(body["channel"])
            except ValueError:
                r.fail("channel must be 'photon' or 'atom'", fp + ("channel",))
            sites = {}
            for key in ("source", "target"):
                sites[key] = r.integer(body[key], fp + (key,))
                if not 0 <= sites[key] < n:
                    r.fail(f"{key} {sites[key]} outside 0..{n - 1}", fp + (key,))
            fidelities.append(FidelitySpec(sites["source"], sites["target"], channel))
        elif body is not None:
            r.fail(f"output '{name}' takes no options", ipath)
        if name not in observables:
            observables.append(name)
    return tuple(observables), tuple(fidelities)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, path) from exc
    return parse_config(text, source=path)
