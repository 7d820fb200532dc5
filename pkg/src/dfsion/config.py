"""Scenario configuration files (YAML) with line-numbered validation errors."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .compiler import PROFILES, HardwareProfile

SCENARIOS = ("cnot-demo", "dfs-memory", "hot-exchange", "exchange", "empty")


class ConfigError(ValueError):
    def __init__(self, message: str, source: str = "<config>", line: int | None = None):
        self.source, self.line = source, line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


class _Node:
    """Parsed value with the line it came from."""

    def __init__(self, value, line):
        self.value, self.line = value, line


def _wrap(node: yaml.Node) -> _Node:
    line = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = yaml.safe_load(yaml.serialize(k)) if not isinstance(k, yaml.ScalarNode) else k.value
            out[str(key)] = _wrap(v)
        return _Node(out, line)
    if isinstance(node, yaml.SequenceNode):
        return _Node([_wrap(v) for v in node.value], line)
    return _Node(yaml.safe_load(yaml.serialize(node)), line)


def _plain(n: _Node):
    if isinstance(n.value, dict):
        return {k: _plain(v) for k, v in n.value.items()}
    if isinstance(n.value, list):
        return [_plain(v) for v in n.value]
    return n.value


@dataclass
class InitialState:
    amplitudes: dict[str, complex]
    fock: int = 0
    thermal_nbar: float | None = None


@dataclass
class ScenarioConfig:
    scenario: str = "cnot-demo"
    profile: HardwareProfile = field(default_factory=lambda: PROFILES["paper"])
    schedule_path: Path | None = None
    initial: InitialState = field(default_factory=lambda: InitialState({"0101": 1.0}))
    track: list[str] | None = None
    wrappers: str = "physical"
    model: str = "full"
    addressing_error: float = 0.0
    addressing_mode: str = "amplitude"
    dephasing: dict | None = None
    samples: int = 10_000
    seed: int | None = None
    out_dir: Path = Path("out")
    prefix: str | None = None
    substeps: int = 10
    scheme: str = "cf6-suzuki"
    sweep_axis: str | None = None
    sweep_values: list[float] = field(default_factory=list)
    workers: int = 1
    source: str = "<defaults>"


_TOP = {"scenario", "profile", "profile_overrides", "schedule", "initial", "track", "wrappers", "model",
        "noise", "seed", "output", "integrator", "sweep", "fock_dim", "workers"}
_PROFILE_KEYS = set(HardwareProfile.__dataclass_fields__) - {"name"}


def _expect(node: _Node, typ, what: str, src: str):
    if typ is float and isinstance(node.value, int) and not isinstance(node.value, bool):
        return float(node.value)
    if not isinstance(node.value, typ) or (typ in (int, float) and isinstance(node.value, bool)):
        name = typ.__name__ if isinstance(typ, type) else "/".join(t.__name__ for t in typ)
        raise ConfigError(f"{what} must be {name}, got {node.value!r}", src, node.line)
    return node.value


def _choice(node: _Node, options, what: str, src: str):
    v = _expect(node, str, what, src)
    if v not in options:
        raise ConfigError(f"{what} must be one of {sorted(options)}, got {v!r}", src, node.line)
    return v


def parse_config(text: str, source: str = "<config>", base_dir: Path | None = None) -> ScenarioConfig:
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", source,
                          mark.line + 1 if mark else None) from None
    cfg = ScenarioConfig(source=source)
    if root is None:
        return cfg
    top = _wrap(root)
    if not isinstance(top.value, dict):
        raise ConfigError("top level must be a mapping", source, top.line)
    d = top.value
    for k, v in d.items():
        if k not in _TOP:
            raise ConfigError(f"unknown key {k!r}", source, v.line)
    base_dir = base_dir or Path(".")

    if "scenario" in d:
        cfg.scenario = _choice(d["scenario"], SCENARIOS, "scenario", source)
    if "profile" in d:
        cfg.profile = PROFILES[_choice(d["profile"], PROFILES, "profile", source)]
    if "profile_overrides" in d:
        ov = d["profile_overrides"]
        if not isinstance(ov.value, dict):
            raise ConfigError("profile_overrides must be a mapping", source, ov.line)
        kw = {}
        for k, v in ov.value.items():
            if k not in _PROFILE_KEYS:
                raise ConfigError(f"unknown profile field {k!r}", source, v.line)
            if k == "mode_signs":
                kw[k] = tuple(_expect(x, int, "mode sign", source) for x in _expect(v, list, k, source))
            elif k == "fock_dim":
                kw[k] = _expect(v, int, k, source)
            elif k == "calibrate_light_shift":
                kw[k] = _expect(v, bool, k, source)
            else:
                kw[k] = _expect(v, float, k, source)
        try:
            cfg.profile = cfg.profile.with_(**kw)
        except ValueError as exc:
            raise ConfigError(str(exc), source, ov.line) from None
    if "fock_dim" in d:
        fd = _expect(d["fock_dim"], int, "fock_dim", source)
        if fd < 1:
            raise ConfigError("fock_dim must be >= 1", source, d["fock_dim"].line)
        cfg.profile = cfg.profile.with_(fock_dim=fd)
    if "schedule" in d:
        p = Path(_expect(d["schedule"], str, "schedule", source))
        p = p if p.is_absolute() else base_dir / p
        if not p.exists():
            raise ConfigError(f"schedule file {str(p)!r} does not exist", source, d["schedule"].line)
        cfg.schedule_path = p
    if "initial" in d:
        cfg.initial = _parse_initial(d["initial"], source)
    if "track" in d:
        cfg.track = [_label(x, source) for x in _expect(d["track"], list, "track", source)]
    if "wrappers" in d:
        cfg.wrappers = _choice(d["wrappers"], {"ideal", "physical"}, "wrappers", source)
    if "model" in d:
        cfg.model = _choice(d["model"], {"full", "effective"}, "model", source)
    if "seed" in d:
        cfg.seed = _expect(d["seed"], int, "seed", source)
    if "workers" in d:
        cfg.workers = max(1, _expect(d["workers"], int, "workers", source))
    if "noise" in d:
        _parse_noise(d["noise"], cfg, source)
    if "output" in d:
        o = d["output"]
        if not isinstance(o.value, dict):
            raise ConfigError("output must be a mapping", source, o.line)
        for k, v in o.value.items():
            if k == "dir":
                cfg.out_dir = Path(_expect(v, str, "output.dir", source))
            elif k == "prefix":
                cfg.prefix = _expect(v, str, "output.prefix", source)
            else:
                raise ConfigError(f"unknown output key {k!r}", source, v.line)
    if "integrator" in d:
        it = d["integrator"]
        if not isinstance(it.value, dict):
            raise ConfigError("integrator must be a mapping", source, it.line)
        for k, v in it.value.items():
            if k == "substeps_per_mode_period":
                cfg.substeps = _expect(v, int, k, source)
                if cfg.substeps < 1:
                    raise ConfigError(f"{k} must be >= 1", source, v.line)
            elif k == "scheme":
                cfg.scheme = _choice(v, {"cf6-suzuki", "cf6-jump", "cf4", "midpoint"}, "integrator.scheme", source)
            else:
                raise ConfigError(f"unknown integrator key {k!r}", source, v.line)
    if "sweep" in d:
        sw = d["sweep"]
        if not isinstance(sw.value, dict) or "axis" not in sw.value:
            raise ConfigError("sweep must be a mapping with an 'axis'", source, sw.line)
        cfg.sweep_axis = _expect(sw.value["axis"], str, "sweep.axis", source)
        if "values" in sw.value:
            cfg.sweep_values = [_expect(x, float, "sweep value", source)
                                for x in _expect(sw.value["values"], list, "sweep.values", source)]
        for k, v in sw.value.items():
            if k not in ("axis", "values"):
                raise ConfigError(f"unknown sweep key {k!r}", source, v.line)
    if cfg.dephasing is not None and cfg.dephasing["distribution"] != "fixed" and cfg.seed is None:
        raise ConfigError("a seed is required when noise sampling is enabled", source, d["noise"].line)
    return cfg


def _label(node: _Node, src: str) -> str:
    v = node.value
    if isinstance(v, int) and not isinstance(v, bool):
        raise ConfigError(f"qubit label {v!r} must be quoted", src, node.line)
    v = _expect(node, str, "qubit label", src)
    if not v or set(v) - {"0", "1"}:
        raise ConfigError(f"invalid qubit label {v!r}", src, node.line)
    return v


def _parse_initial(node: _Node, src: str) -> InitialState:
    if isinstance(node.value, str):
        return InitialState({_label(node, src): 1.0})
    if not isinstance(node.value, dict):
        raise ConfigError("initial must be a label or a mapping", src, node.line)
    d = node.value
    amps: dict[str, complex] = {}
    if "labels" not in d:
        raise ConfigError("initial needs 'labels'", src, node.line)
    lab = d["labels"]
    if isinstance(lab.value, (str, int)):
        amps[_label(lab, src)] = 1.0
    elif isinstance(lab.value, dict):
        for k, v in lab.value.items():
            key = _label(_Node(k, v.line), src)
            if isinstance(v.value, list):
                re, im = (_expect(x, float, "amplitude", src) for x in v.value)
                amps[key] = complex(re, im)
            else:
                amps[key] = complex(_expect(v, float, "amplitude", src))
    else:
        raise ConfigError("initial.labels must be a label or a label->amplitude mapping", src, lab.line)
    st = InitialState(amps)
    for k, v in d.items():
        if k == "labels":
            continue
        if k == "fock":
            st.fock = _expect(v, int, "initial.fock", src)
            if st.fock < 0:
                raise ConfigError("initial.fock must be >= 0", src, v.line)
        elif k == "thermal_nbar":
            st.thermal_nbar = _expect(v, float, "initial.thermal_nbar", src)
            if st.thermal_nbar < 0:
                raise ConfigError("thermal_nbar must be >= 0", src, v.line)
        else:
            raise ConfigError(f"unknown initial key {k!r}", src, v.line)
    lengths = {len(k) for k in amps}
    if len(lengths) != 1:
        raise ConfigError("all initial labels need the same length", src, lab.line)
    return st


def _parse_noise(node: _Node, cfg: ScenarioConfig, src: str) -> None:
    if not isinstance(node.value, dict):
        raise ConfigError("noise must be a mapping", src, node.line)
    for k, v in node.value.items():
        if k == "addressing_error":
            cfg.addressing_error = _expect(v, float, k, src)
            if not 0 <= cfg.addressing_error <= 0.2:
                raise ConfigError("addressing_error must lie in [0, 0.2]", src, v.line)
        elif k == "addressing_mode":
            cfg.addressing_mode = _choice(v, {"amplitude", "intensity"}, k, src)
        elif k == "samples":
            cfg.samples = _expect(v, int, k, src)
            if cfg.samples < 1:
                raise ConfigError("samples must be >= 1", src, v.line)
        elif k == "dephasing":
            if not isinstance(v.value, dict):
                raise ConfigError("dephasing must be a mapping", src, v.line)
            dp = {"distribution": "uniform", "width": math.pi, "scope": "all"}
            for kk, vv in v.value.items():
                if kk == "distribution":
                    dp[kk] = _choice(vv, {"fixed", "uniform", "gaussian"}, "dephasing.distribution", src)
                elif kk == "width":
                    dp[kk] = _expect(vv, float, "dephasing.width", src)
                elif kk == "scope":
                    dp[kk] = _choice(vv, {"all", "pair"}, "dephasing.scope", src)
                else:
                    raise ConfigError(f"unknown dephasing key {kk!r}", src, vv.line)
            cfg.dephasing = dp
        else:
            raise ConfigError(f"unknown noise key {k!r}", src, v.line)


def load_config(path: str | Path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(p)) from None
    return parse_config(text, str(p), p.parent)
