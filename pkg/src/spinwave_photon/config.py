"""Experiment configuration files.

The file is YAML (JSON is accepted too, being a subset).  Every section is
optional; missing keys take the defaults in :data:`DEFAULTS`.  Interface
units are degrees, nanoseconds and milligauss.

.. code-block:: yaml

    protocol: pair            # pair | ghz3 | swap
    source:
      chi: 0.014
      eta_deg: 45.0
      B_mG: 200.0
      g_factor: 0.5
      beta: null              # rad/s; null derives it from B_mG and g_factor
      retrieval_eff: 0.2      # number, or {A1: .., A2: ..}
      visibility: 1.0         # number, or {A1: .., A2: ..}
      visibility_by_tau: {}   # {tau_ns: number or {A1: .., A2: ..}}
      double_excitations: true
      larmor_model: components  # components | effective | off
    scheme: null              # or {F_b: 2, F_e2: 2}
    detectors:
      default_efficiency: 0.3
      efficiency: {}          # {detector id: efficiency}
      dark_prob: 0.0
    settings: null            # list of {mode, kind, theta}; null = protocol default
    taus: [30.0]              # storage times, ns
    timing: {prep_ms: 23.0, run_ms: 10.0, write_ns: 70.0, read_ns: 100.0, clean_ns: 200.0, cycle_hz: 30}
    engine: {kind: exact, mc_trials: 100000, seed: 0, workers: 1}

Errors are raised as :class:`ConfigError`, naming the key path (for example
``source.chi``) and the line it was found on.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from .optics import ANALYZER_KINDS, AnalyzerSetting
from .protocols import ENGINES, PROTOCOLS, ExperimentConfig, TimingSequence, default_settings
from .source import ARMS, LARMOR_MODELS, LevelScheme, SourceParams

DEFAULTS: dict[str, Any] = {
    "protocol": "pair",
    "source": {
        "chi": 0.014,
        "eta_deg": 45.0,
        "B_mG": 200.0,
        "g_factor": 0.5,
        "beta": None,
        "retrieval_eff": 0.2,
        "visibility": 1.0,
        "visibility_by_tau": {},
        "double_excitations": True,
        "larmor_model": "components",
    },
    "scheme": None,
    "detectors": {"default_efficiency": 0.3, "efficiency": {}, "dark_prob": 0.0},
    "settings": None,
    "taus": [30.0],
    "timing": {"prep_ms": 23.0, "run_ms": 10.0, "write_ns": 70.0, "read_ns": 100.0, "clean_ns": 200.0,
               "cycle_hz": 30},
    "engine": {"kind": "exact", "mc_trials": 100000, "seed": 0, "workers": 1},
}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str, line: int | None = None):
        self.path, self.line = path, line
        where = f"{path}" + (f" (line {line})" if line is not None else "")
        super().__init__(f"{where}: {message}")


@dataclass
class _Ctx:
    marks: dict[str, int]

    def fail(self, path: str, message: str):
        p = path
        while p and p not in self.marks:
            p = p.rsplit(".", 1)[0] if "." in p else (p.rsplit("[", 1)[0] if "[" in p else "")
        raise ConfigError(path or "<root>", message, self.marks.get(p))


def _collect_marks(node, path: str, out: dict[str, int]) -> None:
    if node is None:
        return
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = str(k.value)
            _collect_marks(v, f"{path}.{key}" if path else key, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _collect_marks(v, f"{path}[{i}]", out)


# ---------------------------------------------------------------------------
# field checks


def _num(ctx, path, v, lo=None, hi=None, *, integer=False, lo_open=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        ctx.fail(path, f"expected a number, got {v!r}")
    if integer and (not isinstance(v, int) and not float(v).is_integer()):
        ctx.fail(path, f"expected an integer, got {v!r}")
    if isinstance(v, float) and not math.isfinite(v):
        ctx.fail(path, "must be finite")
    if lo is not None and (v <= lo if lo_open else v < lo):
        ctx.fail(path, f"{v} is below the allowed minimum {lo}")
    if hi is not None and v > hi:
        ctx.fail(path, f"{v} exceeds the allowed maximum {hi}")
    return int(v) if integer else float(v)


def _choice(ctx, path, v, options):
    if v not in options:
        ctx.fail(path, f"must be one of {list(options)}, got {v!r}")
    return v


def _bool(ctx, path, v):
    if not isinstance(v, bool):
        ctx.fail(path, f"expected true/false, got {v!r}")
    return v


def _mapping(ctx, path, v, allowed=None):
    if not isinstance(v, Mapping):
        ctx.fail(path, f"expected a mapping, got {type(v).__name__}")
    if allowed is not None:
        for k in v:
            if k not in allowed:
                ctx.fail(f"{path}.{k}" if path else str(k), f"unknown key (allowed: {sorted(allowed)})")
    return v


def _per_arm(ctx, path, v):
    if isinstance(v, Mapping):
        _mapping(ctx, path, v, ARMS)
        missing = [a for a in ARMS if a not in v]
        if missing:
            ctx.fail(path, f"missing arms {missing}")
        return {a: _num(ctx, f"{path}.{a}", v[a], 0, 1) for a in ARMS}
    return _num(ctx, path, v, 0, 1)


def _merge(ctx, path, given, defaults):
    if given is None:
        return copy.deepcopy(defaults)
    _mapping(ctx, path, given, defaults.keys())
    out = copy.deepcopy(defaults)
    out.update(given)
    return out


def resolve(data: Any, marks: Mapping[str, int] | None = None) -> dict:
    """Validate a parsed document and fill in defaults (canonical form)."""
    ctx = _Ctx(dict(marks or {}))
    if data is None:
        data = {}
    _mapping(ctx, "", data, DEFAULTS.keys())
    doc: dict[str, Any] = {}
    doc["protocol"] = _choice(ctx, "protocol", data.get("protocol", DEFAULTS["protocol"]), PROTOCOLS)

    src = _merge(ctx, "source", data.get("source"), DEFAULTS["source"])
    s = {}
    s["chi"] = _num(ctx, "source.chi", src["chi"], 0, 0.2, lo_open=True)
    s["eta_deg"] = _num(ctx, "source.eta_deg", src["eta_deg"], 0, 90)
    s["B_mG"] = _num(ctx, "source.B_mG", src["B_mG"], 0)
    s["g_factor"] = _num(ctx, "source.g_factor", src["g_factor"])
    s["beta"] = None if src["beta"] is None else _num(ctx, "source.beta", src["beta"], 0)
    s["retrieval_eff"] = _per_arm(ctx, "source.retrieval_eff", src["retrieval_eff"])
    s["visibility"] = _per_arm(ctx, "source.visibility", src["visibility"])
    vbt = src["visibility_by_tau"] or {}
    _mapping(ctx, "source.visibility_by_tau", vbt)
    s["visibility_by_tau"] = {
        _num(ctx, f"source.visibility_by_tau.{k}", k, 0): _per_arm(ctx, f"source.visibility_by_tau.{k}", v)
        for k, v in sorted(vbt.items(), key=lambda kv: float(kv[0]) if not isinstance(kv[0], bool) else 0)
    }
    s["double_excitations"] = _bool(ctx, "source.double_excitations", src["double_excitations"])
    s["larmor_model"] = _choice(ctx, "source.larmor_model", src["larmor_model"], LARMOR_MODELS)
    doc["source"] = s

    sch = data.get("scheme")
    if sch is None:
        doc["scheme"] = None
    else:
        _mapping(ctx, "scheme", sch, {"F_b", "F_e2"})
        doc["scheme"] = {k: _num(ctx, f"scheme.{k}", sch.get(k, 2), 0, 5, integer=True) for k in ("F_b", "F_e2")}

    det = _merge(ctx, "detectors", data.get("detectors"), DEFAULTS["detectors"])
    eff = det["efficiency"] or {}
    _mapping(ctx, "detectors.efficiency", eff)
    doc["detectors"] = {
        "default_efficiency": _num(ctx, "detectors.default_efficiency", det["default_efficiency"], 0, 1),
        "efficiency": {str(k): _num(ctx, f"detectors.efficiency.{k}", v, 0, 1) for k, v in sorted(eff.items())},
        "dark_prob": _num(ctx, "detectors.dark_prob", det["dark_prob"], 0, 0.5),
    }

    settings = data.get("settings")
    if settings is None:
        doc["settings"] = None
    else:
        if not isinstance(settings, list):
            ctx.fail("settings", "expected a list of {mode, kind, theta}")
        out = []
        for i, st in enumerate(settings):
            p = f"settings[{i}]"
            _mapping(ctx, p, st, {"mode", "kind", "theta"})
            if "mode" not in st:
                ctx.fail(p, "missing key 'mode'")
            out.append({"mode": str(st["mode"]),
                        "kind": _choice(ctx, f"{p}.kind", st.get("kind", "linear"), ANALYZER_KINDS),
                        "theta": _num(ctx, f"{p}.theta", st.get("theta", 0.0), 0, 180)})
            if out[-1]["theta"] >= 180:
                ctx.fail(f"{p}.theta", "must be below 180 degrees")
        doc["settings"] = out

    taus = data.get("taus", DEFAULTS["taus"])
    if isinstance(taus, (int, float)) and not isinstance(taus, bool):
        taus = [taus]
    if not isinstance(taus, list) or not taus:
        ctx.fail("taus", "expected a non-empty list of storage times in ns")
    doc["taus"] = [_num(ctx, f"taus[{i}]", t, 0) for i, t in enumerate(taus)]

    tm = _merge(ctx, "timing", data.get("timing"), DEFAULTS["timing"])
    doc["timing"] = {k: (_num(ctx, f"timing.{k}", tm[k], 1, integer=True) if k == "cycle_hz"
                         else _num(ctx, f"timing.{k}", tm[k], 0)) for k in DEFAULTS["timing"]}

    eng = _merge(ctx, "engine", data.get("engine"), DEFAULTS["engine"])
    doc["engine"] = {
        "kind": _choice(ctx, "engine.kind", eng["kind"], ENGINES),
        "mc_trials": _num(ctx, "engine.mc_trials", eng["mc_trials"], 1, integer=True),
        "seed": _num(ctx, "engine.seed", eng["seed"], 0, 2**64 - 1, integer=True),
        "workers": _num(ctx, "engine.workers", eng["workers"], 1, 256, integer=True),
    }

    # Semantic checks that need the assembled objects.
    try:
        build(doc)
    except ConfigError:
        raise
    except ValueError as exc:
        section = "settings" if "setting" in str(exc) else ("timing" if "timing" in str(exc) or "cycle" in str(exc)
                                                              else "")
        ctx.fail(section, str(exc))
    return doc


def build(doc: Mapping) -> ExperimentConfig:
    """ExperimentConfig from a canonical document (interface units to SI)."""
    s = doc["source"]
    src = SourceParams(
        chi=s["chi"], eta=math.radians(s["eta_deg"]), B=s["B_mG"] / 1000.0, g_factor=s["g_factor"],
        beta=s["beta"], retrieval_eff=s["retrieval_eff"], visibility=s["visibility"],
        double_excitations=s["double_excitations"], larmor_model=s["larmor_model"],
    )
    vbt = {float(t): (v if isinstance(v, Mapping) else {a: v for a in ARMS}) for t, v in s["visibility_by_tau"].items()}
    scheme = None if doc["scheme"] is None else LevelScheme(1, doc["scheme"]["F_b"], doc["scheme"]["F_e2"])
    settings = None if doc["settings"] is None else tuple(
        AnalyzerSetting(st["mode"], st["kind"], st["theta"]) for st in doc["settings"])
    d, e = doc["detectors"], doc["engine"]
    return ExperimentConfig(
        protocol=doc["protocol"], source=src, scheme=scheme, detector_eff=dict(d["efficiency"]),
        default_efficiency=d["default_efficiency"], dark_prob=d["dark_prob"], settings=settings,
        taus_ns=tuple(doc["taus"]), visibility_by_tau=vbt, timing=TimingSequence(**doc["timing"]),
        engine=e["kind"], mc_trials=e["mc_trials"], seed=e["seed"], workers=e["workers"],
    )


def loads(text: str) -> dict:
    """Parse and resolve config text to the canonical document."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError("<document>", f"not valid YAML/JSON: {getattr(exc, 'problem', exc)}",
                          None if mark is None else mark.line + 1) from None
    marks: dict[str, int] = {}
    _collect_marks(node, "", marks)
    return resolve(data, marks)


def load(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    return loads(text)


def parse_config(path) -> ExperimentConfig:
    return build(load(path))


def dumps(doc: Mapping) -> str:
    """Canonical YAML text of a resolved document; ``loads(dumps(d)) == d``."""
    return yaml.safe_dump(dict(doc), sort_keys=False, default_flow_style=None)


def document_of(cfg: ExperimentConfig) -> dict:
    """Canonical document describing ``cfg`` (SI converted back to interface units)."""
    src = cfg.source
    settings = None
    if cfg.settings != default_settings(cfg.protocol):
        settings = [{"mode": s.mode, "kind": s.kind, "theta": float(s.theta)} for s in cfg.settings]
    doc = {
        "protocol": cfg.protocol,
        "source": {
            "chi": src.chi, "eta_deg": math.degrees(src.eta), "B_mG": src.B * 1000.0, "g_factor": src.g_factor,
            "beta": src.beta, "retrieval_eff": dict(src.retrieval_eff), "visibility": dict(src.visibility),
            "visibility_by_tau": {float(t): dict(v) for t, v in sorted(cfg.visibility_by_tau.items())},
            "double_excitations": src.double_excitations, "larmor_model": src.larmor_model,
        },
        "scheme": None if cfg.scheme is None else {"F_b": cfg.scheme.F_b, "F_e2": cfg.scheme.F_e2},
        "detectors": {"default_efficiency": cfg.default_efficiency, "efficiency": dict(sorted(cfg.detector_eff.items())),
                      "dark_prob": cfg.dark_prob},
        "settings": settings,
        "taus": [float(t) for t in cfg.taus_ns],
        "timing": {k: getattr(cfg.timing, k) for k in DEFAULTS["timing"]},
        "engine": {"kind": cfg.engine, "mc_trials": cfg.mc_trials, "seed": cfg.seed, "workers": cfg.workers},
    }
    return resolve(doc)
