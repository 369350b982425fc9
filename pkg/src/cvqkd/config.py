"""INI run configuration with a fixed schema.

Every section and key is optional; unknown sections or keys are rejected.

    [source]
    overlap = 0.51            ; or alpha = 0.58 (not both)
    pulses = 250000
    vacuum_slots = 5
    seed = 42

    [channel]
    transmission = 0.457
    excess_noise = 0.0        ; SNU, both axes
    excess_noise_x =          ; optional per-axis override
    excess_noise_y =

    [detector]
    sample_rate = 20e6
    pulse_duration = 5e-6
    electronic_noise_rel = 0.0398
    lowpass_cutoff = 2e6
    quantum_efficiency = 0.91

    [postselection]
    threshold = 0.0
    slice_width = 0.01
    clip_negative_slices = true
    tau_max = 5.0
    tau_points = 200
    sweep_max = 3.0           ; empirical sweep range and size
    sweep_points = 20

    [ec]
    efficiency = 1.2

    [witness]
    tolerance = 1e-7
    resolution = 1e-3
    coherence_mode = source   ; or channel
    method = auto             ; interior-point with cvxopt fallback, or either alone
    excess_x = 0.0            ; operator-level excess variances for `witness`
    excess_y =
    transmissions = 1.0, 0.65, 0.483, 0.457
    overlaps = 0.05, 0.10, ..., 0.95

    [output]
    directory = out
    format = csv              ; or svg
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from .channel import ChannelConfig, DetectorConfig, SourceConfig
from .keyrate import ECModel, PostselectionConfig
from .sdp import METHODS
from .witness import COHERENCE_MODES


class ConfigError(ValueError):
    """Invalid configuration file or value."""


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s: str) -> tuple[float, ...]:
    vals = tuple(float(p) for p in s.replace(";", ",").split(",") if p.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


def _choice(*options: str) -> Callable[[str], str]:
    def parse(s: str) -> str:
        s = s.strip()
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s

    return parse


_DEFAULT_OVERLAPS = tuple(round(0.05 * k, 2) for k in range(1, 20))

# section -> key -> (parser, default); a default of None means "unset"
SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "source": {
        "alpha": (float, None),
        "overlap": (float, None),
        "pulses": (int, 250000),
        "vacuum_slots": (int, 5),
        "seed": (int, 0),
    },
    "channel": {
        "transmission": (float, 1.0),
        "excess_noise": (float, 0.0),
        "excess_noise_x": (float, None),
        "excess_noise_y": (float, None),
    },
    "detector": {
        "sample_rate": (float, 20e6),
        "pulse_duration": (float, 5e-6),
        "electronic_noise_rel": (float, 10 ** (-1.4)),
        "lowpass_cutoff": (float, 2e6),
        "quantum_efficiency": (float, 0.91),
    },
    "postselection": {
        "threshold": (float, 0.0),
        "slice_width": (float, 0.01),
        "clip_negative_slices": (_bool, True),
        "tau_max": (float, 5.0),
        "tau_points": (int, 200),
        "sweep_max": (float, 3.0),
        "sweep_points": (int, 20),
    },
    "ec": {
        "efficiency": (float, 1.2),
    },
    "witness": {
        "tolerance": (float, 1e-7),
        "resolution": (float, 1e-3),
        "coherence_mode": (_choice(*COHERENCE_MODES), "source"),
        "method": (_choice(*METHODS), "auto"),
        "excess_x": (float, 0.0),
        "excess_y": (float, None),
        "transmissions": (_floats, (1.0, 0.65, 0.483, 0.457)),
        "overlaps": (_floats, _DEFAULT_OVERLAPS),
    },
    "output": {
        "directory": (str, "out"),
        "format": (_choice("csv", "svg"), "csv"),
    },
}


@dataclass
class RunConfig:
    values: dict[str, dict[str, Any]] = field(default_factory=dict)
    path: Optional[str] = None

    def __post_init__(self):
        full = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
        for s, kv in self.values.items():
            if s not in SCHEMA:
                raise ConfigError(f"unknown section [{s}]")
            for k, v in kv.items():
                if k not in SCHEMA[s]:
                    raise ConfigError(f"unknown key {k!r} in [{s}]")
                full[s][k] = v
        self.values = full
        self._validate()

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    def _validate(self):
        try:
            self.source_config()
            self.channel_config()
            self.detector_config()
            self.postselection_config()
            self.ec_model()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        w = self["witness"]
        if w["tolerance"] <= 0 or w["resolution"] <= 0:
            raise ConfigError("witness tolerance and resolution must be positive")
        if any(not 0 < t <= 1 for t in w["transmissions"]):
            raise ConfigError("witness transmissions must lie in (0, 1]")
        if any(not 0 < o <= 1 for o in w["overlaps"]):
            raise ConfigError("witness overlaps must lie in (0, 1]")
        p = self["postselection"]
        if p["sweep_points"] < 2 or p["tau_points"] < 2:
            raise ConfigError("sweep_points and tau_points must be >= 2")

    def with_overrides(self, seed: Optional[int] = None, out: Optional[str] = None, fmt: Optional[str] = None) -> RunConfig:
        vals = {s: dict(kv) for s, kv in self.values.items()}
        if seed is not None:
            vals["source"]["seed"] = seed
        if out is not None:
            vals["output"]["directory"] = out
        if fmt is not None:
            vals["output"]["format"] = fmt
        return RunConfig(vals, self.path)

    # typed views

    def source_config(self) -> SourceConfig:
        s = self["source"]
        if s["alpha"] is not None and s["overlap"] is not None:
            raise ValueError("[source] set alpha or overlap, not both")
        if s["alpha"] is None and s["overlap"] is None:
            kw = {"target_overlap": 0.5}
        elif s["alpha"] is not None:
            kw = {"alpha": s["alpha"]}
        else:
            kw = {"target_overlap": s["overlap"]}
        if "target_overlap" in kw and not 0 < kw["target_overlap"] < 1:
            raise ValueError("[source] overlap must lie in (0, 1)")
        if not 0 <= s["seed"] < 2**64:
            raise ValueError("[source] seed must be a 64-bit unsigned integer")
        return SourceConfig(pulse_count=s["pulses"], vacuum_slots_per_signal=s["vacuum_slots"], seed=s["seed"], **kw)

    def channel_config(self) -> ChannelConfig:
        c = self["channel"]
        xy = None
        if c["excess_noise_x"] is not None or c["excess_noise_y"] is not None:
            base = c["excess_noise"]
            xy = (
                base if c["excess_noise_x"] is None else c["excess_noise_x"],
                base if c["excess_noise_y"] is None else c["excess_noise_y"],
            )
        return ChannelConfig(c["transmission"], c["excess_noise"], xy)

    def detector_config(self) -> DetectorConfig:
        d = self["detector"]
        return DetectorConfig(
            sample_rate=d["sample_rate"],
            pulse_duration=d["pulse_duration"],
            electronic_noise_rel=d["electronic_noise_rel"],
            lowpass_cutoff=d["lowpass_cutoff"],
            quantum_efficiency=d["quantum_efficiency"],
        )

    def postselection_config(self) -> PostselectionConfig:
        p = self["postselection"]
        return PostselectionConfig(p["threshold"], p["slice_width"], p["clip_negative_slices"], p["tau_max"], p["tau_points"])

    def ec_model(self) -> ECModel:
        return ECModel(self["ec"]["efficiency"])

    def sweep_grid(self) -> np.ndarray:
        p = self["postselection"]
        return np.linspace(0.0, p["sweep_max"], p["sweep_points"])

    def echo(self) -> dict[str, dict[str, Any]]:
        """JSON-ready copy of every setting, defaults included."""
        return {s: {k: list(v) if isinstance(v, tuple) else v for k, v in kv.items()} for s, kv in self.values.items()}


def parse_config(text: str, path: Optional[str] = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keep key case so typos are not silently folded
    try:
        cp.read_string(text, source=path or "<config>")
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    values: dict[str, dict[str, Any]] = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        values[section] = {}
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            parser, default = SCHEMA[section][key]
            if raw.strip() == "":
                values[section][key] = default
                continue
            try:
                values[section][key] = parser(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None
    return RunConfig(values, path)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
