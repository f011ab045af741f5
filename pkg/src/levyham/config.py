"""Experiment configuration: INI-style tables, validation, run manifests.

A config file has flat ``key = value`` tables, one nesting level::

    [levy]
    kind = slice
    c = 1.0
    theta0 = 0.4
    dim = 1
    theta = 1.0

    [model]
    force = damped_gradient
    potential = double_well_poly
    ...

Unknown sections or keys are rejected with the offending line number.
Every run emits a manifest with the config hash, seed, library versions,
and produced files; data outputs are bitwise-stable for a fixed
(config, seed) pair, while the manifest additionally records wall times.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import platform
import time
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import measures as ms
from . import model as md
from .errors import ConfigError
from .generator import QuadratureScheme
from .simulate import SimConfig

__all__ = ["ExperimentConfig", "RunManifest", "load_config", "benchmark_config", "SCHEMA"]

# section -> key -> (type, default); None default means required
SCHEMA = {
    "levy": {
        "kind": (str, "slice"),            # slice | stable
        "c": (float, 1.0),
        "theta0": (float, 0.4),
        "alpha0": (float, 1.5),
        "scale": (float, 1.0),
        "dim": (int, 1),
        "theta": (float, 1.0),
        "slice_c": (float, None),          # optional explicit coupling slice
        "slice_theta0": (float, None),
    },
    "model": {
        "a": (float, 0.0),
        "b": (float, 1.0),
        "force": (str, "damped_gradient"),
        "alpha_damp": (float, 1.0),
        "beta": (float, 1.0),
        "potential": (str, "double_well_poly"),  # double_well_poly|double_well_exp|quadratic
        "pot_c1": (float, 1.0),
        "pot_c2": (float, 2.0),
        "pot_l": (float, 2.0),
        "pot_k": (float, 1.0),
        "dim": (int, 1),
    },
    "lyapunov": {
        "theta": (float, None),            # defaults to levy theta
        "grid_radius": (float, 20.0),
        "grid_points": (int, 21),
    },
    "quadrature": {
        "rho_in": (float, 1e-6),
        "rho_out": (float, 1e6),
        "nodes_radial": (int, 12),
        "nodes_angular": (int, 4),          # panels per decade for 1-d tables
        "tail_order": (int, 0),
    },
    "sim": {
        "h": (float, 0.02),
        "delta": (float, 1e-3),
        "horizon": (float, 20.0),
        "n_replicas": (int, 200),
        "seed": (int, 0),
        "n_save": (int, 41),
        "compensator_correction": (bool, True),
        "x0": (float, 2.0),
        "v0": (float, 0.0),
        "x0_prime": (float, -2.0),
        "v0_prime": (float, 0.0),
    },
    "constants": {
        "r0_jump": (float, 0.5),
        "position_radius": (float, None),
        "decay_threshold": (float, None),   # equilibrium diagnostics threshold
    },
}

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration with typed per-table dictionaries."""

    levy: dict
    model: dict
    lyapunov: dict
    quadrature: dict
    sim: dict
    constants: dict
    source_text: str = ""

    def config_hash(self) -> str:
        body = json.dumps(
            {k: getattr(self, k) for k in ("levy", "model", "lyapunov", "quadrature",
                                           "sim", "constants")},
            sort_keys=True, default=str)
        return hashlib.sha256(body.encode()).hexdigest()

    # -- builders ---------------------------------------------------------

    def build_levy(self) -> ms.LevyMeasureSpec:
        t = self.levy
        if t["kind"] == "slice":
            measure = ms.SliceMeasure(c=t["c"], theta0=t["theta0"], dim=t["dim"])
            slice_part = None
        elif t["kind"] == "stable":
            measure = ms.IsotropicStable(alpha0=t["alpha0"], scale=t["scale"], dim=t["dim"])
            slice_part = None
            if t["slice_c"] is not None or t["slice_theta0"] is not None:
                slice_part = ms.SliceMeasure(
                    c=t["slice_c"] if t["slice_c"] is not None else t["scale"],
                    theta0=t["slice_theta0"] if t["slice_theta0"] is not None else t["alpha0"],
                    dim=t["dim"])
        else:
            raise ConfigError(f"unknown levy kind {t['kind']!r}")
        try:
            return ms.LevyMeasureSpec(measure=measure, theta=t["theta"], slice_part=slice_part)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def build_potential(self):
        t = self.model
        kind = t["potential"]
        if kind == "double_well_poly":
            return md.DoubleWellPoly(t["pot_c1"], t["pot_c2"], t["pot_l"])
        if kind == "double_well_exp":
            return md.DoubleWellExp(t["pot_c1"], t["pot_c2"], t["pot_l"])
        if kind == "quadratic":
            return md.Quadratic(t["pot_k"])
        raise ConfigError(f"unknown potential {kind!r}")

    def build_langevin(self) -> md.KineticLangevinSpec:
        t = self.model
        if t["force"] != "damped_gradient":
            raise ConfigError(f"unknown force kind {t['force']!r}")
        return md.KineticLangevinSpec(alpha_damp=t["alpha_damp"], beta=t["beta"],
                                      potential=self.build_potential(), dim=t["dim"])

    def build_scheme(self) -> QuadratureScheme:
        q = self.quadrature
        return QuadratureScheme(rho_in=q["rho_in"], rho_out=q["rho_out"],
                                panels_per_decade=q["nodes_angular"],
                                nodes_per_panel=q["nodes_radial"],
                                tail_order=q["tail_order"])

    def build_sim(self, seed: int | None = None, n_replicas: int | None = None) -> SimConfig:
        s = self.sim
        return SimConfig(h=s["h"], delta=s["delta"], horizon=s["horizon"],
                         n_replicas=n_replicas if n_replicas is not None else s["n_replicas"],
                         seed=seed if seed is not None else s["seed"],
                         n_save=s["n_save"],
                         compensator_correction=s["compensator_correction"])

    def initial_pair(self):
        s = self.sim
        d = self.model["dim"]
        mk = lambda val: np.full(d, float(val))
        return mk(s["x0"]), mk(s["v0"]), mk(s["x0_prime"]), mk(s["v0_prime"])


def _coerce(raw: str, typ, section: str, key: str, line: int):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in _BOOL_TRUE:
                return True
            if low in _BOOL_FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}", line=line) from exc


def _line_of(text: str, section: str, key: str | None) -> int | None:
    in_section = False
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            in_section = stripped[1:-1].strip() == section
            if in_section and key is None:
                return i
        elif in_section and key is not None:
            name = stripped.split("=", 1)[0].split(":", 1)[0].strip()
            if name == key:
                return i
    return None


def load_config(path: str | None = None, text: str | None = None) -> ExperimentConfig:
    """Parse and validate a config file; unknown keys are rejected."""
    if text is None:
        if path is None:
            text = ""
        else:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse failure: {exc}") from exc

    tables = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", line=_line_of(text, section, None))
        for key in parser[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]",
                                  line=_line_of(text, section, key))
    for section, keys in SCHEMA.items():
        table = {}
        for key, (typ, default) in keys.items():
            if parser.has_option(section, key):
                table[key] = _coerce(parser.get(section, key), typ, section, key,
                                     _line_of(text, section, key) or 0)
            else:
                table[key] = default
        tables[section] = table
    if tables["lyapunov"]["theta"] is None:
        tables["lyapunov"]["theta"] = tables["levy"]["theta"]
    cfg = ExperimentConfig(**tables, source_text=text)
    _validate_physics(cfg)
    return cfg


def _validate_physics(cfg: ExperimentConfig):
    lv = cfg.levy
    if lv["kind"] == "slice" and not 0.0 < lv["theta0"] < 2.0:
        raise ConfigError("levy theta0 must lie in (0, 2)")
    if not 0.0 < lv["theta"] <= 1.0:
        raise ConfigError("levy theta must lie in (0, 1]")
    if cfg.model["b"] <= 0:
        raise ConfigError("model b must be positive")
    if cfg.model["a"] < 0:
        raise ConfigError("model a must be non-negative")
    if cfg.sim["h"] <= 0 or cfg.sim["delta"] <= 0:
        raise ConfigError("sim h and delta must be positive")
    if cfg.sim["horizon"] < 0:
        raise ConfigError("sim horizon must be non-negative")
    if cfg.constants["r0_jump"] <= 0:
        raise ConfigError("constants r0_jump must be positive")


def benchmark_config() -> ExperimentConfig:
    """The double-well slice-noise reference configuration."""
    return load_config(text="")


@dataclass
class RunManifest:
    """Provenance record written next to every command's outputs."""

    config_hash: str
    seed: int
    command: str
    versions: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    started: float = field(default_factory=time.time)

    def finish(self, path):
        self.timings["total_s"] = time.time() - self.started
        self.versions = {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({
                "config_hash": self.config_hash,
                "seed": self.seed,
                "command": self.command,
                "versions": self.versions,
                "timings": self.timings,
                "outputs": self.outputs,
            }, fh, indent=2, sort_keys=True)
            fh.write("\n")
