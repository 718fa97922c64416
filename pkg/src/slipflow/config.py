"""YAML run configuration: schema, validation, and object construction.

Validation collects every problem before raising, reports them with dotted
key paths, and suggests the nearest known key for typos.  The parsed
dictionary is kept verbatim (``RunConfig.raw``) so manifests can echo exactly
what was read.
"""
from __future__ import annotations

import difflib
import math
from dataclasses import dataclass
from typing import Any

import numpy as np
import yaml

from .domain import DomainSpec, Slab, Torus
from .errors import ConfigValidationError
from .operators import PhysicsParams
from .timestepper import SCHEMES, SolverConfig

FORMAT_VERSION = 1

_SECTIONS = {
    "format_version": None,
    "domain": {"geometry", "lengths", "half_height", "friction"},
    "discretization": {"num_modes", "oversample", "vertical_modes"},
    "physics": {"viscosity", "damping_coefficient", "damping_exponent"},
    "time": {"dt", "t_final", "scheme", "picard_tol", "picard_max_iter",
             "record_every"},
    "forcing": {"kind", "entries"},
    "initial": {"kind", "seed", "amplitude", "decay", "decay_variable",
                "coefficients"},
    "output": {"directory", "prefix"},
    "study": {"epsilons", "dts", "mode_counts", "case", "t_final", "seed",
              "twin_seed", "amplitude", "decay", "decay_variable"},
}
_REQUIRED = ("format_version", "domain", "discretization", "physics", "time",
             "forcing", "initial", "output")


class _Collector:
    def __init__(self):
        self.errors: list[str] = []

    def add(self, path: str, message: str) -> None:
        self.errors.append(f"{path}: {message}")

    def suggest(self, path: str, key: str, known) -> None:
        near = difflib.get_close_matches(key, sorted(known), n=1)
        hint = f" (did you mean {near[0]!r}?)" if near else ""
        self.add(path, f"unknown key {key!r}{hint}")


def _need(cfg: dict, section: str, key: str, col: _Collector,
          types, default=None, required=True):
    sec = cfg.get(section)
    if not isinstance(sec, dict):
        return default
    if key not in sec:
        if required:
            col.add(f"{section}.{key}", "missing required key")
        return default
    val = sec[key]
    if types is not None and not isinstance(val, types) or isinstance(val, bool):
        col.add(f"{section}.{key}",
                f"expected {getattr(types, '__name__', types)}, got {type(val).__name__}")
        return default
    return val


_NUM = (int, float)


@dataclass
class RunConfig:
    """Validated configuration plus the raw parsed mapping."""

    raw: dict
    domain: DomainSpec
    num_modes: int
    oversample: float
    vertical_modes: int | None
    physics: PhysicsParams
    solver: SolverConfig
    forcing_spec: dict
    initial_spec: dict
    output_directory: str
    study: dict

    @property
    def seeds(self) -> dict:
        out = {}
        if "seed" in self.initial_spec:
            out["initial"] = self.initial_spec["seed"]
        if "seed" in self.study:
            out["study"] = self.study["seed"]
        if "twin_seed" in self.study:
            out["twin"] = self.study["twin_seed"]
        return out


def parse_config(data: dict) -> RunConfig:
    """Validate a parsed mapping; raises ConfigValidationError with all issues."""
    col = _Collector()
    if not isinstance(data, dict):
        raise ConfigValidationError(["config root must be a mapping"])

    for key in data:
        if key not in _SECTIONS:
            col.suggest("config", key, _SECTIONS)
    for section in _REQUIRED:
        if section not in data:
            col.add(section, "missing required section")
    for section, keys in _SECTIONS.items():
        if keys is None or section not in data:
            continue
        if not isinstance(data[section], dict):
            col.add(section, f"must be a mapping, got {type(data[section]).__name__}")
            continue
        for key in data[section]:
            if key not in keys:
                col.suggest(section, key, keys)

    fv = data.get("format_version")
    if fv is not None and fv != FORMAT_VERSION:
        col.add("format_version", f"unsupported value {fv!r}, expected {FORMAT_VERSION}")

    # domain
    geometry = _need(data, "domain", "geometry", col, str)
    lengths = _need(data, "domain", "lengths", col, list)
    domain = None
    if geometry not in (None, "torus", "slab"):
        col.add("domain.geometry", f"must be 'torus' or 'slab', got {geometry!r}")
        geometry = None
    if lengths is not None and not all(isinstance(v, _NUM) for v in lengths):
        col.add("domain.lengths", "entries must be numbers")
        lengths = None
    if geometry == "torus":
        for extra in ("half_height", "friction"):
            if isinstance(data.get("domain"), dict) and extra in data["domain"]:
                col.add(f"domain.{extra}", "only valid for slab geometry")
        if lengths is not None:
            if len(lengths) != 3:
                col.add("domain.lengths", f"torus needs 3 lengths, got {len(lengths)}")
            else:
                try:
                    domain = Torus(lengths=tuple(float(v) for v in lengths))
                except ValueError as exc:
                    col.add("domain.lengths", str(exc))
    elif geometry == "slab":
        half = _need(data, "domain", "half_height", col, _NUM)
        friction = _need(data, "domain", "friction", col, _NUM, default=0.0,
                         required=False)
        if lengths is not None:
            if len(lengths) != 2:
                col.add("domain.lengths", f"slab needs 2 horizontal lengths, got {len(lengths)}")
            elif half is not None:
                try:
                    domain = Slab(lengths=tuple(float(v) for v in lengths),
                                  half_height=float(half),
                                  friction=float(friction))
                except ValueError as exc:
                    col.add("domain", str(exc))

    # discretization
    num_modes = _need(data, "discretization", "num_modes", col, int)
    if num_modes is not None and num_modes < 1:
        col.add("discretization.num_modes", f"must be >= 1, got {num_modes}")
        num_modes = None
    oversample = _need(data, "discretization", "oversample", col, _NUM,
                       default=2.0, required=False)
    if oversample is not None and oversample < 1:
        col.add("discretization.oversample", f"must be >= 1, got {oversample}")
        oversample = 2.0
    vertical_modes = _need(data, "discretization", "vertical_modes", col, int,
                           required=False)
    if vertical_modes is not None and vertical_modes < 1:
        col.add("discretization.vertical_modes", f"must be >= 1, got {vertical_modes}")
        vertical_modes = None

    # physics
    viscosity = _need(data, "physics", "viscosity", col, _NUM)
    theta = _need(data, "physics", "damping_coefficient", col, _NUM,
                  default=0.0, required=False)
    exponent = _need(data, "physics", "damping_exponent", col, _NUM,
                     default=1.0, required=False)
    physics = None
    if viscosity is not None:
        if viscosity <= 0:
            col.add("physics.viscosity", f"must be positive, got {viscosity}")
        elif theta is not None and theta < 0:
            col.add("physics.damping_coefficient", f"must be >= 0, got {theta}")
        elif exponent is not None and exponent < 1:
            col.add("physics.damping_exponent", f"must be >= 1, got {exponent}")
        else:
            physics = PhysicsParams(viscosity=float(viscosity),
                                    damping_coefficient=float(theta),
                                    damping_exponent=float(exponent))

    # time
    dt = _need(data, "time", "dt", col, _NUM)
    t_final = _need(data, "time", "t_final", col, _NUM)
    scheme = _need(data, "time", "scheme", col, str, default="imex-cn",
                   required=False)
    picard_tol = _need(data, "time", "picard_tol", col, _NUM, default=1e-10,
                       required=False)
    picard_max = _need(data, "time", "picard_max_iter", col, int, default=60,
                       required=False)
    record_every = _need(data, "time", "record_every", col, int, default=1,
                         required=False)
    solver = None
    if scheme is not None and scheme not in SCHEMES:
        col.add("time.scheme", f"must be one of {list(SCHEMES)}, got {scheme!r}")
        scheme = None
    if dt is not None and dt <= 0:
        col.add("time.dt", f"must be positive, got {dt}")
        dt = None
    if t_final is not None and t_final <= 0:
        col.add("time.t_final", f"must be positive, got {t_final}")
        t_final = None
    if dt is not None and t_final is not None:
        steps = t_final / dt
        if abs(steps - round(steps)) > 1e-8 * max(1.0, steps):
            col.add("time.dt", f"dt={dt} does not divide t_final={t_final} evenly")
            dt = None
    if None not in (dt, t_final, scheme, picard_tol, picard_max, record_every):
        try:
            solver = SolverConfig(dt=float(dt), t_final=float(t_final),
                                  scheme=scheme, picard_tol=float(picard_tol),
                                  picard_max_iter=int(picard_max),
                                  record_every=int(record_every))
        except ValueError as exc:
            col.add("time", str(exc))

    # forcing
    forcing_spec = {"kind": "none"}
    fkind = _need(data, "forcing", "kind", col, str, default="none",
                  required=True)
    if fkind not in (None, "none", "modal"):
        col.add("forcing.kind", f"must be 'none' or 'modal', got {fkind!r}")
    elif fkind == "modal":
        entries = _need(data, "forcing", "entries", col, list)
        clean = []
        for i, entry in enumerate(entries or []):
            if not isinstance(entry, dict):
                col.add(f"forcing.entries[{i}]", "must be a mapping")
                continue
            idx = entry.get("index")
            amp = entry.get("amplitude")
            freq = entry.get("frequency", 0.0)
            bad = set(entry) - {"index", "amplitude", "frequency"}
            for b in sorted(bad):
                col.suggest(f"forcing.entries[{i}]", b,
                            {"index", "amplitude", "frequency"})
            if not isinstance(idx, int) or isinstance(idx, bool) or idx < 0:
                col.add(f"forcing.entries[{i}].index", "must be a nonnegative integer")
                continue
            if not isinstance(amp, _NUM) or isinstance(amp, bool):
                col.add(f"forcing.entries[{i}].amplitude", "must be a number")
                continue
            if not isinstance(freq, _NUM) or isinstance(freq, bool):
                col.add(f"forcing.entries[{i}].frequency", "must be a number")
                continue
            clean.append({"index": idx, "amplitude": float(amp),
                          "frequency": float(freq)})
        if num_modes is not None:
            for i, entry in enumerate(clean):
                if entry["index"] >= num_modes:
                    col.add(f"forcing.entries[{i}].index",
                            f"mode {entry['index']} outside basis of size {num_modes}")
        forcing_spec = {"kind": "modal", "entries": clean}

    # initial
    initial_spec = {"kind": "rest"}
    ikind = _need(data, "initial", "kind", col, str)
    if ikind not in (None, "rest", "random", "coefficients"):
        col.add("initial.kind",
                f"must be 'rest', 'random' or 'coefficients', got {ikind!r}")
    elif ikind == "random":
        seed = _need(data, "initial", "seed", col, int)
        amplitude = _need(data, "initial", "amplitude", col, _NUM, default=1.0,
                          required=False)
        decay = _need(data, "initial", "decay", col, _NUM, default=0.0,
                      required=False)
        dv = _need(data, "initial", "decay_variable", col, str,
                   default="sqrt_h1", required=False)
        if dv not in (None, "h1", "sqrt_h1"):
            col.add("initial.decay_variable",
                    f"must be 'h1' or 'sqrt_h1', got {dv!r}")
        if seed is not None:
            initial_spec = {"kind": "random", "seed": int(seed),
                            "amplitude": float(amplitude),
                            "decay": float(decay), "decay_variable": dv}
    elif ikind == "coefficients":
        coeffs = _need(data, "initial", "coefficients", col, list)
        if coeffs is not None:
            if not all(isinstance(v, _NUM) and not isinstance(v, bool)
                       for v in coeffs):
                col.add("initial.coefficients", "entries must be numbers")
            elif num_modes is not None and len(coeffs) != num_modes:
                col.add("initial.coefficients",
                        f"got {len(coeffs)} values for {num_modes} modes")
            else:
                initial_spec = {"kind": "coefficients",
                                "coefficients": [float(v) for v in coeffs]}

    # output
    outdir = _need(data, "output", "directory", col, str)

    study = data.get("study") or {}

    if col.errors:
        raise ConfigValidationError(col.errors)

    return RunConfig(raw=data, domain=domain, num_modes=num_modes,
                     oversample=float(oversample),
                     vertical_modes=vertical_modes, physics=physics,
                     solver=solver, forcing_spec=forcing_spec,
                     initial_spec=initial_spec, output_directory=outdir,
                     study=dict(study))


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigValidationError([f"not valid YAML: {exc}"]) from exc
    return parse_config(data)


def make_initial(cfg: RunConfig, basis) -> np.ndarray:
    from .harness import make_random_coeffs

    spec = cfg.initial_spec
    if spec["kind"] == "rest":
        return np.zeros(basis.num_modes)
    if spec["kind"] == "random":
        return make_random_coeffs(basis, seed=spec["seed"],
                                  amplitude=spec["amplitude"],
                                  decay=spec["decay"],
                                  decay_variable=spec["decay_variable"])
    return np.asarray(spec["coefficients"], dtype=float)


def make_forcing(cfg: RunConfig, num_modes: int):
    spec = cfg.forcing_spec
    if spec["kind"] == "none" or not spec.get("entries"):
        return None
    entries = spec["entries"]

    def forcing(t: float) -> np.ndarray:
        out = np.zeros(num_modes)
        for e in entries:
            out[e["index"]] += e["amplitude"] * math.cos(e["frequency"] * t)
        return out

    return forcing
