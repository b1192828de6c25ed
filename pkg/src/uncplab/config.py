"""Experiment configuration: INI-style files, presets, line-anchored errors.

A config is a plain sectioned key-value document.  ``parse_config`` turns a
file into a frozen :class:`ExperimentConfig` after validating every value;
all rejections carry the offending file line so callers can exit with a
``path:line: message`` diagnostic.  Named experiment presets expand to
default key sets which explicit keys in the file override.
"""

from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass, field, replace

EXPERIMENTS = ("project", "observe", "carleman", "interp", "pipeline", "thickness")
PROBLEM_PRESETS = ("flat", "poschl-teller", "gaussian-metric")
SET_MODES = ("periodic", "random", "full")
BRANCHES = ("plus", "minus")
OBSERVE_METHODS = ("svd", "gram")
CARLEMAN_VARIANTS = ("dbar", "three-term")
INTERP_KINDS = ("segment", "ball", "tube")

# named bundles of defaults; file keys win over preset keys
EXPERIMENT_PRESETS = {
    "flat-1d-thick-half": {
        ("experiment", "kind"): "observe",
        ("grid", "dim"): "1",
        ("grid", "length"): "16.0",
        ("grid", "points"): "1024",
        ("problem", "preset"): "flat",
        ("set", "mode"): "periodic",
        ("set", "gamma"): "0.5",
        ("set", "a"): "1.0",
        ("set", "radius"): "2.0",
        ("observe", "thresholds"): "2,4,6,8,10,12,14,16,18,20,22,24",
        ("observe", "method"): "svd",
    },
}

# section -> allowed keys; None means any key is accepted
_SCHEMA = {
    "experiment": {"kind", "preset", "seed", "out"},
    "grid": {"dim", "length", "points"},
    "problem": {"preset", "depth", "amp", "width", "epsilon"},
    "set": {"mode", "gamma", "a", "density", "seed", "blob_radius", "radius"},
    "observe": {"thresholds", "method"},
    "pipeline": {"mu", "s0", "branch"},
    "carleman": {"h_values", "variant", "quad_points", "resolution", "tol"},
    "interp": {"kind"},
    "tolerances": None,
}

_MISSING = object()


class ConfigError(Exception):
    """Rejected configuration; ``str()`` reads ``path:line: message``."""

    def __init__(self, path: str, lineno: int, message: str):
        self.path = path
        self.lineno = lineno
        self.message = message
        super().__init__(f"{path}:{lineno}: {message}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated inputs for one experiment run."""

    experiment: str
    seed: int
    out_dir: str
    grid_dim: int
    grid_length: float
    grid_points: int
    problem: str
    problem_params: dict
    set_mode: str
    set_params: dict
    verify_radius: float
    thresholds: tuple
    method: str
    mu: float
    s0: float
    branch: str
    h_values: tuple
    variant: str
    quad_points: int
    resolution: int
    carleman_tol: float
    interp_kind: str
    tolerances: dict
    text: str = field(repr=False, default="")

    @property
    def sha256(self) -> str:
        """Hash of the raw config text; embedded in every artifact."""
        return hashlib.sha256(self.text.encode()).hexdigest()

    def tolerance(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))

    def with_overrides(self, seed=None, out_dir=None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        if out_dir is not None:
            cfg = replace(cfg, out_dir=str(out_dir))
        return cfg


def _line_map(text: str) -> dict:
    """First line number of every section header and key assignment."""
    out = {}
    section = None
    for i, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        if not stripped or stripped.startswith(("#", ";")):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip().lower()
            out.setdefault((section, None), i)
            continue
        if section is None:
            continue
        key = re.split(r"[=:]", stripped, maxsplit=1)[0].strip().lower()
        out.setdefault((section, key), i)
    return out


def _where(lines: dict, section: str, key=None) -> int:
    return lines.get((section, key)) or lines.get((section, None)) or 1


def _float_list(raw: str) -> tuple:
    vals = tuple(float(p) for p in raw.split(",") if p.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


class _Reader:
    """Pulls typed, checked values out of the parsed document."""

    def __init__(self, cp, lines, path):
        self.cp = cp
        self.lines = lines
        self.path = path

    def fail(self, section, key, message):
        raise ConfigError(self.path, _where(self.lines, section, key), message)

    def get(self, section, key, conv, default=_MISSING, check=None, expect=""):
        if not self.cp.has_option(section, key):
            if default is _MISSING:
                self.fail(section, None, f"missing required key '{key}' in [{section}]")
            return default
        raw = self.cp.get(section, key)
        try:
            val = conv(raw)
        except Exception:
            self.fail(section, key, f"invalid value {raw!r} for '{key}'; expected {expect}")
        if check is not None and not check(val):
            self.fail(section, key, f"invalid value {raw!r} for '{key}'; expected {expect}")
        return val


def parse_config_text(text: str, path: str = "<config>", experiment: str = None) -> ExperimentConfig:
    """Validate config text; ``experiment`` (a CLI subcommand) overrides [experiment] kind."""
    lines = _line_map(text)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None) or 1
        raise ConfigError(path, int(lineno), exc.message.splitlines()[0]) from None

    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(path, _where(lines, section.lower()), f"unknown section [{section}]")
        allowed = _SCHEMA[section]
        if allowed is None:
            continue
        for key in cp.options(section):
            if key not in allowed:
                raise ConfigError(
                    path, _where(lines, section, key), f"unknown key '{key}' in [{section}]"
                )

    rd = _Reader(cp, lines, path)

    preset = rd.get("experiment", "preset", str.strip, default=None) if cp.has_section("experiment") else None
    if preset is not None:
        if preset not in EXPERIMENT_PRESETS:
            known = ", ".join(sorted(EXPERIMENT_PRESETS))
            rd.fail("experiment", "preset", f"unknown experiment preset {preset!r}; known: {known}")
        for (sec, key), value in EXPERIMENT_PRESETS[preset].items():
            if not cp.has_section(sec):
                cp.add_section(sec)
            if not cp.has_option(sec, key):
                cp.set(sec, key, value)

    kind = experiment
    if kind is None:
        if cp.has_option("experiment", "kind"):
            kind = rd.get(
                "experiment", "kind", str.strip,
                check=lambda v: v in EXPERIMENTS, expect=f"one of {', '.join(EXPERIMENTS)}",
            )
        else:
            rd.fail("experiment", None, "no experiment named: set [experiment] kind or pass a subcommand")
    if kind not in EXPERIMENTS:
        raise ConfigError(path, 1, f"unknown experiment {kind!r}; expected one of {', '.join(EXPERIMENTS)}")

    seed = rd.get("experiment", "seed", int, default=0, check=lambda v: v >= 0, expect="integer >= 0")
    out_dir = rd.get("experiment", "out", str.strip, default="out")

    dim = rd.get("grid", "dim", int, default=1, check=lambda v: v in (1, 2), expect="1 or 2")
    length = rd.get("grid", "length", float, default=16.0, check=lambda v: v > 0, expect="positive number")
    points = rd.get(
        "grid", "points", int, default=1024,
        check=lambda v: v >= 8 and (v & (v - 1)) == 0, expect="power of two >= 8",
    )
    spacing = length / points

    problem = rd.get(
        "problem", "preset", str.strip, default="flat",
        check=lambda v: v in PROBLEM_PRESETS, expect=f"one of {', '.join(PROBLEM_PRESETS)}",
    )
    problem_params = {}
    if problem == "poschl-teller":
        if dim != 1:
            rd.fail("problem", "preset", "poschl-teller requires [grid] dim = 1")
        if cp.has_option("problem", "depth"):
            problem_params["depth"] = rd.get(
                "problem", "depth", float, check=lambda v: v > 0, expect="positive number"
            )
    elif problem == "gaussian-metric":
        if cp.has_option("problem", "amp"):
            problem_params["amp"] = rd.get(
                "problem", "amp", float, check=lambda v: v > -1.0, expect="number > -1"
            )
        if cp.has_option("problem", "width"):
            problem_params["width"] = rd.get(
                "problem", "width", float, check=lambda v: v > 0, expect="positive number"
            )
        if cp.has_option("problem", "epsilon"):
            problem_params["epsilon"] = rd.get(
                "problem", "epsilon", float, check=lambda v: 0 < v <= 1, expect="number in (0, 1]"
            )

    set_mode = rd.get(
        "set", "mode", str.strip, default="periodic",
        check=lambda v: v in SET_MODES, expect=f"one of {', '.join(SET_MODES)}",
    )
    set_params = {}
    if set_mode == "periodic":
        set_params["gamma"] = rd.get(
            "set", "gamma", float, default=0.5,
            check=lambda v: 0 < v <= 1, expect="number in (0, 1]",
        )
        set_params["a"] = rd.get(
            "set", "a", float, default=min(1.0, length / 4.0),
            check=lambda v: 0 < v <= length / 4.0, expect=f"number in (0, {length / 4.0}]",
        )
    elif set_mode == "random":
        set_params["density"] = rd.get(
            "set", "density", float, default=0.5,
            check=lambda v: 0 < v < 1, expect="number in (0, 1)",
        )
        set_params["seed"] = rd.get("set", "seed", int, default=seed, check=lambda v: v >= 0, expect="integer >= 0")
        set_params["blob_radius"] = rd.get(
            "set", "blob_radius", float, default=4.0 * spacing,
            check=lambda v: v > 0, expect="positive number",
        )
    verify_radius = rd.get(
        "set", "radius", float, default=length / 8.0,
        check=lambda v: 2.0 * spacing <= v <= length / 2.0,
        expect=f"number in [{2.0 * spacing}, {length / 2.0}]",
    )

    thresholds = rd.get(
        "observe", "thresholds", _float_list,
        default=tuple(float(t) for t in range(2, 26, 2)),
        check=lambda v: all(b > a for a, b in zip(v, v[1:])),
        expect="comma-separated strictly increasing numbers",
    )
    method = rd.get(
        "observe", "method", str.strip, default="svd",
        check=lambda v: v in OBSERVE_METHODS, expect=f"one of {', '.join(OBSERVE_METHODS)}",
    )

    mu = rd.get("pipeline", "mu", float, default=5.0, check=lambda v: v == v, expect="number")
    s0 = rd.get("pipeline", "s0", float, default=0.3, check=lambda v: v > 0, expect="positive number")
    branch = rd.get(
        "pipeline", "branch", str.strip, default="plus",
        check=lambda v: v in BRANCHES, expect=f"one of {', '.join(BRANCHES)}",
    )
    if problem == "flat":
        if mu <= 0 and kind in ("pipeline", "project"):
            rd.fail("pipeline", "mu", "flat problems need a positive frequency threshold mu")
        if kind == "observe" and thresholds[0] <= 0:
            rd.fail("observe", "thresholds", "flat problems need positive frequency thresholds")

    h_values = rd.get(
        "carleman", "h_values", _float_list, default=(0.1, 0.5, 1.0),
        check=lambda v: all(h > 0 for h in v), expect="comma-separated positive numbers",
    )
    variant = rd.get(
        "carleman", "variant", str.strip, default="dbar",
        check=lambda v: v in CARLEMAN_VARIANTS, expect=f"one of {', '.join(CARLEMAN_VARIANTS)}",
    )
    quad_points = rd.get(
        "carleman", "quad_points", int, default=128, check=lambda v: v >= 8, expect="integer >= 8"
    )
    resolution = rd.get(
        "carleman", "resolution", int, default=384, check=lambda v: v >= 32, expect="integer >= 32"
    )
    carleman_tol = rd.get(
        "carleman", "tol", float, default=1e-3, check=lambda v: v > 0, expect="positive number"
    )

    interp_kind = rd.get(
        "interp", "kind", str.strip, default="segment",
        check=lambda v: v in INTERP_KINDS, expect=f"one of {', '.join(INTERP_KINDS)}",
    )

    tolerances = {}
    if cp.has_section("tolerances"):
        for key in cp.options("tolerances"):
            tolerances[key] = rd.get(
                "tolerances", key, float, check=lambda v: v > 0, expect="positive number"
            )

    return ExperimentConfig(
        experiment=kind,
        seed=seed,
        out_dir=out_dir,
        grid_dim=dim,
        grid_length=length,
        grid_points=points,
        problem=problem,
        problem_params=problem_params,
        set_mode=set_mode,
        set_params=set_params,
        verify_radius=verify_radius,
        thresholds=tuple(float(t) for t in thresholds),
        method=method,
        mu=mu,
        s0=s0,
        branch=branch,
        h_values=tuple(float(h) for h in h_values),
        variant=variant,
        quad_points=quad_points,
        resolution=resolution,
        carleman_tol=carleman_tol,
        interp_kind=interp_kind,
        tolerances=tolerances,
        text=text,
    )


def parse_config(path, experiment: str = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(str(path), 1, f"cannot read config: {exc.strerror}") from None
    return parse_config_text(text, path=str(path), experiment=experiment)
