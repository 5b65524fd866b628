"""INI-style experiment configuration.

Sections are ``[model]``, ``[experiment]``, ``[bounds]`` (optional overrides
of the constants derived from the model) and ``[output]``. Every value is
validated before anything runs and unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

from .kernel import Drift, InitialLaw, NBARModel, Noise


class ConfigError(ValueError):
    pass


def _float(s: str) -> float:
    return float(s)


def _int(s: str) -> int:
    return int(s, 0)


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.replace(",", " ").split())


MODEL_KEYS = {
    "f0": str, "f0_a": _float, "f0_b": _float,
    "f1": str, "f1_a": _float, "f1_b": _float,
    "noise": str, "noise_scale": _float, "noise_trunc": _float,
    "initial": str, "initial_loc": _float, "initial_scale": _float, "initial_points": _floats,
}
EXPERIMENT_KEYS = {
    "depth": _int, "replicates": _int, "seed": _int,
    "index": str, "functional": str, "t_grid": _floats, "laplace_points": _int,
    "alpha": _float, "kernel": str, "grid_min": _float, "grid_max": _float, "grid_points": _int,
    "target": str,
    "chains": _int, "chain_steps": _int, "burn_in": _int,
    "contraction_steps": _int, "x": _float, "x_tilde": _float, "draws": _int,
}
BOUNDS_KEYS = {"C": _float, "p": _float, "q": _float, "r0": _float, "r1": _float,
               "lip": _float, "n": _int}
OUTPUT_KEYS = {"dir": str, "format": str}
SECTIONS = {"model": MODEL_KEYS, "experiment": EXPERIMENT_KEYS, "bounds": BOUNDS_KEYS,
            "output": OUTPUT_KEYS}


@dataclass
class Experiment:
    depth: int = 10
    replicates: int = 1000
    seed: int = 0
    index: str = "tree"
    functional: str = "identity"
    t_grid: tuple[float, ...] | None = None
    laplace_points: int = 21
    alpha: float = 0.2
    kernel: str = "epanechnikov"
    grid_min: float = -1.0
    grid_max: float = 3.0
    grid_points: int = 41
    target: str = "f0"
    chains: int = 2000
    chain_steps: int = 400
    burn_in: int = 200
    contraction_steps: int = 5
    x: float = 0.0
    x_tilde: float = 4.0
    draws: int = 100_000


@dataclass
class Config:
    model: NBARModel
    experiment: Experiment = field(default_factory=Experiment)
    bounds: dict = field(default_factory=dict)
    out_dir: str | None = None
    fmt: str | None = None


def _parse_section(cp: configparser.ConfigParser, name: str) -> dict:
    if not cp.has_section(name):
        return {}
    keys = SECTIONS[name]
    vals = {}
    for key, raw in cp.items(name):
        if key not in keys:
            raise ConfigError(f"[{name}] unknown key {key!r}; allowed: {', '.join(sorted(keys))}")
        try:
            vals[key] = keys[key](raw.strip())
        except ValueError as exc:
            raise ConfigError(f"[{name}] {key} = {raw!r}: {exc}") from exc
    return vals


def _build_model(m: dict) -> NBARModel:
    def drift(prefix):
        fam = m.get(prefix, "linear")
        if fam not in ("linear", "tanh"):
            raise ConfigError(f"[model] {prefix} must be 'linear' or 'tanh', got {fam!r}")
        a, b = m.get(prefix + "_a", 0.0), m.get(prefix + "_b", 0.0)
        return Drift.linear(a, b) if fam == "linear" else Drift.tanh(a, b)

    try:
        noise = Noise(m.get("noise", "gaussian"), m.get("noise_scale", 1.0), m.get("noise_trunc", 2.0))
    except ValueError as exc:
        raise ConfigError(f"[model] noise: {exc}") from exc
    fam = m.get("initial", "dirac")
    try:
        if fam == "empirical":
            initial = InitialLaw.empirical(m.get("initial_points", ()))
        else:
            initial = InitialLaw(fam, m.get("initial_loc", 0.0), m.get("initial_scale", 0.0))
    except ValueError as exc:
        raise ConfigError(f"[model] initial: {exc}") from exc
    return NBARModel(drift("f0"), drift("f1"), noise, initial)


def _check_experiment(e: Experiment):
    def need(cond, key, what):
        if not cond:
            raise ConfigError(f"[experiment] {key} {what}")

    need(0 <= e.depth <= 40, "depth", "must lie in [0, 40]")
    need(e.replicates >= 2, "replicates", "must be >= 2")
    need(0 <= e.seed < 2**64, "seed", "must be an unsigned 64-bit integer")
    need(e.index in ("tree", "generation"), "index", "must be 'tree' or 'generation'")
    need(e.functional in ("identity", "innovation"), "functional", "must be 'identity' or 'innovation'")
    need(e.laplace_points >= 3, "laplace_points", "must be >= 3")
    need(0 < e.alpha < 1, "alpha", "must lie in (0, 1)")
    need(e.kernel in ("epanechnikov", "triangular", "quartic"), "kernel", "is not a known kernel")
    need(math.isfinite(e.grid_min) and math.isfinite(e.grid_max) and e.grid_min < e.grid_max,
         "grid_min", "must be finite and below grid_max")
    need(e.grid_points >= 1, "grid_points", "must be >= 1")
    need(e.target in ("f0", "f1", "transition"), "target", "must be f0, f1 or transition")
    need(e.chains >= 2, "chains", "must be >= 2")
    need(0 <= e.burn_in < e.chain_steps, "burn_in", "must satisfy 0 <= burn_in < chain_steps")
    need(e.contraction_steps >= 0, "contraction_steps", "must be >= 0")
    need(e.x != e.x_tilde, "x_tilde", "must differ from x")
    need(e.draws >= 1000, "draws", "must be >= 1000")
    if e.t_grid is not None:
        need(len(e.t_grid) > 0 and all(t > 0 for t in e.t_grid)
             and all(b > a for a, b in zip(e.t_grid, e.t_grid[1:])),
             "t_grid", "must be positive and strictly increasing")


def _check_bounds(b: dict):
    for k, v in b.items():
        if k == "n":
            if not 0 <= v <= 40:
                raise ConfigError("[bounds] n must lie in [0, 40]")
        elif not (math.isfinite(v) and v >= 0):
            raise ConfigError(f"[bounds] {k} must be finite and >= 0")
    if "p" in b and not 1 <= b["p"] <= 2:
        raise ConfigError("[bounds] p must lie in [1, 2]")
    if "lip" in b and b["lip"] <= 0:
        raise ConfigError("[bounds] lip must be positive")


def parse_config(text: str) -> Config:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]; allowed: {', '.join(SECTIONS)}")
    model = _build_model(_parse_section(cp, "model"))
    e = Experiment(**_parse_section(cp, "experiment"))
    _check_experiment(e)
    b = _parse_section(cp, "bounds")
    _check_bounds(b)
    o = _parse_section(cp, "output")
    fmt = o.get("format")
    if fmt not in (None, "json", "csv", "table"):
        raise ConfigError("[output] format must be json, csv or table")
    return Config(model, e, b, o.get("dir"), fmt)


def load_config(path) -> Config:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
