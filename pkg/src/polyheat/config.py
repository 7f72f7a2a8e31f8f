"""Problem files: JSON documents describing one Cauchy problem.

Every key is optional; missing keys take the values in
:data:`polyheat.defaults.DEFAULTS`.  Example::

    {
      "p": 4, "alpha": [0, 1], "t": 1.0,
      "u0_atoms": [{"y": 0, "re": 1, "im": 0}],
      "V_atoms": [{"z": 1, "re": 0.4, "im": 0}],
      "grid": {"N": 256, "L": 6.283185307179586},
      "dyson": {"n_max": 6, "time_mesh": 64},
      "tol": 1e-6
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from .defaults import DEFAULTS
from .dyson import DysonConfig, PlaneWaveState
from .kernel import EvolutionParams, validate_params

__all__ = ["ConfigError", "ProblemSpec", "load_problem", "parse_problem"]

_KEYS = {"p", "alpha", "t", "u0_atoms", "V_atoms", "grid", "dyson", "tol"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    params: EvolutionParams
    t: float
    u0: PlaneWaveState
    V: PlaneWaveState
    N: int
    L: float
    dyson: DysonConfig
    tol: float


def _number(value: Any, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{what} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{what} must be finite")
    return value


def _integer(value: Any, what: str) -> int:
    v = _number(value, what)
    if v != int(v):
        raise ConfigError(f"{what} must be an integer, got {value!r}")
    return int(v)


def _atoms(raw: Any, freq_key: str, what: str) -> PlaneWaveState:
    if not isinstance(raw, list):
        raise ConfigError(f"{what} must be a list")
    atoms = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or set(item) - {freq_key, "re", "im"} or freq_key not in item:
            raise ConfigError(f"{what}[{i}] must be an object with keys {freq_key}, re, im")
        y = _number(item[freq_key], f"{what}[{i}].{freq_key}")
        re = _number(item.get("re", 0.0), f"{what}[{i}].re")
        im = _number(item.get("im", 0.0), f"{what}[{i}].im")
        atoms.append((y, complex(re, im)))
    return PlaneWaveState.from_atoms(atoms)


def _default_atoms(rows, key):
    return [{key: y, "re": re, "im": im} for y, re, im in rows]


def parse_problem(doc: Any) -> ProblemSpec:
    """Validate a decoded JSON document and fill in defaults."""
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("problem file must contain a JSON object")
    unknown = set(doc) - _KEYS
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")
    p = _integer(doc.get("p", DEFAULTS["p"]), "p")
    alpha = doc.get("alpha", list(DEFAULTS["alpha"]))
    if not (isinstance(alpha, list) and len(alpha) == 2):
        raise ConfigError("alpha must be a list [re, im]")
    alpha = complex(_number(alpha[0], "alpha[0]"), _number(alpha[1], "alpha[1]"))
    params = validate_params(p, alpha)
    t = _number(doc.get("t", DEFAULTS["t"]), "t")
    if not t > 0:
        raise ConfigError("t must be positive")
    u0 = _atoms(doc.get("u0_atoms", _default_atoms(DEFAULTS["u0_atoms"], "y")), "y", "u0_atoms")
    V = _atoms(doc.get("V_atoms", _default_atoms(DEFAULTS["V_atoms"], "z")), "z", "V_atoms")
    grid = doc.get("grid", {})
    if not isinstance(grid, dict) or set(grid) - {"N", "L"}:
        raise ConfigError("grid must be an object with keys N, L")
    N = _integer(grid.get("N", DEFAULTS["grid_N"]), "grid.N")
    L = _number(grid.get("L", DEFAULTS["grid_L"]), "grid.L")
    if N < 8 or N & (N - 1):
        raise ConfigError("grid.N must be a power of two >= 8")
    if not L > 0:
        raise ConfigError("grid.L must be positive")
    dy = doc.get("dyson", {})
    if not isinstance(dy, dict) or set(dy) - {"n_max", "time_mesh"}:
        raise ConfigError("dyson must be an object with keys n_max, time_mesh")
    try:
        cfg = DysonConfig(n_max=_integer(dy.get("n_max", DEFAULTS["n_max"]), "dyson.n_max"),
                          time_mesh=_integer(dy.get("time_mesh", DEFAULTS["time_mesh"]),
                                             "dyson.time_mesh"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    tol = _number(doc.get("tol", DEFAULTS["tol"]), "tol")
    if not tol > 0:
        raise ConfigError("tol must be positive")
    return ProblemSpec(params, t, u0, V, N, L, cfg, tol)


def load_problem(path: Optional[str | Path]) -> ProblemSpec:
    """Read a problem file; ``None`` gives the default problem."""
    if path is None:
        return parse_problem({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return parse_problem(doc)
