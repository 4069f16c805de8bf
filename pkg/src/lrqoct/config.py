"""Problem configuration files.

A config is a JSON object with blocks ``system``, ``control``, ``grid``,
``target`` and optionally ``optimize`` and ``seed``.  Complex numbers are
always written as ``[re, im]`` pairs; matrices are either nested rows of pairs
or a flat row-major list of N*N pairs.  Unknown keys are rejected and every
error message starts with the dotted path of the offending field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, QOCTError
from .linalg import Operator, QuantumState, hermiticity_defect, is_hermitian
from .model import ControlKind, ControlledSystem, ControlParameterization, Target, TargetKind
from .optimizer import OptimizationConfig, random_initial_control
from .propagation import TimeGrid

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)

SYSTEM_PRESETS = {
    "rabi": (np.zeros((2, 2)), SIGMA_X),
    "tls-sigmaz-sigmax": (SIGMA_Z, SIGMA_X),
    # anharmonic three-level ladder with dipole-like nearest-neighbour coupling
    "ladder3": (
        np.diag([0.0, 1.0, 1.9]),
        np.array([[0, 1, 0], [1, 0, np.sqrt(2)], [0, np.sqrt(2), 0]]),
    ),
}

_TOP_KEYS = {"system", "control", "grid", "target", "optimize", "seed"}
_SYSTEM_KEYS = {"preset", "dim", "h_static", "coupling", "initial_state"}
_STATE_KEYS = {"vector", "matrix", "basis"}
_CONTROL_KEYS = {"kind", "params", "n_params", "t0", "tf"}
_GRID_KEYS = {"n_steps"}
_TARGET_KEYS = {"kind", "observable", "g", "penalty_alpha"}
_OPTIMIZE_KEYS = {
    "route", "max_iterations", "tol_gradient", "tol_merit", "initial_step",
    "backtrack_factor", "armijo_c", "lbfgs_memory", "fd_step",
}


@dataclass(frozen=True, eq=False)
class Problem:
    system: ControlledSystem
    control: ControlParameterization
    grid: TimeGrid
    target: Target
    optimize: OptimizationConfig
    seed: int


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _obj(raw, path, allowed, required=()):
    if not isinstance(raw, dict):
        _fail(path or "config", f"expected an object, got {type(raw).__name__}")
    for key in raw:
        if key not in allowed:
            _fail(f"{path}.{key}" if path else key, "unknown field")
    for key in required:
        if key not in raw:
            _fail(f"{path}.{key}" if path else key, "missing required field")
    return raw


def _number(raw, path, integer=False):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        _fail(path, f"expected a number, got {raw!r}")
    if integer and int(raw) != raw:
        _fail(path, f"expected an integer, got {raw!r}")
    if not np.isfinite(raw):
        _fail(path, "must be finite")
    return int(raw) if integer else float(raw)


def _complex(raw, path) -> complex:
    if not isinstance(raw, list) or len(raw) != 2:
        _fail(path, f"expected a [re, im] pair, got {raw!r}")
    return complex(_number(raw[0], f"{path}[0]"), _number(raw[1], f"{path}[1]"))


def _vector(raw, path, dim) -> np.ndarray:
    if not isinstance(raw, list) or len(raw) != dim:
        _fail(path, f"expected a list of {dim} [re, im] pairs")
    return np.array([_complex(x, f"{path}[{i}]") for i, x in enumerate(raw)])


def _matrix(raw, path, dim) -> np.ndarray:
    if not isinstance(raw, list):
        _fail(path, "expected a matrix of [re, im] pairs")
    if len(raw) == dim * dim and all(_is_pair(x) for x in raw):
        flat = [_complex(x, f"{path}[{i}]") for i, x in enumerate(raw)]
        return np.array(flat).reshape(dim, dim)
    if len(raw) != dim:
        _fail(path, f"expected {dim} rows or {dim * dim} row-major pairs, got {len(raw)} entries")
    return np.array([_vector(row, f"{path}[{i}]", dim) for i, row in enumerate(raw)])


def _is_pair(x) -> bool:
    return isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x)


def _hermitian(raw, path, dim) -> Operator:
    m = _matrix(raw, path, dim)
    if not is_hermitian(m):
        _fail(path, f"matrix is not Hermitian (max |M - M^+| = {hermiticity_defect(m):.3e})")
    return Operator(m, hermitian=True)


def _parse_state(raw, path, dim) -> QuantumState:
    _obj(raw, path, _STATE_KEYS)
    if len(raw) != 1:
        _fail(path, "give exactly one of 'vector', 'matrix', 'basis'")
    try:
        if "vector" in raw:
            return QuantumState.pure(_vector(raw["vector"], f"{path}.vector", dim))
        if "matrix" in raw:
            return QuantumState.density(_matrix(raw["matrix"], f"{path}.matrix", dim))
        k = _number(raw["basis"], f"{path}.basis", integer=True)
        if not 0 <= k < dim:
            _fail(f"{path}.basis", f"index {k} out of range for dimension {dim}")
        return QuantumState.basis(dim, k)
    except ConfigError:
        raise
    except QOCTError as exc:
        _fail(path, str(exc))


def _parse_system(raw, t0, tf) -> ControlledSystem:
    _obj(raw, "system", _SYSTEM_KEYS)
    if "preset" in raw:
        for key in ("dim", "h_static", "coupling"):
            if key in raw:
                _fail(f"system.{key}", "cannot be combined with a preset")
        name = raw["preset"]
        if name not in SYSTEM_PRESETS:
            _fail("system.preset", f"unknown preset {name!r}; choose from {sorted(SYSTEM_PRESETS)}")
        h, v = SYSTEM_PRESETS[name]
        dim = h.shape[0]
        h, v = Operator(h, hermitian=True), Operator(v, hermitian=True)
    else:
        _obj(raw, "system", _SYSTEM_KEYS, ("dim", "h_static", "coupling"))
        dim = _number(raw["dim"], "system.dim", integer=True)
        if dim < 1:
            _fail("system.dim", "must be >= 1")
        h = _hermitian(raw["h_static"], "system.h_static", dim)
        v = _hermitian(raw["coupling"], "system.coupling", dim)
    if "initial_state" in raw:
        psi0 = _parse_state(raw["initial_state"], "system.initial_state", dim)
    else:
        psi0 = QuantumState.basis(dim, 0)
    return ControlledSystem(h, v, psi0, t0, tf)


def _parse_observable(raw, path, dim) -> Operator:
    if isinstance(raw, str):
        if not raw.startswith("population:"):
            _fail(path, f"unknown observable preset {raw!r}; use 'population:k' or a matrix")
        try:
            k = int(raw.split(":", 1)[1])
        except ValueError:
            _fail(path, f"bad population index in {raw!r}")
        if not 0 <= k < dim:
            _fail(path, f"population index {k} out of range for dimension {dim}")
        m = np.zeros((dim, dim))
        m[k, k] = 1.0
        return Operator(m, hermitian=True)
    return _hermitian(raw, path, dim)


def parse_config(raw: dict) -> Problem:
    """Build a :class:`Problem` from parsed JSON, or raise ConfigError."""
    _obj(raw, "", _TOP_KEYS, ("system", "control", "grid", "target"))
    seed = _number(raw.get("seed", 0), "seed", integer=True)

    ctl = _obj(raw["control"], "control", _CONTROL_KEYS, ("kind", "tf"))
    try:
        kind = ControlKind(ctl["kind"])
    except ValueError:
        _fail("control.kind", f"unknown kind {ctl['kind']!r}; choose from {[k.value for k in ControlKind]}")
    t0 = _number(ctl.get("t0", 0.0), "control.t0")
    tf = _number(ctl["tf"], "control.tf")
    if not tf > t0:
        _fail("control.tf", f"must exceed t0={t0}")

    grid_raw = _obj(raw["grid"], "grid", _GRID_KEYS, ("n_steps",))
    n_steps = _number(grid_raw["n_steps"], "grid.n_steps", integer=True)
    if n_steps < 1:
        _fail("grid.n_steps", "must be >= 1")
    grid = TimeGrid(t0, tf, n_steps)

    system = _parse_system(raw["system"], t0, tf)

    if "params" in ctl and "n_params" in ctl:
        _fail("control", "give either 'params' or 'n_params', not both")
    if "params" in ctl:
        if not isinstance(ctl["params"], list) or not ctl["params"]:
            _fail("control.params", "expected a non-empty list of numbers")
        params = [_number(x, f"control.params[{i}]") for i, x in enumerate(ctl["params"])]
        control = ControlParameterization(kind, params, t0, tf)
    else:
        default_m = grid.n_nodes if kind is ControlKind.RAW_GRID else None
        if "n_params" not in ctl and default_m is None:
            _fail("control", "missing 'params' or 'n_params'")
        m = _number(ctl.get("n_params", default_m), "control.n_params", integer=True)
        if m < (2 if kind is ControlKind.RAW_GRID else 1):
            _fail("control.n_params", "too few parameters")
        control = random_initial_control(kind, m, t0, tf, seed)
    if kind is ControlKind.RAW_GRID and control.n_params != grid.n_nodes:
        _fail("control", f"raw_grid control needs one sample per grid node ({grid.n_nodes})")

    tgt = _obj(raw["target"], "target", _TARGET_KEYS, ("kind", "observable"))
    try:
        tkind = TargetKind(tgt["kind"])
    except ValueError:
        _fail("target.kind", f"unknown kind {tgt['kind']!r}; choose from {[k.value for k in TargetKind]}")
    observable = _parse_observable(tgt["observable"], "target.observable", system.dim)
    weights = None
    if "g" in tgt:
        if tkind is TargetKind.FINAL_TIME:
            _fail("target.g", "final_time targets take no weights")
        if not isinstance(tgt["g"], list) or len(tgt["g"]) != grid.n_nodes:
            _fail("target.g", f"expected {grid.n_nodes} samples (one per grid node)")
        weights = [_number(x, f"target.g[{i}]") for i, x in enumerate(tgt["g"])]
    elif tkind is TargetKind.TIME_DEPENDENT:
        _fail("target.g", "time_dependent targets need weight samples")
    alpha = 0.0
    if "penalty_alpha" in tgt:
        if tkind is not TargetKind.COMPOSITE:
            _fail("target.penalty_alpha", "only composite targets take a penalty")
        alpha = _number(tgt["penalty_alpha"], "target.penalty_alpha")
        if alpha < 0:
            _fail("target.penalty_alpha", "must be >= 0")
    target = Target(tkind, observable, weights, alpha)

    opt_raw = _obj(raw.get("optimize", {}), "optimize", _OPTIMIZE_KEYS)
    kwargs = {}
    for key, value in opt_raw.items():
        if key == "route":
            kwargs[key] = value
        else:
            integer = key in ("max_iterations", "lbfgs_memory")
            kwargs[key] = _number(value, f"optimize.{key}", integer=integer)
    try:
        optimize = OptimizationConfig(seed=seed, **kwargs)
    except ValueError as exc:
        _fail("optimize", str(exc))
    return Problem(system, control, grid, target, optimize, seed)


def load_config(path) -> Problem:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_config(raw)
