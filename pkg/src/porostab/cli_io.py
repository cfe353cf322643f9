"""Run configuration (strict JSON schema) and plain-text writers."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .contour import polylines_to_nan_separated
from .dispersion import Regime
from .errors import PorostabError, SchemaError
from .model import ModelParams
from .stabmap import SCAN_PARAMS, LevelSetField

MODES = ("homog", "map", "dispersion", "critical", "patterning", "simulate")
EXPRESSIONS = ("a0", "a1", "a2", "a3", "a4", "a5", "C2", "C3", "C4")
SCENARIOS = ("test1", "test2", "test3", "calcium")

_COMMON = {"mode", "params", "seed", "out"}
_KEYS = {
    "homog": set(),
    "map": {"param", "param_range", "n_param", "k_range", "n_k", "k_spacing", "expression", "regime", "rho_mode"},
    "dispersion": {"k_range", "n_k", "k_spacing", "regime", "rho_mode"},
    "critical": {"param", "param_range", "n_param", "k_range", "n_k", "expression", "regime", "rho_mode"},
    "patterning": {"beta2_range", "beta3_range", "n_grid"},
    "simulate": {"scenario", "dt", "t_final", "n_triangles", "output_stride", "perturbation", "mesh_file"},
}
_REQUIRED = {"map": ("param", "param_range"), "critical": ("param", "param_range"), "simulate": ("scenario",)}
_PARAM_FIELDS = {f.name: f for f in dataclasses.fields(ModelParams)}


class IoError(PorostabError, OSError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Validated run description. ``params`` holds only the overrides given
    in the document; :meth:`model_params` fills in the defaults."""

    mode: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    out: Optional[str] = None
    param: Optional[str] = None
    param_range: Optional[tuple] = None
    n_param: int = 200
    k_range: tuple = (0.1, 60.0)
    n_k: int = 200
    k_spacing: str = "log"
    expression: str = "a0"
    regime: str = "general"
    rho_mode: str = "quasi_static"
    beta2_range: tuple = (0.005, 1.0)
    beta3_range: tuple = (0.005, 1.0)
    n_grid: tuple = (200, 200)
    scenario: Optional[str] = None
    dt: Optional[float] = None
    t_final: Optional[float] = None
    n_triangles: Optional[int] = None
    output_stride: Optional[int] = None
    perturbation: Optional[float] = None
    mesh_file: Optional[str] = None

    def model_params(self) -> ModelParams:
        base = ModelParams()
        if self.mode == "simulate":
            from .fem2d.scenario import preset

            base = preset(self.scenario).params
        return base.with_(**self.params)

    def k_values(self) -> np.ndarray:
        lo, hi = self.k_range
        if self.k_spacing == "log":
            return np.logspace(math.log10(lo), math.log10(hi), self.n_k)
        return np.linspace(lo, hi, self.n_k)

    def build_scenario(self):
        """Scenario for ``simulate`` mode: the preset with the overrides applied."""
        from .fem2d.scenario import Domain, preset

        sc = preset(self.scenario)
        changes: dict[str, Any] = {"params": self.model_params(), "seed": self.seed}
        for name in ("dt", "t_final", "output_stride", "perturbation"):
            if getattr(self, name) is not None:
                changes[name] = getattr(self, name)
        if self.mesh_file is not None:
            changes["domain"] = Domain("file", mesh_file=self.mesh_file)
        elif self.n_triangles is not None:
            changes["domain"] = dataclasses.replace(sc.domain, n_triangles=self.n_triangles)
        return sc.with_(**changes)

    def to_dict(self) -> dict:
        """JSON-ready document that parses back to an equal config."""
        out: dict[str, Any] = {"mode": self.mode}
        if self.params:
            out["params"] = {k: list(v) if isinstance(v, tuple) else v for k, v in self.params.items()}
        out["seed"] = self.seed
        if self.out is not None:
            out["out"] = self.out
        for key in sorted(_KEYS[self.mode]):
            value = getattr(self, key)
            if value is None:
                continue
            out[key] = list(value) if isinstance(value, tuple) else value
        return out


def _fail(path, message):
    raise SchemaError(path, message)


def _number(path, v, positive=False, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(path, f"expected a number, got {v!r}")
    if integer and not (isinstance(v, int) or float(v).is_integer()):
        _fail(path, f"expected an integer, got {v!r}")
    if not math.isfinite(v):
        raise ValueError(f"{path}: non-finite value {v!r}")
    if positive and v <= 0:
        raise ValueError(f"{path}: must be positive, got {v!r}")
    return int(v) if integer else float(v)


def _pair(path, v, positive=False, integer=False, increasing=True):
    if not isinstance(v, list) or len(v) != 2:
        _fail(path, f"expected a two-element array, got {v!r}")
    a, b = (_number(f"{path}[{i}]", x, positive, integer) for i, x in enumerate(v))
    if increasing and not a < b:
        raise ValueError(f"{path}: lower bound must be below upper bound, got {v!r}")
    return (a, b)


def _choice(path, v, options):
    if v not in options:
        _fail(path, f"expected one of {list(options)}, got {v!r}")
    return v


def _params(doc) -> dict:
    if not isinstance(doc, dict):
        _fail("params", "expected an object")
    out = {}
    for key, value in doc.items():
        path = f"params.{key}"
        if key not in _PARAM_FIELDS:
            _fail(path, "unknown parameter")
        if key == "k_dir":
            if not isinstance(value, list) or len(value) != 2:
                _fail(path, "expected a two-element array")
            out[key] = tuple(_number(f"{path}[{i}]", c) for i, c in enumerate(value))
        elif key == "theta_variant":
            out[key] = _choice(path, value, ("linear", "quadratic"))
        elif key == "theta_convention":
            out[key] = _choice(path, value, ("constant", "state"))
        else:
            out[key] = _number(path, value)
    try:
        ModelParams(**out)
    except ValueError as exc:
        raise ValueError(f"params: {exc}") from exc
    return out


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run description.

    Raises :class:`SchemaError` (with the key path) for structural problems
    and ``ValueError`` for well-typed but invalid values.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        _fail("$", "expected a JSON object")
    if "mode" not in doc:
        _fail("mode", "missing required key")
    mode = _choice("mode", doc["mode"], MODES)
    allowed = _COMMON | _KEYS[mode]
    for key in doc:
        if key not in allowed:
            _fail(key, f"unknown key for mode {mode!r}")
    for key in _REQUIRED.get(mode, ()):
        if key not in doc:
            _fail(key, f"missing required key for mode {mode!r}")
    kw: dict[str, Any] = {"mode": mode}
    if "params" in doc:
        kw["params"] = _params(doc["params"])
    if "seed" in doc:
        seed = _number("seed", doc["seed"], integer=True)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed: must be an unsigned 64-bit integer, got {seed}")
        kw["seed"] = seed
    if "out" in doc:
        if not isinstance(doc["out"], str):
            _fail("out", "expected a string")
        kw["out"] = doc["out"]
    for key, value in doc.items():
        if key in _COMMON:
            continue
        if key == "param":
            kw[key] = _choice(key, value, SCAN_PARAMS)
        elif key in ("param_range", "beta2_range", "beta3_range"):
            kw[key] = _pair(key, value, positive=key != "param_range")
        elif key == "k_range":
            kw[key] = _pair(key, value, positive=True)
        elif key == "n_grid":
            kw[key] = _pair(key, value, positive=True, integer=True, increasing=False)
        elif key in ("n_param", "n_k", "n_triangles", "output_stride"):
            kw[key] = _number(key, value, positive=True, integer=True)
            if key in ("n_param", "n_k") and kw[key] < 2:
                raise ValueError(f"{key}: need at least 2 points, got {value}")
        elif key in ("dt", "t_final"):
            kw[key] = _number(key, value, positive=True)
        elif key == "perturbation":
            kw[key] = _number(key, value)
            if kw[key] < 0:
                raise ValueError(f"perturbation: must be non-negative, got {value}")
        elif key == "k_spacing":
            kw[key] = _choice(key, value, ("log", "linear"))
        elif key == "expression":
            kw[key] = _choice(key, value, EXPRESSIONS)
        elif key == "regime":
            kw[key] = _choice(key, value, tuple(r.value for r in Regime))
        elif key == "rho_mode":
            kw[key] = _choice(key, value, ("inertial", "quasi_static"))
        elif key == "scenario":
            kw[key] = _choice(key, value, SCENARIOS)
        elif key == "mesh_file":
            if not isinstance(value, str):
                _fail(key, "expected a string")
            kw[key] = value
    cfg = RunConfig(**kw)
    cfg.model_params()  # overrides must also be valid on top of the preset
    return cfg


def write_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)


# --------------------------------------------------------------------- CSV

def _fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    return format(x, ".17g")


def _open(path):
    try:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p.open("w", encoding="ascii", newline="\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_table(columns, rows, path) -> None:
    """Header row plus one line per row of ``rows`` (17 significant digits)."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size and rows.shape[1] != len(columns):
        raise ValueError(f"{len(columns)} columns but rows have {rows.shape[1]} entries")
    try:
        with _open(path) as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows if rows.size else ():
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_table(path) -> tuple[list[str], np.ndarray]:
    try:
        lines = Path(path).read_text(encoding="ascii").splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    columns = lines[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]]).reshape(-1, len(columns))
    return columns, data


def write_field_csv(fld: LevelSetField, path, param_name: str = "param") -> list[Path]:
    """Field as a ``k`` column followed by one column per parameter value;
    zero-level polylines go to ``<stem>_contours.csv``. Returns the paths."""
    path = Path(path)
    columns = ["k"] + [f"{param_name}={_fmt(p)}" for p in fld.param_values]
    write_table(columns, np.column_stack([fld.k_values, fld.values]), path)
    contour_path = path.with_name(path.stem + "_contours.csv")
    write_polylines(fld.contour_polylines, contour_path, (param_name, "k"))
    return [path, contour_path]


def read_field_csv(path) -> LevelSetField:
    columns, data = read_table(path)
    params = np.array([float(c.split("=", 1)[1]) for c in columns[1:]])
    return LevelSetField(values=data[:, 1:], label=Path(path).stem, param_values=params, k_values=data[:, 0])


def write_polylines(polylines, path, columns=("x", "y")) -> None:
    write_table(list(columns), polylines_to_nan_separated(polylines), path)


def write_curve(k_values, growth, path) -> None:
    write_table(["k", "max_re_phi"], np.column_stack([k_values, growth]), path)


def write_probes(columns, data, path) -> None:
    write_table(list(columns), data, path)


def write_csv(obj, path, **kwargs):
    """Dispatch on the payload: a :class:`LevelSetField`, a ``(k, growth)``
    curve pair or a ``(columns, rows)`` probe table."""
    if isinstance(obj, LevelSetField):
        return write_field_csv(obj, path, **kwargs)
    a, b = obj
    if isinstance(a, (list, tuple)) and a and isinstance(a[0], str):
        return write_probes(a, b, path)
    return write_curve(a, b, path)


# --------------------------------------------------------------------- VTK

def write_vtk(mesh, state, path, title: str = "porostab snapshot") -> None:
    """Legacy ASCII VTK unstructured grid with vertex values only."""
    n, m = mesh.n_vertices, mesh.n_triangles
    expected = {"u": 2 * n + 2 * m, "p": n, "psi": m, "w1": n, "w2": n}
    for name, size in expected.items():
        if len(getattr(state, name)) != size:
            raise ValueError(f"{name} has {len(getattr(state, name))} entries, mesh needs {size}")
    # vertex values only: [ux (n), uy (n), x bubbles (m), y bubbles (m)]
    ux, uy = state.u[:n], state.u[n:2 * n]
    lines = [
        "# vtk DataFile Version 3.0",
        f"{title} t={_fmt(state.time)}",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {n} double",
    ]
    lines += [f"{_fmt(x)} {_fmt(y)} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {m} {4 * m}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {m}")
    lines += ["5"] * m
    lines.append(f"POINT_DATA {n}")
    lines.append("VECTORS displacement double")
    lines += [f"{_fmt(a)} {_fmt(b)} 0" for a, b in zip(ux, uy)]
    for name, values in (("pressure", state.p), ("w1", state.w1), ("w2", state.w2)):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [_fmt(v) for v in values]
    lines.append(f"CELL_DATA {m}")
    lines += ["SCALARS total_pressure double 1", "LOOKUP_TABLE default"]
    lines += [_fmt(v) for v in state.psi]
    try:
        with _open(path) as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
