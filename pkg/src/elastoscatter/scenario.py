"""Scenario files (YAML) and their validation.

See ``scenarios/example.yaml`` in the repository for every key with comments.
"""
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .errors import ValidationError
from .geometry import Box, ClusterConfig
from .kernels import IncidentPlaneWave, Material
from .spectra import make_shape, read_mask_file

_SECTIONS = {"material", "shape", "regime", "omega_box", "incident", "observation", "sweep",
             "homogenize", "output"}


def _complex(v, name):
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ValidationError(f"{name}: complex values are [re, im]")
        return complex(float(v[0]), float(v[1]))
    try:
        return complex(v)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name}: not a number: {v!r}") from exc


def _vec(v, name, n=3):
    arr = np.asarray(v, dtype=float)
    if arr.shape != (n,):
        raise ValidationError(f"{name}: expected {n} numbers")
    return arr


def _section(data, key):
    sec = data.get(key) or {}
    if not isinstance(sec, dict):
        raise ValidationError(f"section {key!r} must be a mapping")
    return sec


def _check_keys(sec, allowed, where):
    extra = set(sec) - set(allowed)
    if extra:
        raise ValidationError(f"unknown keys in {where}: {sorted(extra)}")


@dataclass
class ShapeSpec:
    name: str = "ball"
    resolution: int = 12
    size: float = 1.0
    mask_file: str = None
    cell_size: float = None
    eigenpairs: int = 30
    group_tol: float = 1e-4

    def build(self, base=Path(".")):
        if self.mask_file:
            if not self.cell_size:
                raise ValidationError("shape.cell_size is required with shape.mask_file")
            return read_mask_file(base / self.mask_file, self.cell_size)
        return make_shape(self.name, self.resolution, self.size)


@dataclass
class Scenario:
    material: Material
    shape: ShapeSpec
    config: ClusterConfig
    a_values: list
    wave: IncidentPlaneWave
    points: np.ndarray
    n_directions: int
    sweep_mode: str = "norm"
    born_order: int = None
    homogenize: dict = field(default_factory=dict)
    output_dir: str = "out"
    source: Path = None

    def with_born(self, N):
        return replace(self, born_order=N)


_REGIME_KEYS = ("a", "a_values", "s", "t", "h", "c", "b", "sign", "n0", "count_prefactor",
                "max_aspect", "skip_boundary", "born_order")


def parse_scenario(data, source=None):
    if not isinstance(data, dict):
        raise ValidationError("scenario must be a mapping")
    _check_keys(data, _SECTIONS, "scenario")
    m = _section(data, "material")
    _check_keys(m, ("lambda", "mu", "rho0"), "material")
    try:
        mat = Material(float(m.get("lambda", 1.0)), float(m.get("mu", 1.0)), float(m.get("rho0", 1.0)))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"material: {exc}") from exc

    sh = _section(data, "shape")
    _check_keys(sh, ShapeSpec.__dataclass_fields__, "shape")
    shape = ShapeSpec(**sh)
    if shape.name not in ("ball", "cube", "mask"):
        raise ValidationError(f"shape.name must be ball, cube or mask, got {shape.name!r}")

    r = _section(data, "regime")
    _check_keys(r, _REGIME_KEYS, "regime")
    if "s" not in r or "h" not in r:
        raise ValidationError("regime needs at least s and h")
    a_values = [float(v) for v in r.get("a_values", [])]
    a = float(r.get("a", a_values[0] if a_values else 0.1))
    box_sec = _section(data, "omega_box")
    _check_keys(box_sec, ("center", "sides"), "omega_box")
    box = Box(tuple(box_sec.get("center", (0, 0, 0))), tuple(box_sec.get("sides", (1, 1, 1))))
    cfg = ClusterConfig(
        a=a, s=float(r["s"]), h=float(r["h"]),
        t=None if r.get("t") is None else float(r["t"]),
        c=float(r.get("c", 1.0)), b=float(r.get("b", 1.0)), sign=int(r.get("sign", 1)),
        n0=int(r.get("n0", 0)), omega_box=box,
        count_prefactor=float(r.get("count_prefactor", 1.0)),
        skip_boundary=bool(r.get("skip_boundary", True)),
        max_aspect=None if r.get("max_aspect") is None else float(r["max_aspect"]))

    inc = _section(data, "incident")
    _check_keys(inc, ("theta", "theta_perp", "b1", "b2"), "incident")
    wave = IncidentPlaneWave(_vec(inc.get("theta", (0, 0, 1)), "incident.theta"),
                             _vec(inc.get("theta_perp", (1, 0, 0)), "incident.theta_perp"),
                             _complex(inc.get("b1", 1.0), "incident.b1"),
                             _complex(inc.get("b2", 0.0), "incident.b2"))

    obs = _section(data, "observation")
    _check_keys(obs, ("points", "directions"), "observation")
    pts = np.asarray(obs.get("points", [[0.0, 0.0, 3.0]]), dtype=float).reshape(-1, 3)
    ndir = int(obs.get("directions", 26))

    sw = _section(data, "sweep")
    _check_keys(sw, ("mode",), "sweep")
    hom = _section(data, "homogenize")
    _check_keys(hom, ("grid", "directions", "beta1", "beta2", "zero_matrix", "solver"), "homogenize")
    out = _section(data, "output")
    _check_keys(out, ("dir",), "output")
    born = r.get("born_order")
    return Scenario(mat, shape, cfg, a_values, wave, pts, ndir,
                    sweep_mode=str(sw.get("mode", "norm")),
                    born_order=None if born is None else int(born),
                    homogenize=dict(hom), output_dir=str(out.get("dir", "out")), source=source)


def load_scenario(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read scenario {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"scenario {path} is not valid YAML: {exc}") from exc
    try:
        return parse_scenario(data, source=path)
    except TypeError as exc:
        raise ValidationError(f"scenario {path}: {exc}") from exc
