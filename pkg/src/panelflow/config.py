"""JSON run configuration: parsing, validation with key-path errors, defaults.

Schema (all sections optional unless noted):

    grid        {lx, ly, nx, ny}                       (required)
    phys        {U, alpha, k}                          defaults 0.0, 0.1, 0.1
    loads       {p0: <load>, F0: <load>}               default zero
    data        {u0: <load>, u1: <load>}               default zero
    time        {dt, horizon}                          (required for simulate)
    quad        {n_theta, n_s}                         defaults 16, 64
    prehistory  "zero" | "constant" | {"checkpoint": path}
    output      {dir, cadence, snapshot_every}
    seed        integer                                default 0
    probe       free-form section consumed by the probe driver
    sweep       {param: "beta", lo, hi, steps}

Load / data specifications:
    "zero" | {"constant": c} | {"radial_beta": b}
    | {"gaussian": {cx, cy, sigma, amp}}
    | {"random_smooth": {"amp": a, "modes": m}}        (uses the run seed)
    | {"snapshot": path}
Unknown keys anywhere are rejected.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import fileio
from . import vonkarman as vk
from .aero import QuadratureSpec
from .grid import GridSpec


class ConfigError(ValueError):
    pass


def _require_keys(d: dict, allowed, required, path: str):
    for key in d:
        if key not in allowed:
            raise ConfigError(f"unknown key '{path}.{key}'")
    for key in required:
        if key not in d:
            raise ConfigError(f"missing key '{path}.{key}'")


def _num(d, key, path, default=None, lo=None, hi=None,
         lo_open=False, hi_open=False, integer=False):
    if key not in d:
        if default is None:
            raise ConfigError(f"missing key '{path}.{key}'")
        return default
    val = d[key]
    if integer:
        if not isinstance(val, int) or isinstance(val, bool):
            raise ConfigError(f"'{path}.{key}' must be an integer")
    elif not isinstance(val, (int, float)) or isinstance(val, bool):
        raise ConfigError(f"'{path}.{key}' must be a number")
    val = int(val) if integer else float(val)
    if lo is not None and (val < lo or (lo_open and val == lo)):
        raise ConfigError(f"'{path}.{key}' out of range")
    if hi is not None and (val > hi or (hi_open and val == hi)):
        raise ConfigError(f"'{path}.{key}' out of range")
    return val


def resolve_field(spec, g: GridSpec, rng, path: str) -> np.ndarray:
    """Turn a load/data specification into a grid field."""
    if spec == "zero" or spec is None:
        return g.zeros()
    if isinstance(spec, dict):
        if len(spec) != 1:
            raise ConfigError(f"'{path}' must name exactly one profile")
        kind, val = next(iter(spec.items()))
        if kind == "constant":
            return float(val) * np.ones((g.nx, g.ny))
        if kind == "radial_beta":
            return vk.radial_prestress(float(val), g)
        if kind == "gaussian":
            _require_keys(val, {"cx", "cy", "sigma", "amp"},
                          {"cx", "cy", "sigma", "amp"}, f"{path}.gaussian")
            x, y = g.mesh()
            r2 = (x - val["cx"]) ** 2 + (y - val["cy"]) ** 2
            bump = val["amp"] * np.exp(-r2 / (2.0 * val["sigma"] ** 2))
            # clamp compatibly: taper with the squared boundary bubble
            taper = (x * (g.lx - x) * y * (g.ly - y)) ** 2
            taper /= taper.max()
            return bump * taper
        if kind == "random_smooth":
            _require_keys(val, {"amp", "modes"}, {"amp"}, f"{path}.random_smooth")
            return random_smooth_field(g, rng, val["amp"], val.get("modes", 3))
        if kind == "snapshot":
            _, arr, gs = fileio.load_snapshot(val)
            if (gs.nx, gs.ny) != (g.nx, g.ny):
                raise ConfigError(f"snapshot grid mismatch for '{path}'")
            return arr
        raise ConfigError(f"unknown profile '{path}.{kind}'")
    raise ConfigError(f"bad specification for '{path}'")


def random_smooth_field(g: GridSpec, rng, amp: float, modes: int = 3) -> np.ndarray:
    """Random clamped-compatible field: combination of squared-sine bubbles."""
    x, y = g.mesh()
    out = g.zeros()
    for i in range(1, modes + 1):
        for j in range(1, modes + 1):
            c = rng.standard_normal() / (i * j)
            out += c * np.sin(i * np.pi * x / g.lx) ** 2 \
                     * np.sin(j * np.pi * y / g.ly) ** 2
    scale = np.max(np.abs(out))
    out = amp * out / scale if scale > 0 else out
    from .grid import clamp_ring
    return clamp_ring(out)


@dataclass
class RunConfig:
    raw: dict
    grid: GridSpec
    U: float
    alpha: float
    k: float
    loads: vk.LoadSet
    u0: np.ndarray
    u1: np.ndarray
    dt: float | None
    horizon: float | None
    quad: QuadratureSpec
    prehistory: str | dict
    output_dir: str | None
    cadence: int
    snapshot_every: int
    seed: int
    probe: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)


TOP_KEYS = {"grid", "phys", "loads", "data", "time", "quad", "prehistory",
            "output", "seed", "probe", "sweep"}


def parse_config(cfg: dict, need_time: bool = False) -> RunConfig:
    if not isinstance(cfg, dict):
        raise ConfigError("configuration must be a JSON object")
    _require_keys(cfg, TOP_KEYS, {"grid"}, "$")

    gsec = cfg["grid"]
    _require_keys(gsec, {"lx", "ly", "nx", "ny"}, {"lx", "ly", "nx", "ny"}, "grid")
    g = GridSpec(_num(gsec, "lx", "grid", lo=0.0, lo_open=True),
                 _num(gsec, "ly", "grid", lo=0.0, lo_open=True),
                 _num(gsec, "nx", "grid", integer=True, lo=5),
                 _num(gsec, "ny", "grid", integer=True, lo=5))

    psec = cfg.get("phys", {})
    _require_keys(psec, {"U", "alpha", "k"}, set(), "phys")
    U = _num(psec, "U", "phys", default=0.0, lo=0.0, hi=1.0, hi_open=True)
    alpha = _num(psec, "alpha", "phys", default=0.1, lo=0.0, lo_open=True)
    k = _num(psec, "k", "phys", default=0.1, lo=0.0)

    seed = _num(cfg, "seed", "$", default=0, integer=True)
    rng = np.random.default_rng(seed)

    lsec = cfg.get("loads", {})
    _require_keys(lsec, {"p0", "F0"}, set(), "loads")
    loads = vk.LoadSet(resolve_field(lsec.get("p0"), g, rng, "loads.p0"),
                       resolve_field(lsec.get("F0"), g, rng, "loads.F0"))

    dsec = cfg.get("data", {})
    _require_keys(dsec, {"u0", "u1"}, set(), "data")
    u0 = resolve_field(dsec.get("u0"), g, rng, "data.u0")
    u1 = resolve_field(dsec.get("u1"), g, rng, "data.u1")

    tsec = cfg.get("time", {})
    _require_keys(tsec, {"dt", "horizon"},
                  {"dt", "horizon"} if need_time else set(), "time")
    dt = _num(tsec, "dt", "time", lo=0.0, lo_open=True) if "dt" in tsec else None
    horizon = _num(tsec, "horizon", "time", lo=0.0, lo_open=True) \
        if "horizon" in tsec else None

    qsec = cfg.get("quad", {})
    _require_keys(qsec, {"n_theta", "n_s"}, set(), "quad")
    quad = QuadratureSpec(_num(qsec, "n_theta", "quad", default=16, integer=True),
                          _num(qsec, "n_s", "quad", default=64, integer=True))

    pre = cfg.get("prehistory", "constant")
    if isinstance(pre, dict):
        _require_keys(pre, {"checkpoint"}, {"checkpoint"}, "prehistory")
    elif pre not in ("zero", "constant"):
        raise ConfigError("prehistory must be 'zero', 'constant', or {'checkpoint': path}")

    osec = cfg.get("output", {})
    _require_keys(osec, {"dir", "cadence", "snapshot_every"}, set(), "output")
    return RunConfig(
        raw=cfg, grid=g, U=U, alpha=alpha, k=k, loads=loads, u0=u0, u1=u1,
        dt=dt, horizon=horizon, quad=quad, prehistory=pre,
        output_dir=osec.get("dir"),
        cadence=_num(osec, "cadence", "output", default=10, integer=True, lo=1),
        snapshot_every=_num(osec, "snapshot_every", "output", default=0,
                            integer=True, lo=0),
        seed=seed, probe=cfg.get("probe", {}), sweep=cfg.get("sweep", {}))


def load_config(path: str, need_time: bool = False) -> RunConfig:
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_config(cfg, need_time=need_time)
