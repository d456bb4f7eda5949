"""Binary snapshot / checkpoint formats, CSV output, and run manifests.

Snapshot record (little-endian):
    magic "PFLB" | version u32 | nx u32 | ny u32 | lx f64 | ly f64 | t f64 |
    nx*ny f64 node values, row-major with the second index fastest.

History checkpoint:
    count u32 | dt_hist f64 | t_star f64 | `count` snapshot records.
Checkpoints written by `simulate` append one extra record carrying the final
velocity; readers that only need the displacement history read exactly
`count` records.
"""
from __future__ import annotations

import hashlib
import json
import struct
import time

import numpy as np

from .aero import HistoryBuffer
from .grid import GridSpec

MAGIC = b"PFLB"
VERSION = 1


class FormatError(ValueError):
    pass


def write_snapshot(fh, t: float, field: np.ndarray, g: GridSpec) -> None:
    nx, ny = field.shape
    fh.write(MAGIC)
    fh.write(struct.pack("<IIIddd", VERSION, nx, ny, g.lx, g.ly, t))
    fh.write(np.ascontiguousarray(field, dtype="<f8").tobytes())


def read_snapshot(fh):
    head = fh.read(4)
    if len(head) == 0:
        return None
    if head != MAGIC:
        raise FormatError("bad snapshot magic")
    version, nx, ny, lx, ly, t = struct.unpack("<IIIddd", fh.read(36))
    if version != VERSION:
        raise FormatError(f"unsupported snapshot version {version}")
    data = np.frombuffer(fh.read(8 * nx * ny), dtype="<f8").reshape(nx, ny)
    return t, data.copy(), GridSpec(lx, ly, nx, ny)


def save_snapshot(path, t, field, g):
    with open(path, "wb") as fh:
        write_snapshot(fh, t, field, g)


def load_snapshot(path):
    with open(path, "rb") as fh:
        out = read_snapshot(fh)
    if out is None:
        raise FormatError(f"empty snapshot file {path}")
    return out


def save_checkpoint(path, history: HistoryBuffer, ut: np.ndarray | None = None):
    """History (+ optional trailing velocity record) to a checkpoint file."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Idd", len(history.snaps),
                             history.dt_hist, history.t_star))
        for snap in history.snaps:
            write_snapshot(fh, snap.t, snap.u, history.grid)
        if ut is not None:
            write_snapshot(fh, history.newest_t, ut, history.grid)


def load_checkpoint(path, with_velocity: bool = False):
    """Returns (HistoryBuffer,) or (HistoryBuffer, ut)."""
    with open(path, "rb") as fh:
        count, dt_hist, t_star = struct.unpack("<Idd", fh.read(20))
        records = []
        g = None
        for _ in range(count):
            rec = read_snapshot(fh)
            if rec is None:
                raise FormatError("checkpoint truncated")
            t, u, g = rec
            records.append((t, u))
        ut = None
        if with_velocity:
            rec = read_snapshot(fh)
            if rec is None:
                raise FormatError("checkpoint has no velocity record")
            _, ut, _ = rec
    buf = HistoryBuffer(dt_hist, t_star, g)
    for t, u in records:
        buf.push(t, u)
    return (buf, ut) if with_velocity else (buf,)


def fmt17(x: float) -> str:
    return format(float(x), ".17g")


class CsvWriter:
    def __init__(self, path, columns):
        self.fh = open(path, "w")
        self.fh.write(",".join(columns) + "\n")

    def row(self, values):
        self.fh.write(",".join(fmt17(v) for v in values) + "\n")

    def close(self):
        self.fh.close()


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def write_manifest(path, cfg: dict, seed, outputs, extra=None):
    from . import __version__
    manifest = {
        "code_version": __version__,
        "config_hash": config_hash(cfg),
        "seed": seed,
        "created_unix": time.time(),
        "outputs": list(outputs),
    }
    if extra:
        manifest.update(extra)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest
