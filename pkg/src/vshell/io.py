"""Binary records for ensembles and models, CSV output.

Record layout (little endian):

    magic      8 bytes   b"VSHLENS\\0" (ensemble) or b"VSHLMDL\\0" (model)
    version    u32
    count      u64       particles or grid points
    seed       i64
    mass       f64
    meta_len   u32
    meta       JSON, utf-8
    arrays     f64[count] each, in a fixed order per record kind
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from . import __version__
from .core import ShellParams, grid_from_radii
from .ensemble import ParticleEnsemble
from .errors import RecordFormatError
from .radial_poisson import RadialField, field_from_density, make_density
from .steady_state import ShellModel

__all__ = [
    "ENSEMBLE_MAGIC",
    "MODEL_MAGIC",
    "write_ensemble",
    "read_ensemble",
    "write_model",
    "read_model",
    "read_record",
    "write_csv",
    "read_csv",
    "config_hash",
]

ENSEMBLE_MAGIC = b"VSHLENS\0"
MODEL_MAGIC = b"VSHLMDL\0"
VERSION = 1
_HEADER = struct.Struct("<8sIQqdI")
_ENSEMBLE_ARRAYS = ("r", "w", "L", "weight", "f_value")
_MODEL_ARRAYS = ("radii", "rho0", "gen_m", "gen_U")


def _write(path, magic, count, seed, mass, meta, arrays):
    blob = json.dumps(meta, sort_keys=True).encode()
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(magic, VERSION, count, seed, mass, len(blob)))
            fh.write(blob)
            for a in arrays:
                fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    except OSError as exc:
        raise RecordFormatError(f"cannot write {path}: {exc}", reason="io") from exc


def _read(path, expected_magic=None):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise RecordFormatError(f"cannot read {path}: {exc}", reason="io") from exc
    if len(data) < _HEADER.size:
        raise RecordFormatError(f"{path}: truncated header", reason="truncated")
    magic, version, count, seed, mass, meta_len = _HEADER.unpack_from(data)
    if magic not in (ENSEMBLE_MAGIC, MODEL_MAGIC) or (expected_magic and magic != expected_magic):
        raise RecordFormatError(f"{path}: bad magic {magic!r}", reason="bad-magic")
    if version != VERSION:
        raise RecordFormatError(f"{path}: unsupported version {version}", reason="bad-version")
    offset = _HEADER.size
    try:
        meta = json.loads(data[offset:offset + meta_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise RecordFormatError(f"{path}: corrupt metadata", reason="bad-meta") from exc
    offset += meta_len
    names = _ENSEMBLE_ARRAYS if magic == ENSEMBLE_MAGIC else _MODEL_ARRAYS
    need = offset + 8 * count * len(names)
    if len(data) != need:
        raise RecordFormatError(f"{path}: expected {need} bytes, found {len(data)}", reason="truncated")
    arrays = {}
    for name in names:
        arrays[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).astype(np.float64)
        offset += 8 * count
    return magic, seed, mass, meta, arrays


def write_ensemble(path, ensemble: ParticleEnsemble):
    meta = {"params": ensemble.params.to_dict() if ensemble.params is not None else None}
    _write(path, ENSEMBLE_MAGIC, ensemble.count, ensemble.seed, ensemble.total_mass, meta,
           [getattr(ensemble, n) for n in _ENSEMBLE_ARRAYS])


def _ensemble_from(seed, mass, meta, arrays):
    params = ShellParams(**meta["params"]) if meta.get("params") else None
    return ParticleEnsemble(*(arrays[n] for n in _ENSEMBLE_ARRAYS), total_mass=mass, seed=seed, params=params)


def read_ensemble(path) -> ParticleEnsemble:
    _, seed, mass, meta, arrays = _read(path, ENSEMBLE_MAGIC)
    return _ensemble_from(seed, mass, meta, arrays)


def write_model(path, model: ShellModel):
    gen = model.generating_field or model.field0
    meta = {"params": model.params.to_dict(), "R1": model.R1, "R2": model.R2,
            "iterations": model.iterations}
    _write(path, MODEL_MAGIC, model.grid.size, 0, model.mass, meta,
           [model.grid.radii, model.rho0.rho, gen.m, gen.U])


def _model_from(mass, meta, arrays):
    params = ShellParams(**meta["params"])
    grid = grid_from_radii(arrays["radii"])
    rho0 = make_density(grid, arrays["rho0"])
    gen_m, gen_U = arrays["gen_m"], arrays["gen_U"]
    gen_m.setflags(write=False)
    gen_U.setflags(write=False)
    gen = RadialField(grid, gen_m, gen_U, params.Mc)
    return ShellModel(params, grid, rho0, field_from_density(rho0, params.Mc), float(meta["R1"]),
                      float(meta["R2"]), mass, gen, int(meta.get("iterations", 0)))


def read_model(path) -> ShellModel:
    _, _, mass, meta, arrays = _read(path, MODEL_MAGIC)
    return _model_from(mass, meta, arrays)


def read_record(path):
    """Model or ensemble, whichever the file holds."""
    magic, seed, mass, meta, arrays = _read(path)
    if magic == MODEL_MAGIC:
        return _model_from(mass, meta, arrays)
    return _ensemble_from(seed, mass, meta, arrays)


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, columns, rows, config_digest: str = "", seed=None):
    """CSV with a ``# vshell ...`` metadata line and a header row."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write(f"# vshell version={__version__}, config_hash={config_digest}, seed={seed}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
    except OSError as exc:
        raise RecordFormatError(f"cannot write {path}: {exc}", reason="io") from exc


def read_csv(path):
    """(metadata line, columns, rows as lists of strings)."""
    with open(path, newline="") as fh:
        meta = fh.readline().rstrip("\n")
        reader = csv.reader(fh)
        columns = next(reader)
        return meta, columns, list(reader)


def ensure_dir(path) -> Path:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise RecordFormatError(f"cannot create {path}: {exc}", reason="io") from exc
    return Path(path)
