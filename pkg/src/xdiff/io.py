"""Configuration files and binary tensor / ROM containers.

Tensor files (``CDT1``), all little-endian::

    magic    4 bytes  b"CDT1"
    order    u8
    dims     order x u64
    meta_len u32, followed by meta_len bytes of UTF-8 JSON
    payload  prod(dims) x f64, first index fastest

ROM files (``CDR1``)::

    magic    4 bytes  b"CDR1"
    version  u32
    species  u8
    meta_len u32 + JSON header (rho, tolerances, digest, species names, ...)
    thetas   array record
    per species, in header order: mode count u8, one array record per
                 global factor, then the gamma array record

An array record is ``order u8, dims u64 x order, payload f64``.
"""

from __future__ import annotations

import configparser
import dataclasses
import json
import math
import os
import struct
from collections.abc import Sequence
from importlib import resources
from pathlib import Path

import numpy as np

from .discretize import Grid
from .errors import ConfigError, StorageError
from .fom import DIFFUSION_PARAMETERS, SimulationConfig, SnapshotPair, run_fom
from .models import Kinetics, ReactionModel
from .rom import RomModel, SpeciesModel

TENSOR_MAGIC = b"CDT1"
ROM_MAGIC = b"CDR1"
ROM_VERSION = 1
DEFAULT_MEM_CAP = 8 * 1024**3
MAX_META_BYTES = 1 << 24


def mem_cap() -> int:
    """Largest payload a loader may allocate (``XDIFF_MEM_CAP_BYTES``)."""
    raw = os.environ.get("XDIFF_MEM_CAP_BYTES")
    if raw is None:
        return DEFAULT_MEM_CAP
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"XDIFF_MEM_CAP_BYTES must be an integer, got {raw!r}") from None


# -- configuration -----------------------------------------------------------

_SCHEMA = {
    "grid": {"extents": True, "counts": True},
    "time": {"dt": True, "t_final": True},
    "diffusion": {name: True for name in DIFFUSION_PARAMETERS},
    "reaction": {"kind": True, "alpha": True, "beta": True, "gamma": False},
    "study": {"parameter": True, "seed": False},
}


def _number(section, key, raw, kind=float):
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected {kind.__name__}, got {raw!r}") from None


def _numbers(section, key, raw, kind=float):
    return tuple(_number(section, key, part.strip(), kind) for part in raw.split(","))


def parse_config(path) -> SimulationConfig:
    """Read and validate an INI-style ``key = value`` configuration file.

    Unknown sections or keys are errors. The key of the study parameter may
    be omitted; its value is supplied per run.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
    study = parser["study"]["parameter"].strip() if parser.has_option("study", "parameter") else None
    for section, keys in _SCHEMA.items():
        for key, required in keys.items():
            if required and key != study and not parser.has_option(section, key):
                raise ConfigError(f"{path}: missing key {key!r} in [{section}]")

    def get(section, key, default=math.nan):
        if parser.has_option(section, key):
            return _number(section, key, parser[section][key])
        return default

    try:
        kind = Kinetics(parser["reaction"]["kind"].strip().lower())
    except ValueError:
        raise ConfigError(
            f"[reaction] kind: expected one of {[k.value for k in Kinetics]}"
        ) from None
    try:
        grid = Grid(
            extents=_numbers("grid", "extents", parser["grid"]["extents"]),
            counts=_numbers("grid", "counts", parser["grid"]["counts"], int),
        )
        reaction = ReactionModel(
            kind=kind,
            alpha=get("reaction", "alpha"),
            beta=get("reaction", "beta"),
            gamma=get("reaction", "gamma", 1.0),
        )
        seed = int(_number("study", "seed", parser["study"].get("seed", "0"), int))
        return SimulationConfig(
            grid=grid,
            reaction=reaction,
            d_u=get("diffusion", "d_u"),
            d_v=get("diffusion", "d_v"),
            d_uv=get("diffusion", "d_uv"),
            d_vu=get("diffusion", "d_vu"),
            dt=get("time", "dt"),
            t_final=get("time", "t_final"),
            study_parameter=study,
            seed=seed,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def bundled_configs() -> list[str]:
    root = resources.files("xdiff") / "configs"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def load_config(name_or_path) -> SimulationConfig:
    """Parse a config file, or a bundled config given by name."""
    path = Path(name_or_path)
    if path.exists():
        return parse_config(path)
    name = str(name_or_path)
    if name in bundled_configs():
        with resources.as_file(resources.files("xdiff") / "configs" / f"{name}.ini") as p:
            return parse_config(p)
    raise ConfigError(f"no config file or bundled config named {name!r}")


# -- binary records ------------------------------------------------------------

def _read_exact(fh, n: int, what: str) -> bytes:
    offset = fh.tell()
    data = fh.read(n)
    if len(data) != n:
        raise StorageError(f"truncated file: expected {n} bytes of {what} at offset {offset}")
    return data


def _write_dims(fh, dims):
    fh.write(struct.pack("<B", len(dims)))
    fh.write(struct.pack(f"<{len(dims)}Q", *dims))


def _read_dims(fh) -> tuple[int, ...]:
    (order,) = struct.unpack("<B", _read_exact(fh, 1, "order"))
    if order < 1:
        raise StorageError(f"invalid tensor order 0 at offset {fh.tell() - 1}")
    dims = struct.unpack(f"<{order}Q", _read_exact(fh, 8 * order, "dims"))
    if any(n < 1 for n in dims):
        raise StorageError(f"invalid dims {dims} before offset {fh.tell()}")
    return dims


def _check_payload(fh, dims, cap: int) -> int:
    count = math.prod(dims)
    nbytes = 8 * count
    if nbytes > cap:
        raise StorageError(
            f"payload of {nbytes} bytes at offset {fh.tell()} exceeds memory cap {cap}"
        )
    return count


def _read_payload(fh, dims, cap: int) -> np.ndarray:
    count = _check_payload(fh, dims, cap)
    offset = fh.tell()
    remaining = os.fstat(fh.fileno()).st_size - offset
    if remaining < 8 * count:
        raise StorageError(f"truncated payload at offset {offset}: need {8 * count} bytes, have {remaining}")
    data = np.fromfile(fh, dtype="<f8", count=count)
    if data.size != count:
        raise StorageError(f"truncated payload at offset {offset}")
    return data.astype(np.float64, copy=False).reshape(dims, order="F")


def _write_payload(fh, t: np.ndarray):
    # ravel(order="F") is a view for Fortran-contiguous input
    np.asarray(t, dtype="<f8").ravel(order="F").tofile(fh)


def _write_array(fh, a: np.ndarray):
    a = np.asarray(a, dtype=np.float64)
    dims = a.shape if a.ndim else (1,)
    _write_dims(fh, dims)
    _write_payload(fh, a.reshape(dims))


def _read_array(fh, cap: int) -> np.ndarray:
    return _read_payload(fh, _read_dims(fh), cap)


def _write_meta(fh, meta: dict):
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    fh.write(struct.pack("<I", len(blob)))
    fh.write(blob)


def _read_meta(fh) -> dict:
    (n,) = struct.unpack("<I", _read_exact(fh, 4, "metadata length"))
    if n > MAX_META_BYTES:
        raise StorageError(f"metadata length {n} at offset {fh.tell() - 4} is implausible")
    raw = _read_exact(fh, n, "metadata")
    try:
        return json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise StorageError(f"corrupt metadata before offset {fh.tell()}: {exc}") from exc


def _check_magic(fh, magic: bytes):
    got = fh.read(4)
    if got != magic:
        raise StorageError(f"bad magic {got!r} at offset 0, expected {magic!r}")


# -- tensors -----------------------------------------------------------------

def save_tensor(path, t: np.ndarray, metadata: dict | None = None):
    t = np.asarray(t, dtype=np.float64)
    if t.ndim < 1:
        raise ValueError("tensor must have order >= 1")
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        _write_dims(fh, t.shape)
        _write_meta(fh, metadata or {})
        _write_payload(fh, t)


def load_tensor(path, cap: int | None = None) -> tuple[np.ndarray, dict]:
    """Load a tensor file; returns ``(tensor, metadata)``."""
    cap = mem_cap() if cap is None else cap
    with open(path, "rb") as fh:
        _check_magic(fh, TENSOR_MAGIC)
        dims = _read_dims(fh)
        _check_payload(fh, dims, cap)
        meta = _read_meta(fh)
        t = _read_payload(fh, dims, cap)
        if fh.read(1):
            raise StorageError(f"trailing bytes after payload at offset {fh.tell() - 1}")
    return t, meta


def _species_meta(pair: SnapshotPair, species: str) -> dict:
    times = np.asarray(pair.times)
    spacing = float(times[1] - times[0]) if times.size > 1 else 0.0
    return {
        "theta": pair.theta,
        "config_digest": pair.config_digest,
        "species": species,
        "time_spacing": spacing,
        "n_times": int(times.size),
        "t0": float(times[0]),
    }


def save_snapshot_pair(pair: SnapshotPair, path_u, path_v):
    save_tensor(path_u, pair.u, _species_meta(pair, "u"))
    save_tensor(path_v, pair.v, _species_meta(pair, "v"))


def load_snapshot_pair(path_u, path_v, cap: int | None = None) -> SnapshotPair:
    u, mu = load_tensor(path_u, cap)
    v, mv = load_tensor(path_v, cap)
    for key in ("theta", "config_digest", "time_spacing", "n_times"):
        if mu.get(key) != mv.get(key):
            raise StorageError(f"{path_u} and {path_v} disagree on {key}")
    times = mu.get("t0", 0.0) + mu["time_spacing"] * np.arange(mu["n_times"])
    return SnapshotPair(u=u, v=v, times=times, theta=mu["theta"],
                        config_digest=mu["config_digest"])


def snapshot_paths(directory, theta: float) -> tuple[Path, Path]:
    directory = Path(directory)
    tag = repr(float(theta))
    return directory / f"snap_{tag}_u.cdt", directory / f"snap_{tag}_v.cdt"


class SnapshotDirectory(Sequence):
    """Snapshot pairs on disk, loaded one at a time on indexing."""

    def __init__(self, directory, thetas):
        self.directory = Path(directory)
        self.thetas = [float(t) for t in thetas]

    def __len__(self):
        return len(self.thetas)

    def __getitem__(self, i):
        return load_snapshot_pair(*snapshot_paths(self.directory, self.thetas[i]))


# -- ROM models --------------------------------------------------------------

def save_rom(path, model: RomModel):
    meta = {
        "rho": model.rho,
        "tau1": model.tau1,
        "tau2": model.tau2,
        "config_digest": model.config_digest,
        "kernel": model.kernel,
        "criterion": model.criterion,
        "species": list(model.species),
    }
    with open(path, "wb") as fh:
        fh.write(ROM_MAGIC)
        fh.write(struct.pack("<I", ROM_VERSION))
        fh.write(struct.pack("<B", len(model.species)))
        _write_meta(fh, meta)
        _write_array(fh, model.thetas)
        for sp in model.species.values():
            fh.write(struct.pack("<B", len(sp.factors)))
            for f in sp.factors:
                _write_array(fh, f)
            _write_array(fh, sp.gamma)


def load_rom(path, config: SimulationConfig | None = None, cap: int | None = None) -> RomModel:
    """Load a ROM file, optionally checking it against ``config``."""
    cap = mem_cap() if cap is None else cap
    with open(path, "rb") as fh:
        _check_magic(fh, ROM_MAGIC)
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != ROM_VERSION:
            raise StorageError(f"unsupported ROM version {version} at offset 4")
        (n_species,) = struct.unpack("<B", _read_exact(fh, 1, "species count"))
        meta = _read_meta(fh)
        names = meta.get("species", [])
        if len(names) != n_species:
            raise StorageError("species count does not match header")
        thetas = _read_array(fh, cap).ravel()
        species = {}
        for name in names:
            (n_modes,) = struct.unpack("<B", _read_exact(fh, 1, "mode count"))
            factors = tuple(_read_array(fh, cap) for _ in range(n_modes))
            gamma = _read_array(fh, cap)
            species[name] = SpeciesModel(factors=factors, gamma=gamma)
        if fh.read(1):
            raise StorageError(f"trailing bytes at offset {fh.tell() - 1}")
    try:
        model = RomModel(
            species=species,
            thetas=thetas,
            rho=meta["rho"],
            tau1=meta["tau1"],
            tau2=meta["tau2"],
            config_digest=meta["config_digest"],
            kernel=meta["kernel"],
            criterion=meta["criterion"],
        )
    except (KeyError, ValueError) as exc:
        raise StorageError(f"invalid ROM file {path}: {exc}") from exc
    if config is not None and config.digest() != model.config_digest:
        raise ConfigError(f"{path} was built from a different configuration")
    return model


def ensure_snapshots(cfg: SimulationConfig, thetas, directory, seed: int | None = None,
                     log=None) -> SnapshotDirectory:
    """Run the FOM for every theta whose snapshot files are missing or stale.

    Existing files are reused when their metadata matches the config digest.
    """
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=int(seed))
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    digest = cfg.digest()
    for theta in thetas:
        pu, pv = snapshot_paths(directory, theta)
        if pu.exists() and pv.exists():
            try:
                pair_meta = [_peek_meta(p) for p in (pu, pv)]
            except StorageError:
                pair_meta = None
            if pair_meta and all(m.get("config_digest") == digest for m in pair_meta):
                if log:
                    log(f"reusing snapshots for theta={theta!r}")
                continue
        if log:
            log(f"running FOM for theta={theta!r}")
        pair = run_fom(cfg, theta)
        save_snapshot_pair(pair, pu, pv)
        del pair
    return SnapshotDirectory(directory, thetas)


def _peek_meta(path) -> dict:
    with open(path, "rb") as fh:
        _check_magic(fh, TENSOR_MAGIC)
        _read_dims(fh)
        return _read_meta(fh)
