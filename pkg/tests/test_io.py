import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from xdiff import io
from xdiff.errors import ConfigError, StorageError
from xdiff.fom import run_fom
from xdiff.rom import build_rom

TINY = """\
[grid]
extents = 0.5, 0.5
counts = 6, 5

[time]
dt = 0.001
t_final = 0.02   # twenty steps

[diffusion]
d_u = 1
d_v = 1
d_vu = 1

[reaction]
kind = schnakenberg
alpha = 0.25
beta = 0.3
gamma = 200

[study]
parameter = d_uv
seed = 5
"""


def write(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_bundled_schnakenberg():
    cfg = io.load_config("schnakenberg2d")
    assert cfg.grid.counts == (101, 101) and cfg.grid.extents == (0.5, 0.5)
    assert (cfg.dt, cfg.t_final, cfg.n_steps) == (0.001, 5.0, 5000)
    assert (cfg.d_u, cfg.d_v, cfg.d_vu) == (1, 1, 1) and math.isnan(cfg.d_uv)
    assert (cfg.reaction.gamma, cfg.reaction.alpha, cfg.reaction.beta) == (200, 0.25, 0.3)
    assert cfg.study_parameter == "d_uv"


def test_bundled_brusselator():
    cfg = io.load_config("brusselator3d")
    assert cfg.grid.counts == (31, 31, 31) and cfg.grid.extents == (20, 20, 20)
    assert (cfg.dt, cfg.t_final, cfg.n_steps) == (0.01, 10.0, 1000)
    assert (cfg.d_u, cfg.d_v, cfg.d_uv) == (0.4, 2.0, 0.02)
    assert (cfg.reaction.alpha, cfg.reaction.beta) == (6.0, 1.0)
    assert cfg.study_parameter == "d_vu"


def test_parse_tiny(tmp_path):
    cfg = io.parse_config(write(tmp_path, TINY))
    assert cfg.n_steps == 20 and cfg.seed == 5


@pytest.mark.parametrize("old, new, match", [
    ("t_final = 0.02", "t_final = 0.0205", "whole number"),
    ("d_u = 1", "d_u = 0", "d_u"),
    ("d_u = 1", "du = 1", "unknown key"),
    ("d_u = 1\n", "", "missing key 'd_u'"),
    ("alpha = 0.25", "alpha = quarter", "alpha: expected float"),
    ("counts = 6, 5", "counts = 6, 5.5", "counts: expected int"),
    ("[study]", "[studies]", "unknown section"),
    ("kind = schnakenberg", "kind = grayscott", "kind"),
])
def test_bad_configs(tmp_path, old, new, match):
    with pytest.raises(ConfigError, match=match):
        io.parse_config(write(tmp_path, TINY.replace(old, new, 1)))


def test_unknown_config_name():
    with pytest.raises(ConfigError):
        io.load_config("no-such-config")


def test_tensor_round_trip_example(tmp_path):
    t = np.random.default_rng(0).standard_normal((3, 4, 5))
    io.save_tensor(tmp_path / "t.cdt", t, {"theta": 0.5})
    back, meta = io.load_tensor(tmp_path / "t.cdt")
    assert back.tobytes(order="F") == t.tobytes(order="F") and back.shape == t.shape
    assert meta == {"theta": 0.5}
    raw = (tmp_path / "t.cdt").read_bytes()
    assert raw[:4] == b"CDT1" and raw[4] == 3
    assert struct.unpack("<3Q", raw[5:29]) == (3, 4, 5)
    assert len(raw) == 29 + 4 + len(b'{"theta":0.5}') + 8 * 60


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, array_shapes(min_dims=1, max_dims=4, max_side=5),
              elements=st.floats(allow_nan=True, allow_infinity=True)))
def test_tensor_round_trip_bit_exact(tmp_path_factory, t):
    path = tmp_path_factory.mktemp("rt") / "t.cdt"
    io.save_tensor(path, t)
    back, _ = io.load_tensor(path)
    assert back.shape == t.shape
    assert np.asfortranarray(back).tobytes(order="F") == np.asfortranarray(t).tobytes(order="F")


def test_bad_magic_does_not_allocate(tmp_path, monkeypatch):
    path = tmp_path / "t.cdt"
    io.save_tensor(path, np.ones((2, 2)))
    data = bytearray(path.read_bytes())
    data[0] = ord("X")
    path.write_bytes(bytes(data))
    monkeypatch.setattr(np, "fromfile", lambda *a, **k: pytest.fail("payload allocated"))
    with pytest.raises(StorageError, match="bad magic"):
        io.load_tensor(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "t.cdt"
    io.save_tensor(path, np.ones((4, 4)))
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(StorageError, match="offset"):
        io.load_tensor(path)
    path.write_bytes(b"CDT1\x02\x04")
    with pytest.raises(StorageError, match="truncated"):
        io.load_tensor(path)


def test_memory_cap(tmp_path, monkeypatch):
    path = tmp_path / "huge.cdt"
    with open(path, "wb") as fh:
        fh.write(b"CDT1" + struct.pack("<B3Q", 3, 2**20, 2**20, 2**20))
    with pytest.raises(StorageError, match="memory cap"):
        io.load_tensor(path)
    small = tmp_path / "small.cdt"
    io.save_tensor(small, np.ones(100))
    monkeypatch.setenv("XDIFF_MEM_CAP_BYTES", "400")
    with pytest.raises(StorageError, match="memory cap"):
        io.load_tensor(small)
    monkeypatch.setenv("XDIFF_MEM_CAP_BYTES", "lots")
    with pytest.raises(ConfigError):
        io.load_tensor(small)


def test_trailing_bytes(tmp_path):
    path = tmp_path / "t.cdt"
    io.save_tensor(path, np.ones(3))
    with open(path, "ab") as fh:
        fh.write(b"\0")
    with pytest.raises(StorageError, match="trailing"):
        io.load_tensor(path)


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("tiny")
    cfg = io.parse_config(write(root, TINY))
    snaps = io.ensure_snapshots(cfg, [0.4, 0.6, 0.8], root / "snaps")
    return cfg, snaps, root


def test_snapshot_files(tiny_run):
    cfg, snaps, _ = tiny_run
    pair = snaps[1]
    ref = run_fom(cfg, 0.6)
    assert pair.u.tobytes() == ref.u.tobytes() and pair.v.tobytes() == ref.v.tobytes()
    assert pair.theta == 0.6 and pair.config_digest == cfg.digest()
    np.testing.assert_allclose(pair.times, ref.times, rtol=1e-15)
    assert pair.u.shape == (6, 5, 21)


def test_snapshots_are_reused(tiny_run, monkeypatch):
    cfg, snaps, _ = tiny_run
    monkeypatch.setattr(io, "run_fom", lambda *a, **k: pytest.fail("FOM rerun"))
    io.ensure_snapshots(cfg, [0.4, 0.6, 0.8], snaps.directory)


def test_rom_round_trip(tiny_run, tmp_path):
    cfg, snaps, _ = tiny_run
    model = build_rom(snaps, 1e-2, 1e-8)
    io.save_rom(tmp_path / "m.cdr", model)
    back = io.load_rom(tmp_path / "m.cdr", config=cfg)
    assert back.thetas.tobytes() == model.thetas.tobytes()
    assert (back.rho, back.tau1, back.tau2, back.kernel, back.criterion) == \
        (model.rho, model.tau1, model.tau2, model.kernel, model.criterion)
    for name in ("u", "v"):
        a, b = model.species[name], back.species[name]
        assert all(x.tobytes() == y.tobytes() and x.shape == y.shape
                   for x, y in zip(a.factors, b.factors))
        assert a.gamma.tobytes() == b.gamma.tobytes()
    io.save_rom(tmp_path / "again.cdr", back)
    assert (tmp_path / "m.cdr").read_bytes() == (tmp_path / "again.cdr").read_bytes()


def test_rom_digest_and_corruption(tiny_run, tmp_path):
    import dataclasses
    cfg, snaps, _ = tiny_run
    path = tmp_path / "m.cdr"
    io.save_rom(path, build_rom(snaps, 1e-2, 1e-8))
    with pytest.raises(ConfigError):
        io.load_rom(path, config=dataclasses.replace(cfg, seed=9))
    raw = path.read_bytes()
    path.write_bytes(raw[:4] + struct.pack("<I", 99) + raw[8:])
    with pytest.raises(StorageError, match="version"):
        io.load_rom(path)
    path.write_bytes(raw[:-10])
    with pytest.raises(StorageError):
        io.load_rom(path)
