import struct

import numpy as np
import pytest

from singdrift.fields import build_field, zero_field
from singdrift.mollify import build_approximation
from singdrift.pde import SpaceTimeGrid, gaussian, solve_forward_cauchy
from singdrift.rawblock import MAGIC, RawBlock, decode, encode, read_block, write_block
from singdrift.sde import SimConfig, simulate_euler


def test_roundtrip_preserves_everything(tmp_path):
    data = np.arange(24, dtype=float).reshape(2, 3, 4) / 7.0
    blk = RawBlock("test", data, (-1.0, -2.0, -3.0), (0.5, 0.25, 0.125), {"m": 4, "note": "x"})
    out = read_block(write_block(tmp_path / "b.bin", blk))
    assert out.kind == "test"
    assert np.array_equal(out.data, data)
    assert out.origin == blk.origin and out.spacing == blk.spacing
    assert out.metadata == blk.metadata


def test_layout_is_little_endian_row_major():
    data = np.array([[1.0, 2.0], [3.0, 4.0]])
    raw = encode(RawBlock("k", data))
    assert raw.startswith(MAGIC)
    tail = raw[-32:]
    assert struct.unpack("<4d", tail) == (1.0, 2.0, 3.0, 4.0)


def test_encoding_is_deterministic():
    blk = RawBlock("k", np.ones(3), metadata={"b": 1, "a": 2})
    assert encode(blk) == encode(RawBlock("k", np.ones(3), metadata={"a": 2, "b": 1}))


def test_bad_magic_rejected():
    with pytest.raises(ValueError):
        decode(b"NOTABLOCK" + bytes(16))


def test_geometry_lengths_must_match():
    with pytest.raises(ValueError):
        encode(RawBlock("k", np.ones(2), (0.0,), ()))


def test_lattice_field_export():
    b = build_field("hardy", {"d": 3, "delta": 0.04})
    ap = build_approximation(b, b.certificate, 4)
    blk = decode(encode(ap.lattice.to_block({"m": 4})))
    # component axis first, then one axis per coordinate
    assert blk.data.shape == (3, 128, 128, 128)
    assert np.array_equal(blk.data, ap.lattice.values)
    assert blk.metadata["m"] == 4
    assert len(blk.origin) == len(blk.spacing) == 4


def test_solution_export():
    g = SpaceTimeGrid(3, 4.0, 16, 10, 0.0, 0.5, 4.0, 5)
    sol = solve_forward_cauchy(zero_field(3), gaussian(), g)
    blk = decode(encode(sol.to_block()))
    assert np.array_equal(blk.data, sol.levels)


def test_ensemble_export_header():
    ens = simulate_euler(zero_field(3), np.zeros(3), SimConfig(h_t=0.1, T=0.5, N=6, seed=3))
    blk = decode(encode(ens.to_block()))
    assert np.array_equal(blk.data, ens.paths)
    for k in ("N", "steps", "d", "h_t", "seed"):
        assert k in blk.metadata
    assert blk.metadata["N"] == 6 and blk.metadata["seed"] == 3
