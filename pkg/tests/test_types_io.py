import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from flowsuction import io
from flowsuction.types import (
    AgeCountMap,
    BloodMask,
    DimensionError,
    FlowField,
    Frame,
    GridDims,
    PixelTrajectory,
    PosteriorMap,
    check_same_shape,
)

shapes = st.tuples(st.integers(1, 20), st.integers(1, 20))


def test_grid_dims():
    d = GridDims(320, 240)
    assert d.shape == (240, 320)
    assert d.scaled_down(4) == GridDims(80, 60)
    with pytest.raises(DimensionError):
        GridDims(4, 100)


def test_shape_checks():
    check_same_shape(np.zeros((3, 4)), np.ones((3, 4)))
    with pytest.raises(DimensionError):
        check_same_shape(np.zeros((3, 4)), np.zeros((4, 3)))
    with pytest.raises(DimensionError):
        FlowField(np.zeros((3, 4)), np.zeros((3, 5)))


def test_value_validation():
    with pytest.raises(ValueError):
        Frame(np.full((8, 8), 1.2))
    with pytest.raises(ValueError):
        PosteriorMap(np.full((8, 8), -0.1))
    with pytest.raises(ValueError):
        AgeCountMap(np.full((8, 8), -1))
    with pytest.raises(ValueError):
        FlowField(np.full((8, 8), np.inf), np.zeros((8, 8)))


def test_containers_are_read_only():
    f = Frame(np.zeros((8, 8)))
    with pytest.raises(ValueError):
        f.pixels[0, 0] = 1.0
    m = BloodMask(np.zeros((8, 8)))
    with pytest.raises(ValueError):
        m.bits[0, 0] = True


@settings(max_examples=30)
@given(shapes.flatmap(lambda s: arrays(np.uint8, s)))
def test_frame_pgm_round_trip(tmp_path_factory, levels):
    path = tmp_path_factory.mktemp("pgm") / "f.pgm"
    frame = Frame(levels / 255.0)
    io.write_pgm(path, frame.pixels)
    assert Frame(io.read_netpbm(path)) == frame


@settings(max_examples=30)
@given(shapes.flatmap(lambda s: arrays(bool, s)))
def test_mask_pbm_round_trip(tmp_path_factory, bits):
    path = tmp_path_factory.mktemp("pbm") / "m.pbm"
    io.write_pbm(path, bits)
    assert BloodMask(io.read_netpbm(path)) == BloodMask(bits)


@settings(max_examples=30)
@given(shapes.flatmap(lambda s: st.tuples(arrays(np.float32, s, elements=st.floats(-50, 50, width=32)),
                                          arrays(np.float32, s, elements=st.floats(-50, 50, width=32)))))
def test_flow_raw_round_trip(tmp_path_factory, uv):
    path = tmp_path_factory.mktemp("raw") / "f.raw"
    flow = FlowField(*uv)
    io.write_raw(path, flow.u, flow.v)
    back = io.read_raw(path)
    assert FlowField(back[0], back[1]) == flow


@settings(max_examples=30)
@given(shapes.flatmap(lambda s: arrays(np.float32, s, elements=st.floats(0, 1, width=32))))
def test_posterior_raw_round_trip(tmp_path_factory, p):
    path = tmp_path_factory.mktemp("raw") / "p.raw"
    post = PosteriorMap(p)
    io.write_raw(path, post.prob)
    assert PosteriorMap(io.read_raw(path)[0]) == post


def test_age_map_round_trip(tmp_path):
    counts = AgeCountMap(np.arange(80).reshape(8, 10))
    io.write_raw(tmp_path / "a.raw", counts.counts)
    assert AgeCountMap(io.read_raw(tmp_path / "a.raw")[0]) == counts


def test_trajectory_round_trip(tmp_path):
    traj = PixelTrajectory(((1, 2), (2, 2), (3, 3)))
    io.write_trajectory(tmp_path / "t.txt", traj)
    assert (tmp_path / "t.txt").read_text() == "1 2\n2 2\n3 3\n"
    assert io.read_trajectory(tmp_path / "t.txt") == traj


def test_raw_header_layout(tmp_path):
    io.write_raw(tmp_path / "x.raw", np.ones((3, 5)))
    data = (tmp_path / "x.raw").read_bytes()
    assert data[:4] == b"FSRF"
    assert int.from_bytes(data[4:8], "little") == 5
    assert int.from_bytes(data[8:12], "little") == 3
    assert len(data) == 16 + 4 * 15


def test_pbm_packing_and_comments(tmp_path):
    m = np.zeros((2, 10), bool)
    m[0, 0] = m[1, 9] = True
    io.write_pbm(tmp_path / "m.pbm", m)
    data = (tmp_path / "m.pbm").read_bytes()
    assert data == b"P4\n10 2\n" + bytes([0x80, 0x00, 0x00, 0x40])
    (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n2 1\n255\n\x00\xff")
    assert io.read_netpbm(tmp_path / "c.pgm").tolist() == [[0.0, 1.0]]


def test_ppm_and_overlay(tmp_path):
    m = np.zeros((8, 8), bool)
    m[2:6, 2:6] = True
    rgb = io.overlay(m, PixelTrajectory(((2, 2), (3, 2), (4, 2))))
    io.write_ppm(tmp_path / "o.ppm", rgb)
    back = io.read_netpbm(tmp_path / "o.ppm")
    assert back.shape == (8, 8, 3) and np.array_equal(back, rgb)
    assert tuple(back[2, 3]) == (0, 220, 0)


@pytest.mark.parametrize(
    "payload",
    [b"P3\n1 1\n255\n0", b"P5\n2 2\n255\n\x00", b"P5\nx 2\n255\n", b"P4\n9 1\n", b"FSRF" + bytes(12) + b"\x00"],
)
def test_malformed_files(tmp_path, payload):
    path = tmp_path / "bad"
    path.write_bytes(payload)
    reader = io.read_raw if payload.startswith(b"FSRF") else io.read_netpbm
    with pytest.raises(io.FormatError):
        reader(path)


def test_manifest(tmp_path):
    m = io.Manifest("slope", 61, 160, 96)
    io.write_manifest(tmp_path, m)
    assert io.read_manifest(tmp_path) == m
    with pytest.raises(io.FormatError):
        io.Manifest.parse("scene=x\nframes=two\n")
