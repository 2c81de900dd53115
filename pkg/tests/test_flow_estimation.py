import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage

from flowsuction import fluid_sim as fs
from flowsuction.flow_estimation import (
    FlowEstimatorKind,
    FrameBuffer,
    block_mean,
    detect,
    estimate_flow,
    textured,
    truth_to_flow,
)
from flowsuction.types import DimensionError, FlowField

flows = arrays(float, (6, 7), elements=st.floats(-3, 3, allow_nan=False))


def checkerboard(shift, n=96, square=8, blur=1.0):
    rows, cols = np.mgrid[0:n, 0:n]
    board = (((cols - shift) // square + rows // square) % 2).astype(float)
    return 0.2 + 0.6 * ndimage.gaussian_filter(board, blur, mode="wrap")


def interior(mask, margin=3):
    out = np.zeros_like(mask)
    out[margin:-margin, margin:-margin] = True
    return mask & out


def test_static_frames_give_zero_flow():
    f = checkerboard(0)
    flow = estimate_flow([f, f, f], "classical", 4)
    assert np.abs(flow.u).max() < 1e-12 and np.abs(flow.v).max() < 1e-12


@pytest.mark.parametrize("downscale, square", [(1, 8), (4, 16), (4, 32)])
def test_shifted_checkerboard(downscale, square):
    # one flow-resolution pixel per frame
    frames = [checkerboard(k * downscale, square=square) for k in range(3)]
    flow = estimate_flow(frames, FlowEstimatorKind.CLASSICAL, downscale)
    sel = interior(textured(block_mean(frames[0], downscale)))
    assert sel.sum() > 50
    assert flow.u[sel].mean() == pytest.approx(1.0, abs=0.25)
    assert abs(flow.v[sel].mean()) < 0.25


def test_ground_truth_passthrough():
    scene = fs.get_scene("bend")
    buf = FrameBuffer(3)
    outs = [o for _, o in fs.simulate(scene, 12)][-3:]
    for o in outs:
        buf.push(o.frame, (o.truth_u, o.truth_v))
    flow = buf.estimate("gt", 4)
    u = (outs[1].truth_u + outs[2].truth_u) / 2
    v = (outs[1].truth_v + outs[2].truth_v) / 2
    expected = truth_to_flow(u, v, 4)
    assert np.array_equal(flow.u, expected.u) and np.array_equal(flow.v, expected.v)
    assert flow.u.shape == (scene.shape[0] // 4, scene.shape[1] // 4)


def test_detect_hypot_examples():
    u = np.zeros((8, 8))
    v = np.zeros((8, 8))
    assert not detect(FlowField(u, v), 0.45).any()
    u[1, 1] = v[1, 1] = 0.4  # |f| = 0.566
    u[2, 2] = v[2, 2] = 0.3  # |f| = 0.424
    z = detect(FlowField(u, v), 0.45)
    assert z[1, 1] and not z[2, 2]
    assert z.sum() == 1


def test_detect_is_strict():
    f = FlowField(np.full((8, 8), 0.45), np.zeros((8, 8)))
    assert not detect(f, 0.45).any()
    with pytest.raises(ValueError):
        detect(f, -0.1)


@given(flows, flows, st.floats(0, 3), st.floats(0, 3))
def test_detect_monotone_in_threshold(u, v, a, b):
    lo, hi = sorted((a, b))
    f = FlowField(u, v)
    assert np.all(detect(f, hi) <= detect(f, lo))


@given(flows, flows, st.floats(0, 3))
def test_detect_ignores_orientation_exact(u, v, g):
    z = detect(FlowField(u, v), g)
    for ru, rv in ((-v, u), (-u, -v), (v, -u), (u, -v)):  # quarter turns and a mirror
        assert np.array_equal(detect(FlowField(ru, rv), g), z)


@settings(max_examples=50)
@given(flows, flows, arrays(float, (6, 7), elements=st.floats(-np.pi, np.pi)), st.floats(0, 3))
def test_detect_ignores_orientation_any_angle(u, v, theta, g):
    mag = np.hypot(u, v)
    rotated = FlowField(mag * np.cos(theta), mag * np.sin(theta))
    clear = np.abs(mag - g) > 1e-9  # rounding may flip values sitting on the threshold
    assert np.array_equal(detect(FlowField(u, v), g)[clear], detect(rotated, g)[clear])


def test_buffer_contract():
    buf = FrameBuffer(3)
    f = np.zeros((16, 16))
    buf.push(f)
    assert not buf.ready
    with pytest.raises(ValueError):
        buf.estimate("classical", 4)
    with pytest.raises(DimensionError):
        buf.push(np.zeros((16, 17)))
    buf.push(f)
    buf.push(f)
    assert buf.ready
    with pytest.raises(ValueError):
        buf.estimate("gt", 4)  # no truth supplied
    with pytest.raises(ValueError):
        FrameBuffer(1)


def test_estimator_names():
    assert FlowEstimatorKind.parse("ground_truth") is FlowEstimatorKind.GROUND_TRUTH
    assert FlowEstimatorKind.parse("classical") is FlowEstimatorKind.CLASSICAL
    with pytest.raises(ValueError):
        FlowEstimatorKind.parse("raft")


def test_mismatched_frames_rejected():
    with pytest.raises(DimensionError):
        estimate_flow([np.zeros((16, 16)), np.zeros((16, 12))], "classical", 4)
    with pytest.raises(ValueError):
        estimate_flow([np.zeros((16, 16))], "classical", 4)
