import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trussim.geometry import (
    apply_transform,
    check_rigid,
    compose,
    identity,
    invert,
    is_rigid,
    random_rigid,
    rotation_angle,
    slice_transform,
    translation,
)

angles = st.floats(-10.0, 10.0, allow_nan=False)
radii = st.floats(0.0, 50.0, allow_nan=False)


def test_slice_transform_zero_roll():
    out = apply_transform(slice_transform(0.0, 9.0), [[10.0, 5.0, 0.0]])
    np.testing.assert_array_equal(out, [[10.0, 14.0, 0.0]])


def test_slice_transform_quarter_turn():
    out = apply_transform(slice_transform(math.pi / 2, 9.0), [[10.0, 5.0, 0.0]])
    np.testing.assert_allclose(out, [[10.0, 0.0, 14.0]], atol=1e-12)


def test_slice_transform_half_turn_without_radius():
    out = apply_transform(slice_transform(math.pi, 0.0), [[1.0, 2.0, 0.0]])
    np.testing.assert_allclose(out, [[1.0, -2.0, 0.0]], atol=1e-12)


@pytest.mark.parametrize("phi, r", [(math.nan, 9.0), (0.1, math.inf), (0.1, -1.0)])
def test_slice_transform_rejects_bad_input(phi, r):
    with pytest.raises(ValueError):
        slice_transform(phi, r)


@given(angles, radii)
def test_slice_transform_is_rigid(phi, r):
    assert is_rigid(slice_transform(phi, r))


@given(angles, radii, st.floats(-30, 30), st.floats(0, 50))
def test_slice_transform_keeps_axis_and_radius(phi, r, u, v):
    # the probe axis coordinate is kept and the depth lands on a circle of radius v + r
    p = apply_transform(slice_transform(phi, r), [[u, v, 0.0]])[0]
    assert p[0] == pytest.approx(u, abs=1e-12)
    assert math.hypot(p[1], p[2]) == pytest.approx(v + r, rel=1e-12, abs=1e-12)


def test_apply_identity_and_translation(rng):
    pts = rng.normal(size=(50, 3))
    np.testing.assert_array_equal(apply_transform(identity(), pts), pts)
    np.testing.assert_array_equal(apply_transform(translation(1, 0, 0), [[0, 0, 0]]), [[1.0, 0.0, 0.0]])


def test_apply_preserves_order_and_length(rng):
    pts = rng.normal(size=(7, 3))
    T = random_rigid(rng)
    out = apply_transform(T, pts)
    assert out.shape == pts.shape
    for i in range(len(pts)):
        np.testing.assert_allclose(out[i], T[:3, :3] @ pts[i] + T[:3, 3], atol=1e-12)


def test_apply_rejects_bad_shape():
    with pytest.raises(ValueError):
        apply_transform(identity(), np.zeros((4, 2)))


def test_compose_and_invert():
    T = slice_transform(0.3, 9.0)
    np.testing.assert_array_equal(compose(identity(), T), T)
    np.testing.assert_array_equal(invert(translation(1, 2, 3)), translation(-1, -2, -3))
    np.testing.assert_allclose(compose(invert(T), T), identity(), atol=1e-9)
    # oracle: generic matrix inverse
    np.testing.assert_allclose(invert(T), np.linalg.inv(T), atol=1e-12)


def test_compose_order(rng):
    A, B = random_rigid(rng), random_rigid(rng)
    p = rng.normal(size=(5, 3))
    np.testing.assert_allclose(apply_transform(compose(A, B), p), apply_transform(A, apply_transform(B, p)), atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_random_rigid_round_trip(seed):
    T = random_rigid(np.random.default_rng(seed))
    assert is_rigid(T)
    np.testing.assert_allclose(invert(T) @ T, identity(), atol=1e-9)


def test_rigidity_checks():
    bad = identity()
    bad[0, 0] = 2.0
    assert not is_rigid(bad)
    reflect = np.diag([1.0, 1.0, -1.0, 1.0])
    assert not is_rigid(reflect)
    with pytest.raises(ValueError):
        check_rigid(reflect)
    nan = identity()
    nan[0, 3] = np.nan
    assert not is_rigid(nan)


def test_rotation_angle():
    assert rotation_angle(slice_transform(0.7, 3.0)) == pytest.approx(0.7)
    assert rotation_angle(identity()) == 0.0
