import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccma.rigidbody import (
    BodyPose,
    SystemState,
    rotation,
    rotation_partials,
    second_partial,
    to_world_point,
    to_world_vector,
)

from conftest import central_diff

angle = st.floats(-np.pi, np.pi, allow_nan=False)
coord = st.floats(-10, 10, allow_nan=False)
vec3 = st.tuples(coord, coord, coord)


def test_identity_pose_maps_point_unchanged():
    assert np.allclose(to_world_point(BodyPose(), (1, 2, 3)), (1, 2, 3), atol=0)


def test_pure_translation():
    assert np.array_equal(to_world_point(BodyPose(T=(5, 0, -1)), (1, 0, 0)), [6, 0, -1])


def test_heading_quarter_turn():
    R = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1.0]])
    got = to_world_point(BodyPose(gamma=np.pi / 2), (1, 0, 0))
    assert np.allclose(got, R @ [1, 0, 0], atol=1e-15)
    assert np.allclose(got, (0, 1, 0), atol=1e-15)


def test_rotation_order_is_z_then_y_then_x():
    g, b, a = 0.3, -0.4, 0.5
    Rz = np.array([[np.cos(g), -np.sin(g), 0], [np.sin(g), np.cos(g), 0], [0, 0, 1]])
    Ry = np.array([[np.cos(b), 0, np.sin(b)], [0, 1, 0], [-np.sin(b), 0, np.cos(b)]])
    Rx = np.array([[1, 0, 0], [0, np.cos(a), -np.sin(a)], [0, np.sin(a), np.cos(a)]])
    assert np.allclose(rotation(g, b, a), Rz @ Ry @ Rx, atol=1e-15)


def test_vector_ignores_translation():
    assert np.array_equal(to_world_vector(BodyPose(T=(9, 9, 9)), (0, 0, 1)), [0, 0, 1])


def test_zero_vector_stays_zero():
    assert np.array_equal(to_world_vector(BodyPose(0.4, 0.2, -1.0), (0, 0, 0)), [0, 0, 0])


def test_generator_at_zero():
    dR, _ = rotation_partials(BodyPose())
    skew_z = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 0.0]])
    assert np.allclose(dR[0], skew_z, atol=1e-15)


def test_first_partials_match_finite_differences():
    rng = np.random.default_rng(1)
    for _ in range(20):
        ang = rng.uniform(-np.pi, np.pi, 3)
        dR, _ = rotation_partials(np.r_[ang, 0, 0, 0])
        num = central_diff(lambda q: rotation(*q), ang)
        for i in range(3):
            assert np.abs(dR[i] - num[..., i]).max() <= 1e-8


def test_second_partials_match_finite_differences():
    rng = np.random.default_rng(2)
    for _ in range(20):
        ang = rng.uniform(-np.pi, np.pi, 3)
        _, d2R = rotation_partials(np.r_[ang, 0, 0, 0])
        num = central_diff(lambda q: rotation_partials(np.r_[q, 0, 0, 0])[0], ang)
        for a in range(3):
            for b in range(3):
                assert np.abs(second_partial(d2R, a, b) - num[a, ..., b]).max() <= 1e-6


@settings(max_examples=200, deadline=None)
@given(angle, angle, angle)
def test_rotation_is_orthonormal(g, b, a):
    R = rotation(g, b, a)
    assert np.abs(R.T @ R - np.eye(3)).max() <= 1e-12
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(angle, angle, angle, vec3, vec3)
def test_point_minus_origin_is_vector(g, b, a, T, p):
    pose = BodyPose(g, b, a, T)
    diff = to_world_point(pose, p) - to_world_point(pose, (0, 0, 0))
    assert np.allclose(diff, to_world_vector(pose, p), rtol=0, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(angle, angle, angle, vec3)
def test_origin_maps_to_translation(g, b, a, T):
    assert np.array_equal(to_world_point(BodyPose(g, b, a, T), (0, 0, 0)), np.asarray(T, dtype=float))


@settings(max_examples=200, deadline=None)
@given(angle, angle, angle, vec3)
def test_rotation_preserves_length(g, b, a, v):
    w = to_world_vector(BodyPose(g, b, a), v)
    assert np.linalg.norm(w) == pytest.approx(np.linalg.norm(v), rel=1e-12, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(angle, angle, angle)
def test_partials_relative_accuracy(g, b, a):
    ang = np.array([g, b, a])
    dR, _ = rotation_partials(np.r_[ang, 0, 0, 0])
    num = central_diff(lambda q: rotation(*q), ang)
    for i in range(3):
        err = np.abs(dR[i] - num[..., i])
        assert np.all(err <= 1e-7 * np.maximum(np.abs(dR[i]), 1.0))


def test_nonfinite_pose_rejected():
    with pytest.raises(ValueError):
        BodyPose(np.nan)
    with pytest.raises(ValueError):
        BodyPose(T=(0, np.inf, 0))


def test_system_state_length():
    s = SystemState.from_flat(np.arange(18.0))
    assert len(s) == 18 and s.n_bodies == 3
    assert np.array_equal(s.flat(), np.arange(18.0))
    with pytest.raises(ValueError):
        SystemState.from_flat(np.zeros(7))
