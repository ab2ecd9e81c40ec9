import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from trussim.geometry import apply_transform, identity, invert, random_rigid, rotation_angle, rotation_x, make_transform
from trussim.registration import (
    DegenerateCorrespondences,
    RegistrationReport,
    best_fit_transform,
    build_index,
    evaluate,
    hausdorff,
    hausdorff_directed,
    icp,
    nearest_neighbors,
    voxel_downsample,
)

from oracles import brute_hausdorff, brute_nn

small_clouds = arrays(np.float64, st.tuples(st.integers(1, 60), st.just(3)), elements=st.floats(-100, 100))


def sparse_cloud(rng, n=400, extent=100.0):
    return rng.uniform(-extent / 2, extent / 2, size=(n, 3))


def test_nn_examples():
    idx, dist = nearest_neighbors([[0.0, 0.0, 0.0]], [[3.0, 4.0, 0.0], [10.0, 0.0, 0.0]])
    assert idx[0] == 0 and dist[0] == 5.0
    pts = np.random.default_rng(0).normal(size=(100, 3))
    idx, dist = nearest_neighbors(pts, pts)
    np.testing.assert_array_equal(idx, np.arange(100))
    np.testing.assert_array_equal(dist, 0.0)


def test_nn_matches_brute_force(rng):
    for _ in range(5):
        a = rng.normal(size=(int(rng.integers(1, 2000)), 3)) * 10
        b = rng.normal(size=(int(rng.integers(1, 2000)), 3)) * 10
        idx, dist = nearest_neighbors(a, b)
        ref_idx, ref_dist = brute_nn(a, b)
        np.testing.assert_array_equal(idx, ref_idx)
        np.testing.assert_array_equal(dist, ref_dist)


@given(small_clouds, small_clouds)
def test_hausdorff_property(a, b):
    assert hausdorff_directed(a, b) == pytest.approx(brute_hausdorff(a, b), rel=1e-12, abs=1e-12)
    assert hausdorff_directed(a, a) == 0.0
    assert hausdorff(a, b) == pytest.approx(hausdorff(b, a))
    assert hausdorff(a, b) >= hausdorff_directed(a, b)


def test_hausdorff_examples():
    assert hausdorff_directed([[0, 0, 0]], [[3, 4, 0]]) == 5.0
    with pytest.raises(ValueError):
        hausdorff_directed(np.empty((0, 3)), [[0, 0, 0]])
    with pytest.raises(ValueError):
        build_index(np.empty((0, 3)))


def test_best_fit_translation_and_rotation(rng):
    src = sparse_cloud(rng, 50)
    T = best_fit_transform(src, src + [1.0, 2.0, 3.0])
    np.testing.assert_allclose(T[:3, 3], [1.0, 2.0, 3.0], atol=1e-9)
    np.testing.assert_allclose(T[:3, :3], np.eye(3), atol=1e-9)
    R = rotation_x(np.pi / 2)
    T = best_fit_transform(src, src @ R.T)
    np.testing.assert_allclose(T[:3, :3], R, atol=1e-9)
    np.testing.assert_allclose(T[:3, 3], 0.0, atol=1e-9)


def test_best_fit_recovers_random_transforms(rng):
    for _ in range(100):
        src = sparse_cloud(rng, 30)
        T = random_rigid(rng, max_shift=50.0)
        est = best_fit_transform(src, apply_transform(T, src))
        assert np.max(np.abs(est[:3, 3] - T[:3, 3])) <= 1e-6
        assert rotation_angle(invert(est) @ T) <= 1e-8


def test_best_fit_is_least_squares_optimal(rng):
    src = sparse_cloud(rng, 60, 20.0)
    tgt = apply_transform(random_rigid(rng), src) + rng.normal(0, 0.3, size=src.shape)
    T = best_fit_transform(src, tgt)
    cost = lambda M: np.sum((apply_transform(M, src) - tgt) ** 2)
    best = cost(T)
    for _ in range(1000):
        P = random_rigid(rng, max_angle=0.02, max_shift=0.05)
        assert cost(P @ T) >= best - 1e-9


def test_best_fit_planar_points_are_not_reflected(rng):
    src = np.column_stack([rng.normal(size=(40, 2)), np.zeros(40)])
    T = random_rigid(rng)
    est = best_fit_transform(src, apply_transform(T, src))
    assert np.linalg.det(est[:3, :3]) == pytest.approx(1.0)
    np.testing.assert_allclose(apply_transform(est, src), apply_transform(T, src), atol=1e-9)


def test_best_fit_degenerate():
    with pytest.raises(DegenerateCorrespondences):
        best_fit_transform([[0, 0, 0], [1, 1, 1]], [[0, 0, 0], [1, 1, 1]])
    line = np.outer(np.arange(5.0), [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateCorrespondences):
        best_fit_transform(line, line)
    with pytest.raises(ValueError):
        best_fit_transform(np.zeros((4, 3)), np.zeros((5, 3)))


@pytest.mark.parametrize("threshold", [0.4, 0.6, 0.8, 1.0, 1.2])
def test_self_registration(rng, threshold):
    pc = rng.normal(size=(3000, 3)) * 10
    rep = icp(pc, pc, threshold)
    assert rep.fitness == 1.0 and rep.inlier_rmse == 0.0 and rep.hausdorff == 0.0
    np.testing.assert_array_equal(rep.transform, identity())
    assert rep.converged


def test_translation_is_recovered(rng):
    tgt = sparse_cloud(rng)
    src = tgt + [0.5, 0.0, 0.0]
    rep = icp(src, tgt, 2.0)
    np.testing.assert_allclose(rep.transform[:3, 3], [-0.5, 0.0, 0.0], atol=1e-6)
    assert rep.fitness == 1.0
    assert rep.inlier_rmse < 1e-9 and rep.converged


def test_partial_overlap_example():
    rep = icp([[0.0, 0.0, 0.0], [10.0, 0.0, 0.0]], [[0.0, 0.0, 0.0]], 0.8)
    assert rep.fitness == 0.5 and rep.inlier_rmse == 0.0
    assert rep.hausdorff == 10.0


def test_no_inliers():
    rep = icp([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], [[50.0, 0.0, 0.0]], 1.0)
    assert rep.fitness == 0.0 and not rep.converged


def test_icp_rejects_bad_arguments():
    with pytest.raises(ValueError):
        icp([[0.0, 0.0, 0.0]], [[0.0, 0.0, 0.0]], 0.0)
    with pytest.raises(ValueError):
        icp(np.empty((0, 3)), [[0.0, 0.0, 0.0]], 1.0)


def test_metrics_stay_in_range(rng):
    tgt = rng.normal(size=(2000, 3)) * 5
    src = apply_transform(random_rigid(rng, 0.05, 0.5), tgt[:1500]) + rng.normal(0, 0.1, size=(1500, 3))
    for th in (0.2, 0.5, 1.0):
        rep = icp(src, tgt, th)
        assert 0.0 <= rep.fitness <= 1.0
        assert 0.0 <= rep.inlier_rmse <= th
        assert rep.hausdorff >= 0.0
        # fitness and RMSE belong to the reported transform
        assert (rep.fitness, rep.inlier_rmse) == pytest.approx(evaluate(src, tgt, th, rep.transform), abs=1e-12)


def test_subsampled_iterations_report_full_cloud_metrics(rng):
    tgt = rng.normal(size=(20000, 3)) * 8
    src = apply_transform(random_rigid(rng, 0.02, 0.3), tgt) + rng.normal(0, 0.05, size=tgt.shape)
    rep = icp(src, tgt, 0.8, sample_size=2000)
    assert rep.extra["sample_stride"] == 10
    assert (rep.fitness, rep.inlier_rmse) == pytest.approx(evaluate(src, tgt, 0.8, rep.transform), abs=1e-12)
    assert rep.hausdorff == pytest.approx(hausdorff_directed(apply_transform(rep.transform, src), tgt))
    full = icp(src, tgt, 0.8)
    assert rep.fitness == pytest.approx(full.fitness, abs=5e-3)
    self_rep = icp(tgt, tgt, 0.4, sample_size=1000)
    assert self_rep.fitness == 1.0 and self_rep.hausdorff == 0.0


def test_symmetric_hausdorff(rng):
    a = rng.normal(size=(200, 3))
    b = np.vstack([a, [[30.0, 0.0, 0.0]]])
    assert icp(a, b, 0.5).hausdorff == 0.0
    assert icp(a, b, 0.5, symmetric_hausdorff=True).hausdorff == pytest.approx(hausdorff(a, b))


def test_report_round_trip(tmp_path, rng):
    rep = icp(rng.normal(size=(100, 3)), rng.normal(size=(100, 3)), 1.0)
    rep.save(tmp_path / "r.json")
    back = RegistrationReport.load(tmp_path / "r.json")
    np.testing.assert_array_equal(back.transform, rep.transform)
    assert back.fitness == rep.fitness and back.iterations == rep.iterations


def test_voxel_downsample():
    pts = np.array([[0.1, 0.1, 0.1], [0.3, 0.3, 0.3], [5.0, 5.0, 5.0]])
    out = voxel_downsample(pts, 1.0)
    assert len(out) == 2
    assert any(np.allclose(p, [0.2, 0.2, 0.2]) for p in out)
