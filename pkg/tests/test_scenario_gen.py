from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aga.dataset_io import rle_decode, rle_encode
from aga.metrics import association_accuracy
from aga.scenario_gen import (
    BezierTrajectory,
    InstanceSpec,
    Scenario,
    ScenarioParams,
    SimulatorParams,
    eval_bezier,
    generate_scenario,
    position_streams,
    positional_encoding,
    render_ground_truth,
    simulate_detections,
)
from aga.tracker import track_video, track_video_object_only

CLEAN = SimulatorParams(obj_noise=0, app_noise=0, conf_noise=0)


def test_bezier_examples():
    b = BezierTrajectory(np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=float), 10)
    assert eval_bezier(b, 0.0).tolist() == [0.0, 0.0]
    assert eval_bezier(b, 1.0).tolist() == [1.0, 0.0]
    assert np.allclose(eval_bezier(b, 0.5), [0.5, 0.75])
    with pytest.raises(ValueError):
        eval_bezier(b, 1.5)
    with pytest.raises(ValueError):
        BezierTrajectory(np.zeros((3, 2)), 10)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 1))
def test_bezier_stays_in_control_box(seed, t):
    cp = np.random.default_rng(seed).uniform(-0.2, 1.2, size=(4, 2))
    p = eval_bezier(BezierTrajectory(cp, 5), t)
    # Bernstein form as an independent oracle
    w = np.array([(1 - t) ** 3, 3 * t * (1 - t) ** 2, 3 * t * t * (1 - t), t**3])
    assert np.allclose(p, w @ cp)
    assert np.all(p >= cp.min(axis=0) - 1e-12) and np.all(p <= cp.max(axis=0) + 1e-12)


def test_generation_is_deterministic():
    a_sc, a_gt = generate_scenario(11, "swap")
    b_sc, b_gt = generate_scenario(11, "swap")
    assert a_sc.swap_frame == b_sc.swap_frame and a_sc.swap_pair == b_sc.swap_pair
    assert np.array_equal(a_gt.centers, b_gt.centers)
    assert np.array_equal(a_gt.masks, b_gt.masks)
    da, db = simulate_detections(a_sc, a_gt), simulate_detections(b_sc, b_gt)
    assert all(np.array_equal(x.e_app, y.e_app) and np.array_equal(x.hidden_ids, y.hidden_ids) for x, y in zip(da, db))


def test_sampled_fields_in_range():
    p = ScenarioParams()
    for seed in range(30):
        sc, gt = generate_scenario(seed, "swap")
        assert len(sc.instances) in (2, 3)
        assert sc.resolution[0] in p.resolutions and sc.resolution[1] in p.resolutions
        assert 2 <= sc.swap_frame <= sc.frames - 2
        assert sorted(i.depth_rank for i in sc.instances) == list(range(len(sc.instances)))
        for inst in sc.instances:
            assert np.linalg.norm(inst.latent_appearance) == pytest.approx(1.0)
        pos = position_streams(sc)
        assert np.all(pos >= -p.margin - 1e-12) and np.all(pos <= 1 + p.margin + 1e-12)


def test_swap_exchanges_positions_of_track_sibling(swap_scenario, track_scenario):
    sc, gt = swap_scenario
    tsc, tgt = track_scenario
    i, j = sc.swap_pair
    f = sc.swap_frame
    assert np.array_equal(gt.centers[:f], tgt.centers[:f])
    assert np.array_equal(gt.centers[f:, i], tgt.centers[f:, j])
    assert np.array_equal(gt.centers[f:, j], tgt.centers[f:, i])
    assert np.linalg.norm(tgt.centers[f, i] - tgt.centers[f, j]) / min(sc.resolution) > 0


def test_momentary_swap_lasts_one_frame():
    params = ScenarioParams(swap_mode="momentary")
    sc, gt = generate_scenario(3, "swap", params)
    _, tgt = generate_scenario(3, "track", params)
    i, j = sc.swap_pair
    f = sc.swap_frame
    assert np.array_equal(gt.centers[f, [i, j]], tgt.centers[f, [j, i]])
    assert np.array_equal(np.delete(gt.centers, f, axis=0), np.delete(tgt.centers, f, axis=0))


def _manual_scenario(points_a, points_b, depth=(0, 1)):
    def inst(k, pts):
        cp = np.repeat(np.asarray(pts, dtype=float)[None], 4, axis=0)
        return InstanceSpec(k, k, (40.0, 30.0), depth[k], np.eye(8)[k], BezierTrajectory(cp, 4))

    return Scenario("manual", "track", 4, (800, 600), [inst(0, points_a), inst(1, points_b)], seed=0)


def test_disjoint_instances_fully_visible():
    gt = render_ground_truth(_manual_scenario([0.25, 0.5], [0.75, 0.5]))
    assert np.all(gt.visibility == 1.0)
    assert np.array_equal(gt.masks, gt.amodal)
    assert gt.masks.shape == (4, 2, 150, 200)


def test_overlap_hides_the_farther_instance():
    gt = render_ground_truth(_manual_scenario([0.5, 0.5], [0.52, 0.5], depth=(1, 0)))
    assert gt.visibility[0, 1] == 1.0
    assert 0 < gt.visibility[0, 0] < 0.5
    assert not np.logical_and(gt.masks[0, 0], gt.masks[0, 1]).any()


def test_out_of_frame_instance_has_zero_visibility():
    gt = render_ground_truth(_manual_scenario([1.5, 1.5], [0.5, 0.5]))
    assert np.all(gt.visibility[:, 0] == 0.0)
    assert not gt.amodal[:, 0].any()


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_ground_truth_consistency(seed):
    sc, gt = generate_scenario(seed, "swap")
    visible = gt.masks.sum(axis=(2, 3))
    area = gt.amodal.sum(axis=(2, 3))
    expect = np.divide(visible, area, out=np.zeros_like(gt.visibility), where=area > 0)
    assert np.allclose(gt.visibility, expect)
    assert not np.any(gt.masks & ~gt.amodal)
    # visible masks never overlap
    assert gt.masks.sum(axis=1).max() <= 1
    for t in range(0, sc.frames, 7):
        for k in range(len(sc.instances)):
            assert np.array_equal(rle_decode(rle_encode(gt.masks[t, k])), gt.masks[t, k])


def test_positional_encoding_is_unit_norm():
    for xy in ([0.0, 0.0], [0.3, 0.9], [1.2, -0.2]):
        assert np.linalg.norm(positional_encoding(xy, 32, dc_weight=0.3)) == pytest.approx(1.0)
    a = positional_encoding([0.0, 0.0], 32, dc_weight=0.3)
    b = positional_encoding([1.0, 1.0], 32, dc_weight=0.3)
    assert a @ b >= 2 * 0.3 - 1 - 1e-9


def test_appearance_only_embeddings_give_perfect_association():
    for seed in range(5):
        sc, gt = generate_scenario(seed, "swap")
        frames = simulate_detections(sc, gt, replace(CLEAN, alpha_loc=0.0))
        assert association_accuracy(track_video(frames).slot_ids()) == 1.0
        assert association_accuracy(track_video_object_only(frames).slot_ids()) == 1.0


def test_detection_fields(swap_scenario):
    sc, gt = swap_scenario
    frames = simulate_detections(sc, gt)
    n = len(sc.instances)
    for t, f in enumerate(frames):
        assert f.frame_index == t + 1
        assert sorted(f.hidden_ids.tolist()) == list(range(n))
        assert np.allclose(np.linalg.norm(f.e_obj, axis=1), 1.0)
        assert np.all((f.conf >= 0) & (f.conf <= 1))
        for i, k in enumerate(f.hidden_ids):
            assert np.array_equal(f.masks[i], gt.masks[t, k])
    orders = {tuple(f.hidden_ids) for f in frames}
    assert len(orders) > 1


def test_dropout_frames():
    sc, gt = generate_scenario(4, "track")
    frames = simulate_detections(sc, gt, SimulatorParams(dropout_rate=1.0))
    for f in frames:
        assert np.all(f.conf == 0.0)
        # appearance carries no latent signal
        for i, k in enumerate(f.hidden_ids):
            assert abs(f.e_app[i] @ sc.instances[k].latent_appearance) < 0.9


def test_parameter_refusals():
    with pytest.raises(ValueError):
        generate_scenario(0, "merge")
    with pytest.raises(ValueError):
        generate_scenario(0, "swap", ScenarioParams(frames=3))
    with pytest.raises(ValueError):
        generate_scenario(0, "track", ScenarioParams(instance_counts=(4,)))
    with pytest.raises(ValueError):
        generate_scenario(0, "track", ScenarioParams(swap_mode="sometimes"))
    sc, gt = generate_scenario(0, "track")
    with pytest.raises(ValueError):
        simulate_detections(sc, gt, SimulatorParams(alpha_loc=1.5))
    with pytest.raises(ValueError):
        simulate_detections(sc, gt, SimulatorParams(app_noise=-1))
