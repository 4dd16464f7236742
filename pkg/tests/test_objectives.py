"""Loss functions against hand-computed fixtures."""

import numpy as np
import pytest

from f3d import objectives as obj
from f3d import tensor as T
from f3d.tensor import Tape
from f3d.world.scene import FAR_PLANE


def test_normalize_constant_patch_is_zero():
    out = obj.pixelwise_normalize(np.full((4, 4), 3.7), patch=2, channels=False)
    assert np.allclose(out, 0.0)


def test_normalize_mean_zero_std_one():
    rng = np.random.default_rng(0)
    x = rng.random((8, 8, 3))
    out = obj.pixelwise_normalize(x, patch=4, channels=True).reshape(2, 4, 2, 4, 3)
    means = out.mean(axis=(1, 3))
    stds = out.std(axis=(1, 3))
    assert np.abs(means).max() <= 1e-6
    assert np.abs(stds - 1.0).max() <= 1e-3


def test_normalize_idempotent():
    rng = np.random.default_rng(1)
    x = rng.random((8, 8))
    once = obj.pixelwise_normalize(x, patch=4, channels=False)
    twice = obj.pixelwise_normalize(once, patch=4, channels=False)
    assert np.abs(twice - once).max() <= 1e-5


def test_depth_loss_fixtures():
    pred = T.constant(np.zeros((2, 2)))
    assert float(obj.loss_depth(pred, np.zeros((2, 2))).data) == 0.0
    # constant offset of 1 -> MSE exactly 1
    assert float(obj.loss_depth(T.constant(np.ones((2, 2))), np.zeros((2, 2))).data) == pytest.approx(1.0)
    # hand-computed 2x2 fixture: residuals (0.5, -0.5, 1, 0) -> mean of squares
    p = T.constant(np.array([[0.5, 0.0], [2.0, 1.0]]))
    t = np.array([[0.0, 0.5], [1.0, 1.0]])
    expected = (0.25 + 0.25 + 1.0 + 0.0) / 4.0
    assert float(obj.loss_depth(p, t).data) == pytest.approx(expected, abs=1e-7)


def test_future_loss_fixture():
    rgb = T.constant(np.zeros((1, 2, 2, 3)))
    depth = T.constant(np.zeros((1, 2, 2)))
    rgb_t = np.zeros((1, 2, 2, 3))
    rgb_t[0, 0, 0, 0] = 2.0
    depth_t = np.zeros((1, 2, 2))
    # one channel entry off by 2 among 16 entries -> 4/16
    loss = obj.loss_future(rgb, depth, rgb_t, depth_t)
    assert float(loss.data) == pytest.approx(4.0 / 16.0, abs=1e-7)


def test_flow_loss_fixture_and_scaling():
    pred = T.constant(np.zeros((1, 2, 2, 3)))
    target = np.zeros((1, 2, 2, 3))
    assert float(obj.loss_flow(pred, target, 32, 32).data) == 0.0
    target[0, 0, 0, 2] = FAR_PLANE  # depth off by the far plane -> scaled residual 1
    expected = 1.0 / 12.0
    assert float(obj.loss_flow(pred, target, 32, 32).data) == pytest.approx(expected, abs=1e-7)
    # single-entry pixel offset delta -> (delta/(W-1))^2 / N
    target2 = np.zeros((1, 2, 2, 3))
    target2[0, 1, 1, 0] = 31.0
    assert float(obj.loss_flow(pred, target2, 32, 32).data) == pytest.approx(1.0 / 12.0, abs=1e-7)


def test_flow_2d_mode_ignores_depth_channel():
    pred = T.constant(np.zeros((1, 1, 2, 3)))
    target = np.zeros((1, 1, 2, 3))
    target[0, 0, 0, 2] = 1.9
    assert float(obj.loss_flow(pred, target, 32, 32, dims=2).data) == 0.0


def test_action_loss_fixtures():
    # perfect arm + strongly correct gripper logits -> both ~0
    pred = np.zeros((1, 1, 7))
    pred[0, 0, 6] = 14.9
    tgt = np.zeros((1, 1, 7))
    tgt[0, 0, 6] = 1.0
    arm, grip = obj.loss_action(T.constant(pred), tgt)
    assert float(arm.data) == 0.0
    assert float(grip.data) <= 1e-6
    # K=1: arm residual 0.5 on one of six dims -> SmoothL1 mean = 0.125/6
    pred2 = np.zeros((1, 1, 7))
    pred2[0, 0, 0] = 0.5
    arm2, _ = obj.loss_action(T.constant(pred2), np.zeros((1, 1, 7)))
    assert float(arm2.data) == pytest.approx(0.125 / 6.0, abs=1e-7)


def test_action_target_gripper_must_be_binary():
    with pytest.raises(ValueError):
        obj.loss_action(T.constant(np.zeros((1, 1, 7))), np.full((1, 1, 7), 0.5))


def test_combine_arithmetic_and_defaults():
    w = obj.LossWeights()
    assert (w.alpha, w.beta, w.gamma, w.delta) == (0.01, 0.05, 0.1, 0.1)
    one = T.constant(np.array(1.0))
    total, report = obj.combine(w, depth=one, future=one, flow=one, act_arm=one)
    assert float(total.data) == pytest.approx(1.25)
    assert report.total == pytest.approx(1.25)


def test_combine_zero_weights_is_action_only():
    w = obj.LossWeights(beta=0.0, gamma=0.0, delta=0.0)
    one = T.constant(np.array(1.0))
    arm = T.constant(np.array(0.5))
    total, _ = obj.combine(w, depth=one, future=one, flow=one, act_arm=arm)
    assert float(total.data) == pytest.approx(0.5)


def test_combine_rejects_negative_component():
    with pytest.raises(ValueError):
        obj.combine(obj.LossWeights(), depth=T.constant(np.array(-0.1)))


def test_alpha_weighting_of_gripper():
    w = obj.LossWeights()
    arm = T.constant(np.array(0.0))
    grip = T.constant(np.array(2.0))
    total, _ = obj.combine(w, act_arm=arm, act_gripper=grip)
    assert float(total.data) == pytest.approx(0.02)


def test_flow_weight_linearity():
    """d(total)/d(theta_flow-only) equals delta times d(flow)/d(theta)."""
    rng = np.random.default_rng(2)
    theta = T.param(rng.normal(size=(2, 2, 2, 3)))
    target = rng.normal(size=(2, 2, 2, 3))

    def run(delta):
        with Tape() as tape:
            flow = obj.loss_flow(theta, target, 32, 32)
            total, _ = obj.combine(obj.LossWeights(delta=delta), flow=flow,
                                   act_arm=T.constant(np.array(0.0)))
            tape.backward(total, params=[theta])
        g = theta.node.grad.copy()
        theta.node.grad = None
        return g

    g_half = run(0.5)
    g_one = run(1.0)
    assert np.allclose(g_half, 0.5 * g_one, atol=1e-9)


def test_zero_weight_detaches_decoder_gradients():
    rng = np.random.default_rng(3)
    theta = T.param(rng.normal(size=(1, 2, 2, 3)))
    other = T.param(rng.normal(size=(4,)))
    target = rng.normal(size=(1, 2, 2, 3))
    with Tape() as tape:
        flow = obj.loss_flow(theta, target, 32, 32)
        act = T.mean_all(T.mul(other, other))
        total, _ = obj.combine(obj.LossWeights(delta=0.0), flow=flow, act_arm=act)
        tape.backward(total, params=[theta, other])
    assert np.allclose(theta.node.grad, 0.0)
    assert np.linalg.norm(other.node.grad) > 0


def test_losses_nonnegative_and_zero_iff_equal():
    rng = np.random.default_rng(4)
    x = rng.random((3, 4))
    assert float(obj.loss_depth(T.constant(x), x).data) == 0.0
    y = x.copy()
    y[0, 0] += 0.1
    assert float(obj.loss_depth(T.constant(x), y).data) > 0.0


def test_loss_csv_round_trip(tmp_path):
    path = tmp_path / "loss.csv"
    csv_log = obj.LossCsv(path)
    csv_log.write(obj.LossReport(step=0, depth=1.0, total=2.0))
    csv_log.close()
    lines = path.read_text().strip().splitlines()
    assert lines[0].split(",") == list(obj.LossReport.CSV_FIELDS)
    assert lines[1].startswith("0,1.0")
