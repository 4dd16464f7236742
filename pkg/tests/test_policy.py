"""Full policy assembly: shapes, sink/causality invariants, mode contracts."""

import numpy as np
import pytest

from f3d import data
from f3d.model import ModelConfig, PolicyModel, full_layout
from f3d.tensor import ShapeError


@pytest.fixture(scope="module")
def tiny():
    cfg = ModelConfig(d=32, heads=2, enc_layers=1, backbone_layers=1, dec_layers=1,
                      r=2, l=2, T=3, K=5, L=6, P=16, z_dim=4)
    return cfg, PolicyModel(cfg, seed=0)


@pytest.fixture(scope="module")
def tiny_inputs(tiny, lift_episode):
    cfg, _ = tiny
    rng = np.random.default_rng(0)
    batch = data.draw_batch([lift_episode], 2, T=cfg.T, S=cfg.S, K=cfg.K, L=cfg.L,
                            P=cfg.P, rng=rng)
    inputs = {"language_id": batch["language_id"], "rgb_main": batch["rgb_main"],
              "rgb_wrist": batch["rgb_wrist"], "proprio": batch["proprio"],
              "points": batch["points"]}
    return inputs, batch


def test_default_sequence_shape():
    layout = full_layout(10, 4, 4)
    assert layout.block_len == 27
    assert layout.seq_len == 270  # 10 * (3 + 4 + 4*(1+4))


def test_assembled_shape(tiny, tiny_inputs):
    cfg, model = tiny
    inputs, _ = tiny_inputs
    layout = cfg.layout("full")
    seq = model.assemble(inputs, layout)
    assert seq.shape == (2, layout.seq_len, cfg.d)


def test_identical_timesteps_differ_only_by_temporal_embedding(tiny, tiny_inputs):
    cfg, model = tiny
    inputs, _ = tiny_inputs
    frozen = {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in inputs.items()}
    for t in range(1, cfg.T):
        frozen["rgb_main"][:, t] = frozen["rgb_main"][:, 0]
        frozen["rgb_wrist"][:, t] = frozen["rgb_wrist"][:, 0]
        frozen["proprio"][:, t] = frozen["proprio"][:, 0]
    layout = cfg.layout("full")
    seq = model.assemble(frozen, layout).data.reshape(2, cfg.T, layout.block_len, cfg.d)
    temporal = model.temporal.data
    for t in range(1, cfg.T):
        delta = seq[:, t] - seq[:, 0]
        expected = temporal[t] - temporal[0]
        assert np.allclose(delta, expected, atol=1e-6)


def test_zero_points_contribute_only_bias(tiny, tiny_inputs):
    cfg, model = tiny
    inputs, _ = tiny_inputs
    zeroed = dict(inputs)
    zeroed["points"] = np.zeros_like(inputs["points"])
    layout = cfg.layout("full")
    seq = model.assemble(zeroed, layout).data.reshape(2, cfg.T, layout.block_len, cfg.d)
    lo, hi = layout.group_offset("flowq")
    flow_block = seq[:, 0, lo:hi, :]
    expected = (model.point_enc.b.data + model.flow_queries.data + model.temporal.data[0])
    assert np.allclose(flow_block, expected[None], atol=1e-6)


def test_point_count_mismatch_errors(tiny, tiny_inputs):
    cfg, model = tiny
    inputs, _ = tiny_inputs
    bad = dict(inputs)
    bad["points"] = inputs["points"][:, : cfg.P // 2]
    with pytest.raises(ShapeError):
        model.assemble(bad, cfg.layout("full"))


def test_futq_inputs_are_sinks_exactly(tiny, tiny_inputs):
    """Perturbing the future-query vectors leaves every input token's hidden
    state bit-identical."""
    cfg, model = tiny
    inputs, _ = tiny_inputs
    layout = cfg.layout("full")
    base = model.backbone_states(inputs, layout).data.copy()
    saved = model.futq_main.data.copy()
    model.futq_main.data = saved + 0.7
    try:
        pert = model.backbone_states(inputs, layout).data
    finally:
        model.futq_main.data = saved
    input_positions = np.concatenate(
        [layout.positions(g, t) for g in ("lang", "main", "wrist", "proprio", "flowq")
         for t in range(cfg.T)])
    futq_positions = np.concatenate([layout.positions("futq_main", t) for t in range(cfg.T)])
    assert np.array_equal(base[:, input_positions], pert[:, input_positions])
    assert not np.array_equal(base[:, futq_positions], pert[:, futq_positions])


def test_causality_perturbation(tiny, tiny_inputs):
    """Changing the last frame leaves all earlier timesteps' states unchanged."""
    cfg, model = tiny
    inputs, _ = tiny_inputs
    layout = cfg.layout("full")
    base = model.backbone_states(inputs, layout).data.copy()
    pert_in = {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in inputs.items()}
    pert_in["rgb_main"][:, -1] += 0.05
    pert = model.backbone_states(pert_in, layout).data
    early = np.arange((cfg.T - 1) * layout.block_len)
    assert np.array_equal(base[:, early], pert[:, early])
    assert not np.array_equal(base, pert)


def test_inference_path_identical_with_aux_detached(tiny, tiny_inputs):
    cfg, model = tiny
    inputs, _ = tiny_inputs
    a, _ = model.predict_actions(inputs, with_aux=False)
    b, aux = model.predict_actions(inputs, with_aux=True)
    assert np.array_equal(a, b)
    assert a.shape == (2, cfg.K, 7)
    assert set(aux) >= {"depth_main", "future_rgb_main", "flow"}


def test_pretrain_mode_ignores_wrist_frames(tiny, tiny_inputs):
    cfg, model = tiny
    inputs, batch = tiny_inputs
    pre = {"language_id": inputs["language_id"], "rgb_main": inputs["rgb_main"],
           "rgb_wrist": None, "proprio": None, "points": inputs["points"]}
    out1 = model.forward_train(pre, mode="pretrain", heads=("depth", "future", "flow"))
    pre2 = dict(pre)
    pre2["rgb_wrist"] = np.zeros_like(inputs["rgb_wrist"])  # present but must be unused
    out2 = model.forward_train(pre2, mode="pretrain", heads=("depth", "future", "flow"))
    for k in ("depth_main", "future_rgb_main", "flow"):
        assert np.array_equal(out1[k].data, out2[k].data)
    assert "depth_wrist" not in out1


def test_pretrain_mode_rejects_action_head(tiny, tiny_inputs):
    cfg, model = tiny
    inputs, batch = tiny_inputs
    pre = {"language_id": inputs["language_id"], "rgb_main": inputs["rgb_main"],
           "rgb_wrist": None, "proprio": None, "points": inputs["points"]}
    with pytest.raises(ValueError):
        model.forward_train(pre, mode="pretrain", heads=("depth", "action"),
                            gt_actions=batch["actions"], rng=np.random.default_rng(0))


def test_history_length_mismatch_errors(tiny, tiny_inputs):
    cfg, model = tiny
    inputs, _ = tiny_inputs
    bad = dict(inputs)
    bad["rgb_main"] = inputs["rgb_main"][:, :2]
    with pytest.raises(ShapeError):
        model.assemble(bad, cfg.layout("full"))
