"""Layer zoo, Adam, and the checkpoint container."""

import numpy as np
import pytest

from f3d import checkpoint as ckpt
from f3d import nn
from f3d import tensor as T
from f3d.optim import Adam
from f3d.tensor import Tape


def test_named_params_stable_and_nested(rng):
    blk = nn.TransformerBlock(np.random.default_rng(0), d=8, heads=2)
    names = list(blk.named_params())
    assert "attn.wq.w" in names and "mlp.fc1.b" in names
    assert names == list(nn.TransformerBlock(np.random.default_rng(0), d=8, heads=2).named_params())


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    named = {"a.w": rng.normal(size=(3, 4)).astype(np.float32),
             "b": rng.normal(size=(7,)).astype(np.float32),
             "scalar": np.array([2.5], dtype=np.float32)}
    path = tmp_path / "w.f3dc"
    ckpt.save(path, named)
    back = ckpt.load(path)
    assert set(back) == set(named)
    for k in named:
        assert np.array_equal(back[k], named[k])


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.f3dc"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ckpt.CheckpointError) as e:
        ckpt.load(path)
    assert e.value.offset == 0


def test_checkpoint_version_error(tmp_path):
    path = tmp_path / "v9.f3dc"
    import struct
    path.write_bytes(ckpt.MAGIC + struct.pack("<II", 9, 0))
    with pytest.raises(ckpt.CheckpointError) as e:
        ckpt.load(path)
    assert "version 9" in str(e.value)


def test_checkpoint_truncation_reports_offset(tmp_path):
    named = {"w": np.ones((4, 4), dtype=np.float32)}
    path = tmp_path / "w.f3dc"
    ckpt.save(path, named)
    blob = path.read_bytes()
    path.write_bytes(blob[:len(blob) - 10])
    with pytest.raises(ckpt.CheckpointError) as e:
        ckpt.load(path)
    assert e.value.offset is not None and "truncated" in str(e.value)


def test_model_save_load_round_trip(tmp_path):
    m1 = nn.TransformerBlock(np.random.default_rng(1), d=8, heads=2)
    m2 = nn.TransformerBlock(np.random.default_rng(2), d=8, heads=2)
    path = tmp_path / "m.f3dc"
    ckpt.save_model(path, m1)
    ckpt.load_model(path, m2)
    for (k1, p1), (k2, p2) in zip(m1.named_params().items(), m2.named_params().items()):
        assert k1 == k2 and np.array_equal(p1.data, p2.data)


def test_adam_step_and_state_round_trip(tmp_path, rng):
    lin = nn.Linear(np.random.default_rng(3), 4, 2)
    params = lin.named_params()
    opt = Adam(params, lr=1e-2)
    x = rng.normal(size=(8, 4))
    for _ in range(3):
        opt.zero_grad()
        with Tape() as tape:
            loss = T.mse(lin(T.constant(x)), np.zeros((8, 2)))
            tape.backward(loss, params=params.values())
        opt.step()
    state = opt.state_arrays()
    opt2 = Adam(lin.named_params(), lr=1e-2)
    assert opt2.load_state_arrays(state)
    assert opt2.t == opt.t
    for k in opt.m:
        assert np.allclose(opt2.m[k], opt.m[k])


def test_adam_deterministic(rng):
    def run():
        lin = nn.Linear(np.random.default_rng(3), 4, 2)
        params = lin.named_params()
        opt = Adam(params, lr=1e-2)
        x = np.random.default_rng(7).normal(size=(8, 4))
        for _ in range(5):
            opt.zero_grad()
            with Tape() as tape:
                loss = T.mse(lin(T.constant(x)), np.zeros((8, 2)))
                tape.backward(loss, params=params.values())
            opt.step()
        return lin.w.data.copy()
    assert np.array_equal(run(), run())
