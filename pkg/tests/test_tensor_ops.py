"""Tensor core: op semantics, gradients vs central differences, determinism."""

import numpy as np
import pytest

from f3d import tensor as T
from f3d.gradcheck import check_function
from f3d.tensor import Tape, Tensor


def test_matmul_identity():
    x = np.arange(4.0).reshape(2, 2)
    out = T.matmul(T.constant(np.eye(2)), T.constant(x))
    assert np.allclose(out.data, x)


def test_matmul_hand_value():
    out = T.matmul(T.constant([[1.0, 2.0]]), T.constant([[3.0], [4.0]]))
    assert out.data.shape == (1, 1)
    assert out.data[0, 0] == pytest.approx(11.0)


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(T.ShapeError) as e:
        T.matmul(T.constant(np.zeros((2, 3))), T.constant(np.zeros((4, 2))))
    assert "(2, 3)" in str(e.value) and "(4, 2)" in str(e.value)


def test_matmul_gradcheck(rng):
    def f(ts):
        return T.mean_all(T.matmul(ts[0], ts[1]))
    err = check_function(f, [rng.normal(size=(3, 4)), rng.normal(size=(4, 2))], rng,
                         coords_per_input=12)
    assert err <= 1e-4


def test_softmax_uniform_and_forced_mask():
    out = T.softmax_rows(T.constant([0.0, 0.0, 0.0]))
    assert np.allclose(out.data, [1 / 3] * 3)
    out = T.softmax_rows(T.constant([[5.0, 5.0]]), np.array([[True, False]]))
    assert out.data[0, 0] == 1.0 and out.data[0, 1] == 0.0


def test_softmax_row_sums(rng):
    x = T.constant(rng.normal(size=(4, 6)))
    out = T.softmax_rows(x)
    assert np.abs(out.data.sum(axis=-1) - 1.0).max() <= 1e-6


def test_softmax_all_masked_row_errors():
    with pytest.raises(ValueError):
        T.softmax_rows(T.constant([[1.0, 2.0]]), np.array([[False, False]]))


def test_softmax_shift_invariance(rng):
    x = rng.integers(-4, 4, size=(3, 5)).astype(np.float32)
    mask = rng.random((3, 5)) > 0.3
    mask[:, 0] = True
    a = T.softmax_rows(T.constant(x), mask)
    b = T.softmax_rows(T.constant(x + 2.0), mask)
    assert np.array_equal(a.data, b.data)


def test_backward_sum_gives_ones():
    x = T.param(np.random.default_rng(1).normal(size=(3, 4)))
    with Tape() as tape:
        loss = T.sum_all(x)
        tape.backward(loss)
    assert np.array_equal(x.node.grad, np.ones((3, 4)))


def test_backward_mse_self_is_zero():
    x = T.param(np.random.default_rng(2).normal(size=(5,)))
    with Tape() as tape:
        loss = T.mse(x, x.data.copy())
        tape.backward(loss)
    assert np.allclose(x.node.grad, 0.0)


def test_backward_requires_scalar():
    x = T.param(np.ones(3))
    with Tape() as tape:
        y = T.mul(x, x)
        with pytest.raises(ValueError):
            tape.backward(y)


def test_backward_requires_taped_loss():
    x = T.constant(np.ones(1))
    with Tape() as tape:
        with pytest.raises(ValueError):
            tape.backward(x)


def test_two_layer_mlp_matches_finite_differences(rng):
    w1 = rng.normal(size=(4, 8))
    b1 = rng.normal(size=(8,))
    w2 = rng.normal(size=(8, 1))
    x = rng.normal(size=(3, 4))

    def f(ts):
        h = T.gelu(T.linear(ts[0], ts[1], ts[2]))
        return T.mean_all(T.linear(h, ts[3], None))

    err = check_function(f, [x, w1, b1, w2], rng, coords_per_input=8)
    assert err <= 1e-4


@pytest.mark.parametrize("op_name", ["add", "sub", "mul", "gelu", "exp", "sigmoid",
                                     "layernorm", "softmax", "take", "slice", "concat",
                                     "transpose", "mean", "smooth_l1", "bce", "kl", "mse",
                                     "linear"])
def test_each_op_gradchecks(op_name, rng):
    a = rng.normal(size=(3, 5))
    b = rng.normal(size=(3, 5))

    builders = {
        "add": lambda ts: T.mean_all(T.add(ts[0], ts[1])),
        "sub": lambda ts: T.mean_all(T.sub(ts[0], ts[1])),
        "mul": lambda ts: T.mean_all(T.mul(ts[0], ts[1])),
        "gelu": lambda ts: T.mean_all(T.gelu(ts[0])),
        "exp": lambda ts: T.mean_all(T.exp(T.scale(ts[0], 0.3))),
        "sigmoid": lambda ts: T.mean_all(T.sigmoid(ts[0])),
        "layernorm": lambda ts: T.mean_all(T.mul(T.layernorm(ts[0], ts[2], ts[3]), ts[1])),
        "softmax": lambda ts: T.mean_all(T.mul(T.softmax_rows(ts[0]), ts[1])),
        "take": lambda ts: T.mean_all(T.take(ts[0], np.array([2, 0, 2]), axis=0)),
        "slice": lambda ts: T.mean_all(T.slice_axis(ts[0], 1, 1, 4)),
        "concat": lambda ts: T.mean_all(T.mul(T.concat([ts[0], ts[1]], axis=1),
                                              T.concat([ts[1], ts[0]], axis=1))),
        "transpose": lambda ts: T.mean_all(T.mul(T.transpose(ts[0], (1, 0)),
                                                 T.transpose(ts[1], (1, 0)))),
        "mean": lambda ts: T.mean_all(T.mul(ts[0], ts[0])),
        "smooth_l1": lambda ts: T.smooth_l1(ts[0], 2.0 * b.copy()),
        "mse": lambda ts: T.mse(ts[0], b.copy()),
        "bce": lambda ts: T.bce_logits(ts[0], (b.copy() > 0).astype(float)),
        "kl": lambda ts: T.kl_normal(ts[0], ts[1]),
        "linear": lambda ts: T.mean_all(T.linear(ts[0], T.transpose(ts[1], (1, 0)), None)),
    }
    arrays = [a] if op_name in ("smooth_l1", "mse", "bce") else [a, b]
    if op_name == "layernorm":
        arrays = [a, b, rng.normal(size=(5,)), rng.normal(size=(5,))]
    err = check_function(builders[op_name], arrays, rng, coords_per_input=6)
    assert err <= 1e-4


def test_broadcast_rules():
    big = T.constant(np.zeros((2, 3, 4)))
    bias = T.constant(np.ones(4))
    assert T.add(big, bias).shape == (2, 3, 4)
    with pytest.raises(T.ShapeError):
        T.add(T.constant(np.zeros((2, 1, 4))), big)  # interior broadcast rejected


def test_forward_determinism(rng):
    x = rng.normal(size=(16, 16)).astype(np.float32)
    w = rng.normal(size=(16, 16)).astype(np.float32)
    a = T.matmul(T.constant(x), T.constant(w)).data
    b = T.matmul(T.constant(x.copy()), T.constant(w.copy())).data
    assert np.array_equal(a, b)


def test_tape_topological_order(rng):
    x = T.param(rng.normal(size=(3,)))
    with Tape() as tape:
        y = T.mul(x, x)
        z = T.add(y, x)
        loss = T.sum_all(T.mul(z, y))
        tape.backward(loss)
    for node in tape.nodes:
        for parent in node.parents:
            if parent is not None and parent.index is not None:
                assert parent.index < node.index


def test_grad_shapes_match_values(rng):
    x = T.param(rng.normal(size=(4, 3)))
    w = T.param(rng.normal(size=(3, 2)))
    with Tape() as tape:
        loss = T.mean_all(T.gelu(T.matmul(x, w)))
        tape.backward(loss, params=[x, w])
    assert x.node.grad.shape == x.shape and w.node.grad.shape == w.shape


def test_unused_param_gets_zero_grad(rng):
    x = T.param(rng.normal(size=(3,)))
    unused = T.param(rng.normal(size=(2,)))
    with Tape() as tape:
        loss = T.sum_all(x)
        tape.backward(loss, params=[x, unused])
    assert np.array_equal(unused.node.grad, np.zeros(2))


def test_mixed_dtype_rejected():
    a = T.constant(np.zeros(3), dtype=np.float32)
    b = T.constant(np.zeros(3), dtype=np.float64)
    with pytest.raises(TypeError):
        T.add(a, b)
