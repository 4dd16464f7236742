"""Central finite-difference gradient checking in float64 shadow mode.

The numeric side never touches the analytic backward pass: it re-runs the
forward function with perturbed inputs and differences the scalar output.
Full modules are too large to difference exhaustively, so a seeded random
subset of coordinates is checked per tensor.
"""

from __future__ import annotations

import contextlib

import numpy as np

from . import tensor as T
from .tensor import Tape, Tensor


def relative_error(a, b):
    return abs(a - b) / max(1.0, abs(a), abs(b))


def check_function(fn, arrays, rng, coords_per_input=8, step=1e-3, rtol=1e-4):
    """Check d(fn)/d(inputs) for fn(list-of-Tensors) -> scalar Tensor.

    `arrays` are float64 numpy arrays; a random subset of coordinates of each
    is verified against central differences. Returns the max relative error.
    Raises AssertionError on failure so pytest output names the coordinate.
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]  # private copies
    leaves = [T.param(a.copy(), dtype=np.float64) for a in arrays]
    with Tape() as tape:
        loss = fn(leaves)
        if loss.size != 1:
            raise ValueError("gradcheck target must be scalar")
        tape.backward(loss, params=leaves)
    worst = 0.0
    for i, arr in enumerate(arrays):
        grad = leaves[i].node.grad
        n = arr.size
        k = min(coords_per_input, n)
        coords = rng.choice(n, size=k, replace=False)
        flat = arr.reshape(-1)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + step
            up = float(fn([Tensor(a.copy()) for a in arrays]).data)
            flat[c] = orig - step
            dn = float(fn([Tensor(a.copy()) for a in arrays]).data)
            flat[c] = orig
            numeric = (up - dn) / (2.0 * step)
            analytic = float(grad.reshape(-1)[c])
            err = relative_error(analytic, numeric)
            worst = max(worst, err)
            assert err <= rtol, (
                f"gradcheck failed: input {i} coord {c}: analytic {analytic:.8g} "
                f"vs numeric {numeric:.8g} (rel err {err:.3g})"
            )
    return worst


@contextlib.contextmanager
def shadow_float64(module):
    """Temporarily cast a module's parameters to float64."""
    saved = {k: p.data for k, p in module.named_params().items()}
    module.cast_(np.float64)
    try:
        yield module
    finally:
        for k, p in module.named_params().items():
            p.data = saved[k]


def check_module(module, forward_fn, input_arrays, rng, coords_per_param=4,
                 coords_per_input=4, step=1e-3, rtol=1e-4, max_params=None):
    """Finite-difference check of a module's parameters and inputs.

    forward_fn(module, list-of-input-Tensors) -> scalar Tensor. Runs in
    float64 shadow mode; checks a random coordinate subset of every
    parameter tensor (or a random subset of parameters if max_params set).
    """
    input_arrays = [np.asarray(a, dtype=np.float64) for a in input_arrays]
    with shadow_float64(module):
        named = module.named_params()
        names = sorted(named.keys())
        if max_params is not None and len(names) > max_params:
            picked = rng.choice(len(names), size=max_params, replace=False)
            names = [names[j] for j in sorted(picked)]

        inputs = [T.param(a.copy(), dtype=np.float64) for a in input_arrays]
        with Tape() as tape:
            loss = forward_fn(module, inputs)
            tape.backward(loss, params=list(named.values()) + inputs)
        base_grads = {k: named[k].node.grad.copy() for k in names}
        input_grads = [t.node.grad.copy() for t in inputs]

        def eval_loss():
            ts = [Tensor(a.copy()) for a in input_arrays]
            return float(forward_fn(module, ts).data)

        worst = 0.0
        for k in names:
            p = named[k]
            flat = p.data.reshape(-1)
            count = min(coords_per_param, flat.size)
            coords = rng.choice(flat.size, size=count, replace=False)
            for c in coords:
                orig = flat[c]
                flat[c] = orig + step
                up = eval_loss()
                flat[c] = orig - step
                dn = eval_loss()
                flat[c] = orig
                numeric = (up - dn) / (2.0 * step)
                analytic = float(base_grads[k].reshape(-1)[c])
                err = relative_error(analytic, numeric)
                worst = max(worst, err)
                assert err <= rtol, (
                    f"module gradcheck failed at {k}[{c}]: analytic {analytic:.8g} "
                    f"vs numeric {numeric:.8g} (rel err {err:.3g})"
                )
        for i, arr in enumerate(input_arrays):
            flat = arr.reshape(-1)
            count = min(coords_per_input, flat.size)
            coords = rng.choice(flat.size, size=count, replace=False)
            for c in coords:
                orig = flat[c]
                flat[c] = orig + step
                up = eval_loss()
                flat[c] = orig - step
                dn = eval_loss()
                flat[c] = orig
                numeric = (up - dn) / (2.0 * step)
                analytic = float(input_grads[i].reshape(-1)[c])
                err = relative_error(analytic, numeric)
                worst = max(worst, err)
                assert err <= rtol, (
                    f"module gradcheck failed at input {i}[{c}]: analytic {analytic:.8g} "
                    f"vs numeric {numeric:.8g} (rel err {err:.3g})"
                )
    return worst
