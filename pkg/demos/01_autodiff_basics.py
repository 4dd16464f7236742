"""A tour of the tensor core: tapes, gradients, and the finite-difference
oracle that keeps the analytic backward pass honest.

Run:  python demos/01_autodiff_basics.py
"""

import numpy as np

from f3d import tensor as T
from f3d.gradcheck import check_function
from f3d.tensor import Tape

rng = np.random.default_rng(0)

# --- a tiny two-layer MLP, differentiated end to end --------------------
x = T.constant(rng.normal(size=(4, 3)).astype(np.float32))
w1 = T.param(rng.normal(0, 0.5, size=(3, 8)).astype(np.float32))
b1 = T.param(np.zeros(8, dtype=np.float32))
w2 = T.param(rng.normal(0, 0.5, size=(8, 1)).astype(np.float32))

with Tape() as tape:
    hidden = T.gelu(T.linear(x, w1, b1))
    loss = T.mean_all(T.linear(hidden, w2, None))
    tape.backward(loss, params=[w1, b1, w2])

print("loss:", float(loss.data))
print("grad norms:", {n: round(float(np.linalg.norm(p.node.grad)), 4)
                      for n, p in [("w1", w1), ("b1", b1), ("w2", w2)]})

# --- masked softmax: blocked keys are exactly zero ----------------------
logits = T.constant(np.array([[2.0, 2.0, -1.0]], dtype=np.float32))
mask = np.array([[True, False, True]])
print("masked softmax:", T.softmax_rows(logits, mask).data)

# --- the independent oracle: central finite differences in float64 ------
def f(ts):
    h = T.gelu(T.matmul(ts[0], ts[1]))
    return T.mean_all(T.mul(h, h))

worst = check_function(f, [rng.normal(size=(3, 4)), rng.normal(size=(4, 5))], rng,
                       coords_per_input=10)
print(f"worst relative error vs finite differences: {worst:.2e} (tolerance 1e-4)")
