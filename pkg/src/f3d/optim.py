"""Adam optimizer with checkpointable state."""

from __future__ import annotations

import numpy as np

from . import tensor as T


class Adam:
    """Adam over a named parameter dict. Moments are keyed by parameter name
    so optimizer state can ride inside the standard checkpoint container."""

    def __init__(self, named_params, lr=1e-4, beta1=0.9, beta2=0.95, eps=1e-8):
        self.params = dict(named_params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def step(self):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = p.node.grad
            if g is None:
                continue
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data = p.data - self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)

    def zero_grad(self):
        T.zero_grads(self.params.values())

    def state_arrays(self):
        """Optimizer state as named float32 arrays for the checkpoint."""
        out = {"opt.step": np.array([float(self.t)], dtype=np.float32)}
        for k in self.params:
            out[f"opt.m.{k}"] = self.m[k].astype(np.float32)
            out[f"opt.v.{k}"] = self.v[k].astype(np.float32)
        return out

    def load_state_arrays(self, named):
        if "opt.step" not in named:
            return False
        self.t = int(named["opt.step"][0])
        for k in self.params:
            mk, vk = f"opt.m.{k}", f"opt.v.{k}"
            if mk in named:
                self.m[k] = np.asarray(named[mk], dtype=np.float32).reshape(self.m[k].shape).copy()
            if vk in named:
                self.v[k] = np.asarray(named[vk], dtype=np.float32).reshape(self.v[k].shape).copy()
        return True
