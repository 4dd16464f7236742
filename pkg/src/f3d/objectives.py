"""Training objectives: per-patch target normalization, the four component
losses, and their weighted combination.

All reductions are means so the loss weights behave the same regardless of
frame size or point count. Default weights: gripper BCE alpha=0.01 inside
the action loss; depth 0.05, future 0.1, flow 0.1 on the auxiliary terms.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields

import numpy as np

from . import tensor as T
from .world.scene import FAR_PLANE

ALPHA_GRIPPER = 0.01
BETA_DEPTH = 0.05
GAMMA_FUTURE = 0.1
DELTA_FLOW = 0.1
KL_WEIGHT = 10.0
NORM_EPS = 1e-6


def pixelwise_normalize(target, patch, channels=None):
    """Per-patch, per-channel standardization of reconstruction targets.

    target: (..., H, W) or (..., H, W, C) numpy array; pass `channels` to
    disambiguate small fixtures. Constant patches map to zeros via the
    epsilon in the denominator.
    """
    arr = np.asarray(target, dtype=np.float64)
    if channels is None:
        channels = arr.ndim >= 3 and arr.shape[-1] in (1, 3, 4)
    if not channels:
        arr = arr[..., None]
        had_channels = False
    else:
        had_channels = True
    *lead, h, w, c = arr.shape
    gh, gw = h // patch, w // patch
    x = arr.reshape(*lead, gh, patch, gw, patch, c)
    mean = x.mean(axis=(-4, -2), keepdims=True)
    std = x.std(axis=(-4, -2), keepdims=True)
    x = (x - mean) / (std + NORM_EPS)
    x = x.reshape(*lead, h, w, c)
    if not had_channels:
        x = x[..., 0]
    return x.astype(np.float32)


def loss_depth(pred, target_norm):
    """MSE against a pixel-wise-normalized depth target (one view)."""
    return T.mse(pred, T.constant(np.asarray(target_norm), dtype=pred.dtype))


def loss_future(pred_rgb, pred_depth, rgb_target_norm, depth_target_norm):
    """Joint MSE over the normalized 4-channel RGB-D stack (one view)."""
    b, h, w = pred_depth.shape[0], pred_depth.shape[1], pred_depth.shape[2]
    pred4 = T.concat([pred_rgb, pred_depth.reshape((b, h, w, 1))], axis=3)
    tgt4 = np.concatenate([np.asarray(rgb_target_norm),
                           np.asarray(depth_target_norm)[..., None]], axis=-1)
    return T.mse(pred4, T.constant(tgt4, dtype=pred_rgb.dtype))


FLOW_SCALE_CHANNELS = 3


def flow_scale(height, width):
    """Channel scaling making pixel coords and metric depth commensurate."""
    return np.array([1.0 / (width - 1), 1.0 / (height - 1), 1.0 / FAR_PLANE])


def loss_flow(pred, target, height, width, dims=3):
    """MSE over scaled flow channels; dims=2 ablates the depth channel."""
    scale = flow_scale(height, width)
    if dims not in (2, 3):
        raise ValueError("flow dims must be 2 or 3")
    if pred.shape[:-1] != np.asarray(target).shape[:-1]:
        raise T.ShapeError(f"flow shapes differ: {pred.shape} vs {np.asarray(target).shape}")
    p = T.mul(pred, T.constant(scale, dtype=pred.dtype))
    tgt = np.asarray(target, dtype=np.float64) * scale
    if dims == 2:
        p = T.slice_axis(p, p.ndim - 1, 0, 2)
        tgt = tgt[..., :2]
    return T.mse(p, T.constant(tgt, dtype=pred.dtype))


def loss_action(pred, target):
    """(arm SmoothL1, gripper BCE-on-logits); target gripper must be 0/1."""
    tgt = np.asarray(target)
    grip_t = tgt[..., 6]
    if not np.all((grip_t == 0) | (grip_t == 1)):
        raise ValueError("action target gripper channel must be exactly 0 or 1")
    nd = pred.ndim
    arm = T.smooth_l1(T.slice_axis(pred, nd - 1, 0, 6),
                      T.constant(tgt[..., :6], dtype=pred.dtype), beta=1.0)
    grip = T.bce_logits(T.slice_axis(pred, nd - 1, 6, 7),
                        T.constant(grip_t[..., None], dtype=pred.dtype))
    return arm, grip


@dataclass
class LossWeights:
    alpha: float = ALPHA_GRIPPER
    beta: float = BETA_DEPTH
    gamma: float = GAMMA_FUTURE
    delta: float = DELTA_FLOW
    kl: float = KL_WEIGHT


@dataclass
class LossReport:
    step: int = 0
    depth: float = 0.0
    future: float = 0.0
    flow: float = 0.0
    act_arm: float = 0.0
    act_gripper: float = 0.0
    kl: float = 0.0
    total: float = 0.0

    CSV_FIELDS = ("step", "depth", "future", "flow", "act_arm", "act_gripper", "kl", "total")

    def row(self, columns=None):
        columns = columns or self.CSV_FIELDS
        return [getattr(self, c) for c in columns]


def combine(weights: LossWeights, depth=None, future=None, flow=None,
            act_arm=None, act_gripper=None, kl=None):
    """Weighted total: beta*depth + gamma*future + delta*flow + (arm + alpha*grip)
    (+ kl_weight * kl). Returns (total tensor, LossReport)."""
    parts = {"depth": depth, "future": future, "flow": flow,
             "act_arm": act_arm, "act_gripper": act_gripper, "kl": kl}
    for name, part in parts.items():
        if part is not None and float(part.data) < 0:
            raise ValueError(f"negative component loss {name}: {float(part.data)}")
    total = None

    def acc(term):
        nonlocal total
        total = term if total is None else T.add(total, term)

    if depth is not None and weights.beta != 0.0:
        acc(T.scale(depth, weights.beta))
    if future is not None and weights.gamma != 0.0:
        acc(T.scale(future, weights.gamma))
    if flow is not None and weights.delta != 0.0:
        acc(T.scale(flow, weights.delta))
    if act_arm is not None:
        acc(act_arm)
    if act_gripper is not None:
        acc(T.scale(act_gripper, weights.alpha))
    if kl is not None and weights.kl != 0.0:
        acc(T.scale(kl, weights.kl))
    if total is None:
        raise ValueError("combine: no loss components supplied")
    report = LossReport(
        depth=float(depth.data) if depth is not None else 0.0,
        future=float(future.data) if future is not None else 0.0,
        flow=float(flow.data) if flow is not None else 0.0,
        act_arm=float(act_arm.data) if act_arm is not None else 0.0,
        act_gripper=float(act_gripper.data) if act_gripper is not None else 0.0,
        kl=float(kl.data) if kl is not None else 0.0,
        total=float(total.data),
    )
    return total, report


class LossCsv:
    """One CSV row per training step."""

    def __init__(self, path, columns=LossReport.CSV_FIELDS):
        self.path = path
        self.columns = list(columns)
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(self.columns)

    def write(self, report: LossReport):
        self._writer.writerow(report.row(self.columns))

    def close(self):
        self._fh.flush()
        self._fh.close()
