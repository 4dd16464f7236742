"""Full policy assembly: encoders -> token sequence -> masked backbone ->
decoders. One forward pass updates every timestep's hidden states; heads
read the final timestep's groups.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import tensor as T
from ..nn import LayerNorm, Linear, Module
from ..world.tasks import VOCAB_SIZE
from .backbone import Backbone
from .encoders import ImageEncoder, LanguageEncoder, ProprioEncoder
from .heads import ActionHead, FlowDecoder, PatchDecoder
from .layout import TokenLayout, build_layout_mask, full_layout, pretrain_layout, stripped_layout


@dataclass
class ModelConfig:
    d: int = 128
    heads: int = 4
    enc_layers: int = 2
    backbone_layers: int = 4
    dec_layers: int = 2
    mlp_ratio: int = 4
    patch: int = 8
    r: int = 4              # resampled vectors per image (vision block is 1+r)
    l: int = 4              # flow query vectors
    z_dim: int = 16
    T: int = 10             # history window
    S: int = 3              # future prediction shift
    K: int = 5              # action chunk length
    L: int = 6              # flow length
    P: int = 64             # tracked points
    H: int = 32
    W: int = 32
    vocab: int = VOCAB_SIZE

    def layout(self, mode="full") -> TokenLayout:
        if mode == "full":
            return full_layout(self.T, self.r, self.l)
        if mode == "pretrain":
            return pretrain_layout(self.T, self.r, self.l)
        if mode == "stripped":
            return stripped_layout(self.T, self.r, self.l)
        raise KeyError(f"unknown layout mode {mode!r}")


def _tile_rows(t, n, axis):
    """Repeat a size-1 axis n times (differentiable)."""
    return T.take(t, np.zeros(n, dtype=np.int64), axis=axis)


class PolicyModel(Module):
    def __init__(self, cfg: ModelConfig, seed=0):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        d, heads = cfg.d, cfg.heads
        self.lang_enc = LanguageEncoder(rng, cfg.vocab, d)
        self.img_enc = ImageEncoder(rng, d, heads, cfg.enc_layers, cfg.patch, cfg.r, cfg.H, cfg.W)
        self.prop_enc = ProprioEncoder(rng, d)
        self.proprio_placeholder = T.param(rng.normal(0, 0.02, size=(d,)).astype(T.FLOAT))
        self.flow_queries = T.param(rng.normal(0, 0.02, size=(cfg.l, d)).astype(T.FLOAT))
        self.futq_main = T.param(rng.normal(0, 0.02, size=(1 + cfg.r, d)).astype(T.FLOAT))
        self.futq_wrist = T.param(rng.normal(0, 0.02, size=(1 + cfg.r, d)).astype(T.FLOAT))
        self.act_query = T.param(rng.normal(0, 0.02, size=(1, d)).astype(T.FLOAT))
        self.point_enc = Linear(rng, 2 * cfg.P, d)
        self.temporal = T.param(rng.normal(0, 0.02, size=(cfg.T, d)).astype(T.FLOAT))
        self.backbone = Backbone(rng, d, heads, cfg.backbone_layers, cfg.mlp_ratio)
        self.ln_f = LayerNorm(d)
        self.depth_dec = PatchDecoder(rng, d, heads, cfg.dec_layers, cfg.patch, cfg.H, cfg.W, 1)
        self.image_dec = PatchDecoder(rng, d, heads, cfg.dec_layers, cfg.patch, cfg.H, cfg.W, 3)
        self.flow_dec = FlowDecoder(rng, d, heads, cfg.dec_layers, cfg.L)
        self.act_head = ActionHead(rng, d, heads, cfg.dec_layers, cfg.K, cfg.z_dim)

    # ------------------------------------------------------------------
    def normalize_points(self, points):
        cfg = self.cfg
        return np.asarray(points) / np.array([cfg.W - 1, cfg.H - 1], dtype=np.float64)

    def _encode_view(self, images, dtype):
        b, t = images.shape[0], images.shape[1]
        flat = T.constant(images.reshape(b * t, *images.shape[2:]), dtype=dtype)
        enc = self.img_enc(flat)
        return enc.reshape((b, t, enc.shape[-2], enc.shape[-1]))

    def assemble(self, inputs, layout: TokenLayout):
        """Build the (B, T*B_block, d) sequence in layout group order."""
        cfg = self.cfg
        b = len(inputs["language_id"])
        t_len = layout.T
        dtype = self.temporal.dtype
        if inputs["rgb_main"].shape[1] != t_len:
            raise T.ShapeError(f"history length {inputs['rgb_main'].shape[1]} != layout T {t_len}")

        groups = {}
        lang = self.lang_enc(inputs["language_id"])            # (B, 1, d)
        groups["lang"] = _tile_rows(lang.reshape((b, 1, 1, cfg.d)), t_len, axis=1)
        groups["main"] = self._encode_view(inputs["rgb_main"], dtype)
        if layout.include_wrist:
            groups["wrist"] = self._encode_view(inputs["rgb_wrist"], dtype)
        if inputs.get("proprio") is not None:
            prop = self.prop_enc(T.constant(inputs["proprio"], dtype=dtype))
            groups["proprio"] = prop.reshape((b, t_len, 1, cfg.d))
        else:
            zeros = T.constant(np.zeros((b, t_len, 1, cfg.d), dtype=dtype))
            groups["proprio"] = T.add(zeros, self.proprio_placeholder)

        if layout.include_flowq:
            points = inputs["points"]
            if points.shape[-2] != cfg.P:
                raise T.ShapeError(f"got {points.shape[-2]} points, model configured for P={cfg.P}")
            pts01 = self.normalize_points(points).reshape(b, 2 * cfg.P).astype(dtype)
            pe = self.point_enc(T.constant(pts01))              # (B, d)
            pe = _tile_rows(pe.reshape((b, 1, cfg.d)), t_len * cfg.l, axis=1)
            pe = pe.reshape((b, t_len, cfg.l, cfg.d))
            groups["flowq"] = T.add(pe, self.flow_queries)
        zeros_vis = np.zeros((b, t_len, 1 + cfg.r, cfg.d), dtype=dtype)
        if layout.include_futq_main:
            groups["futq_main"] = T.add(T.constant(zeros_vis.copy()), self.futq_main)
        if layout.include_futq_wrist and layout.include_wrist:
            groups["futq_wrist"] = T.add(T.constant(zeros_vis.copy()), self.futq_wrist)
        if layout.include_actq:
            groups["actq"] = T.add(T.constant(np.zeros((b, t_len, 1, cfg.d), dtype=dtype)), self.act_query)

        ordered = [groups[name] for name, _ in layout.group_sizes()]
        block = T.concat(ordered, axis=2)                       # (B, T, B_block, d)
        temporal = _tile_rows(self.temporal.reshape((cfg.T, 1, cfg.d)), layout.block_len, axis=1)
        if t_len != cfg.T:
            raise T.ShapeError(f"layout T {t_len} != configured T {cfg.T}")
        block = T.add(block, temporal)
        return block.reshape((b, layout.seq_len, cfg.d))

    def backbone_states(self, inputs, layout):
        seq = self.assemble(inputs, layout)
        mask = build_layout_mask(layout)
        return self.ln_f(self.backbone(seq, mask))

    def _final_group(self, states, layout, group):
        return T.take(states, layout.positions(group, layout.T - 1), axis=1)

    # ------------------------------------------------------------------
    def forward_train(self, inputs, mode="full", heads=("depth", "future", "flow", "action"),
                      gt_actions=None, rng=None):
        """Run the backbone plus the requested heads.

        Returns a dict of prediction tensors. `mode` 'pretrain' drops wrist
        and action groups from the sequence and restricts heads to main-view
        depth/future plus flow.
        """
        cfg = self.cfg
        layout = cfg.layout("pretrain" if mode == "pretrain" else "full")
        if mode == "pretrain" and "action" in heads:
            raise ValueError("action loss is not available in pretrain mode")
        states = self.backbone_states(inputs, layout)
        out = {"_states": states, "_layout": layout}
        b = states.shape[0]

        if "depth" in heads:
            ctx = self._final_group(states, layout, "main")
            out["depth_main"] = self.depth_dec(ctx)
            if layout.include_wrist:
                out["depth_wrist"] = self.depth_dec(self._final_group(states, layout, "wrist"))
        if "future" in heads:
            fq = self._final_group(states, layout, "futq_main")
            out["future_rgb_main"] = self.image_dec(fq)
            out["future_depth_main"] = self.depth_dec(fq)
            if layout.include_futq_wrist and layout.include_wrist:
                fqw = self._final_group(states, layout, "futq_wrist")
                out["future_rgb_wrist"] = self.image_dec(fqw)
                out["future_depth_wrist"] = self.depth_dec(fqw)
        if "flow" in heads:
            fl = self._final_group(states, layout, "flowq")
            pts01 = T.constant(self.normalize_points(inputs["points"]).astype(states.dtype))
            out["flow"] = self.flow_dec(fl, pts01)
        if "action" in heads:
            actq = self._final_group(states, layout, "actq")
            gt = T.constant(np.asarray(gt_actions, dtype=states.dtype))
            mean, logvar = self.act_head.encode(gt)
            latent = self.act_head.reparameterize(mean, logvar, rng)
            out["actions"] = self.act_head.decode(actq, latent)
            out["cvae_mean"] = mean
            out["cvae_logvar"] = logvar
        return out

    # ------------------------------------------------------------------
    def predict_actions(self, inputs, with_aux=False, layout_mode="full"):
        """Inference path: zero CVAE latent, auxiliary decoders only on request.

        Returns (chunk (B, K, 7) float32, aux dict). Actions are identical
        with or without the auxiliary decoders since they are pure consumers
        of backbone states.
        """
        cfg = self.cfg
        layout = cfg.layout(layout_mode)
        states = self.backbone_states(inputs, layout)
        actq = self._final_group(states, layout, "actq")
        zero = T.constant(np.zeros((states.shape[0], cfg.z_dim), dtype=states.dtype))
        chunk = self.act_head.decode(actq, zero)
        aux = {}
        if with_aux:
            aux["depth_main"] = self.depth_dec(self._final_group(states, layout, "main")).data
            if layout.include_wrist:
                aux["depth_wrist"] = self.depth_dec(self._final_group(states, layout, "wrist")).data
            if layout.include_futq_main:
                fq = self._final_group(states, layout, "futq_main")
                aux["future_rgb_main"] = self.image_dec(fq).data
                aux["future_depth_main"] = self.depth_dec(fq).data
            if layout.include_futq_wrist and layout.include_wrist:
                fqw = self._final_group(states, layout, "futq_wrist")
                aux["future_rgb_wrist"] = self.image_dec(fqw).data
                aux["future_depth_wrist"] = self.depth_dec(fqw).data
            if layout.include_flowq:
                pts01 = T.constant(self.normalize_points(inputs["points"]).astype(states.dtype))
                aux["flow"] = self.flow_dec(self._final_group(states, layout, "flowq"), pts01).data
        return chunk.data.astype(np.float32), aux
