"""Policy model: encoders, token layout + mask, backbone, decoders."""

from .layout import (GROUPS, TokenLayout, build_layout_mask, build_mask, full_layout,
                     pretrain_layout, stripped_layout, write_pgm)
from .encoders import ImageEncoder, LanguageEncoder, ProprioEncoder
from .backbone import Backbone
from .heads import ActionHead, FlowDecoder, PatchDecoder
from .policy import ModelConfig, PolicyModel

__all__ = [
    "ActionHead", "Backbone", "FlowDecoder", "GROUPS", "ImageEncoder", "LanguageEncoder",
    "ModelConfig", "PatchDecoder", "PolicyModel", "ProprioEncoder", "TokenLayout",
    "build_layout_mask", "build_mask", "full_layout", "pretrain_layout", "stripped_layout",
    "write_pgm",
]
