"""Per-timestep token layout and the structured causal attention mask.

Block order inside a timestep: LANG(1), MAIN(1+r), WRIST(1+r), PROPRIO(1),
FLOWQ(l), FUTQ_MAIN(1+r), FUTQ_WRIST(1+r), ACTQ(1). Groups can be dropped
for pretraining (no wrist/action) or benchmarking (no queries at all).

Visibility rules (row may attend col, always requiring t_col <= t_row):
  input groups   -> their own group at any earlier-or-equal timestep
  flow/future qs -> LANG/MAIN/WRIST at any t_col <= t_row, own group at t_col == t_row
  action query   -> the above plus PROPRIO history and FLOWQ at the current step
No token other than a query's own group ever attends to query columns, so
future/action queries are pure sinks and flow queries feed only the action
query; mask construction is cached per layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GROUPS = ("lang", "main", "wrist", "proprio", "flowq", "futq_main", "futq_wrist", "actq")
_INPUTS = ("lang", "main", "wrist", "proprio")
_VISION_CTX = ("lang", "main", "wrist")

# group -> set of visible column groups at strictly earlier timesteps
_HIST = {
    "lang": ("lang",),
    "main": ("main",),
    "wrist": ("wrist",),
    "proprio": ("proprio",),
    "flowq": _VISION_CTX,
    "futq_main": _VISION_CTX,
    "futq_wrist": _VISION_CTX,
    "actq": _VISION_CTX + ("proprio",),
}
# group -> visible column groups at the same timestep
_SAME = {
    "lang": ("lang",),
    "main": ("main",),
    "wrist": ("wrist",),
    "proprio": ("proprio",),
    "flowq": _VISION_CTX + ("flowq",),
    "futq_main": _VISION_CTX + ("futq_main",),
    "futq_wrist": _VISION_CTX + ("futq_wrist",),
    "actq": _VISION_CTX + ("proprio", "flowq", "actq"),
}


@dataclass(frozen=True)
class TokenLayout:
    T: int
    r: int
    l: int
    include_wrist: bool = True
    include_flowq: bool = True
    include_futq_main: bool = True
    include_futq_wrist: bool = True
    include_actq: bool = True

    def group_sizes(self):
        vis = 1 + self.r
        sizes = {"lang": 1, "main": vis, "proprio": 1}
        if self.include_wrist:
            sizes["wrist"] = vis
        if self.include_flowq:
            sizes["flowq"] = self.l
        if self.include_futq_main:
            sizes["futq_main"] = vis
        if self.include_futq_wrist and self.include_wrist:
            sizes["futq_wrist"] = vis
        if self.include_actq:
            sizes["actq"] = 1
        return [(g, sizes[g]) for g in GROUPS if g in sizes]

    @property
    def block_len(self):
        return sum(s for _, s in self.group_sizes())

    @property
    def seq_len(self):
        return self.T * self.block_len

    def group_offset(self, group):
        off = 0
        for g, s in self.group_sizes():
            if g == group:
                return off, off + s
            off += s
        raise KeyError(f"group {group!r} not in layout")

    def positions(self, group, t):
        """Absolute sequence positions of a group at timestep t."""
        lo, hi = self.group_offset(group)
        base = t * self.block_len
        return np.arange(base + lo, base + hi)

    def token_tables(self):
        """(time, group_index) per absolute position; group_index into GROUPS."""
        times = np.repeat(np.arange(self.T), self.block_len)
        gidx = np.empty(self.block_len, dtype=np.int64)
        for g, s in self.group_sizes():
            lo, hi = self.group_offset(g)
            gidx[lo:hi] = GROUPS.index(g)
        return times, np.tile(gidx, self.T)


def full_layout(T, r, l):
    return TokenLayout(T=T, r=r, l=l)


def pretrain_layout(T, r, l):
    """Cross-embodiment pretraining: wrist and action dropped from the
    sequence; the proprio slot stays but is fed a learned placeholder."""
    return TokenLayout(T=T, r=r, l=l, include_wrist=False, include_futq_wrist=False,
                       include_actq=False)


def stripped_layout(T, r, l):
    """No auxiliary query tokens at all (latency reference)."""
    return TokenLayout(T=T, r=r, l=l, include_flowq=False, include_futq_main=False,
                       include_futq_wrist=False)


_MASK_CACHE = {}


def build_mask(T, r, l):
    """Boolean (T*B, T*B) visibility matrix for the full layout."""
    return build_layout_mask(full_layout(T, r, l))


def build_layout_mask(layout: TokenLayout):
    key = layout
    cached = _MASK_CACHE.get(key)
    if cached is not None:
        return cached
    n_groups = len(GROUPS)
    hist = np.zeros((n_groups, n_groups), dtype=bool)
    same = np.zeros((n_groups, n_groups), dtype=bool)
    for g, cols in _HIST.items():
        for c in cols:
            hist[GROUPS.index(g), GROUPS.index(c)] = True
    for g, cols in _SAME.items():
        for c in cols:
            same[GROUPS.index(g), GROUPS.index(c)] = True

    times, gidx = layout.token_tables()
    t_r = times[:, None]
    t_c = times[None, :]
    g_r = gidx[:, None]
    g_c = gidx[None, :]
    mask = ((t_c < t_r) & hist[g_r, g_c]) | ((t_c == t_r) & same[g_r, g_c])
    mask.flags.writeable = False
    _MASK_CACHE[key] = mask
    return mask


def write_pgm(path, mask):
    """Dump a boolean mask as a binary PGM (0/255) for visual diffing."""
    mask = np.asarray(mask)
    h, w = mask.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write((mask.astype(np.uint8) * 255).tobytes())
