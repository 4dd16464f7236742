"""Task templates, language registry, scene sampling and success predicates.

Six templates over four block colors. The two grasp-based templates (lift,
stack) are the depth-precision tasks: block heights vary per episode and
the 1 cm grasp window forces the policy to judge the top-face height,
which monocular RGB only reveals through the flat-shading brightness cue.
The push family moves blocks laterally via the magnet-drag contact and is
deliberately height-insensitive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scene import (Box, COLOR_NAMES, Embodiment, Scene, TABLE_HALF, make_embodiment)

TEMPLATES = ("lift", "stack", "push_left", "push_right", "push_away", "pull_closer")
DEPTH_WISE_TEMPLATES = ("lift", "stack")

PUSH_DIST = 0.08          # required displacement for push-family success
LIFT_CLEARANCE = 0.06     # block bottom must clear this height
STACK_TOL = 0.006

_PHRASES = {
    "lift": "lift the {c} block",
    "stack": "stack the {c} block on the {s} block",
    "push_left": "push the {c} block to the left",
    "push_right": "push the {c} block to the right",
    "push_away": "push the {c} block away",
    "pull_closer": "pull the {c} block closer",
}


def _build_language_table():
    table = []
    for template in TEMPLATES:
        if template == "stack":
            for c in COLOR_NAMES:
                for s in COLOR_NAMES:
                    if c != s:
                        table.append(("stack", c, s, _PHRASES["stack"].format(c=c, s=s)))
        else:
            for c in COLOR_NAMES:
                table.append((template, c, None, _PHRASES[template].format(c=c)))
    return table


LANGUAGE_TABLE = _build_language_table()
VOCAB_SIZE = len(LANGUAGE_TABLE)
_LANG_IDS = {(t, c, s): i for i, (t, c, s, _) in enumerate(LANGUAGE_TABLE)}


def language_id(template, color, support=None):
    return _LANG_IDS[(template, color, support)]


def phrase(lang_id):
    return LANGUAGE_TABLE[lang_id][3]


@dataclass(frozen=True)
class Task:
    template: str
    color: str
    support: str | None
    language_id: int
    baseline: dict = field(default_factory=dict)

    @property
    def tid(self):
        return self.template + "_" + self.color + (f"_on_{self.support}" if self.support else "")

    def success(self, scene: Scene) -> bool:
        idx, obj = find_object(scene, self.color)
        if self.template == "lift":
            return obj.bottom >= LIFT_CLEARANCE and obj.bottom >= self.baseline["bottom"] + 0.03
        if self.template == "stack":
            sidx, sup = find_object(scene, self.support)
            if scene.held == idx:
                return False
            xy_ok = (abs(obj.center[0] - sup.center[0]) < sup.half[0]
                     and abs(obj.center[1] - sup.center[1]) < sup.half[1])
            return xy_ok and abs(obj.bottom - sup.top) <= STACK_TOL
        x0, y0 = self.baseline["xy"]
        if self.template == "push_left":
            return obj.center[0] <= x0 - PUSH_DIST
        if self.template == "push_right":
            return obj.center[0] >= x0 + PUSH_DIST
        if self.template == "push_away":
            return obj.center[1] >= y0 + PUSH_DIST
        if self.template == "pull_closer":
            return obj.center[1] <= y0 - PUSH_DIST
        raise KeyError(self.template)


def find_object(scene: Scene, color):
    for i, obj in enumerate(scene.objects):
        if obj.color == color:
            return i, obj
    raise KeyError(f"no {color} block in scene")


def has_block_on_top(scene: Scene, idx):
    obj = scene.objects[idx]
    for j, other in enumerate(scene.objects):
        if j != idx and abs(other.bottom - obj.top) < 0.01:
            if (abs(other.center[0] - obj.center[0]) < obj.half[0] + other.half[0]
                    and abs(other.center[1] - obj.center[1]) < obj.half[1] + other.half[1]):
                return True
    return False


def make_task(template, color, scene, support=None):
    """Bind a task instance to the scene state at its start."""
    idx, obj = find_object(scene, color)
    baseline = {"xy": (float(obj.center[0]), float(obj.center[1])), "bottom": obj.bottom}
    return Task(template=template, color=color, support=support,
                language_id=language_id(template, color, support), baseline=baseline)


def feasible(template, color, scene, support=None):
    """Can this task be attempted from the current scene state?"""
    try:
        idx, obj = find_object(scene, color)
    except KeyError:
        return False
    if scene.held is not None:
        return False
    if template in ("lift", "stack"):
        if has_block_on_top(scene, idx):
            return False
        if template == "stack":
            if support is None or support == color:
                return False
            try:
                sidx, sup = find_object(scene, support)
            except KeyError:
                return False
            if has_block_on_top(scene, sidx):
                return False
        return True
    x, y = obj.center[0], obj.center[1]
    margin = PUSH_DIST + 0.035
    if template == "push_left":
        return x - margin > -TABLE_HALF[0] + 0.02
    if template == "push_right":
        return x + margin < TABLE_HALF[0] - 0.02
    if template == "push_away":
        return y + margin < TABLE_HALF[1] - 0.02
    if template == "pull_closer":
        return y - margin > -TABLE_HALF[1] + 0.02
    raise KeyError(template)


# ---------------------------------------------------------------------------
# scene sampling

_GENERIC_X = (-0.15, 0.15)
_GENERIC_Y = (-0.03, 0.17)
_TEMPLATE_TARGET_REGION = {
    "lift": (_GENERIC_X, _GENERIC_Y),
    "stack": (_GENERIC_X, _GENERIC_Y),
    "push_left": ((-0.01, 0.15), _GENERIC_Y),
    "push_right": ((-0.15, 0.01), _GENERIC_Y),
    "push_away": (_GENERIC_X, (-0.03, 0.06)),
    "pull_closer": (_GENERIC_X, (0.08, 0.17)),
}
_MIN_SEPARATION = 0.09


def _sample_block(rng, color, region_x, region_y, placed, max_tries=60):
    for _ in range(max_tries):
        x = rng.uniform(*region_x)
        y = rng.uniform(*region_y)
        if all(np.hypot(x - px, y - py) >= _MIN_SEPARATION for px, py in placed):
            half = np.array([rng.uniform(0.016, 0.022), rng.uniform(0.016, 0.022),
                             rng.uniform(0.010, 0.032)])
            return Box(center=np.array([x, y, half[2]]), half=half, color=color)
    raise RuntimeError("could not place a block without overlap")


def sample_scene(rng, template, color, support=None, embodiment="arm_a", n_distractors=1):
    """Sample a solvable initial scene for a task; returns (scene, task)."""
    emb = embodiment if isinstance(embodiment, Embodiment) else make_embodiment(embodiment)
    placed = []
    objects = []
    rx, ry = _TEMPLATE_TARGET_REGION[template]
    target = _sample_block(rng, color, rx, ry, placed)
    placed.append((target.center[0], target.center[1]))
    objects.append(target)
    colors_left = [c for c in COLOR_NAMES if c != color]
    if template == "stack":
        if support is None:
            support = colors_left[int(rng.integers(len(colors_left)))]
        colors_left = [c for c in colors_left if c != support]
        sup = _sample_block(rng, support, *_TEMPLATE_TARGET_REGION["stack"], placed=placed)
        placed.append((sup.center[0], sup.center[1]))
        objects.append(sup)
    for k in range(n_distractors):
        if not colors_left:
            break
        c = colors_left.pop(int(rng.integers(len(colors_left))))
        blk = _sample_block(rng, c, *(_GENERIC_X, _GENERIC_Y), placed=placed)
        placed.append((blk.center[0], blk.center[1]))
        objects.append(blk)

    home = emb.home + np.concatenate([rng.uniform(-0.012, 0.012, size=2), rng.uniform(-0.01, 0.01, size=1)])
    pose = np.concatenate([home, np.zeros(3)])
    scene = Scene(objects=tuple(objects), gripper_pose=pose, gripper_closed=False,
                  held=None, held_offset=None, embodiment=emb)
    task = make_task(template, color, scene, support)
    return scene, task


def sample_chain_scene(rng, embodiment="arm_a"):
    """Persistent scene with one block of every color for chain evaluation."""
    emb = embodiment if isinstance(embodiment, Embodiment) else make_embodiment(embodiment)
    placed = []
    objects = []
    order = list(COLOR_NAMES)
    rng.shuffle(order)
    for c in order:
        blk = _sample_block(rng, c, (-0.14, 0.14), (-0.02, 0.16), placed)
        placed.append((blk.center[0], blk.center[1]))
        objects.append(blk)
    home = emb.home + np.concatenate([rng.uniform(-0.012, 0.012, size=2), rng.uniform(-0.01, 0.01, size=1)])
    pose = np.concatenate([home, np.zeros(3)])
    return Scene(objects=tuple(objects), gripper_pose=pose, gripper_closed=False,
                 held=None, held_offset=None, embodiment=emb)
