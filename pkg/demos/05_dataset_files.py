"""The on-disk dataset format: write, read back bitwise, and look at the
training-sample machinery (windows, future targets, 1:3 point rebalance).

Run:  python demos/05_dataset_files.py
"""

from pathlib import Path

import numpy as np

from f3d import data, world

OUT = Path("runs/demo_data")
OUT.mkdir(parents=True, exist_ok=True)

episodes = [world.expert_demo("lift", "red", seed=s) for s in range(3)]
path = OUT / "demos.f3de"
data.write_dataset(path, episodes)
print(f"wrote {len(episodes)} episodes: {path} ({path.stat().st_size} bytes) "
      f"+ sidecar {path.with_suffix('.f3ds').stat().st_size} bytes")

back = data.read_dataset(path)
bitwise = all(np.array_equal(a.rgb_main, b.rgb_main) and np.array_equal(a.actions, b.actions)
              for a, b in zip(episodes, back))
print("round trip bitwise:", bitwise, "| tracks available:", back[0].tracks_available)

# a training sample from the middle of an episode
ep = back[0]
rng = np.random.default_rng(0)
t = len(ep) // 2
sample = data.make_train_sample(ep, t, T=10, S=3, K=5, L=6, P=64, rng=rng)
print("observation window:", sample.rgb_main.shape, "| action chunk:", sample.actions.shape)
print("flow targets:", sample.flow.shape, "starting at", sample.points[:3].tolist(), "...")

moving = world.classify_moving(ep, t, sample.points, 6)
print(f"moving starts: {int(moving.sum())}/64 (rebalanced toward 1:3 when the frame allows)")

# inference-time points are just the uniform grid
print("inference grid (P=16):", data.grid_pixels(16, 32, 32)[:4].tolist(), "...")
