"""Dataset file format: round trips, structured errors, versioning."""

import struct

import numpy as np
import pytest

from f3d import data, world


@pytest.fixture(scope="module")
def episodes():
    return [world.expert_demo("lift", "red", seed=1),
            world.expert_demo("push_left", "green", seed=2)]


def test_round_trip_bitwise(tmp_path, episodes):
    path = tmp_path / "ds.f3de"
    data.write_dataset(path, episodes)
    back = data.read_dataset(path)
    assert len(back) == len(episodes)
    for a, b in zip(episodes, back):
        assert a.language_id == b.language_id
        for field in ("rgb_main", "depth_main", "rgb_wrist", "depth_wrist", "proprio", "actions"):
            assert np.array_equal(getattr(a, field), getattr(b, field)), field


def test_sidecar_enables_exact_tracks(tmp_path, episodes):
    path = tmp_path / "ds.f3de"
    data.write_dataset(path, episodes)
    back = data.read_dataset(path)
    assert all(ep.tracks_available for ep in back)
    pix = data.grid_pixels(16, 32, 32)
    for a, b in zip(episodes, back):
        fa = world.track_points(a, 1, pix, 6)
        fb = world.track_points(b, 1, pix, 6)
        assert np.array_equal(fa, fb)


def test_read_without_sidecar_has_no_tracks(tmp_path, episodes):
    path = tmp_path / "plain.f3de"
    data.write_dataset(path, episodes, sidecar=False)
    back = data.read_dataset(path)
    assert not any(ep.tracks_available for ep in back)
    with pytest.raises(ValueError):
        world.track_points(back[0], 0, data.grid_pixels(4, 32, 32), 6)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.f3de"
    path.write_bytes(b"WHAT" + b"\x00" * 32)
    with pytest.raises(data.DatasetError) as e:
        data.read_dataset(path)
    assert e.value.offset == 0


def test_version_bump_rejected(tmp_path):
    path = tmp_path / "v2.f3de"
    path.write_bytes(data.MAGIC + struct.pack("<II", data.VERSION + 1, 0))
    with pytest.raises(data.DatasetError) as e:
        data.read_dataset(path)
    assert f"version {data.VERSION + 1}" in str(e.value)


def test_truncation_reports_offset(tmp_path, episodes):
    path = tmp_path / "trunc.f3de"
    data.write_dataset(path, episodes[:1], sidecar=False)
    blob = path.read_bytes()
    cut = len(blob) - 1000
    path.write_bytes(blob[:cut])
    with pytest.raises(data.DatasetError) as e:
        data.read_dataset(path)
    assert e.value.offset is not None
    assert e.value.offset <= cut
