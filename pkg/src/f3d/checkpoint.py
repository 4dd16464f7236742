"""Parameter checkpoint container.

Layout (all little-endian):
    magic   4 bytes  "F3DC"
    version u32      (currently 1)
    count   u32      number of named tensors
    per tensor:
        name_len u16, name utf-8 bytes
        rank     u8,  dims u32 * rank
        payload  f32 * prod(dims)
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"F3DC"
VERSION = 1


class CheckpointError(ValueError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


def save(path, named_arrays):
    """Write a dict of name -> numpy array (cast to f32) to `path`."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(named_arrays)))
        for name, arr in named_arrays.items():
            arr = np.ascontiguousarray(arr, dtype="<f4")
            nb = name.encode("utf-8")
            if len(nb) > 0xFFFF:
                raise CheckpointError(f"parameter name too long: {name[:40]}...")
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<I", d))
            f.write(arr.tobytes())


def load(path):
    """Read a checkpoint back as a dict of name -> float32 array."""
    with open(path, "rb") as f:
        data = f.read()
    pos = 0

    def need(n, what):
        nonlocal pos
        if pos + n > len(data):
            raise CheckpointError(f"truncated checkpoint while reading {what}", offset=pos)
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    if need(4, "magic") != MAGIC:
        raise CheckpointError("bad magic, not a checkpoint file", offset=0)
    version, count = struct.unpack("<II", need(8, "header"))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (reader supports {VERSION})", offset=4)
    out = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", need(2, "name length"))
        name = need(name_len, "name").decode("utf-8")
        (rank,) = struct.unpack("<B", need(1, "rank"))
        dims = struct.unpack(f"<{rank}I", need(4 * rank, "dims")) if rank else ()
        n = int(np.prod(dims)) if rank else 1
        payload = need(4 * n, f"payload of {name}")
        out[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
    return out


def save_model(path, module, extra=None):
    named = {k: p.data for k, p in module.named_params().items()}
    if extra:
        named.update(extra)
    save(path, named)


def load_model(path, module):
    """Load matching parameters into a module; returns the full dict
    (including any optimizer/extra entries) for the caller."""
    named = load(path)
    model_entries = {k: v for k, v in named.items() if not k.startswith("opt.") and not k.startswith("meta.")}
    module.load_arrays(model_entries)
    return named
