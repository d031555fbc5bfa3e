"""Binary checkpoints.

Layout (little-endian)::

    b"LSTM" | version u32 | sha256(config JSON) 32 bytes
    | meta length u32 | meta JSON (config, epoch, history, scaler shape ...)
    | tensor count u32 | tensors
    | optimizer tensor count u32 | tensors

Each tensor is ``name length u32 | utf-8 name | ndim u32 | dims u32... |
float64 values``. Model tensors use their parameter names (buffers and the
feature scaler are stored alongside); optimizer tensors are named
``avg/<param>`` and ``velocity/<param>``.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..core import LstmConfig
from ..errors import CorruptionError, FormatError
from .model import LstmModel
from .optim import RmspropState

MAGIC = b"LSTM"
VERSION = 1


def config_digest(config_json: str) -> bytes:
    return hashlib.sha256(config_json.encode()).digest()


def _pack_tensors(tensors: dict[str, np.ndarray]) -> bytes:
    parts = [struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype="<f8")
        raw = name.encode()
        parts.append(struct.pack("<I", len(raw)) + raw + struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf, self.pos, self.path = buf, 0, path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptionError(self.pos + n, len(self.buf), self.path)
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for _ in range(self.u32()):
            name = self.take(self.u32()).decode()
            ndim = self.u32()
            dims = struct.unpack(f"<{ndim}I", self.take(4 * ndim))
            count = int(np.prod(dims, dtype=np.int64))
            out[name] = np.frombuffer(self.take(8 * count), dtype="<f8").reshape(dims).copy()
        return out


def save_checkpoint(path, model: LstmModel, optimizer: RmspropState, meta: dict | None = None,
                    extra_tensors: dict[str, np.ndarray] | None = None) -> Path:
    config_json = json.dumps(
        {"lstm": asdict(model.config), "input_dim": model.input_dim}, sort_keys=True
    )
    meta = {
        **(meta or {}),
        "config": json.loads(config_json),
        "optimizer": {"lr": optimizer.lr, "rho": optimizer.rho, "eps": optimizer.eps,
                      "momentum": optimizer.momentum, "steps": optimizer.steps},
    }
    meta_raw = json.dumps(meta, sort_keys=True).encode()
    tensors = {**model.params, **{f"buffer/{k}": v for k, v in model.buffers.items()}}
    tensors.update({f"extra/{k}": v for k, v in (extra_tensors or {}).items()})
    opt = {f"avg/{k}": v for k, v in optimizer.avg.items()}
    opt.update({f"velocity/{k}": v for k, v in optimizer.velocity.items()})
    blob = b"".join((
        MAGIC, struct.pack("<I", VERSION), config_digest(config_json),
        struct.pack("<I", len(meta_raw)), meta_raw,
        _pack_tensors(tensors), _pack_tensors(opt),
    ))
    path = Path(path)
    path.write_bytes(blob)
    return path


def load_checkpoint(path):
    """Returns ``(model, optimizer_state, meta, extra_tensors)``."""
    r = _Reader(Path(path).read_bytes(), path)
    if r.take(4) != MAGIC:
        raise FormatError(f"{path}: not an LSTM checkpoint")
    version = r.u32()
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    digest = r.take(32)
    meta = json.loads(r.take(r.u32()).decode())
    config_json = json.dumps(meta["config"], sort_keys=True)
    if config_digest(config_json) != digest:
        raise FormatError(f"{path}: config digest mismatch")
    tensors = r.tensors()
    opt_tensors = r.tensors()
    if r.pos != len(r.buf):
        raise FormatError(f"{path}: {len(r.buf) - r.pos} trailing bytes")

    cfg = meta["config"]["lstm"]
    config = LstmConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in cfg.items()})
    params = {k: v for k, v in tensors.items() if "/" not in k}
    buffers = {k[len("buffer/"):]: v for k, v in tensors.items() if k.startswith("buffer/")}
    extra = {k[len("extra/"):]: v for k, v in tensors.items() if k.startswith("extra/")}
    model = LstmModel(config, meta["config"]["input_dim"], params, buffers)
    o = meta["optimizer"]
    optimizer = RmspropState(
        o["lr"], o["rho"], o["eps"], o["momentum"],
        avg={k[4:]: v for k, v in opt_tensors.items() if k.startswith("avg/")},
        velocity={k[9:]: v for k, v in opt_tensors.items() if k.startswith("velocity/")},
        steps=o["steps"],
    )
    return model, optimizer, meta, extra
