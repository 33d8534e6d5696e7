"""Binary checkpoint format.

Layout (all integers little-endian):

    magic            4 bytes  b"MST1"
    config length    u32, then UTF-8 key=value config text
    entry count      u32
    per entry:
        name length  u16, then UTF-8 name
        kind         u8   (0 = parameter, 1 = buffer)
        rank         u8
        extents      rank x u32
        data         float32 little-endian, row-major
    checksum         u32  CRC-32 of everything after the magic

Weights are stored in 32-bit mode; load(save(w)) reproduces the 32-bit
values bit-exactly.  A checksum mismatch or truncated file raises
DataError.
"""

import struct
import zlib

import numpy as np

from .config import TrackerConfig
from .errors import DataError
from .model import MultiStateTracker

MAGIC = b"MST1"
_KIND_PARAM, _KIND_BUFFER = 0, 1


def _pack_entry(name, kind, array):
    data = np.ascontiguousarray(array, dtype="<f4")
    raw = name.encode("utf-8")
    out = [struct.pack("<H", len(raw)), raw,
           struct.pack("<BB", kind, data.ndim)]
    out.append(struct.pack(f"<{data.ndim}I", *data.shape))
    out.append(data.tobytes())
    return b"".join(out)


def save_checkpoint(path, model):
    entries = []
    for name, p in sorted(model.named_params().items()):
        entries.append(_pack_entry(name, _KIND_PARAM, p.data))
    for name, b in sorted(model.named_buffers().items()):
        entries.append(_pack_entry(name, _KIND_BUFFER, b))
    cfg_raw = model.cfg.to_text().encode("utf-8")
    payload = (struct.pack("<I", len(cfg_raw)) + cfg_raw
               + struct.pack("<I", len(entries)) + b"".join(entries))
    with open(path, "wb") as f:
        f.write(MAGIC + payload + struct.pack("<I", zlib.crc32(payload)))


class _Reader:
    def __init__(self, raw, path):
        self.raw, self.pos, self.path = raw, 0, path

    def take(self, n):
        if self.pos + n > len(self.raw):
            raise DataError(f"{self.path}: truncated checkpoint")
        out = self.raw[self.pos : self.pos + n]
        self.pos += n
        return out

    def u(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path):
    """Returns (TrackerConfig, params dict, buffers dict); float32 arrays."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != MAGIC:
        raise DataError(f"{path}: bad checkpoint magic")
    if len(raw) < 8:
        raise DataError(f"{path}: truncated checkpoint")
    payload, (stored_crc,) = raw[4:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(payload) != stored_crc:
        raise DataError(f"{path}: checkpoint checksum mismatch")

    r = _Reader(payload, path)
    (cfg_len,) = r.u("<I")
    cfg = TrackerConfig.from_text(r.take(cfg_len).decode("utf-8"))
    (count,) = r.u("<I")
    params, buffers = {}, {}
    for _ in range(count):
        (name_len,) = r.u("<H")
        name = r.take(name_len).decode("utf-8")
        kind, rank = r.u("<BB")
        shape = r.u(f"<{rank}I") if rank else ()
        n = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(r.take(4 * n), dtype="<f4").reshape(shape)
        (params if kind == _KIND_PARAM else buffers)[name] = data
    if r.pos != len(payload):
        raise DataError(f"{path}: trailing bytes in checkpoint")
    return cfg, params, buffers


def restore(model, params, buffers):
    model_params = model.named_params()
    if set(model_params) != set(params):
        raise DataError("checkpoint parameter names do not match the model")
    for name, p in model_params.items():
        if p.data.shape != params[name].shape:
            raise DataError(f"shape mismatch for {name}")
        p.data[...] = params[name].astype(np.float64)
    model_buffers = model.named_buffers()
    if set(model_buffers) != set(buffers):
        raise DataError("checkpoint buffer names do not match the model")
    for name, b in model_buffers.items():
        b[...] = buffers[name].astype(np.float64)


def load_model(path, seed=0):
    cfg, params, buffers = load_checkpoint(path)
    model = MultiStateTracker(cfg, seed=seed)
    restore(model, params, buffers)
    return cfg, model
