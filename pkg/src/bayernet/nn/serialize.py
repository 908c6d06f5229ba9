"""Binary model file.

Layout, all little-endian::

    b"CBCD"  u16 version
    three records in the order g, gr, gb:
        u8  name tag (0=g, 1=gr, 2=gb)
        u16 input channels
        u16 layer count
        per layer: u8 kind, u16 Cin, u16 Cout, u8 dilation,
                   u8 skip count, u16 skip index * count
        per layer: f32 kernel [kh, kw, Cin, Cout] row-major, f32 bias,
                   and for hidden layers f32 gamma, beta, mean, var
    u32 CRC-32 of every preceding byte
"""
from __future__ import annotations

import io
import struct
import zlib
from pathlib import Path

import numpy as np

from .network import HIDDEN, KINDS, NETWORK_NAMES, LayerSpec, NetworkSpec, NetworkWeights, SpecError

MAGIC = b"CBCD"
FORMAT_VERSION = 1
_BN_KEYS = ("gamma", "beta", "mean", "var")


class ModelFormatError(ValueError):
    pass


def _layer_arrays(layer: LayerSpec, p: dict):
    yield p["w"]
    yield p["b"]
    if layer.kind == HIDDEN:
        for k in _BN_KEYS:
            yield p[k]


def encode_network(spec: NetworkSpec, weights: NetworkWeights) -> bytes:
    weights.check(spec)
    buf = io.BytesIO()
    buf.write(struct.pack("<BHH", NETWORK_NAMES.index(spec.name), spec.input_channels, spec.depth))
    for l in spec.layers:
        buf.write(struct.pack("<BHHBB", KINDS.index(l.kind), l.in_channels, l.out_channels, l.dilation, len(l.skip_sources)))
        buf.write(struct.pack(f"<{len(l.skip_sources)}H", *l.skip_sources))
    for l, p in zip(spec.layers, weights.layers):
        for arr in _layer_arrays(l, p):
            buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return buf.getvalue()


def encode(networks) -> bytes:
    """Serialise ``[(spec, weights)]`` for g, gr, gb in that order."""
    names = [spec.name for spec, _ in networks]
    if names != list(NETWORK_NAMES):
        raise ModelFormatError(f"expected networks {NETWORK_NAMES}, got {tuple(names)}")
    body = MAGIC + struct.pack("<H", FORMAT_VERSION)
    body += b"".join(encode_network(s, w) for s, w in networks)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise ModelFormatError("model file is truncated")
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out

    def floats(self, shape) -> np.ndarray:
        n = int(np.prod(shape))
        end = self.pos + 4 * n
        if end > len(self.data):
            raise ModelFormatError("model file is truncated")
        arr = np.frombuffer(self.data, dtype="<f4", count=n, offset=self.pos).reshape(shape)
        self.pos = end
        return arr.astype(np.float64)


def _decode_network(r: _Reader):
    tag, cin, depth = r.take("<BHH")
    if tag >= len(NETWORK_NAMES):
        raise ModelFormatError(f"bad network tag {tag}")
    layers = []
    for _ in range(depth):
        kind, lin, lout, dil, nskip = r.take("<BHHBB")
        if kind >= len(KINDS):
            raise ModelFormatError(f"bad layer kind {kind}")
        skips = r.take(f"<{nskip}H")
        layers.append(LayerSpec(KINDS[kind], lin, lout, dil, tuple(skips)))
    if not layers:
        raise ModelFormatError("network has no layers")
    try:
        spec = NetworkSpec(NETWORK_NAMES[tag], cin, layers[0].out_channels, tuple(layers))
    except SpecError as exc:
        raise ModelFormatError(f"inconsistent layer shapes: {exc}") from None
    wlayers = []
    for l in layers:
        p = {"w": r.floats((3, 3, l.in_channels, l.out_channels)), "b": r.floats((l.out_channels,))}
        if l.kind == HIDDEN:
            for k in _BN_KEYS:
                p[k] = r.floats((l.out_channels,))
        wlayers.append(p)
    return spec, NetworkWeights(wlayers)


def decode(data: bytes):
    if len(data) < 10 or data[:4] != MAGIC:
        raise ModelFormatError("not a CBCD model file")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise ModelFormatError("model file checksum mismatch")
    r = _Reader(body)
    r.pos = 4
    (version,) = r.take("<H")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    nets = [_decode_network(r) for _ in NETWORK_NAMES]
    if r.pos != len(body):
        raise ModelFormatError("trailing bytes after the last network")
    names = [s.name for s, _ in nets]
    if names != list(NETWORK_NAMES):
        raise ModelFormatError(f"networks out of order: {names}")
    return nets


def save(path, networks) -> None:
    Path(path).write_bytes(encode(networks))


def load(path):
    return decode(Path(path).read_bytes())
