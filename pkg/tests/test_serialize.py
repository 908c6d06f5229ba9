import struct
import zlib

import numpy as np
import pytest

from bayernet.nn import network as N
from bayernet.nn import serialize as S
from bayernet.pipeline import DemosaicModel


def small_model(seed=0):
    specs = {n: N.reduced_spec(n, hidden=7, width=4) for n in N.NETWORK_NAMES}
    specs["gr"] = N.build_spec("gr", 4, 7, skips={6: (1,), 7: (2,)}, dilation=3)
    return DemosaicModel.initialize(specs, seed=seed)


def test_round_trip_byte_identical(tmp_path):
    m = small_model()
    path = tmp_path / "m.cbcd"
    m.save(path)
    first = path.read_bytes()
    again = DemosaicModel.load(path)
    assert again.to_bytes() == first
    for n in N.NETWORK_NAMES:
        assert again.specs[n] == m.specs[n]
        assert again.weights[n] == m.weights[n].astype(np.float32).astype(np.float64)


def test_header_and_first_record():
    data = small_model().to_bytes()
    assert data[:4] == b"CBCD"
    assert struct.unpack_from("<H", data, 4) == (1,)
    tag, cin, depth = struct.unpack_from("<BHH", data, 6)
    assert (tag, cin, depth) == (0, 3, 9)
    kind, lin, lout, dil, nskip = struct.unpack_from("<BHHBB", data, 11)
    assert (kind, lin, lout, dil, nskip) == (0, 3, 4, 1, 0)
    assert struct.unpack("<I", data[-4:])[0] == zlib.crc32(data[:-4])


def test_float_payload_size():
    # header 6 + per net 5 + 7 bytes per layer + 2 per skip index, weights as f32, crc 4
    m = small_model()
    n_floats = 0
    meta = 6 + 4
    for spec, w in m.networks():
        meta += 5 + 7 * spec.depth + 2 * sum(len(l.skip_sources) for l in spec.layers)
        n_floats += sum(a.size for p in w.layers for a in p.values())
    assert len(m.to_bytes()) == meta + 4 * n_floats


def test_forward_unchanged_after_reload():
    m = small_model(3)
    again = DemosaicModel.from_bytes(m.to_bytes())
    x = np.random.default_rng(0).uniform(0, 255, (12, 12, 3))
    m32 = {n: m.weights[n].astype(np.float32).astype(np.float64) for n in N.NETWORK_NAMES}
    np.testing.assert_array_equal(N.forward(m.specs["g"], m32["g"], x), N.forward(again.specs["g"], again.weights["g"], x))


@pytest.mark.parametrize(
    "mutate,match",
    [
        (lambda d: b"XXXX" + d[4:], "not a CBCD"),
        (lambda d: d[:20] + bytes([d[20] ^ 1]) + d[21:], "checksum"),
        (lambda d: d[:-10], "checksum"),
        (lambda d: b"", "not a CBCD"),
    ],
)
def test_corruption_detected(mutate, match):
    with pytest.raises(S.ModelFormatError, match=match):
        S.decode(mutate(small_model().to_bytes()))


def test_bad_version():
    body = bytearray(small_model().to_bytes()[:-4])
    body[4:6] = struct.pack("<H", 2)
    data = bytes(body) + struct.pack("<I", zlib.crc32(bytes(body)))
    with pytest.raises(S.ModelFormatError, match="version"):
        S.decode(data)


def test_truncated_with_valid_checksum():
    body = small_model().to_bytes()[:-4][:-8]
    with pytest.raises(S.ModelFormatError, match="truncated"):
        S.decode(body + struct.pack("<I", zlib.crc32(body)))


def test_wrong_network_order():
    m = small_model()
    nets = m.networks()
    with pytest.raises(S.ModelFormatError):
        S.encode([nets[1], nets[0], nets[2]])
