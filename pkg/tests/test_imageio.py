import numpy as np
import pytest

from bayernet.image import mosaic
from bayernet.imageio import ImageFormatError, read_cfa, read_rgb, write_cfa, write_rgb


@pytest.fixture
def img():
    return np.random.default_rng(0).integers(0, 256, (7, 9, 3)).astype(float)


@pytest.mark.parametrize("suffix", [".png", ".ppm"])
def test_rgb_round_trip(tmp_path, img, suffix):
    write_rgb(tmp_path / f"a{suffix}", img)
    np.testing.assert_array_equal(read_rgb(tmp_path / f"a{suffix}"), img)


def test_write_rounds_and_clips(tmp_path):
    x = np.array([[[-3.0, 127.5, 300.0]]])
    write_rgb(tmp_path / "a.ppm", x)
    np.testing.assert_array_equal(read_rgb(tmp_path / "a.ppm"), [[[0.0, 128.0, 255.0]]])


def test_cfa_round_trip_and_comment(tmp_path, img):
    m = mosaic(img, "GBRG")
    write_cfa(tmp_path / "c.pgm", m)
    raw = (tmp_path / "c.pgm").read_bytes()
    assert raw.startswith(b"P5\n# bayer: GBRG\n9 7\n255\n")
    back = read_cfa(tmp_path / "c.pgm")
    assert back.layout.value == "GBRG"
    np.testing.assert_array_equal(back.cfa, m.cfa)


def test_cfa_comment_required(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n2 2\n255\n" + bytes(4))
    with pytest.raises(ImageFormatError):
        read_cfa(tmp_path / "c.pgm")
    assert read_cfa(tmp_path / "c.pgm", layout="BGGR").layout.value == "BGGR"


def test_cfa_two_comments_rejected(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# bayer: RGGB\n# bayer: BGGR\n2 2\n255\n" + bytes(4))
    with pytest.raises(ImageFormatError):
        read_cfa(tmp_path / "c.pgm")


def test_header_comments_between_tokens(tmp_path):
    data = b"P6\n# made by hand\n2 # width then height\n1\n255\n" + bytes([1, 2, 3, 4, 5, 6])
    (tmp_path / "a.ppm").write_bytes(data)
    np.testing.assert_array_equal(read_rgb(tmp_path / "a.ppm"), [[[1, 2, 3], [4, 5, 6]]])


@pytest.mark.parametrize(
    "data",
    [b"P3\n1 1\n255\n0 0 0\n", b"P6\n2 2\n255\n" + bytes(5), b"P6\n2 2\n65535\n" + bytes(24), b"P6\n2"],
)
def test_bad_netpbm(tmp_path, data):
    (tmp_path / "a.ppm").write_bytes(data)
    with pytest.raises(ImageFormatError):
        read_rgb(tmp_path / "a.ppm")


def test_unknown_suffix(tmp_path, img):
    with pytest.raises(ImageFormatError):
        write_rgb(tmp_path / "a.jpg", img)
    (tmp_path / "a.bmp").write_bytes(b"")
    with pytest.raises(ImageFormatError):
        read_rgb(tmp_path / "a.bmp")


def test_grayscale_png_expands(tmp_path):
    from PIL import Image

    Image.fromarray(np.full((3, 4), 90, np.uint8), mode="L").save(tmp_path / "g.png")
    out = read_rgb(tmp_path / "g.png")
    assert out.shape == (3, 4, 3) and np.all(out == 90)
