import math

import numpy as np
import pytest

from bayernet.bench import (
    Dataset,
    evaluate,
    fingerprint,
    ingest_dataset,
    params_flops,
    synthetic_image,
    synthetic_set,
    SYNTH_KINDS,
    write_synthetic,
)
from bayernet.hqli import hqli_rgb
from bayernet.image import clip, mosaic, psnr_report
from bayernet.imageio import write_rgb
from bayernet.nn import network as N
from bayernet.pipeline import DemosaicModel


@pytest.mark.parametrize("kind", SYNTH_KINDS)
def test_synthetic_images_are_8bit(kind):
    img = synthetic_image(np.random.default_rng(0), 30, 40, kind)
    assert img.shape == (30, 40, 3)
    assert img.min() >= 0 and img.max() <= 255
    assert np.array_equal(img, np.rint(img))


def test_synthetic_deterministic():
    a, b = synthetic_set(3, seed=5), synthetic_set(3, seed=5)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    with pytest.raises(ValueError):
        synthetic_image(np.random.default_rng(0), kind="fractal")


def test_ingest_mixed_formats(tmp_path):
    write_synthetic(tmp_path, 2, 12, 12, seed=0, fmt="png")
    write_rgb(tmp_path / "a_first.ppm", np.zeros((8, 8, 3)))
    write_rgb(tmp_path / "tiny.png", np.zeros((3, 8, 3)))
    (tmp_path / "broken.png").write_bytes(b"not a png")
    (tmp_path / "notes.txt").write_text("ignored")
    ds = ingest_dataset(tmp_path)
    assert ds.names == ["a_first.ppm", "synth_0000.png", "synth_0001.png"]
    assert sorted(n for n, _ in ds.skipped) == ["broken.png", "tiny.png"]


def test_ingest_missing_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        ingest_dataset(tmp_path / "nope")


def test_evaluate_baseline_matches_direct_psnr():
    imgs = synthetic_set(3, 20, 24, seed=1)
    ds = Dataset(imgs, ["a", "b", "c"])
    rep = evaluate(ds, None, layout="GRBG")
    for img, row in zip(imgs, rep.rows):
        m = mosaic(img, "GRBG")
        assert row == psnr_report(img, clip(hqli_rgb(m))).as_tuple()
    assert rep.mean[3] == pytest.approx(np.mean([r[3] for r in rep.rows]))


def test_evaluate_zero_model_equals_baseline():
    imgs = synthetic_set(2, 16, 16, seed=2)
    ds = Dataset(imgs, ["a", "b"])
    specs = {n: N.reduced_spec(n, 1, 4) for n in N.NETWORK_NAMES}
    base = evaluate(ds, None)
    zero = evaluate(ds, DemosaicModel.zeros(specs))
    assert base.rows == zero.rows
    assert zero.params["total"] == sum(N.count_params(s) for s in specs.values())


def test_csv_shape_and_determinism():
    imgs = synthetic_set(2, 16, 16, seed=3)
    ds = Dataset(imgs, ["x.png", "y.png"])
    model = DemosaicModel.initialize({n: N.reduced_spec(n, 1, 4) for n in N.NETWORK_NAMES}, seed=0)
    a = evaluate(ds, model, threads=1).to_csv()
    b = evaluate(ds, model, threads=2).to_csv()
    assert a == b
    lines = a.splitlines()
    assert lines[0].startswith("# fingerprint: ")
    assert lines[1] == "image,R,G,B,CPSNR"
    assert lines[2].startswith("x.png,") and lines[-1].startswith("mean,")


def test_inf_rows_formatted():
    ds = Dataset([np.full((8, 8, 3), 50.0)], ["flat"])
    rep = evaluate(ds, None)
    assert all(math.isinf(v) for v in rep.rows[0])
    assert "flat,inf,inf,inf,inf" in rep.to_csv()


def test_fingerprint_changes_with_inputs():
    assert fingerprint(a=1) == fingerprint(a=1)
    assert fingerprint(a=1) != fingerprint(a=2)
    assert len(fingerprint(a=1)) == 16


def test_params_flops_default():
    params, flops = params_flops({n: N.default_spec(n) for n in N.NETWORK_NAMES}, 100, 100)
    assert params["total"] == 924_480
    assert flops["total"] == 924_480 * 10_000 == 9_244_800_000
