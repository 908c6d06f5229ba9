import numpy as np
import pytest

from bayernet.bench import write_synthetic
from bayernet.cli import EXIT_DATA, EXIT_USAGE, main
from bayernet.imageio import read_cfa, read_rgb, write_rgb
from bayernet.pipeline import DemosaicModel


@pytest.fixture
def data_dir(tmp_path):
    d = tmp_path / "data"
    write_synthetic(d, 3, 24, 24, seed=4)
    return d


def test_report_default(capsys):
    assert main(["report"]) == 0
    out = capsys.readouterr().out
    for text in ("277,632", "314,208", "332,640", "924,480", "9,244,800,000", "9.2448"):
        assert text in out


def test_create_report_model(tmp_path, capsys):
    path = tmp_path / "m.cbcd"
    assert main(["create", str(path), "--architecture", "reduced", "--hidden", "2", "--width", "8"]) == 0
    assert main(["report", "--model", str(path), "--size", "10x10"]) == 0
    model = DemosaicModel.load(path)
    total = sum(model.param_counts().values())
    assert f"{total:,}" in capsys.readouterr().out


def test_mosaic_then_demosaic_constant(tmp_path):
    img = np.empty((10, 12, 3))
    img[:] = (30, 140, 220)
    write_rgb(tmp_path / "in.png", img)
    assert main(["mosaic", str(tmp_path / "in.png"), str(tmp_path / "c.pgm"), "--layout", "BGGR"]) == 0
    assert read_cfa(tmp_path / "c.pgm").layout.value == "BGGR"
    main(["create", str(tmp_path / "z.cbcd"), "--architecture", "reduced", "--hidden", "1", "--width", "4", "--zero"])
    assert main(["demosaic", str(tmp_path / "c.pgm"), str(tmp_path / "out.ppm"), "--model", str(tmp_path / "z.cbcd")]) == 0
    np.testing.assert_array_equal(read_rgb(tmp_path / "out.ppm"), img)


def test_init_npz(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, (8, 8, 3)).astype(float)
    write_rgb(tmp_path / "in.ppm", img)
    assert main(["init", str(tmp_path / "in.ppm"), str(tmp_path / "p.npz"), "--simulate", "RGGB"]) == 0
    planes = np.load(tmp_path / "p.npz")
    np.testing.assert_array_equal(planes["gr0"], planes["g0"] - planes["r0"])
    assert main(["init", str(tmp_path / "in.ppm"), str(tmp_path / "p.png"), "--simulate", "RGGB"]) == 0


def test_eval_csv_deterministic(tmp_path, data_dir):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["eval", "--data", str(data_dir), "--baseline", "--csv", str(a)]) == 0
    assert main(["eval", "--data", str(data_dir), "--baseline", "--csv", str(b), "--threads", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[1] == "image,R,G,B,CPSNR"


def test_train_reduced_and_eval(tmp_path, capsys):
    d = tmp_path / "data"
    write_synthetic(d, 4, 40, 40, seed=1)
    cfg = tmp_path / "t.cfg"
    cfg.write_text("epochs = 1\nbatch_size = 8\npatch_size = 20\ndiscard = 0\ntrain_fraction = 0.75\n")
    out = tmp_path / "m.cbcd"
    rc = main(["train", "--target", "all", "--data", str(d), "--config", str(cfg), "--out", str(out),
               "--reduced", "1", "--trace", str(tmp_path / "trace.csv")])
    assert rc == 0
    assert out.exists()
    for t in ("g", "gr", "gb"):
        assert (tmp_path / f"m.cbcd.{t}.adam.npz").exists()
        assert (tmp_path / f"trace_{t}.csv").read_text().startswith("epoch,lr,train_loss,val_loss")
    assert main(["eval", "--data", str(d), "--model", str(out)]) == 0
    assert "CPSNR" in capsys.readouterr().out


def test_search_cli(tmp_path):
    d = tmp_path / "data"
    write_synthetic(d, 4, 30, 30, seed=2)
    (tmp_path / "t.cfg").write_text("epochs = 1\nbatch_size = 8\npatch_size = 15\ndiscard = 0\ntrain_fraction = 0.75\n")
    (tmp_path / "b.cfg").write_text("max_params = 3000\nwidths = 4 8\nsteps = 2 1\n")
    rc = main(["search", "--target", "gr", "--data", str(d), "--config", str(tmp_path / "t.cfg"),
               "--budget", str(tmp_path / "b.cfg"), "--epochs", "1",
               "--trace", str(tmp_path / "s.csv"), "--out", str(tmp_path / "s.json")])
    assert rc == 0
    assert (tmp_path / "s.json").exists()
    assert (tmp_path / "s.csv").read_text().startswith("candidate,phase,K,depth,params,skips,val_error")


class TestExitCodes:
    def test_usage_unknown_command(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["frobnicate"])
        assert e.value.code == EXIT_USAGE

    def test_usage_bad_layout(self, tmp_path):
        with pytest.raises(SystemExit) as e:
            main(["mosaic", "a.png", "b.pgm", "--layout", "RGBG"])
        assert e.value.code == EXIT_USAGE

    def test_eval_needs_model_or_baseline(self, data_dir):
        assert main(["eval", "--data", str(data_dir)]) == EXIT_USAGE

    def test_rgb_without_simulate(self, tmp_path):
        write_rgb(tmp_path / "a.png", np.zeros((8, 8, 3)))
        assert main(["init", str(tmp_path / "a.png"), str(tmp_path / "o.png")]) == EXIT_USAGE

    def test_missing_file(self, tmp_path):
        assert main(["mosaic", str(tmp_path / "none.png"), str(tmp_path / "o.pgm")]) == EXIT_DATA

    def test_corrupt_model(self, tmp_path):
        (tmp_path / "m.cbcd").write_bytes(b"CBCD garbage")
        write_rgb(tmp_path / "a.png", np.zeros((8, 8, 3)))
        rc = main(["demosaic", str(tmp_path / "a.png"), str(tmp_path / "o.png"), "--model", str(tmp_path / "m.cbcd"),
                   "--simulate", "RGGB"])
        assert rc == EXIT_DATA

    def test_empty_dataset(self, tmp_path):
        (tmp_path / "empty").mkdir()
        assert main(["eval", "--data", str(tmp_path / "empty"), "--baseline"]) == EXIT_DATA
