import shutil

import numpy as np
import pytest

from motion_transfer.cli import main
from motion_transfer.config import TrainConfig
from motion_transfer.data import load_skeleton
from motion_transfer.data.imageio import load_image
from motion_transfer.infer import infer, load_generator

TINY_CFG = dict(image_size=32, batch_size=4, channels=[8, 16, 32], heads=[2, 2, 4], stripe_widths=[1, 1, 2],
                enc_depths=[1, 1, 1], dec_depths=[1, 1, 1], disc_channels=[8, 8, 8, 8], fx_channels=[4, 8, 8, 8, 8])


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """generate-data followed by a one-epoch train run, both through the CLI."""
    root = tmp_path_factory.mktemp("cli")
    assert main(["generate-data", "--out", str(root / "ds"), "--identities", "1", "--frames", "8",
                 "--size", "32", "--seed", "0"]) == 0
    cfg = TrainConfig(data=str(root / "ds" / "manifest.json"), out_dir=str(root / "run"), epochs=1, **TINY_CFG)
    (root / "train.cfg").write_text(cfg.dumps())
    assert main(["train", "--config", str(root / "train.cfg"), "--quiet"]) == 0
    return root


def test_generate_then_train_one_epoch_writes_one_checkpoint(trained):
    assert len(list((trained / "ds").glob("frame_*.png"))) == 8
    assert sorted(p.name for p in (trained / "run").glob("ckpt_epoch_*.mtck")) == ["ckpt_epoch_0001.mtck"]
    assert len((trained / "run" / "train_log.jsonl").read_text().splitlines()) == 2


def test_infer_writes_one_frame_per_skeleton(trained, tmp_path):
    ds = trained / "ds"
    skels = tmp_path / "skels"
    skels.mkdir()
    for n in (1, 3, 5):
        shutil.copy(ds / f"skel_{n:04d}.json", skels / f"t_{n}.json")
    out = tmp_path / "out"
    code = main(["infer", "--ckpt", str(trained / "run" / "ckpt_epoch_0001.mtck"), "--source",
                 str(ds / "frame_0000.png"), "--bg", str(ds / "background_00.png"), "--skeletons", str(skels),
                 "--out", str(out)])
    assert code == 0
    frames = sorted(p.name for p in out.iterdir())
    assert frames == ["frame_0000.png", "frame_0001.png", "frame_0002.png"]
    assert load_image(out / frames[0]).shape == (3, 32, 32)


def test_normalize_with_identical_stats_is_bit_identical(trained):
    ds = trained / "ds"
    gen = load_generator(trained / "run" / "latest.mtck")
    src, bg = load_image(ds / "frame_0000.png"), load_image(ds / "background_00.png")
    skel = load_skeleton(ds / "skel_0000.json", (32, 32))
    plain = infer(gen, src, bg, [skel])
    normed = infer(gen, src, bg, [skel], normalize=True, source_skeleton=skel)
    assert plain[0].tobytes() == normed[0].tobytes()


def test_eval_on_identical_dirs_reports_ssim_one(trained, tmp_path, capsys):
    ds = trained / "ds"
    csv = tmp_path / "m.csv"
    assert main(["eval", "--pred-dir", str(ds), "--gt-dir", str(ds), "--csv", str(csv)]) == 0
    out = capsys.readouterr().out
    assert "mean SSIM 1.000000" in out
    rows = csv.read_text().splitlines()
    assert rows[0] == "frame,psnr_db,ssim"
    assert all(r.endswith(",inf,1.000000") for r in rows[1:])


def test_eval_against_other_frames(trained, tmp_path):
    ds = trained / "ds"
    pred = tmp_path / "pred"
    pred.mkdir()
    shutil.copy(ds / "frame_0001.png", pred / "frame_0000.png")
    csv = tmp_path / "m.csv"
    assert main(["eval", "--pred-dir", str(pred), "--gt-dir", str(ds), "--csv", str(csv)]) == 0
    _, p, s = csv.read_text().splitlines()[1].split(",")
    assert np.isfinite(float(p)) and float(s) < 1.0


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["eval", "--bogus"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_failed_run_exits_1(tmp_path, capsys):
    (tmp_path / "bad.cfg").write_text("no_such_key = 1\n")
    assert main(["train", "--config", str(tmp_path / "bad.cfg")]) == 1
    assert "unknown key" in capsys.readouterr().err
    assert main(["train", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert main(["infer", "--ckpt", str(tmp_path / "none.mtck"), "--source", str(tmp_path / "x.png"),
                 "--bg", str(tmp_path / "x.png"), "--skeletons", str(tmp_path), "--out", str(tmp_path)]) == 1


def test_gradcheck_with_injected_fault_fails(capsys):
    assert main(["gradcheck", "--seeds", "1", "--inject-fault"]) == 1
    assert "FAIL" in capsys.readouterr().out
