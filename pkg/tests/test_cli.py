import csv

import numpy as np
import pytest

from flexconn.cli import build_parser, main, read_config
from flexconn.volio import load_model, read_volume, write_volume
from flexconn.volume import Volume

PHANTOM = ["--dims", "32", "32", "10", "--n-lesions", "2", "--radius-range", "2", "3"]
FAST_TRAIN = ["--depth", "2", "--epochs", "1", "--batch-size", "64", "--patch", "9", "9"]


@pytest.fixture(scope="module")
def cohort(tmp_path_factory):
    d = tmp_path_factory.mktemp("phantoms")
    assert main(["phantom", "--out-dir", str(d), "--n-cases", "2", "--seed", "3", *PHANTOM]) == 0
    return d


def triple(d, i):
    return [str(d / f"case_{i:03d}_{k}.nii") for k in ("t1", "flair", "mask")]


@pytest.fixture(scope="module")
def model(cohort, tmp_path_factory):
    out = tmp_path_factory.mktemp("model") / "m.flxc"
    t1, fl, mk = triple(cohort, 0)
    code = main(["train", "--t1", t1, "--flair", fl, "--mask", mk, "--out-model", str(out), *FAST_TRAIN])
    assert code == 0
    return out


def test_phantom_outputs_roundtrip(cohort, tmp_path):
    t1, fl, mk = (read_volume(p) for p in triple(cohort, 1))
    assert mk.data.dtype == np.uint8 and t1.data.dtype == np.float32
    assert mk.data.sum() > 0
    p = tmp_path / "again.nii"
    write_volume(fl, p, "float32")
    assert p.read_bytes() == open(triple(cohort, 1)[1], "rb").read()


def test_train_writes_model_and_log(model):
    net, cfg = load_model(model)
    assert cfg.contrast_pathway.banks == ((16, 3), (8, 5))
    rows = list(csv.reader(open(f"{model}.csv")))
    assert rows[0] == ["epoch", "train_loss", "val_loss"]
    assert len(rows) == 2


def test_train_deterministic(cohort, model, tmp_path):
    out = tmp_path / "again.flxc"
    t1, fl, mk = triple(cohort, 0)
    assert main(["train", "--t1", t1, "--flair", fl, "--mask", mk, "--out-model", str(out), *FAST_TRAIN]) == 0
    assert out.read_bytes() == model.read_bytes()
    assert (tmp_path / "again.flxc.csv").read_text() == open(f"{model}.csv").read()


def test_train_missing_mask(cohort, tmp_path, capsys):
    t1, fl, _ = triple(cohort, 0)
    code = main(["train", "--t1", t1, "--flair", fl, "--out-model", str(tmp_path / "x")])
    assert code == 1
    assert "--mask" in capsys.readouterr().err


def test_train_bad_file(tmp_path, capsys):
    bad = tmp_path / "bad.nii"
    bad.write_bytes(b"\x00" * 400)
    code = main(["train", "--t1", str(bad), "--flair", str(bad), "--mask", str(bad),
                 "--out-model", str(tmp_path / "x")])
    assert code == 2
    assert "data error" in capsys.readouterr().err


def test_predict_and_averaging(cohort, model, tmp_path):
    t1, fl, mk = triple(cohort, 1)
    one = [str(tmp_path / "m1.nii"), str(tmp_path / "s1.nii")]
    two = [str(tmp_path / "m2.nii"), str(tmp_path / "s2.nii")]
    base = ["predict", "--model", str(model), "--t1", t1, "--flair", fl]
    assert main([*base, "--out-membership", one[0], "--out-seg", one[1]]) == 0
    assert main([*base, "--model2", str(model), "--out-membership", two[0], "--out-seg", two[1]]) == 0
    m1, m2 = read_volume(one[0]), read_volume(two[0])
    assert m1.data.dtype == np.float32
    assert m1.data.tobytes() == m2.data.tobytes()
    seg = read_volume(one[1])
    assert seg.data.dtype == np.uint8
    np.testing.assert_array_equal(seg.data, (m1.data >= 0.30).astype(np.uint8))


def test_predict_overlay_does_not_change_output(cohort, model, tmp_path):
    t1, fl, _ = triple(cohort, 1)
    base = ["predict", "--model", str(model), "--t1", t1, "--flair", fl]
    a = [str(tmp_path / "a.nii"), str(tmp_path / "as.nii")]
    b = [str(tmp_path / "b.nii"), str(tmp_path / "bs.nii")]
    assert main([*base, "--out-membership", a[0], "--out-seg", a[1]]) == 0
    ov = tmp_path / "ov"
    assert main([*base, "--out-membership", b[0], "--out-seg", b[1], "--overlay-dir", str(ov)]) == 0
    assert open(a[0], "rb").read() == open(b[0], "rb").read()
    pgms = sorted(ov.glob("*.pgm"))
    assert len(pgms) == 10
    blob = pgms[0].read_bytes()
    assert blob.startswith(b"P5\n32 32\n255\n") and len(blob) == len(b"P5\n32 32\n255\n") + 32 * 32


def test_predict_contrast_mismatch(cohort, tmp_path, capsys):
    from flexconn.network import NetworkConfig, build_network
    from flexconn.volio import save_model

    single = tmp_path / "one.flxc"
    save_model(build_network(NetworkConfig.from_depth(2, num_contrasts=1), seed=0), single)
    t1, fl, _ = triple(cohort, 1)
    code = main(["predict", "--model", str(single), "--t1", t1, "--flair", fl,
                 "--out-membership", str(tmp_path / "m"), "--out-seg", str(tmp_path / "s")])
    assert code == 2
    assert "contrast-count mismatch" in capsys.readouterr().err


def test_predict_threshold_domain(cohort, model, tmp_path):
    t1, fl, _ = triple(cohort, 1)
    code = main(["predict", "--model", str(model), "--t1", t1, "--flair", fl, "--threshold", "0",
                 "--out-membership", str(tmp_path / "m"), "--out-seg", str(tmp_path / "s")])
    assert code == 1


def test_evaluate_identical(cohort, tmp_path, capsys):
    masks = [triple(cohort, i)[2] for i in range(2)]
    out = tmp_path / "ev.csv"
    code = main(["evaluate", "--auto", *masks, "--manual", *masks, "--auto2", *masks,
                 "--out-csv", str(out), "--workers", "2"])
    assert code == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 4
    assert all(float(r["dice"]) == 1.0 for r in rows)
    summary = {(r["method"], r["quantity"]): r for r in csv.DictReader(open(tmp_path / "ev_summary.csv"))}
    assert float(summary[("auto", "volume_slope")]["value"]) == pytest.approx(1.0)
    assert float(summary[("auto", "volume_intercept")]["value"]) == pytest.approx(0.0)
    assert float(summary[("auto", "median_score")]["value"]) == pytest.approx(100.0)
    warn = summary[("auto-vs-auto2", "wilcoxon_dice")]
    assert warn["note"].startswith("warning") and "degenerate" in warn["note"]
    assert "warning" in capsys.readouterr().err


def test_evaluate_length_mismatch(cohort, tmp_path):
    m = triple(cohort, 0)[2]
    assert main(["evaluate", "--auto", m, m, "--manual", m, "--out-csv", str(tmp_path / "e.csv")]) == 1


def test_sweep(cohort, tmp_path):
    truth = triple(cohort, 0)[2]
    t = read_volume(truth)
    mem = tmp_path / "mem.nii"
    write_volume(t.with_data(np.where(t.data > 0, 0.6, 0.1).astype(np.float32)), mem)
    out = tmp_path / "sw.csv"
    assert main(["sweep", "--membership", str(mem), "--truth", truth, "--out-csv", str(out)]) == 0
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["threshold", "dice"] and len(rows) == 18
    by_tau = {r[0]: float(r[1]) for r in rows[1:]}
    assert by_tau["0.30"] == 1.0 and by_tau["0.05"] < 1.0 and by_tau["0.85"] == 0.0


def test_gradcheck(capsys):
    assert main(["gradcheck", "--seed", "7"]) == 0
    assert "max relative error" in capsys.readouterr().out
    assert main(["gradcheck", "--seed", "7", "--tolerance", "0"]) == 3


def test_config_file(cohort, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# phantom run\nout-dir = {tmp_path / 'ph'}\nn_lesions = 1\ndims = 24 24 10\n")
    assert main(["phantom", "--config", str(cfg), "--seed", "1"]) == 0
    assert read_volume(tmp_path / "ph" / "case_000_mask.nii").shape == (24, 24, 10)


def test_config_overridden_by_flag(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("dims = 24 24 10\nn_lesions = 1\n")
    assert main(["phantom", "--config", str(cfg), "--out-dir", str(tmp_path / "p"), "--dims", "20", "22", "10"]) == 0
    assert read_volume(tmp_path / "p" / "case_000_t1.nii").shape == (20, 22, 10)


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("epochs = 3\nlearning_rat = 0.1\n")
    assert main(["train", "--config", str(cfg)]) == 1
    assert "learning_rat" in capsys.readouterr().err


def test_read_config_syntax(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("a = 1\nb 2\n")
    with pytest.raises(Exception, match="key = value"):
        read_config(str(p))


def test_usage_errors(capsys):
    assert main([]) == 1
    assert main(["nope"]) == 1
    assert main(["sweep", "--help"]) == 0


def test_help_lists_defaults():
    parser = build_parser()
    sub = next(a for a in parser._actions if hasattr(a, "choices") and a.choices and "train" in a.choices)
    for name, sp in sub.choices.items():
        text = sp.format_help()
        assert "--config" in text
    train_help = " ".join(sub.choices["train"].format_help().split())
    for snippet in ("(default: 0.0001)", "(default: 128)", "(default: 20)", "(default: 1.5)"):
        assert snippet in train_help
    assert "(default: 0.3)" in " ".join(sub.choices["predict"].format_help().split())
