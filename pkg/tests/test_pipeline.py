import dataclasses
import json
import shutil

import numpy as np
import pytest

from vibrodiag import imaging, pipeline
from vibrodiag.config import PROFILES, ModelSection, RotorSection, config_from_dict, desk_profile, load_config
from vibrodiag.errors import ConfigError, VibrodiagError
from vibrodiag.nn import TrainConfig
from vibrodiag.nn.checkpoint import CheckpointError

SMALL_SPLIT = {"normal": (12, 4), "rubbing": (10, 6), "unbalance": (11, 5), "misalignment": (13, 3)}


def small_config(**kw):
    cfg = desk_profile()
    base = dict(
        rotor=dataclasses.replace(cfg.rotor, duration_s=2.0, channels=2),
        split=dict(SMALL_SPLIT),
        model=ModelSection(width_factor=1 / 16, input_side=32),
        train=TrainConfig(base_lr=0.05, batch_size=4, warmup_epochs=1, weight_decay=5e-4, epochs=3,
                          milestones=(2,), momentum=0.0, seed=7),
        baseline=dataclasses.replace(cfg.baseline, train=TrainConfig(
            base_lr=0.05, batch_size=4, warmup_epochs=1, weight_decay=5e-4, epochs=3, milestones=(2,))),
    )
    base.update(kw)
    return dataclasses.replace(cfg, **base).validate()


def tree_bytes(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()
            and p.name != ".lock"}


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = small_config()
    pipeline.cmd_gen(cfg, out)
    pipeline.cmd_preprocess(cfg, out, "stft")
    pipeline.cmd_train(cfg, out, "stft")
    pipeline.cmd_eval(cfg, out, "stft")
    return out, cfg


def test_gen_manifest(run_dir):
    out, cfg = run_dir
    m = pipeline.load_manifest(out)
    assert len(m["examples"]) == sum(a + b for a, b in SMALL_SPLIT.values())
    assert m["counts"]["Rubbing"] == [10, 6]
    assert {e["split"] for e in m["examples"]} == {"train", "test"}
    units = {}
    for e in m["examples"]:
        units.setdefault((e["path"], e["unit"]), set()).add(e["split"])
    assert all(len(s) == 1 for s in units.values())
    ex = m["examples"][0]
    x = pipeline.read_raw(out / ex["path"], ex["offset"], ex["length"])
    assert x.shape == (3932,)
    side = json.loads((out / ex["path"]).with_suffix(".json").read_text())
    assert side["sample_rate"] == 65536 and side["dtype"] == "float32-le"


def test_gen_deterministic(tmp_path, run_dir):
    out, cfg = run_dir
    pipeline.cmd_gen(cfg, tmp_path)
    ref = tree_bytes(out)
    for name, blob in tree_bytes(tmp_path).items():
        assert ref[name] == blob, name


def test_gen_default_counts(tmp_path):
    cfg = desk_profile()
    m = pipeline.cmd_gen(cfg, tmp_path)
    assert len(m["examples"]) == 1056
    assert sum(e["split"] == "train" for e in m["examples"]) == 844
    assert m["counts"] == {"Normal": [229, 43], "Unbalance": [205, 55], "Misalignment": [211, 53], "Rubbing": [199, 61]}


def test_gen_infeasible_counts(tmp_path):
    cfg = small_config(split={"normal": (500, 500)})
    with pytest.raises(ConfigError):
        pipeline.cmd_gen(cfg, tmp_path)
    assert not (tmp_path / "manifest.json").exists()


def test_preprocess_images_and_idempotence(run_dir):
    out, cfg = run_dir
    m = json.loads((out / "stft" / "manifest.json").read_text())
    for e in m["examples"][:10]:
        raw = (out / "stft" / e["file"]).read_bytes()
        assert raw.startswith(b"P6\n298 298\n255\n")
        assert imaging.decode_ppm(raw).shape == (298, 298, 3)
    before = tree_bytes(out / "stft" / "images")
    mtimes = {p: p.stat().st_mtime_ns for p in (out / "stft" / "images").iterdir()}
    pipeline.cmd_preprocess(cfg, out, "stft")
    assert tree_bytes(out / "stft" / "images") == before
    assert {p: p.stat().st_mtime_ns for p in (out / "stft" / "images").iterdir()} == mtimes


def test_preprocess_rejects_changed_config(run_dir):
    out, cfg = run_dir
    with pytest.raises(ConfigError):
        pipeline.cmd_preprocess(dataclasses.replace(cfg, seed=99), out, "stft")
    with pytest.raises(ConfigError):
        pipeline.cmd_train(dataclasses.replace(cfg, imaging=dataclasses.replace(cfg.imaging, range_db=60.0)),
                           out, "stft")


def test_zero_window_renders_black(tmp_path):
    cfg = desk_profile()
    for mode in ("stft", "mfcc"):
        assert not np.any(pipeline.window_to_image(np.zeros(3932), mode, cfg))


def test_render_modes(tmp_path):
    cfg = desk_profile()
    x = np.sin(2 * np.pi * 2000 / 60 * np.arange(3932) / 65536) + 0.01 * np.random.default_rng(0).normal(size=3932)
    src = tmp_path / "w.f32"
    src.write_bytes(x.astype("<f4").tobytes())
    a = pipeline.cmd_render(cfg, src, "stft", tmp_path / "a.ppm")
    pipeline.cmd_render(cfg, src, "stft", tmp_path / "a2.ppm")
    pipeline.cmd_render(cfg, src, "mfcc", tmp_path / "b.ppm")
    assert (tmp_path / "a.ppm").read_bytes() == (tmp_path / "a2.ppm").read_bytes()
    assert (tmp_path / "a.ppm").read_bytes() != (tmp_path / "b.ppm").read_bytes()
    assert a.shape == (298, 298, 3)
    (tmp_path / "bad.f32").write_bytes(b"abc")
    with pytest.raises(VibrodiagError):
        pipeline.cmd_render(cfg, tmp_path / "bad.f32", "stft", tmp_path / "c.ppm")


def test_train_trace_and_steps(run_dir):
    out, cfg = run_dir
    ck = json.loads((out / "stft" / "checkpoint" / "model.json").read_text())
    assert len(ck["trace"]) == cfg.train.epochs
    n_train = sum(a for a, _ in SMALL_SPLIT.values())
    assert all(t["steps"] == -(-n_train // 4) for t in ck["trace"])


def test_eval_report(run_dir):
    out, cfg = run_dir
    doc = json.loads((out / "stft" / "report.json").read_text())
    assert doc["n_examples"] == sum(b for _, b in SMALL_SPLIT.values())
    assert 0 <= doc["accuracy"] <= 1
    for v in doc["per_class"].values():
        assert all(0 <= v[k] <= 1 for k in ("precision", "recall", "f1"))
    assert "Misalignment" in (out / "stft" / "report.txt").read_text()


def test_leakage_canary(run_dir, tmp_path):
    out, cfg = run_dir
    copy = tmp_path / "copy"
    shutil.copytree(out, copy)
    shutil.rmtree(copy / "stft" / "checkpoint")
    m = json.loads((copy / "stft" / "manifest.json").read_text())
    rng = np.random.default_rng(0)
    for e in m["examples"]:
        if e["split"] == "test":
            imaging.write_ppm(copy / "stft" / e["file"], rng.integers(0, 256, (298, 298, 3), dtype=np.uint8))
    pipeline.cmd_train(cfg, copy, "stft")
    a = (out / "stft" / "checkpoint" / "params.bin").read_bytes()
    assert (copy / "stft" / "checkpoint" / "params.bin").read_bytes() == a


def test_features_leakage_canary(tmp_path):
    cfg = small_config()
    pipeline.cmd_gen(cfg, tmp_path)
    pipeline.cmd_preprocess(cfg, tmp_path, "features")
    pipeline.cmd_train(cfg, tmp_path, "features")
    ref = (tmp_path / "features" / "checkpoint" / "params.bin").read_bytes()
    ref_json = json.loads((tmp_path / "features" / "checkpoint" / "model.json").read_text())
    m = json.loads((tmp_path / "features" / "manifest.json").read_text())
    test_rows = {e["row"] for e in m["examples"] if e["split"] == "test"}
    table = pipeline.read_feature_table(tmp_path / "features" / "features.csv")
    table[sorted(test_rows)] = 1e6
    pipeline.write_feature_table(tmp_path / "features" / "features.csv", table)
    pipeline.cmd_train(cfg, tmp_path, "features")
    assert (tmp_path / "features" / "checkpoint" / "params.bin").read_bytes() == ref
    again = json.loads((tmp_path / "features" / "checkpoint" / "model.json").read_text())
    assert again["scaler"] == ref_json["scaler"]


def test_overfit_then_eval_on_train(tmp_path):
    cfg = small_config(
        split={"normal": (2, 1), "rubbing": (2, 1), "unbalance": (2, 1), "misalignment": (2, 1)},
        model=ModelSection(width_factor=0.125, input_side=64),
        train=TrainConfig(base_lr=0.05, batch_size=4, warmup_epochs=1, weight_decay=0.0, epochs=150,
                          milestones=(), momentum=0.9, seed=7),
    )
    pipeline.cmd_gen(cfg, tmp_path)
    pipeline.cmd_preprocess(cfg, tmp_path, "stft")
    ck = pipeline.cmd_train(cfg, tmp_path, "stft")
    assert ck["trace"][-1]["loss"] <= 0.01
    report = pipeline.cmd_eval(cfg, tmp_path, "stft", split="train")
    assert report.accuracy == 1.0
    assert (tmp_path / "stft" / "report_train.json").exists()


def test_corrupt_checkpoint_writes_no_report(run_dir, tmp_path):
    out, cfg = run_dir
    copy = tmp_path / "copy"
    shutil.copytree(out, copy)
    (copy / "stft" / "report.json").unlink()
    blob = copy / "stft" / "checkpoint" / "params.bin"
    blob.write_bytes(blob.read_bytes()[:-8])
    with pytest.raises(CheckpointError):
        pipeline.cmd_eval(cfg, copy, "stft")
    assert not (copy / "stft" / "report.json").exists()


def test_missing_preprocessing(tmp_path):
    cfg = small_config()
    pipeline.cmd_gen(cfg, tmp_path)
    with pytest.raises(VibrodiagError, match="preprocess"):
        pipeline.cmd_train(cfg, tmp_path, "mfcc")
    for f in (tmp_path / "raw").glob("*.f32"):
        f.unlink()
    with pytest.raises(VibrodiagError, match="missing"):
        pipeline.cmd_preprocess(cfg, tmp_path, "stft")


def test_report_rows_and_rounding(run_dir, tmp_path):
    out, cfg = run_dir
    rep = out / "stft" / "report.json"
    one = pipeline.cmd_report([rep])
    assert len(one.strip().splitlines()) == 2 + 4
    two = pipeline.cmd_report([rep, rep], tmp_path / "cmp.txt")
    lines = two.strip().splitlines()[2:]
    assert len(lines) == 8
    doc = json.loads(rep.read_text())
    normal = [ln for ln in lines if ln.startswith("Normal")][0].split()
    assert normal[-1] == f"{doc['per_class']['Normal']['f1']:.2f}"
    assert normal[-4] == f"{doc['accuracy']:.2f}"
    assert (tmp_path / "cmp.txt").read_text() == two
    with pytest.raises(VibrodiagError):
        pipeline.cmd_report([])


def test_fingerprint_tracks_output_fields():
    cfg = desk_profile()
    fp = pipeline.mode_fingerprint(cfg, "stft")
    assert pipeline.mode_fingerprint(cfg, "stft") == fp
    assert pipeline.mode_fingerprint(dataclasses.replace(cfg, seed=8), "stft") != fp
    assert pipeline.mode_fingerprint(cfg, "mfcc") != fp
    changed = dataclasses.replace(cfg, imaging=dataclasses.replace(cfg.imaging, range_db=70.0))
    assert pipeline.mode_fingerprint(changed, "stft") != fp
    assert pipeline.mode_fingerprint(changed, "features") == pipeline.mode_fingerprint(cfg, "features")


def test_config_strictness():
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict({"rotor": {"rmp": 3000}})
    with pytest.raises(ConfigError):
        config_from_dict({"profile": "laptop"})
    with pytest.raises(ConfigError):
        config_from_dict({"mel": {"f_max": 40000}})
    cfg = config_from_dict({"profile": "desk", "seed": 3, "rotor": {"class_params": {"normal": {"a1": 2.0}}}})
    assert cfg.seed == cfg.train.seed == 3
    assert cfg.rotor.class_params["normal"].a1 == 2.0
    assert cfg.model.width_factor == 0.125


@pytest.mark.parametrize("name", sorted(PROFILES))
def test_shipped_configs_match_profiles(name):
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "configs" / f"{name}.yaml"
    assert load_config(path) == PROFILES[name]()
