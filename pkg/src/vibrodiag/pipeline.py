"""End-to-end orchestration and on-disk artifacts.

Layout of an output directory::

    manifest.json              dataset manifest (all examples, split tags)
    raw/<class>_ch<k>.f32      recordings, float32 little-endian, + .json sidecar
    <mode>/manifest.json       per-mode manifest (image or feature paths)
    <mode>/images/*.ppm        298x298 P6 spectrogram images (stft, mfcc)
    <mode>/features.csv        30 features per example (features)
    <mode>/checkpoint/         model.json + params.bin + buffers.bin
    <mode>/report.json|.txt    evaluation on the test split
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import dsp, imaging
from .config import RunConfig, fingerprint
from .errors import ConfigError, VibrodiagError
from .features import FEATURE_NAMES, extract_features, fit_scaler, FeatureScaler
from .metrics import Report, build_report, confusion, format_confusion, format_table
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.model import Network, build_mlp, build_vgg19_gap
from .nn.train import train
from .signal import FaultClass, SampleWindow, segment_samples, segment_units, split_dataset, synthesize_recording, window_length

log = logging.getLogger(__name__)

LE_F32 = np.dtype("<f4")
MANIFEST = "manifest.json"
MODEL_LABELS = {
    "stft": "STFT-Spectrogram VGG19-GAP",
    "mfcc": "MFCC-Spectrogram VGG19-GAP",
    "features": "MLP (30 features)",
}


def _write_json(path: Path, obj):
    """Write via a temporary file so a failure never leaves a half-written document."""
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def _read_json(path: Path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise VibrodiagError(f"{path} not found") from None


def gen_fingerprint(cfg: RunConfig):
    return fingerprint(cfg.seed, cfg.rotor, cfg.segmentation, cfg.split)


def mode_fingerprint(cfg: RunConfig, mode: str):
    if mode == "features":
        return fingerprint(gen_fingerprint(cfg), mode, cfg.features)
    return fingerprint(gen_fingerprint(cfg), mode, cfg.stft, cfg.mel, cfg.imaging)


# ---------------------------------------------------------------- raw signals

def write_raw(path: Path, samples, meta: dict):
    Path(path).write_bytes(np.asarray(samples, dtype=LE_F32).tobytes())
    _write_json(Path(path).with_suffix(".json"), meta)


def read_raw(path, offset=0, length=None):
    """Samples [offset, offset+length) of a float32 recording as float64."""
    path = Path(path)
    if not path.exists():
        raise VibrodiagError(f"raw signal file {path} is missing")
    size = path.stat().st_size
    if size % 4:
        raise VibrodiagError(f"{path} is not a float32 sample file")
    n = size // 4
    length = n - offset if length is None else length
    if offset < 0 or length <= 0 or offset + length > n:
        raise VibrodiagError(f"{path}: samples [{offset}, {offset + length}) out of range")
    data = np.fromfile(path, dtype=LE_F32, count=length, offset=offset * 4)
    return data.astype(np.float64)


# ---------------------------------------------------------------- gen

def cmd_gen(cfg: RunConfig, out) -> dict:
    """Synthesize recordings for every class/channel, segment, split, and write the manifest."""
    out = Path(out)
    rotor = cfg.rotor.rotor_config(cfg.seed)
    seg = cfg.segmentation
    wlen = window_length(rotor.sample_rate, seg.window_seconds)
    raw_dir = out / "raw"
    raw_dir.mkdir(parents=True, exist_ok=True)

    windows: List[SampleWindow] = []
    for cls in FaultClass:
        for ch in range(rotor.channels):
            ts = synthesize_recording(cls, rotor, cfg.rotor.duration_s, ch)
            ts.source_id = f"{cls.name.lower()}_ch{ch}"
            rel = f"raw/{ts.source_id}.f32"
            write_raw(out / rel, ts.samples, {
                "sample_rate": rotor.sample_rate, "rpm": rotor.rpm, "class": cls.title,
                "channel": ch, "seed": cfg.seed, "n_samples": len(ts), "dtype": "float32-le",
            })
            for unit in segment_units(ts, seg.unit_seconds):
                windows.extend(segment_samples(unit, wlen, seg.windows_per_unit))

    try:
        split = split_dataset(windows, cfg.split_counts(), cfg.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    examples = []
    for tag, group in (("train", split.train), ("test", split.test)):
        for w in group:
            examples.append({
                "id": len(examples),
                "path": f"raw/{w.source_id}.f32",
                "offset": int(w.start),
                "length": wlen,
                "class": w.label.title,
                "label": int(w.label),
                "unit": w.unit_index,
                "window": w.window_index,
                "channel": w.channel_id,
                "split": tag,
            })
    manifest = {
        "fingerprint": gen_fingerprint(cfg),
        "seed": cfg.seed,
        "sample_rate": rotor.sample_rate,
        "shaft_hz": rotor.shaft_hz,
        "window_length": wlen,
        "config": cfg.to_dict(),
        "counts": {c.title: list(v) for c, v in split.counts().items()},
        "examples": examples,
    }
    _write_json(out / MANIFEST, manifest)
    log.info("generated %d examples (%d train / %d test)", len(examples), len(split.train), len(split.test))
    return manifest


def load_manifest(out) -> dict:
    m = _read_json(Path(out) / MANIFEST)
    for ex in m["examples"]:
        if not (Path(out) / ex["path"]).exists():
            raise VibrodiagError(f"manifest refers to missing file {ex['path']}")
    return m


# ---------------------------------------------------------------- window -> image

def spectrogram_grid(x, mode: str, cfg: RunConfig):
    """The [0, 1] grid (frequency/cepstral rows x frames) that gets colour-mapped."""
    sr = cfg.rotor.sample_rate
    if mode == "stft":
        spec = dsp.stft(x, cfg.stft, sr)
        return imaging.to_db_normalized(spec.magnitudes.T, cfg.imaging.range_db)
    if mode == "mfcc":
        return imaging.minmax_normalized(dsp.mfcc(x, cfg.stft, cfg.mel, sr).coefficients)
    raise ConfigError(f"mode {mode!r} does not produce images")


def window_to_image(x, mode: str, cfg: RunConfig):
    im = cfg.imaging
    canvas = imaging.render(spectrogram_grid(x, mode, cfg), None, im.canvas_width, im.canvas_height)
    return imaging.resize(canvas, im.image_side, im.image_side)


def load_input(path, side):
    img = imaging.read_ppm(path)
    if img.shape[0] != side:
        img = imaging.resize(img, side, side)
    return imaging.to_input_tensor(img, side)


# ---------------------------------------------------------------- preprocess

def cmd_preprocess(cfg: RunConfig, out, mode: Optional[str] = None) -> dict:
    """Render every manifest example to an image (or a feature row) for ``mode``.

    Reruns are skipped when the stored fingerprint matches and outputs exist.
    """
    out = Path(out)
    mode = mode or cfg.mode
    if mode not in ("stft", "mfcc", "features"):
        raise ConfigError(f"unknown mode {mode!r}")
    cfg.validate()
    base = load_manifest(out)
    if base["fingerprint"] != gen_fingerprint(cfg):
        raise ConfigError("dataset manifest was generated with a different configuration; rerun gen")
    mdir = out / mode
    fp = mode_fingerprint(cfg, mode)
    existing = mdir / MANIFEST
    if existing.exists():
        prev = _read_json(existing)
        if prev.get("fingerprint") == fp and all((mdir / e["file"]).exists() for e in prev["examples"]):
            log.info("%s outputs up to date; skipping", mode)
            return prev

    mdir.mkdir(parents=True, exist_ok=True)
    examples = []
    if mode == "features":
        rows = []
        for ex in base["examples"]:
            x = read_raw(out / ex["path"], ex["offset"], ex["length"])
            rows.append(extract_features(x, base["sample_rate"], base["shaft_hz"], cfg.features.band_half_width_hz))
            examples.append({**ex, "file": "features.csv", "row": len(rows) - 1})
        write_feature_table(mdir / "features.csv", np.array(rows))
    else:
        (mdir / "images").mkdir(exist_ok=True)
        for ex in base["examples"]:
            x = read_raw(out / ex["path"], ex["offset"], ex["length"])
            rel = f"images/{ex['id']:05d}.ppm"
            imaging.write_ppm(mdir / rel, window_to_image(x, mode, cfg))
            examples.append({**ex, "file": rel})
    manifest = {"fingerprint": fp, "dataset_fingerprint": base["fingerprint"], "mode": mode,
                "seed": base["seed"], "examples": examples}
    _write_json(existing, manifest)
    return manifest


def write_feature_table(path, feats):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FEATURE_NAMES)
        for row in feats:
            w.writerow([repr(float(v)) for v in row])


def read_feature_table(path, rows: Optional[Sequence[int]] = None):
    """Parse the table; with ``rows`` only those lines are converted."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != FEATURE_NAMES:
            raise VibrodiagError(f"{path}: unexpected feature header")
        lines = list(reader)
    pick = range(len(lines)) if rows is None else rows
    return np.array([[float(v) for v in lines[i]] for i in pick], dtype=np.float64).reshape(len(pick), len(FEATURE_NAMES))


def _mode_manifest(out: Path, mode: str, cfg: RunConfig):
    path = out / mode / MANIFEST
    if not path.exists():
        raise VibrodiagError(f"no preprocessed {mode} data in {out}; run preprocess --mode {mode} first")
    m = _read_json(path)
    if m["fingerprint"] != mode_fingerprint(cfg, mode):
        raise ConfigError(f"{mode} data was preprocessed with a different configuration; rerun preprocess")
    return m


def _split(m, tag):
    return [e for e in m["examples"] if e["split"] == tag]


def _load_examples(out: Path, mode: str, examples, cfg: RunConfig, scaler: Optional[FeatureScaler] = None):
    y = np.array([e["label"] for e in examples], dtype=np.int64)
    if mode == "features":
        feats = read_feature_table(out / mode / "features.csv", [e["row"] for e in examples])
        return feats, y
    side = cfg.model.input_side
    x = np.empty((len(examples), 3, side, side), dtype=np.float32)
    for i, e in enumerate(examples):
        x[i] = load_input(out / mode / e["file"], side)
    return x, y


# ---------------------------------------------------------------- train / eval

def cmd_train(cfg: RunConfig, out, mode: Optional[str] = None, on_epoch=None) -> dict:
    """Fit the mode's model on train-tagged examples only and write a checkpoint."""
    out = Path(out)
    mode = mode or cfg.mode
    m = _mode_manifest(out, mode, cfg)
    train_examples = _split(m, "train")
    if not train_examples:
        raise VibrodiagError("training split is empty")
    x, y = _load_examples(out, mode, train_examples, cfg)
    extra = {"mode": mode, "data_fingerprint": m["fingerprint"]}
    if mode == "features":
        scaler = fit_scaler(x)
        x = scaler.transform(x).astype(np.float32)
        spec = build_mlp(scaler.n_kept, len(FaultClass), cfg.baseline.hidden)
        tcfg = dataclasses.replace(cfg.baseline.train, seed=cfg.train.seed)
        extra["scaler"] = scaler.to_dict()
    else:
        spec = build_vgg19_gap(cfg.model.width_factor, cfg.model.input_side, len(FaultClass))
        tcfg = cfg.train
    net = Network(spec, seed=tcfg.seed)
    result = train(net, x, y, tcfg, deterministic=cfg.deterministic, on_epoch=on_epoch)
    ckpt = out / mode / "checkpoint"
    manifest = save_checkpoint(
        ckpt, net, config={"train": dataclasses.asdict(tcfg), "model": dataclasses.asdict(cfg.model)},
        seed=tcfg.seed, trace=[s.to_dict() for s in result.trace], extra=extra,
    )
    return manifest


def cmd_eval(cfg: RunConfig, out, mode: Optional[str] = None, split: str = "test") -> Report:
    """Score the checkpoint on a split; writes report.json and report.txt."""
    out = Path(out)
    mode = mode or cfg.mode
    m = _mode_manifest(out, mode, cfg)
    net, ck = load_checkpoint(out / mode / "checkpoint")
    examples = _split(m, split)
    if not examples:
        raise VibrodiagError(f"{split} split is empty")
    x, y = _load_examples(out, mode, examples, cfg)
    if mode == "features":
        x = FeatureScaler.from_dict(ck["scaler"]).transform(x).astype(np.float32)
    elif tuple(x.shape[1:]) != tuple(net.spec.input_shape):
        raise VibrodiagError(f"checkpoint expects inputs {net.spec.input_shape}, data has {x.shape[1:]}")
    preds = net.predict(x)
    report = build_report(confusion(preds, y), MODEL_LABELS[mode])
    doc = report.to_dict()
    doc.update({"mode": mode, "split": split, "n_examples": len(examples), "checkpoint_sha256": ck["params_sha256"]})
    suffix = "" if split == "test" else f"_{split}"
    _write_json(out / mode / f"report{suffix}.json", doc)
    (out / mode / f"report{suffix}.txt").write_text(
        format_table([report]) + f"\nmacro F1 {report.macro_f1:.4f}\n\n" + format_confusion(report.confusion)
    )
    return report


def cmd_baseline(cfg: RunConfig, out) -> Report:
    cmd_preprocess(cfg, out, "features")
    cmd_train(cfg, out, "features")
    return cmd_eval(cfg, out, "features")


def load_report(path) -> Report:
    return Report.from_dict(_read_json(path))


def cmd_report(paths: Sequence, dest=None) -> str:
    """Table of per-class metrics for several reports, in the published row order."""
    if not paths:
        raise VibrodiagError("no reports to compare")
    text = format_table([load_report(p) for p in paths])
    if dest is not None:
        Path(dest).write_text(text)
    return text


def find_reports(out) -> List[Path]:
    return [Path(out) / mode / "report.json" for mode in ("stft", "mfcc", "features")
            if (Path(out) / mode / "report.json").exists()]


def cmd_render(cfg: RunConfig, window_file, mode: str, dest) -> np.ndarray:
    """Render one raw float32 window file to a PPM for inspection."""
    path = Path(window_file)
    if not path.exists() or path.stat().st_size == 0 or path.stat().st_size % 4:
        raise VibrodiagError(f"{path} is not a float32 window file")
    x = read_raw(path)
    if len(x) < cfg.stft.window_length:
        raise VibrodiagError(f"window of {len(x)} samples is shorter than the STFT window")
    img = window_to_image(x, mode, cfg)
    imaging.write_ppm(dest, img)
    return img
