"""Regenerate src/vibrodiag/data/colormap.rgb (black -> violet -> orange -> pale yellow).

The shipped asset is versioned; rerun only when deliberately changing the map.
"""
import pathlib

import numpy as np

ANCHORS = np.array([
    [0.0, 0, 0, 0],
    [0.25, 87, 16, 110],
    [0.5, 188, 55, 84],
    [0.75, 249, 142, 9],
    [1.0, 252, 255, 164],
])


def build():
    t = np.linspace(0.0, 1.0, 256)
    rgb = np.stack([np.interp(t, ANCHORS[:, 0], ANCHORS[:, k]) for k in (1, 2, 3)], axis=1)
    table = np.rint(rgb).astype(np.uint8)
    lum = table @ np.array([0.299, 0.587, 0.114])
    assert np.all(np.diff(lum) > 0), "luminance must increase strictly"
    return table


if __name__ == "__main__":
    out = pathlib.Path(__file__).resolve().parents[1] / "src" / "vibrodiag" / "data" / "colormap.rgb"
    out.write_bytes(build().tobytes())
    print(out)
