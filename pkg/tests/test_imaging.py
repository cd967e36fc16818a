import hashlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vibrodiag import imaging, kernels
from vibrodiag.imaging import default_colormap

COLORMAP_SHA256 = "8fefd1c143a41c9f2820fb1c30e7a2eea44103158b7b6e4102b8b44b72507da2"


def bilinear_oracle(img, out_h, out_w):
    """Per-pixel corner-aligned bilinear interpolation, written out longhand."""
    h, w, _ = img.shape
    out = np.zeros((out_h, out_w, 3))
    for i in range(out_h):
        y = i * (h - 1) / (out_h - 1)
        y0 = min(int(y), h - 1)
        y1 = min(y0 + 1, h - 1)
        fy = y - y0
        for j in range(out_w):
            x = j * (w - 1) / (out_w - 1)
            x0 = min(int(x), w - 1)
            x1 = min(x0 + 1, w - 1)
            fx = x - x0
            out[i, j] = (
                img[y0, x0] * (1 - fy) * (1 - fx) + img[y0, x1] * (1 - fy) * fx
                + img[y1, x0] * fy * (1 - fx) + img[y1, x1] * fy * fx
            )
    return out


def test_colormap_asset_pinned():
    cmap = default_colormap()
    assert len(cmap.to_bytes()) == 768
    assert hashlib.sha256(cmap.to_bytes()).hexdigest() == COLORMAP_SHA256
    assert np.all(np.diff(cmap.luminance()) > 0)
    assert tuple(cmap.table[0]) == (0, 0, 0)


def test_to_db_normalized_examples():
    s = np.array([[1.0, 1e-4], [0.5, 2.0]])
    d = imaging.to_db_normalized(s, 80.0)
    assert d[1, 1] == 1.0
    assert imaging.to_db_normalized(np.array([[2.0, 2.0 * 10 ** (-80 / 20)]]), 80.0)[0, 1] == pytest.approx(0.0, abs=1e-12)
    assert np.all(imaging.to_db_normalized(np.zeros((6, 513))) == 0.0)
    assert np.all((d >= 0) & (d <= 1))
    with pytest.raises(ValueError):
        imaging.to_db_normalized(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        imaging.to_db_normalized(s, 0.0)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (5, 7), elements=st.floats(1e-6, 1e3)), st.floats(1e-3, 1e3))
def test_to_db_normalized_gain_invariant(s, c):
    a = imaging.to_db_normalized(c * s)
    b = imaging.to_db_normalized(s)
    assert np.max(np.abs(a - b)) < 1e-9


def test_minmax_normalized():
    m = np.array([[-2.0, 0.0], [1.0, 2.0]])
    np.testing.assert_allclose(imaging.minmax_normalized(m), [[0, 0.5], [0.75, 1.0]])
    assert np.all(imaging.minmax_normalized(np.full((3, 3), 4.2)) == 0)


def test_render_constant_and_size():
    img = imaging.render(np.full((513, 6), 0.5))
    assert img.shape == (288, 432, 3) and img.dtype == np.uint8
    assert np.all(img == default_colormap().table[128])


def test_render_corners_and_orientation():
    cmap = default_colormap()
    grid = np.array([[0.1, 0.9], [0.4, 0.7]])  # row 0 = lowest frequency
    img = imaging.render(grid)
    lut = {tuple(cmap.table[i]): i for i in range(256)}
    corners = {(287, 0): 0.1, (287, 431): 0.9, (0, 0): 0.4, (0, 431): 0.7}
    for (r, c), v in corners.items():
        assert abs(lut[tuple(img[r, c])] / 255 - v) <= 1 / 255


def test_render_deterministic():
    g = np.random.default_rng(0).random((513, 6))
    assert imaging.render(g).tobytes() == imaging.render(g.copy()).tobytes()
    with pytest.raises(ValueError):
        imaging.render(np.zeros((0, 4)))


def test_resize_constant_identity_and_gradient():
    const = np.full((288, 432, 3), (10, 200, 77), dtype=np.uint8)
    assert np.all(imaging.resize(const) == (10, 200, 77))
    img = np.random.default_rng(1).integers(0, 256, (20, 30, 3), dtype=np.uint8)
    np.testing.assert_array_equal(imaging.resize(img, 20, 30), img)
    yy, xx = np.mgrid[0:36, 0:54]
    grad = np.stack([xx * 4, yy * 7, (xx + yy) * 2], axis=-1).astype(np.uint8)
    out = imaging.resize(grad, 29, 29)
    assert out.shape == (29, 29, 3)
    assert np.max(np.abs(out.astype(float) - bilinear_oracle(grad.astype(float), 29, 29))) <= 1.0


def test_bilinear_backends_bit_identical():
    src = np.random.default_rng(2).random((17, 23, 3))
    coords = kernels._axis_coords(17, 40) + kernels._axis_coords(23, 9)
    a = kernels.bilinear_nb(src, *coords)
    b = kernels.bilinear_np(src, *coords)
    assert a.tobytes() == b.tobytes()


def test_input_tensor():
    black = np.zeros((298, 298, 3), dtype=np.uint8)
    t = imaging.to_input_tensor(black)
    assert t.shape == (3, 298, 298) and np.all(t == 0)
    white = np.full((298, 298, 3), 255, dtype=np.uint8)
    assert np.all(imaging.to_input_tensor(white) == 1.0)
    with pytest.raises(ValueError):
        imaging.to_input_tensor(np.zeros((10, 10, 3), dtype=np.uint8))


def test_tensor_byte_roundtrip_exhaustive():
    vals = np.arange(256, dtype=np.uint8)
    img = np.stack([vals, vals[::-1], vals], axis=-1).reshape(16, 16, 3)
    t = imaging.to_input_tensor(img, side=16)
    np.testing.assert_array_equal(imaging.from_input_tensor(t), img)


def test_ppm_roundtrip(tmp_path):
    img = np.random.default_rng(3).integers(0, 256, (298, 298, 3), dtype=np.uint8)
    raw = imaging.encode_ppm(img)
    assert raw.startswith(b"P6\n298 298\n255\n")
    assert len(raw) == len(b"P6\n298 298\n255\n") + 298 * 298 * 3
    imaging.write_ppm(tmp_path / "a.ppm", img)
    np.testing.assert_array_equal(imaging.read_ppm(tmp_path / "a.ppm"), img)
    with pytest.raises(ValueError):
        imaging.decode_ppm(b"P5\n2 2\n255\n" + bytes(4))
    with pytest.raises(ValueError):
        imaging.decode_ppm(b"P6\n2 2\n255\n" + bytes(5))
