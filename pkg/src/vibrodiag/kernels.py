"""Hot inner loops, each in a numba flavour (``*_nb``) and a numpy flavour (``*_np``).

The public names at the bottom dispatch on :data:`vibrodiag._accel.USE_NUMBA`.
Both flavours evaluate floating-point expressions in the same order, so the
outputs agree to the last bit for the resampling and pooling kernels and to
rounding for the FFT.
"""
import numpy as np

from ._accel import USE_NUMBA, optional_njit


# ---------------------------------------------------------------- FFT

def bit_reverse_indices(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


def twiddles(n):
    """exp(-2*pi*i*k/n) for k < n/2, evaluated directly (no recurrence drift)."""
    k = np.arange(n // 2)
    return np.exp(-2j * np.pi * k / n)


@optional_njit()
def fft_rows_nb(x, rev, tw):
    rows, n = x.shape
    out = np.empty_like(x)
    for r in range(rows):
        for i in range(n):
            out[r, i] = x[r, rev[i]]
        m = 2
        while m <= n:
            half = m // 2
            step = n // m
            for start in range(0, n, m):
                for j in range(half):
                    t = tw[j * step] * out[r, start + j + half]
                    u = out[r, start + j]
                    out[r, start + j] = u + t
                    out[r, start + j + half] = u - t
            m *= 2
    return out


def fft_rows_np(x, rev, tw):
    rows, n = x.shape
    out = x[:, rev].copy()
    m = 2
    while m <= n:
        half = m // 2
        v = out.reshape(rows, n // m, m)
        t = tw[:: n // m][:half] * v[:, :, half:]
        u = v[:, :, :half].copy()
        v[:, :, :half] = u + t
        v[:, :, half:] = u - t
        m *= 2
    return out


# ---------------------------------------------------------------- bilinear

def _axis_coords(n_in, n_out):
    if n_out == 1 or n_in == 1:
        pos = np.zeros(n_out)
    else:
        pos = np.arange(n_out) * (n_in - 1) / (n_out - 1)
    lo = np.minimum(np.floor(pos).astype(np.int64), n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, pos - lo


@optional_njit()
def bilinear_nb(src, y0, y1, ty, x0, x1, tx):
    h_out = y0.shape[0]
    w_out = x0.shape[0]
    ch = src.shape[2]
    out = np.empty((h_out, w_out, ch))
    for i in range(h_out):
        a = y0[i]
        b = y1[i]
        fy = ty[i]
        for j in range(w_out):
            c = x0[j]
            d = x1[j]
            fx = tx[j]
            for k in range(ch):
                top = (1.0 - fx) * src[a, c, k] + fx * src[a, d, k]
                bot = (1.0 - fx) * src[b, c, k] + fx * src[b, d, k]
                out[i, j, k] = (1.0 - fy) * top + fy * bot
    return out


def bilinear_np(src, y0, y1, ty, x0, x1, tx):
    fx = tx[None, :, None]
    fy = ty[:, None, None]
    ra = src[y0]
    rb = src[y1]
    top = (1.0 - fx) * ra[:, x0] + fx * ra[:, x1]
    bot = (1.0 - fx) * rb[:, x0] + fx * rb[:, x1]
    return (1.0 - fy) * top + fy * bot


def bilinear_resample(src, out_h, out_w):
    """Corner-aligned bilinear resampling of an (H, W) or (H, W, C) float grid."""
    src = np.asarray(src, dtype=np.float64)
    squeeze = src.ndim == 2
    if squeeze:
        src = src[:, :, None]
    y0, y1, ty = _axis_coords(src.shape[0], out_h)
    x0, x1, tx = _axis_coords(src.shape[1], out_w)
    fn = bilinear_nb if USE_NUMBA else bilinear_np
    out = fn(np.ascontiguousarray(src), y0, y1, ty, x0, x1, tx)
    return out[:, :, 0] if squeeze else out


# ---------------------------------------------------------------- conv helpers

@optional_njit()
def im2col3_nb(x):
    n, c, h, w = x.shape
    cols = np.zeros((n, c * 9, h * w), dtype=x.dtype)
    for b in range(n):
        for ch in range(c):
            for ky in range(3):
                for kx in range(3):
                    row = ch * 9 + ky * 3 + kx
                    for i in range(h):
                        si = i + ky - 1
                        if si < 0 or si >= h:
                            continue
                        for j in range(w):
                            sj = j + kx - 1
                            if 0 <= sj < w:
                                cols[b, row, i * w + j] = x[b, ch, si, sj]
    return cols


def im2col3_np(x):
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = np.empty((n, c, 9, h, w), dtype=x.dtype)
    for ky in range(3):
        for kx in range(3):
            cols[:, :, ky * 3 + kx] = xp[:, :, ky:ky + h, kx:kx + w]
    return cols.reshape(n, c * 9, h * w)


@optional_njit()
def col2im3_nb(cols, c, h, w):
    n = cols.shape[0]
    dx = np.zeros((n, c, h, w), dtype=cols.dtype)
    for t in range(9):
        ky = t // 3
        kx = t % 3
        for b in range(n):
            for ch in range(c):
                row = ch * 9 + t
                for i in range(h):
                    si = i + ky - 1
                    if si < 0 or si >= h:
                        continue
                    for j in range(w):
                        sj = j + kx - 1
                        if 0 <= sj < w:
                            dx[b, ch, si, sj] += cols[b, row, i * w + j]
    return dx


def col2im3_np(cols, c, h, w):
    n = cols.shape[0]
    cols = cols.reshape(n, c, 9, h, w)
    dxp = np.zeros((n, c, h + 2, w + 2), dtype=cols.dtype)
    for t in range(9):
        ky, kx = divmod(t, 3)
        dxp[:, :, ky:ky + h, kx:kx + w] += cols[:, :, t]
    return dxp[:, :, 1:h + 1, 1:w + 1].copy()


# ---------------------------------------------------------------- max pooling

@optional_njit()
def maxpool2_nb(x):
    n, c, h, w = x.shape
    h2 = h // 2
    w2 = w // 2
    out = np.empty((n, c, h2, w2), dtype=x.dtype)
    arg = np.empty((n, c, h2, w2), dtype=np.int8)
    for b in range(n):
        for ch in range(c):
            for i in range(h2):
                for j in range(w2):
                    best = x[b, ch, 2 * i, 2 * j]
                    k = 0
                    for q in range(1, 4):
                        v = x[b, ch, 2 * i + q // 2, 2 * j + q % 2]
                        if v > best:
                            best = v
                            k = q
                    out[b, ch, i, j] = best
                    arg[b, ch, i, j] = k
    return out, arg


def maxpool2_np(x):
    n, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    blocks = x[:, :, : 2 * h2, : 2 * w2].reshape(n, c, h2, 2, w2, 2)
    blocks = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h2, w2, 4)
    arg = blocks.argmax(axis=-1).astype(np.int8)
    out = np.take_along_axis(blocks, arg[..., None].astype(np.int64), axis=-1)[..., 0]
    return out, arg


@optional_njit()
def maxpool2_backward_nb(dout, arg, h, w):
    n, c, h2, w2 = dout.shape
    dx = np.zeros((n, c, h, w), dtype=dout.dtype)
    for b in range(n):
        for ch in range(c):
            for i in range(h2):
                for j in range(w2):
                    q = arg[b, ch, i, j]
                    dx[b, ch, 2 * i + q // 2, 2 * j + q % 2] = dout[b, ch, i, j]
    return dx


def maxpool2_backward_np(dout, arg, h, w):
    n, c, h2, w2 = dout.shape
    onehot = (np.arange(4, dtype=np.int8) == arg[..., None]) * dout[..., None]
    blocks = onehot.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    dx = np.zeros((n, c, h, w), dtype=dout.dtype)
    dx[:, :, : 2 * h2, : 2 * w2] = blocks.reshape(n, c, 2 * h2, 2 * w2)
    return dx


if USE_NUMBA:
    fft_rows, im2col3, col2im3 = fft_rows_nb, im2col3_nb, col2im3_nb
    maxpool2, maxpool2_backward = maxpool2_nb, maxpool2_backward_nb
else:
    fft_rows, im2col3, col2im3 = fft_rows_np, im2col3_np, col2im3_np
    maxpool2, maxpool2_backward = maxpool2_np, maxpool2_backward_np
