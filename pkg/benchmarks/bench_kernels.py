"""Compare the numba kernels with their pure-numpy twins.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel pair is timed in-process (both variants are always importable);
the training-step row runs two subprocesses, one per VIBRODIAG_NUMBA setting,
because the backend is chosen at import time.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from vibrodiag import kernels

TRAIN_STEP = """
import time, numpy as np
from threadpoolctl import threadpool_limits
from vibrodiag.nn import Network, OptimState, TrainConfig, build_vgg19_gap, sgd_step
from vibrodiag.nn.functional import softmax_cross_entropy
net = Network(build_vgg19_gap(0.125, 64, 4), seed=1)
x = np.random.default_rng(0).random((4, 3, 64, 64)).astype(np.float32)
y = np.arange(4)
cfg = TrainConfig(weight_decay=5e-4)
ps = net.parameters()
st = OptimState.like([p.values for p in ps])
def step():
    _, g = softmax_cross_entropy(net.forward(x, True), y)
    net.backward(g)
    sgd_step([p.values for p in ps], [p.grad for p in ps], st, 0.01, cfg)
with threadpool_limits(1):
    for _ in range(3):
        step()
    t = time.perf_counter()
    for _ in range({n}):
        step()
print((time.perf_counter() - t) / {n})
"""


def cases():
    rng = np.random.default_rng(0)
    rows = rng.normal(size=(6, 1024)).astype(np.complex128)
    rev, tw = kernels.bit_reverse_indices(1024), kernels.twiddles(1024)
    grid = rng.random((288, 432, 3))
    coords = kernels._axis_coords(288, 298) + kernels._axis_coords(432, 298)
    act = rng.normal(size=(4, 8, 64, 64)).astype(np.float32)
    cols = kernels.im2col3_np(act)
    pooled, arg = kernels.maxpool2_np(act)
    return [
        ("fft 6x1024", lambda f: f(rows, rev, tw), kernels.fft_rows_nb, kernels.fft_rows_np),
        ("bilinear 432x288 -> 298", lambda f: f(grid, *coords), kernels.bilinear_nb, kernels.bilinear_np),
        ("im2col 4x8x64x64", lambda f: f(act), kernels.im2col3_nb, kernels.im2col3_np),
        ("col2im 4x8x64x64", lambda f: f(cols, 8, 64, 64), kernels.col2im3_nb, kernels.col2im3_np),
        ("maxpool 4x8x64x64", lambda f: f(act), kernels.maxpool2_nb, kernels.maxpool2_np),
        ("maxpool backward", lambda f: f(pooled, arg, 64, 64), kernels.maxpool2_backward_nb,
         kernels.maxpool2_backward_np),
    ]


def best_of(fn, repeat):
    fn()  # compile / warm caches
    number = max(1, int(0.05 / max(timeit.timeit(fn, number=1), 1e-6)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def train_step_seconds(flag, n):
    env = dict(os.environ, VIBRODIAG_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", TRAIN_STEP.format(n=n)], env=env, check=True,
                         capture_output=True, text=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, default=20, help="training steps per backend")
    args = ap.parse_args()
    print(f"{'kernel':<26}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    for name, call, nb, np_ in cases():
        t_nb = best_of(lambda: call(nb), args.repeat)
        t_np = best_of(lambda: call(np_), args.repeat)
        print(f"{name:<26}{t_nb * 1e3:>10.3f}{t_np * 1e3:>10.3f}{t_np / t_nb:>8.1f}x")
    t_nb = train_step_seconds("1", args.steps)
    t_np = train_step_seconds("0", args.steps)
    print(f"{'train step (1/8, 64, bs 4)':<26}{t_nb * 1e3:>10.1f}{t_np * 1e3:>10.1f}{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
