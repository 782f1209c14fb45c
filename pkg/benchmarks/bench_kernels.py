"""Time the numba kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 20] [--train]

Each kernel runs on shapes typical of the toy encoder (rows = batch x seq).
Numba compile time is excluded by a warm-up call.  ``--train`` also times a
short training run end to end under each backend, in fresh subprocesses so
the import-time backend switch takes effect.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from adapterlab.kernels import numba_kernels, numpy_kernels

TRAIN_SNIPPET = """
import time
from adapterlab import EncoderModel, TransformerConfig, kernels
from adapterlab.data import SyntheticTaskSpec, generate_synthetic_task
from adapterlab.tuning import TrainConfig, TuningPolicy, train
ds = generate_synthetic_task(SyntheticTaskSpec(vocab_size=48, seed=1), sizes=(256, 64, 64))
cfg = TransformerConfig(num_layers=2, model_dim=32, num_heads=2, ffn_dim=64, vocab_size=48, max_seq_len=16)
train(EncoderModel(cfg, seed=0), ds, TuningPolicy(), TrainConfig(epochs=1, peak_lr=1e-3))  # warm-up
t = time.perf_counter()
train(EncoderModel(cfg, seed=0), ds, TuningPolicy(), TrainConfig(epochs=3, peak_lr=1e-3))
print(kernels.BACKEND, time.perf_counter() - t)
"""


def cases(rows, width, vocab):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(rows, width))
    g = rng.normal(size=(rows, width))
    gain, bias = np.ones(width), np.zeros(width)
    _, xhat, rstd = numpy_kernels.layer_norm_forward(x, gain, bias, 1e-12)
    logits = rng.normal(size=(rows, vocab))
    targets = rng.integers(0, vocab, size=rows)
    probs = numpy_kernels.softmax_forward(logits)
    scores = rng.normal(size=(rows, rows))
    sim = scores @ scores.T
    return {
        "layer_norm_forward": (x, gain, bias, 1e-12),
        "layer_norm_backward": (g, xhat, rstd, gain),
        "softmax_forward": (logits,),
        "softmax_backward": (logits, probs),
        "gelu_forward": (x,),
        "gelu_backward": (g, x),
        "cross_entropy_forward": (logits, targets),
        "cross_entropy_backward": (1.0, probs, targets),
        "upper_triangle_pearson": (sim, sim + 0.1 * sim.T),
    }


def bench(repeat, rows, width, vocab):
    print(f"rows={rows} width={width} vocab={vocab} (best of {repeat}, microseconds)")
    print(f"{'kernel':26s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for name, args in cases(rows, width, vocab).items():
        f_np, f_nb = getattr(numpy_kernels, name), getattr(numba_kernels, name)
        f_nb(*args)
        t_np = min(timeit.repeat(lambda: f_np(*args), number=10, repeat=repeat)) / 10 * 1e6
        t_nb = min(timeit.repeat(lambda: f_nb(*args), number=10, repeat=repeat)) / 10 * 1e6
        print(f"{name:26s} {t_np:10.1f} {t_nb:10.1f} {t_np / t_nb:7.2f}x")


def bench_training():
    for flag in ("0", "1"):
        env = dict(os.environ, ADAPTERLAB_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", TRAIN_SNIPPET], env=env, capture_output=True, text=True, check=True)
        backend, seconds = out.stdout.split()
        print(f"training 3 epochs x 256 examples, backend {backend}: {float(seconds):.2f}s")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--train", action="store_true", help="also time a short training run per backend")
    args = parser.parse_args(argv)
    if numba_kernels is None:
        sys.exit("numba is not installed; nothing to compare")
    for rows, width, vocab in ((256, 32, 48), (2048, 64, 48)):
        bench(args.repeat, rows, width, vocab)
        print()
    if args.train:
        bench_training()


if __name__ == "__main__":
    main()
