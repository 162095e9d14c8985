#!/usr/bin/env python3
"""Benchmark the classifier kernels: numba @njit loops vs the pure-numpy
fallback, on synthetic corpora of increasing size.

Run:  python benchmarks/bench_kernels.py
Force the numpy path package-wide with WARNTRIAGE_NUMBA=0 (this script
always times both paths when numba is importable).
"""

import time

import numpy as np

from warntriage import _kernels


def synthetic(n_examples, vocab_size, mean_len, seed=0):
    rng = np.random.default_rng(seed)
    lengths = rng.integers(mean_len // 2, mean_len * 2, n_examples)
    offsets = np.concatenate(([0], np.cumsum(lengths))).astype(np.int64)
    tok = rng.integers(0, vocab_size, offsets[-1]).astype(np.int64)
    labels = rng.integers(0, 2, n_examples).astype(np.int64)
    emb = rng.normal(0, 0.1, (vocab_size, 32))
    w = rng.normal(0, 0.1, (32, 2))
    b = np.zeros(2)
    return tok, offsets, labels, emb, w, b


def time_epochs(fn, tok, offsets, labels, emb, w, b, epochs=5):
    order = np.arange(labels.shape[0], dtype=np.int64)
    emb, w, b = emb.copy(), w.copy(), b.copy()
    start = time.perf_counter()
    for _ in range(epochs):
        fn(tok, offsets, labels, order, 4, 0.05, emb, w, b)
    return time.perf_counter() - start, emb


def main():
    if _kernels.USE_NUMBA:
        from numba import njit
        numba_epoch = _kernels.train_epoch
    else:
        print("numba unavailable or disabled; timing the numpy path only")
        numba_epoch = None

    print(f"{'examples':>9} {'tokens':>9} {'numpy':>10} {'numba':>10} "
          f"{'speedup':>8} {'max|diff|':>10}")
    for n in (200, 1000, 5000, 20000):
        tok, offsets, labels, emb, w, b = synthetic(n, vocab_size=2000, mean_len=128)
        np_time, np_emb = time_epochs(_kernels._train_epoch_numpy,
                                      tok, offsets, labels, emb, w, b)
        if numba_epoch is None:
            print(f"{n:>9} {tok.shape[0]:>9} {np_time:>9.3f}s {'-':>10} {'-':>8} {'-':>10}")
            continue
        # warm the JIT before timing
        time_epochs(numba_epoch, tok[:10], offsets[:3], labels[:2], emb, w, b, epochs=1)
        nb_time, nb_emb = time_epochs(numba_epoch, tok, offsets, labels, emb, w, b)
        deviation = float(np.abs(np_emb - nb_emb).max())
        print(f"{n:>9} {tok.shape[0]:>9} {np_time:>9.3f}s {nb_time:>9.3f}s "
              f"{np_time / nb_time:>7.1f}x {deviation:>10.2e}")


if __name__ == "__main__":
    main()
