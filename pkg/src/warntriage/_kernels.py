"""Numeric kernels for the baseline classifier.

The embedding-bag forward/backward passes dominate training time, so they
carry numba @njit compilation with a pure-numpy fallback. The backend is
selected once at import: set WARNTRIAGE_NUMBA=0 to force the numpy path
(numba merely missing also falls back). `benchmarks/bench_kernels.py`
compares the two.

Sequences are packed CSR-style: `tok` holds all token indices back to back,
`offsets[i]:offsets[i+1]` delimits example i.
"""

from __future__ import annotations

import math
import os

import numpy as np

_FLAG = os.environ.get("WARNTRIAGE_NUMBA", "1").strip().lower()
USE_NUMBA = _FLAG not in ("0", "false", "off", "no")
if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:
        USE_NUMBA = False


# ---------------------------------------------------------------------------
# numba path: explicit loops, compiled


def _forward_probs_loops(tok, offsets, emb, w, b, out):
    n = offsets.shape[0] - 1
    d = emb.shape[1]
    h = np.zeros(d)
    for i in range(n):
        lo = offsets[i]
        hi = offsets[i + 1]
        for j in range(d):
            h[j] = 0.0
        for t in range(lo, hi):
            row = tok[t]
            for j in range(d):
                h[j] += emb[row, j]
        length = hi - lo
        if length > 0:
            for j in range(d):
                h[j] /= length
        l0 = b[0]
        l1 = b[1]
        for j in range(d):
            l0 += h[j] * w[j, 0]
            l1 += h[j] * w[j, 1]
        m = l0 if l0 > l1 else l1
        e0 = math.exp(l0 - m)
        e1 = math.exp(l1 - m)
        z = e0 + e1
        out[i, 0] = e0 / z
        out[i, 1] = e1 / z


def _train_epoch_loops(tok, offsets, labels, order, batch_size, lr, emb, w, b):
    n = order.shape[0]
    d = emb.shape[1]
    total_loss = 0.0
    h = np.zeros((batch_size, d))
    dl = np.zeros((batch_size, 2))
    dh = np.zeros((batch_size, d))
    start = 0
    while start < n:
        stop = min(start + batch_size, n)
        bs = stop - start
        for bi in range(bs):
            i = order[start + bi]
            lo = offsets[i]
            hi = offsets[i + 1]
            for j in range(d):
                h[bi, j] = 0.0
            for t in range(lo, hi):
                row = tok[t]
                for j in range(d):
                    h[bi, j] += emb[row, j]
            length = hi - lo
            if length > 0:
                for j in range(d):
                    h[bi, j] /= length
            l0 = b[0]
            l1 = b[1]
            for j in range(d):
                l0 += h[bi, j] * w[j, 0]
                l1 += h[bi, j] * w[j, 1]
            m = l0 if l0 > l1 else l1
            e0 = math.exp(l0 - m)
            e1 = math.exp(l1 - m)
            z = e0 + e1
            p0 = e0 / z
            p1 = e1 / z
            y = labels[i]
            total_loss += -math.log(p1 if y == 1 else p0)
            dl[bi, 0] = (p0 - (1.0 if y == 0 else 0.0)) / bs
            dl[bi, 1] = (p1 - (1.0 if y == 1 else 0.0)) / bs
            for j in range(d):
                dh[bi, j] = dl[bi, 0] * w[j, 0] + dl[bi, 1] * w[j, 1]
        # head update from pre-update h, then embedding update
        for bi in range(bs):
            for j in range(d):
                w[j, 0] -= lr * h[bi, j] * dl[bi, 0]
                w[j, 1] -= lr * h[bi, j] * dl[bi, 1]
            b[0] -= lr * dl[bi, 0]
            b[1] -= lr * dl[bi, 1]
        for bi in range(bs):
            i = order[start + bi]
            lo = offsets[i]
            hi = offsets[i + 1]
            length = hi - lo
            if length > 0:
                scale = lr / length
                for t in range(lo, hi):
                    row = tok[t]
                    for j in range(d):
                        emb[row, j] -= scale * dh[bi, j]
        start = stop
    return total_loss


def _loss_and_grads_loops(tok, offsets, labels, emb, w, b, gemb, gw, gb):
    n = offsets.shape[0] - 1
    d = emb.shape[1]
    total_loss = 0.0
    h = np.zeros(d)
    for i in range(n):
        lo = offsets[i]
        hi = offsets[i + 1]
        for j in range(d):
            h[j] = 0.0
        for t in range(lo, hi):
            row = tok[t]
            for j in range(d):
                h[j] += emb[row, j]
        length = hi - lo
        if length > 0:
            for j in range(d):
                h[j] /= length
        l0 = b[0]
        l1 = b[1]
        for j in range(d):
            l0 += h[j] * w[j, 0]
            l1 += h[j] * w[j, 1]
        m = l0 if l0 > l1 else l1
        e0 = math.exp(l0 - m)
        e1 = math.exp(l1 - m)
        z = e0 + e1
        p0 = e0 / z
        p1 = e1 / z
        y = labels[i]
        total_loss += -math.log(p1 if y == 1 else p0)
        d0 = (p0 - (1.0 if y == 0 else 0.0)) / n
        d1 = (p1 - (1.0 if y == 1 else 0.0)) / n
        gb[0] += d0
        gb[1] += d1
        for j in range(d):
            gw[j, 0] += h[j] * d0
            gw[j, 1] += h[j] * d1
        if length > 0:
            for t in range(lo, hi):
                row = tok[t]
                for j in range(d):
                    gemb[row, j] += (d0 * w[j, 0] + d1 * w[j, 1]) / length
    return total_loss / n


# ---------------------------------------------------------------------------
# numpy path: vectorized


def _segment_means(tok, offsets, emb):
    n = offsets.shape[0] - 1
    d = emb.shape[1]
    lengths = np.diff(offsets)
    sums = np.zeros((n, d))
    if tok.shape[0]:
        seg = np.repeat(np.arange(n), lengths)
        np.add.at(sums, seg, emb[tok])
    safe = np.maximum(lengths, 1)[:, None]
    return sums / safe, lengths


def _softmax2(logits):
    m = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - m)
    return e / e.sum(axis=1, keepdims=True)


def _forward_probs_numpy(tok, offsets, emb, w, b, out):
    h, _ = _segment_means(tok, offsets, emb)
    out[:] = _softmax2(h @ w + b)


def _train_epoch_numpy(tok, offsets, labels, order, batch_size, lr, emb, w, b):
    n = order.shape[0]
    total_loss = 0.0
    lengths = np.diff(offsets)
    for start in range(0, n, batch_size):
        batch = order[start:start + batch_size]
        bs = batch.shape[0]
        seg_tok = np.concatenate([tok[offsets[i]:offsets[i + 1]] for i in batch]) \
            if bs else np.empty(0, dtype=tok.dtype)
        seg_len = lengths[batch]
        seg = np.repeat(np.arange(bs), seg_len)
        h = np.zeros((bs, emb.shape[1]))
        np.add.at(h, seg, emb[seg_tok])
        h /= np.maximum(seg_len, 1)[:, None]
        probs = _softmax2(h @ w + b)
        y = labels[batch]
        total_loss += -np.log(probs[np.arange(bs), y]).sum()
        dl = probs.copy()
        dl[np.arange(bs), y] -= 1.0
        dl /= bs
        dh = dl @ w.T
        w -= lr * (h.T @ dl)
        b -= lr * dl.sum(axis=0)
        scaled = dh / np.maximum(seg_len, 1)[:, None]
        np.add.at(emb, seg_tok, -lr * scaled[seg])
    return float(total_loss)


def _loss_and_grads_numpy(tok, offsets, labels, emb, w, b, gemb, gw, gb):
    n = offsets.shape[0] - 1
    h, lengths = _segment_means(tok, offsets, emb)
    probs = _softmax2(h @ w + b)
    y = labels
    total_loss = float(-np.log(probs[np.arange(n), y]).mean())
    dl = probs.copy()
    dl[np.arange(n), y] -= 1.0
    dl /= n
    gw += h.T @ dl
    gb += dl.sum(axis=0)
    dh = dl @ w.T
    scaled = dh / np.maximum(lengths, 1)[:, None]
    if tok.shape[0]:
        seg = np.repeat(np.arange(n), lengths)
        np.add.at(gemb, tok, scaled[seg])
    return total_loss


if USE_NUMBA:
    BACKEND = "numba"
    forward_probs = njit(cache=True)(_forward_probs_loops)
    train_epoch = njit(cache=True)(_train_epoch_loops)
    loss_and_grads = njit(cache=True)(_loss_and_grads_loops)
else:
    BACKEND = "numpy"
    forward_probs = _forward_probs_numpy
    train_epoch = _train_epoch_numpy
    loss_and_grads = _loss_and_grads_numpy
