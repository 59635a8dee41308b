"""Pure-numpy fallback kernels, contract- and bit-identical to the compiled
versions in ``_kernels.pyx`` (same accumulation order per output value)."""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def best_stump(Q: np.ndarray, w: np.ndarray, y: np.ndarray, idx: np.ndarray, nbins: int):
    """Best weighted decision stump over quantized features; see the compiled
    kernel for the exact contract (min weighted error, lowest feature then
    lowest bin on ties)."""
    d = Q.shape[1]
    Qs = Q[idx]
    ws = w[idx]
    ys = y[idx]
    offsets = np.arange(d, dtype=np.int64) * nbins
    flat = Qs.astype(np.int64) + offsets[None, :]
    wp = np.where(ys > 0, ws, 0.0)
    wn = np.where(ys > 0, 0.0, ws)
    hp = np.bincount(flat.ravel(), weights=np.repeat(wp, d), minlength=d * nbins).reshape(d, nbins)
    hn = np.bincount(flat.ravel(), weights=np.repeat(wn, d), minlength=d * nbins).reshape(d, nbins)

    lp = np.cumsum(hp[:, :-1], axis=1)
    ln = np.cumsum(hn[:, :-1], axis=1)
    # Suffix sums accumulated from the top bin down, matching the compiled
    # kernel's accumulation order bit for bit.
    rp = np.cumsum(hp[:, ::-1], axis=1)[:, ::-1][:, 1:]
    rn = np.cumsum(hn[:, ::-1], axis=1)[:, ::-1][:, 1:]
    err = np.minimum(lp, ln) + np.minimum(rp, rn)
    flat_best = int(np.argmin(err))
    f, b = divmod(flat_best, nbins - 1)
    return f, b, float(err[f, b])


def cascade_scan(
    F: np.ndarray,
    tc: np.ndarray,
    ty: np.ndarray,
    tx: np.ndarray,
    thr: np.ndarray,
    leaf: np.ndarray,
    stage_thr: np.ndarray,
    window: int,
    stride: int,
    early_exit: bool = True,
):
    """Soft-cascade scan over every grid-aligned window; see the compiled
    kernel for the contract.  Trees run sequentially with an active-window
    mask standing in for per-window early exit; with early_exit disabled
    every window accumulates all trees but the stage thresholds still
    decide the passed flag."""
    _, H, W = F.shape
    T = tc.shape[0]
    ny = (H - window) // stride + 1 if H >= window else 0
    nx = (W - window) // stride + 1 if W >= window else 0

    score = np.zeros((ny, nx))
    ntrees = np.zeros((ny, nx), dtype=np.int32)
    votes = np.zeros((ny, nx), dtype=np.int32)
    active = np.ones((ny, nx), dtype=bool)
    ok = np.ones((ny, nx), dtype=bool)
    if ny == 0 or nx == 0 or T == 0:
        return score, ntrees, votes, active.astype(np.uint8)

    def grid(c, dy, dx):
        return F[c, dy : dy + ny * stride : stride, dx : dx + nx * stride : stride]

    for t in range(T):
        v0 = grid(tc[t, 0], ty[t, 0], tx[t, 0])
        go_left = v0 < thr[t, 0]
        v1 = np.where(go_left, grid(tc[t, 1], ty[t, 1], tx[t, 1]), grid(tc[t, 2], ty[t, 2], tx[t, 2]))
        node_thr = np.where(go_left, thr[t, 1], thr[t, 2])
        below = v1 < node_thr
        out = np.where(
            go_left,
            np.where(below, leaf[t, 0], leaf[t, 1]),
            np.where(below, leaf[t, 2], leaf[t, 3]),
        )
        score[active] += out[active]
        ntrees[active] += 1
        votes[active & (out > 0)] += 1
        ok &= ~active | (score >= stage_thr[t])
        if early_exit:
            active &= score >= stage_thr[t]

    return score, ntrees, votes, (active & ok).astype(np.uint8)
