"""Numpy implementations of the hot per-step kernels.

Same signatures as the compiled ``_ckernels`` module. Expert state lives in
row-major arrays with one row per active expert (birth order) and one column
per model; only the first ``n`` rows are read or written.
"""

import numpy as np


def raps_scores(probs, u, xi, k_reg, out):
    k = probs.shape[1]
    for r in range(probs.shape[0]):
        p = probs[r]
        asc = np.sort(p)
        desc_csum = np.cumsum(asc[::-1])
        n_lt = np.searchsorted(asc, p, side="left")
        n_le = np.searchsorted(asc, p, side="right")
        k_y = k - n_lt
        n_gt = k - n_le
        rho = np.where(n_gt > 0, desc_csum[np.maximum(n_gt - 1, 0)], 0.0)
        out[r] = xi * np.sqrt(np.maximum(k_y - k_reg, 0).astype(np.float64)) + u * p + rho


def aggregate(alpha, logw, logh, n, wbar, hbar, mass):
    lh = logh[:n]
    e = np.exp(lh - lh.max())
    hbar[:n] = e / e.sum()
    lw = logw[:n]
    ew = np.exp(lw - lw.max(axis=1, keepdims=True))
    wbar[:n] = ew / ew.sum(axis=1, keepdims=True)
    joint = hbar[:n, None] * wbar[:n]
    mass[:] = joint.sum(axis=0)
    return float((joint * alpha[:n]).sum())


def update(alpha, cumsq, logw, logh, eps, wbar, hbar, n, alpha_bars,
           target, eta, sel_n, sel_m, sign):
    a = alpha[:n]
    diff = alpha_bars[None, :] - a
    loss = target * diff - np.minimum(0.0, diff)
    miss = (alpha_bars[None, :] < a).astype(np.float64)
    joint = hbar[:n, None] * wbar[:n]
    expected_err = float((joint * miss).sum())
    if sel_n >= 0:
        learner_loss = float(loss[sel_n, sel_m])
        expert_loss = loss[:, sel_m]
    else:
        learner_loss = float((joint * loss).sum())
        expert_loss = (wbar[:n] * loss).sum(axis=1)
    e = eps[:n]
    logw[:n] -= e[:, None] * loss
    grad = miss - target
    cs = cumsq[:n] + grad * grad
    cumsq[:n] = cs
    safe = np.where(cs > 0, np.sqrt(np.where(cs > 0, cs, 1.0)), 1.0)
    alpha[:n] = np.where(cs > 0, a - eta * grad / safe, a)
    logh[:n] += sign * e * (learner_loss - expert_loss)
    return learner_loss, expected_err
