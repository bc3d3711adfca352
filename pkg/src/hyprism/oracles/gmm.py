"""Textbook EM for a one-dimensional Gaussian mixture."""

from __future__ import annotations

import numpy as np


def gmm_em_reference(data, K: int, init, iters: int = 1) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Run ``iters`` EM iterations from ``init = (weights, means, variances)``.

    Returns ``(weights, means, variances)`` after every iteration.
    """
    x = np.asarray(data, dtype=float)
    w, mu, var = (np.asarray(a, dtype=float).copy() for a in init)
    if not (len(w) == len(mu) == len(var) == K):
        raise ValueError("init does not have K components")
    out = []
    for _ in range(iters):
        dens = np.exp(-((x[:, None] - mu[None, :]) ** 2) / (2 * var[None, :])) / np.sqrt(2 * np.pi * var[None, :])
        weighted = w[None, :] * dens
        resp = weighted / weighted.sum(axis=1, keepdims=True)
        nk = resp.sum(axis=0)
        w = nk / len(x)
        mu = (resp * x[:, None]).sum(axis=0) / nk
        var = (resp * (x[:, None] - mu[None, :]) ** 2).sum(axis=0) / nk
        out.append((w.copy(), mu.copy(), var.copy()))
    return out
