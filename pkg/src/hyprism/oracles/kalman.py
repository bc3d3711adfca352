"""Closed-form predict/update recursion for a scalar linear-Gaussian model.

``S_t = a * S_{t-1} + E_t``, ``E_t ~ N(0, q)``;  ``O_t = h * S_t + V_t``,
``V_t ~ N(0, r)``;  ``S_0 ~ N(m0, P0)``.  The first observation is taken
after one transition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class KalmanResult:
    step_likelihoods: tuple  # p(o_t | o_1..o_{t-1})
    means: tuple  # E[S_t | o_1..o_t]
    variances: tuple

    @property
    def likelihood(self) -> float:
        return math.prod(self.step_likelihoods)

    @property
    def log_likelihood(self) -> float:
        return math.fsum(math.log(x) for x in self.step_likelihoods)


def kalman_closed_form(m0: float, P0: float, a: float, q: float, h: float, r: float, obs) -> KalmanResult:
    m, P = m0, P0
    liks, means, variances = [], [], []
    for y in obs:
        m_pred = a * m
        P_pred = a * a * P + q
        S = h * h * P_pred + r
        resid = y - h * m_pred
        liks.append(math.exp(-resid * resid / (2.0 * S)) / math.sqrt(2.0 * math.pi * S))
        K = P_pred * h / S
        m = m_pred + K * resid
        P = (1.0 - K * h) * P_pred
        means.append(m)
        variances.append(P)
    return KalmanResult(tuple(liks), tuple(means), tuple(variances))
