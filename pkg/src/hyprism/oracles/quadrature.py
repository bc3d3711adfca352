"""One-dimensional adaptive quadrature for log-concave-ish integrands.

Backed by QUADPACK (``scipy.integrate.quad``).  The integrand is given in
log space, rescaled by its peak value and split at the peak.
"""

from __future__ import annotations

import math

from scipy.integrate import quad
from scipy.optimize import minimize_scalar

_checked = False


def integrate_log(logf, center: float, width: float, span: float = 20.0) -> float:
    """``int exp(logf(x)) dx`` for an integrand concentrated within a few
    ``width`` of ``center``."""
    if width <= 0.0:
        raise ValueError("width must be positive")
    if not _checked:
        self_check()
    res = minimize_scalar(
        lambda x: -logf(x),
        bracket=(center - width, center + width),
        options={"xtol": 1e-12},
    )
    peak = float(res.x)
    if not math.isfinite(peak) or abs(peak - center) > 1e3 * width:
        peak = center
    top = logf(peak)
    if not math.isfinite(top):
        return 0.0
    g = lambda x: math.exp(logf(x) - top)
    span_w = span * width
    left, _ = quad(g, peak - span_w, peak, epsabs=1e-15, epsrel=1e-12, limit=200)
    right, _ = quad(g, peak, peak + span_w, epsabs=1e-15, epsrel=1e-12, limit=200)
    return math.exp(top) * (left + right)


def self_check(tol: float = 1e-10):
    """Integrate standard and shifted normal densities; raise if the result
    is off by more than ``tol``."""
    global _checked
    _checked = True
    for mu, var in ((0.0, 1.0), (3.5, 0.01), (-2.0, 40.0)):
        logf = lambda x: -0.5 * math.log(2 * math.pi * var) - (x - mu) ** 2 / (2 * var)
        val = integrate_log(logf, mu + 0.3 * math.sqrt(var), math.sqrt(var))
        if abs(val - 1.0) > tol:
            _checked = False
            raise RuntimeError(f"quadrature self-check failed: {val!r}")
