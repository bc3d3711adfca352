"""Brute-force reference implementations used to check the symbolic engine.

None of these modules import the density or ESS algebra.
"""

from .enumerate import EnumeratedProof, enumerate_ess, enumerate_prob, enumerate_proofs, enumeration_em
from .gmm import gmm_em_reference
from .kalman import KalmanResult, kalman_closed_form
from .quadrature import integrate_log, self_check
from .sampler import NonGenerativeError, SampleEstimate, mc_density, sample_goals

__all__ = [
    "EnumeratedProof",
    "KalmanResult",
    "NonGenerativeError",
    "SampleEstimate",
    "enumerate_ess",
    "enumerate_prob",
    "enumerate_proofs",
    "enumeration_em",
    "gmm_em_reference",
    "integrate_log",
    "kalman_closed_form",
    "mc_density",
    "sample_goals",
    "self_check",
]
