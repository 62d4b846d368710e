"""Picard-Vessiot rings of linear differential systems over C(t).

Given delta Y = A Y with A an n x n matrix over k = Q(t) (standing in for
C(t) with exact arithmetic), the package computes generators of a maximal
differential ideal of k[X, 1/det X] together with defining equations of the
differential Galois group as the stabilizer of that ideal.
"""

__version__ = "0.1.0"

from .pipeline import (  # noqa: E402
    PipelineConfig,
    PVResult,
    dn_bound,
    kappa_bound,
    pv_ring,
    run_kbar,
    run_toric,
    toric_ideal,
    verify,
)

__all__ = [
    "PipelineConfig",
    "PVResult",
    "dn_bound",
    "kappa_bound",
    "pv_ring",
    "run_kbar",
    "run_toric",
    "toric_ideal",
    "verify",
]
