"""Shared scalar numerics: stable sigmoid, normal CDF, erf inverse, quadratics.

These are the few low-level primitives the fitting and attack algebra both
depend on.  They wrap scipy.special where a vetted implementation exists;
the quadratic solver is written out because the attack needs the numerically
stable variant (naive -b±sqrt(d) cancels catastrophically when b^2 >> 4ac).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

__all__ = ["sigmoid", "norm_cdf", "inv_erf", "solve_quadratic"]


def sigmoid(z):
    """Numerically stable logistic function 1/(1+exp(-z)), elementwise."""
    return special.expit(z)


def norm_cdf(z):
    """Standard normal CDF, elementwise."""
    return special.ndtr(z)


def inv_erf(u):
    """Inverse error function on (-1, 1).

    Accuracy contract: |erf(inv_erf(u)) - u| <= 1e-12 for u in (-1, 1),
    since intensity solutions inherit the quantile's accuracy.  scipy's
    erfinv meets this with ~1 ulp to spare; the bound is asserted in tests.
    """
    return special.erfinv(u)


def solve_quadratic(c2: float, c1: float, c0: float) -> tuple[float, ...]:
    """Real roots of c2*x^2 + c1*x + c0 = 0, numerically stable.

    Returns a tuple with 0, 1 or 2 roots (ascending).  A zero leading
    coefficient degrades to the linear case; a zero linear coefficient as
    well yields no roots (the caller decides whether that is degenerate).
    Double roots are reported once.
    """
    if c2 == 0.0:
        if c1 == 0.0:
            return ()
        return (-c0 / c1,)
    if c0 == 0.0:
        roots = (0.0, -c1 / c2)
        return tuple(sorted(set(roots)))
    disc = c1 * c1 - 4.0 * c2 * c0
    if disc < 0.0:
        return ()
    if disc == 0.0:
        return (-c1 / (2.0 * c2),)
    sq = math.sqrt(disc)
    if c1 == 0.0:
        r = sq / (2.0 * abs(c2))
        return (-r, r)
    # Citardauq-style split: compute the large-magnitude root without
    # cancellation, recover the other from the product c0/c2.
    q = -0.5 * (c1 + math.copysign(sq, c1))
    r1 = q / c2
    r2 = c0 / q
    return tuple(sorted((r1, r2)))


def quantile_normal(p):
    """Standard normal quantile; equals sqrt(2) * inv_erf(2p - 1)."""
    return special.ndtri(p)


def as_1d(x, name: str) -> np.ndarray:
    """Coerce to a finite 1-D float vector, raising ValueError otherwise."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr
