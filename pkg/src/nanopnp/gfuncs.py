"""Closed-form approximations of the radial moments G1 and G2.

``G1 = int_0^1 xi exp(-psi) dxi`` and ``G2 = int_0^1 xi exp(psi) dxi`` where
psi solves the radial Poisson-Boltzmann problem with parameters
``(lambda, beta)``.  Two asymptotic branches are available (large wall
charge at order-one lambda, and thin Debye layers) together with a smooth
blend of the two that is accurate over the whole lambda range once beta is
large.

G2 is always obtained from G1 through ``G2 = G1 + lambda**2 * beta``, which
holds exactly for the true moments and so keeps the averaged model locally
charge neutral.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NonPositiveG

SQRT2 = math.sqrt(2.0)

# blend parameters; exposed so that sensitivity studies can override them
SWITCH_STEEPNESS = 12.0
LAMBDA_CUTOFF = 0.1
LAMBDA_SW_OFFSET = 0.276
LAMBDA_SW_SLOPE = 0.9


class Regime(str, enum.Enum):
    LARGE_BETA = "LargeBetaOrder1Lambda"
    SMALL_LAMBDA = "SmallLambda"
    SMOOTHED = "Smoothed"
    NUMERIC_ORACLE = "NumericOracle"


@dataclass(frozen=True)
class GEval:
    g1: float
    g2: float
    regime: Regime

    def __post_init__(self):
        if not (self.g1 > 0 and self.g2 > 0):
            raise NonPositiveG(f"G values must be positive, got g1={self.g1}, g2={self.g2}")


def _positive_beta(beta):
    beta = np.asarray(beta, dtype=float)
    if np.any(beta <= 0):
        raise DomainError("beta must be positive here; mirror negative beta first")
    return beta


def g1_large(lam, beta):
    """Large-beta branch: (beta**2 + 12 beta + 48) / (48 lam**2 beta (beta + 4))."""
    beta = _positive_beta(beta)
    lam = np.asarray(lam, dtype=float)
    return (beta**2 + 12 * beta + 48) / (48 * lam**2 * beta * (beta + 4))


def g1_small(lam, beta):
    """Thin Debye-layer branch, with ``B = lam * beta``."""
    lam = np.asarray(lam, dtype=float)
    B = lam * np.asarray(beta, dtype=float)
    return 0.5 - lam * 2 * SQRT2 * B / (np.sqrt(8 + B**2) + 2 * SQRT2 + B)


def g2_small(lam, beta):
    """Companion of :func:`g1_small`; equals ``g1_small + lam**2 * beta``."""
    lam = np.asarray(lam, dtype=float)
    B = lam * np.asarray(beta, dtype=float)
    return 0.5 + lam * 2 * SQRT2 * B / (np.sqrt(8 + B**2) + 2 * SQRT2 - B)


def lambda_switch(beta):
    return LAMBDA_SW_OFFSET + LAMBDA_SW_SLOPE / _positive_beta(beta)


def switching_weight(lam, beta):
    """Weight of the large-beta branch, rising from 0 to 1 around lambda_switch."""
    lam = np.asarray(lam, dtype=float)
    return 0.5 * (1 + np.tanh(SWITCH_STEEPNESS * (lam - lambda_switch(beta))))


def g1_smooth(lam, beta):
    """Blend of the two branches, valid for beta > 0."""
    beta = _positive_beta(beta)
    lam = np.asarray(lam, dtype=float)
    w = switching_weight(lam, beta)
    large = g1_large(np.maximum(lam, LAMBDA_CUTOFF), beta)
    # w underflows to 0 exactly where large may overflow; avoid 0 * inf
    blended = np.where(w > 0, w * large, 0.0)
    return blended + (1 - w) * g1_small(lam, beta)


def g2_from_g1(g1, lam, beta):
    g2 = np.asarray(g1, dtype=float) + np.asarray(lam, dtype=float) ** 2 * np.asarray(beta, dtype=float)
    if np.any(g2 <= 0):
        raise NonPositiveG("g1 + lambda**2 * beta is not positive")
    return g2


def g_pair(lam, beta):
    """Smoothed (g1, g2) for any sign of beta, vectorized.

    ``beta = 0`` gives the uncharged values 1/2.  Negative beta uses the
    mirror psi -> -psi, under which G1 and G2 exchange roles.
    """
    lam = np.asarray(lam, dtype=float)
    beta = np.asarray(beta, dtype=float)
    lam, beta = np.broadcast_arrays(lam, beta)
    b = np.abs(beta)
    safe = np.where(b > 0, b, 1.0)
    g_mirror = np.where(b > 0, g1_smooth(lam, safe), 0.5)  # G1 of the |beta| problem
    g1 = np.where(beta >= 0, g_mirror, g_mirror + lam**2 * b)
    return g1, g2_from_g1(g1, lam, beta)


def evaluate(lam, beta, regime: Regime = Regime.SMOOTHED, n_points=400) -> GEval:
    """Scalar evaluation in a named regime, returned as a :class:`GEval`."""
    lam = float(lam)
    beta = float(beta)
    if regime is Regime.NUMERIC_ORACLE:
        from .radial import RadialProblem, solve_psi

        prof = solve_psi(RadialProblem(lam, beta, n_points))
        g1 = prof.g1
    elif regime is Regime.SMOOTHED:
        g1 = float(g_pair(lam, beta)[0])
    elif regime is Regime.SMALL_LAMBDA:
        g1 = float(g1_small(lam, beta))
    else:
        g1 = float(g1_large(lam, beta))
    return GEval(g1, float(g2_from_g1(g1, lam, beta)), regime)
