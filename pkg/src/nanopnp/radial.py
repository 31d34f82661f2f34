"""Radial Poisson-Boltzmann problem on the unit disc.

Solves ``(1/xi) d/dxi(xi dpsi/dxi) = (exp(psi) - exp(-psi)) / lambda**2`` with
``dpsi/dxi(1) = beta`` and regularity on the axis, and provides the two
asymptotic closed forms (large wall charge, thin Debye layer).

The discretization is a cell-centred box scheme on a grid graded toward the
wall.  The G-integrals use the box volumes as quadrature weights, which makes
``g2 - g1 = lambda**2 * beta`` hold to Newton tolerance on every solved
profile.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from .errors import DomainError, DomainWarning, NoConvergence

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
TOL_ODE = 1e-10
MAX_NEWTON = 50


@dataclass(frozen=True)
class RadialProblem:
    lam: float
    beta: float
    n_points: int = 200

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError("lambda must be positive")
        if self.n_points < 16:
            raise DomainError("n_points must be at least 16")
        if not math.isfinite(self.beta):
            raise DomainError("beta must be finite")


@dataclass
class RadialProfile:
    xi_grid: np.ndarray
    psi: np.ndarray
    lam: float
    beta: float
    g1: float = float("nan")
    g2: float = float("nan")
    iterations: int = 0
    residual: float = 0.0

    def wall_slope(self) -> float:
        """One-sided estimate of dpsi/dxi at the wall (second order)."""
        return float(_one_sided_wall_slope(self.xi_grid, self.psi))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["xi", "psi"])
            for a, b in zip(self.xi_grid, self.psi):
                w.writerow([repr(float(a)), repr(float(b))])


# ---------------------------------------------------------------------------
# grids and quadrature

def layer_scale(lam, beta):
    """Thickness of the wall layer: Debye ratio or the Gouy-Chapman length."""
    lam = np.asarray(lam, dtype=float)
    beta = np.abs(np.asarray(beta, dtype=float))
    with np.errstate(divide="ignore"):
        gc = np.where(beta > 0, 2.0 / np.where(beta > 0, beta, 1.0), np.inf)
    return np.minimum(lam, gc)


def _geometric_ratio(h_wall, n_cells):
    """Ratio q with h_wall * (q**n - 1)/(q - 1) = 1, vectorized bisection."""
    h_wall = np.asarray(h_wall, dtype=float)
    lo = np.ones_like(h_wall)
    hi = np.full_like(h_wall, 2.0)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        with np.errstate(over="ignore"):
            total = h_wall * np.where(
                np.abs(mid - 1) < 1e-14, n_cells, np.expm1(n_cells * np.log(mid)) / (mid - 1)
            )
        too_big = total > 1
        hi = np.where(too_big, mid, hi)
        lo = np.where(too_big, lo, mid)
    return 0.5 * (lo + hi)


def radial_grid(n_points, lam, beta=0.0, cells_per_layer=8.0):
    """Nodes on [0, 1] with geometric refinement toward ``xi = 1``.

    Returns an array of shape ``lam.shape + (n_points,)``.
    """
    lam = np.asarray(lam, dtype=float)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), lam.shape)
    n_cells = n_points - 1
    h_wall = np.minimum(layer_scale(lam, beta) / cells_per_layer, 1.0 / n_cells)
    q = _geometric_ratio(h_wall, n_cells)
    k = np.arange(n_cells)
    widths = h_wall[..., None] * q[..., None] ** k  # from the wall inward
    widths = widths / widths.sum(axis=-1, keepdims=True)
    inward = np.cumsum(widths, axis=-1)
    xi = np.concatenate([np.zeros(lam.shape + (1,)), 1.0 - inward[..., ::-1][..., 1:],
                         np.ones(lam.shape + (1,))], axis=-1)
    return xi


def box_weights(xi):
    """Control-volume weights int xi dxi of each node's box; they sum to 1/2."""
    xi = np.asarray(xi, dtype=float)
    mid = 0.5 * (xi[..., 1:] + xi[..., :-1])
    lo = np.concatenate([np.zeros(xi.shape[:-1] + (1,)), mid], axis=-1)
    hi = np.concatenate([mid, np.ones(xi.shape[:-1] + (1,))], axis=-1)
    return 0.5 * (hi**2 - lo**2)


def _one_sided_wall_slope(xi, psi):
    h1 = xi[..., -1] - xi[..., -2]
    h2 = xi[..., -2] - xi[..., -3]
    p0, p1, p2 = psi[..., -1], psi[..., -2], psi[..., -3]
    # quadratic through the three wall-most nodes
    return (p0 - p1) / h1 + (p0 - p1) / (h1 + h2) - (p1 - p2) / h2 * h1 / (h1 + h2)


# ---------------------------------------------------------------------------
# closed forms

def centerline_large_beta(lam, beta):
    lam = np.asarray(lam, dtype=float)
    beta = np.asarray(beta, dtype=float)
    return 3 * math.log(2) + 2 * np.log(lam) - np.log1p(4.0 / beta)


def large_beta_valid(lam):
    """The large-beta closed form needs lambda well above 2**-1.5."""
    return np.asarray(lam) > 2.0**-1.5


def psi_large_beta(xi, lam, beta):
    """Large wall-charge approximation of psi (requires beta > 0).

    Written in a form that is finite on the axis; for beta < 0 use
    ``-psi_large_beta(xi, lam, -beta)``.
    """
    beta = np.asarray(beta, dtype=float)
    if np.any(beta <= 0):
        raise DomainError("psi_large_beta needs beta > 0; mirror psi -> -psi for beta < 0")
    xi = np.asarray(xi, dtype=float)
    ratio = beta / (beta + 4.0)  # exp(-2 arcoth((beta + 2)/2))
    return centerline_large_beta(lam, beta) - 2 * np.log1p(-(xi**2) * ratio)


def psi_debye_layer(zeta, B):
    """Leading-order Debye-layer profile in the stretched wall coordinate.

    ``zeta = (1 - xi)/lambda`` and ``B = lambda * beta``.  The two branches
    of the closed form are odd in ``B``; at ``B = 0`` the limit 0 is returned
    with a :class:`DomainWarning`.
    """
    zeta = np.asarray(zeta, dtype=float)
    B = np.asarray(B, dtype=float)
    if np.any(zeta < 0):
        raise DomainError("zeta must be non-negative")
    zero = B == 0
    if np.any(zero):
        warnings.warn("psi_debye_layer evaluated at B = 0; returning the limit 0", DomainWarning,
                      stacklevel=2)
    absB = np.where(zero, 1.0, np.abs(B))
    y = (zeta + np.arcsinh(2 * SQRT2 / absB) / SQRT2) / SQRT2
    t = np.exp(-2 * y)
    log_coth = np.log1p(t) - np.log1p(-t)
    return np.where(zero, 0.0, np.sign(B) * 2 * log_coth)


def psi_debye_layer_xi(xi, lam, beta):
    """The Debye-layer profile expressed on the disc coordinate."""
    return psi_debye_layer((1.0 - np.asarray(xi)) / lam, lam * np.asarray(beta))


def _linearized(xi, lam, beta):
    k = SQRT2 / lam
    return beta / k * special.i0e(k * xi) / special.i1e(k) * np.exp(k * (xi - 1.0))


def _initial_guess(xi, lam, beta):
    lam_c = np.asarray(lam, dtype=float)[..., None]
    beta_c = np.asarray(beta, dtype=float)[..., None]
    guess = np.zeros_like(xi)
    nonzero = beta_c != 0
    with np.errstate(all="ignore"):
        small = _linearized(xi, lam_c, beta_c)
        safe_b = np.where(nonzero, beta_c, 1.0)
        debye = psi_debye_layer((1.0 - xi) / lam_c, lam_c * safe_b)
        big = np.sign(safe_b) * psi_large_beta(xi, lam_c, np.abs(safe_b))
    use_lin = np.abs(lam_c * beta_c) < 0.5
    use_debye = lam_c < 0.5
    guess = np.where(use_lin, small, np.where(use_debye, debye, big))
    guess = np.where(nonzero & np.isfinite(guess), guess, 0.0)
    return guess


# ---------------------------------------------------------------------------
# batched Newton solver

def _face_coefficients(xi):
    mid = 0.5 * (xi[..., 1:] + xi[..., :-1])
    return mid / np.diff(xi, axis=-1)


def _residual(psi, c, vol, inv_lam2, beta):
    flux = c * np.diff(psi, axis=-1)
    F = -vol * 2 * np.sinh(psi) * inv_lam2
    F[..., :-1] += flux
    F[..., 1:] -= flux
    F[..., -1] += beta[..., 0]
    return F


def _energy(psi, c, vol, inv_lam2, beta):
    return (0.5 * np.sum(c * np.diff(psi, axis=-1) ** 2, axis=-1)
            + np.sum(vol * 2 * np.cosh(psi), axis=-1) * inv_lam2[..., 0]
            - beta[..., 0] * psi[..., -1])


def _newton_step(psi, c, vol, inv_lam2, F):
    m, n = psi.shape
    diag = -vol * 2 * np.cosh(psi) * inv_lam2
    diag[:, :-1] -= c
    diag[:, 1:] -= c
    upper = np.zeros((m, n))
    upper[:, 1:] = c
    lower = np.zeros((m, n))
    lower[:, :-1] = c
    ab = np.empty((3, m * n))
    ab[0] = upper.ravel()
    ab[1] = diag.ravel()
    ab[2] = lower.ravel()
    step = linalg.solve_banded((1, 1), ab, -F.ravel(), check_finite=False)
    return step.reshape(m, n)


def solve_psi_batch(lam, beta, n_points=200, xi=None, psi0=None, tol=TOL_ODE,
                    max_iter=MAX_NEWTON):
    """Solve many independent radial problems at once.

    Parameters
    ----------
    lam, beta : array_like, shape (m,)
        Local Debye ratios and wall slopes.
    n_points : int
        Radial nodes per problem (ignored when ``xi`` is given).
    xi : ndarray, shape (m, n), optional
        Radial grids; built with :func:`radial_grid` otherwise.
    psi0 : ndarray, shape (m, n), optional
        Starting iterate.

    Returns
    -------
    xi, psi : ndarray, shape (m, n)
    iterations : int
    residual : ndarray, shape (m,)
        Max-norm of the discrete residual scaled by ``max(1, |beta|)``.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    beta = np.broadcast_to(np.atleast_1d(np.asarray(beta, dtype=float)), lam.shape).copy()
    if np.any(lam <= 0):
        raise DomainError("lambda must be positive")
    if xi is None:
        xi = radial_grid(n_points, lam, beta)
    xi = np.broadcast_to(xi, lam.shape + (xi.shape[-1],))
    c = _face_coefficients(xi)
    vol = box_weights(xi)
    inv_lam2 = (1.0 / lam**2)[:, None]
    beta_c = beta[:, None]
    psi = _initial_guess(xi, lam, beta) if psi0 is None else np.array(psi0, dtype=float)
    scale = np.maximum(1.0, np.abs(beta))

    F = _residual(psi, c, vol, inv_lam2, beta_c)
    for it in range(1, max_iter + 1):
        step = _newton_step(psi, c, vol, inv_lam2, F)
        E0 = _energy(psi, c, vol, inv_lam2, beta_c)
        slope = -np.sum(F * step, axis=-1)  # dE/dt at t = 0
        t = np.ones(lam.shape)
        for _ in range(40):
            trial = psi + t[:, None] * step
            with np.errstate(over="ignore", invalid="ignore"):
                E1 = _energy(trial, c, vol, inv_lam2, beta_c)
            bad = ~(E1 <= E0 + 1e-4 * t * slope + 1e-13 * np.abs(E0))
            if not np.any(bad):
                break
            t = np.where(bad, 0.5 * t, t)
        psi = psi + t[:, None] * step
        F = _residual(psi, c, vol, inv_lam2, beta_c)
        res = np.max(np.abs(F), axis=-1) / scale
        if np.max(np.abs(t[:, None] * step)) < 1e-12 or np.all(res < tol):
            return np.array(xi), psi, it, res
    raise NoConvergence("radial Newton iteration did not converge", max_iter, float(np.max(res)))


def compute_G(profile: RadialProfile):
    """(g1, g2) = box-rule quadrature of xi*exp(-psi) and xi*exp(psi)."""
    w = box_weights(profile.xi_grid)
    return float(np.sum(w * np.exp(-profile.psi))), float(np.sum(w * np.exp(profile.psi)))


def g_integrals(xi, psi):
    w = box_weights(xi)
    return np.sum(w * np.exp(-psi), axis=-1), np.sum(w * np.exp(psi), axis=-1)


def solve_psi(problem: RadialProblem, max_continuation=8) -> RadialProfile:
    """Solve one radial problem, falling back to continuation in beta."""
    lam, beta, n = problem.lam, problem.beta, problem.n_points
    xi = radial_grid(n, np.array([lam]), np.array([beta]))
    try:
        xi, psi, it, res = solve_psi_batch([lam], [beta], xi=xi)
    except NoConvergence:
        logger.info("radial solve (lam=%g, beta=%g) retried with continuation", lam, beta)
        psi = None
        it = 0
        for frac in np.linspace(0, 1, max_continuation + 1)[1:]:
            xi, psi, k, res = solve_psi_batch([lam], [beta * frac], xi=xi, psi0=psi)
            it += k
    prof = RadialProfile(xi[0], psi[0], lam, beta, iterations=it, residual=float(res[0]))
    prof.g1, prof.g2 = compute_G(prof)
    return prof


def g_oracle(lam, beta, n_points=400):
    """G-integrals from numerical radial solves (vectorized over stations)."""
    xi, psi, _, _ = solve_psi_batch(lam, beta, n_points=n_points)
    return g_integrals(xi, psi)


def solve_psi_refined(lam, beta, tol=1e-8, n_start=200, n_max=25600):
    """Refine the radial grid until g1 changes by less than ``tol``."""
    n = n_start
    prev = solve_psi(RadialProblem(lam, beta, n))
    while n < n_max:
        n *= 2
        prof = solve_psi(RadialProblem(lam, beta, n))
        if abs(prof.g1 - prev.g1) < tol:
            return prof
        prev = prof
    return prev
