"""Steady Quasi-1D PNP model.

The axial unknowns are the Boltzmann prefactors Q(x) and S(x) of the
negative and positive ions (``n = Q exp(phi)``, ``p = S exp(-phi)`` on each
cross-section).  In steady state they satisfy the two conservation laws

    (Theta1 S')' = 0,   Theta1 = A (Q/S)**0.5 G1,
    (Theta2 Q')' = 0,   Theta2 = A (S/Q)**0.5 G2,

where G1, G2 depend on the local Debye ratio lambda (which involves Q*S)
and the wall-charge parameter beta.  :func:`solve_steady` resolves the
coupling by a fixed-point iteration on the coefficients; each sweep solves
the two linear problems exactly.  :func:`solve_steady_mu_phi` solves the same
model written in the chemical potential ``mu_e = ln (QS)**0.5`` and
effective potential ``phi_tilde = ln (S/Q)**0.5`` by Newton's method and is
used as an independent cross-check.

Currents are area integrals of the ionic flux difference over a
cross-section, in units of ``F * D_ref * cbar * R0**2 / L``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from . import gfuncs
from .errors import NoConvergence, NonPositiveConcentration
from .fv1d import AxialGrid, face_average, harmonic_mean, solve_conservative
from .model import DimensionlessParams, PoreScenario, nondimensionalize
from .radial import g_integrals, solve_psi_batch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    """Fixed-point and grid controls.

    ``v_crit`` is in volts; ``None`` means four thermal voltages.  The
    stopping test is relative: ``|dQ|/|Q| + |dS|/|S| < tol`` in the 2-norm.

    ``grid`` is one of ``"adapted"`` (nodes graded by 1/R and clustered at
    the ends of the charged section, where the averaged model develops thin
    depletion/accumulation layers), ``"graded"`` (1/R only) or ``"uniform"``.

    ``anderson_depth > 0`` applies Anderson mixing of that depth to the
    relaxed update in the variables ``ln Q, ln S``; it keeps the fixed point
    and the stopping test unchanged and only cuts the iteration count.
    ``0`` gives the plain relaxed iteration.
    """

    tol: float = 1e-9
    max_iter: int = 5000
    theta: float = 0.1
    v_crit: float | None = None
    g_oracle: bool = False
    oracle_points: int = 200
    n_intervals: int = 1000
    grid: str = "adapted"
    anderson_depth: int = 5


@dataclass
class QuasiSolution:
    x: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    lam: np.ndarray
    beta: np.ndarray
    current_I: float
    current_spread: float
    iterations: int
    residual: float
    v_applied: float
    history: list = field(default_factory=list)
    converged: bool = True

    @property
    def mu_e(self):
        return 0.5 * np.log(self.Q * self.S)

    @property
    def phi_tilde(self):
        return 0.5 * np.log(self.S / self.Q)


@dataclass
class ReconstructedFields:
    x: np.ndarray
    r: np.ndarray  # shape (nx, nr), radial positions per station
    phi: np.ndarray
    n: np.ndarray
    p: np.ndarray


@dataclass
class MuPhiSolution:
    x: np.ndarray
    mu_e: np.ndarray
    phi_tilde: np.ndarray
    Psi_hat: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    current_I: float
    neutrality_residual: float
    iterations: int

    @property
    def Q(self):
        return np.exp(self.mu_e - self.phi_tilde)

    @property
    def S(self):
        return np.exp(self.mu_e + self.phi_tilde)


@dataclass
class IVCurve:
    voltages: np.ndarray
    current: np.ndarray  # dimensionless
    current_A: np.ndarray
    iterations: np.ndarray
    residual: np.ndarray
    converged: np.ndarray
    solutions: list
    elapsed_s: float = 0.0

    def rectification(self, v):
        """|I(v)| / |I(-v)| from the sampled points."""
        i_pos = self.current[np.argmin(np.abs(self.voltages - v))]
        i_neg = self.current[np.argmin(np.abs(self.voltages + v))]
        return abs(i_pos) / abs(i_neg)


# ---------------------------------------------------------------------------
# pieces of the model

class _Model:
    """Scenario data sampled on an axial grid."""

    def __init__(self, scenario: PoreScenario, grid: AxialGrid, params=None):
        self.scenario = scenario
        self.grid = grid
        self.params = params or nondimensionalize(scenario)
        g = scenario.geometry
        self.R = g.radius(grid.x)
        self.A = np.pi * self.R**2
        self.sigma = scenario.surface_charge.nodal(grid.x)
        self.beta = self.params.Upsilon * self.sigma * self.R
        # fixed wall charge per unit length, 2 pi R sigma in Debye-scaled units
        self.sigma_line = self.params.Lambda**2 * self.params.Upsilon * 2 * np.pi * self.R * self.sigma

    def lam(self, qs):
        """Local Debye ratio; same as :func:`local_beta_lambda` with R cached."""
        qs = np.asarray(qs, dtype=float)
        if np.any(~(qs > 0)):
            raise NonPositiveConcentration("Q*S must be positive")
        return self.params.Lambda / (self.R * np.sqrt(np.sqrt(qs)))

    def g(self, lam, oracle=False, n_points=200):
        if oracle:
            xi, psi, _, _ = solve_psi_batch(lam, self.beta, n_points=n_points)
            g1, _ = g_integrals(xi, psi)
            return g1, gfuncs.g2_from_g1(g1, lam, self.beta)
        return gfuncs.g_pair(lam, self.beta)


def charge_edges(scenario: PoreScenario):
    """Interior points where the wall charge jumps."""
    sc = scenario.surface_charge
    if sc.value == 0:
        return ()
    return tuple(e for e in sc.support if 0.0 < e < 1.0)


def make_grid(scenario, options: SolverOptions) -> AxialGrid:
    kind = options.grid
    if kind == "uniform":
        return AxialGrid.uniform(options.n_intervals)
    if kind == "graded":
        return AxialGrid.graded(scenario.geometry, options.n_intervals)
    if kind == "adapted":
        return AxialGrid.graded(scenario.geometry, options.n_intervals,
                                features=charge_edges(scenario))
    raise ValueError(f"unknown grid kind {kind!r}")


def boundary_lift(bc, params: DimensionlessParams, phi_left=0.0):
    """Bath values (Q_left, S_left, Q_right, S_right) of the prefactors.

    The left electrode sits at ``phi_left`` (0 by default) and the right one
    at ``phi_left + v_applied / V_T``; concentrations are scaled by cbar.
    """
    c = params.conc_scale
    phi_r = phi_left + bc.v_applied / params.thermal_voltage
    q_l = bc.conc_left_n / c * np.exp(-phi_left)
    s_l = bc.conc_left_p / c * np.exp(phi_left)
    q_r = bc.conc_right_n / c * np.exp(-phi_r)
    s_r = bc.conc_right_p / c * np.exp(phi_r)
    return q_l, s_l, q_r, s_r


def thetas(Q, S, A, g1, g2):
    root = np.sqrt(Q / S)
    return A * root * g1, A / root * g2


def assemble_residual(Q, S, grid: AxialGrid, model: _Model, g_oracle=False):
    """Nodal flux imbalances of the two conservation laws (interior nodes).

    Returns ``(res_S, res_Q)`` with ``res = F_{i+1/2} - F_{i-1/2}`` where
    ``F = Theta_f * diff(u) / h`` and harmonic-mean face coefficients.
    """
    Q = np.asarray(Q, dtype=float)
    S = np.asarray(S, dtype=float)
    if np.any(Q <= 0) or np.any(S <= 0):
        raise NonPositiveConcentration("Q and S must be positive")
    lam = model.lam(Q * S)
    g1, g2 = model.g(lam, oracle=g_oracle)
    t1, t2 = thetas(Q, S, model.A, g1, g2)
    h = grid.h
    f1 = harmonic_mean(t1[1:], t1[:-1]) * np.diff(S) / h
    f2 = harmonic_mean(t2[1:], t2[:-1]) * np.diff(Q) / h
    return np.diff(f1), np.diff(f2)


def _face_currents(Q, S, model: _Model, g1, g2):
    p = model.params
    t1, t2 = thetas(Q, S, model.A, g1, g2)
    h = model.grid.h
    f1 = harmonic_mean(t1[1:], t1[:-1]) * np.diff(S) / h
    f2 = harmonic_mean(t2[1:], t2[:-1]) * np.diff(Q) / h
    # the disc integral of u_p - u_n is twice pi * int r (u_p - u_n) dr
    return 2.0 * (-p.kappa_p * f1 + p.kappa_n * f2)


def current(solution: QuasiSolution, model_or_scenario, grid=None):
    """Mean and max-minus-min of the face currents of a solution."""
    if isinstance(model_or_scenario, _Model):
        model = model_or_scenario
    else:
        model = _Model(model_or_scenario, grid or AxialGrid(solution.x))
    faces = _face_currents(solution.Q, solution.S, model, solution.g1, solution.g2)
    return face_average(faces, model.grid.h), float(np.ptp(faces))


class _Anderson:
    """Type-II Anderson mixing for the fixed-point map ``z -> z + f(z)``."""

    def __init__(self, depth):
        self.depth = depth
        self.reset()

    def reset(self):
        self.z_prev = None
        self.f_prev = None
        self.dz = None
        self.df = None
        self.count = 0

    def update(self, z, f, theta):
        if self.z_prev is not None:
            if self.dz is None:
                self.dz = np.empty((z.size, self.depth))
                self.df = np.empty((z.size, self.depth))
            k = self.count % self.depth
            np.subtract(z, self.z_prev, out=self.dz[:, k])
            np.subtract(f, self.f_prev, out=self.df[:, k])
            self.count += 1
        self.z_prev, self.f_prev = z, f
        m = min(self.count, self.depth)
        if m == 0:
            return z + theta * f
        dF = self.df[:, :m]
        dZ = self.dz[:, :m]
        # small normal equations, lightly regularized against collinear history
        gram = dF.T @ dF
        gram[np.diag_indices_from(gram)] *= 1.0 + 1e-10
        try:
            gamma = np.linalg.solve(gram, dF.T @ f)
        except np.linalg.LinAlgError:
            gamma, *_ = np.linalg.lstsq(dF, f, rcond=None)
        return z + theta * f - (dZ + theta * dF) @ gamma


def _initial_guess(x, q_l, s_l, q_r, s_r):
    """Log-linear interpolation of the bath values."""
    Q = np.exp(np.log(q_l) + (np.log(q_r) - np.log(q_l)) * x)
    S = np.exp(np.log(s_l) + (np.log(s_r) - np.log(s_l)) * x)
    return Q, S


def _shift_guess(x, Q, S, q_l, s_l, q_r, s_r):
    """Adapt a neighbouring solution to new bath values by adding linear
    corrections to ln Q and ln S."""
    lq = np.log(Q)
    ls = np.log(S)
    lq = lq + (np.log(q_l) - lq[0]) * (1 - x) + (np.log(q_r) - lq[-1]) * x
    ls = ls + (np.log(s_l) - ls[0]) * (1 - x) + (np.log(s_r) - ls[-1]) * x
    return np.exp(lq), np.exp(ls)


def solve_steady(scenario: PoreScenario, v_applied=None, options: SolverOptions | None = None,
                 initial=None, grid: AxialGrid | None = None, phi_left=0.0) -> QuasiSolution:
    """Fixed-point solution of the steady Quasi-1D model.

    Parameters
    ----------
    scenario : PoreScenario
    v_applied : float, optional
        Applied voltage in V; defaults to ``scenario.bc.v_applied``.
    options : SolverOptions, optional
    initial : QuasiSolution or (Q, S), optional
        Warm start; its bath values are corrected to the new voltage.
    grid : AxialGrid, optional
        Overrides the grid implied by ``options``.
    phi_left : float
        Gauge of the left electrode potential (dimensionless).

    Raises
    ------
    NoConvergence
        If the update norm stays above ``options.tol`` after ``max_iter``
        sweeps; the exception carries the residual history.
    """
    options = options or SolverOptions()
    if v_applied is not None:
        scenario = scenario.with_voltage(v_applied)
    v = scenario.bc.v_applied
    grid = grid or make_grid(scenario, options)
    model = _Model(scenario, grid)
    params = model.params
    q_l, s_l, q_r, s_r = boundary_lift(scenario.bc, params, phi_left)
    x = grid.x
    if initial is None:
        Q, S = _initial_guess(x, q_l, s_l, q_r, s_r)
    else:
        Q0, S0 = (initial.Q, initial.S) if isinstance(initial, QuasiSolution) else initial
        Q, S = _shift_guess(x, np.asarray(Q0, float), np.asarray(S0, float), q_l, s_l, q_r, s_r)

    v_crit = 4 * params.thermal_voltage if options.v_crit is None else options.v_crit
    theta = options.theta if abs(v) >= v_crit else 1.0
    h = grid.h
    history = []
    err = np.inf
    mixer = _Anderson(options.anderson_depth) if theta < 1.0 and options.anderson_depth > 0 else None
    warned = False
    for it in range(1, options.max_iter + 1):
        lam = model.lam(Q * S)
        g1, g2 = model.g(lam, oracle=options.g_oracle, n_points=options.oracle_points)
        t1, t2 = thetas(Q, S, model.A, g1, g2)
        S_half, _ = solve_conservative(harmonic_mean(t1[1:], t1[:-1]), h, s_l, s_r)
        Q_half, _ = solve_conservative(harmonic_mean(t2[1:], t2[:-1]), h, q_l, q_r)
        if mixer is None:
            Q_new = theta * Q_half + (1 - theta) * Q
            S_new = theta * S_half + (1 - theta) * S
        else:
            z = np.concatenate([np.log(Q), np.log(S)])
            fz = np.concatenate([np.log(Q_half), np.log(S_half)]) - z
            z_new = mixer.update(z, fz, theta)
            Q_new, S_new = np.exp(z_new[:x.size]), np.exp(z_new[x.size:])
        if np.any(Q_new <= 0) or np.any(S_new <= 0):  # cannot happen for M-matrix solves
            raise NonPositiveConcentration("fixed-point iterate lost positivity")
        # the stopping test measures the plain relaxed step, so it does not
        # depend on the mixing
        err = theta * (np.linalg.norm(Q_half - Q) / np.linalg.norm(Q)
                       + np.linalg.norm(S_half - S) / np.linalg.norm(S))
        history.append(err)
        Q, S = Q_new, S_new
        if not np.isfinite(err):
            break
        if err < options.tol:
            break
        if mixer is None and not warned and it > 5 and err > history[-2] * (1 + 1e-12) \
                and err > 1e3 * options.tol:
            # the plain iteration is expected to contract monotonically
            logger.warning("quasi1d: fixed-point update grew at iteration %d (%.3e -> %.3e)",
                           it, history[-2], err)
            warned = True
        if mixer is not None and it > 1 and err > 10 * history[-2]:
            logger.debug("quasi1d: Anderson step rejected at iteration %d; restarting", it)
            mixer.reset()
    else:
        raise NoConvergence(f"quasi1d fixed point did not converge at v={v:g} V",
                            options.max_iter, err, history)
    if not np.isfinite(err):
        raise NoConvergence(f"quasi1d fixed point diverged at v={v:g} V", it, err, history)

    lam = model.lam(Q * S)
    g1, g2 = model.g(lam, oracle=options.g_oracle, n_points=options.oracle_points)
    faces = _face_currents(Q, S, model, g1, g2)
    return QuasiSolution(
        x=x, Q=Q, S=S, g1=g1, g2=g2, lam=lam, beta=model.beta,
        current_I=face_average(faces, h), current_spread=float(np.ptp(faces)),
        iterations=it, residual=float(err), v_applied=v, history=history,
    )


def reconstruct_fields(solution: QuasiSolution, scenario: PoreScenario, radial_resolution=64,
                       stations=None) -> ReconstructedFields:
    """Cross-sectional fields from the axial solution and per-station radial solves.

    ``stations`` selects node indices (all nodes by default).
    """
    idx = np.arange(solution.x.size) if stations is None else np.asarray(stations)
    xi, psi, _, _ = solve_psi_batch(solution.lam[idx], solution.beta[idx],
                                    n_points=radial_resolution)
    R = scenario.geometry.radius(solution.x[idx])
    Q = solution.Q[idx][:, None]
    S = solution.S[idx][:, None]
    root = np.sqrt(Q * S)
    return ReconstructedFields(
        x=solution.x[idx],
        r=R[:, None] * xi,
        phi=0.5 * np.log(S / Q) + psi,
        n=root * np.exp(psi),
        p=root * np.exp(-psi),
    )


def cross_section(solution: QuasiSolution, x_station, xi):
    """Reconstructed ``(phi, n, p)`` across the pore at ``x_station`` on the
    radial nodes ``xi``; axial data are interpolated between grid nodes."""
    xi = np.asarray(xi, dtype=float)
    x = solution.x
    Q = np.exp(np.interp(x_station, x, np.log(solution.Q)))
    S = np.exp(np.interp(x_station, x, np.log(solution.S)))
    lam = np.interp(x_station, x, solution.lam)
    beta = np.interp(x_station, x, solution.beta)
    _, psi, _, _ = solve_psi_batch(np.array([lam]), np.array([beta]), xi=xi[None, :])
    psi = psi[0]
    root = np.sqrt(Q * S)
    return 0.5 * np.log(S / Q) + psi, root * np.exp(psi), root * np.exp(-psi)


# ---------------------------------------------------------------------------
# chemical-potential / effective-potential form

def _mu_phi_coefficients(mu, model: _Model, oracle=False, n_points=200):
    lam = model.params.Lambda / model.R * np.exp(-0.5 * mu)
    g1, g2 = model.g(lam, oracle=oracle, n_points=n_points)
    # A (Pbar + Nbar) with the true cross-section means Pbar = 2 e^mu G1, Nbar = 2 e^mu G2
    a = 2.0 * model.A * np.exp(mu) * (g1 + g2)
    return a, g1, g2


def _mu_phi_residual(mu, ph, model, oracle=False):
    a, g1, g2 = _mu_phi_coefficients(mu, model, oracle)
    h = model.grid.h
    af = 0.5 * (a[1:] + a[:-1])
    sf = 0.5 * (model.sigma_line[1:] + model.sigma_line[:-1])
    dmu = np.diff(mu) / h
    dph = np.diff(ph) / h
    j1 = af * dmu - sf * dph
    j2 = sf * dmu - af * dph
    return np.diff(j1), np.diff(j2), (a, g1, g2, af, sf, dmu, dph)


def _mu_phi_jacobian(mu, ph, model, oracle=False):
    """Sparse Jacobian of the interior residuals w.r.t. interior (mu, phi).

    Unknowns are interleaved (mu_1, phi_1, mu_2, phi_2, ...).
    """
    h = model.grid.h
    a, *_ = _mu_phi_coefficients(mu, model, oracle)
    eps = 1e-7
    da = (_mu_phi_coefficients(mu + eps, model, oracle)[0] - a) / eps  # elementwise: a_i(mu_i)
    sf = 0.5 * (model.sigma_line[1:] + model.sigma_line[:-1])
    af = 0.5 * (a[1:] + a[:-1])
    dmu = np.diff(mu)
    dph = np.diff(ph)
    n = mu.size
    m = n - 2
    # face f between nodes f and f+1; flux derivatives w.r.t. node values
    # j1_f = af (mu_{f+1}-mu_f)/h - sf (ph_{f+1}-ph_f)/h
    # j2_f = sf (mu_{f+1}-mu_f)/h - af (ph_{f+1}-ph_f)/h
    f = np.arange(n - 1)
    dj1_dmu_left = (-af + 0.5 * da[f] * dmu) / h
    dj1_dmu_right = (af + 0.5 * da[f + 1] * dmu) / h
    dj1_dph_left = sf / h
    dj1_dph_right = -sf / h
    dj2_dmu_left = (-sf - 0.5 * da[f] * dph) / h
    dj2_dmu_right = (sf - 0.5 * da[f + 1] * dph) / h
    dj2_dph_left = af / h
    dj2_dph_right = -af / h

    R_rows, R_cols, R_vals = [], [], []
    # residual at interior node k (1..n-2) = j_k - j_{k-1}; unknown index for node j is j-1
    for sign, face_offset in ((1.0, 0), (-1.0, -1)):
        k = np.arange(1, n - 1)
        face = k + face_offset
        for eq, (dl_mu, dr_mu, dl_ph, dr_ph) in enumerate((
                (dj1_dmu_left, dj1_dmu_right, dj1_dph_left, dj1_dph_right),
                (dj2_dmu_left, dj2_dmu_right, dj2_dph_left, dj2_dph_right))):
            for node, dmu_d, dph_d in ((face, dl_mu, dl_ph), (face + 1, dr_mu, dr_ph)):
                unk = node - 1
                ok = (unk >= 0) & (unk < m)
                R_rows += [2 * (k[ok] - 1) + eq, 2 * (k[ok] - 1) + eq]
                R_cols += [2 * unk[ok], 2 * unk[ok] + 1]
                R_vals += [sign * dmu_d[face[ok]], sign * dph_d[face[ok]]]
    J = sparse.csc_matrix((np.concatenate(R_vals), (np.concatenate(R_rows), np.concatenate(R_cols))),
                          shape=(2 * m, 2 * m))
    return J


def _mu_phi_newton(mu, ph, model, tol, max_iter, oracle):
    def norm(mu, ph):
        r1, r2, _ = _mu_phi_residual(mu, ph, model, oracle)
        return np.concatenate([r1, r2]), max(np.max(np.abs(r1)), np.max(np.abs(r2)))

    r, rn = norm(mu, ph)
    scale = None
    for it in range(1, max_iter + 1):
        r1, r2, (a, *_rest) = _mu_phi_residual(mu, ph, model, oracle)
        if scale is None:
            scale = max(np.max(a), np.max(np.abs(model.sigma_line)))
        J = _mu_phi_jacobian(mu, ph, model, oracle)
        rhs = np.empty(2 * r1.size)
        rhs[0::2] = -r1
        rhs[1::2] = -r2
        step = splinalg.spsolve(J, rhs)
        dmu, dph = step[0::2], step[1::2]
        t = 1.0
        while True:
            mu_t = mu.copy()
            ph_t = ph.copy()
            mu_t[1:-1] += t * dmu
            ph_t[1:-1] += t * dph
            _, rn_t = norm(mu_t, ph_t)
            if rn_t < (1 - 1e-4 * t) * rn or t < 1e-4:
                break
            t *= 0.5
        mu, ph, rn = mu_t, ph_t, rn_t
        if np.max(np.abs(t * step)) < tol or rn < 1e-13 * scale:
            return mu, ph, it
    raise NoConvergence("mu-phi Newton iteration did not converge", max_iter, rn)


def solve_steady_mu_phi(scenario: PoreScenario, v_applied=None, options: SolverOptions | None = None,
                        grid: AxialGrid | None = None, tol=1e-11, max_iter=60,
                        continuation_steps=(1, 2, 4, 8, 16, 32)) -> MuPhiSolution:
    """Newton solution of the steady model in (mu_e, phi_tilde) variables.

    The steady equations are ``(a mu' - Sigma phi')' = 0`` and
    ``(Sigma mu' - a phi')' = 0`` with ``a = A (Pbar + Nbar)`` and Sigma the
    scaled fixed line charge; face values are arithmetic means.  When Newton
    fails from the log-linear guess the voltage is ramped from 0.
    """
    options = options or SolverOptions()
    if v_applied is not None:
        scenario = scenario.with_voltage(v_applied)
    grid = grid or make_grid(scenario, options)
    model = _Model(scenario, grid)
    x = grid.x
    v = scenario.bc.v_applied

    def bath(vv):
        q_l, s_l, q_r, s_r = boundary_lift(replace(scenario.bc, v_applied=vv), model.params)
        return (0.5 * np.log(q_l * s_l), 0.5 * np.log(s_l / q_l),
                0.5 * np.log(q_r * s_r), 0.5 * np.log(s_r / q_r))

    def linear_guess(vv):
        mu_l, ph_l, mu_r, ph_r = bath(vv)
        return mu_l + (mu_r - mu_l) * x, ph_l + (ph_r - ph_l) * x

    iterations = 0
    mu, ph = linear_guess(v)
    try:
        mu, ph, iterations = _mu_phi_newton(mu, ph, model, tol, max_iter, options.g_oracle)
    except NoConvergence:
        for steps in continuation_steps:
            logger.info("mu-phi Newton: ramping voltage in %d steps", steps)
            mu, ph = linear_guess(0.0)
            try:
                for vv in np.linspace(0, v, steps + 1)[1:]:
                    mu_l, ph_l, mu_r, ph_r = bath(vv)
                    mu = mu + (mu_l - mu[0]) * (1 - x) + (mu_r - mu[-1]) * x
                    ph = ph + (ph_l - ph[0]) * (1 - x) + (ph_r - ph[-1]) * x
                    mu, ph, k = _mu_phi_newton(mu, ph, model, tol, max_iter, options.g_oracle)
                    iterations += k
                break
            except NoConvergence:
                continue
        else:
            raise

    a, g1, g2 = _mu_phi_coefficients(mu, model, options.g_oracle)
    p = model.params
    h = grid.h
    e = np.exp(mu)
    # true cross-section means
    Pbar, Nbar = 2 * e * g1, 2 * e * g2
    neutral = model.A * (Pbar - Nbar) + model.sigma_line
    AP = 0.5 * ((model.A * Pbar)[1:] + (model.A * Pbar)[:-1])
    AN = 0.5 * ((model.A * Nbar)[1:] + (model.A * Nbar)[:-1])
    dmu = np.diff(mu) / h
    dph = np.diff(ph) / h
    faces = -p.kappa_p * AP * (dmu + dph) + p.kappa_n * AN * (dmu - dph)
    return MuPhiSolution(
        x=x, mu_e=mu, phi_tilde=ph, Psi_hat=g1 + g2, g1=g1, g2=g2,
        current_I=face_average(faces, h), neutrality_residual=float(np.max(np.abs(neutral))),
        iterations=iterations,
    )


# ---------------------------------------------------------------------------
# IV sweeps

def iv_sweep(scenario: PoreScenario, voltages, options: SolverOptions | None = None,
             max_bisections=6) -> IVCurve:
    """Solve at each voltage, warm-starting outward from the point nearest 0 V.

    A failing point is approached by bisection from the nearest converged
    voltage; if that also fails the point is recorded as unconverged (NaN
    current) and the sweep continues.
    """
    options = options or SolverOptions()
    voltages = np.asarray(voltages, dtype=float)
    if voltages.size == 0:
        raise ValueError("empty voltage list")
    grid = make_grid(scenario, options)
    params = nondimensionalize(scenario)
    t0 = time.perf_counter()
    order = np.argsort(np.abs(voltages), kind="stable")
    solved = {}
    results = [None] * voltages.size

    def nearest_converged(v):
        same_side = [u for u in solved if u * v >= 0]
        pool = same_side or list(solved)
        return min(pool, key=lambda u: abs(u - v)) if pool else None

    def predictor(v, start):
        """Linear extrapolation in (ln Q, ln S) from the two converged
        voltages nearest ``v`` on its side; falls back to the nearest one."""
        if start is None:
            return None
        others = [u for u in solved if u != start and u * v >= 0 and abs(u - v) > abs(start - v)]
        if not others:
            return solved[start]
        prev = min(others, key=lambda u: abs(u - start))
        a, b = solved[start], solved[prev]
        w = (v - start) / (start - prev)
        return (np.exp(np.log(a.Q) + w * (np.log(a.Q) - np.log(b.Q))),
                np.exp(np.log(a.S) + w * (np.log(a.S) - np.log(b.S))))

    for k in order:
        v = voltages[k]
        start = nearest_converged(v)
        try:
            sol = solve_steady(scenario, v, options, initial=predictor(v, start), grid=grid)
        except NoConvergence as exc:
            sol = None
            last = exc
            v_from = 0.0 if start is None else start
            init = solved.get(start)
            for _ in range(max_bisections):
                mid = 0.5 * (v_from + v)
                try:
                    init = solve_steady(scenario, mid, options, initial=init, grid=grid)
                    v_from = mid
                    sol = solve_steady(scenario, v, options, initial=init, grid=grid)
                    break
                except NoConvergence as exc2:
                    last = exc2
                    continue
            if sol is None:
                logger.warning("quasi1d sweep point v=%g V failed: %s", v, last)
        if sol is not None:
            solved[v] = sol
        results[k] = sol

    cur = np.array([s.current_I if s else np.nan for s in results])
    return IVCurve(
        voltages=voltages,
        current=cur,
        current_A=cur * params.current_scale,
        iterations=np.array([s.iterations if s else -1 for s in results]),
        residual=np.array([s.residual if s else np.nan for s in results]),
        converged=np.array([s is not None for s in results]),
        solutions=results,
        elapsed_s=time.perf_counter() - t0,
    )
