"""Area-averaged 1D PNP model (the classical baseline).

Dimensionless steady system on the normalized axis, with A = pi R**2 and the
wall charge folded in as a line charge:

    (delta Lambda)**2 (A phi')' = -(A (p - n) + Sigma_l),
    (A J_p)' = 0,   J_p = -kappa_p (p' + p phi'),
    (A J_n)' = 0,   J_n = -kappa_n (n' - n phi'),

with Sigma_l = 2 pi Lambda**2 Upsilon R sigma.  Fluxes use the
Scharfetter-Gummel exponential fitting; the coupled system is solved by
Gummel iteration, finished by a coupled Newton iteration when the Gummel
map contracts too slowly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg

from .errors import NoConvergence
from .fv1d import AxialGrid, bernoulli, bernoulli_prime, solve_conservative
from .model import PoreScenario, nondimensionalize
from .quasi1d import SolverOptions, make_grid

logger = logging.getLogger(__name__)


@dataclass
class AreaAveragedSolution:
    x: np.ndarray
    phi: np.ndarray
    n: np.ndarray
    p: np.ndarray
    current_I: float
    current_spread: float
    iterations: int
    residual: float
    v_applied: float
    method: str = "gummel"
    history: list = field(default_factory=list)


@dataclass(frozen=True)
class GummelOptions:
    """Gummel controls.  Updates stall near 1e-10 from roundoff on strongly
    graded grids, so ``tol`` sits just above that floor."""

    tol: float = 1e-9
    max_iter: int = 400
    damping_threshold: float = 2.0
    newton_polish: bool = True


class _Discretization:
    def __init__(self, scenario: PoreScenario, grid: AxialGrid):
        params = nondimensionalize(scenario)
        self.params = params
        self.grid = grid
        x = grid.x
        geom = scenario.geometry
        self.h = grid.h
        self.A_node = geom.area(x)
        self.A_face = geom.area(grid.midpoints)
        sigma = scenario.surface_charge.nodal(x)
        self.sigma_line = 2 * np.pi * params.Lambda**2 * params.Upsilon * geom.radius(x) * sigma
        mid = grid.midpoints
        self.vol = np.diff(np.concatenate(([0.0], mid, [1.0])))  # dual cell lengths
        self.eps = params.axial_screening
        c = params.conc_scale
        bc = scenario.bc
        self.phi_r = bc.v_applied / params.thermal_voltage
        self.n_l, self.p_l = bc.conc_left_n / c, bc.conc_left_p / c
        self.n_r, self.p_r = bc.conc_right_n / c, bc.conc_right_p / c

    # fluxes -----------------------------------------------------------------
    def face_fluxes(self, phi, n, p):
        d = np.diff(phi)
        kp, kn = self.params.kappa_p, self.params.kappa_n
        jp = kp / self.h * (bernoulli(d) * p[:-1] - bernoulli(-d) * p[1:])
        jn = kn / self.h * (bernoulli(-d) * n[:-1] - bernoulli(d) * n[1:])
        return jp, jn

    def _slotboom_conductance(self, phi, kappa, sign):
        """Face conductances for the Slotboom variable ``u = c exp(sign phi)``.

        The SG flux ``(kappa A / h) [B(d) c_i - B(-d) c_{i+1}]`` with
        ``d = sign * diff(phi)`` equals ``g_i (u_i - u_{i+1})`` with
        ``g_i = (kappa A / h) B(d) exp(-sign phi_i)``.
        """
        d = sign * np.diff(phi)
        return self.A_face * kappa / self.h * bernoulli(d) * np.exp(-sign * phi[:-1])

    def continuity_solve(self, phi, kappa, sign, left, right, return_flux=False):
        """SG solve of (A J)' = 0 for one species; sign=+1 for cations.

        In 1D the flux is one constant, so the solve is the exact
        cumulative-resistance formula in the Slotboom variable; at
        equilibrium the variable stays exactly constant.  With
        ``return_flux`` the common flux ``A J`` is returned as well.
        """
        g = self._slotboom_conductance(phi, kappa, sign)
        u_l = left * np.exp(sign * phi[0])
        u_r = right * np.exp(sign * phi[-1])
        u, flux = solve_conservative(g * self.h, self.h, u_l, u_r)
        c = u * np.exp(-sign * phi)
        c[0], c[-1] = left, right
        # the SG flux is g (u_i - u_{i+1}), minus the solver's c u' flux
        return (c, -flux) if return_flux else c

    def poisson_solve(self, phi_old, n_old, p_old, tol=1e-12, max_iter=100):
        """Nonlinear Poisson with quasi-Fermi levels frozen (n ~ exp(phi), p ~ exp(-phi))."""
        phi = phi_old.copy()
        wf = self.eps * self.A_face / self.h
        m = phi.size - 2
        for _ in range(max_iter):
            dphi = phi - phi_old
            n = n_old * np.exp(dphi)
            p = p_old * np.exp(-dphi)
            flux = wf * np.diff(phi)
            F = np.diff(flux) + self.vol[1:-1] * (self.A_node[1:-1] * (p - n)[1:-1] + self.sigma_line[1:-1])
            diag = -(wf[:-1] + wf[1:]) - self.vol[1:-1] * self.A_node[1:-1] * (p + n)[1:-1]
            ab = np.zeros((3, m))
            ab[1] = diag
            ab[0, 1:] = wf[1:-1]
            ab[2, :-1] = wf[1:-1]
            step = linalg.solve_banded((1, 1), ab, -F, check_finite=False)
            step = np.clip(step, -2.0, 2.0)
            phi[1:-1] += step
            if np.max(np.abs(step)) < tol:
                break
        return phi

    def residual(self, phi, n, p):
        jp, jn = self.face_fluxes(phi, n, p)
        Af = self.A_face
        r_phi = np.diff(self.eps * Af * np.diff(phi) / self.h) + self.vol[1:-1] * (
            self.A_node[1:-1] * (p - n)[1:-1] + self.sigma_line[1:-1])
        return r_phi, np.diff(Af * jp), np.diff(Af * jn)

    def current_faces(self, phi, n, p):
        """Face values of A (J_p - J_n), evaluated in Slotboom form."""
        kp, kn = self.params.kappa_p, self.params.kappa_n
        up = p * np.exp(phi)
        un = n * np.exp(-phi)
        fp = self._slotboom_conductance(phi, kp, +1) * -np.diff(up)
        fn = self._slotboom_conductance(phi, kn, -1) * -np.diff(un)
        return fp - fn


def _initial_state(disc: _Discretization):
    """Locally neutral Donnan state on a log-linear concentration background."""
    x = disc.grid.x
    c = np.exp(np.log(np.sqrt(disc.n_l * disc.p_l)) * (1 - x)
               + np.log(np.sqrt(disc.n_r * disc.p_r)) * x)
    donnan = np.arcsinh(disc.sigma_line / (2 * disc.A_node * c))
    phi = disc.phi_r * x + donnan
    n = c * np.exp(donnan)
    p = c * np.exp(-donnan)
    phi[0], phi[-1] = 0.0, disc.phi_r
    n[0], n[-1], p[0], p[-1] = disc.n_l, disc.n_r, disc.p_l, disc.p_r
    return phi, n, p


def _newton(disc: _Discretization, phi, n, p, tol=1e-10, max_iter=60):
    """Coupled Newton on (phi, n, p) in Slotboom-free SG form."""
    N = phi.size
    m = N - 2
    kp, kn = disc.params.kappa_p, disc.params.kappa_n
    h, Af = disc.h, disc.A_face
    wf = disc.eps * Af / h

    def jac(phi, n, p):
        d = np.diff(phi)
        Bp, Bm = bernoulli(d), bernoulli(-d)
        dBp = bernoulli_prime(d)
        dBm = -bernoulli_prime(-d)  # derivative of B(-d) w.r.t. d
        # face flux derivatives, fp = Af kp/h (Bp p_i - Bm p_{i+1})
        cp = Af * kp / h
        cn = Af * kn / h
        fp_pi, fp_pj = cp * Bp, -cp * Bm
        fp_d = cp * (dBp * p[:-1] - dBm * p[1:])
        fn_ni, fn_nj = cn * Bm, -cn * Bp
        fn_d = cn * (dBm * n[:-1] - dBp * n[1:])
        rows, cols, vals = [], [], []

        def put(eq, k, var, node, v):
            ok = (node >= 1) & (node <= N - 2)
            rows.append(3 * (k[ok] - 1) + eq)
            cols.append(3 * (node[ok] - 1) + var)
            vals.append(v[ok])

        k = np.arange(1, N - 1)
        fr, fl = k, k - 1  # faces right and left of node k
        # Poisson: wf_r (phi_{k+1}-phi_k) - wf_l (phi_k - phi_{k-1}) + vol (A (p-n) + Sigma)
        put(0, k, 0, k + 1, wf[fr])
        put(0, k, 0, k - 1, wf[fl])
        put(0, k, 0, k, -(wf[fr] + wf[fl]))
        put(0, k, 2, k, disc.vol[k] * disc.A_node[k])
        put(0, k, 1, k, -disc.vol[k] * disc.A_node[k])
        # species balance: f_r - f_l, d = phi_{i+1} - phi_i on each face
        for eq, var, fi, fj, fd in ((1, 2, fp_pi, fp_pj, fp_d), (2, 1, fn_ni, fn_nj, fn_d)):
            put(eq, k, var, k, fi[fr] - fj[fl])
            put(eq, k, var, k + 1, fj[fr])
            put(eq, k, var, k - 1, -fi[fl])
            put(eq, k, 0, k + 1, fd[fr])
            put(eq, k, 0, k, -fd[fr] - fd[fl])
            put(eq, k, 0, k - 1, fd[fl])
        return sparse.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                 shape=(3 * m, 3 * m))

    def res(phi, n, p):
        r0, r1, r2 = disc.residual(phi, n, p)
        out = np.empty(3 * m)
        out[0::3], out[1::3], out[2::3] = r0, r1, r2
        return out

    r = res(phi, n, p)
    for it in range(1, max_iter + 1):
        step = splinalg.spsolve(jac(phi, n, p), -r)
        dphi, dn, dp = step[0::3], step[1::3], step[2::3]
        t = 1.0
        # keep concentrations positive and the potential step moderate
        for _ in range(30):
            ok = np.all(n[1:-1] + t * dn > 0) and np.all(p[1:-1] + t * dp > 0) and t * np.max(np.abs(dphi)) <= 2
            if ok:
                phi_t, n_t, p_t = phi.copy(), n.copy(), p.copy()
                phi_t[1:-1] += t * dphi
                n_t[1:-1] += t * dn
                p_t[1:-1] += t * dp
                r_t = res(phi_t, n_t, p_t)
                if np.linalg.norm(r_t) <= (1 - 1e-4 * t) * np.linalg.norm(r) or t < 1e-6:
                    break
            t *= 0.5
        phi, n, p, r = phi_t, n_t, p_t, r_t
        # the residual has a roundoff floor set by the large, cancelling SG
        # terms, so convergence is judged on the size of the Newton step
        size = max(np.max(np.abs(dphi)), np.max(np.abs(dn) / n[1:-1]), np.max(np.abs(dp) / p[1:-1]))
        if size < tol:
            return phi, n, p, it
    raise NoConvergence("area-averaged Newton did not converge", max_iter, float(np.max(np.abs(r))))


def solve_area_averaged(scenario: PoreScenario, v_applied=None, options: SolverOptions | None = None,
                        gummel: GummelOptions | None = None, grid: AxialGrid | None = None,
                        initial: AreaAveragedSolution | None = None) -> AreaAveragedSolution:
    """Gummel solution of the area-averaged model; see the module docstring."""
    options = options or SolverOptions()
    gummel = gummel or GummelOptions()
    if v_applied is not None:
        scenario = scenario.with_voltage(v_applied)
    grid = grid or make_grid(scenario, options)
    disc = _Discretization(scenario, grid)
    x = grid.x
    if initial is None:
        phi, n, p = _initial_state(disc)
    else:
        phi = initial.phi + (disc.phi_r - initial.phi[-1]) * x
        n, p = initial.n.copy(), initial.p.copy()
        n[-1], p[-1] = disc.n_r, disc.p_r
    kp, kn = disc.params.kappa_p, disc.params.kappa_n
    history = []
    method = "gummel"
    converged = False
    upd = np.inf
    for it in range(1, gummel.max_iter + 1):
        phi_new = disc.poisson_solve(phi, n, p)
        delta = phi_new - phi
        upd = np.max(np.abs(delta))
        if upd > gummel.damping_threshold:
            phi_new = phi + 0.5 * delta
        # carry the Boltzmann update into the densities before the continuity solves
        phi = phi_new
        p = disc.continuity_solve(phi, kp, +1, disc.p_l, disc.p_r)
        n = disc.continuity_solve(phi, kn, -1, disc.n_l, disc.n_r)
        history.append(upd)
        if upd < gummel.tol:
            converged = True
            break
        if it >= 40 and history[-1] > 0.9 * history[-20] and gummel.newton_polish:
            break  # stagnating; hand over to Newton below
    if not converged:
        if not gummel.newton_polish:
            raise NoConvergence(f"area-averaged Gummel did not converge at v={scenario.bc.v_applied:g} V",
                                len(history), upd, history)
        logger.info("area1d: Gummel stalled after %d iterations (update %.2e); Newton polish",
                    len(history), upd)
        phi, n, p, k = _newton(disc, phi, n, p)
        method = "gummel+newton"
        it = len(history) + k
        upd = 0.0
    # The current is the common flux of the final continuity solves, which
    # is constant by construction.  Face fluxes recomputed from the nodal
    # densities lose digits to cancellation on highly conducting faces
    # (wide baths), so their spread is a roundoff diagnostic.
    _, flux_p = disc.continuity_solve(phi, kp, +1, disc.p_l, disc.p_r, return_flux=True)
    _, flux_n = disc.continuity_solve(phi, kn, -1, disc.n_l, disc.n_r, return_flux=True)
    faces = disc.current_faces(phi, n, p)
    return AreaAveragedSolution(
        x=x, phi=phi, n=n, p=p, current_I=float(flux_p - flux_n), current_spread=float(np.ptp(faces)),
        iterations=it, residual=float(upd), v_applied=scenario.bc.v_applied, method=method,
        history=history,
    )
