"""Axisymmetric 2D PNP reference solver.

The pore (and any bath sections) is mapped onto a rectangle through
``r = R(x) xi`` with ``xi`` in [0, 1], so the wall is a grid line.  Lengths
are measured isotropically in units of R0: the axial coordinate is
``X = x / delta``.  In these variables the steady system reads

    div grad phi = (n - p) / Lambda**2,
    div F_p = 0,   F_p = -kappa_p (grad p + p grad phi),
    div F_n = 0,   F_n = -kappa_n (grad n - n grad phi),

with Dirichlet data at the two ends, zero normal ion flux on the wall and
``d phi / dN = Upsilon sigma`` there.

Discretization: vertex-centred boxes on the (X, xi) grid.  Each flux is
split into its component along the grid line (Scharfetter-Gummel for the
ions, central differences for the potential) plus the correction coming
from the non-orthogonality of the mapping, which uses the fluxes of the
neighbouring edges in the other direction.  In conservative form with
Jacobian ``R**2 xi``:

    d/dX (R**2 xi F_X) + d/dxi (R xi [(1 + xi**2 R'**2) F_r - xi R' F_line]) = 0,
    F_X = F_line - xi R' F_r,

where ``F_line`` is the derivative along constant xi, ``F_r`` the radial
flux and ``R' = dR/dX``.  The ion wall flux vanishes identically in this
form.  The coupled problem is solved by Gummel iteration.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .errors import DegenerateGeometry, NoConvergence
from .fv1d import AxialGrid, bernoulli, bernoulli_prime
from .model import PoreGeometry, PoreScenario, nondimensionalize
from .radial import box_weights

logger = logging.getLogger(__name__)

MIN_RADIUS = 1e-3  # in R0 units


@dataclass
class AxiMesh:
    x: np.ndarray          # axial nodes on [0, 1]
    xi: np.ndarray         # radial nodes on [0, 1]
    R: np.ndarray          # radius at axial nodes (R0 units)
    R_face: np.ndarray     # radius at axial cell midpoints
    slope: np.ndarray      # dR/dX at nodes
    slope_face: np.ndarray
    delta: float
    grading: float

    @property
    def nx(self):
        return self.x.size - 1

    @property
    def nr(self):
        return self.xi.size - 1

    @property
    def X(self):
        return self.x / self.delta

    @property
    def wall_cell(self):
        """Width of the wall-adjacent radial cell in R0 units, per column."""
        return self.R * (self.xi[-1] - self.xi[-2])

    def r(self):
        return self.R[:, None] * self.xi[None, :]


@dataclass
class Field2D:
    mesh: AxiMesh
    phi: np.ndarray  # (nx+1, nr+1)
    n: np.ndarray
    p: np.ndarray
    x_faces: np.ndarray
    current_profile: np.ndarray
    current_I: float
    current_spread: float
    iterations: int
    residual: float
    v_applied: float
    elapsed_s: float = 0.0
    history: list = field(default_factory=list)


def radial_nodes(nr, grading):
    """Nodes on [0, 1] whose cell widths shrink by ``1/grading`` toward xi = 1."""
    if grading == 1.0:
        return np.linspace(0.0, 1.0, nr + 1)
    widths = grading ** (-np.arange(nr, dtype=float))
    widths /= widths.sum()
    xi = np.concatenate(([0.0], np.cumsum(widths)))
    xi[-1] = 1.0
    return xi


def build_mesh(geometry: PoreGeometry, nx=256, nr=64, grading=1.08, features=(),
               cluster_fraction=0.3, axial_grid: AxialGrid | None = None) -> AxiMesh:
    """Boundary-fitted structured mesh.

    Axial nodes are graded by 1/R and optionally clustered at ``features``
    (normalized positions, e.g. the ends of the charged section) with a
    cluster width of one local radius.
    """
    if nx < 8 or nr < 8:
        raise DegenerateGeometry("nx and nr must both be at least 8")
    delta = geometry.radius_scale_R0 / geometry.length_L
    if axial_grid is None:
        if features:
            width = delta * float(np.min(geometry.radius(np.asarray(features))))
            axial_grid = AxialGrid.graded(geometry, nx, features=features,
                                          cluster_fraction=cluster_fraction, cluster_width=width)
        else:
            axial_grid = AxialGrid.graded(geometry, nx)
    x = axial_grid.x
    R = geometry.radius(x)
    if np.min(geometry.radius(np.linspace(0, 1, 4 * nx + 1))) < MIN_RADIUS:
        raise DegenerateGeometry("pore radius falls below the mesh resolution floor")
    mid = 0.5 * (x[1:] + x[:-1])
    return AxiMesh(
        x=x, xi=radial_nodes(nr, grading), R=R, R_face=geometry.radius(mid),
        slope=geometry.slope(x) * delta, slope_face=geometry.slope(mid) * delta,
        delta=delta, grading=grading,
    )


class _Operators:
    """Mesh-dependent sparse building blocks."""

    def __init__(self, mesh: AxiMesh):
        self.mesh = mesh
        nx, nr = mesh.nx, mesh.nr
        NX, NR = nx + 1, nr + 1
        self.shape = (NX, NR)
        N = NX * NR
        self.N = N
        idx = np.arange(N).reshape(NX, NR)
        X = mesh.X
        xi = mesh.xi
        hX = np.diff(X)
        hxi = np.diff(xi)
        xi_mid = 0.5 * (xi[1:] + xi[:-1])
        V = box_weights(xi)  # int xi dxi over each radial box
        dX = np.diff(np.concatenate(([X[0]], 0.5 * (X[1:] + X[:-1]), [X[-1]])))

        # axial edges (i, j) -> (i+1, j): shape (nx, NR)
        ax_a = idx[:-1, :].ravel()
        ax_b = idx[1:, :].ravel()
        n_ax = ax_a.size
        self.ax_a, self.ax_b = ax_a, ax_b
        self.ax_h = np.repeat(hX, NR)
        self.ax_xi = np.tile(xi, nx)
        self.ax_R = np.repeat(mesh.R_face, NR)
        self.ax_slope = np.repeat(mesh.slope_face, NR)
        self.ax_area = (np.repeat(mesh.R_face**2, NR) * np.tile(V, nx))  # R^2 int xi dxi

        # radial edges (i, j) -> (i, j+1): shape (NX, nr)
        ra_a = idx[:, :-1].ravel()
        ra_b = idx[:, 1:].ravel()
        n_ra = ra_a.size
        self.ra_a, self.ra_b = ra_a, ra_b
        self.ra_len = np.repeat(mesh.R, nr) * np.tile(hxi, NX)  # physical length R*hxi
        self.ra_xi = np.tile(xi_mid, NX)
        self.ra_slope = np.repeat(mesh.slope, nr)
        self.ra_area = np.repeat(dX * mesh.R, nr) * self.ra_xi  # dX * R * xi

        def selector(rows, n_rows):
            return sparse.csr_matrix((np.ones(rows.size), (np.arange(rows.size), rows)), shape=(n_rows, N))

        self.S_ax_a = selector(ax_a, n_ax)
        self.S_ax_b = selector(ax_b, n_ax)
        self.S_ra_a = selector(ra_a, n_ra)
        self.S_ra_b = selector(ra_b, n_ra)

        # divergence: outflow of node a, inflow of node b
        def divergence(a, b, n_edges):
            e = np.arange(n_edges)
            return sparse.csr_matrix(
                (np.concatenate([np.ones(n_edges), -np.ones(n_edges)]),
                 (np.concatenate([a, b]), np.concatenate([e, e]))), shape=(N, n_edges))

        self.D_ax = divergence(ax_a, ax_b, n_ax)
        self.D_ra = divergence(ra_a, ra_b, n_ra)

        # averaging of radial-edge fluxes onto axial edges and vice versa
        ra_id = np.arange(n_ra).reshape(NX, nr)
        rows, cols, vals = [], [], []
        for i in range(nx):
            for col in (i, i + 1):
                for j in range(NR):
                    nb = [e for e in (j - 1, j) if 0 <= e < nr]
                    for e in nb:
                        rows.append(i * NR + j)
                        cols.append(ra_id[col, e])
                        vals.append(0.5 / len(nb))
        self.avg_ra_to_ax = sparse.csr_matrix((vals, (rows, cols)), shape=(n_ax, n_ra))
        ax_id = np.arange(n_ax).reshape(nx, NR)
        rows, cols, vals = [], [], []
        for i in range(NX):
            sides = [s for s in (i - 1, i) if 0 <= s < nx]
            for j in range(nr):
                for s in sides:
                    for jj in (j, j + 1):
                        rows.append(i * nr + j)
                        cols.append(ax_id[s, jj])
                        vals.append(0.5 / len(sides))
        self.avg_ax_to_ra = sparse.csr_matrix((vals, (rows, cols)), shape=(n_ra, n_ax))

        self.ax_cross = self.ax_xi * self.ax_slope
        self.ra_cross = self.ra_xi * self.ra_slope
        self.ra_metric = 1.0 + self.ra_cross**2
        self.volume = (dX[:, None] * mesh.R[:, None] ** 2 * V[None, :]).ravel()
        self.dX = dX
        self.V = V

        dirichlet = np.zeros((NX, NR), dtype=bool)
        dirichlet[0, :] = dirichlet[-1, :] = True
        self.dirichlet = dirichlet.ravel()
        self.interior = ~self.dirichlet
        self.wall = np.zeros((NX, NR), dtype=bool)
        self.wall[:, -1] = True
        self.wall = self.wall.ravel()

        # Laplacian (outflow form) for the potential
        g_ax = sparse.diags(1.0 / self.ax_h) @ (self.S_ax_b - self.S_ax_a)
        g_ra = sparse.diags(1.0 / self.ra_len) @ (self.S_ra_b - self.S_ra_a)
        self.laplacian = self._assemble(g_ax, g_ra)

    def _assemble(self, e_ax, e_ra):
        """Outflow operator -sum of integrated fluxes for line-flux operators.

        ``e_ax`` and ``e_ra`` map nodal values to the grid-line fluxes on
        axial and radial edges; the true fluxes add the cross terms.
        """
        F_ax = e_ax - sparse.diags(self.ax_cross) @ self.avg_ra_to_ax @ e_ra
        F_ra = sparse.diags(self.ra_metric) @ e_ra - sparse.diags(self.ra_cross) @ self.avg_ax_to_ra @ e_ax
        # outflow at node a is +flux for a flux pointing a -> b
        return -(self.D_ax @ sparse.diags(self.ax_area) @ F_ax
                 + self.D_ra @ sparse.diags(self.ra_area) @ F_ra).tocsr()

    def outflow(self, f_ax, f_ra):
        """Net outflow per node for given grid-line fluxes on the edges
        (the action of :meth:`_assemble` on flux vectors)."""
        F_ax = f_ax - self.ax_cross * (self.avg_ra_to_ax @ f_ra)
        F_ra = self.ra_metric * f_ra - self.ra_cross * (self.avg_ax_to_ra @ f_ax)
        return -(self.D_ax @ (self.ax_area * F_ax) + self.D_ra @ (self.ra_area * F_ra))

    def slotboom_line_fluxes(self, phi, kappa, sign, u):
        """SG line fluxes written with the Slotboom variable
        ``u = c exp(sign phi)``: ``g (u_a - u_b)`` with
        ``g = kappa / h * B(d) * exp(-sign phi_a)``.  They vanish exactly
        where ``u`` is constant."""
        d_ax = sign * (phi[self.ax_b] - phi[self.ax_a])
        d_ra = sign * (phi[self.ra_b] - phi[self.ra_a])
        g_ax = kappa / self.ax_h * bernoulli(d_ax) * np.exp(-sign * phi[self.ax_a])
        g_ra = kappa / self.ra_len * bernoulli(d_ra) * np.exp(-sign * phi[self.ra_a])
        return g_ax * (u[self.ax_a] - u[self.ax_b]), g_ra * (u[self.ra_a] - u[self.ra_b])

    def sg_edges(self, phi, kappa, sign):
        """Scharfetter-Gummel line-flux operators for one species."""
        d_ax = sign * (phi[self.ax_b] - phi[self.ax_a])
        d_ra = sign * (phi[self.ra_b] - phi[self.ra_a])
        e_ax = (sparse.diags(kappa / self.ax_h * bernoulli(d_ax)) @ self.S_ax_a
                - sparse.diags(kappa / self.ax_h * bernoulli(-d_ax)) @ self.S_ax_b)
        e_ra = (sparse.diags(kappa / self.ra_len * bernoulli(d_ra)) @ self.S_ra_a
                - sparse.diags(kappa / self.ra_len * bernoulli(-d_ra)) @ self.S_ra_b)
        return e_ax, e_ra

    def sg_potential_derivative(self, phi, kappa, sign, c):
        """Derivatives of the SG line fluxes with respect to the nodal
        potential, as edge-by-node operators for :meth:`_assemble`."""
        out = []
        for a, b, h, S_a, S_b in ((self.ax_a, self.ax_b, self.ax_h, self.S_ax_a, self.S_ax_b),
                                  (self.ra_a, self.ra_b, self.ra_len, self.S_ra_a, self.S_ra_b)):
            d = sign * (phi[b] - phi[a])
            w = sign * kappa / h * (bernoulli_prime(d) * c[a] + bernoulli_prime(-d) * c[b])
            out.append(sparse.diags(w) @ (S_b - S_a))
        return out


def _sparse_solve(A, b, refinements=2):
    """Direct solve with row equilibration and iterative refinement.

    Cell sizes on the graded meshes span several decades, so the plain LU
    solution carries errors far above machine precision; a couple of
    refinement sweeps with the same factorization remove most of them.
    """
    A = sparse.csc_matrix(A)
    scale = 1.0 / np.maximum(abs(A).max(axis=1).toarray().ravel(), np.finfo(float).tiny)
    As = sparse.diags(scale) @ A
    bs = scale * b
    lu = splinalg.splu(As.tocsc())
    x = lu.solve(bs)
    for _ in range(refinements):
        r = bs - As @ x
        x = x + lu.solve(r)
    return x


class _Problem:
    def __init__(self, mesh: AxiMesh, scenario: PoreScenario):
        self.mesh = mesh
        self.ops = _Operators(mesh)
        self.params = nondimensionalize(scenario)
        p = self.params
        bc = scenario.bc
        c = p.conc_scale
        self.phi_r = bc.v_applied / p.thermal_voltage
        self.ends = {
            "n": (bc.conc_left_n / c, bc.conc_right_n / c),
            "p": (bc.conc_left_p / c, bc.conc_right_p / c),
            "phi": (0.0, self.phi_r),
        }
        sigma = scenario.surface_charge.nodal(mesh.x)
        NX, NR = self.ops.shape
        wall_flux = np.zeros((NX, NR))
        wall_flux[:, -1] = self.ops.dX * mesh.R * p.Upsilon * sigma * np.sqrt(1 + mesh.slope**2)
        # the wall flux is an outflow of grad(phi) through the boundary face
        self.wall_term = wall_flux.ravel()
        self.inv_L2 = 1.0 / p.Lambda**2

    def dirichlet_vector(self, key):
        NX, NR = self.ops.shape
        left, right = self.ends[key]
        v = np.zeros((NX, NR))
        v[0, :] = left
        v[-1, :] = right
        return v.ravel()

    def _with_dirichlet(self, A, rhs, key):
        ops = self.ops
        keep = sparse.diags(ops.interior.astype(float))
        A = (keep @ A + sparse.diags(ops.dirichlet.astype(float))).tocsc()
        rhs = np.where(ops.dirichlet, self.dirichlet_vector(key), rhs)
        return A, rhs

    def poisson(self, phi0, n0, p0, tol=1e-10, max_iter=60):
        """Nonlinear Poisson step with the quasi-Fermi levels frozen."""
        ops = self.ops
        # residual: -(outflow of grad phi) + wall outflow ... sign kept as
        # outflow(grad phi) + wall = volume * (n - p) / Lambda**2
        L = -ops.laplacian  # L @ phi = net outflow of grad phi
        phi = phi0.copy()
        vol = ops.volume * self.inv_L2
        for _ in range(max_iter):
            d = phi - phi0
            n = n0 * np.exp(d)
            p = p0 * np.exp(-d)
            F = L @ phi + self.wall_term - vol * (n - p)
            J = L - sparse.diags(vol * (n + p))
            J, rhs = self._with_dirichlet(J, -F, "phi")
            rhs = np.where(ops.dirichlet, 0.0, rhs)
            step = _sparse_solve(J, rhs)
            step = np.clip(step, -1.0, 1.0)
            phi += step
            if np.max(np.abs(step)) < tol:
                return phi
        logger.debug("pnp2d: Poisson Newton hit %d iterations", max_iter)
        return phi

    def continuity(self, phi, kappa, sign, key):
        """Linear SG solve for one species, written as a correction to the
        density whose Slotboom variable interpolates the bath values
        linearly in x.  With equal bath values that reference is the exact
        Boltzmann state, so equilibrium is reproduced without roundoff."""
        ops = self.ops
        left, right = self.ends[key]
        x = np.repeat(self.mesh.x, self.mesh.nr + 1)
        u_l = left * np.exp(sign * self.ends["phi"][0])
        u_r = right * np.exp(sign * self.ends["phi"][1])
        u_ref = u_l + (u_r - u_l) * x if u_r != u_l else np.full(x.size, u_l)
        c_ref = u_ref * np.exp(-sign * phi)
        c_ref[ops.dirichlet] = self.dirichlet_vector(key)[ops.dirichlet]
        residual = ops.outflow(*ops.slotboom_line_fluxes(phi, kappa, sign, u_ref))
        if not np.any(residual[ops.interior]):
            return c_ref
        e_ax, e_ra = ops.sg_edges(phi, kappa, sign)
        A = ops._assemble(e_ax, e_ra)
        A, rhs = self._with_dirichlet(A, -residual, key)
        rhs = np.where(ops.dirichlet, 0.0, rhs)
        return c_ref + _sparse_solve(A, rhs)

    def coupled_residual(self, phi, n, p):
        """Residuals of the Poisson and both continuity equations, zero on
        the Dirichlet rows."""
        ops = self.ops
        kp, kn = self.params.kappa_p, self.params.kappa_n
        vol = ops.volume * self.inv_L2
        r_phi = -ops.laplacian @ phi + self.wall_term - vol * (n - p)
        r_n = ops.outflow(*ops.slotboom_line_fluxes(phi, kn, -1, n * np.exp(-phi)))
        r_p = ops.outflow(*ops.slotboom_line_fluxes(phi, kp, +1, p * np.exp(phi)))
        res = np.concatenate([r_phi, r_n, r_p])
        res[np.tile(ops.dirichlet, 3)] = 0.0
        return res

    def coupled_newton(self, phi, n, p, tol=1e-10, max_iter=8):
        """Coupled Newton iteration on ``(phi, n, p)`` started from a Gummel
        state; returns the new state and the size of the last accepted step
        (``inf`` if none was accepted).

        Gummel converges linearly, stalls on strongly rectifying cases, and
        has a floor near 1e-7 set by the continuity solves amplifying
        roundoff in the potential; the coupled step avoids all three.  A
        step is kept only while it lowers the row-scaled residual, so the
        iteration never degrades its starting state.
        """
        ops = self.ops
        kp, kn = self.params.kappa_p, self.params.kappa_n
        vol = sparse.diags(ops.volume * self.inv_L2)
        fixed = np.tile(ops.dirichlet, 3)
        N = phi.size
        size = np.inf
        for it in range(max_iter):
            J = sparse.bmat([
                [-ops.laplacian, -vol, vol],
                [ops._assemble(*ops.sg_potential_derivative(phi, kn, -1, n)),
                 ops._assemble(*ops.sg_edges(phi, kn, -1)), None],
                [ops._assemble(*ops.sg_potential_derivative(phi, kp, +1, p)),
                 None, ops._assemble(*ops.sg_edges(phi, kp, +1))],
            ]).tocsr()
            J = (sparse.diags((~fixed).astype(float)) @ J + sparse.diags(fixed.astype(float))).tocsc()
            row_scale = 1.0 / np.maximum(abs(J).max(axis=1).toarray().ravel(), np.finfo(float).tiny)
            res = self.coupled_residual(phi, n, p)
            norm = np.linalg.norm(row_scale * res)
            step = _sparse_solve(J, -res)
            d_phi, d_n, d_p = step[:N], step[N:2 * N], step[2 * N:]
            t = 1.0
            while t > 1e-3:
                cand = (phi + t * d_phi, n + t * d_n, p + t * d_p)
                if np.all(cand[1] > 0) and np.all(cand[2] > 0):
                    new = np.linalg.norm(row_scale * self.coupled_residual(*cand))
                    if new < norm:
                        break
                t *= 0.5
            else:
                logger.debug("pnp2d Newton: no descent at step %d", it + 1)
                break
            size = float(max(np.max(np.abs(t * d_phi)),
                             np.max(np.abs(t * d_n) / n), np.max(np.abs(t * d_p) / p)))
            phi, n, p = cand
            logger.debug("pnp2d Newton %d: step %.3e residual %.3e", it + 1, size, new)
            if size < tol:
                break
        return phi, n, p, size

    def axial_flux(self, phi, c, kappa, sign):
        ops = self.ops
        f_ax, f_ra = ops.slotboom_line_fluxes(phi, kappa, sign, c * np.exp(sign * phi))
        return f_ax - ops.ax_cross * (ops.avg_ra_to_ax @ f_ra)

    def currents(self, phi, n, p):
        ops = self.ops
        kp, kn = self.params.kappa_p, self.params.kappa_n
        fp = self.axial_flux(phi, p, kp, +1)
        fn = self.axial_flux(phi, n, kn, -1)
        nx, NR = self.mesh.nx, self.mesh.nr + 1
        # disc integral of u = F_X / delta: 2 pi R^2 int xi F_X dxi / delta
        per_edge = 2 * np.pi * ops.ax_area * (fp - fn) / self.mesh.delta
        return per_edge.reshape(nx, NR).sum(axis=1)


def initial_fields(mesh: AxiMesh, scenario: PoreScenario):
    """Quasi-1D solution with radial reconstruction, sampled on the mesh."""
    from .quasi1d import _Model, solve_steady
    from .radial import solve_psi_batch

    q = solve_steady(scenario)
    Q = np.exp(np.interp(mesh.x, q.x, np.log(q.Q)))
    S = np.exp(np.interp(mesh.x, q.x, np.log(q.S)))
    model = _Model(scenario, AxialGrid(mesh.x))
    lam = model.lam(Q * S)
    xi_b = np.broadcast_to(mesh.xi, (mesh.x.size, mesh.xi.size))
    _, psi, _, _ = solve_psi_batch(lam, model.beta, xi=np.array(xi_b))
    root = np.sqrt(Q * S)[:, None]
    phi = 0.5 * np.log(S / Q)[:, None] + psi
    n = root * np.exp(psi)
    p = root * np.exp(-psi)
    return phi.ravel(), n.ravel(), p.ravel()


def gummel_solve(mesh: AxiMesh, scenario: PoreScenario, v_applied=None, tol=1e-7, max_iter=300,
                 damping_threshold=2.0, initial=None, polish=True, newton_switch=1e-2) -> Field2D:
    """Gummel iteration for the 2D system; see the module docstring.

    With ``polish`` the Gummel sweeps hand over to a coupled Newton
    iteration once the potential update drops below ``newton_switch``, and
    a converged Gummel state is refined by the same Newton steps.  This
    removes the Gummel roundoff floor (about ``tol``) from the currents and
    the stalls seen on strongly rectifying pores.  A failed hand-over falls
    back to Gummel with a ten times smaller switch threshold.

    ``initial`` may be a :class:`Field2D` (for continuation) or a tuple of
    flat ``(phi, n, p)`` arrays; by default the quasi-1D solution is used.
    """
    t0 = time.perf_counter()
    if v_applied is not None:
        scenario = scenario.with_voltage(v_applied)
    prob = _Problem(mesh, scenario)
    ops = prob.ops
    if initial is None:
        phi, n, p = initial_fields(mesh, scenario)
    elif isinstance(initial, Field2D):
        phi = initial.phi.ravel() + (prob.phi_r - initial.phi[-1, 0]) * np.repeat(mesh.x, mesh.nr + 1)
        n, p = initial.n.ravel().copy(), initial.p.ravel().copy()
    else:
        phi, n, p = (np.array(a, dtype=float).ravel() for a in initial)
    for key, arr in (("phi", phi), ("n", n), ("p", p)):
        arr[ops.dirichlet] = prob.dirichlet_vector(key)[ops.dirichlet]
    kp, kn = prob.params.kappa_p, prob.params.kappa_n
    history = []
    upd = np.inf
    for it in range(1, max_iter + 1):
        phi_new = prob.poisson(phi, n, p)
        delta = phi_new - phi
        upd = float(np.max(np.abs(delta)))
        if upd > damping_threshold:
            phi_new = phi + 0.5 * delta
        phi = phi_new
        p = prob.continuity(phi, kp, +1, "p")
        n = prob.continuity(phi, kn, -1, "n")
        history.append(upd)
        logger.debug("pnp2d Gummel %d: update %.3e", it, upd)
        if upd < tol:
            if polish:
                phi, n, p, _ = prob.coupled_newton(phi, n, p)
            break
        if polish and it >= 2 and upd < newton_switch:
            state = prob.coupled_newton(phi, n, p, max_iter=30)
            if state[3] < tol:
                phi, n, p, upd = state
                history.append(upd)
                break
            logger.debug("pnp2d: Newton hand-over failed at update %.3e", upd)
            newton_switch = upd / 10
    else:
        raise NoConvergence(f"pnp2d Gummel did not converge at v={scenario.bc.v_applied:g} V",
                            max_iter, upd, history)
    if np.any(n <= 0) or np.any(p <= 0):
        raise NoConvergence("pnp2d produced non-positive densities", it, upd, history)
    profile = prob.currents(phi, n, p)
    hX = np.diff(mesh.X)
    shape = ops.shape
    return Field2D(
        mesh=mesh, phi=phi.reshape(shape), n=n.reshape(shape), p=p.reshape(shape),
        x_faces=0.5 * (mesh.x[1:] + mesh.x[:-1]), current_profile=profile,
        current_I=float(np.sum(profile * hX) / np.sum(hX)),
        current_spread=float(np.ptp(profile)), iterations=it, residual=upd,
        v_applied=scenario.bc.v_applied, elapsed_s=time.perf_counter() - t0, history=history,
    )


def current_2d(field2d: Field2D, x_station=None):
    """Current through the axial cell face nearest ``x_station`` or, when no
    station is given, the (length-weighted) mean with its max-min spread."""
    if x_station is None:
        return field2d.current_I, field2d.current_spread
    k = int(np.argmin(np.abs(field2d.x_faces - x_station)))
    return float(field2d.current_profile[k])


def default_mesh(scenario: PoreScenario, nx=None, nr=None, grading=None) -> AxiMesh:
    """Desk-scale defaults: 256 x 64 for short pores, 512 x 48 for long ones."""
    from .quasi1d import charge_edges

    long_pore = scenario.geometry.bath_length > 0
    nx = nx or (512 if long_pore else 256)
    nr = nr or (48 if long_pore else 64)
    grading = grading or (1.1 if long_pore else 1.08)
    return build_mesh(scenario.geometry, nx, nr, grading, features=charge_edges(scenario))
