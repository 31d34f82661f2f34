"""Run orchestration: solver dispatch, IV sweeps, comparison reports and CSV output.

All solvers are deterministic, so a run is fully described by its
:class:`RunSpec` and the scenario text.  Every run writes ``manifest.json``
with a hash of both plus the SHA-256 of each artifact; :func:`rerun`
replays a manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, area1d, pnp2d, quasi1d, scenarios
from .errors import ConfigError, GridMismatch, NanoPNPError, NoConvergence
from .model import PoreScenario, nondimensionalize
from .radial import box_weights

logger = logging.getLogger(__name__)

SOLVERS = ("quasi1d", "area1d", "pnp2d")
DEFAULT_STATIONS = (0.2, 0.5, 0.8)
# conical stations at 5800, 7800 and 12800 nm of the 20 um domain with baths
STATIONS = {"conical": (0.29, 0.39, 0.64)}
PROFILE_CELLS = 64  # radial cells of the 1D profiles, graded like the 2D mesh
PROFILE_GRADING = 1.08


def stations_for(scenario: PoreScenario):
    return STATIONS.get(scenario.name, DEFAULT_STATIONS)


def parse_sweep(text: str):
    """``"a:b:n"`` -> ``n`` equally spaced voltages from a to b."""
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise ConfigError(f"sweep must look like a:b:n, got {text!r}") from None
    if n < 1:
        raise ConfigError("sweep range is empty")
    return np.linspace(a, b, n) if n > 1 else np.array([a])


def max_workers():
    """Worker cap from ``NANOPNP_THREADS`` (default: all CPUs)."""
    raw = os.environ.get("NANOPNP_THREADS")
    cpus = os.cpu_count() or 1
    if raw is None:
        return cpus
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"NANOPNP_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(value, cpus))


@dataclass
class RunSpec:
    """One invocation of :func:`run`.

    ``scenario`` is a TOML path or a built-in name.  ``voltages`` holds the
    sweep (a single entry for a point solve).
    """

    scenario: str
    solver: str = "quasi1d"
    voltages: tuple = (0.0,)
    out: str = "."
    fields: bool = False
    g_oracle: bool = False
    nx: int | None = None
    nr: int | None = None
    iv_filename: str | None = None  # overrides iv_<solver>.csv for single-solver runs

    def __post_init__(self):
        if self.solver not in SOLVERS + ("all",):
            raise ConfigError(f"solver must be one of {SOLVERS + ('all',)}, got {self.solver!r}")
        self.voltages = tuple(float(v) for v in np.atleast_1d(self.voltages))
        if not self.voltages:
            raise ConfigError("sweep range is empty")

    @property
    def solvers(self):
        return SOLVERS if self.solver == "all" else (self.solver,)


@dataclass
class SolverReport:
    """IV data of one solver plus cross-section profiles at the stations.

    ``profiles[k][station]`` is ``(xi, phi, n)`` for voltage index ``k``.
    """

    solver: str
    voltages: np.ndarray
    current: np.ndarray
    current_A: np.ndarray
    iterations: np.ndarray
    residual: np.ndarray
    runtime_s: np.ndarray
    profiles: list = field(default_factory=list)


@dataclass
class ComparisonReport:
    voltages: np.ndarray
    reference: str
    currents: dict
    rel_diff: dict
    profile_l2: dict  # (solver, station) -> (phi L2, n L2) arrays over voltages
    runtimes: dict

    def rows(self, runtimes=False):
        """Table of the report; runtimes are left out by default so the CSV
        is reproducible bit for bit (they go to the run manifest)."""
        header = ["voltage_V", "reference"]
        for s in self.currents:
            header.append(f"I_{s}")
        for s in self.rel_diff:
            header.append(f"reldiff_{s}")
        for (s, x) in self.profile_l2:
            header += [f"phiL2_{s}_x{x:g}", f"nL2_{s}_x{x:g}"]
        for s in self.runtimes if runtimes else ():
            header.append(f"runtime_{s}_s")
        out = [header]
        for k, v in enumerate(self.voltages):
            row = [v, self.reference]
            row += [self.currents[s][k] for s in self.currents]
            row += [self.rel_diff[s][k] for s in self.rel_diff]
            for pair in self.profile_l2.values():
                row += [pair[0][k], pair[1][k]]
            if runtimes:
                row += [self.runtimes[s][k] for s in self.runtimes]
            out.append(row)
        return out


def _relative_l2(a, b, w):
    """Relative L2 difference of ``a`` against ``b`` with radial weights ``w``."""
    norm = np.sqrt(np.sum(w * b**2))
    diff = np.sqrt(np.sum(w * (a - b) ** 2))
    return float(diff / norm) if norm > 0 else float(diff)


def compare(*reports: SolverReport) -> ComparisonReport:
    """Currents and station profiles of several solvers on one voltage grid.

    Differences are taken against pnp2d when it is present and against the
    first report otherwise.  Profiles are compared on the reference's radial
    nodes with the cross-section weight ``xi dxi``.

    Raises
    ------
    GridMismatch
        If the reports were computed on different voltages.
    """
    if not reports:
        raise ConfigError("nothing to compare")
    voltages = np.asarray(reports[0].voltages, dtype=float)
    for r in reports[1:]:
        if r.voltages.shape != voltages.shape or not np.array_equal(r.voltages, voltages):
            raise GridMismatch(f"{r.solver} voltages differ from {reports[0].solver}")
    by_name = {r.solver: r for r in reports}
    ref = by_name.get("pnp2d", reports[0])
    currents = {r.solver: np.asarray(r.current, dtype=float) for r in reports}
    rel = {}
    l2 = {}
    for r in reports:
        if r is ref:
            continue
        rel[r.solver] = np.abs(currents[r.solver] - currents[ref.solver]) / np.abs(currents[ref.solver])
        if not (r.profiles and ref.profiles):
            continue
        for x in ref.profiles[0]:
            phi_err = np.full(voltages.size, np.nan)
            n_err = np.full(voltages.size, np.nan)
            for k in range(voltages.size):
                xi_ref, phi_ref, n_ref = ref.profiles[k][x]
                xi, phi, n = r.profiles[k][x]
                w = box_weights(xi_ref)
                phi_err[k] = _relative_l2(np.interp(xi_ref, xi, phi), phi_ref, w)
                n_err[k] = _relative_l2(np.interp(xi_ref, xi, n), n_ref, w)
            l2[(r.solver, x)] = (phi_err, n_err)
    return ComparisonReport(
        voltages=voltages, reference=ref.solver, currents=currents, rel_diff=rel,
        profile_l2=l2, runtimes={r.solver: np.asarray(r.runtime_s, dtype=float) for r in reports},
    )


# ---------------------------------------------------------------------------
# solver drivers

def _radial_nodes(scenario, spec):
    return pnp2d.radial_nodes(spec.nr or PROFILE_CELLS, PROFILE_GRADING)


def _quasi1d_report(scenario, spec, keep=None):
    options = quasi1d.SolverOptions(g_oracle=spec.g_oracle)
    curve = quasi1d.iv_sweep(scenario, np.array(spec.voltages), options)
    n = len(spec.voltages)
    xi = _radial_nodes(scenario, spec)
    profiles = []
    for sol in curve.solutions:
        prof = {}
        if sol is not None and sol.converged:
            for x in stations_for(scenario):
                phi, dens, _ = quasi1d.cross_section(sol, x, xi)
                prof[x] = (xi, phi, dens)
        profiles.append(prof)
    if not curve.converged.all():
        bad = np.asarray(spec.voltages)[~curve.converged]
        raise NoConvergence(f"quasi1d did not converge at V = {bad.tolist()}")
    if keep is not None:
        keep["quasi1d"] = curve.solutions
    return SolverReport("quasi1d", np.array(spec.voltages), curve.current, curve.current_A,
                        curve.iterations, curve.residual, np.full(n, curve.elapsed_s / n), profiles)


def _area1d_report(scenario, spec, keep=None):
    scale = nondimensionalize(scenario).current_scale
    sols, times = [], []
    previous = None
    voltages = np.array(spec.voltages)
    order = np.argsort(np.abs(voltages), kind="stable")
    results = [None] * voltages.size
    for k in order:
        t = time.perf_counter()
        sol = area1d.solve_area_averaged(scenario, voltages[k], initial=previous)
        results[k] = (sol, time.perf_counter() - t)
        previous = sol
    xi = _radial_nodes(scenario, spec)
    profiles = []
    for sol, dt in results:
        sols.append(sol)
        times.append(dt)
        prof = {}
        for x in stations_for(scenario):
            phi = np.interp(x, sol.x, sol.phi)
            dens = np.interp(x, sol.x, sol.n)
            prof[x] = (xi, np.full_like(xi, phi), np.full_like(xi, dens))
        profiles.append(prof)
    if keep is not None:
        keep["area1d"] = sols
    current = np.array([s.current_I for s in sols])
    return SolverReport("area1d", voltages, current, current * scale,
                        np.array([s.iterations for s in sols]), np.array([s.residual for s in sols]),
                        np.array(times), profiles)


def _pnp2d_point(args):
    scenario, v, nx, nr = args
    mesh = pnp2d.default_mesh(scenario, nx=nx, nr=nr)
    return pnp2d.gummel_solve(mesh, scenario, v)


def _pnp2d_report(scenario, spec, keep=None):
    scale = nondimensionalize(scenario).current_scale
    jobs = [(scenario, v, spec.nx, spec.nr) for v in spec.voltages]
    workers = min(max_workers(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            fields = list(pool.map(_pnp2d_point, jobs))
    else:
        fields = [_pnp2d_point(j) for j in jobs]
    profiles = []
    for f in fields:
        prof = {}
        for x in stations_for(scenario):
            k = int(np.argmin(np.abs(f.mesh.x - x)))
            prof[x] = (f.mesh.xi, f.phi[k].copy(), f.n[k].copy())
        profiles.append(prof)
    if keep is not None:
        keep["pnp2d"] = fields
    current = np.array([f.current_I for f in fields])
    return SolverReport("pnp2d", np.array(spec.voltages), current, current * scale,
                        np.array([f.iterations for f in fields]), np.array([f.residual for f in fields]),
                        np.array([f.elapsed_s for f in fields]), profiles)


DRIVERS = {"quasi1d": _quasi1d_report, "area1d": _area1d_report, "pnp2d": _pnp2d_report}


# ---------------------------------------------------------------------------
# CSV output

def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def write_iv(path, report: SolverReport):
    write_csv(path, ["voltage_V", "current_dimensionless", "current_A", "iterations", "residual"],
              zip(report.voltages, report.current, report.current_A, report.iterations, report.residual))


def write_axial(path, sol: quasi1d.QuasiSolution):
    write_csv(path, ["x", "Q", "S", "g1", "g2", "lambda", "beta", "mu_e", "phi_tilde"],
              zip(sol.x, sol.Q, sol.S, sol.g1, sol.g2, sol.lam, sol.beta, sol.mu_e, sol.phi_tilde))


def write_area_axial(path, sol: area1d.AreaAveragedSolution):
    write_csv(path, ["x", "phi", "n", "p"], zip(sol.x, sol.phi, sol.n, sol.p))


def _long_rows(x, r, phi, n, p):
    nx, nr = phi.shape
    for i in range(nx):
        for j in range(nr):
            yield x[i], r[i, j], phi[i, j], n[i, j], p[i, j]


def write_fields(path, fields: quasi1d.ReconstructedFields):
    x = fields.x
    write_csv(path, ["x", "r", "phi", "n", "p"], _long_rows(x, fields.r, fields.phi, fields.n, fields.p))


def write_fields2d(path, f: pnp2d.Field2D):
    write_csv(path, ["x", "r", "phi", "n", "p"], _long_rows(f.mesh.x, f.mesh.r(), f.phi, f.n, f.p))


def write_current_profile(path, f: pnp2d.Field2D):
    write_csv(path, ["x", "I"], zip(f.x_faces, f.current_profile))


def write_report(path, report: ComparisonReport):
    rows = report.rows()
    write_csv(path, rows[0], rows[1:])


# ---------------------------------------------------------------------------
# run / manifest

def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def inputs_hash(scenario_text: str, spec: RunSpec) -> str:
    payload = json.dumps({"scenario": scenario_text, "spec": _spec_dict(spec)}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _spec_dict(spec: RunSpec):
    d = asdict(spec)
    d.pop("out")
    d["voltages"] = list(spec.voltages)
    return d


def execute(spec: RunSpec) -> dict:
    """Run the solvers of ``spec`` and write artifacts; returns the manifest.

    Errors propagate; :func:`run` maps them to exit codes.
    """
    scenario = scenarios.load(spec.scenario)
    out = Path(spec.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    scenario_text = scenarios.to_toml(scenario)
    written = []
    kept = {}
    reports = []
    for name in spec.solvers:
        logger.info("running %s on %s for %d voltage(s)", name, scenario.name, len(spec.voltages))
        report = DRIVERS[name](scenario, spec, kept)
        reports.append(report)
        single_solver = spec.iv_filename is not None and len(spec.solvers) == 1
        path = out / (spec.iv_filename if single_solver else f"iv_{name}.csv")
        write_iv(path, report)
        written.append(path)
    single = len(spec.voltages) == 1
    if single and "quasi1d" in kept:
        sol = kept["quasi1d"][0]
        write_axial(out / "axial.csv", sol)
        written.append(out / "axial.csv")
        if spec.fields:
            write_fields(out / "fields.csv", quasi1d.reconstruct_fields(sol, scenario))
            written.append(out / "fields.csv")
    if single and "area1d" in kept:
        write_area_axial(out / "axial_area1d.csv", kept["area1d"][0])
        written.append(out / "axial_area1d.csv")
    if single and "pnp2d" in kept:
        f = kept["pnp2d"][0]
        write_fields2d(out / "fields2d.csv", f)
        write_current_profile(out / "current_profile.csv", f)
        written += [out / "fields2d.csv", out / "current_profile.csv"]
    if len(reports) > 1:
        write_report(out / "report.csv", compare(*reports))
        written.append(out / "report.csv")
    runtimes = {r.solver: [float(t) for t in r.runtime_s] for r in reports}
    manifest = {
        "package_version": __version__,
        "scenario": scenario_text,
        "spec": _spec_dict(spec),
        "inputs_hash": inputs_hash(scenario_text, spec),
        "tolerances": {
            "quasi1d_fixed_point": quasi1d.SolverOptions().tol,
            "area1d_gummel": area1d.GummelOptions().tol,
            "pnp2d_gummel": 1e-7,
        },
        "artifacts": {p.name: _sha256(p) for p in written},
        "runtimes_s": runtimes,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def run(spec: RunSpec) -> int:
    """Execute ``spec``; exit status 0 on success, 1 on configuration errors
    and 2 when a solver fails to converge."""
    try:
        execute(spec)
    except NoConvergence as exc:
        logger.error("solver did not converge: %s", exc)
        return 2
    except (NanoPNPError, OSError) as exc:
        logger.error("configuration error: %s", exc)
        return 1
    return 0


def rerun(manifest_path, out) -> int:
    """Replay a manifest into ``out``; the artifacts match bit for bit."""
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        scenario_path = out / "scenario.toml"
        scenario_path.write_text(manifest["scenario"], encoding="utf-8")
        spec_fields = dict(manifest["spec"])
        spec_fields["scenario"] = str(scenario_path)
        spec = RunSpec(out=str(out), **spec_fields)
    except (OSError, KeyError, TypeError, ValueError) as exc:
        logger.error("cannot replay manifest %s: %s", manifest_path, exc)
        return 1
    return run(spec)
