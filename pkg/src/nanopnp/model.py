"""Physical constants, pore scenarios and the dimensionless parameter groups.

All solvers work on a normalized axial coordinate ``x`` in [0, 1] (units of the
domain length ``L``) and measure radii in units of ``R0``.  Concentrations are
scaled by ``cbar``, potentials by the thermal voltage and surface charge by
``sigmabar``.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NonPositiveConcentration, NonPositiveInput, OutOfDomain

logger = logging.getLogger(__name__)

NANOMETER = 1e-9
MOLAR = 1000.0  # mol/m^3 in one mol/L
ELEMENTARY_CHARGE = 1.602176e-19


def _require_positive(**values):
    for name, value in values.items():
        if not (value > 0 and math.isfinite(value)):
            raise NonPositiveInput(f"{name} must be strictly positive, got {value!r}")


@dataclass(frozen=True)
class PhysicalConstants:
    """Constants in SI units; defaults follow the reference parameter table.

    ``thermal_voltage`` is the configured value used by every solver.  The
    exact ratio k*T/e is available as :attr:`kT_over_e` (about 0.02585 V at
    300 K, against the rounded 0.025 V of the defaults).
    """

    boltzmann_k: float = 1.3806504e-23
    temperature: float = 300.0
    vacuum_permittivity: float = 8.854187817e-12
    relative_permittivity: float = 78.4
    elementary_charge: float = ELEMENTARY_CHARGE
    faraday: float = 96485.33212
    thermal_voltage: float = 0.025

    def __post_init__(self):
        _require_positive(
            boltzmann_k=self.boltzmann_k,
            temperature=self.temperature,
            vacuum_permittivity=self.vacuum_permittivity,
            relative_permittivity=self.relative_permittivity,
            elementary_charge=self.elementary_charge,
            faraday=self.faraday,
            thermal_voltage=self.thermal_voltage,
        )

    @property
    def permittivity(self) -> float:
        return self.vacuum_permittivity * self.relative_permittivity

    @property
    def kT_over_e(self) -> float:
        return self.boltzmann_k * self.temperature / self.elementary_charge


@dataclass(frozen=True)
class Electrolyte:
    """Ionic diffusivities (m^2/s) and the concentration / charge scales.

    ``conc_scale_cbar`` is in mol/m^3 and ``surface_charge_scale_sigmabar``
    in C/m^2.
    """

    diff_p: float = 1.33e-9
    diff_n: float = 0.79e-9
    diff_ref: float = 1e-9
    conc_scale_cbar: float = 1.0 * MOLAR
    surface_charge_scale_sigmabar: float = ELEMENTARY_CHARGE / NANOMETER**2

    def __post_init__(self):
        _require_positive(
            diff_p=self.diff_p,
            diff_n=self.diff_n,
            diff_ref=self.diff_ref,
            conc_scale_cbar=self.conc_scale_cbar,
            surface_charge_scale_sigmabar=self.surface_charge_scale_sigmabar,
        )

    @property
    def kappa_p(self) -> float:
        return self.diff_p / self.diff_ref

    @property
    def kappa_n(self) -> float:
        return self.diff_n / self.diff_ref


class ProfileKind(str, enum.Enum):
    TRUMPET = "trumpet"
    CONICAL = "conical"
    CYLINDRICAL = "cylindrical"
    PIECEWISE = "piecewise"


@dataclass(frozen=True)
class PoreGeometry:
    """Axisymmetric pore, optionally flanked by two straight bath sections.

    The pore proper occupies ``bath_length <= x* <= length_L - bath_length``.
    Inside it the radius follows ``profile_kind`` evaluated on the pore
    coordinate ``s`` in [0, 1]:

    * trumpet: ``R[nm] = a*s**2 + b*s + c`` with ``params = (a, b, c)``
    * conical: linear from ``params[0]`` (left mouth) to ``params[1]``
    * cylindrical: constant ``params[0]``
    * piecewise: linear interpolation of ``table`` = ((s, R[nm]), ...)

    In a bath the radius widens linearly from the adjacent pore mouth to
    ``bath_radius_factor`` times that mouth radius at the domain end.
    """

    length_L: float
    radius_scale_R0: float
    profile_kind: ProfileKind
    params: tuple = ()
    table: tuple = ()
    bath_length: float = 0.0
    bath_radius_factor: float = 5.0

    def __post_init__(self):
        _require_positive(length_L=self.length_L, radius_scale_R0=self.radius_scale_R0)
        object.__setattr__(self, "profile_kind", ProfileKind(self.profile_kind))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(
            self, "table", tuple((float(s), float(r)) for s, r in self.table)
        )
        if not 0 <= 2 * self.bath_length < self.length_L:
            raise NonPositiveInput("bath sections leave no room for the pore")
        _require_positive(bath_radius_factor=self.bath_radius_factor)
        kind = self.profile_kind
        expected = {ProfileKind.TRUMPET: 3, ProfileKind.CONICAL: 2, ProfileKind.CYLINDRICAL: 1}
        if kind in expected and len(self.params) != expected[kind]:
            raise NonPositiveInput(f"{kind.value} profile needs {expected[kind]} parameters")
        if kind is ProfileKind.PIECEWISE:
            s = np.array([p[0] for p in self.table])
            if len(s) < 2 or np.any(np.diff(s) <= 0) or s[0] != 0.0 or s[-1] != 1.0:
                raise NonPositiveInput(
                    "piecewise table needs strictly increasing samples spanning [0, 1]"
                )
        probe = self._pore_radius_nm(np.linspace(0.0, 1.0, 1001))
        if np.any(probe <= 0):
            raise NonPositiveInput("pore radius must stay positive on [0, 1]")

    # constructors -----------------------------------------------------------
    @classmethod
    def trumpet(cls, length_nm=1000.0, coefficients_nm=(34.0, -34.0, 10.0), r0_nm=1.0, **kw):
        return cls(length_nm * NANOMETER, r0_nm * NANOMETER, ProfileKind.TRUMPET,
                   params=coefficients_nm, **kw)

    @classmethod
    def conical(cls, length_nm, tip_nm, base_nm, r0_nm=1.0, bath_length_nm=0.0, **kw):
        return cls((length_nm + 2 * bath_length_nm) * NANOMETER, r0_nm * NANOMETER,
                   ProfileKind.CONICAL, params=(tip_nm, base_nm),
                   bath_length=bath_length_nm * NANOMETER, **kw)

    @classmethod
    def cylinder(cls, length_nm, radius_nm, r0_nm=1.0, **kw):
        return cls(length_nm * NANOMETER, r0_nm * NANOMETER, ProfileKind.CYLINDRICAL,
                   params=(radius_nm,), **kw)

    @classmethod
    def piecewise(cls, length_nm, table_nm, r0_nm=1.0, **kw):
        return cls(length_nm * NANOMETER, r0_nm * NANOMETER, ProfileKind.PIECEWISE,
                   table=table_nm, **kw)

    # evaluation -------------------------------------------------------------
    @property
    def pore_interval(self):
        """Normalized (start, end) of the pore section."""
        b = self.bath_length / self.length_L
        return b, 1.0 - b

    def _pore_radius_nm(self, s):
        kind = self.profile_kind
        if kind is ProfileKind.TRUMPET:
            a, b, c = self.params
            return a * s**2 + b * s + c
        if kind is ProfileKind.CONICAL:
            tip, base = self.params
            return tip + (base - tip) * s
        if kind is ProfileKind.CYLINDRICAL:
            return np.full_like(s, self.params[0])
        xs, rs = zip(*self.table)
        return np.interp(s, xs, rs)

    def _pore_slope_nm(self, s):
        kind = self.profile_kind
        if kind is ProfileKind.TRUMPET:
            a, b, _ = self.params
            return 2 * a * s + b
        if kind is ProfileKind.CONICAL:
            return np.full_like(s, self.params[1] - self.params[0])
        if kind is ProfileKind.CYLINDRICAL:
            return np.zeros_like(s)
        xs, rs = (np.array(v) for v in zip(*self.table))
        k = np.clip(np.searchsorted(xs, s, side="right") - 1, 0, len(xs) - 2)
        return (rs[k + 1] - rs[k]) / (xs[k + 1] - xs[k])

    def _sections(self, x):
        x0, x1 = self.pore_interval
        width = x1 - x0
        s = np.clip((x - x0) / width, 0.0, 1.0)
        return x0, x1, width, s

    def radius_nm(self, x):
        x = _check_unit_interval(x)
        x0, x1, _, s = self._sections(x)
        r = self._pore_radius_nm(s)
        if self.bath_length > 0:
            f = self.bath_radius_factor
            left_mouth = self._pore_radius_nm(np.array(0.0))
            right_mouth = self._pore_radius_nm(np.array(1.0))
            left = left_mouth * (f + (1 - f) * x / x0)
            right = right_mouth * (1 + (f - 1) * (x - x1) / (1 - x1))
            r = np.where(x < x0, left, np.where(x > x1, right, r))
        return r

    def radius(self, x):
        """Dimensionless radius R(x) in units of R0."""
        return self.radius_nm(x) * NANOMETER / self.radius_scale_R0

    def slope(self, x):
        """dR/dx in units of R0 per unit normalized length."""
        x = _check_unit_interval(x)
        x0, x1, width, s = self._sections(x)
        d = self._pore_slope_nm(s) / width
        if self.bath_length > 0:
            f = self.bath_radius_factor
            left_mouth = self._pore_radius_nm(np.array(0.0))
            right_mouth = self._pore_radius_nm(np.array(1.0))
            d = np.where(x < x0, left_mouth * (1 - f) / x0,
                         np.where(x > x1, right_mouth * (f - 1) / (1 - x1), d))
        return d * NANOMETER / self.radius_scale_R0

    def area(self, x):
        return np.pi * self.radius(x) ** 2


def _check_unit_interval(x):
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)) or np.any(~np.isfinite(x)):
        raise OutOfDomain("axial coordinate must lie in [0, 1]")
    return x


def eval_radius(geometry: PoreGeometry, x):
    """Dimensionless radius of ``geometry`` at normalized position(s) ``x``."""
    return geometry.radius(x)


@dataclass(frozen=True)
class SurfaceChargeProfile:
    """Piecewise constant wall charge ``value`` (units of sigmabar) on the open
    interval ``support`` = (start, end) of the normalized axis, zero elsewhere."""

    value: float = 0.0
    support: tuple = (0.0, 0.0)

    def __post_init__(self):
        a, b = (float(v) for v in self.support)
        object.__setattr__(self, "support", (a, b))
        if not (0 <= a <= b <= 1) or not math.isfinite(self.value):
            raise OutOfDomain("surface charge support must be a sub-interval of [0, 1]")

    @classmethod
    def uniform_between(cls, value, start_nm, end_nm, length_nm):
        return cls(value, (start_nm / length_nm, end_nm / length_nm))

    def sigma(self, x):
        x = _check_unit_interval(x)
        a, b = self.support
        return np.where((x > a) & (x < b), self.value, 0.0)

    def mean_over(self, lo, hi):
        """Average of sigma over [lo, hi] (point value where lo == hi)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        a, b = self.support
        overlap = np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)
        width = hi - lo
        with np.errstate(invalid="ignore", divide="ignore"):
            avg = np.where(width > 0, self.value * overlap / np.where(width > 0, width, 1.0), 0.0)
        point = self.sigma(np.clip(lo, 0, 1))
        return np.where(width > 0, avg, point)

    def nodal(self, x_nodes):
        """Average of sigma over the dual cell of each node of a 1D grid."""
        x = np.asarray(x_nodes, dtype=float)
        mid = 0.5 * (x[1:] + x[:-1])
        lo = np.concatenate(([x[0]], mid))
        hi = np.concatenate((mid, [x[-1]]))
        return self.mean_over(lo, hi)


@dataclass(frozen=True)
class BoundaryConditions:
    """Applied voltage (V, right electrode against grounded left) and bath
    concentrations (mol/m^3)."""

    v_applied: float = 0.0
    conc_left_n: float = 0.1 * MOLAR
    conc_left_p: float = 0.1 * MOLAR
    conc_right_n: float = 0.1 * MOLAR
    conc_right_p: float = 0.1 * MOLAR

    def __post_init__(self):
        _require_positive(
            conc_left_n=self.conc_left_n,
            conc_left_p=self.conc_left_p,
            conc_right_n=self.conc_right_n,
            conc_right_p=self.conc_right_p,
        )
        if not math.isfinite(self.v_applied):
            raise NonPositiveInput("applied voltage must be finite")

    @property
    def electroneutral_baths(self) -> bool:
        return self.conc_left_n == self.conc_left_p and self.conc_right_n == self.conc_right_p

    @property
    def symmetric_baths(self) -> bool:
        return (self.electroneutral_baths and self.conc_left_n == self.conc_right_n)


@dataclass(frozen=True)
class DimensionlessParams:
    delta: float
    Lambda: float
    Upsilon: float
    kappa_p: float
    kappa_n: float
    debye_length_LD: float
    thermal_voltage: float
    conc_scale: float
    current_scale: float

    @property
    def axial_screening(self) -> float:
        """(delta * Lambda)**2, the axial Debye number of the averaged model."""
        return (self.delta * self.Lambda) ** 2


@dataclass(frozen=True)
class PoreScenario:
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    electrolyte: Electrolyte = field(default_factory=Electrolyte)
    geometry: PoreGeometry = None
    surface_charge: SurfaceChargeProfile = field(default_factory=SurfaceChargeProfile)
    bc: BoundaryConditions = field(default_factory=BoundaryConditions)
    name: str = ""
    upsilon_override: float | None = None

    def __post_init__(self):
        if self.geometry is None:
            raise NonPositiveInput("a scenario needs a geometry")

    def with_voltage(self, v_applied: float) -> "PoreScenario":
        return replace(self, bc=replace(self.bc, v_applied=float(v_applied)))

    def with_surface_charge(self, value: float) -> "PoreScenario":
        return replace(self, surface_charge=replace(self.surface_charge, value=float(value)))


def debye_length(constants: PhysicalConstants, conc_mol_m3: float) -> float:
    """sqrt(eps * V_T / (c * F)), the screening length used throughout."""
    _require_positive(conc=conc_mol_m3)
    return math.sqrt(constants.permittivity * constants.thermal_voltage / (conc_mol_m3 * constants.faraday))


def nondimensionalize(scenario: PoreScenario) -> DimensionlessParams:
    c = scenario.constants
    el = scenario.electrolyte
    g = scenario.geometry
    R0, L = g.radius_scale_R0, g.length_L
    _require_positive(R0=R0, L=L)
    ld = debye_length(c, el.conc_scale_cbar)
    upsilon = R0 * el.surface_charge_scale_sigmabar / (c.permittivity * c.thermal_voltage)
    if scenario.upsilon_override is not None:
        override = float(scenario.upsilon_override)
        if abs(override - upsilon) > 0.01 * abs(upsilon):
            warnings.warn(
                f"Upsilon override {override:g} differs from the value {upsilon:g} implied "
                "by R0, sigmabar, eps and V_T",
                stacklevel=2,
            )
        upsilon = override
    current_scale = c.faraday * el.diff_ref * el.conc_scale_cbar * R0**2 / L
    return DimensionlessParams(
        delta=R0 / L,
        Lambda=ld / R0,
        Upsilon=upsilon,
        kappa_p=el.kappa_p,
        kappa_n=el.kappa_n,
        debye_length_LD=ld,
        thermal_voltage=c.thermal_voltage,
        conc_scale=el.conc_scale_cbar,
        current_scale=current_scale,
    )


def local_beta_lambda(params: DimensionlessParams, geometry: PoreGeometry,
                      surface_charge: SurfaceChargeProfile, x, qs_product, sigma=None):
    """Local wall-charge parameter beta and Debye ratio lambda.

    ``sigma`` may be passed to use pre-averaged nodal charges instead of point
    values of ``surface_charge``.
    """
    qs = np.asarray(qs_product, dtype=float)
    if np.any(~(qs > 0)):
        raise NonPositiveConcentration("Q*S must be positive")
    R = geometry.radius(x)
    if sigma is None:
        sigma = surface_charge.sigma(x)
    beta = params.Upsilon * np.asarray(sigma) * R
    lam = params.Lambda / (R * qs**0.25)
    return lam, beta
