"""Built-in pore scenarios and the TOML scenario file format.

Scenario files use lengths in nm, concentrations in mol/L, voltages in V and
surface charges in e/nm^2; see ``docs/scenario_format.md``.
"""

from __future__ import annotations

import sys

from .errors import ConfigError, NanoPNPError
from .model import (
    ELEMENTARY_CHARGE,
    MOLAR,
    NANOMETER,
    BoundaryConditions,
    Electrolyte,
    PhysicalConstants,
    PoreGeometry,
    PoreScenario,
    ProfileKind,
    SurfaceChargeProfile,
)

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

E_PER_NM2 = ELEMENTARY_CHARGE / NANOMETER**2


def _baths(conc_molar, v=0.0):
    c = conc_molar * MOLAR
    return BoundaryConditions(v, c, c, c, c)


def trumpet(sigma=1.0, v=0.0) -> PoreScenario:
    """1000 nm hourglass pore, radius 10 nm at the mouths and 1.5 nm at the
    centre, charged on its central 800 nm, 0.1 M baths."""
    return PoreScenario(
        geometry=PoreGeometry.trumpet(1000.0),
        surface_charge=SurfaceChargeProfile.uniform_between(sigma, 100.0, 900.0, 1000.0),
        bc=_baths(0.1, v),
        name="trumpet" if sigma == 1.0 else f"trumpet_sigma{sigma:g}",
    )


def conical(sigma=1.0, v=0.0) -> PoreScenario:
    """10 um cone (1.5 nm tip on the left, 10 nm base) between two 5 um baths."""
    geom = PoreGeometry.conical(10000.0, 1.5, 10.0, bath_length_nm=5000.0)
    return PoreScenario(
        geometry=geom,
        surface_charge=SurfaceChargeProfile.uniform_between(sigma, 5000.0, 15000.0, 20000.0),
        bc=_baths(0.1, v),
        name="conical",
    )


def cylinder_charged(sigma=1.0, v=0.0) -> PoreScenario:
    """1000 nm long, 5 nm radius cylinder charged on its central 600 nm."""
    return PoreScenario(
        geometry=PoreGeometry.cylinder(1000.0, 5.0),
        surface_charge=SurfaceChargeProfile.uniform_between(sigma, 200.0, 800.0, 1000.0),
        bc=_baths(0.1, v),
        name="cylinder_charged",
    )


def cylinder_uncharged(v=0.0) -> PoreScenario:
    return PoreScenario(
        geometry=PoreGeometry.cylinder(1000.0, 5.0),
        surface_charge=SurfaceChargeProfile(0.0, (0.0, 0.0)),
        bc=_baths(0.1, v),
        name="cylinder_uncharged",
    )


BUILTIN = {
    "trumpet": trumpet,
    "trumpet_sigma02": lambda: trumpet(sigma=0.2),
    "conical": conical,
    "cylinder_charged": cylinder_charged,
    "cylinder_uncharged": cylinder_uncharged,
}


def builtin(name: str) -> PoreScenario:
    try:
        scenario = BUILTIN[name]()
    except KeyError:
        raise ConfigError(f"unknown built-in scenario {name!r}; choose from {sorted(BUILTIN)}") from None
    return scenario


# ---------------------------------------------------------------------------
# TOML round trip

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    return repr(float(value))


def _nm(length_m) -> float:
    """Metres to nm, dropping the last-digit noise of the unit conversion."""
    return float(f"{length_m / NANOMETER:.12g}")


def to_toml(scenario: PoreScenario) -> str:
    c, el, g = scenario.constants, scenario.electrolyte, scenario.geometry
    sc, bc = scenario.surface_charge, scenario.bc
    L_nm = _nm(g.length_L)
    sections = {
        "scenario": {"name": scenario.name},
        "constants": {
            "boltzmann_k": c.boltzmann_k,
            "temperature": c.temperature,
            "vacuum_permittivity": c.vacuum_permittivity,
            "relative_permittivity": c.relative_permittivity,
            "elementary_charge": c.elementary_charge,
            "faraday": c.faraday,
            "thermal_voltage": c.thermal_voltage,
        },
        "electrolyte": {
            "diff_p": el.diff_p,
            "diff_n": el.diff_n,
            "diff_ref": el.diff_ref,
            "conc_scale": el.conc_scale_cbar / MOLAR,
            "surface_charge_scale": el.surface_charge_scale_sigmabar / E_PER_NM2,
        },
        "geometry": {
            "kind": g.profile_kind.value,
            "length": L_nm,
            "radius_scale": _nm(g.radius_scale_R0),
            "bath_length": _nm(g.bath_length),
            "bath_radius_factor": g.bath_radius_factor,
        },
        "surface_charge": {
            "value": sc.value,
            "start": float(f"{sc.support[0] * L_nm:.12g}"),
            "end": float(f"{sc.support[1] * L_nm:.12g}"),
        },
        "boundary": {
            "voltage": bc.v_applied,
            "conc_left_n": bc.conc_left_n / MOLAR,
            "conc_left_p": bc.conc_left_p / MOLAR,
            "conc_right_n": bc.conc_right_n / MOLAR,
            "conc_right_p": bc.conc_right_p / MOLAR,
        },
    }
    if g.profile_kind is ProfileKind.PIECEWISE:
        sections["geometry"]["table"] = [list(row) for row in g.table]
    else:
        sections["geometry"]["params"] = list(g.params)
    if scenario.upsilon_override is not None:
        sections["scenario"]["upsilon_override"] = scenario.upsilon_override
    lines = []
    for name, body in sections.items():
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {_fmt(v)}" for k, v in body.items())
        lines.append("")
    return "\n".join(lines)


def from_toml(text: str) -> PoreScenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid scenario file: {exc}") from exc
    try:
        meta = doc.get("scenario", {})
        constants = PhysicalConstants(**doc.get("constants", {}))
        e = doc.get("electrolyte", {})
        electrolyte = Electrolyte(
            diff_p=e.get("diff_p", 1.33e-9),
            diff_n=e.get("diff_n", 0.79e-9),
            diff_ref=e.get("diff_ref", 1e-9),
            conc_scale_cbar=e.get("conc_scale", 1.0) * MOLAR,
            surface_charge_scale_sigmabar=e.get("surface_charge_scale", 1.0) * E_PER_NM2,
        )
        g = doc["geometry"]
        L = float(g["length"])
        geometry = PoreGeometry(
            length_L=L * NANOMETER,
            radius_scale_R0=g.get("radius_scale", 1.0) * NANOMETER,
            profile_kind=ProfileKind(g["kind"]),
            params=tuple(g.get("params", ())),
            table=tuple(tuple(r) for r in g.get("table", ())),
            bath_length=g.get("bath_length", 0.0) * NANOMETER,
            bath_radius_factor=g.get("bath_radius_factor", 5.0),
        )
        s = doc.get("surface_charge", {})
        charge = SurfaceChargeProfile(
            s.get("value", 0.0), (s.get("start", 0.0) / L, s.get("end", 0.0) / L)
        )
        b = doc.get("boundary", {})
        bc = BoundaryConditions(
            v_applied=b.get("voltage", 0.0),
            conc_left_n=b.get("conc_left_n", 0.1) * MOLAR,
            conc_left_p=b.get("conc_left_p", 0.1) * MOLAR,
            conc_right_n=b.get("conc_right_n", 0.1) * MOLAR,
            conc_right_p=b.get("conc_right_p", 0.1) * MOLAR,
        )
        return PoreScenario(constants, electrolyte, geometry, charge, bc,
                            name=meta.get("name", ""),
                            upsilon_override=meta.get("upsilon_override"))
    except NanoPNPError as exc:
        raise ConfigError(str(exc)) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario file: {exc!r}") from exc


def load(path_or_name) -> PoreScenario:
    """Load a scenario from a TOML file, or a built-in by name."""
    name = str(path_or_name)
    if name in BUILTIN:
        return builtin(name)
    try:
        with open(name, "rb") as fh:
            text = fh.read().decode("utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {name!r}: {exc}") from exc
    return from_toml(text)


def dump(scenario: PoreScenario, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(to_toml(scenario))
