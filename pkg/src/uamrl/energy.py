"""Rotorcraft power and battery model for the Joby-S4-class aircraft.

All power math is done in SI units (W, J, s, m, kg); battery state is
exposed in kWh at the interface (1 kWh = 3.6e6 J). The tabulated aircraft
constants are authoritative: the closed-form relations between them
(disc area from radius, solidity from blade count, ...) are used only by
`validate_spec` as a consistency report, never to overwrite a field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

KWH_TO_J = 3.6e6

#: Seconds of hover power spent on one vertical transition (0 m <-> 600 m).
#: The reference aircraft climbs to cruise altitude in about half a minute;
#: a transition always completes within a single simulation step.
CLIMB_TIME_S = 30.0

#: Cruise altitude in meters.
CRUISE_ALTITUDE_M = 600.0


class InvalidSpecError(ValueError):
    """A physical parameter is outside its valid domain."""


@dataclass(frozen=True)
class AircraftSpec:
    """Physical constants of the aircraft. Defaults are the S4 values."""

    max_passengers: int = 4
    cruise_speed: float = 73.762        # m/s
    mass: float = 1815.0                # kg, incl. battery and propellers
    weight: float = 17799.0             # N
    rotor_radius: float = 1.45          # m
    disc_area: float = 6.61             # m^2
    blade_count: int = 5
    rotor_solidity: float = 0.2449
    blade_angular_velocity: float = 78.0   # rad/s
    tip_speed: float = 112.776             # m/s
    air_density: float = 1.225             # kg/m^3
    fuselage_drag_ratio: float = 0.01
    mean_induced_velocity: float = 26.45   # m/s, hover
    profile_drag_coeff: float = 0.045
    induced_power_factor: float = 0.052

    def __post_init__(self):
        if self.max_passengers < 1:
            raise InvalidSpecError("max_passengers must be >= 1")
        for f in fields(self):
            value = getattr(self, f.name)
            if not value > 0:
                raise InvalidSpecError(f"{f.name} must be strictly positive, got {value}")


@dataclass(frozen=True)
class BatterySpec:
    """Battery constants. Defaults are the S4 pack values."""

    capacity_kwh: float = 150.0
    charge_per_journey_kwh: float = 30.0
    charge_time_per_journey_min: float = 5.0
    charger_power_kw: float = 360.0
    c_rate_per_hour: float = 2.4
    soc_full_time_min: float = 25.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not value > 0:
                raise InvalidSpecError(f"{f.name} must be strictly positive, got {value}")
        # charger power x per-journey charge time must equal the per-journey charge
        energy = self.charger_power_kw * self.charge_time_per_journey_min / 60.0
        if not math.isclose(energy, self.charge_per_journey_kwh, rel_tol=1e-9):
            raise InvalidSpecError(
                f"charger_power x charge_time = {energy} kWh, "
                f"inconsistent with charge_per_journey = {self.charge_per_journey_kwh} kWh"
            )
        if not math.isclose(self.charge_per_journey_kwh / self.capacity_kwh, 0.20, rel_tol=1e-9):
            raise InvalidSpecError("charge_per_journey must be 20% of capacity")


@dataclass(frozen=True)
class EnergyState:
    """Remaining battery charge in kWh."""

    kwh: float


def hover_power(spec: AircraftSpec) -> tuple[float, float, float]:
    """Hover power in watts, returned as (P_h, P_0, P_i).

    P_0 is the blade-profile term (C_d/8) rho s A Omega^3 R^3 and P_i the
    induced term (1+k) W^1.5 / sqrt(2 rho A); P_h = P_0 + P_i exactly.
    """
    p0 = (spec.profile_drag_coeff / 8.0) * spec.air_density * spec.rotor_solidity \
        * spec.disc_area * spec.blade_angular_velocity ** 3 * spec.rotor_radius ** 3
    pi = (1.0 + spec.induced_power_factor) * spec.weight ** 1.5 \
        / math.sqrt(2.0 * spec.air_density * spec.disc_area)
    return p0 + pi, p0, pi


def cruise_power(spec: AircraftSpec, v: float) -> tuple[float, float, float, float]:
    """Forward-flight power at speed v, as (P_p, induced, profile, parasite).

    The induced term decays with speed, the blade-profile term grows with
    the tip-speed ratio, and the parasite term grows with v^3.
    """
    if v < 0:
        raise ValueError(f"speed must be non-negative, got {v}")
    _, p0, pi = hover_power(spec)
    v0 = spec.mean_induced_velocity
    induced = pi * (math.sqrt(1.0 + v ** 4 / (4.0 * v0 ** 4)) - v ** 2 / (2.0 * v0 ** 2)) ** 0.5
    profile = p0 * (1.0 + 3.0 * v ** 2 / spec.tip_speed ** 2)
    parasite = 0.5 * spec.fuselage_drag_ratio * spec.air_density * spec.rotor_solidity \
        * spec.disc_area * v ** 3
    return induced + profile + parasite, induced, profile, parasite


def step_energy(
    energy: EnergyState,
    horizontal_displacement_m: float,
    vertical_transition: bool,
    dt_s: float,
    spec: AircraftSpec,
    battery: BatterySpec,
) -> EnergyState:
    """Discharge for one simulation step; result clamped at an empty battery.

    Horizontal flight costs cruise power scaled by (|d| / v dt)^2 over the
    step; a vertical transition costs CLIMB_TIME_S of hover power. The two
    are mutually exclusive by the action model. Clamping at zero is not an
    error: a drained aircraft is grounded by the environment, not here.
    """
    full = spec.cruise_speed * dt_s
    if horizontal_displacement_m > full * (1.0 + 1e-9):
        raise ValueError(
            f"displacement {horizontal_displacement_m} m exceeds v*dt = {full} m"
        )
    if vertical_transition and horizontal_displacement_m > 0:
        raise ValueError("horizontal and vertical motion are mutually exclusive")
    joules = 0.0
    if horizontal_displacement_m > 0:
        p_p, _, _, _ = cruise_power(spec, spec.cruise_speed)
        joules += p_p * (horizontal_displacement_m / full) ** 2 * dt_s
    if vertical_transition:
        p_h, _, _ = hover_power(spec)
        joules += p_h * CLIMB_TIME_S
    return EnergyState(max(energy.kwh - joules / KWH_TO_J, 0.0))


def charge(energy: EnergyState, grounded_duration_s: float, battery: BatterySpec) -> EnergyState:
    """Linear charging at charger power, clamped at capacity."""
    if grounded_duration_s < 0:
        raise ValueError("duration must be non-negative")
    gained = battery.charger_power_kw * grounded_duration_s / 3600.0
    return EnergyState(min(energy.kwh + gained, battery.capacity_kwh))


@dataclass(frozen=True)
class SpecDiagnostics:
    """Report comparing stored constants against their defining formulas."""

    stored: dict = field(default_factory=dict)       # field -> tabulated value
    recomputed: dict = field(default_factory=dict)   # field -> formula value
    deviation: dict = field(default_factory=dict)    # field -> |recomputed-stored|/stored
    flagged: tuple = ()                              # fields past the flag threshold

    def format(self) -> str:
        names = {
            "disc_area": "disc area (pi R^2)",
            "rotor_solidity": "solidity (0.2231 b / pi R)",
            "fuselage_drag_ratio": "drag ratio (0.0151 / s A)",
            "tip_speed": "tip speed (Omega R^2)",
            "mean_induced_velocity": "induced vel (sqrt(W/(s rho A)))",
        }
        lines = [f"{'derived field':<34} {'stored':<12} {'recomputed':<12} rel.dev"]
        for key, recomputed in self.recomputed.items():
            mark = "  <- KNOWN DISCREPANCY, stored value wins" if key in self.flagged else ""
            lines.append(
                f"{names[key]:<34} {self.stored[key]:<12g} {recomputed:<12.6g} "
                f"{self.deviation[key]:.4%}{mark}"
            )
        return "\n".join(lines)


#: Relative deviation above which a derived field is flagged as inconsistent
#: with its defining formula.
FLAG_THRESHOLD = 0.05


def validate_spec(spec: AircraftSpec) -> SpecDiagnostics:
    """Recompute the derived rows of the aircraft table and report deviations.

    Never mutates the spec; the stored values stay authoritative. The tip
    speed and hover induced velocity are known not to satisfy their printed
    formulas for the default constants and come back flagged.
    """
    recomputed = {
        "disc_area": math.pi * spec.rotor_radius ** 2,
        "rotor_solidity": 0.2231 * spec.blade_count / (math.pi * spec.rotor_radius),
        "fuselage_drag_ratio": 0.0151 / (spec.rotor_solidity * spec.disc_area),
        "tip_speed": spec.blade_angular_velocity * spec.rotor_radius ** 2,
        "mean_induced_velocity": math.sqrt(
            spec.weight / (spec.rotor_solidity * spec.air_density * spec.disc_area)
        ),
    }
    stored = {
        "disc_area": spec.disc_area,
        "rotor_solidity": spec.rotor_solidity,
        "fuselage_drag_ratio": spec.fuselage_drag_ratio,
        "tip_speed": spec.tip_speed,
        "mean_induced_velocity": spec.mean_induced_velocity,
    }
    deviation = {k: abs(recomputed[k] - stored[k]) / abs(stored[k]) for k in recomputed}
    flagged = tuple(k for k, d in deviation.items() if d > FLAG_THRESHOLD)
    return SpecDiagnostics(
        stored=stored, recomputed=recomputed, deviation=deviation, flagged=flagged
    )
