"""Voltage -> resonance-shift mapping for the two Stark-sign groups.

The permanent-dipole difference of the ion projects onto the applied field
with two signs of equal magnitude, so a single signed waveform describes
both groups: the positive group is shifted by +ds, the negative group by
-ds.  Spatial inhomogeneity of the electrode field enters as a small
relative deviation epsilon(z).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, OutOfRangeError

__all__ = [
    "DipoleGeometry",
    "FieldProfile",
    "StarkDrive",
    "effective_coefficient",
    "shift_at",
    "step_drive",
    "quadratic_bump_profile",
    "load_field_profile_csv",
]


@dataclass(frozen=True)
class DipoleGeometry:
    """Magnitude and orientation of the permanent-dipole difference.

    mu_over_hbar_khz_per_v_cm: |d_mu|/hbar in kHz per (V/cm); the literature
    value for this transition is 111.6.  theta_deg is the angle between the
    dipole difference and the applied field axis (12.4 deg here, identical
    for all four dipole orientations, which is what collapses them into two
    signed groups).
    """

    mu_over_hbar_khz_per_v_cm: float = 111.6
    theta_deg: float = 12.4

    def __post_init__(self):
        if self.mu_over_hbar_khz_per_v_cm <= 0:
            raise InvalidParameterError("dipole magnitude must be positive")
        if not 0 <= self.theta_deg < 90:
            raise InvalidParameterError("theta must lie in [0, 90) degrees")


def effective_coefficient(geom: DipoleGeometry) -> float:
    """Signed-group Stark coefficient in MHz per (V/mm).

    cos-projection of the dipole magnitude onto the field axis.
    1 V/mm = 10 V/cm and 1 MHz = 1000 kHz, so the conversion factor from
    kHz/(V/cm) is 1/100.
    """
    khz_per_v_cm = geom.mu_over_hbar_khz_per_v_cm * np.cos(np.deg2rad(geom.theta_deg))
    return khz_per_v_cm / 100.0


@dataclass(frozen=True)
class FieldProfile:
    """Electrode geometry and relative field deviation along the crystal."""

    gap_mm: float = 6.0
    z_mm: np.ndarray = field(default_factory=lambda: np.array([0.0, 10.0]))
    epsilon: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        z = np.asarray(self.z_mm, dtype=float)
        eps = np.asarray(self.epsilon, dtype=float)
        if self.gap_mm <= 0:
            raise InvalidParameterError("electrode gap must be positive")
        if z.shape != eps.shape or z.ndim != 1 or z.size < 2:
            raise InvalidParameterError("z and epsilon must be matching 1-D tables")
        if np.any(np.diff(z) <= 0):
            raise InvalidParameterError("z samples must be strictly increasing")
        if np.max(np.abs(eps)) >= 0.5:
            raise InvalidParameterError("|epsilon| must be << 1")
        object.__setattr__(self, "z_mm", z)
        object.__setattr__(self, "epsilon", eps)

    def epsilon_at(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if np.any(z < self.z_mm[0] - 1e-9) or np.any(z > self.z_mm[-1] + 1e-9):
            raise OutOfRangeError("position outside the crystal")
        return np.interp(z, self.z_mm, self.epsilon)


def quadratic_bump_profile(length_mm: float, gap_mm: float = 6.0,
                           peak_to_peak: float = 0.002, n: int = 51) -> FieldProfile:
    """Illustrative default inhomogeneity: quadratic, 0.2% peak-to-peak.

    The measured field is slightly weaker mid-crystal than at the faces;
    this profile is a stand-in with the right magnitude, not a fit.
    """
    z = np.linspace(0.0, length_mm, n)
    u = 2.0 * z / length_mm - 1.0
    eps = peak_to_peak * (u**2 - 0.5)
    return FieldProfile(gap_mm=gap_mm, z_mm=z, epsilon=eps)


def load_field_profile_csv(path, gap_mm: float = 6.0) -> FieldProfile:
    """Read columns z_mm, epsilon."""
    z, eps = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            z.append(float(row["z_mm"]))
            eps.append(float(row["epsilon"]))
    return FieldProfile(gap_mm=gap_mm, z_mm=np.array(z), epsilon=np.array(eps))


def shift_at(voltage: float, field_profile: FieldProfile, geom: DipoleGeometry, z,
             coefficient_mhz_per_v_mm: float | None = None) -> np.ndarray:
    """Static shift of the positive group at position z, in MHz.

    The negative group receives the opposite sign.  An explicit coefficient
    (e.g. the experimentally fitted one) overrides the geometric projection.
    """
    coeff = coefficient_mhz_per_v_mm
    if coeff is None:
        coeff = effective_coefficient(geom)
    eps = field_profile.epsilon_at(z)
    return coeff * (voltage / field_profile.gap_mm) * (1.0 + eps)


def _raised_cosine(x: np.ndarray) -> np.ndarray:
    """Smooth monotone 0 -> 1 over x in [0, 1]."""
    y = np.clip(x, 0.0, 1.0)
    return 0.5 * (1.0 - np.cos(np.pi * y))


@dataclass(frozen=True)
class StarkDrive:
    """Time- and position-dependent shift waveform for the positive group.

    amplitude_mhz is the asymptotic shift at the reference position
    (epsilon = 0); the waveform ramps from 0 to amplitude over rise_time_us
    starting at tau0_us (raised cosine; rise_time 0 is a true step).  The
    local shift is scaled by (1 + epsilon(z)).
    """

    amplitude_mhz: float
    tau0_us: float
    rise_time_us: float = 0.0
    field_profile: FieldProfile = field(default_factory=FieldProfile)

    def __post_init__(self):
        if self.rise_time_us < 0:
            raise InvalidParameterError("rise_time must be >= 0")

    def waveform(self, tau) -> np.ndarray:
        """Reference shift ds(tau) in MHz (group A sign; group B is -ds)."""
        tau = np.asarray(tau, dtype=float)
        if self.rise_time_us == 0.0:
            ramp = (tau >= self.tau0_us).astype(float)
        else:
            ramp = _raised_cosine((tau - self.tau0_us) / self.rise_time_us)
        return self.amplitude_mhz * ramp

    def shift(self, tau, z) -> np.ndarray:
        """Local shift ds(tau, z) in MHz for the positive group."""
        scale = 1.0 + self.field_profile.epsilon_at(z)
        return self.waveform(tau) * scale

    @property
    def max_abs_shift(self) -> float:
        scale = 1.0 + np.max(np.abs(self.field_profile.epsilon))
        return abs(self.amplitude_mhz) * scale


def step_drive(voltage: float, tau0_us: float, rise_time_us: float,
               field_profile: FieldProfile | None = None,
               geom: DipoleGeometry | None = None,
               coefficient_mhz_per_v_mm: float | None = None) -> StarkDrive:
    """Drive built from a voltage step at tau0 with the given rise time."""
    fp = field_profile if field_profile is not None else FieldProfile()
    g = geom if geom is not None else DipoleGeometry()
    coeff = coefficient_mhz_per_v_mm
    if coeff is None:
        coeff = effective_coefficient(g)
    amp = coeff * voltage / fp.gap_mm
    return StarkDrive(amplitude_mhz=amp, tau0_us=tau0_us,
                      rise_time_us=rise_time_us, field_profile=fp)
