"""Spectral absorption structures for the two Stark-sign ion groups.

The medium is described by two dimensionless density profiles gA(delta) and
gB(delta) on a uniform detuning grid, one per Stark-sign group.  An unburned
background has gA = gB = 1 and a total intensity absorption coefficient
alpha0, i.e. the per-node absorption is alpha0 * (gA + gB) / 2.  Hole
burning multiplies a group's density by a smooth window complement, with the
group displaced by its Stark shift while the burn window stays fixed in the
lab frame.

All operations are pure: they return new ensembles and never mutate inputs.
Profiles are position-independent (the electric-field inhomogeneity enters
through the drive, not through burning).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import erf

from .errors import InvalidParameterError, InvalidPreparationError, OutOfRangeError
from .stark import DipoleGeometry, effective_coefficient

__all__ = [
    "DetuningGrid",
    "BurnStep",
    "IonEnsemble",
    "make_grid",
    "new_background",
    "window_indicator",
    "burn",
    "prepare_frequency_shifter",
    "shifted_profiles",
    "shifted_ensemble",
    "write_profiles_csv",
]


@dataclass(frozen=True)
class DetuningGrid:
    """Uniform detuning axis in MHz, symmetric about the pulse carrier at 0."""

    points: np.ndarray
    spacing: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 3:
            raise InvalidParameterError("detuning grid needs at least 3 points")
        if self.spacing <= 0:
            raise InvalidParameterError("grid spacing must be positive")
        d = np.diff(pts)
        if not np.allclose(d, self.spacing, rtol=0, atol=1e-9 * self.spacing):
            raise InvalidParameterError("detuning grid must be uniformly spaced")
        if abs(pts[0] + pts[-1]) > self.spacing:
            raise InvalidParameterError("grid must be symmetric about 0 within one spacing")
        object.__setattr__(self, "points", pts)

    @property
    def span(self) -> float:
        """Half-width of the grid in MHz."""
        return float(self.points[-1])

    @property
    def guard_band(self) -> float:
        """Largest static shift the grid tolerates before edge effects dominate.

        One quarter of the half-span, a deliberately conservative margin.
        """
        return 0.25 * (self.points[-1] - self.points[0])

    def __len__(self) -> int:
        return self.points.size


def make_grid(span_mhz: float = 40.0, spacing_mhz: float = 0.02) -> DetuningGrid:
    """Build a symmetric grid covering [-span, +span]."""
    n = int(round(span_mhz / spacing_mhz))
    pts = np.arange(-n, n + 1, dtype=float) * spacing_mhz
    return DetuningGrid(points=pts, spacing=spacing_mhz)


@dataclass(frozen=True)
class BurnStep:
    """One hole-burning pass: a lab-frame window applied at a given voltage."""

    window: tuple[float, float]           # (lo, hi) MHz in the lab frame during the burn
    applied_voltage: float = 0.0          # V across the electrode gap while burning
    edge_width: float = 0.1               # MHz, ~8-92% transition width of the erf edge
    depth: float = 1.0                    # fraction of remaining population removed

    def __post_init__(self):
        lo, hi = self.window
        if not lo < hi:
            raise InvalidParameterError(f"burn window must have lo < hi, got {self.window}")
        if self.edge_width < 0:
            raise InvalidParameterError("edge_width must be >= 0")
        if not 0.0 <= self.depth <= 1.0:
            raise InvalidParameterError("burn depth must be in [0, 1]")


@dataclass(frozen=True)
class IonEnsemble:
    """Two-group spectral structure plus bulk medium parameters.

    alpha0 is the intensity absorption coefficient (1/mm) of the full
    two-group background; a region where only one group remains at full
    density absorbs alpha0/2.  gamma_h_khz is the homogeneous linewidth
    (FWHM, kHz) used by the linear-response oracle; the solver's equivalent
    broadening comes from T2 = 1/(pi * gammaH).
    """

    grid: DetuningGrid
    gA: np.ndarray
    gB: np.ndarray
    alpha0: float                 # 1/mm, intensity, full background
    length: float                 # mm
    refractive_index: float = 1.8
    t1_us: float = 164.0
    t2_us: float = 318.3
    gamma_h_khz: float = 1.0

    def __post_init__(self):
        for name in ("gA", "gB"):
            g = np.asarray(getattr(self, name), dtype=float)
            if g.shape != self.grid.points.shape:
                raise InvalidParameterError(f"{name} must match the grid shape")
            if np.any(g < -1e-12) or np.any(g > 1 + 1e-12):
                raise InvalidParameterError(f"{name} densities must lie in [0, 1]")
            object.__setattr__(self, name, np.clip(g, 0.0, 1.0))
        if self.alpha0 < 0:
            raise InvalidParameterError("alpha0 must be >= 0")
        if self.length <= 0:
            raise InvalidParameterError("crystal length must be positive")
        if self.t1_us <= 0 or self.t2_us <= 0:
            raise InvalidParameterError("T1 and T2 must be positive")
        if self.t2_us > 2 * self.t1_us + 1e-12:
            raise InvalidParameterError("T2 must not exceed 2*T1")
        if self.refractive_index < 1:
            raise InvalidParameterError("refractive index must be >= 1")

    @property
    def optical_depth(self) -> float:
        """alpha0 * L of the unburned two-group background."""
        return self.alpha0 * self.length

    def alpha_total(self) -> np.ndarray:
        """Intensity absorption coefficient per grid node, 1/mm."""
        return self.alpha0 * (self.gA + self.gB) / 2.0


def new_background(
    grid: DetuningGrid,
    alpha0: float,
    length: float,
    refractive_index: float = 1.8,
    t1_us: float = 164.0,
    t2_us: float = 318.3,
    gamma_h_khz: float = 1.0,
) -> IonEnsemble:
    """Flat unburned background: gA = gB = 1 everywhere.

    The inhomogeneous line (~5 GHz) dwarfs the MHz-scale structures modeled
    here, so the local background is flat by construction.
    """
    if alpha0 < 0 or length <= 0 or t1_us <= 0 or t2_us <= 0:
        raise InvalidParameterError("alpha0 >= 0 and positive length/T1/T2 required")
    ones = np.ones_like(grid.points)
    return IonEnsemble(
        grid=grid, gA=ones.copy(), gB=ones.copy(),
        alpha0=alpha0, length=length, refractive_index=refractive_index,
        t1_us=t1_us, t2_us=t2_us, gamma_h_khz=gamma_h_khz,
    )


def window_indicator(nu: np.ndarray, lo: float, hi: float, edge_width: float) -> np.ndarray:
    """Smooth indicator of [lo, hi]: 1 well inside, 0 well outside.

    Error-function roll-off; edge_width is approximately the 8-92%
    transition width.  edge_width = 0 degenerates to a hard window.
    """
    nu = np.asarray(nu, dtype=float)
    if edge_width <= 0:
        return ((nu >= lo) & (nu <= hi)).astype(float)
    s = edge_width / 2.0
    return 0.5 * (erf((nu - lo) / s) - erf((nu - hi) / s))


def burn(
    ensemble: IonEnsemble,
    step: BurnStep,
    stark_coeff: float = 1.0900,
    gap: float = 6.0,
) -> IonEnsemble:
    """Apply one hole-burning pass.

    stark_coeff is the effective Stark coefficient in MHz per (V/mm); the
    positive-sign group is displaced by +s = stark_coeff * V / gap during
    the burn, the negative-sign group by -s, while the burn window stays
    fixed in the lab frame.  Burning is multiplicative in depth, so repeated
    passes compose.

    Group populations whose displaced window falls off the grid are simply
    not represented; only a window with no overlap at all with the grid is
    rejected.
    """
    lo, hi = step.window
    pts = ensemble.grid.points
    if hi < pts[0] or lo > pts[-1]:
        raise OutOfRangeError(
            f"burn window [{lo}, {hi}] MHz lies outside the grid span "
            f"[{pts[0]}, {pts[-1]}] MHz"
        )
    if gap <= 0:
        raise InvalidParameterError("electrode gap must be positive")
    s = stark_coeff * step.applied_voltage / gap
    # group A sits at (zero-field detuning + s) during the burn
    gA = ensemble.gA * (1.0 - step.depth * window_indicator(pts + s, lo, hi, step.edge_width))
    gB = ensemble.gB * (1.0 - step.depth * window_indicator(pts - s, lo, hi, step.edge_width))
    return replace(ensemble, gA=gA, gB=gB)


def prepare_frequency_shifter(
    grid: DetuningGrid,
    alpha0: float,
    length: float,
    refractive_index: float = 1.8,
    t1_us: float = 164.0,
    t2_us: float = 318.3,
    wide_hole: float = 18.0,
    narrow_hole: float = 1.0,
    prep_voltage: float = 88.0,
    gap: float = 6.0,
    edge_width: float = 0.1,
    gamma_h_khz: float = 1.0,
    geometry: DipoleGeometry | None = None,
) -> IonEnsemble:
    """Build the frequency-shifter structure.

    Steps mirror the preparation protocol: burn a wide hole while a static
    voltage displaces the groups by +/-s, release the voltage, then burn the
    narrow transmission window at zero field.  The wide burn window is
    centered at -s so that, at zero field, the negative-sign group is fully
    removed within +/-(wide_hole/2) of the carrier, leaving a single-sign
    shell around the narrow window.  The positive-sign group's matching hole
    sits far away at -2s.
    """
    if not 0 < narrow_hole < wide_hole:
        raise InvalidPreparationError(
            "need 0 < narrow_hole < wide_hole for a single-sign shell "
            f"(got narrow={narrow_hole}, wide={wide_hole})"
        )
    geom = geometry if geometry is not None else DipoleGeometry()
    coeff = effective_coefficient(geom)
    s = coeff * prep_voltage / gap
    if 2.0 * abs(s) <= wide_hole:
        raise InvalidPreparationError(
            f"preparation shift {s:.2f} MHz too small to separate groups "
            f"burned over {wide_hole} MHz (need 2*shift > wide_hole)"
        )
    ens = new_background(grid, alpha0, length, refractive_index, t1_us, t2_us, gamma_h_khz)
    wide = BurnStep(
        window=(-s - wide_hole / 2.0, -s + wide_hole / 2.0),
        applied_voltage=prep_voltage,
        edge_width=edge_width,
        depth=1.0,
    )
    ens = burn(ens, wide, stark_coeff=coeff, gap=gap)
    narrow = BurnStep(
        window=(-narrow_hole / 2.0, narrow_hole / 2.0),
        applied_voltage=0.0,
        edge_width=edge_width,
        depth=1.0,
    )
    return burn(ens, narrow, stark_coeff=coeff, gap=gap)


def shifted_profiles(ensemble: IonEnsemble, ds: float) -> tuple[np.ndarray, np.ndarray]:
    """Static view of the structure under a DC shift: gA moves by +ds, gB by -ds.

    Linear interpolation on the grid; beyond the grid the profiles continue
    with their edge values (flat background).
    """
    if abs(ds) > ensemble.grid.guard_band:
        raise OutOfRangeError(
            f"shift {ds} MHz exceeds the grid guard band "
            f"{ensemble.grid.guard_band:.2f} MHz"
        )
    pts = ensemble.grid.points
    gA = np.interp(pts - ds, pts, ensemble.gA)
    gB = np.interp(pts + ds, pts, ensemble.gB)
    return gA, gB


def shifted_ensemble(ensemble: IonEnsemble, ds: float) -> IonEnsemble:
    """Ensemble carrying the statically shifted profiles."""
    gA, gB = shifted_profiles(ensemble, ds)
    return replace(ensemble, gA=gA, gB=gB)


def write_profiles_csv(ensemble: IonEnsemble, path) -> None:
    """Dump the structure: detuning_mhz, gA, gB, alpha_total_per_mm."""
    alpha = ensemble.alpha_total()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["detuning_mhz", "gA", "gB", "alpha_total_per_mm"])
        for nu, a, b, al in zip(ensemble.grid.points, ensemble.gA, ensemble.gB, alpha):
            w.writerow([f"{nu:.17g}", f"{a:.17g}", f"{b:.17g}", f"{al:.17g}"])
