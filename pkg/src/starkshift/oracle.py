"""Independent linear-response engine.

A weak pulse sees the structure as a linear filter.  Each ion contributes a
unit-area complex Lorentzian (absorptive part + its dispersive Hilbert
pair), so the complex propagation constant is

    kappa(nu) = (alpha0/4) * sum_groups  integral g(x) C(x - nu) dx,
    C(u) = (1/pi) / (gamma - i u),   gamma = HWHM of the homogeneous line,

normalized so a full two-group background gives amplitude absorption
alpha0/2 (intensity alpha0).  The integral is evaluated in closed form over
the piecewise-linear density profiles, which resolves kHz-scale homogeneous
wings against MHz grids exactly (no refinement floor), and the flat
background is continued analytically beyond the grid.

The slow-light group delay, the residual absorption floor inside a hole,
and the frequency-domain pulse propagation all come out of kappa; this
module is the brute-force cross-check for the time-domain solver.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .constants import C_M_PER_S, TWO_PI
from .ensemble import IonEnsemble, shifted_ensemble
from .errors import InvalidParameterError, PreconditionError

__all__ = [
    "TransferFunction",
    "susceptibility",
    "linear_transfer",
    "transmit",
    "group_delay_us",
    "eq1_velocity",
    "eq4_velocity",
    "eq5_loss",
]

_EVAL_CHUNK = 512  # segment-sum batching to bound memory


def _complex_kappa(nu_eval: np.ndarray, nu_grid: np.ndarray, profiles, alpha0: float,
                   gamma_mhz: float) -> np.ndarray:
    """Exact integral of piecewise-linear densities against the complex Lorentzian.

    Per segment [x0, x1] with g(x) = A + B*(x - nu):
        int du /(g - iu)      = i  * ln(gamma - iu)
        int u du /(g - iu)    = gamma * ln(gamma - iu) + i*u
    Tails assume the profiles continue flat beyond the grid; the two sides
    are combined as a principal-value pair so the dispersive parts stay
    finite.
    """
    if gamma_mhz <= 0:
        raise PreconditionError("homogeneous linewidth must be positive")
    x = nu_grid
    out = np.zeros(nu_eval.size, dtype=complex)
    for prof in profiles:
        g0 = prof[:-1]
        g1 = prof[1:]
        slope = (g1 - g0) / np.diff(x)
        for start in range(0, nu_eval.size, _EVAL_CHUNK):
            nu = nu_eval[start:start + _EVAL_CHUNK, None]
            u = x[None, :] - nu
            lnode = np.log(gamma_mhz - 1j * u)
            dln = lnode[:, 1:] - lnode[:, :-1]
            i0 = 1j * dln
            i1 = gamma_mhz * dln + 1j * (u[:, 1:] - u[:, :-1])
            a = g0[None, :] + slope[None, :] * (nu - x[None, :-1])
            seg = (a * i0 + slope[None, :] * i1).sum(axis=1) / np.pi
            # flat tails, paired so the log divergences cancel (P.V. limit)
            g_edge = 0.5 * (prof[0] + prof[-1])
            tails = g_edge * (1.0 + (1j / np.pi) * (lnode[:, 0] - lnode[:, -1]))
            out[start:start + _EVAL_CHUNK] += seg + tails
    return (alpha0 / 4.0) * out


def susceptibility(ensemble: IonEnsemble, gammaH_khz: float | None = None,
                   nu_eval: np.ndarray | None = None) -> np.ndarray:
    """Complex propagation constant kappa(nu) = alpha(nu)/2 + i k(nu), per mm.

    Real part: amplitude absorption (intensity absorption / 2).  Imaginary
    part: dispersive wavenumber deviation; the transmitted field after a
    length L is exp(-kappa L) times the input.  gammaH_khz is the
    homogeneous FWHM; it defaults to the ensemble's stored value.
    Evaluated on the ensemble grid unless nu_eval is given.
    """
    if gammaH_khz is None:
        gammaH_khz = ensemble.gamma_h_khz
    if gammaH_khz <= 0:
        raise PreconditionError("gammaH must be positive")
    gamma_mhz = gammaH_khz * 1e-3 / 2.0  # FWHM kHz -> HWHM MHz
    if nu_eval is None:
        nu_eval = ensemble.grid.points
    nu_eval = np.asarray(nu_eval, dtype=float)
    return _complex_kappa(nu_eval, ensemble.grid.points,
                          (ensemble.gA, ensemble.gB), ensemble.alpha0, gamma_mhz)


@dataclass(frozen=True)
class TransferFunction:
    """Complex amplitude transmission of the full crystal on a frequency axis."""

    nu_mhz: np.ndarray
    h: np.ndarray
    length_mm: float

    def magnitude_sq(self) -> np.ndarray:
        return np.abs(self.h) ** 2

    def phase(self) -> np.ndarray:
        return np.unwrap(np.angle(self.h))

    def group_delay_us(self) -> np.ndarray:
        """-d(phase)/d(omega); positive inside a transmission window."""
        return -np.gradient(self.phase(), self.nu_mhz) / TWO_PI

    def peak_mhz(self) -> float:
        """Passband center: quadratically interpolated maximum of |H|^2."""
        p = self.magnitude_sq()
        i = int(np.argmax(p))
        if i == 0 or i == p.size - 1:
            return float(self.nu_mhz[i])
        den = p[i - 1] - 2 * p[i] + p[i + 1]
        if den == 0:
            return float(self.nu_mhz[i])
        d = 0.5 * (p[i - 1] - p[i + 1]) / den
        return float(self.nu_mhz[i] + d * (self.nu_mhz[1] - self.nu_mhz[0]))

    def to_csv(self, path) -> None:
        gd = self.group_delay_us()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["nu_mhz", "transmission", "phase_rad", "group_delay_us"])
            for nu, t, ph, g in zip(self.nu_mhz, self.magnitude_sq(), self.phase(), gd):
                w.writerow([f"{nu:.17g}", f"{t:.17g}", f"{ph:.17g}", f"{g:.17g}"])


def linear_transfer(ensemble: IonEnsemble, ds: float = 0.0,
                    gammaH_khz: float | None = None,
                    nu_eval: np.ndarray | None = None) -> TransferFunction:
    """H(nu) = exp(-kappa(nu) * L) for the structure under a static shift ds."""
    ens = shifted_ensemble(ensemble, ds) if ds != 0.0 else ensemble
    if nu_eval is None:
        nu_eval = ensemble.grid.points
    kap = susceptibility(ens, gammaH_khz, nu_eval=np.asarray(nu_eval, dtype=float))
    h = np.exp(-kap * ensemble.length)
    return TransferFunction(nu_mhz=np.asarray(nu_eval, dtype=float), h=h,
                            length_mm=ensemble.length)


def transmit(ensemble: IonEnsemble, tau_us: np.ndarray, envelope: np.ndarray,
             ds: float = 0.0, gammaH_khz: float | None = None) -> np.ndarray:
    """Frequency-domain propagation of a complex envelope through the structure.

    FFT the envelope, multiply by H on the FFT frequencies (clamped to the
    flat background beyond the grid), inverse FFT.  This is the independent
    reference the time-domain solver is checked against.
    """
    tau_us = np.asarray(tau_us, dtype=float)
    envelope = np.asarray(envelope, dtype=complex)
    if envelope.size < 2:
        raise InvalidParameterError("need at least 2 envelope samples")
    dt = tau_us[1] - tau_us[0]
    freqs = np.fft.fftfreq(envelope.size, dt)
    span = ensemble.grid.points[-1]
    inside = np.abs(freqs) <= span
    ens = shifted_ensemble(ensemble, ds) if ds != 0.0 else ensemble
    kap = np.full(freqs.shape, ensemble.alpha0 / 2.0, dtype=complex)
    kap[inside] = susceptibility(ens, gammaH_khz, nu_eval=freqs[inside])
    h = np.exp(-kap * ensemble.length)
    return np.fft.ifft(np.fft.fft(envelope) * h)


def group_delay_us(ensemble: IonEnsemble, nu_mhz: float = 0.0,
                   gammaH_khz: float | None = None, dnu: float = 1e-3) -> float:
    """Group delay through the crystal at one frequency, by phase differencing."""
    nu = np.array([nu_mhz - dnu, nu_mhz, nu_mhz + dnu])
    kap = susceptibility(ensemble, gammaH_khz, nu_eval=nu)
    phase = -np.imag(kap) * ensemble.length
    return float(-(phase[2] - phase[0]) / (2 * dnu) / TWO_PI)


def eq1_velocity(refractive_index: float, ratio_med_em: float) -> float:
    """Group velocity (m/s) from the stored/electromagnetic energy ratio."""
    if refractive_index < 1 or ratio_med_em < 0:
        raise InvalidParameterError("need n >= 1 and a non-negative energy ratio")
    return (C_M_PER_S / refractive_index) / (1.0 + ratio_med_em)


def eq4_velocity(gamma_mhz: float, alpha_half_per_mm: float) -> float:
    """Group-velocity estimate 2*pi*Gamma / (alpha/2) in m/s.

    gamma_mhz: transmission-window width; alpha_half_per_mm: intensity
    absorption of the single-sign shell around it (half of the ions).
    """
    if gamma_mhz <= 0 or alpha_half_per_mm <= 0:
        raise InvalidParameterError("need positive width and absorption")
    return TWO_PI * gamma_mhz * 1e6 / (alpha_half_per_mm * 1e3)


def eq5_loss(gamma_mhz: float, t_switch_ns: float) -> float:
    """Fractional loss for sweeping a window of width Gamma during a switch time T."""
    if gamma_mhz <= 0 or t_switch_ns < 0:
        raise InvalidParameterError("need positive width and non-negative switch time")
    return 1.0 - np.exp(-TWO_PI * gamma_mhz * t_switch_ns * 1e-3)
