"""Measurement chain: spectra, heterodyne beats, instantaneous frequency,
efficiency, excitation maps, and the extended-shift loss estimator.

Everything here is pure post-processing of solver output; the simulator owns
the analytic signal, so instantaneous frequency comes straight from the
complex envelope's phase derivative.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .constants import TWO_PI
from .errors import InvalidParameterError
from .solver import SimResult, Snapshot

__all__ = [
    "Spectrum",
    "InstFreqTrace",
    "spectrum",
    "beat_pattern",
    "instantaneous_frequency",
    "relative_efficiency",
    "excitation_map",
    "extended_shift_loss",
    "peak_time",
    "measure_delay",
    "fit_linear",
]


@dataclass(frozen=True)
class Spectrum:
    freq_mhz: np.ndarray
    power: np.ndarray       # normalized, peak = 1
    raw_power: np.ndarray   # |FT|^2 of the windowed envelope (Parseval-exact)
    df_mhz: float

    def peak_mhz(self) -> float:
        """Peak location, quadratically interpolated between bins."""
        p = self.power
        i = int(np.argmax(p))
        if i == 0 or i == p.size - 1:
            return float(self.freq_mhz[i])
        den = p[i - 1] - 2 * p[i] + p[i + 1]
        if den == 0:
            return float(self.freq_mhz[i])
        return float(self.freq_mhz[i] + 0.5 * (p[i - 1] - p[i + 1]) / den * self.df_mhz)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["freq_mhz", "power_norm"])
            for f, p in zip(self.freq_mhz, self.power):
                w.writerow([f"{f:.17g}", f"{p:.17g}"])


def spectrum(envelope: np.ndarray, dt_us: float) -> Spectrum:
    """Power spectrum of a complex envelope, Hann-windowed against leakage."""
    env = np.asarray(envelope, dtype=complex)
    if env.size < 64:
        raise InvalidParameterError("need at least 64 samples for a spectrum")
    if dt_us <= 0:
        raise InvalidParameterError("dt must be positive")
    win = np.hanning(env.size)
    xw = env * win
    ft = np.fft.fft(xw) * dt_us
    raw = np.abs(ft) ** 2
    freqs = np.fft.fftfreq(env.size, dt_us)
    order = np.argsort(freqs)
    raw = raw[order]
    freqs = freqs[order]
    peak = raw.max()
    power = raw / peak if peak > 0 else raw
    return Spectrum(freq_mhz=freqs, power=power, raw_power=raw,
                    df_mhz=1.0 / (env.size * dt_us))


def beat_pattern(tau_us: np.ndarray, envelope: np.ndarray,
                 lo_detuning_mhz: float, lo_amplitude: float) -> np.ndarray:
    """Heterodyne intensity |E_sig + E_LO|^2 on the envelope time base."""
    env = np.asarray(envelope, dtype=complex)
    lo = lo_amplitude * np.exp(1j * TWO_PI * lo_detuning_mhz * np.asarray(tau_us))
    return np.abs(env + lo) ** 2


@dataclass(frozen=True)
class InstFreqTrace:
    times_us: np.ndarray
    freq_mhz: np.ndarray
    valid: np.ndarray  # bool; True where the envelope exceeds the threshold

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau_us", "freq_mhz", "valid"])
            for t, f, v in zip(self.times_us, self.freq_mhz, self.valid):
                w.writerow([f"{t:.17g}", f"{f:.17g}", int(v)])


def instantaneous_frequency(tau_us: np.ndarray, envelope: np.ndarray,
                            threshold: float = 0.05) -> InstFreqTrace:
    """f(tau) = (1/2pi) d(arg envelope)/dtau, unwrapped, amplitude-masked.

    Below threshold*max|envelope| the phase derivative is noise-dominated,
    so those samples are flagged invalid rather than returned as numbers to
    trust.
    """
    env = np.asarray(envelope, dtype=complex)
    tau = np.asarray(tau_us, dtype=float)
    amp = np.abs(env)
    peak = amp.max()
    valid = amp >= threshold * peak if peak > 0 else np.zeros(env.size, bool)
    phase = np.unwrap(np.angle(env))
    freq = np.gradient(phase, tau) / TWO_PI
    return InstFreqTrace(times_us=tau, freq_mhz=freq, valid=valid)


def relative_efficiency(result_v: SimResult, result_ref: SimResult) -> float:
    """Transmitted-energy ratio Energy(V) / Energy(V=0)."""
    if result_v.tau_us.shape != result_ref.tau_us.shape or not np.allclose(
            result_v.tau_us, result_ref.tau_us):
        raise InvalidParameterError("efficiency requires runs on the same time grid")
    ref = result_ref.transmitted_energy
    if ref <= 0:
        raise InvalidParameterError("reference run transmitted no energy")
    return result_v.transmitted_energy / ref


def excitation_map(snapshot: Snapshot, grid_mhz: np.ndarray, z_mm: np.ndarray
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stored-energy density vs (instantaneous ion frequency, position).

    Each group's excitation rides with its ions, so group A's column is
    displayed at detuning + shift(z) and group B's at detuning - shift(z).
    Returns (freq axis, z axis, map) with map[i, k] at freq i, slab k.
    """
    grid = np.asarray(grid_mhz, dtype=float)
    nz = snapshot.exc.shape[2]
    out = np.zeros((grid.size, nz))
    for k in range(nz):
        s = snapshot.shift_a_mhz[k]
        out[:, k] = np.interp(grid - s, grid, snapshot.exc[0, :, k])
        out[:, k] += np.interp(grid + s, grid, snapshot.exc[1, :, k])
    return grid, np.asarray(z_mm, dtype=float), out


def write_map_csv(path, freq_mhz, z_mm, map2d) -> None:
    """CSV grid: first column detuning, remaining columns one per z slab."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["detuning_mhz"] + [f"z_{z:.4g}_mm" for z in z_mm])
        for i, nu in enumerate(freq_mhz):
            w.writerow([f"{nu:.17g}"] + [f"{v:.17g}" for v in map2d[i]])


def peak_time(tau_us: np.ndarray, signal: np.ndarray) -> float:
    """Time of the intensity peak, quadratically interpolated."""
    p = np.abs(np.asarray(signal)) ** 2
    i = int(np.argmax(p))
    if i == 0 or i == p.size - 1:
        return float(tau_us[i])
    den = p[i - 1] - 2 * p[i] + p[i + 1]
    if den == 0:
        return float(tau_us[i])
    dt = tau_us[1] - tau_us[0]
    return float(tau_us[i] + 0.5 * (p[i - 1] - p[i + 1]) / den * dt)


def measure_delay(result: SimResult) -> float:
    """Pulse-peak transit delay: output peak time minus input peak time."""
    return peak_time(result.tau_us, result.transmitted) - peak_time(
        result.tau_us, result.input_envelope)


def fit_linear(x, y) -> tuple[float, float, float]:
    """Least-squares line fit; returns (slope, intercept, r_squared)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def extended_shift_loss(
    gamma_mhz: float,
    t_switch_ns: float,
    method: str = "eq5",
    target_shift_mhz: float = 10.0,
    second_hole_width_mhz: float = 3.0,
    alpha0: float = 6.6,
    length_mm: float = 10.0,
) -> float:
    """Loss of the two-hole extended-shift scheme.

    method='eq5' evaluates the closed form 1 - exp(-2 pi Gamma T).
    method='simulate' runs a scaled-down two-hole hop: a second hole burned
    at twice the target shift, the drive sweeping the filter onto it with a
    finite rise time; returns 1 - eta_rel from the full propagation.  The
    simulated pulse crosses the opposite-sign ions during the sweep, which
    is precisely the loss channel the closed form estimates.
    """
    from . import oracle

    if method == "eq5":
        return oracle.eq5_loss(gamma_mhz, t_switch_ns)
    if method != "simulate":
        raise InvalidParameterError(f"unknown method {method!r}")

    from .ensemble import BurnStep, burn, make_grid, prepare_frequency_shifter
    from .solver import PulseSpec, propagate
    from .stark import FieldProfile, StarkDrive

    span = 2.0 * target_shift_mhz + second_hole_width_mhz + 10.0
    grid = make_grid(span_mhz=span, spacing_mhz=0.04)
    if 2.0 * target_shift_mhz + second_hole_width_mhz / 2 > grid.span:
        raise InvalidParameterError("grid too small for the two-hole scheme")
    ens = prepare_frequency_shifter(grid, alpha0=alpha0, length=length_mm,
                                    narrow_hole=gamma_mhz)
    second = BurnStep(window=(2 * target_shift_mhz - second_hole_width_mhz / 2,
                              2 * target_shift_mhz + second_hole_width_mhz / 2),
                      applied_voltage=0.0, edge_width=0.2, depth=1.0)
    ens = burn(ens, second)
    pulse = PulseSpec(fwhm_us=1.0, peak_rabi_mhz=0.01, delay_us=2.5)
    dt = 0.09 / (span + target_shift_mhz)
    ref = propagate(ens, pulse, drive=None, dt_us=dt, dz_mm=0.1,
                    window_us=12.0, check_window_tail=False)
    tau0 = peak_time(ref.tau_us, ref.input_envelope) + 0.5 * measure_delay(ref)
    fp = FieldProfile(gap_mm=6.0, z_mm=np.array([0.0, length_mm]), epsilon=np.zeros(2))
    drive = StarkDrive(amplitude_mhz=target_shift_mhz, tau0_us=tau0,
                       rise_time_us=t_switch_ns * 1e-3, field_profile=fp)
    shifted = propagate(ens, pulse, drive=drive, dt_us=dt, dz_mm=0.1,
                        window_us=12.0, check_window_tail=False)
    return 1.0 - relative_efficiency(shifted, ref)
