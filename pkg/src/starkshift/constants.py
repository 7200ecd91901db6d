"""Physical constants and unit conventions.

Internal unit system: time in microseconds, length in millimeters,
frequencies and detunings in MHz (ordinary frequency, cycles per us).
Angular quantities (Bloch precession rates, Rabi frequencies inside the
integrator) are rad/us, i.e. 2*pi times the MHz value.
"""

import numpy as np

C_MM_PER_US = 299792.458  # speed of light, mm/us
C_M_PER_S = 299792458.0   # speed of light, m/s

TWO_PI = 2.0 * np.pi
