"""Hot inner loops: RK4 sweep of all Bloch vectors across one z-slab.

Two interchangeable backends with identical call signatures:

* a numba ``@njit(parallel=...)`` kernel (default when numba imports), and
* a pure-numpy fallback, vectorized over nodes.

Selection: environment variable ``STARKSHIFT_NUMBA`` — ``0`` forces the
numpy path, ``1`` requires numba, unset picks numba when available.
``STARKSHIFT_THREADS`` caps the numba thread count.

Determinism contract: node contributions to the polarization and excitation
accumulators are reduced in a fixed chunked order (NCHUNKS partial buffers
combined by numpy's pairwise sum), so results are bitwise identical for any
thread count.  benchmarks/bench_kernels.py times the two backends against
each other.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import InvalidParameterError

__all__ = [
    "slab_sweep",
    "slab_sweep_numpy",
    "slab_sweep_numba",
    "backend_name",
    "numba_available",
    "set_thread_count",
]

NCHUNKS = 64

try:
    import numba
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

_env = os.environ.get("STARKSHIFT_NUMBA", "").strip().lower()
if _env in ("0", "false", "off"):
    _USE_NUMBA = False
elif _env in ("1", "true", "on"):
    if not _HAVE_NUMBA:
        raise ImportError("STARKSHIFT_NUMBA=1 but numba is not importable")
    _USE_NUMBA = True
else:
    _USE_NUMBA = _HAVE_NUMBA


def numba_available() -> bool:
    return _HAVE_NUMBA


def backend_name() -> str:
    return "numba" if _USE_NUMBA else "numpy"


def set_thread_count(n: int | None = None) -> None:
    """Apply STARKSHIFT_THREADS (or an explicit count) to the numba runtime."""
    if not _HAVE_NUMBA:
        return
    if n is None:
        raw = os.environ.get("STARKSHIFT_THREADS", "").strip()
        if not raw:
            return
        n = int(raw)
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)


def slab_sweep_numpy(f_r, f_i, delta, sgn, wgt, gdens, ds, ds_mid,
                     dt, inv_t1, inv_t2, snap_idx):
    """Vectorized-over-nodes reference implementation.

    Advances every (group, detuning) node of one z-slab through the full
    retarded-time window under the known local field, returning the
    polarization quadratures, the weighted excitation, and excitation
    snapshots.  See slab_sweep for the argument contract.
    """
    nt = f_r.size
    m = delta.size
    rx = np.zeros(m)
    ry = np.zeros(m)
    rz = np.full(m, -1.0)
    polx = np.zeros(nt)
    poly = np.zeros(nt)
    excw = np.zeros(nt)
    nsnap = snap_idx.size
    exc_snap = np.zeros((nsnap, m))
    sp = 0
    while sp < nsnap and snap_idx[sp] == 0:
        sp += 1  # ground state: zero excitation
    h = dt
    for i in range(nt - 1):
        d1 = delta + sgn * ds[i]
        dm = delta + sgn * ds_mid[i]
        d2 = delta + sgn * ds[i + 1]
        f1r, f1i = f_r[i], f_i[i]
        fmr, fmi = 0.5 * (f_r[i] + f_r[i + 1]), 0.5 * (f_i[i] + f_i[i + 1])
        f2r, f2i = f_r[i + 1], f_i[i + 1]

        k1x = -d1 * ry - f1i * rz - rx * inv_t2
        k1y = d1 * rx + f1r * rz - ry * inv_t2
        k1z = f1i * rx - f1r * ry - (1.0 + rz) * inv_t1

        x = rx + 0.5 * h * k1x
        y = ry + 0.5 * h * k1y
        z = rz + 0.5 * h * k1z
        k2x = -dm * y - fmi * z - x * inv_t2
        k2y = dm * x + fmr * z - y * inv_t2
        k2z = fmi * x - fmr * y - (1.0 + z) * inv_t1

        x = rx + 0.5 * h * k2x
        y = ry + 0.5 * h * k2y
        z = rz + 0.5 * h * k2z
        k3x = -dm * y - fmi * z - x * inv_t2
        k3y = dm * x + fmr * z - y * inv_t2
        k3z = fmi * x - fmr * y - (1.0 + z) * inv_t1

        x = rx + h * k3x
        y = ry + h * k3y
        z = rz + h * k3z
        k4x = -d2 * y - f2i * z - x * inv_t2
        k4y = d2 * x + f2r * z - y * inv_t2
        k4z = f2i * x - f2r * y - (1.0 + z) * inv_t1

        rx = rx + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        ry = ry + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        rz = rz + (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)

        polx[i + 1] = np.sum(wgt * rx)
        poly[i + 1] = np.sum(wgt * ry)
        excw[i + 1] = np.sum(wgt * 0.5 * (1.0 + rz))
        while sp < nsnap and snap_idx[sp] == i + 1:
            exc_snap[sp] = gdens * 0.5 * (1.0 + rz)
            sp += 1
    return polx, poly, excw, exc_snap


if _HAVE_NUMBA:

    @njit(parallel=True, fastmath=True, cache=True)
    def _slab_sweep_jit(f_r, f_i, delta, sgn, wgt, gdens, ds, ds_mid,
                        dt, inv_t1, inv_t2, snap_idx):  # pragma: no cover - jitted
        nt = f_r.size
        m = delta.size
        nsnap = snap_idx.size
        buf = np.zeros((NCHUNKS, 3, nt))
        exc_snap = np.zeros((nsnap, m))
        csize = (m + NCHUNKS - 1) // NCHUNKS
        h = dt
        for c in prange(NCHUNKS):
            lo = c * csize
            hi = min(m, lo + csize)
            for node in range(lo, hi):
                de = delta[node]
                sg = sgn[node]
                w = wgt[node]
                gd = gdens[node]
                rx = 0.0
                ry = 0.0
                rz = -1.0
                sp = 0
                while sp < nsnap and snap_idx[sp] == 0:
                    sp += 1
                for i in range(nt - 1):
                    d1 = de + sg * ds[i]
                    dm = de + sg * ds_mid[i]
                    d2 = de + sg * ds[i + 1]
                    f1r = f_r[i]
                    f1i = f_i[i]
                    fmr = 0.5 * (f_r[i] + f_r[i + 1])
                    fmi = 0.5 * (f_i[i] + f_i[i + 1])
                    f2r = f_r[i + 1]
                    f2i = f_i[i + 1]

                    k1x = -d1 * ry - f1i * rz - rx * inv_t2
                    k1y = d1 * rx + f1r * rz - ry * inv_t2
                    k1z = f1i * rx - f1r * ry - (1.0 + rz) * inv_t1

                    x = rx + 0.5 * h * k1x
                    y = ry + 0.5 * h * k1y
                    z = rz + 0.5 * h * k1z
                    k2x = -dm * y - fmi * z - x * inv_t2
                    k2y = dm * x + fmr * z - y * inv_t2
                    k2z = fmi * x - fmr * y - (1.0 + z) * inv_t1

                    x = rx + 0.5 * h * k2x
                    y = ry + 0.5 * h * k2y
                    z = rz + 0.5 * h * k2z
                    k3x = -dm * y - fmi * z - x * inv_t2
                    k3y = dm * x + fmr * z - y * inv_t2
                    k3z = fmi * x - fmr * y - (1.0 + z) * inv_t1

                    x = rx + h * k3x
                    y = ry + h * k3y
                    z = rz + h * k3z
                    k4x = -d2 * y - f2i * z - x * inv_t2
                    k4y = d2 * x + f2r * z - y * inv_t2
                    k4z = f2i * x - f2r * y - (1.0 + z) * inv_t1

                    rx = rx + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
                    ry = ry + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
                    rz = rz + (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)

                    buf[c, 0, i + 1] += w * rx
                    buf[c, 1, i + 1] += w * ry
                    buf[c, 2, i + 1] += w * 0.5 * (1.0 + rz)
                    while sp < nsnap and snap_idx[sp] == i + 1:
                        exc_snap[sp, node] = gd * 0.5 * (1.0 + rz)
                        sp += 1
        return buf, exc_snap

    def slab_sweep_numba(f_r, f_i, delta, sgn, wgt, gdens, ds, ds_mid,
                         dt, inv_t1, inv_t2, snap_idx):
        buf, exc_snap = _slab_sweep_jit(f_r, f_i, delta, sgn, wgt, gdens,
                                        ds, ds_mid, dt, inv_t1, inv_t2, snap_idx)
        # fixed-order (thread-count independent) combination of chunk partials
        acc = buf.sum(axis=0)
        return acc[0], acc[1], acc[2], exc_snap

else:  # pragma: no cover - exercised only without numba

    def slab_sweep_numba(*args, **kwargs):
        raise ImportError("numba backend requested but numba is not installed")


def slab_sweep(f_r, f_i, delta, sgn, wgt, gdens, ds, ds_mid,
               dt, inv_t1, inv_t2, snap_idx):
    """Advance all Bloch nodes of one slab through the time window.

    Parameters
    ----------
    f_r, f_i : (nt,) local field quadratures in rad/us
    delta    : (m,) node detunings in rad/us
    sgn      : (m,) +1 for the positive Stark group, -1 for the negative
    wgt      : (m,) group density times quadrature weight (MHz)
    gdens    : (m,) group density alone (for snapshot maps)
    ds       : (nt,) drive shift at full steps, rad/us, already scaled to
               this slab's local field
    ds_mid   : (nt-1,) drive shift at RK4 midpoints
    dt       : step, us
    inv_t1, inv_t2 : relaxation rates, 1/us
    snap_idx : sorted (nsnap,) int64 time indices to capture excitation at

    Returns
    -------
    polx, poly : (nt,) weighted sums of r_x, r_y (polarization quadratures)
    excw       : (nt,) weighted sum of (1 + r_z)/2 (stored-excitation integral)
    exc_snap   : (nsnap, m) per-node excitation density g*(1+r_z)/2
    """
    for arr, n in ((f_r, "f_r"), (f_i, "f_i")):
        if arr.ndim != 1:
            raise InvalidParameterError(f"{n} must be 1-D")
    if f_i.size != f_r.size or ds.size != f_r.size or ds_mid.size != f_r.size - 1:
        raise InvalidParameterError("field/drive arrays have inconsistent lengths")
    if not (delta.size == sgn.size == wgt.size == gdens.size):
        raise InvalidParameterError("node arrays have inconsistent lengths")
    fn = slab_sweep_numba if _USE_NUMBA else slab_sweep_numpy
    return fn(f_r, f_i, delta, sgn, wgt, gdens, ds, ds_mid,
              dt, inv_t1, inv_t2, snap_idx)
