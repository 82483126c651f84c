"""Time-local coefficients of the quadratic (position-coupled) equation.

The coefficient-form equation trades the channel memory integrals for four
time-dependent scalars obtained by integrating the kernels against one
oscillation of the system quadratures:

    omega_ren_sq(t) = -(2/m)      * int_0^t cos(omega*s) F_R(s) ds
    gamma(t)        = -(1/(2 m omega)) * int_0^t sin(omega*s) F_R(s) ds
    D(t)            =              int_0^t cos(omega*s) F_H(s) ds
    f(t)            = +(1/(m omega)) * int_0^t sin(omega*s) F_H(s) ds

all multiplied by e^2 (hbar = 1 units; the hbar factors that appear in
other unit systems are written into the prefactors where they belong).
Integration is cumulative composite Simpson on the kernel grid, so the
table is exact to fourth order at every grid point, not just the last.

Sign conventions and where each coefficient enters the generator are fixed
by the solver module; see ``solvers.evolve_qbm`` for the one anomaly.
"""

import hashlib
import io
from dataclasses import dataclass, field

import numpy as np

from .bath import flatness
from .hilbert import HBAR

MAX_SPACING_PERIODS = 1.0 / 64.0  # grid step must resolve one cycle this finely

ADIABATIC_FLATNESS = 0.01


@dataclass(frozen=True)
class CoefficientTable:
    t: np.ndarray = field(repr=False)
    omega_ren_sq: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    D: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    provenance: str = ""

    @property
    def t_max(self):
        return float(self.t[-1])


def cumulative_simpson(y, h):
    """Cumulative integral of uniformly sampled ``y`` with step ``h``.

    Interior points use the two Simpson half-panel rules
    (h/12)*(5 f0 + 8 f1 - f2) and (h/12)*(-f0 + 8 f1 + 5 f2); an odd tail
    closes with the backward parabola through the last three samples.
    Exact for quadratics at every point and for cubics at pair-complete
    (even-index) points; half-panel points carry the usual O(h^4) local
    error.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    out = np.zeros(n)
    if n < 2:
        return out
    if n == 2:
        out[1] = 0.5 * h * (y[0] + y[1])
        return out
    inc_odd = h / 12.0 * (5.0 * y[0:-2:2] + 8.0 * y[1:-1:2] - y[2::2])
    inc_even = h / 12.0 * (-y[0:-2:2] + 8.0 * y[1:-1:2] + 5.0 * y[2::2])
    out[1::2][: inc_odd.size] = inc_odd
    out[2::2] = inc_even
    if n % 2 == 0:  # last interval: backward parabola through y[-3:]
        out[-1] = h / 12.0 * (-y[-3] + 8.0 * y[-2] + 5.0 * y[-1])
    np.cumsum(out, out=out)
    return out


def _fingerprint(*parts):
    blob = "|".join(repr(p) for p in parts).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def build_coefficients(kernels, params, e2=None):
    """Integrate a KernelTable into a CoefficientTable for ``params``.

    The kernel grid must be uniform and fine enough to resolve the system
    oscillation (step <= period/64). ``e2`` defaults to the bath model's.
    """
    t = kernels.t
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
        raise ValueError("kernel grid must be uniform")
    h = float(dt[0])
    period = 2.0 * np.pi / params.omega
    if h > period * MAX_SPACING_PERIODS * (1.0 + 1e-9):
        raise ValueError(
            f"kernel grid step {h:.4g} too coarse: need <= period/64 = "
            f"{period * MAX_SPACING_PERIODS:.4g}"
        )
    if e2 is None:
        e2 = kernels.model.e2
    m, om = params.m, params.omega
    c, s = np.cos(om * t), np.sin(om * t)
    om2 = -(2.0 * HBAR / m) * cumulative_simpson(c * kernels.f_r, h) * e2 / HBAR**2
    gam = -(HBAR / (2.0 * m * om)) * cumulative_simpson(s * kernels.f_r, h) * e2 / HBAR**2
    dd = cumulative_simpson(c * kernels.f_h, h) * e2 / HBAR**2
    ff = (1.0 / (m * om)) * cumulative_simpson(s * kernels.f_h, h) * e2 / HBAR**2
    prov = _fingerprint("kernels", kernels.model, t[0], t[-1], t.size, params, e2)
    for arr in (om2, gam, dd, ff):
        arr.setflags(write=False)
    return CoefficientTable(t, om2, gam, dd, ff, prov)


def adiabatic_closed_form(kernels, params, e2=None):
    """Closed-form coefficients for a frozen (adiabatic) noise kernel.

    When F_H barely moves over one system period the integrals collapse:

        D(t) = F_H(0) sin(omega t) / omega
        f(t) = F_H(0) (1 - cos(omega t)) / (m omega^2)

    and the response-kernel pair is negligible at the same order, so
    omega_ren_sq = gamma = 0 identically. Kernels that are not flat to
    ADIABATIC_FLATNESS over one period are rejected: the closed form would
    silently misrepresent them.
    """
    period = 2.0 * np.pi / params.omega
    flat = flatness(kernels, min(period, float(kernels.t[-1])))
    if flat >= ADIABATIC_FLATNESS:
        raise ValueError(
            f"kernel is not adiabatically flat: relative variation {flat:.3e} "
            f"over one period (limit {ADIABATIC_FLATNESS})"
        )
    if e2 is None:
        e2 = kernels.model.e2
    t = kernels.t
    m, om = params.m, params.omega
    fh0 = float(kernels.f_h[0]) * e2 / HBAR**2
    dd = fh0 * np.sin(om * t) / om
    ff = fh0 * (1.0 - np.cos(om * t)) / (m * om**2)
    zero = np.zeros_like(t)
    prov = _fingerprint("closed-form", kernels.model, t[-1], t.size, params, e2)
    return CoefficientTable(t, zero, zero.copy(), dd, ff, prov)


def sample(table, times):
    """Linear interpolation of all four coefficients at ``times``."""
    times = np.asarray(times, dtype=float)
    if times.max() > table.t[-1] * (1.0 + 1e-12) or times.min() < table.t[0]:
        raise ValueError("sample times fall outside the tabulated range")
    return (
        np.interp(times, table.t, table.omega_ren_sq),
        np.interp(times, table.t, table.gamma),
        np.interp(times, table.t, table.D),
        np.interp(times, table.t, table.f),
    )


def coefficient_csv(table):
    """CSV text with columns t, omega_ren_sq, gamma, D, f."""
    buf = io.StringIO()
    buf.write("t,omega_ren_sq,gamma,D,f\n")
    for i in range(table.t.size):
        buf.write(
            f"{table.t[i]:.17g},{table.omega_ren_sq[i]:.17g},"
            f"{table.gamma[i]:.17g},{table.D[i]:.17g},{table.f[i]:.17g}\n"
        )
    return buf.getvalue()
