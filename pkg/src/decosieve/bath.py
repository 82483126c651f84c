"""Scalar-field environment: spectral model and noise/response kernels.

The environment is a free massless-or-massive scalar field in ``dim``
spatial dimensions at temperature ``temperature``, coupled through a
smeared local density with window profile ``window`` of width ``cutoff``.
After angular reduction the field reduces to a continuum of independent
modes labelled by radial wavenumber k; this module discretizes that
continuum with Gauss-Legendre nodes and tabulates the two kernels that
drive everything downstream:

    G_R(k, t) = |W(k)|^2 sin(w_k t) / (2 w_k)            (response)
    G_H(k, t) = |W(k)|^2 cos(w_k t) (1 + 2 N(w_k)) / (2 w_k)   (noise)

with w_k = sqrt(k^2 + field_mass^2) and N the thermal occupation. The
aggregated kernels are the weighted node sums

    F_X(t) = sum_j w_j * k_j^2 * G_X(k_j, t)

where the stored quadrature weights w_j fold the radial measure
k^(dim-1), the angular surface, and the 1/(dim (2 pi)^(dim/2))
normalization; the explicit k_j^2 is the coupling vertex — it belongs to
the interaction, not to the measure, which is why the per-node G arrays
and the channel amplitudes carry no such factor. Coupling strength e^2 is
carried by the model but deliberately NOT folded into the table, so one
table serves a whole coupling-scaling sweep.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import QuadratureError

WINDOWS = ("exponential", "gaussian", "sharp")

SELF_CHECK_TOL = 1e-6

# exp(x) overflow guard for thermal occupations
_EXP_CLIP = 700.0


@dataclass(frozen=True)
class BathModel:
    """Validated spectral model of the environment."""

    cutoff: float
    dim: int = 1
    window: str = "exponential"
    k_max: float = None
    n_k: int = 64
    temperature: float = 0.0
    field_mass: float = 0.0
    e2: float = 1.0

    def __post_init__(self):
        if not (self.cutoff > 0 and np.isfinite(self.cutoff)):
            raise ValueError(f"cutoff must be positive, got {self.cutoff}")
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.window not in WINDOWS:
            raise ValueError(f"window must be one of {WINDOWS}, got {self.window!r}")
        if self.k_max is None:
            object.__setattr__(self, "k_max", 8.0 * self.cutoff)
        if self.k_max < 4.0 * self.cutoff:
            raise ValueError(
                f"k_max={self.k_max} under-resolves the window "
                f"(need k_max >= 4*cutoff = {4.0 * self.cutoff})"
            )
        if self.n_k < 64:
            raise ValueError(f"n_k must be >= 64, got {self.n_k}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.field_mass < 0:
            raise ValueError(f"field_mass must be >= 0, got {self.field_mass}")
        if self.e2 < 0:
            raise ValueError(f"e2 must be >= 0, got {self.e2}")


def window_profile(k, model):
    """W(k) for the model's smearing window (the kernels use |W|^2)."""
    k = np.abs(np.asarray(k, dtype=float))
    lam = model.cutoff
    if model.window == "exponential":
        return np.exp(-k / lam)
    if model.window == "gaussian":
        return np.exp(-(k**2) / (2.0 * lam**2))
    return (k <= lam).astype(float)


def dispersion(k, model):
    """w_k = sqrt(k^2 + field_mass^2)."""
    k = np.asarray(k, dtype=float)
    return np.sqrt(k**2 + model.field_mass**2)


def occupation(omega, temperature):
    """Thermal occupation N(w) = 1/(exp(w/T)-1); 0 at T=0.

    Small-argument rows switch to the expansion T/w - 1/2 to dodge
    catastrophic cancellation in expm1; large arguments are clipped before
    exponentiation.
    """
    omega = np.asarray(omega, dtype=float)
    if temperature == 0.0:
        return np.zeros_like(omega)
    ratio = omega / temperature
    out = np.empty_like(omega)
    tiny = ratio < 1e-8
    out[tiny] = temperature / np.maximum(omega[tiny], 1e-300) - 0.5
    big = ~tiny
    out[big] = 1.0 / np.expm1(np.minimum(ratio[big], _EXP_CLIP))
    return out


def _angular_surface(dim):
    # surface of the unit sphere in `dim` dimensions: 2, 2*pi, 4*pi
    return {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}[dim]


def quadrature_nodes(model, n_k=None):
    """Gauss-Legendre nodes and fully-folded weights on (0, k_max].

    The sharp window has a discontinuity at k = cutoff, so its panel is
    split there; smooth windows use a single panel. Weights absorb the
    radial measure k^(dim-1), the angular surface, and the overall
    1/(dim * (2*pi)^(dim/2)) normalization.
    """
    n_k = model.n_k if n_k is None else n_k
    lam, kmax, dim = model.cutoff, model.k_max, model.dim
    if model.window == "sharp" and lam < kmax:
        panels = [(0.0, lam, n_k // 2), (lam, kmax, n_k - n_k // 2)]
    else:
        panels = [(0.0, kmax, n_k)]
    ks, ws = [], []
    for a, b, n in panels:
        xg, wg = np.polynomial.legendre.leggauss(n)
        ks.append(0.5 * (b - a) * xg + 0.5 * (b + a))
        ws.append(0.5 * (b - a) * wg)
    k = np.concatenate(ks)
    w = np.concatenate(ws)
    norm = _angular_surface(dim) / (dim * (2.0 * np.pi) ** (dim / 2.0))
    w = w * norm * k ** (dim - 1)
    return k, w


@dataclass(frozen=True)
class KernelTable:
    """Kernels tabulated on a fixed time grid.

    ``g_r``/``g_h`` are the per-node kernels (n_k, n_t); ``f_r``/``f_h``
    their weighted sums over nodes. e^2 is not included (see module
    docstring); consumers multiply it in.
    """

    model: BathModel
    t: np.ndarray = field(repr=False)
    k: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    g_r: np.ndarray = field(repr=False)
    g_h: np.ndarray = field(repr=False)
    f_r: np.ndarray = field(repr=False)
    f_h: np.ndarray = field(repr=False)

    @property
    def n_nodes(self):
        return self.k.size


def _kernel_arrays(model, t, k, w):
    om = dispersion(k, model)
    wsq = window_profile(k, model) ** 2
    nocc = occupation(om, model.temperature)
    phase = np.outer(om, t)
    base = (wsq / (2.0 * om))[:, None]
    g_r = base * np.sin(phase)
    g_h = base * (1.0 + 2.0 * nocc)[:, None] * np.cos(phase)
    vertex = w * k**2
    f_r = vertex @ g_r
    f_h = vertex @ g_h
    return g_r, g_h, f_r, f_h


def kernels_at_zero(model, n_k=None):
    """(F_R(0), F_H(0)) without building a full table."""
    k, w = quadrature_nodes(model, n_k)
    om = dispersion(k, model)
    wsq = window_profile(k, model) ** 2
    nocc = occupation(om, model.temperature)
    f_h0 = float((w * k**2) @ (wsq * (1.0 + 2.0 * nocc) / (2.0 * om)))
    return 0.0, f_h0


def build_kernel_table(model, t_grid):
    """Tabulate the kernels on ``t_grid`` (ascending from 0).

    Before accepting the node set, the builder doubles n_k and demands the
    static noise kernel F_H(0) move by less than SELF_CHECK_TOL relative;
    a failed check raises QuadratureError instead of returning a table
    that merely looks converged.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("time grid must be a 1-d array with >= 2 points")
    if t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise ValueError("time grid must start at 0 and increase strictly")

    _, f_h0 = kernels_at_zero(model)
    _, f_h0_fine = kernels_at_zero(model, 2 * model.n_k)
    ref = max(abs(f_h0_fine), 1e-300)
    reldev = abs(f_h0 - f_h0_fine) / ref
    if reldev > SELF_CHECK_TOL:
        raise QuadratureError(
            f"node-doubling self-check failed: F_H(0) moved by {reldev:.3e} "
            f"relative (limit {SELF_CHECK_TOL:.0e}); raise n_k"
        )

    k, w = quadrature_nodes(model)
    g_r, g_h, f_r, f_h = _kernel_arrays(model, t, k, w)
    for arr in (t, k, w, g_r, g_h, f_r, f_h):
        arr.setflags(write=False)
    return KernelTable(model, t, k, w, g_r, g_h, f_r, f_h)


def flatness(table, period):
    """max_t |F_H(t) - F_H(0)| / F_H(0) over the first ``period`` of time.

    Small values mean the environment responds as a frozen (adiabatic)
    background over one system cycle.
    """
    mask = table.t <= period * (1.0 + 1e-12)
    f0 = table.f_h[0]
    return float(np.max(np.abs(table.f_h[mask] - f0)) / abs(f0))


def kernel_csv(table):
    """CSV text with columns t, F_R, F_H (17 significant digits)."""
    buf = io.StringIO()
    buf.write("t,F_R,F_H\n")
    for i in range(table.t.size):
        buf.write(
            f"{table.t[i]:.17g},{table.f_r[i]:.17g},{table.f_h[i]:.17g}\n"
        )
    return buf.getvalue()
