"""Numerically exact reference: system + a handful of discrete modes.

The master-equation engines are second order in the coupling, so the only
trustworthy way to validate them end to end is against brute-force unitary
evolution of a small closed composite. This module builds the joint
Hamiltonian of the oscillator and N explicit bosonic modes, diagonalizes
it once, propagates product initial states exactly, and traces out the
modes. ``perturbative_scaling_check`` then pits the master equation
against this reference across a geometric ladder of coupling strengths:
if the master equation is honest, the gap delta(e) must shrink by roughly
2^4 = 16 when the coupling is halved (the neglected terms are O(e^4)).
"""

import io
from dataclasses import dataclass, field

import numpy as np

from .coeffs import build_coefficients
from .hilbert import (
    HBAR,
    DensityMatrix,
    build_operators,
    matrix_exp_unitary,
    trace_distance,
)
from .solvers import evolve_qbm

MAX_JOINT_DIM = 4096

GIBBS_TRUNCATION_TOL = 1e-4

COUPLING_FORMS = ("linear", "exponential")


@dataclass(frozen=True)
class Mode:
    omega: float
    coupling: float
    levels: int
    wavenumber: float = 0.0  # used by the exponential form only

    def __post_init__(self):
        if not (self.omega > 0 and np.isfinite(self.omega)):
            raise ValueError(f"mode frequency must be positive, got {self.omega}")
        if not np.isreal(self.coupling):
            raise ValueError("couplings must be real")
        if self.levels < 2:
            raise ValueError(f"mode needs >= 2 levels, got {self.levels}")


@dataclass(frozen=True)
class JointModel:
    """System of dimension d_s coupled to explicit modes.

    linear form:       H_int = sum_j coupling_j * x (x) (b_j + b_j^dag)
    exponential form:  H_int = sum_j coupling_j * (e^{i k_j x} (x) b_j + h.c.)
    """

    d_s: int
    modes: tuple
    form: str = "linear"

    def __post_init__(self):
        if self.d_s < 2:
            raise ValueError(f"d_s must be >= 2, got {self.d_s}")
        if not self.modes:
            raise ValueError("need at least one mode")
        modes = tuple(m if isinstance(m, Mode) else Mode(*m) for m in self.modes)
        object.__setattr__(self, "modes", modes)
        if self.form not in COUPLING_FORMS:
            raise ValueError(f"form must be one of {COUPLING_FORMS}, got {self.form!r}")
        if self.dim > MAX_JOINT_DIM:
            raise ValueError(
                f"joint dimension {self.dim} exceeds the exact-diagonalization "
                f"budget {MAX_JOINT_DIM}"
            )

    @property
    def dims(self):
        return (self.d_s,) + tuple(m.levels for m in self.modes)

    @property
    def dim(self):
        out = self.d_s
        for m in self.modes:
            out *= m.levels
        return out

    def scaled(self, factor):
        """Same model with every coupling multiplied by ``factor``."""
        modes = tuple(Mode(m.omega, factor * m.coupling, m.levels, m.wavenumber)
                      for m in self.modes)
        return JointModel(self.d_s, modes, self.form)


def default_joint(d_s=8):
    """The stock validation target: three off-resonant modes straddling the
    system frequency, weak enough for the perturbative window, strong
    enough that delta(e) clears the integrator floor by orders of
    magnitude."""
    return JointModel(d_s, (Mode(0.6, 0.05, 5), Mode(1.3, 0.0625, 5),
                            Mode(2.1, 0.0375, 5)))


def _embed(op, site, dims):
    out = np.array([[1.0 + 0.0j]])
    for i, d in enumerate(dims):
        out = np.kron(out, op if i == site else np.eye(d, dtype=complex))
    return out


def joint_hamiltonian(joint, params):
    """Dense joint Hamiltonian (and the site dims) for ``joint``."""
    if params.d != joint.d_s:
        raise ValueError(f"params.d={params.d} must equal joint.d_s={joint.d_s}")
    dims = joint.dims
    ops = build_operators(params)
    h = _embed(ops.H, 0, dims)
    for j, mode in enumerate(joint.modes, start=1):
        lv = mode.levels
        b = np.diag(np.sqrt(np.arange(1.0, lv)), 1).astype(complex)
        n_op = np.diag(np.arange(lv, dtype=float)).astype(complex)
        h += HBAR * mode.omega * _embed(n_op + 0.5 * np.eye(lv), j, dims)
        if joint.form == "linear":
            sys_op = ops.x
            h += mode.coupling * _embed(sys_op, 0, dims) @ _embed(b + b.conj().T, j, dims)
        else:
            u = matrix_exp_unitary(ops.x, mode.wavenumber)
            term = mode.coupling * _embed(u, 0, dims) @ _embed(b, j, dims)
            h += term + term.conj().T
    return h, dims


def _mode_gibbs(mode, temperature):
    """Truncated per-mode Gibbs weights and the truncated mass."""
    if temperature <= 0:
        w = np.zeros(mode.levels)
        w[0] = 1.0
        return w, 1.0
    x = np.exp(-HBAR * mode.omega / temperature)
    w = x ** np.arange(mode.levels) * (1.0 - x)
    return w, float(w.sum())


def _initial_members(joint, rho0_system, bath_state):
    """Decompose the initial condition into weighted pure product states.

    Returns (weights, columns) where columns[:, i] is a joint vector.
    Summation order is fixed (system eigenvectors outer loop, mode level
    configurations in lexicographic order) so results are bit-for-bit
    reproducible.
    """
    rho0 = rho0_system.mat if isinstance(rho0_system, DensityMatrix) else rho0_system
    w_sys, v_sys = np.linalg.eigh(np.asarray(rho0, dtype=complex))
    keep = w_sys > 1e-14
    w_sys, v_sys = w_sys[keep], v_sys[:, keep]

    if bath_state == "vacuum":
        mode_weights = [_mode_gibbs(m, 0.0)[0] for m in joint.modes]
    else:
        kind, temperature = bath_state
        if kind != "fock_ensemble":
            raise ValueError(f"unknown bath state {bath_state!r}")
        mode_weights, retained = [], 1.0
        for m in joint.modes:
            w, mass = _mode_gibbs(m, temperature)
            retained *= mass
            mode_weights.append(w / mass)
        dropped = 1.0 - retained
        if dropped > GIBBS_TRUNCATION_TOL:
            raise ValueError(
                f"mode truncation drops {dropped:.3e} of the Gibbs weight "
                f"(limit {GIBBS_TRUNCATION_TOL:.0e}); raise mode levels"
            )

    configs = [()]
    for w in mode_weights:
        configs = [c + (i,) for c in configs for i in range(w.size)]
    weights, columns = [], []
    dims = joint.dims
    for si in range(w_sys.size):
        for cfg in configs:
            wgt = float(w_sys[si])
            for j, level in enumerate(cfg):
                wgt *= float(mode_weights[j][level])
            if wgt <= 1e-16:
                continue
            vec = v_sys[:, si]
            for j, level in enumerate(cfg):
                e = np.zeros(dims[j + 1], dtype=complex)
                e[level] = 1.0
                vec = np.kron(vec, e)
            weights.append(wgt)
            columns.append(vec)
    return np.array(weights), np.stack(columns, axis=1)


def evolve_exact(joint, params, rho0_system, t_grid, bath_state="vacuum"):
    """Exact reduced states of the system at ``t_grid``.

    One dense diagonalization, then every ensemble member is a phase
    rotation in the eigenbasis. The reduced matrix is the weighted average
    of the members' partial traces.
    """
    h, dims = joint_hamiltonian(joint, params)
    evals, evecs = np.linalg.eigh(h)
    weights, cols = _initial_members(joint, rho0_system, bath_state)
    c0 = evecs.conj().T @ cols  # (D, n_members)
    d_s = dims[0]
    d_env = int(np.prod(dims[1:]))
    out = []
    for t in np.asarray(t_grid, dtype=float):
        psi = evecs @ (np.exp(-1j * evals * t / HBAR)[:, None] * c0)
        blocks = psi.reshape(d_s, d_env, -1)
        rho = np.einsum("aem,bem,m->ab", blocks, blocks.conj(), weights)
        out.append(0.5 * (rho + rho.conj().T))
    return out


@dataclass(frozen=True)
class ModeKernelModel:
    """Duck-typed stand-in for a bath model when kernels come from the
    discrete modes themselves (so master and oracle share the exact same
    environment, discretization error excluded by construction)."""

    omegas: tuple
    couplings: tuple
    temperature: float = 0.0
    e2: float = 1.0


@dataclass(frozen=True)
class ModeKernels:
    model: ModeKernelModel
    t: np.ndarray = field(repr=False)
    f_r: np.ndarray = field(repr=False)
    f_h: np.ndarray = field(repr=False)


def mode_kernel_table(joint, t_grid, temperature=0.0):
    """Kernels generated by the discrete modes:

        F_R(t) = sum_j c_j^2 sin(w_j t)
        F_H(t) = sum_j c_j^2 (1 + 2 N_j) cos(w_j t)

    The coupling is carried by c_j, so the companion e^2 is 1.
    """
    t = np.asarray(t_grid, dtype=float)
    oms = np.array([m.omega for m in joint.modes])
    lams = np.array([m.coupling for m in joint.modes])
    if temperature > 0:
        nocc = 1.0 / np.expm1(HBAR * oms / temperature)
    else:
        nocc = np.zeros_like(oms)
    f_r = (lams**2) @ np.sin(np.outer(oms, t))
    f_h = (lams**2 * (1.0 + 2.0 * nocc)) @ np.cos(np.outer(oms, t))
    model = ModeKernelModel(tuple(oms), tuple(lams), temperature, 1.0)
    return ModeKernels(model, t, f_r, f_h)


@dataclass(frozen=True)
class ScalingReport:
    multipliers: np.ndarray
    deltas: np.ndarray
    ratios: np.ndarray
    monotone: bool


def perturbative_scaling_check(joint, params, rho0_system, t_star,
                               dt=None, multipliers=(1.0, 0.5, 0.25),
                               bath_state="vacuum", engine=None):
    """Gap to the exact reference across a coupling ladder.

    ``engine(rho0, kernels, params, t_star, dt) -> final matrix`` defaults
    to the coefficient-form master equation fed by ``mode_kernel_table``
    (rebuilt per rung, so the master equation always sees the same modes
    the oracle diagonalizes). A non-monotone delta(e) almost always means
    a bug or a truncation artifact and is flagged on the report.
    """
    if dt is None:
        dt = params.period / 400.0
    multipliers = np.asarray(multipliers, dtype=float)
    if np.any(np.diff(multipliers) >= 0):
        raise ValueError("multipliers must be strictly decreasing")
    temperature = 0.0 if bath_state == "vacuum" else bath_state[1]

    if engine is None:
        def engine(rho0, kernels, prm, ts, step):
            table = build_coefficients(kernels, prm, e2=1.0)
            ops = build_operators(prm)
            traj = evolve_qbm(rho0, table, ops, ts, step)
            return traj.final

    # snap the comparison time onto the step lattice so the two sides are
    # evaluated at the same instant (a half-step offset would swamp delta)
    nsteps = int(np.ceil(t_star / dt - 1e-9))
    t_end = nsteps * dt
    knots = np.linspace(0.0, t_end, 2 * nsteps + 1)
    deltas = []
    for mult in multipliers:
        scaled = joint.scaled(float(mult))
        exact = evolve_exact(scaled, params, rho0_system, [t_end], bath_state)[0]
        kernels = mode_kernel_table(scaled, knots, temperature)
        approx = engine(rho0_system, kernels, params, t_end, dt)
        deltas.append(trace_distance(exact, approx))
    deltas = np.array(deltas)
    ratios = deltas[:-1] / deltas[1:]
    monotone = bool(np.all(np.diff(deltas) < 0))
    return ScalingReport(multipliers, deltas, ratios, monotone)


def purity_loss_bound(joint, params):
    """Perturbative cap on the joint-vacuum purity loss.

    The vacuum is not stationary (the counter-rotating part of the
    coupling drives |0,0> <-> |1_s, 1_j>), but each such transition is a
    detuned Rabi flop with amplitude <= 2 c_j x01 / (Omega + w_j), so

        1 - purity <= 8 * sum_j (c_j * x01 / (Omega + w_j))^2.
    """
    x01 = np.sqrt(HBAR / (2.0 * params.m * params.omega))
    total = 0.0
    for m in joint.modes:
        total += (m.coupling * x01 / (params.omega + m.omega)) ** 2
    return 8.0 * total


def scaling_csv(report):
    """CSV text: multiplier, delta, ratio-to-next (blank on the last row)."""
    buf = io.StringIO()
    buf.write("e,delta,ratio\n")
    n = report.multipliers.size
    for i in range(n):
        ratio = f"{report.ratios[i]:.17g}" if i < n - 1 else ""
        buf.write(f"{report.multipliers[i]:.17g},{report.deltas[i]:.17g},{ratio}\n")
    return buf.getvalue()
