"""Master-equation engines.

Three views of the same weak-coupling dynamics, all second order in the
system-environment coupling and all integrated with classical RK4:

* ``evolve_channels`` — channel-resolved form. Each quadrature node of the
  environment keeps its own running memory integral against the unitary
  coupling operator S_j = exp(i k_j x); nothing about the kernels is
  approximated beyond the node discretization.
* ``evolve_qbm`` — coefficient form. The memory integrals are carried out
  against the free quadrature trajectories once, leaving four scalar
  coefficients (frequency shift, friction, two diffusions) applied through
  fixed commutator shapes.
* ``evolve_secular`` — energy-basis form after dropping all couplings
  between distinct off-diagonal elements. Each coherence decays with its
  own Gaussian factor exp(-gamma2_nm t^2 / 2); populations freeze. This is
  closed-form, with an optional RK4 mode that reinstates the neglected
  cross couplings as a diagnostic.

Both RK4 engines work in the interaction picture: the integrator never
sees the fast free rotation, so its truncation error rides on the small
dissipative generator and positivity violations stay at rounding level
instead of step-size level. Snapshots are rotated back to the lab frame.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .bath import dispersion, occupation, quadrature_nodes, window_profile
from .coeffs import CoefficientTable
from .errors import DegeneracyError, TruncationError
from .hilbert import HBAR, DensityMatrix, hermitize, linear_entropy, top_occupation, trace_distance

MIN_STEPS_PER_PERIOD = 200

TRACE_ABORT = 1e-6
OCC_ABORT = 1e-6

DEGENERACY_TOL = 1e-9


def _as_state(rho0, d):
    mat = rho0.mat if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
    if mat.shape != (d, d):
        raise ValueError(f"state shape {mat.shape} does not match operators ({d}, {d})")
    return np.array(mat, dtype=complex)


def _check_dt(dt, period, allow_coarse_step):
    if dt <= 0:
        raise ValueError("dt must be positive")
    limit = period / MIN_STEPS_PER_PERIOD
    if dt > limit * (1.0 + 1e-9) and not allow_coarse_step:
        raise ValueError(
            f"dt={dt:.4g} exceeds period/{MIN_STEPS_PER_PERIOD} = {limit:.4g}; "
            "pass allow_coarse_step=True only for convergence studies"
        )


@dataclass(frozen=True)
class Trajectory:
    """Snapshots (lab frame) plus per-snapshot diagnostics."""

    t: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)  # (n_snap, d, d)
    trace_err: np.ndarray = field(repr=False)
    top_occ: np.ndarray = field(repr=False)
    entropy: np.ndarray = field(repr=False)  # linear entropy
    engine: str = ""
    backend_name: str = ""

    @property
    def final(self):
        return self.states[-1]

    def min_eigenvalue(self):
        return float(min(np.linalg.eigvalsh(s).min() for s in self.states))

    def max_hermiticity_defect(self):
        return float(max(np.max(np.abs(s - s.conj().T)) for s in self.states))

    def element(self, n, m):
        return self.states[:, n, m].copy()


def trajectory_csv(traj, elements=((0, 1),)):
    """CSV text: t, Re/Im of the selected elements, then diagnostics."""
    cols = []
    for n, m in elements:
        cols.append(f"re_rho_{n}_{m}")
        cols.append(f"im_rho_{n}_{m}")
    buf = io.StringIO()
    buf.write("t," + ",".join(cols) + ",entropy,trace_err,top_occ\n")
    for i in range(traj.t.size):
        row = [f"{traj.t[i]:.17g}"]
        for n, m in elements:
            z = traj.states[i, n, m]
            row.append(f"{z.real:.17g}")
            row.append(f"{z.imag:.17g}")
        row.append(f"{traj.entropy[i]:.17g}")
        row.append(f"{traj.trace_err[i]:.17g}")
        row.append(f"{traj.top_occ[i]:.17g}")
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


class _SnapshotWriter:
    """Collects lab-frame snapshots and enforces the abort monitors."""

    def __init__(self, energies, stride, engine):
        self.energies = energies
        self.stride = stride
        self.engine = engine
        self.t = []
        self.states = []

    def monitor(self, rt, t):
        tr_err = abs(np.trace(rt) - 1.0)
        occ = top_occupation(rt)  # diagonal is frame-invariant
        if tr_err > TRACE_ABORT:
            raise TruncationError(
                f"trace drifted by {tr_err:.3e} at t={t:.6g} "
                f"(abort threshold {TRACE_ABORT:.0e}); reduce dt",
                report={"t": t, "trace_err": tr_err, "top_occ": occ},
            )
        if occ > OCC_ABORT:
            raise TruncationError(
                f"top-of-basis occupation {occ:.3e} at t={t:.6g} "
                f"(abort threshold {OCC_ABORT:.0e}); enlarge d",
                report={"t": t, "trace_err": tr_err, "top_occ": occ},
            )

    def take(self, rt, t):
        ph = np.exp(-1j * self.energies * t / HBAR)
        rho = (ph[:, None] * rt) * ph.conj()[None, :]
        self.t.append(t)
        self.states.append(rho)

    def build(self):
        t = np.array(self.t)
        states = np.array(self.states)
        trace_err = np.array([abs(np.trace(s) - 1.0) for s in states])
        occ = np.array([top_occupation(s) for s in states])
        ent = np.array([linear_entropy(s) for s in states])
        return Trajectory(t, states, trace_err, occ, ent, self.engine, backend.BACKEND)


@dataclass(frozen=True)
class ChannelSet:
    """Quadrature-node channels: unitary couplings and kernel amplitudes.

    ``amp_h``/``amp_r`` carry the full weights (quadrature weight, window,
    thermal factor, e^2) so that the per-channel kernel samples are
    c_j(t) = amp_h_j cos(w_j t) and c'_j(t) = amp_r_j sin(w_j t).
    """

    k: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)
    amp_h: np.ndarray = field(repr=False)
    amp_r: np.ndarray = field(repr=False)
    S: np.ndarray = field(repr=False)
    S_dag: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)

    @property
    def n_channels(self):
        return self.k.size

    @property
    def d(self):
        return self.S.shape[1]

    def c(self, t):
        return self.amp_h * np.cos(self.omega * t)

    def c_prime(self, t):
        return self.amp_r * np.sin(self.omega * t)

    def c_frozen(self):
        """c_j(0): the frozen-kernel weights used by the secular rates."""
        return self.amp_h.copy()


def build_channel_set(model, ops):
    """Assemble the channels for bath ``model`` against operator set ``ops``.

    The coupling unitaries are built by exponentiating the (Hermitian)
    truncated position operator, so they are exactly unitary on the
    truncated basis even though exp(i k x) on the full line is not block
    diagonal. Each S_j is verified unitary to 1e-12.
    """
    k, w = quadrature_nodes(model)
    om = dispersion(k, model)
    wsq = window_profile(k, model) ** 2
    nocc = occupation(om, model.temperature)
    amp_h = (model.e2 / HBAR**2) * w * wsq * (1.0 + 2.0 * nocc) / (2.0 * om)
    amp_r = (model.e2 / HBAR**2) * w * wsq / (2.0 * om)
    ev, vecs = np.linalg.eigh(ops.x)
    d = ops.d
    S = np.empty((k.size, d, d), dtype=complex)
    eye = np.eye(d)
    for j in range(k.size):
        S[j] = (vecs * np.exp(1j * k[j] * ev)) @ vecs.conj().T
        defect = np.max(np.abs(S[j].conj().T @ S[j] - eye))
        if defect > 1e-12:
            raise ValueError(f"channel {j}: coupling unitarity defect {defect:.3e}")
    S_dag = S.conj().transpose(0, 2, 1).copy()
    energies = ops.energies.copy()
    for arr in (k, w, om, amp_h, amp_r, S, S_dag, energies):
        arr.setflags(write=False)
    return ChannelSet(k, om, amp_h, amp_r, S, S_dag, energies)


def evolve_channels(rho0, channels, params, t_max, dt, snapshot_stride=1,
                    allow_coarse_step=False):
    """Channel-resolved engine.

    Each channel's memory integral is advanced alongside the state with
    composite Simpson on a quarter-step lattice (two half-panels per RK4
    step), so the memory is available at the half-step stage times with
    the same fourth-order accuracy as the state itself.
    """
    _check_dt(dt, params.period, allow_coarse_step)
    d = channels.d
    rt = _as_state(rho0, d)
    energies = channels.energies
    nsteps = int(round(t_max / dt))
    if abs(nsteps * dt - t_max) > 1e-9 * max(t_max, 1.0):
        raise ValueError("t_max must be an integer number of steps")

    h = dt / 4.0
    nj = channels.n_channels
    mem_m = np.zeros((nj, d, d), dtype=complex)
    mem_n = np.zeros((nj, d, d), dtype=complex)
    s_dag = channels.S_dag
    s_op = channels.S

    def memory_slice(tau):
        u = np.exp(-1j * energies * tau / HBAR)
        phi = u[:, None] * u.conj()[None, :]
        base = s_dag * phi
        ch = channels.c(tau)
        cr = channels.c_prime(tau)
        gm = (ch - 1j * cr)[:, None, None] * base
        gn = (ch + 1j * cr)[:, None, None] * base
        return gm, gn

    writer = _SnapshotWriter(energies, snapshot_stride, "channels")
    writer.take(rt, 0.0)
    for step in range(nsteps):
        t0 = step * dt
        gm0, gn0 = memory_slice(t0)
        gma, gna = memory_slice(t0 + h)
        gmb, gnb = memory_slice(t0 + 2 * h)
        gmc, gnc = memory_slice(t0 + 3 * h)
        gm2, gn2 = memory_slice(t0 + 4 * h)
        m_half = mem_m + (h / 3.0) * (gm0 + 4.0 * gma + gmb)
        n_half = mem_n + (h / 3.0) * (gn0 + 4.0 * gna + gnb)
        m_full = m_half + (h / 3.0) * (gmb + 4.0 * gmc + gm2)
        n_full = n_half + (h / 3.0) * (gnb + 4.0 * gnc + gn2)

        def rhs(r, ms, ns, t):
            ph = np.exp(1j * energies * t / HBAR)
            return backend.channel_rhs(s_op, ms, ns, ph, np.ascontiguousarray(r))

        k1 = rhs(rt, mem_m, mem_n, t0)
        k2 = rhs(rt + 0.5 * dt * k1, m_half, n_half, t0 + 0.5 * dt)
        k3 = rhs(rt + 0.5 * dt * k2, m_half, n_half, t0 + 0.5 * dt)
        k4 = rhs(rt + dt * k3, m_full, n_full, t0 + dt)
        rt = rt + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rt = hermitize(rt)
        mem_m, mem_n = m_full, n_full

        t_now = (step + 1) * dt
        writer.monitor(rt, t_now)
        if (step + 1) % snapshot_stride == 0 or step == nsteps - 1:
            writer.take(rt, t_now)
    return writer.build()


def evolve_qbm(rho0, table, ops, t_max, dt, snapshot_stride=1,
               allow_coarse_step=False, anomalous_sign=+1.0):
    """Coefficient-form engine.

    Coefficients are linearly interpolated from ``table`` at the RK4 stage
    times; tabulating on a dt/2 lattice makes that interpolation exact.

    ``anomalous_sign`` multiplies the anomalous-diffusion term. The
    conventional derivation prints that term with a minus sign, but
    benchmarking against numerically exact joint evolution shows the
    printed sign leaves a first-order residual while the opposite sign
    converges at the expected second order — so +1 is the default and the
    knob exists to reproduce the conventional behavior.
    """
    params = ops.params
    _check_dt(dt, params.period, allow_coarse_step)
    d = ops.d
    rt = _as_state(rho0, d)
    if not isinstance(table, CoefficientTable):
        raise TypeError("table must be a CoefficientTable")
    if table.t_max < t_max * (1.0 - 1e-12):
        raise ValueError(
            f"coefficient table ends at t={table.t_max:.6g} < t_max={t_max:.6g}"
        )
    nsteps = int(round(t_max / dt))
    if abs(nsteps * dt - t_max) > 1e-9 * max(t_max, 1.0):
        raise ValueError("t_max must be an integer number of steps")

    m, om = params.m, params.omega
    x_op, p_op = ops.x, ops.p
    tt = table.t

    def rhs(r, t):
        om2 = np.interp(t, tt, table.omega_ren_sq)
        ga = np.interp(t, tt, table.gamma)
        dd = np.interp(t, tt, table.D)
        ff = np.interp(t, tt, table.f)
        co, si = np.cos(om * t), np.sin(om * t)
        xt = np.ascontiguousarray(x_op * co + (p_op / (m * om)) * si)
        pt = np.ascontiguousarray(p_op * co - (m * om) * x_op * si)
        return backend.qbm_rhs(
            xt, pt, np.ascontiguousarray(r),
            0.5 * m * om2 / HBAR, ga, dd, anomalous_sign * ff,
        )

    writer = _SnapshotWriter(ops.energies, snapshot_stride, "qbm")
    writer.take(rt, 0.0)
    for step in range(nsteps):
        t0 = step * dt
        k1 = rhs(rt, t0)
        k2 = rhs(rt + 0.5 * dt * k1, t0 + 0.5 * dt)
        k3 = rhs(rt + 0.5 * dt * k2, t0 + 0.5 * dt)
        k4 = rhs(rt + dt * k3, t0 + dt)
        rt = rt + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rt = hermitize(rt)
        t_now = (step + 1) * dt
        writer.monitor(rt, t_now)
        if (step + 1) % snapshot_stride == 0 or step == nsteps - 1:
            writer.take(rt, t_now)
    return writer.build()


@dataclass(frozen=True)
class SecularRates:
    """Frozen-kernel energy-basis decay rates and neglected couplings.

    ``gamma_sq[n, m]`` drives exp(-gamma_sq * t^2 / 2) on rho_nm. The
    cross tensors ``cross_a``/``cross_b`` hold the couplings the secular
    approximation throws away; they are diagnostics for judging when that
    is justified, not part of the closed-form evolution.
    """

    gamma_sq: np.ndarray = field(repr=False)
    cross_a: np.ndarray = field(repr=False)
    cross_b: np.ndarray = field(repr=False)
    bohr: np.ndarray = field(repr=False)
    averaging_period: float = 0.0


def secular_rates(channels, ops):
    """Gaussian decay rates gamma2_nm = sum_j c_j(0) |S_j,nn - S_j,mm|^2.

    Valid only on a nondegenerate spectrum: degenerate levels make the
    time averaging that kills the cross terms ill-defined, so they are
    rejected rather than silently averaged over.
    """
    energies = ops.energies
    d = energies.size
    gaps = np.abs(energies[:, None] - energies[None, :])
    bad = [(n, mm) for n in range(d) for mm in range(n + 1, d)
           if gaps[n, mm] < DEGENERACY_TOL]
    if bad:
        raise DegeneracyError(
            f"{len(bad)} degenerate level pair(s), first {bad[0]}: secular "
            "averaging is ill-defined", pairs=bad,
        )
    cbar = channels.c_frozen()
    diag = np.diagonal(channels.S, axis1=1, axis2=2)  # (J, d)
    diff = diag[:, :, None] - diag[:, None, :]  # (J, d, d)
    gamma_sq = np.einsum("j,jnm->nm", cbar, np.abs(diff) ** 2).real
    np.fill_diagonal(gamma_sq, 0.0)
    cross_a = np.einsum("j,jnl,jlm->lnm", cbar, channels.S, diff)
    cross_b = -np.einsum("j,jnl,jlm->lnm", cbar, diff, channels.S)
    bohr = ops.bohr.copy()
    gaps_off = gaps[~np.eye(d, dtype=bool)]
    period = 2.0 * np.pi * HBAR / float(gaps_off.min())
    for arr in (gamma_sq, cross_a, cross_b, bohr):
        arr.setflags(write=False)
    return SecularRates(gamma_sq, cross_a, cross_b, bohr, period)


def evolve_secular(rho0, rates, ops, t_max, dt, snapshot_stride=1,
                   include_cross=False, b_reading="ln"):
    """Energy-basis engine.

    Default: the exact closed form rho_nm(t) = rho_nm(0) *
    exp(-i w_nm t - gamma2_nm t^2 / 2), evaluated on the snapshot lattice
    (dt only sets that lattice). With ``include_cross`` the neglected
    couplings are reinstated and the system is integrated with RK4; the
    two ``b_reading`` conventions contract the B tensor against rho_ln or
    rho_ml respectively — the literature is ambiguous on this index order,
    so both are available for comparison.
    """
    d = ops.d
    r0 = _as_state(rho0, d)
    nsteps = int(round(t_max / dt))
    if abs(nsteps * dt - t_max) > 1e-9 * max(t_max, 1.0):
        raise ValueError("t_max must be an integer number of steps")

    if not include_cross:
        snap_steps = [0] + [s for s in range(1, nsteps + 1)
                            if s % snapshot_stride == 0 or s == nsteps]
        t_arr = np.array([s * dt for s in snap_steps])
        states = np.array([
            r0 * np.exp(-1j * rates.bohr * t - 0.5 * rates.gamma_sq * t * t)
            for t in t_arr
        ])
        trace_err = np.array([abs(np.trace(s) - 1.0) for s in states])
        occ = np.array([top_occupation(s) for s in states])
        ent = np.array([linear_entropy(s) for s in states])
        return Trajectory(t_arr, states, trace_err, occ, ent,
                          "secular", backend.BACKEND)

    if b_reading not in ("ln", "ml"):
        raise ValueError(f"b_reading must be 'ln' or 'ml', got {b_reading!r}")
    writer = _SnapshotWriter(np.zeros(d), snapshot_stride, "secular+cross")

    def rhs(r, t):
        out = (-1j * rates.bohr - rates.gamma_sq * t) * r
        out -= t * np.einsum("lnm,lm->nm", rates.cross_a, r)
        if b_reading == "ln":
            out -= t * np.einsum("lnm,ln->nm", rates.cross_b, r)
        else:
            out -= t * np.einsum("lnm,ml->nm", rates.cross_b, r)
        return out

    rt = r0
    writer.take(rt, 0.0)
    for step in range(nsteps):
        t0 = step * dt
        k1 = rhs(rt, t0)
        k2 = rhs(rt + 0.5 * dt * k1, t0 + 0.5 * dt)
        k3 = rhs(rt + 0.5 * dt * k2, t0 + 0.5 * dt)
        k4 = rhs(rt + dt * k3, t0 + dt)
        rt = rt + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rt = hermitize(rt)
        t_now = (step + 1) * dt
        writer.monitor(rt, t_now)
        if (step + 1) % snapshot_stride == 0 or step == nsteps - 1:
            writer.take(rt, t_now)
    return writer.build()


@dataclass(frozen=True)
class OrderCheck:
    dt: float
    d1: float
    d2: float

    @property
    def ratio(self):
        return self.d1 / self.d2


def step_halving_check(run, dt):
    """Richardson-style order probe: run at dt, dt/2, dt/4 and compare.

    ``run(dt)`` must return the final state (matrix). For a fourth-order
    one-step method the distance ratio d(dt, dt/2) / d(dt/2, dt/4) sits
    near 2^4 = 16 once dt is in the convergent regime.
    """
    r1 = run(dt)
    r2 = run(dt / 2.0)
    r4 = run(dt / 4.0)
    d1 = trace_distance(r1, r2)
    d2 = trace_distance(r2, r4)
    return OrderCheck(dt, d1, d2)


def rates_csv(rates):
    """CSV text of the gamma_sq matrix: row index n, columns m."""
    d = rates.gamma_sq.shape[0]
    buf = io.StringIO()
    buf.write("n," + ",".join(f"m{m}" for m in range(d)) + "\n")
    for n in range(d):
        buf.write(
            f"{n}," + ",".join(f"{rates.gamma_sq[n, m]:.17g}" for m in range(d)) + "\n"
        )
    return buf.getvalue()
