"""Truncated-oscillator Hilbert space: operators, states, and metrics.

Everything downstream works in the energy eigenbasis of a single harmonic
oscillator truncated to the lowest ``d`` levels. Operators are built once,
frozen (read-only arrays), and passed around; states are validated density
matrices. All tolerances used for validation are module constants so tests
and callers see the same numbers.

Units: hbar = 1 throughout.
"""

from dataclasses import dataclass, field

import numpy as np

HBAR = 1.0

TRACE_TOL = 1e-12
HERM_TOL = 1e-12
EIG_FLOOR = -1e-9
TAIL_TOL = 1e-10
ENTROPY_EIG_FLOOR = 1e-14
UNSAFE_OCC = 1e-6


@dataclass(frozen=True)
class SystemParams:
    """Mass, frequency and truncation dimension of the central oscillator."""

    m: float = 1.0
    omega: float = 1.0
    d: int = 16

    def __post_init__(self):
        if not (self.m > 0 and np.isfinite(self.m)):
            raise ValueError(f"mass must be positive, got {self.m}")
        if not (self.omega > 0 and np.isfinite(self.omega)):
            raise ValueError(f"frequency must be positive, got {self.omega}")
        if not (isinstance(self.d, (int, np.integer)) and self.d >= 2):
            raise ValueError(f"dimension must be an integer >= 2, got {self.d}")

    @property
    def period(self):
        return 2.0 * np.pi / self.omega


@dataclass(frozen=True)
class OperatorSet:
    """Frozen matrix representations on the truncated basis.

    ``x`` and ``p`` satisfy [x, p] = i*hbar on the upper-left (d-1) block;
    the last row/column carries the unavoidable truncation defect.
    ``bohr`` is the antisymmetric matrix of transition frequencies
    (E_n - E_m)/hbar.
    """

    params: SystemParams
    a: np.ndarray = field(repr=False)
    a_dag: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    H: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)
    bohr: np.ndarray = field(repr=False)

    @property
    def d(self):
        return self.params.d


def build_operators(params):
    """Construct the frozen OperatorSet for ``params``."""
    d, m, om = params.d, params.m, params.omega
    a = np.zeros((d, d), dtype=complex)
    for n in range(d - 1):
        a[n, n + 1] = np.sqrt(n + 1.0)
    a_dag = a.conj().T.copy()
    x = np.sqrt(HBAR / (2.0 * m * om)) * (a + a_dag)
    p = 1j * np.sqrt(HBAR * m * om / 2.0) * (a_dag - a)
    energies = HBAR * om * (np.arange(d) + 0.5)
    H = np.diag(energies).astype(complex)
    bohr = (energies[:, None] - energies[None, :]) / HBAR
    ops = OperatorSet(params, a, a_dag, x, p, H, energies, bohr)
    for arr in (ops.a, ops.a_dag, ops.x, ops.p, ops.H, ops.energies, ops.bohr):
        arr.setflags(write=False)
    return ops


class DensityMatrix:
    """A validated state. Construction rejects anything that is not a
    trace-one, Hermitian, positive-semidefinite matrix (within the module
    tolerances). The stored array is read-only."""

    def __init__(self, mat, check=True):
        mat = np.array(mat, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {mat.shape}")
        if check:
            tr = np.trace(mat)
            if abs(tr - 1.0) > TRACE_TOL:
                raise ValueError(f"trace deviates from 1 by {abs(tr - 1.0):.3e}")
            herm = np.max(np.abs(mat - mat.conj().T))
            if herm > HERM_TOL:
                raise ValueError(f"Hermiticity defect {herm:.3e}")
            lo = float(np.linalg.eigvalsh(mat).min())
            if lo < EIG_FLOOR:
                raise ValueError(f"negative eigenvalue {lo:.3e}")
        mat.setflags(write=False)
        self.mat = mat

    @property
    def d(self):
        return self.mat.shape[0]

    @classmethod
    def from_vector(cls, psi):
        psi = np.asarray(psi, dtype=complex)
        nrm = np.linalg.norm(psi)
        if nrm == 0:
            raise ValueError("zero vector")
        psi = psi / nrm
        return cls(np.outer(psi, psi.conj()), check=False)

    def purity(self):
        return float(np.real(np.trace(self.mat @ self.mat)))

    def diag_populations(self):
        return np.real(np.diag(self.mat)).copy()


def coherent_vector(alpha, d):
    """Amplitudes <n|alpha> for n < d, normalized on the truncated basis.

    Rejects parameters whose weight beyond the cutoff exceeds TAIL_TOL:
    the truncated basis cannot represent such a state faithfully.
    """
    alpha = complex(alpha)
    if alpha == 0:
        amp = np.zeros(d, dtype=complex)
        amp[0] = 1.0
    else:
        n = np.arange(d)
        # log-domain to stay finite for large |alpha|; the complex log keeps
        # negative real alpha off the real-log branch cut
        logamp = (
            -0.5 * abs(alpha) ** 2
            + n * np.log(alpha)
            - 0.5 * np.cumsum(np.log(np.maximum(n, 1)))
        )
        amp = np.exp(logamp)
    tail = 1.0 - float(np.sum(np.abs(amp) ** 2))
    if tail > TAIL_TOL:
        raise ValueError(
            f"coherent amplitude |alpha|={abs(alpha):.4g} leaves weight "
            f"{tail:.3e} beyond the d={d} cutoff (limit {TAIL_TOL:.0e})"
        )
    return amp / np.linalg.norm(amp)


def coherent_state(alpha, d):
    return DensityMatrix.from_vector(coherent_vector(alpha, d))


def number_state(n, d):
    if not 0 <= n < d:
        raise ValueError(f"level {n} outside truncated basis of size {d}")
    psi = np.zeros(d, dtype=complex)
    psi[n] = 1.0
    return DensityMatrix.from_vector(psi)


def superposition_state(n, m, d, phase=0.0):
    """(|n> + e^{i*phase}|m>)/sqrt(2)."""
    if n == m:
        raise ValueError("superposition needs two distinct levels")
    psi = np.zeros(d, dtype=complex)
    psi[n] = 1.0
    psi[m] = np.exp(1j * phase)
    return DensityMatrix.from_vector(psi)


def _as_matrix(rho):
    return rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def von_neumann_entropy(rho):
    """-Tr rho ln rho. Eigenvalues below ENTROPY_EIG_FLOOR contribute zero;
    eigenvalues below EIG_FLOOR mean the state is corrupted and raise."""
    w = np.linalg.eigvalsh(_as_matrix(rho))
    if w.min() < EIG_FLOOR:
        raise ValueError(f"negative eigenvalue {w.min():.3e}: state is corrupted")
    w = w[w > ENTROPY_EIG_FLOOR]
    return float(-np.sum(w * np.log(w)))


def linear_entropy(rho):
    """1 - Tr rho^2."""
    mat = _as_matrix(rho)
    return float(1.0 - np.real(np.trace(mat @ mat)))


def trace_distance(rho, sigma):
    """(1/2) * sum of |eigenvalues| of rho - sigma."""
    a, b = _as_matrix(rho), _as_matrix(sigma)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {b.shape}")
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(a - b))))


def matrix_exp_unitary(gen, scale=1.0):
    """exp(i * scale * gen) for Hermitian ``gen``, via eigendecomposition."""
    gen = np.asarray(gen, dtype=complex)
    defect = np.max(np.abs(gen - gen.conj().T))
    if defect > HERM_TOL:
        raise ValueError(f"generator is not Hermitian (defect {defect:.3e})")
    w, v = np.linalg.eigh(gen)
    return (v * np.exp(1j * scale * w)) @ v.conj().T


def hermitize(mat):
    """Project onto the Hermitian part: (M + M^dag)/2."""
    return 0.5 * (mat + mat.conj().T)


def top_occupation(mat):
    """Population of the two highest levels; the truncation-safety monitor.

    One edge level alone can sit at an artificial zero of a state's number
    distribution, so the monitor watches the top two.
    """
    mat = _as_matrix(mat)
    return float(np.real(mat[-1, -1] + mat[-2, -2]))
