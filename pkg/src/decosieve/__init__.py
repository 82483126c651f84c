"""decosieve: a numerical laboratory for open-oscillator decoherence.

A single harmonic oscillator coupled to a scalar-field environment,
integrated with memory-kernel master equations in three equivalent-to-
second-order forms, validated against exact few-mode references, and fed
into a predictability sieve that ranks candidate pointer states by how
slowly they entangle with the environment.
"""

from .backend import BACKEND
from .bath import BathModel, KernelTable, build_kernel_table
from .coeffs import CoefficientTable, adiabatic_closed_form, build_coefficients
from .errors import ConfigError, DegeneracyError, QuadratureError, TruncationError
from .hilbert import (
    DensityMatrix,
    OperatorSet,
    SystemParams,
    build_operators,
    coherent_state,
    linear_entropy,
    number_state,
    superposition_state,
    trace_distance,
    von_neumann_entropy,
)
from .oracle import JointModel, default_joint, evolve_exact, perturbative_scaling_check
from .sieve import StateFamily, minimize_entropy, run_sieve
from .solvers import (
    ChannelSet,
    Trajectory,
    build_channel_set,
    evolve_channels,
    evolve_qbm,
    evolve_secular,
    secular_rates,
    step_halving_check,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BathModel",
    "KernelTable",
    "build_kernel_table",
    "CoefficientTable",
    "adiabatic_closed_form",
    "build_coefficients",
    "ConfigError",
    "DegeneracyError",
    "QuadratureError",
    "TruncationError",
    "DensityMatrix",
    "OperatorSet",
    "SystemParams",
    "build_operators",
    "coherent_state",
    "linear_entropy",
    "number_state",
    "superposition_state",
    "trace_distance",
    "von_neumann_entropy",
    "JointModel",
    "default_joint",
    "evolve_exact",
    "perturbative_scaling_check",
    "StateFamily",
    "minimize_entropy",
    "run_sieve",
    "ChannelSet",
    "Trajectory",
    "build_channel_set",
    "evolve_channels",
    "evolve_qbm",
    "evolve_secular",
    "secular_rates",
    "step_halving_check",
    "__version__",
]
