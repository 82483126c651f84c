"""Predictability sieve: rank candidate states by how little entropy the
open dynamics generates in them.

A state family is a finite, deterministically ordered grid of candidate
initial states. Each candidate is propagated with a caller-supplied engine
closure and scored by its time-averaged entropy over a fixed set of
checkpoints; the family is then ranked, lowest score first. States the
engine refuses (basis truncation, positivity loss) are excluded with the
reason recorded rather than silently dropped, and near-ties are reported
as ties instead of being broken by float noise.

``minimize_entropy`` turns the same score into a continuous optimization
over a family's parameters (coarse grid, then simplex refinement).
"""

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .errors import TruncationError
from .hilbert import (
    DensityMatrix,
    TAIL_TOL,
    coherent_state,
    linear_entropy,
    number_state,
    superposition_state,
    von_neumann_entropy,
)

FAMILY_KINDS = ("coherent_grid", "number_states", "two_state_superpositions",
                "squeezed_grid")

TIE_TOL = 1e-10

MEASURES = {"linear": linear_entropy, "vn": von_neumann_entropy}


def squeezed_vector(r, theta, d):
    """Amplitudes of the squeezed vacuum (r, theta) on d levels.

    Only even levels are populated: c_2j = (-e^{i theta} tanh r)^j *
    sqrt((2j)!) / (2^j j!) / sqrt(cosh r). Rejected like coherent states
    when the truncated tail exceeds TAIL_TOL.
    """
    amp = np.zeros(d, dtype=complex)
    z = -np.exp(1j * theta) * np.tanh(r)
    for j in range(0, (d - 1) // 2 + 1):
        logmag = 0.5 * math.lgamma(2 * j + 1) - j * math.log(2.0) - math.lgamma(j + 1)
        amp[2 * j] = z**j * math.exp(logmag)
    amp /= math.sqrt(math.cosh(r))
    tail = 1.0 - float(np.sum(np.abs(amp) ** 2))
    if tail > TAIL_TOL:
        raise ValueError(
            f"squeezing r={r:.4g} leaves weight {tail:.3e} beyond the "
            f"d={d} cutoff (limit {TAIL_TOL:.0e})"
        )
    return amp / np.linalg.norm(amp)


def squeezed_state(r, theta, d):
    return DensityMatrix.from_vector(squeezed_vector(r, theta, d))


@dataclass(frozen=True)
class StateFamily:
    """A named grid of candidate states.

    kind / parameters:
      number_states:             n_max
      coherent_grid:             amps (list of |alpha|), phases (radians)
      two_state_superpositions:  pairs (list of (n, m)), phases
      squeezed_grid:             rs, thetas
    """

    kind: str
    d: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"kind must be one of {FAMILY_KINDS}, got {self.kind!r}")

    def candidates(self):
        """Yield (label, param_dict) in deterministic order."""
        p = self.params
        if self.kind == "number_states":
            for n in range(int(p["n_max"]) + 1):
                yield f"number[{n}]", {"n": n}
        elif self.kind == "coherent_grid":
            for amp in p["amps"]:
                for ph in p["phases"]:
                    yield (f"coherent[{amp:.6g},{ph:.6g}]",
                           {"amp": float(amp), "phase": float(ph)})
        elif self.kind == "two_state_superpositions":
            for n, m in p["pairs"]:
                for ph in p["phases"]:
                    yield (f"super[{n},{m},{ph:.6g}]",
                           {"n": int(n), "m": int(m), "phase": float(ph)})
        else:
            for r in p["rs"]:
                for th in p["thetas"]:
                    yield (f"squeezed[{r:.6g},{th:.6g}]",
                           {"r": float(r), "theta": float(th)})

    def build(self, cand):
        if self.kind == "number_states":
            return number_state(cand["n"], self.d)
        if self.kind == "coherent_grid":
            alpha = cand["amp"] * np.exp(1j * cand["phase"])
            return coherent_state(alpha, self.d)
        if self.kind == "two_state_superpositions":
            return superposition_state(cand["n"], cand["m"], self.d, cand["phase"])
        return squeezed_state(cand["r"], cand["theta"], self.d)

    def generate(self):
        """All representable candidates plus the per-state rejections.

        Returns (states, rejected) where states is a list of
        (label, params, DensityMatrix) and rejected a list of
        (label, params, reason).
        """
        cands = list(self.candidates())
        if len(cands) < 2:
            raise ValueError("a family needs at least two candidates to rank")
        states, rejected = [], []
        for label, cand in cands:
            try:
                states.append((label, cand, self.build(cand)))
            except ValueError as exc:
                rejected.append((label, cand, str(exc)))
        return states, rejected


@dataclass(frozen=True)
class SieveRecord:
    label: str
    params: dict
    checkpoint_scores: np.ndarray = field(repr=False)
    score: float = np.nan
    rank: int = -1
    tied: bool = False
    excluded: str = None


@dataclass(frozen=True)
class SieveResult:
    records: tuple  # ranked SieveRecords, excluded ones at the end
    checkpoints: np.ndarray
    winners: tuple  # per-checkpoint winning label
    non_robust: bool  # winner changes across checkpoints
    degenerate: bool  # all surviving scores tie
    measure: str = "linear"

    @property
    def ranked(self):
        return tuple(r for r in self.records if r.excluded is None)

    @property
    def excluded(self):
        return tuple(r for r in self.records if r.excluded is not None)


def run_sieve(family, engine, checkpoints, measure="linear"):
    """Propagate every candidate and rank by time-averaged entropy.

    ``engine(rho0, checkpoints) -> list of matrices`` supplies the states
    at the checkpoint times. Engines may raise TruncationError for
    individual candidates; those become exclusions, not failures.
    """
    if measure not in MEASURES:
        raise ValueError(f"measure must be one of {tuple(MEASURES)}, got {measure!r}")
    mfun = MEASURES[measure]
    checkpoints = np.asarray(checkpoints, dtype=float)
    if checkpoints.size < 1 or np.any(checkpoints < 0):
        raise ValueError("checkpoints must be nonnegative times")

    states, rejected = family.generate()
    scored, excluded = [], []
    for label, cand, rho0 in states:
        try:
            snaps = engine(rho0, checkpoints)
        except TruncationError as exc:
            excluded.append(SieveRecord(label, cand, np.full(checkpoints.size, np.nan),
                                        np.nan, -1, False, str(exc)))
            continue
        curve = np.array([mfun(s) for s in snaps])
        scored.append(SieveRecord(label, cand, curve, float(curve.mean())))
    for label, cand, reason in rejected:
        excluded.append(SieveRecord(label, cand, np.full(checkpoints.size, np.nan),
                                    np.nan, -1, False, reason))

    if not scored:
        raise ValueError("every candidate was excluded; nothing to rank")

    scored.sort(key=lambda r: (r.score, r.label))
    ranked = []
    rank = 0
    prev_score = None
    for i, rec in enumerate(scored):
        tied_prev = prev_score is not None and abs(rec.score - prev_score) <= TIE_TOL
        if not tied_prev:
            rank = i + 1
        ranked.append(replace(rec, rank=rank, tied=tied_prev))
        prev_score = rec.score
    # mark the earlier member of each tie group too
    for i in range(len(ranked) - 1):
        if ranked[i + 1].tied and ranked[i + 1].rank == ranked[i].rank:
            ranked[i] = replace(ranked[i], tied=True)

    winners = []
    for ci in range(checkpoints.size):
        best = min(ranked, key=lambda r: (r.checkpoint_scores[ci], r.label))
        winners.append(best.label)
    # robust means the same candidate wins at every checkpoint AND overall
    non_robust = any(w != ranked[0].label for w in winners)
    scores = [r.score for r in ranked]
    degenerate = (max(scores) - min(scores)) <= TIE_TOL

    return SieveResult(tuple(ranked + excluded), checkpoints, tuple(winners),
                       bool(non_robust), bool(degenerate), measure)


def sieve_csv(result):
    """CSV text: label, parameters, score, rank, tie/robustness flags,
    per-checkpoint entropies, exclusion reason."""
    ncp = result.checkpoints.size
    head = ["label", "params", "score", "rank", "tied", "non_robust"]
    head += [f"entropy_cp{i}" for i in range(ncp)]
    head += ["excluded"]
    buf = io.StringIO()
    buf.write(",".join(head) + "\n")
    for r in result.records:
        params = ";".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                          for k, v in sorted(r.params.items()))
        row = [r.label, params]
        row.append("" if np.isnan(r.score) else f"{r.score:.17g}")
        row.append(str(r.rank) if r.rank > 0 else "")
        row.append(str(bool(r.tied)).lower())
        row.append(str(bool(result.non_robust)).lower())
        for c in r.checkpoint_scores:
            row.append("" if np.isnan(c) else f"{c:.17g}")
        reason = (r.excluded or "").replace(",", ";").replace("\n", " ")
        row.append(reason)
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


@dataclass(frozen=True)
class MinimizeResult:
    params: np.ndarray
    score: float
    n_eval: int
    converged: bool
    grid_best: np.ndarray


def minimize_entropy(score, bounds, grid_shape=(9, 9), max_eval=400):
    """Two-stage deterministic minimization of ``score(theta)``.

    Stage 1 evaluates a rectangular grid over ``bounds`` (inclusive
    endpoints); stage 2 polishes the best grid point with Nelder-Mead
    capped at ``max_eval`` evaluations. If the simplex stops on the
    evaluation cap the best point so far is returned with
    ``converged=False`` — never an exception, because a flat landscape
    (fully degenerate sieve) is a legitimate answer.
    """
    bounds = [(float(a), float(b)) for a, b in bounds]
    if len(bounds) != len(grid_shape):
        raise ValueError("grid_shape must match the number of parameters")
    axes = [np.linspace(a, b, n) for (a, b), n in zip(bounds, grid_shape)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)

    n_eval = 0

    def wrapped(theta):
        nonlocal n_eval
        n_eval += 1
        return float(score(np.asarray(theta, dtype=float)))

    vals = np.array([wrapped(p) for p in pts])
    best_i = int(np.argmin(vals))
    x0 = pts[best_i]

    res = _scipy_minimize(
        wrapped, x0, method="Nelder-Mead",
        options={"maxfev": max_eval, "xatol": 1e-8, "fatol": 1e-10,
                 "disp": False},
    )
    if res.fun <= vals[best_i]:
        x_best, f_best = np.asarray(res.x, dtype=float), float(res.fun)
    else:
        x_best, f_best = x0.copy(), float(vals[best_i])
    return MinimizeResult(x_best, f_best, n_eval, bool(res.success), x0.copy())
