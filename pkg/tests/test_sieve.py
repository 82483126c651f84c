import numpy as np
import pytest

from decosieve.bath import BathModel
from decosieve.errors import TruncationError
from decosieve.hilbert import (
    HBAR,
    SystemParams,
    build_operators,
    linear_entropy,
    von_neumann_entropy,
)
from decosieve.sieve import (
    StateFamily,
    minimize_entropy,
    run_sieve,
    sieve_csv,
    squeezed_state,
    squeezed_vector,
)
from decosieve.solvers import build_channel_set, evolve_secular, secular_rates

PERIOD = 2.0 * np.pi


def dephasing_engine(rho0, checkpoints):
    """Stub: kill all coherences instantly, keep populations."""
    diag = np.diag(np.diag(rho0.mat))
    return [diag for _ in checkpoints]


def mixing_engine(strength):
    """Stub: blend toward the maximally mixed state at a candidate rate."""

    def engine(rho0, checkpoints):
        mat = rho0.mat
        d = mat.shape[0]
        lam = strength(mat)
        out = []
        for t in checkpoints:
            p = min(1.0, lam * t)
            out.append((1.0 - p) * mat + p * np.eye(d) / d)
        return out

    return engine


class TestSqueezedStates:
    def test_vacuum_limit(self):
        v = squeezed_vector(0.0, 0.0, 12)
        assert abs(v[0] - 1.0) < 1e-15 and np.all(v[1:] == 0.0)

    def test_variance_follows_squeeze_parameter(self):
        params = SystemParams(d=70)
        ops = build_operators(params)
        xsq = ops.x @ ops.x
        zpf2 = HBAR / (2.0 * params.m * params.omega)
        for r, theta, factor in ((0.3, 0.0, np.exp(-0.6)),
                                 (0.8, 0.0, np.exp(-1.6)),
                                 (0.8, np.pi, np.exp(+1.6))):
            v = squeezed_vector(r, theta, 70)
            var = (v.conj() @ xsq @ v).real
            assert abs(var - zpf2 * factor) < 1e-9 * max(1.0, var)

    def test_only_even_levels(self):
        v = squeezed_vector(0.5, 1.1, 40)
        assert np.all(v[1::2] == 0.0)
        assert abs(np.linalg.norm(v) - 1.0) < 1e-14

    def test_tail_rejection(self):
        with pytest.raises(ValueError, match="beyond the d=12 cutoff"):
            squeezed_state(1.5, 0.0, 12)


class TestStateFamily:
    def test_kind_validation(self):
        with pytest.raises(ValueError, match="kind"):
            StateFamily("gaussian_grid", 10)

    def test_deterministic_candidate_order(self):
        fam = StateFamily("coherent_grid", 16,
                          {"amps": [0.5, 1.0], "phases": [0.0, np.pi]})
        labels = [label for label, _ in fam.candidates()]
        assert labels == ["coherent[0.5,0]", "coherent[0.5,3.14159]",
                          "coherent[1,0]", "coherent[1,3.14159]"]
        assert labels == [label for label, _ in fam.candidates()]

    def test_needs_two_candidates(self):
        fam = StateFamily("number_states", 8, {"n_max": 0})
        with pytest.raises(ValueError, match="at least two"):
            fam.generate()

    def test_generate_reports_rejections(self):
        fam = StateFamily("coherent_grid", 8,
                          {"amps": [0.3, 3.0], "phases": [0.0]})
        states, rejected = fam.generate()
        assert [label for label, _, _ in states] == ["coherent[0.3,0]"]
        (label, _, reason), = rejected
        assert label == "coherent[3,0]" and "cutoff" in reason

    def test_squeezed_family(self):
        fam = StateFamily("squeezed_grid", 40,
                          {"rs": [0.0, 0.4], "thetas": [0.0, np.pi / 2]})
        states, rejected = fam.generate()
        assert len(states) == 4 and not rejected


class TestRunSieve:
    def test_argument_validation(self):
        fam = StateFamily("number_states", 8, {"n_max": 2})
        with pytest.raises(ValueError, match="measure"):
            run_sieve(fam, dephasing_engine, [1.0], measure="renyi")
        with pytest.raises(ValueError, match="nonnegative"):
            run_sieve(fam, dephasing_engine, [-1.0])

    def test_pure_survivors_are_fully_degenerate(self):
        # number states are immune to the dephasing stub: all scores 0
        fam = StateFamily("number_states", 8, {"n_max": 3})
        res = run_sieve(fam, dephasing_engine, [1.0, 2.0])
        assert res.degenerate and not res.non_robust
        assert all(r.tied for r in res.ranked)
        assert all(r.rank == 1 for r in res.ranked)
        assert res.winners == ("number[0]",) * 2  # ties break by label

    def test_ranking_and_tie_groups(self):
        # mixing rate = 1 - ground population: number[0] survives clean,
        # every other number state mixes identically -> one tie group
        fam = StateFamily("number_states", 8, {"n_max": 3})
        engine = mixing_engine(lambda m: 1.0 - m[0, 0].real)
        res = run_sieve(fam, engine, [0.25, 0.5])
        ranked = res.ranked
        assert ranked[0].label == "number[0]"
        assert ranked[0].score == 0.0 and not ranked[0].tied
        assert [r.rank for r in ranked] == [1, 2, 2, 2]
        assert all(r.tied for r in ranked[1:])
        assert not res.degenerate and not res.non_robust

    def test_truncation_becomes_exclusion(self):
        fam = StateFamily("number_states", 8, {"n_max": 2})

        def engine(rho0, checkpoints):
            if rho0.mat[2, 2].real > 0.5:
                raise TruncationError("basis top reached", report={})
            return dephasing_engine(rho0, checkpoints)

        res = run_sieve(fam, engine, [1.0])
        assert [r.label for r in res.excluded] == ["number[2]"]
        assert "basis top" in res.excluded[0].excluded
        assert len(res.ranked) == 2

    def test_all_excluded_raises(self):
        fam = StateFamily("number_states", 8, {"n_max": 1})

        def engine(rho0, checkpoints):
            raise TruncationError("nope", report={})

        with pytest.raises(ValueError, match="every candidate"):
            run_sieve(fam, engine, [1.0])

    def test_non_robust_winner_flip(self):
        # crafted curves: number[0] wins early, number[1] wins late and
        # on the mean -> the per-checkpoint winner disagrees with rank 1
        fam = StateFamily("number_states", 4, {"n_max": 1})

        def entropy_target(s):
            # diagonal qubit-like state with linear entropy s
            q = 0.5 * (1.0 - np.sqrt(1.0 - 2.0 * s))
            out = np.zeros((4, 4))
            out[0, 0], out[1, 1] = 1.0 - q, q
            return out

        curves = {0: (0.10, 0.30), 1: (0.20, 0.15)}

        def engine(rho0, checkpoints):
            n = 0 if rho0.mat[0, 0].real > 0.5 else 1
            return [entropy_target(s) for s in curves[n]]

        res = run_sieve(fam, engine, [1.0, 2.0])
        assert res.winners == ("number[0]", "number[1]")
        assert res.ranked[0].label == "number[1]"  # lower mean
        assert res.non_robust

    def test_phase_invariant_engine_ties_phases(self):
        # dephasing only sees populations, which do not depend on the
        # coherent phase: same-|alpha| candidates must tie exactly
        fam = StateFamily("coherent_grid", 20,
                          {"amps": [0.4, 0.9],
                           "phases": [0.0, np.pi / 3, np.pi]})
        res = run_sieve(fam, dephasing_engine, [1.0])
        scores = {}
        for r in res.ranked:
            scores.setdefault(r.params["amp"], set()).add(round(r.score, 14))
        assert all(len(v) == 1 for v in scores.values())
        assert all(r.tied for r in res.ranked)
        assert not res.degenerate  # the two amplitudes differ

    def test_measure_choice_preserves_argmin(self):
        fam = StateFamily("number_states", 6, {"n_max": 2})
        engine = mixing_engine(lambda m: 0.1 + 0.4 * (1.0 - m[0, 0].real))
        res_lin = run_sieve(fam, engine, [0.5, 1.0], measure="linear")
        res_vn = run_sieve(fam, engine, [0.5, 1.0], measure="vn")
        assert res_lin.ranked[0].label == res_vn.ranked[0].label
        assert res_vn.ranked[0].score > res_lin.ranked[0].score  # vn >= linear


@pytest.fixture(scope="module")
def secular_engine():
    params = SystemParams(d=10)
    ops = build_operators(params)
    ch = build_channel_set(BathModel(cutoff=0.01, k_max=0.08, e2=1.0), ops)
    rates = secular_rates(ch, ops)

    def engine(rho0, checkpoints):
        traj = evolve_secular(rho0, rates, ops, float(checkpoints[-1]),
                              float(checkpoints[0]))
        take = [int(round(t / checkpoints[0])) for t in checkpoints]
        return [traj.states[i] for i in take]

    return engine


class TestRealEngineSieve:
    def test_smaller_gaps_decohere_slower(self, secular_engine):
        fam = StateFamily("two_state_superpositions", 10,
                          {"pairs": [(0, 1), (0, 2), (1, 4)], "phases": [0.0]})
        res = run_sieve(fam, secular_engine,
                        PERIOD * np.arange(1.0, 4.0))
        assert res.ranked[0].label == "super[0,1,0]"
        assert res.ranked[-1].label == "super[1,4,0]"
        # entropy grows monotonically under pure Gaussian dephasing
        for r in res.ranked:
            assert np.all(np.diff(r.checkpoint_scores) > 0.0)
        assert not res.non_robust and not res.degenerate

    def test_csv_format(self, secular_engine):
        fam = StateFamily("two_state_superpositions", 10,
                          {"pairs": [(0, 1), (0, 2)], "phases": [0.0]})
        res = run_sieve(fam, secular_engine, PERIOD * np.arange(1.0, 3.0))
        text = sieve_csv(res)
        lines = text.strip().split("\n")
        assert lines[0] == ("label,params,score,rank,tied,non_robust,"
                            "entropy_cp0,entropy_cp1,excluded")
        assert len(lines) == 3
        assert text == sieve_csv(res)

    def test_csv_excluded_row(self):
        fam = StateFamily("coherent_grid", 8, {"amps": [0.3, 3.0], "phases": [0.0]})
        res = run_sieve(fam, dephasing_engine, [1.0])
        lines = sieve_csv(res).strip().split("\n")
        assert lines[-1].startswith("coherent[3,0]")
        assert "cutoff" in lines[-1] and "," not in lines[-1].split(",")[-1]


class TestMinimizeEntropy:
    def test_quadratic_converges(self):
        target = np.array([0.37, -0.6])

        def score(theta):
            return float(np.sum((theta - target) ** 2))

        res = minimize_entropy(score, [(-1.0, 1.0), (-1.0, 1.0)])
        assert res.converged
        assert np.max(np.abs(res.params - target)) < 1e-6
        assert res.n_eval > 81  # grid plus polish

    def test_evaluation_cap_flags_non_convergence(self):
        res = minimize_entropy(lambda th: float(np.sum(th**2)),
                               [(-1.0, 1.0), (-1.0, 1.0)], max_eval=5)
        assert not res.converged

    def test_flat_landscape_is_legitimate(self):
        res = minimize_entropy(lambda th: 1.0, [(-1.0, 1.0)], grid_shape=(5,))
        assert res.converged and res.score == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="grid_shape"):
            minimize_entropy(lambda th: 0.0, [(-1.0, 1.0)], grid_shape=(3, 3))
