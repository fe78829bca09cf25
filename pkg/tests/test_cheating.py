"""
Tests for weakcoin.cheating

Tests cover:
- Message schedule and stage registers
- Strategy validation and resource caps
- Honest and hand-built strategies
- Ascent monotonicity, determinism and dual dominance
- Gap reports
"""

import math

import numpy as np
import pytest

from weakcoin.cheating import (
    CheatStrategy,
    ascend,
    cheat_value,
    cheater_pairs,
    gap_report,
    honest_strategy,
    random_strategy,
    stage_registers,
    upper_bound,
)
from weakcoin.errors import InvalidArgumentError, ResourceLimitError
from weakcoin.protocol import ProtocolParams
from weakcoin.trees import eval_beta_fast, eval_constraint_fast

SYMMETRIC = ProtocolParams(2, (1 / math.sqrt(2), 1 - 1 / math.sqrt(2)))
UNFAIR = ProtocolParams(2, (0.4363030366, 0.8406954759))


def swap_first_last(k):
    """Permutation matrix exchanging the most and least significant of k qubits"""
    dim = 1 << k
    u = np.zeros((dim, dim))
    for j in range(dim):
        top = (j >> (k - 1)) & 1
        bottom = j & 1
        image = j & ~((1 << (k - 1)) | 1)
        image |= bottom << (k - 1)
        image |= top
        u[image, j] = 1.0
    return u.astype(complex)


class TestSchedule:
    """Tests for cheater_pairs and stage_registers"""

    def test_pairs(self):
        """Bob prepares even pairs, Alice odd ones"""
        assert cheater_pairs(5, "B") == [2, 4]
        assert cheater_pairs(5, "A") == [1, 3, 5]

    def test_bob_registers_n2(self):
        """Bob acts on particles 2,3,4 plus ancillas, then on 3,4 plus ancillas"""
        assert stage_registers(2, "B", 2) == [(1, 2, 3, 4, 5), (2, 3, 4, 5)]

    def test_alice_registers_n2(self):
        """Alice acts before sending particle 3 and after receiving particle 2"""
        assert stage_registers(2, "A", 1) == [(0, 2, 4), (0, 1, 4)]

    def test_stage_count(self):
        """One stage per sent message plus the final one"""
        assert len(stage_registers(5, "B", 0)) == 3
        assert len(stage_registers(5, "A", 0)) == 4

    def test_rejects_side(self):
        """Only sides A and B exist"""
        with pytest.raises(InvalidArgumentError):
            stage_registers(2, "X", 0)


class TestLimits:
    """Tests for size caps and strategy validation"""

    def test_total_qubit_cap(self):
        """2n + ancillas may not exceed 22"""
        p = ProtocolParams(10, (0.5,) * 10)
        with pytest.raises(ResourceLimitError):
            honest_strategy(p, "B", ancilla_qubits=3)

    def test_stage_cap(self):
        """No stage may act on more than 10 qubits"""
        p = ProtocolParams(6, (0.5,) * 6)
        with pytest.raises(ResourceLimitError):
            honest_strategy(p, "B", ancilla_qubits=4)

    def test_negative_ancillas(self):
        """Ancilla count must be nonnegative"""
        with pytest.raises(InvalidArgumentError):
            honest_strategy(SYMMETRIC, "B", ancilla_qubits=-1)

    def test_wrong_stage_count(self):
        """Stage list must match the schedule"""
        strategy = honest_strategy(SYMMETRIC, "B", 1)
        strategy.stages = strategy.stages[:1]
        with pytest.raises(InvalidArgumentError):
            cheat_value(SYMMETRIC, strategy)

    def test_non_unitary_stage(self):
        """Stages must be unitary"""
        strategy = honest_strategy(SYMMETRIC, "B", 1)
        strategy.stages[0] = 2 * strategy.stages[0]
        with pytest.raises(InvalidArgumentError):
            cheat_value(SYMMETRIC, strategy)


class TestStrategies:
    """Tests for cheat_value on fixed strategies"""

    def test_honest_value(self):
        """Identity stages reproduce the honest winning probability"""
        rng = np.random.default_rng(7)
        for n in (2, 3):
            p = ProtocolParams(n, tuple(rng.uniform(0.1, 0.9, size=n)))
            constraint = eval_constraint_fast(p)
            assert cheat_value(p, honest_strategy(p, "B", 1)) == pytest.approx(constraint, abs=1e-12)
            assert cheat_value(p, honest_strategy(p, "A", 1)) == pytest.approx(1 - constraint, abs=1e-12)

    def test_discarding_own_message(self):
        """Bob swapping particle 2 for a blank ancilla never wins"""
        registers = stage_registers(2, "B", 1)
        strategy = CheatStrategy(
            "B", 1, [swap_first_last(len(registers[0])), np.eye(1 << len(registers[1]), dtype=complex)]
        )
        value = cheat_value(SYMMETRIC, strategy)
        assert value == pytest.approx(0.0, abs=1e-12)
        assert value <= eval_beta_fast(SYMMETRIC)

    def test_random_strategies_below_dual(self):
        """Haar-random strategies never beat the dual bound"""
        rng = np.random.default_rng(19)
        for n in (2, 3):
            p = ProtocolParams(n, tuple(rng.uniform(0.1, 0.9, size=n)))
            for side in ("A", "B"):
                upper = upper_bound(p, side)
                for _ in range(10):
                    strategy = random_strategy(p, side, 1, rng)
                    assert cheat_value(p, strategy) <= upper + 1e-9

    def test_unfair_strategies_below_dual(self):
        """Off the constraint no strategy beats the rescaled bound"""
        rng = np.random.default_rng(23)
        for side in ("A", "B"):
            upper = upper_bound(UNFAIR, side)
            assert cheat_value(UNFAIR, honest_strategy(UNFAIR, side, 1)) <= upper + 1e-9
            for _ in range(10):
                assert cheat_value(UNFAIR, random_strategy(UNFAIR, side, 1, rng)) <= upper + 1e-9

    def test_isometry_residual(self):
        """Random stages are unitary to rounding"""
        strategy = random_strategy(SYMMETRIC, "A", 1, np.random.default_rng(0))
        assert strategy.isometry_residual() <= 1e-10


class TestAscend:
    """Tests for the ascent search"""

    def test_zero_iterations(self):
        """iters=0 evaluates the initial strategy only"""
        result = ascend(SYMMETRIC, "B", 1, iters=0, seed=3)
        assert len(result.trace) == 1
        assert result.value == pytest.approx(cheat_value(SYMMETRIC, result.strategy), abs=1e-12)

    def test_trace_monotone(self):
        """The value never drops between iterations"""
        result = ascend(SYMMETRIC, "B", 1, iters=60, seed=1)
        assert len(result.trace) == 61
        assert np.all(np.diff(result.trace) >= -1e-12)

    def test_seed_determinism(self):
        """Same seed, same trace"""
        first = ascend(SYMMETRIC, "A", 1, iters=20, seed=5)
        second = ascend(SYMMETRIC, "A", 1, iters=20, seed=5)
        assert first.trace == second.trace

    def test_below_dual(self):
        """Ascent values stay below the dual bound"""
        p = ProtocolParams(3, (0.74094, 0.479696, 0.186312))
        for side in ("A", "B"):
            result = ascend(p, side, 1, iters=80, seed=2)
            assert result.value <= upper_bound(p, side) + 1e-9
            assert result.value == pytest.approx(cheat_value(p, result.strategy), abs=1e-9)

    def test_negative_iterations(self):
        """iters must be nonnegative"""
        with pytest.raises(InvalidArgumentError):
            ascend(SYMMETRIC, "B", 1, iters=-1, seed=0)

    @pytest.mark.slow
    def test_reaches_symmetric_optimum(self):
        """Both parties get within 0.007 of 1/sqrt2 at the symmetric point"""
        for side in ("B", "A"):
            best = max(ascend(SYMMETRIC, side, 2, iters=500, seed=s).value for s in range(3))
            assert 0.700 <= best <= 1 / math.sqrt(2) + 1e-9


class TestGapReport:
    """Tests for gap_report"""

    def test_certain_bob_win(self):
        """a=(1,0): Bob's gap closes at 1, Alice has nothing to win"""
        rows = {row.side: row for row in gap_report(ProtocolParams(2, (1.0, 0.0)), iters=10)}
        assert rows["B"].lower == pytest.approx(1.0)
        assert rows["B"].upper == pytest.approx(1.0)
        assert rows["A"].lower == 0.0
        assert rows["A"].upper == pytest.approx(0.0)
        assert rows["A"].note

    def test_rows_ordered(self):
        """Both sides are reported, lower <= upper"""
        rows = gap_report(SYMMETRIC, ancilla_qubits=1, iters=30)
        assert [row.side for row in rows] == ["B", "A"]
        for row in rows:
            assert row.lower <= row.upper + 1e-9
            assert row.gap == pytest.approx(row.upper - row.lower)

    def test_unfair_instance(self):
        """Gaps stay nonnegative off the constraint; Bob's bound is a1"""
        rows = {row.side: row for row in gap_report(UNFAIR, ancilla_qubits=1, iters=60, seed=4)}
        assert rows["B"].upper == pytest.approx(0.4363030366, rel=1e-10)
        for row in rows.values():
            assert row.gap >= -1e-9
            assert row.lower >= 0.0

    @pytest.mark.slow
    def test_symmetric_gap_small(self):
        """At the symmetric point both gaps are below 0.01"""
        for row in gap_report(SYMMETRIC, ancilla_qubits=2, iters=500):
            assert row.gap <= 0.01
