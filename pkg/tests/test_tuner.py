"""
Tests for weakcoin.tuner

Tests cover:
- Exact elimination of a_1 from the honest constraint
- Multi-start optimization of the bias bound
- Reciprocal sweeps and the odd/even role-switch identity
"""

import math

import numpy as np
import pytest

from weakcoin.errors import InvalidArgumentError
from weakcoin.protocol import ProtocolParams
from weakcoin.trees import bounds, eval_constraint_fast
from weakcoin.tuner import (
    TuneConfig,
    base_schedule,
    optimize_bias,
    solve_constraint_for_a1,
    sweep_reciprocal,
    sweep_reciprocal_odd,
    sweep_schedule,
)


class TestSolveConstraint:
    """Tests for solve_constraint_for_a1"""

    def test_two_messages(self):
        """a_2 = 1 - 1/sqrt2 gives a_1 = 1/sqrt2"""
        a1 = solve_constraint_for_a1([1 - 1 / math.sqrt(2)])
        assert a1 == pytest.approx(1 / math.sqrt(2), abs=1e-9)

    def test_no_solution(self):
        """a_2 = 1 makes Bob's win impossible"""
        assert solve_constraint_for_a1([1.0]) is None

    def test_three_messages(self):
        """The optimized n=3 tail recovers a_1 = 0.74094"""
        a1 = solve_constraint_for_a1([0.479696, 0.186312])
        assert a1 == pytest.approx(0.74094, abs=1e-4)

    def test_constraint_exact(self):
        """Solved points meet the constraint within 1e-12"""
        rng = np.random.default_rng(31)
        found = 0
        for _ in range(200):
            n = int(rng.integers(2, 12))
            rest = rng.uniform(size=n - 1)
            a1 = solve_constraint_for_a1(rest)
            if a1 is None:
                continue
            found += 1
            p = ProtocolParams(n, (a1,) + tuple(rest))
            assert eval_constraint_fast(p) == pytest.approx(0.5, abs=1e-12)
        assert found > 0

    def test_other_target(self):
        """Targets other than 1/2 are honored"""
        a1 = solve_constraint_for_a1([0.3], c=0.4)
        p = ProtocolParams(2, (a1, 0.3), c=0.4)
        assert eval_constraint_fast(p) == pytest.approx(0.4, abs=1e-12)

    def test_rejects_bad_weight(self):
        """Tail weights must lie in [0, 1]"""
        with pytest.raises(InvalidArgumentError):
            solve_constraint_for_a1([1.5])


class TestOptimize:
    """Tests for optimize_bias"""

    def test_config_validation(self):
        """n must be at least 2"""
        with pytest.raises(InvalidArgumentError):
            TuneConfig(n=1)
        with pytest.raises(InvalidArgumentError):
            TuneConfig(n=3, restarts=0)

    def test_base_schedule(self):
        """Starting weights are valid and end with 0.6/n"""
        a = base_schedule(6)
        assert a.shape == (5,)
        assert np.all((a > 0) & (a < 1))
        assert a[-1] == pytest.approx(0.1)

    def test_two_messages(self):
        """n=2 reaches 1/sqrt2 - 1/2 on the alpha*beta = 1/2 family"""
        result = optimize_bias(TuneConfig(n=2, restarts=2, seed=0))
        assert result.bias <= 0.2072
        assert result.alpha * result.beta == pytest.approx(0.5, abs=1e-9)
        assert result.constraint == pytest.approx(0.5, abs=1e-12)

    def test_three_messages(self):
        """n=3 gets within 1e-4 of 0.1991"""
        result = optimize_bias(TuneConfig(n=3, restarts=3, seed=1))
        assert result.bias <= 0.1992
        assert result.constraint == pytest.approx(0.5, abs=1e-12)

    def test_result_recomputed(self):
        """Reported numbers come from bounds() at the returned params"""
        result = optimize_bias(TuneConfig(n=3, restarts=2, seed=4, polish_rounds=2))
        report = bounds(result.params)
        assert result.alpha == report.alpha
        assert result.beta == report.beta
        assert result.bias == pytest.approx(max(report.alpha, report.beta) - 0.5, abs=1e-15)
        assert result.bias + 0.5 <= min(result.restart_values) + 1e-12

    def test_seed_determinism(self):
        """Same seed, same parameters"""
        first = optimize_bias(TuneConfig(n=3, restarts=2, seed=9, polish_rounds=1))
        second = optimize_bias(TuneConfig(n=3, restarts=2, seed=9, polish_rounds=1))
        assert first.params.a == second.params.a

    def test_to_dict(self):
        """to_dict carries the weights and the residual"""
        doc = optimize_bias(TuneConfig(n=2, restarts=1, polish_rounds=1)).to_dict()
        assert len(doc["a"]) == 2
        assert doc["alpha_beta_residual"] == pytest.approx(abs(doc["alpha"] - doc["beta"]))

    @pytest.mark.slow
    def test_more_messages_help(self):
        """Optimizer reaches the known bias levels for n up to 10"""
        limits = {3: 0.1992, 4: 0.1958, 6: 0.1938, 8: 0.1932, 10: 0.1928}
        for n, limit in limits.items():
            result = optimize_bias(TuneConfig(n=n, seed=0))
            assert result.bias <= limit
            assert result.constraint == pytest.approx(0.5, abs=1e-12)


class TestSweeps:
    """Tests for the vectorized sweeps"""

    def test_even_first_row(self):
        """n=2 with a = (1, 1/2): beta 1, alpha 1/2, constraint 1/2"""
        row = sweep_reciprocal(2)[0]
        assert row.n == 2
        assert row.beta == pytest.approx(1.0)
        assert row.alpha == pytest.approx(0.5)
        assert row.constraint == pytest.approx(0.5, abs=1e-12)

    def test_even_rows(self):
        """Every even row is fair and beta >= alpha"""
        rows = sweep_reciprocal(200)
        assert [row.n for row in rows] == list(range(2, 201, 2))
        for row in rows:
            assert row.constraint == pytest.approx(0.5, abs=1e-12)
            assert row.beta >= row.alpha

    def test_long_tail(self):
        """max(alpha, beta) at n = 10**4 lies in [0.6920, 0.6925]"""
        last = sweep_reciprocal(10_000)[-1]
        assert last.n == 10_000
        assert 0.6920 <= max(last.alpha, last.beta) <= 0.6925

    def test_odd_rows(self):
        """Odd rows are fair, alpha >= beta, and alpha matches the even beta at n+1"""
        rows = sweep_reciprocal_odd(101)
        assert rows[0].n == 1
        for row in rows:
            assert row.constraint == pytest.approx(0.5, abs=1e-12)
            assert row.alpha >= row.beta
            assert row.alpha == pytest.approx(row.swap_partner, rel=1e-10)
        assert "beta_even_next" in rows[1].to_dict()

    def test_three_message_odd_row(self):
        """a = (1/2, 1/3, 1/4) is fair"""
        row = sweep_reciprocal_odd(3)[1]
        assert row.n == 3
        assert row.constraint == pytest.approx(0.5, abs=1e-12)

    def test_matches_bounds(self):
        """Vectorized rows agree with per-instance bounds()"""
        rows = sweep_schedule(range(1, 21), lambda k: 1.0 / (k + 1))
        for row in rows:
            p = ProtocolParams(row.n, tuple(1.0 / (k + 1) for k in range(1, row.n + 1)))
            report = bounds(p)
            assert row.alpha == pytest.approx(report.alpha, rel=1e-12)
            assert row.beta == pytest.approx(report.beta, rel=1e-12)
            assert row.constraint == pytest.approx(report.constraint, rel=1e-12)

    def test_schedule_out_of_range(self):
        """Schedules must produce weights in [0, 1]"""
        with pytest.raises(InvalidArgumentError):
            sweep_schedule([3], lambda k: 2.0)

    def test_n_max_validation(self):
        """Even sweeps need n_max >= 2"""
        with pytest.raises(InvalidArgumentError):
            sweep_reciprocal(1)
