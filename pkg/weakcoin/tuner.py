#!/usr/bin/env python3
"""
Parameter tuning and schedule sweeps

- solve_constraint_for_a1: the honest constraint is affine in a_1, so a_1
  is solved exactly from one pass of the all-WSUM recurrence over a_2..a_n
- optimize_bias: multi-start Nelder-Mead over a_2..a_n (logistic
  coordinates) minimizing max(alpha, beta)
- sweep_reciprocal / sweep_reciprocal_odd / sweep_schedule: bounds for
  a_k = f(k) at every n up to n_max, vectorized across n
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from weakcoin.errors import InvalidArgumentError
from weakcoin.protocol import ProtocolParams
from weakcoin.trees import E0_START, E1_START, bounds

logger = logging.getLogger(__name__)

INFEASIBLE_PENALTY = 2.0
FEASIBILITY_SLACK = 1e-12


@dataclass
class TuneConfig:
    """Optimizer settings for one n"""
    n: int
    restarts: int = 8
    max_evals: int = 20000
    seed: int = 0
    tol: float = 1e-10
    c: float = 0.5
    polish_rounds: int = 12
    jitter: float = 0.35

    def __post_init__(self):
        if self.n < 2:
            raise InvalidArgumentError(f"optimization needs n >= 2, got {self.n}")
        if self.restarts < 1:
            raise InvalidArgumentError(f"restarts must be >= 1, got {self.restarts}")
        if self.max_evals < 1:
            raise InvalidArgumentError(f"max_evals must be >= 1, got {self.max_evals}")
        if not (0.0 < self.c < 1.0):
            raise InvalidArgumentError(f"c must be in (0, 1), got {self.c}")


@dataclass
class TuneResult:
    """Best constraint-exact parameters found"""
    params: ProtocolParams
    alpha: float
    beta: float
    bias: float
    evals: int
    constraint: float = float("nan")
    restart_values: List[float] = field(default_factory=list)

    @property
    def balance_residual(self) -> float:
        """|alpha - beta|, for comparison with balanced optima"""
        return abs(self.alpha - self.beta)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.params.n,
            "a": list(self.params.a),
            "c": self.params.c,
            "alpha": self.alpha,
            "beta": self.beta,
            "bias": self.bias,
            "constraint": self.constraint,
            "alpha_beta_residual": self.balance_residual,
            "evals": self.evals,
        }


@dataclass
class SweepRow:
    n: int
    alpha: float
    beta: float
    constraint: float
    swap_partner: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        row = {"n": self.n, "alpha": self.alpha, "beta": self.beta, "constraint": self.constraint}
        if self.swap_partner is not None:
            row["beta_even_next"] = self.swap_partner
        return row


# ============================================================================
# Constraint elimination
# ============================================================================

def _high_low_linear(a_rest: Sequence[float]) -> Tuple[float, float]:
    """(H_1, L_1) of the all-WSUM recurrence; a_rest holds a_2..a_n"""
    high, low = E1_START
    n = len(a_rest) + 1
    for i in range(n, 1, -1):
        w = a_rest[i - 2]
        if i % 2 == 1:
            low = w * high + (1.0 - w) * low
        else:
            high = w * low + (1.0 - w) * high
    return high, low


def _raw_a1(a_rest: Sequence[float], c: float) -> Optional[float]:
    high, low = _high_low_linear(a_rest)
    if abs(high - low) <= 1e-15:
        return None
    return (c - low) / (high - low)


def solve_constraint_for_a1(a_rest: Sequence[float], c: float = 0.5) -> Optional[float]:
    """
    a_1 such that the honest Bob-win probability equals c.

    The root is L_0 = a_1 H_1 + (1 - a_1) L_1, so a_1 = (c - L_1)/(H_1 - L_1).

    Returns:
        a_1 in [0, 1], or None when H_1 = L_1 or the solution leaves [0, 1]
    """
    for x in a_rest:
        if not (0.0 <= float(x) <= 1.0):
            raise InvalidArgumentError(f"weight {x!r} is outside [0, 1]")
    a1 = _raw_a1([float(x) for x in a_rest], c)
    if a1 is None or a1 < -FEASIBILITY_SLACK or a1 > 1.0 + FEASIBILITY_SLACK:
        return None
    return min(1.0, max(0.0, a1))


# ============================================================================
# Optimizer
# ============================================================================

def base_schedule(n: int) -> np.ndarray:
    """Starting a_2..a_n: roughly 1/(0.7k + 0.95), with a small final weight"""
    k = np.arange(2, n + 1, dtype=float)
    a = 1.0 / (0.7 * k + 0.95)
    a[-1] = 0.6 / n
    return np.clip(a, 0.02, 0.98)


class _Objective:
    """max(alpha, beta) over logistic coordinates of a_2..a_n, counting evaluations"""

    def __init__(self, n: int, c: float):
        self.n = n
        self.c = c
        self.evals = 0

    def params(self, x: np.ndarray) -> Optional[ProtocolParams]:
        a_rest = expit(x)
        a1 = solve_constraint_for_a1(a_rest, self.c)
        if a1 is None:
            return None
        return ProtocolParams(self.n, (a1,) + tuple(float(v) for v in a_rest), self.c)

    def __call__(self, x: np.ndarray) -> float:
        self.evals += 1
        p = self.params(x)
        if p is None:
            raw = _raw_a1(expit(x), self.c)
            miss = 1.0 if raw is None else max(-raw, raw - 1.0)
            return INFEASIBLE_PENALTY + miss
        report = bounds(p)
        return max(report.alpha, report.beta)


def _nelder_mead(objective: _Objective, x0: np.ndarray, cfg: TuneConfig):
    return minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={
            "maxfev": cfg.max_evals,
            "xatol": cfg.tol,
            "fatol": cfg.tol,
            "adaptive": True,
        },
    )


def optimize_bias(cfg: TuneConfig) -> TuneResult:
    """
    Minimize max(alpha, beta) - c over constraint-exact parameters.

    Restart 0 starts from base_schedule, the others from jittered copies;
    every restart owns a generator spawned from cfg.seed. The best point is
    then re-polished with fresh simplices until it stops improving.

    Args:
        cfg: TuneConfig

    Returns:
        TuneResult whose numbers are recomputed from the returned parameters
    """
    objective = _Objective(cfg.n, cfg.c)
    base = logit(base_schedule(cfg.n))
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)

    best_x, best_f = None, np.inf
    restart_values = []
    for r, child in enumerate(children):
        rng = np.random.default_rng(child)
        x0 = base if r == 0 else base + rng.normal(0.0, cfg.jitter, size=base.size)
        res = _nelder_mead(objective, x0, cfg)
        restart_values.append(float(res.fun))
        logger.debug("restart %d: %.12f (%d evals)", r, res.fun, res.nfev)
        if res.fun < best_f:
            best_x, best_f = np.asarray(res.x), float(res.fun)

    for round_ in range(cfg.polish_rounds):
        res = _nelder_mead(objective, best_x, cfg)
        if res.fun < best_f - cfg.tol:
            best_x, best_f = np.asarray(res.x), float(res.fun)
        else:
            if res.fun < best_f:
                best_x, best_f = np.asarray(res.x), float(res.fun)
            break
        logger.debug("polish %d: %.12f", round_, best_f)

    params = objective.params(best_x)
    if params is None:
        raise InvalidArgumentError(
            f"no feasible parameters found for n={cfg.n}, c={cfg.c}; try more restarts"
        )
    report = bounds(params)
    bias = max(report.alpha, report.beta) - cfg.c
    if abs(bias + cfg.c - best_f) > 1e-12:
        logger.warning("recomputed bias differs from the optimizer value by %.3g", bias + cfg.c - best_f)
    logger.debug("n=%d: bias %.9f after %d evaluations", cfg.n, bias, objective.evals)
    return TuneResult(
        params=params,
        alpha=report.alpha,
        beta=report.beta,
        bias=bias,
        evals=objective.evals,
        constraint=report.constraint,
        restart_values=restart_values,
    )


def default_params(n: int, c: float = 0.5, seed: int = 0) -> ProtocolParams:
    """Quick single-start optimum, used when no weights are given"""
    return optimize_bias(TuneConfig(n=n, restarts=1, seed=seed, c=c, polish_rounds=3)).params


# ============================================================================
# Sweeps
# ============================================================================

def _sweep_roots(
    ns: np.ndarray,
    schedule: Callable[[int], float],
    odd: str,
    even: str,
    start: Tuple[float, float],
) -> np.ndarray:
    """
    Root values for every n in the sorted array ns at once.

    The weight on qubit i is schedule(i) for every row, so qubit i is
    processed for all rows with n >= i in one vectorized step.
    """
    n_max = int(ns[-1])
    high = np.full(ns.size, start[0])
    low = np.full(ns.size, start[1])
    for i in range(n_max, 0, -1):
        lo = int(np.searchsorted(ns, i))
        w = schedule(i)
        kind = odd if i % 2 == 1 else even
        if i % 2 == 1:
            x, y = high[lo:], low[lo:]
        else:
            x, y = low[lo:], high[lo:]
        if kind == "wsum":
            out = w * x + (1.0 - w) * y
        else:
            out = np.sqrt(w * x * x + (1.0 - w) * y * y)
        if i % 2 == 1:
            low[lo:] = out
        else:
            high[lo:] = out
    return low


def sweep_schedule(
    ns: Sequence[int], schedule: Callable[[int], float], c: float = 0.5
) -> List[SweepRow]:
    """
    Bounds at a_k = schedule(k) for each n in ns.

    alpha uses WRMS on odd qubits and WSUM on even qubits over E0, which is
    the role-switched beta.
    """
    ns = np.array(sorted(set(int(n) for n in ns)))
    if ns.size == 0 or ns[0] < 1:
        raise InvalidArgumentError("sweep needs n >= 1")
    for k in range(1, int(ns[-1]) + 1):
        if not (0.0 <= schedule(k) <= 1.0):
            raise InvalidArgumentError(f"schedule gives a_{k}={schedule(k)!r} outside [0, 1]")
    beta_root = _sweep_roots(ns, schedule, "wsum", "wrms", E1_START)
    alpha_root = _sweep_roots(ns, schedule, "wrms", "wsum", E0_START)
    constraint = _sweep_roots(ns, schedule, "wsum", "wsum", E1_START)
    return [
        SweepRow(int(n), float(al * al / (1.0 - c)), float(be * be / c), float(co))
        for n, al, be, co in zip(ns, alpha_root, beta_root, constraint)
    ]


def sweep_reciprocal(n_max: int) -> List[SweepRow]:
    """Even n up to n_max with a_k = 1/k"""
    if n_max < 2:
        raise InvalidArgumentError(f"n_max must be >= 2, got {n_max}")
    rows = sweep_schedule(range(2, n_max + 1, 2), lambda k: 1.0 / k)
    for row in rows:
        if abs(row.constraint - 0.5) > 1e-12:
            logger.warning("n=%d: constraint %.15g is not 1/2", row.n, row.constraint)
    return rows


def sweep_reciprocal_odd(n_max: int) -> List[SweepRow]:
    """
    Odd n up to n_max with a_k = 1/(k+1).

    Role-switching (1/2, .., 1/(n+1)) gives the even family at n+1, so each
    row's alpha should equal beta of the even row n+1 (swap_partner).
    """
    if n_max < 1:
        raise InvalidArgumentError(f"n_max must be >= 1, got {n_max}")
    rows = sweep_schedule(range(1, n_max + 1, 2), lambda k: 1.0 / (k + 1))
    partners = sweep_schedule([row.n + 1 for row in rows], lambda k: 1.0 / k)
    for row, partner in zip(rows, partners):
        row.swap_partner = partner.beta
        if abs(row.alpha - partner.beta) > 1e-9 * max(1.0, partner.beta):
            logger.warning(
                "n=%d: alpha %.15g differs from even-family beta %.15g",
                row.n, row.alpha, partner.beta,
            )
    return rows
