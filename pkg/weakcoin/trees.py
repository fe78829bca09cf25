#!/usr/bin/env python3
"""
Alternating tree evaluation

The constraint and both cheating bounds are values of complete binary trees
over n-qubit diagonal leaves. Each depth combines its two subtrees with one
node operation:

- WSUM(a): a*left + (1-a)*right
- WRMS(a): sqrt(a*left**2 + (1-a)*right**2)
- MAX: max(left, right)

eval_tree_dense works for any leaves. On the outcome projectors every
subtree takes one of only two values (High/Low), which gives the O(n)
evaluators used everywhere else.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Sequence, Tuple, Union

import numpy as np

from weakcoin.errors import InvalidArgumentError, ResourceLimitError
from weakcoin.protocol import (
    DIAGONAL_MAX_N,
    DiagonalOperator,
    ProtocolParams,
    build_outcome_projectors,
    role_switched,
)

logger = logging.getLogger(__name__)

# (H, L) at the leaves: H is a subtree whose fixed prefix already hands the
# coin to Bob, L one whose prefix hands it to Alice.
E1_START = (1.0, 0.0)
E0_START = (0.0, 1.0)


class NodeKind(str, Enum):
    WSUM = "wsum"
    WRMS = "wrms"
    MAX = "max"


@dataclass(frozen=True)
class NodeOp:
    """One combining rule; weight is ignored for MAX"""
    kind: NodeKind
    weight: float = 1.0

    def __post_init__(self):
        if self.kind is not NodeKind.MAX and not (0.0 <= self.weight <= 1.0):
            raise InvalidArgumentError(f"node weight {self.weight!r} is outside [0, 1]")

    def combine(self, left, right):
        """Works elementwise on floats or numpy arrays"""
        a = self.weight
        if self.kind is NodeKind.WSUM:
            return a * left + (1.0 - a) * right
        if self.kind is NodeKind.WRMS:
            return np.sqrt(a * left * left + (1.0 - a) * right * right)
        return np.maximum(left, right)


@dataclass(frozen=True)
class AltChain:
    """ops[i] combines on qubit i+1; the last op is applied first"""
    ops: Tuple[NodeOp, ...]

    def __post_init__(self):
        if len(self.ops) < 1:
            raise InvalidArgumentError("a chain needs at least one node operation")
        object.__setattr__(self, "ops", tuple(self.ops))

    @property
    def n(self) -> int:
        return len(self.ops)


@dataclass
class BoundReport:
    """Certified cheating bounds for one protocol instance"""
    n: int
    alpha: float
    beta: float
    constraint: float
    bias_bound: float
    c: float = 0.5
    dense_residual: float = float("nan")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "alpha": self.alpha,
            "beta": self.beta,
            "constraint": self.constraint,
            "bias_bound": self.bias_bound,
        }


# ============================================================================
# Chains
# ============================================================================

def _alternating(a: Sequence[float], odd: NodeKind, even: NodeKind) -> AltChain:
    ops = []
    for i, w in enumerate(a, start=1):
        kind = odd if i % 2 == 1 else even
        ops.append(NodeOp(kind, float(w)))
    return AltChain(tuple(ops))


def beta_chain(a: Sequence[float]) -> AltChain:
    """WSUM on Alice's qubits (odd), WRMS on Bob's (even); evaluated on E1"""
    return _alternating(a, NodeKind.WSUM, NodeKind.WRMS)


def alpha_chain(a: Sequence[float]) -> AltChain:
    """WRMS on odd qubits, WSUM on even; evaluated on E0"""
    return _alternating(a, NodeKind.WRMS, NodeKind.WSUM)


def constraint_chain(a: Sequence[float]) -> AltChain:
    return _alternating(a, NodeKind.WSUM, NodeKind.WSUM)


def sum_max_chain(a: Sequence[float], side: str) -> AltChain:
    """
    Sum-Max tree of a cheater: honest qubits are averaged, the cheater's own
    qubits are maximized over. Bob (side B) sends the even qubits, Alice (A)
    the odd ones.
    """
    if side == "B":
        return _alternating(a, NodeKind.WSUM, NodeKind.MAX)
    if side == "A":
        return _alternating(a, NodeKind.MAX, NodeKind.WSUM)
    raise InvalidArgumentError(f"side must be 'A' or 'B', got {side!r}")


# ============================================================================
# Evaluators
# ============================================================================

def tree_levels(chain: AltChain, leaves: Union[DiagonalOperator, np.ndarray]) -> list:
    """Node values per depth: levels[d] has 2**d entries, levels[n] are the leaves"""
    values = leaves.d if isinstance(leaves, DiagonalOperator) else np.asarray(leaves, dtype=float)
    n = chain.n
    if n > DIAGONAL_MAX_N:
        raise ResourceLimitError(f"dense tree evaluation is limited to n <= {DIAGONAL_MAX_N}")
    if values.shape != (1 << n,):
        raise InvalidArgumentError(
            f"chain of depth {n} needs {1 << n} leaves, got {values.size}"
        )
    levels = [None] * (n + 1)
    levels[n] = values
    for depth in range(n, 0, -1):
        child = levels[depth]
        levels[depth - 1] = chain.ops[depth - 1].combine(child[0::2], child[1::2])
    return levels


def eval_tree_dense(chain: AltChain, leaves: Union[DiagonalOperator, np.ndarray]) -> float:
    """Root value of the full binary tree, O(2**n)"""
    return float(tree_levels(chain, leaves)[0][0])


def eval_chain_fast(chain: AltChain, start: Tuple[float, float] = E1_START) -> float:
    """
    High/Low recurrence for leaves built from E0/E1.

    Walking from qubit n up to qubit 1: on an odd qubit a zero hands the
    coin to Bob, so H is unchanged and L becomes op(H, L); on an even qubit
    a zero hands it to Alice, so L is unchanged and H becomes op(L, H). The
    empty prefix belongs to Alice, so the root is L.

    Args:
        chain: node operations, one per qubit
        start: (H, L) at the leaves, E1_START or E0_START

    Returns:
        Root value
    """
    high, low = start
    for i in range(chain.n, 0, -1):
        op = chain.ops[i - 1]
        if i % 2 == 1:
            low = op.combine(high, low)
        else:
            high = op.combine(low, high)
    return float(low)


def eval_beta_fast(p: ProtocolParams) -> float:
    """Bound on cheating Bob, (1/c) * L0**2"""
    root = eval_chain_fast(beta_chain(p.a), E1_START)
    return root * root / p.c


def eval_alpha_fast(p: ProtocolParams) -> float:
    """Bound on cheating Alice: Bob's bound on (1, a_1..a_n) with honest probability 1 - c"""
    return eval_beta_fast(role_switched(p))


def eval_constraint_fast(p: ProtocolParams) -> float:
    """Honest probability that Bob wins"""
    return eval_chain_fast(constraint_chain(p.a), E1_START)


def dual_bound(p: ProtocolParams, side: str) -> float:
    """
    Cheating bound normalized by the side's actual honest winning probability.

    The verification projector is normalized by <psi|E(x)E|psi>, so this is
    the value that bounds every cheating strategy. It equals eval_beta_fast
    (side B) or eval_alpha_fast (side A) whenever the constraint meets c.
    A side that never wins honestly cannot pass verification and gets 0.
    """
    if side not in ("A", "B"):
        raise InvalidArgumentError(f"side must be 'A' or 'B', got {side!r}")
    q = p if side == "B" else role_switched(p)
    root = eval_chain_fast(beta_chain(q.a), E1_START)
    mass = eval_constraint_fast(q)
    if mass <= 0.0:
        return 0.0
    return root * root / mass


def classical_value(p: ProtocolParams, side: str) -> float:
    """Cheater's winning probability with the verification step removed"""
    start = E1_START if side == "B" else E0_START
    return min(1.0, eval_chain_fast(sum_max_chain(p.a, side), start))


def dense_values(p: ProtocolParams) -> Tuple[float, float, float]:
    """(alpha, beta, constraint) from the exponential evaluator"""
    e0, e1 = build_outcome_projectors(p.n)
    beta_root = eval_tree_dense(beta_chain(p.a), e1)
    alpha_root = eval_tree_dense(alpha_chain(p.a), e0)
    constraint = eval_tree_dense(constraint_chain(p.a), e1)
    return alpha_root ** 2 / (1.0 - p.c), beta_root ** 2 / p.c, constraint


def _relative(x: float, y: float) -> float:
    scale = max(abs(x), abs(y))
    return abs(x - y) / scale if scale > 0.0 else 0.0


def bounds(p: ProtocolParams, cross_check: bool = False) -> BoundReport:
    """
    alpha, beta and the constraint for p; bias_bound = max(alpha, beta) - c.

    With cross_check the fast values are compared with the dense evaluator
    (n <= DIAGONAL_MAX_N) and the largest relative discrepancy is reported.
    """
    alpha = eval_alpha_fast(p)
    beta = eval_beta_fast(p)
    constraint = eval_constraint_fast(p)
    report = BoundReport(p.n, alpha, beta, constraint, max(alpha, beta) - p.c, p.c)
    if cross_check:
        dense = dense_values(p)
        report.dense_residual = max(
            _relative(x, y) for x, y in zip((alpha, beta, constraint), dense)
        )
        if report.dense_residual > 1e-9:
            logger.warning(
                "fast and dense evaluation disagree for n=%d (relative %.3g)",
                p.n, report.dense_residual,
            )
    return report
