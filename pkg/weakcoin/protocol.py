#!/usr/bin/env python3
"""
Protocol objects for the weak coin-flipping family indexed by n

Provides:
- ProtocolParams: n, the weights a_1..a_n and the honest target c
- DiagonalOperator / PureState / RankOneProjector value types
- Outcome projectors E0/E1 (inductive construction and first-zero scan)
- Honest states |phi_i>, |psi>, |xi>, |xi_A>, |xi_B>
- Verification projectors F0/F1
- Honest execution sampling (single run and batched)

Basis convention: qubit 1 is the most significant bit, so the string
b_1..b_n maps to the integer sum(b_i * 2**(n - i)).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from weakcoin.errors import (
    DegenerateProtocolError,
    InvalidArgumentError,
    ResourceLimitError,
)

logger = logging.getLogger(__name__)


# ============================================================================
# Constants
# ============================================================================

# Full 2n-qubit state vectors (4**n amplitudes)
FULL_STATE_MAX_N = 10
# Diagonal operators over n qubits (2**n entries)
DIAGONAL_MAX_N = 14
# Dense rank-one projector matrices
DENSE_PROJECTOR_MAX_QUBITS = 10

NORM_TOL = 1e-12


# ============================================================================
# Parameters and basis
# ============================================================================

@dataclass(frozen=True)
class ProtocolParams:
    """A protocol instance: n coin-determining messages with weights a_1..a_n"""
    n: int
    a: Tuple[float, ...]
    c: float = 0.5

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)):
            raise InvalidArgumentError(f"n must be an integer, got {self.n!r}")
        if self.n < 1:
            raise InvalidArgumentError(f"n must be at least 1, got {self.n}")
        weights = tuple(float(x) for x in self.a)
        if len(weights) != self.n:
            raise InvalidArgumentError(
                f"expected {self.n} weights, got {len(weights)}",
                {"n": int(self.n), "count": len(weights)},
            )
        for i, x in enumerate(weights, start=1):
            if not (0.0 <= x <= 1.0):
                raise InvalidArgumentError(f"weight a_{i}={x!r} is outside [0, 1]")
        c = float(self.c)
        if not (0.0 < c < 1.0):
            raise InvalidArgumentError(f"honest probability c={c!r} is outside (0, 1)")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "a", weights)
        object.__setattr__(self, "c", c)

    @classmethod
    def from_weights(cls, a: Sequence[float], c: float = 0.5) -> "ProtocolParams":
        return cls(len(a), tuple(a), c)

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.a, dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "a": list(self.a), "c": self.c}


def basis_index(bits: Sequence[int]) -> int:
    """Map b_1..b_n (b_1 leftmost) to its integer index"""
    index = 0
    for b in bits:
        if b not in (0, 1):
            raise InvalidArgumentError(f"basis bits must be 0 or 1, got {b!r}")
        index = (index << 1) | int(b)
    return index


def basis_bits(index: int, n: int) -> Tuple[int, ...]:
    """Inverse of basis_index for an n-bit string"""
    if not (0 <= index < (1 << n)):
        raise InvalidArgumentError(f"index {index} out of range for {n} qubits")
    return tuple((index >> (n - 1 - i)) & 1 for i in range(n))


def bit_table(n: int) -> np.ndarray:
    """(2**n, n) array of basis bits; column i holds qubit i+1"""
    idx = np.arange(1 << n)
    shifts = n - 1 - np.arange(n)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def _check_diagonal_size(n: int):
    if n > DIAGONAL_MAX_N:
        raise ResourceLimitError(
            f"diagonal operators are limited to n <= {DIAGONAL_MAX_N}, got n={n}"
        )


def _check_full_state_size(n: int):
    if n > FULL_STATE_MAX_N:
        raise ResourceLimitError(
            f"full-state simulation is limited to n <= {FULL_STATE_MAX_N}, got n={n}"
        )


# ============================================================================
# Value types
# ============================================================================

@dataclass(eq=False)
class DiagonalOperator:
    """Real diagonal operator over n-qubit basis strings"""
    n: int
    d: np.ndarray

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float)
        if self.d.shape != (1 << self.n,):
            raise InvalidArgumentError(
                f"diagonal over {self.n} qubits needs {1 << self.n} entries, got {self.d.size}"
            )

    def is_projector(self) -> bool:
        return bool(np.all((self.d == 0.0) | (self.d == 1.0)))

    def is_nonnegative(self) -> bool:
        return bool(np.all(self.d >= 0.0))

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.d)

    def matrix(self) -> np.ndarray:
        return np.diag(self.d)

    def tolist(self) -> List[float]:
        return [float(x) for x in self.d]


@dataclass(eq=False)
class PureState:
    """Complex amplitudes over k-qubit basis strings"""
    k: int
    amp: np.ndarray

    def __post_init__(self):
        self.amp = np.asarray(self.amp, dtype=complex)
        if self.amp.shape != (1 << self.k,):
            raise InvalidArgumentError(
                f"state on {self.k} qubits needs {1 << self.k} amplitudes, got {self.amp.size}"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.amp))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm() ** 2 - 1.0) <= tol

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amp) ** 2

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per qubit"""
        return self.amp.reshape([2] * self.k) if self.k else self.amp.reshape(())


@dataclass(eq=False)
class RankOneProjector:
    """|v><v| stored through its unit vector v"""
    k: int
    vector: np.ndarray

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=complex)

    def matrix(self) -> np.ndarray:
        if self.k > DENSE_PROJECTOR_MAX_QUBITS:
            raise ResourceLimitError(
                f"dense projector matrices are limited to {DENSE_PROJECTOR_MAX_QUBITS} qubits"
            )
        return np.outer(self.vector, self.vector.conj())

    def trace(self) -> float:
        return float(np.vdot(self.vector, self.vector).real)

    def expectation(self, state: PureState) -> float:
        """<state|F|state>"""
        return float(abs(np.vdot(self.vector, state.amp)) ** 2)


# ============================================================================
# Outcome projectors
# ============================================================================

def first_zero_winner(bits: Sequence[int]) -> int:
    """
    Winner of a basis string under the scan rule.

    Bits are read from qubit n down to qubit 1. The first zero found at an
    odd position i was sent by Alice, so Bob wins (1); at an even position
    Alice wins (0). A string of all ones goes to Alice.
    """
    for i in range(len(bits), 0, -1):
        if bits[i - 1] == 0:
            return 1 if i % 2 == 1 else 0
    return 0


def build_outcome_projectors(n: int) -> Tuple[DiagonalOperator, DiagonalOperator]:
    """
    E0 and E1 over n qubits by induction on n.

    E0^(k+1) = I (x) E1^(k) + |1..1><1..1|
    E1^(k+1) = I (x) E0^(k) - |1..1><1..1|

    with base case E1^(1) = |0><0| and E0^(1) = |1><1|.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n!r}")
    _check_diagonal_size(n)

    e0 = np.array([0.0, 1.0])
    e1 = np.array([1.0, 0.0])
    for _ in range(1, n):
        ones = np.ones(2)
        e0, e1 = np.kron(ones, e1), np.kron(ones, e0)
        e0[-1] += 1.0
        e1[-1] -= 1.0
    return DiagonalOperator(n, e0), DiagonalOperator(n, e1)


def scan_outcome_projectors(n: int) -> Tuple[DiagonalOperator, DiagonalOperator]:
    """E0 and E1 built directly from first_zero_winner, vectorized over strings"""
    _check_diagonal_size(n)
    bits = bit_table(n)
    zeros = bits[:, ::-1] == 0
    has_zero = zeros.any(axis=1)
    # position (1-based) of the highest-numbered qubit holding a zero
    position = n - np.argmax(zeros, axis=1)
    bob = has_zero & (position % 2 == 1)
    e1 = bob.astype(float)
    return DiagonalOperator(n, 1.0 - e1), DiagonalOperator(n, e1)


def outcome_projector(n: int, outcome: int) -> DiagonalOperator:
    if outcome not in (0, 1):
        raise InvalidArgumentError(f"outcome must be 0 or 1, got {outcome!r}")
    return build_outcome_projectors(n)[outcome]


# ============================================================================
# States
# ============================================================================

def _check_weight(a_i: float) -> float:
    x = float(a_i)
    if not (0.0 <= x <= 1.0):
        raise InvalidArgumentError(f"weight {a_i!r} is outside [0, 1]")
    return x


def build_phi(a_i: float) -> PureState:
    """sqrt(a_i)|00> + sqrt(1 - a_i)|11>"""
    x = _check_weight(a_i)
    return PureState(2, [math.sqrt(x), 0.0, 0.0, math.sqrt(1.0 - x)])


def build_xi(p: ProtocolParams) -> PureState:
    """Product state with amplitude prod_i sqrt(w_i(b_i)), w_i(0)=a_i, w_i(1)=1-a_i"""
    _check_diagonal_size(p.n)
    amp = np.ones(1)
    for x in p.a:
        amp = np.kron(amp, [math.sqrt(x), math.sqrt(1.0 - x)])
    return PureState(p.n, amp)


def _honest_matrix(p: ProtocolParams) -> np.ndarray:
    """|psi> as a 2**n x 2**n matrix: rows are particles 1..n, columns n+1..2n"""
    _check_full_state_size(p.n)
    xi = build_xi(p).amp
    return np.diag(xi)


def build_honest_state(p: ProtocolParams) -> PureState:
    """
    The 2n-qubit honest state, |phi_i> carried by particles i and n+i.

    Every pair is perfectly correlated, so the only nonzero amplitudes sit on
    strings (b, b) and equal the |xi> amplitude of b.
    """
    return PureState(2 * p.n, _honest_matrix(p).reshape(-1))


def side_masses(p: ProtocolParams) -> Tuple[float, float]:
    """Honest winning probabilities (Alice, Bob) = (<xi|E0|xi>, <xi|E1|xi>)"""
    e0, e1 = build_outcome_projectors(p.n)
    w = build_xi(p).probabilities()
    return float(np.dot(w, e0.d)), float(np.dot(w, e1.d))


def build_xi_sides(p: ProtocolParams) -> Tuple[PureState, PureState]:
    """Normalized E0|xi> and E1|xi>, returned as (xi_A, xi_B)"""
    e0, e1 = build_outcome_projectors(p.n)
    xi = build_xi(p).amp
    sides = []
    for name, e in (("A", e0), ("B", e1)):
        projected = e.d * xi
        mass = float(np.vdot(projected, projected).real)
        if mass <= 0.0:
            raise DegenerateProtocolError(
                f"side {name} has zero honest winning probability",
                {"side": name, "params": p.to_dict()},
            )
        sides.append(PureState(p.n, projected / math.sqrt(mass)))
    return sides[0], sides[1]


def build_verification_projector(p: ProtocolParams, outcome: int) -> RankOneProjector:
    """F_i: projector onto the normalized (E_i (x) E_i)|psi>"""
    e = outcome_projector(p.n, outcome).d
    m = _honest_matrix(p)
    projected = (e[:, None] * m * e[None, :]).reshape(-1)
    mass = float(np.vdot(projected, projected).real)
    if mass <= 0.0:
        raise DegenerateProtocolError(
            f"verification projector F{outcome} is undefined: <psi|E{outcome}xE{outcome}|psi> = 0",
            {"outcome": outcome, "params": p.to_dict()},
        )
    return RankOneProjector(2 * p.n, projected / math.sqrt(mass))


def correlation_residual(p: ProtocolParams, outcome: int = 1) -> float:
    """|| (E (x) I)|psi> - (I (x) E)|psi> ||"""
    e = outcome_projector(p.n, outcome).d
    m = _honest_matrix(p)
    return float(np.linalg.norm(e[:, None] * m - m * e[None, :]))


# ============================================================================
# Role switch and parity reductions
# ============================================================================

def role_switched(p: ProtocolParams) -> ProtocolParams:
    """(1, a_1..a_n): Alice's side of p becomes Bob's side of an (n+1)-message instance"""
    return ProtocolParams(p.n + 1, (1.0,) + p.a, 1.0 - p.c)


def padded(p: ProtocolParams) -> ProtocolParams:
    """(a_1..a_n, 0): same bounds with one more message"""
    return ProtocolParams(p.n + 1, p.a + (0.0,), p.c)


# ============================================================================
# Honest execution
# ============================================================================

@dataclass
class HonestTranscript:
    """Outcome of one honest run"""
    alice_outcome: int
    bob_outcome: int
    verification_passed: bool
    verifier: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alice_outcome": self.alice_outcome,
            "bob_outcome": self.bob_outcome,
            "verification_passed": self.verification_passed,
            "verifier": self.verifier,
        }


@dataclass
class HonestRunSummary:
    """Aggregate of many honest runs"""
    runs: int
    bob_wins: int
    alice_wins: int
    disagreements: int
    verification_failures: int
    seed: int = 0
    constraint: float = float("nan")

    @property
    def bob_win_frequency(self) -> float:
        return self.bob_wins / self.runs if self.runs else float("nan")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "runs": self.runs,
            "bob_wins": self.bob_wins,
            "alice_wins": self.alice_wins,
            "bob_win_frequency": self.bob_win_frequency,
            "disagreements": self.disagreements,
            "verification_failures": self.verification_failures,
            "constraint": self.constraint,
            "seed": self.seed,
        }


@dataclass
class _HonestModel:
    joint: np.ndarray            # joint[i, j] = P(Alice sees i, Bob sees j)
    pass_probability: np.ndarray  # pass_probability[i, j]: F_i accepts branch (i, j)
    constraint: float = field(default=float("nan"))


def assemble_pairs(p: ProtocolParams) -> np.ndarray:
    """
    Honest state built pair by pair from |phi_1>..|phi_n>, as a 2**n x 2**n
    matrix whose rows are Alice's particles 1..n and columns Bob's n+1..2n.
    """
    _check_full_state_size(p.n)
    amp = np.ones(1, dtype=complex)
    for x in p.a:
        amp = np.kron(amp, build_phi(x).amp)
    # kron order is (1, n+1, 2, n+2, ...)
    order = [2 * k for k in range(p.n)] + [2 * k + 1 for k in range(p.n)]
    tensor = amp.reshape([2] * (2 * p.n)).transpose(order)
    return tensor.reshape(1 << p.n, 1 << p.n)


def _honest_model(p: ProtocolParams) -> _HonestModel:
    """
    Outcome and verification probabilities of the honest protocol.

    The state is assembled from the pairs, each party projects its own
    particles, and the loser's F of Alice's outcome is applied to the
    resulting branch of the full state.
    """
    m = assemble_pairs(p)
    e0, e1 = build_outcome_projectors(p.n)
    projectors = (e0.d, e1.d)

    joint = np.zeros((2, 2))
    passing = np.zeros((2, 2))
    verifiers: Dict[int, Optional[RankOneProjector]] = {}
    for i, ea in enumerate(projectors):
        for j, eb in enumerate(projectors):
            branch = (ea[:, None] * m * eb[None, :]).reshape(-1)
            mass = float(np.vdot(branch, branch).real)
            joint[i, j] = mass
            if mass <= 0.0:
                continue
            if i not in verifiers:
                try:
                    verifiers[i] = build_verification_projector(p, i)
                except DegenerateProtocolError:
                    verifiers[i] = None
            f = verifiers[i]
            if f is not None:
                passing[i, j] = abs(np.vdot(f.vector, branch)) ** 2 / mass
    joint = joint / joint.sum()
    return _HonestModel(joint, np.clip(passing, 0.0, 1.0), float(joint[1, 1]))


def simulate_honest_run(p: ProtocolParams, seed: int) -> HonestTranscript:
    """
    Sample one honest execution.

    Both parties measure their halves with {E0, E1}; the loser then checks
    the returned qubits with F of the announced outcome.

    Args:
        p: protocol instance (n <= FULL_STATE_MAX_N)
        seed: seed for numpy's default generator

    Returns:
        HonestTranscript
    """
    model = _honest_model(p)
    rng = np.random.default_rng(seed)
    cell = int(rng.choice(4, p=model.joint.reshape(-1)))
    alice, bob = divmod(cell, 2)
    passed = bool(rng.random() < model.pass_probability[alice, bob])
    # the loser verifies: Alice when Bob wins, Bob otherwise
    verifier = "A" if alice == 1 else "B"
    return HonestTranscript(alice, bob, passed, verifier)


def simulate_honest_runs(p: ProtocolParams, runs: int, seed: int) -> HonestRunSummary:
    """Batched version of simulate_honest_run sharing one generator"""
    if runs < 1:
        raise InvalidArgumentError(f"runs must be positive, got {runs}")
    model = _honest_model(p)
    rng = np.random.default_rng(seed)
    cells = rng.choice(4, size=runs, p=model.joint.reshape(-1))
    alice, bob = np.divmod(cells, 2)
    passed = rng.random(runs) < model.pass_probability[alice, bob]
    summary = HonestRunSummary(
        runs=runs,
        bob_wins=int(np.count_nonzero(alice == 1)),
        alice_wins=int(np.count_nonzero(alice == 0)),
        disagreements=int(np.count_nonzero(alice != bob)),
        verification_failures=int(np.count_nonzero(~passed)),
        seed=seed,
        constraint=model.constraint,
    )
    logger.debug("honest runs n=%d: %s", p.n, summary.to_dict())
    return summary
