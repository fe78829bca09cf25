#!/usr/bin/env python3
"""
Cheating strategies and primal lower bounds

The game is simulated on 2n protocol particles plus the cheater's ancillas.
Particles i and n+i start in |phi_i>; whoever sends message i prepared the
pair. Message i is particle n+i from Alice (i odd) or particle i from Bob
(i even). Afterwards the cheater hands over everything he or she still
holds, and the honest party measures the verification projector of the
cheater's desired outcome.

A strategy is one unitary per message the cheater sends plus one before
the final hand-over, each acting on the registers held at that moment.
The honest party never acts on the state before the final measurement,
so the wiring is just a choice of axes.

ascend improves a random strategy with two kinds of steps:
- see-saw: replace one stage by the unitary polar factor of its gradient
  (the value is a convex quadratic in each stage, so this never lowers it)
- geodesic kick: U <- expm(i t H) U for a random Hermitian H, kept only
  if the value does not drop; t adapts to the acceptance rate
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.stats import unitary_group

from weakcoin.errors import (
    DegenerateProtocolError,
    InvalidArgumentError,
    ResourceLimitError,
)
from weakcoin.protocol import (
    ProtocolParams,
    PureState,
    build_honest_state,
    build_phi,
    build_verification_projector,
)
from weakcoin.trees import dual_bound, eval_constraint_fast

logger = logging.getLogger(__name__)

MAX_TOTAL_QUBITS = 22
MAX_STAGE_QUBITS = 10
MONOTONE_TOL = 1e-12
ISOMETRY_TOL = 1e-10


# ============================================================================
# Types
# ============================================================================

@dataclass
class CheatStrategy:
    """One unitary per cheater stage; initial_state defaults to honest pairs and blank ancillas"""
    side: str
    ancilla_qubits: int
    stages: List[np.ndarray]
    initial_state: Optional[PureState] = None

    def isometry_residual(self) -> float:
        """max ||U^dagger U - I|| over the stages"""
        worst = 0.0
        for u in self.stages:
            worst = max(worst, float(np.abs(u.conj().T @ u - np.eye(u.shape[1])).max()))
        return worst


@dataclass
class AscentResult:
    """Best strategy found by ascend and the per-iteration values"""
    value: float
    strategy: CheatStrategy
    iterations: int
    trace: List[float] = field(default_factory=list)
    accepted_kicks: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "side": self.strategy.side,
            "value": self.value,
            "iterations": self.iterations,
            "ancilla_qubits": self.strategy.ancilla_qubits,
            "accepted_kicks": self.accepted_kicks,
        }


@dataclass
class GapRow:
    """Primal lower bound against the dual upper bound for one side"""
    side: str
    lower: float
    upper: float
    gap: float
    note: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "side": self.side,
            "lower": self.lower,
            "upper": self.upper,
            "gap": self.gap,
            "note": self.note,
        }


# ============================================================================
# Message schedule
# ============================================================================

def _check_side(side: str) -> str:
    if side not in ("A", "B"):
        raise InvalidArgumentError(f"side must be 'A' or 'B', got {side!r}")
    return side


def cheater_pairs(n: int, side: str) -> List[int]:
    """Messages whose pair the cheater prepares (1-based)"""
    parity = 0 if _check_side(side) == "B" else 1
    return [i for i in range(1, n + 1) if i % 2 == parity]


def stage_registers(n: int, side: str, ancilla_qubits: int) -> List[Tuple[int, ...]]:
    """
    Axes each stage acts on (0-based; particle j is axis j-1, ancillas follow
    the 2n particles). The last entry is the stage before the final hand-over.
    """
    _check_side(side)
    anc = set(range(2 * n, 2 * n + ancilla_qubits))
    held = set(anc)
    for i in cheater_pairs(n, side):
        held.update((i - 1, n + i - 1))

    stages = []
    for i in range(1, n + 1):
        alice_sends = i % 2 == 1
        if side == "B":
            if alice_sends:
                held.add(n + i - 1)
            else:
                stages.append(tuple(sorted(held)))
                held.discard(i - 1)
        else:
            if alice_sends:
                stages.append(tuple(sorted(held)))
                held.discard(n + i - 1)
            else:
                held.add(i - 1)
    stages.append(tuple(sorted(held)))
    return stages


def _check_limits(n: int, side: str, ancilla_qubits: int) -> List[Tuple[int, ...]]:
    if ancilla_qubits < 0:
        raise InvalidArgumentError(f"ancilla_qubits must be >= 0, got {ancilla_qubits}")
    total = 2 * n + ancilla_qubits
    if total > MAX_TOTAL_QUBITS:
        raise ResourceLimitError(
            f"{total} simulated qubits exceeds the limit of {MAX_TOTAL_QUBITS}"
        )
    registers = stage_registers(n, side, ancilla_qubits)
    widest = max(len(r) for r in registers)
    if widest > MAX_STAGE_QUBITS:
        raise ResourceLimitError(
            f"a stage acting on {widest} qubits exceeds the limit of {MAX_STAGE_QUBITS}"
        )
    return registers


# ============================================================================
# State evolution
# ============================================================================

def _apply(psi: np.ndarray, u: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Apply u to the listed axes of psi (first listed axis is the most significant)"""
    k = len(axes)
    out = np.tensordot(u.reshape([2] * (2 * k)), psi, (tuple(range(k, 2 * k)), tuple(axes)))
    return np.moveaxis(out, tuple(range(k)), tuple(axes))


def _initial_state(p: ProtocolParams, strategy: CheatStrategy) -> np.ndarray:
    n, anc = p.n, strategy.ancilla_qubits
    if strategy.initial_state is None:
        psi = build_honest_state(p).amp
        blank = np.zeros(1 << anc, dtype=complex)
        blank[0] = 1.0
        return np.kron(psi, blank).reshape([2] * (2 * n + anc))

    # honest party's pairs (x) the cheater's prepared registers, then reorder
    own = cheater_pairs(n, strategy.side)
    honest = [i for i in range(1, n + 1) if i not in own]
    cheater_axes = sorted([i - 1 for i in own] + [n + i - 1 for i in own]) + list(
        range(2 * n, 2 * n + anc)
    )
    if strategy.initial_state.k != len(cheater_axes):
        raise InvalidArgumentError(
            f"initial_state must cover {len(cheater_axes)} cheater qubits, got {strategy.initial_state.k}"
        )
    amp = np.ones(1, dtype=complex)
    axes: List[int] = []
    for i in honest:
        amp = np.kron(amp, build_phi(p.a[i - 1]).amp)
        axes += [i - 1, n + i - 1]
    amp = np.kron(amp, strategy.initial_state.amp)
    axes += cheater_axes
    tensor = amp.reshape([2] * len(axes))
    return np.moveaxis(tensor, tuple(range(len(axes))), tuple(axes))


def _target(p: ProtocolParams, side: str) -> np.ndarray:
    """Verification vector of the cheater's desired outcome as a 2n-axis tensor"""
    outcome = 1 if side == "B" else 0
    f = build_verification_projector(p, outcome).vector
    return f.reshape([2] * (2 * p.n))


def _check_shape(p: ProtocolParams, strategy: CheatStrategy) -> List[Tuple[int, ...]]:
    registers = _check_limits(p.n, _check_side(strategy.side), strategy.ancilla_qubits)
    if len(strategy.stages) != len(registers):
        raise InvalidArgumentError(
            f"side {strategy.side} with n={p.n} needs {len(registers)} stages, got {len(strategy.stages)}"
        )
    for u, reg in zip(strategy.stages, registers):
        dim = 1 << len(reg)
        if u.shape != (dim, dim):
            raise InvalidArgumentError(f"stage on {len(reg)} qubits must be {dim} x {dim}, got {u.shape}")
        if np.abs(u.conj().T @ u - np.eye(dim)).max() > ISOMETRY_TOL:
            raise InvalidArgumentError(f"stage on axes {reg} is not unitary")
    return registers


class _Game:
    """Cached pieces for repeated evaluation of one (params, side, ancilla) game"""

    def __init__(self, p: ProtocolParams, strategy: CheatStrategy):
        self.p = p
        self.registers = _check_shape(p, strategy)
        self.start = _initial_state(p, strategy)
        self.target = _target(p, strategy.side)
        self.particle_axes = tuple(range(2 * p.n))

    def forward(self, stages: Sequence[np.ndarray]) -> List[np.ndarray]:
        """States before each stage, then the final state"""
        states = [self.start]
        for u, reg in zip(stages, self.registers):
            states.append(_apply(states[-1], u, reg))
        return states

    def overlap(self, final: np.ndarray) -> np.ndarray:
        """(<f| (x) I_anc) applied to the final state"""
        return np.tensordot(self.target.conj(), final, (self.particle_axes, self.particle_axes))

    def value(self, stages: Sequence[np.ndarray]) -> float:
        amp = self.overlap(self.forward(stages)[-1])
        return float(np.vdot(amp, amp).real)

    def projected(self, final: np.ndarray) -> np.ndarray:
        """(|f><f| (x) I_anc) applied to the final state"""
        amp = self.overlap(final)
        return np.tensordot(self.target, amp, 0) if amp.ndim else self.target * amp

    def seesaw(self, stages: List[np.ndarray], k: int) -> None:
        """Replace stage k in place by the polar factor of its gradient"""
        states = self.forward(stages)
        chi = self.projected(states[-1])
        for j in range(len(stages) - 1, k, -1):
            chi = _apply(chi, stages[j].conj().T, self.registers[j])
        reg = self.registers[k]
        rest = tuple(ax for ax in range(chi.ndim) if ax not in reg)
        dim = 1 << len(reg)
        chi_m = np.transpose(chi, reg + rest).reshape(dim, -1)
        phi_m = np.transpose(states[k], reg + rest).reshape(dim, -1)
        grad = chi_m @ phi_m.conj().T
        if np.linalg.norm(grad) == 0.0:
            return
        unitary, _ = linalg.polar(grad)
        stages[k] = unitary


# ============================================================================
# Strategies
# ============================================================================

def honest_strategy(p: ProtocolParams, side: str, ancilla_qubits: int = 0) -> CheatStrategy:
    """Every stage the identity"""
    registers = _check_limits(p.n, _check_side(side), ancilla_qubits)
    return CheatStrategy(side, ancilla_qubits, [np.eye(1 << len(r), dtype=complex) for r in registers])


def random_strategy(
    p: ProtocolParams, side: str, ancilla_qubits: int, rng: np.random.Generator
) -> CheatStrategy:
    """Haar-random stage unitaries"""
    registers = _check_limits(p.n, _check_side(side), ancilla_qubits)
    stages = [
        np.asarray(unitary_group.rvs(1 << len(r), random_state=rng), dtype=complex)
        for r in registers
    ]
    return CheatStrategy(side, ancilla_qubits, stages)


def cheat_value(p: ProtocolParams, strategy: CheatStrategy) -> float:
    """
    Probability that the honest party's verification accepts the cheater's
    desired outcome (F1 for a cheating Bob, F0 for a cheating Alice).

    Raises:
        InvalidArgumentError: stage count or sizes do not match the schedule
        ResourceLimitError: more than MAX_TOTAL_QUBITS simulated qubits
        DegenerateProtocolError: the verification projector is undefined
    """
    return _Game(p, strategy).value(strategy.stages)


def _random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = (x + x.conj().T) / 2
    return h / np.linalg.norm(h, 2)


def ascend(
    p: ProtocolParams, side: str, ancilla_qubits: int, iters: int, seed: int
) -> AscentResult:
    """
    Local ascent from a random strategy.

    Each iteration makes one see-saw update of a stage (cycling through the
    stages) and one random geodesic kick on a random stage. Steps that would
    lower the value are rejected, so the trace never decreases.

    Args:
        p: protocol instance
        side: cheating party, "A" or "B"
        ancilla_qubits: private qubits of the cheater
        iters: number of iterations (0 evaluates the initial strategy only)
        seed: seed for numpy's default generator

    Returns:
        AscentResult with the best strategy and the value after each iteration
    """
    if iters < 0:
        raise InvalidArgumentError(f"iters must be >= 0, got {iters}")
    rng = np.random.default_rng(seed)
    strategy = random_strategy(p, side, ancilla_qubits, rng)
    game = _Game(p, strategy)
    stages = strategy.stages
    value = game.value(stages)
    trace = [value]
    step = 0.3
    accepted = 0

    for it in range(iters):
        k = it % len(stages)
        trial = list(stages)
        game.seesaw(trial, k)
        trial_value = game.value(trial)
        if trial_value >= value - MONOTONE_TOL:
            stages, value = trial, trial_value

        k = int(rng.integers(len(stages)))
        kick = linalg.expm(1j * step * _random_hermitian(stages[k].shape[0], rng))
        trial = list(stages)
        trial[k] = kick @ stages[k]
        trial_value = game.value(trial)
        if trial_value >= value:
            stages, value = trial, trial_value
            accepted += 1
            step = min(1.0, step * 1.2)
        else:
            step = max(1e-4, step * 0.5)
        trace.append(value)

    logger.debug(
        "ascent side %s n=%d: %.9f after %d iterations (%d kicks accepted)",
        side, p.n, value, iters, accepted,
    )
    best = CheatStrategy(side, ancilla_qubits, stages)
    return AscentResult(value, best, iters, trace, accepted)


def upper_bound(p: ProtocolParams, side: str) -> float:
    """Dual bound for the side, capped at 1"""
    return min(1.0, dual_bound(p, _check_side(side)))


def gap_report(
    p: ProtocolParams, ancilla_qubits: int = 1, iters: int = 300, seed: int = 0
) -> List[GapRow]:
    """
    Ascent lower bounds against the dual upper bounds for both sides.

    The honest strategy is always a candidate, so lower is at least the
    honest winning probability. A side whose verification projector is
    undefined can never win and is reported with lower = upper = 0.
    """
    rows = []
    for offset, side in enumerate(("B", "A")):
        upper = upper_bound(p, side)
        honest = eval_constraint_fast(p)
        honest = honest if side == "B" else 1.0 - honest
        try:
            result = ascend(p, side, ancilla_qubits, iters, seed + offset)
        except DegenerateProtocolError as exc:
            logger.debug("side %s skipped: %s", side, exc.message)
            rows.append(GapRow(side, 0.0, upper, upper, "verification projector undefined"))
            continue
        lower = min(1.0, max(result.value, honest))
        note = "honest play" if honest > result.value else ""
        rows.append(GapRow(side, lower, upper, upper - lower, note))
    return rows
