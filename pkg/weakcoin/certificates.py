#!/usr/bin/env python3
"""
Dual certificates for the cheating bounds

A certificate for side B is a nonnegative diagonal z with diag(z) >= v v^T,
where v = E1|xi>/sqrt(c_B) and c_B = <xi|E1|xi> is Bob's actual honest
winning probability; its Sum-Max tree value bounds cheating Bob. Side A
uses E0, c_A = <xi|E0|xi> and Alice's Sum-Max tree.

The optimal certificate comes from a leaf scaling S: with
K = sum_j s_j xi_j^2 e_j the choice z = (K/c_B) e/s meets the rank-one
condition with equality. The sigma recursion picks S so that the two values
entering every max node are equal, which brings the tree value down to the
closed-form bound K^2/c_B.

Also here:
- rank_one_margin: closed-form test of diag(z) >= v v^T
- lemma_min_trace: optimizer of min Tr(Z D) with Z >= 2 E|psi><psi|E
- block_absorb_certificate: absorbing a P-block into a dominating matrix
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from weakcoin.errors import (
    DegenerateProtocolError,
    InvalidArgumentError,
    ResourceLimitError,
)
from weakcoin.protocol import (
    DIAGONAL_MAX_N,
    DiagonalOperator,
    ProtocolParams,
    PureState,
    build_outcome_projectors,
    build_xi,
    padded,
    role_switched,
    side_masses,
)
from weakcoin.trees import NodeKind, beta_chain, sum_max_chain, tree_levels

logger = logging.getLogger(__name__)

ACCEPT_TOL = 1e-9
DEFAULT_ORACLE_MAX_QUBITS = 8
BLOCK_CHECK_MAX_DIM = 256


def _check_side(side: str) -> str:
    if side not in ("A", "B"):
        raise InvalidArgumentError(f"side must be 'A' or 'B', got {side!r}")
    return side


def side_probability(p: ProtocolParams, side: str) -> float:
    """
    Actual honest winning probability <xi|E|xi> of the side; equals c (or
    1 - c) only when the constraint holds.
    """
    alice, bob = side_masses(p)
    mass = bob if _check_side(side) == "B" else alice
    if mass <= 0.0:
        raise DegenerateProtocolError(
            f"side {side} has zero honest winning probability",
            {"side": side, "params": p.to_dict()},
        )
    return mass


def winner_vector(p: ProtocolParams, side: str) -> Tuple[np.ndarray, np.ndarray]:
    """(e, v): the winner's projector diagonal and the unit vector E|xi>/sqrt(<xi|E|xi>)"""
    e0, e1 = build_outcome_projectors(p.n)
    e = e1.d if _check_side(side) == "B" else e0.d
    xi = build_xi(p).amp.real
    return e, e * xi / math.sqrt(side_probability(p, side))


# ============================================================================
# Types
# ============================================================================

@dataclass
class SigmaNode:
    """Scaling factors at one max node (depth counts qubits fixed above it)"""
    depth: int
    index: int
    weight: float
    sigma: float
    sigma_left: float
    sigma_right: float

    @property
    def degenerate(self) -> bool:
        return self.sigma == 0.0 or self.sigma_left == 0.0 or self.sigma_right == 0.0


@dataclass
class SigmaAssignment:
    """sigma values for every max node of an odd-n Bob tree"""
    n: int
    nodes: List[SigmaNode] = field(default_factory=list)

    def node(self, depth: int, index: int) -> SigmaNode:
        for nd in self.nodes:
            if nd.depth == depth and nd.index == index:
                return nd
        raise KeyError((depth, index))

    def leaf_scaling(self) -> np.ndarray:
        """s_j = product over ancestors of sigma * sigma_left or sigma * sigma_right"""
        s = np.ones(1 << self.n)
        by_depth: Dict[int, List[SigmaNode]] = {}
        for nd in self.nodes:
            by_depth.setdefault(nd.depth, []).append(nd)
        for depth, nodes in by_depth.items():
            nodes = sorted(nodes, key=lambda nd: nd.index)
            pair = np.array([[nd.sigma * nd.sigma_left, nd.sigma * nd.sigma_right] for nd in nodes])
            s *= np.repeat(pair.reshape(-1), 1 << (self.n - depth - 1))
        return s


@dataclass
class CertReport:
    """Outcome of verify_certificate"""
    domination_margin: float
    balance_residual: float
    tree_match_residual: float
    psd_min_eig: float
    tree_value: float = float("nan")
    accepted: bool = False
    diagnostics: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "accepted": self.accepted,
            "domination_margin": self.domination_margin,
            "balance_residual": self.balance_residual,
            "tree_match_residual": self.tree_match_residual,
            "psd_min_eig": self.psd_min_eig,
            "tree_value": self.tree_value,
            "diagnostics": list(self.diagnostics),
        }


@dataclass
class DualCertificate:
    """Leaf scaling S, the diagonal z it induces and the certified bound"""
    params: ProtocolParams
    side: str
    s: DiagonalOperator
    z: DiagonalOperator
    K: float
    bound: float
    sigma: Optional[SigmaAssignment] = None

    def to_dict(self, report: Optional[CertReport] = None) -> Dict[str, Any]:
        doc = {
            "n": self.params.n,
            "a": list(self.params.a),
            "c": self.params.c,
            "side": self.side,
            "s": self.s.tolist(),
            "z": self.z.tolist(),
            "K": self.K,
            "bound": self.bound,
        }
        if report is not None:
            doc["report"] = report.to_dict()
        return doc


def certificate_from_dict(doc: Dict[str, Any]) -> DualCertificate:
    """Rebuild an exported certificate document"""
    try:
        params = ProtocolParams(int(doc["n"]), tuple(doc["a"]), float(doc.get("c", 0.5)))
        side = _check_side(doc["side"])
        return DualCertificate(
            params=params,
            side=side,
            s=DiagonalOperator(params.n, doc["s"]),
            z=DiagonalOperator(params.n, doc["z"]),
            K=float(doc["K"]),
            bound=float(doc["bound"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidArgumentError):
            raise
        raise InvalidArgumentError(f"malformed certificate document: {exc}") from exc


# ============================================================================
# Construction
# ============================================================================

def rms_levels(p: ProtocolParams) -> list:
    """Node values of Bob's RMS tree over E1 (levels[0][0] is K)"""
    _, e1 = build_outcome_projectors(p.n)
    return tree_levels(beta_chain(p.a), e1)


def sigma_assignment(p: ProtocolParams) -> SigmaAssignment:
    """
    sigma recursion on an odd-n instance.

    At a max node mu on qubit d+1 (d odd) with children of RMS-tree value
    R_L, R_R: sigma_L = R_L, sigma_R = R_R and
    sigma = (a R_L^2 + (1-a) R_R^2)^(-1/2). A zero bracket marks the node
    degenerate (sigma = 0); every leaf below then has zero weight or zero e.
    """
    if p.n % 2 == 0:
        raise InvalidArgumentError("the sigma recursion runs on odd n only")
    levels = rms_levels(p)
    nodes = []
    for depth in range(1, p.n, 2):
        parent = levels[depth]
        child = levels[depth + 1]
        weight = p.a[depth]
        for k in range(parent.size):
            r = float(parent[k])
            nodes.append(SigmaNode(
                depth=depth,
                index=k,
                weight=weight,
                sigma=1.0 / r if r > 0.0 else 0.0,
                sigma_left=float(child[2 * k]),
                sigma_right=float(child[2 * k + 1]),
            ))
    degenerate = sum(nd.degenerate for nd in nodes)
    if degenerate:
        logger.debug("%d of %d max nodes are degenerate", degenerate, len(nodes))
    return SigmaAssignment(p.n, nodes)


def certificate_from_scaling(p: ProtocolParams, side: str, s: Sequence[float]) -> DualCertificate:
    """
    Certificate induced by an arbitrary leaf scaling.

    s must be positive wherever v is nonzero; entries with s_j = 0 get
    z_j = 0. S is renormalized so that K equals the Sum-Max tree value of
    e/s, which makes bound = K^2/c_side = tree value of z.
    """
    _check_side(side)
    if p.n > DIAGONAL_MAX_N:
        raise ResourceLimitError(f"certificates are limited to n <= {DIAGONAL_MAX_N}")
    s = np.asarray(s, dtype=float)
    if s.shape != (1 << p.n,):
        raise InvalidArgumentError(f"scaling needs {1 << p.n} entries, got {s.size}")
    if np.any(s < 0.0) or not np.all(np.isfinite(s)):
        raise InvalidArgumentError("scaling entries must be finite and nonnegative")

    e, v = winner_vector(p, side)
    if np.any((v != 0.0) & (s <= 0.0)):
        bad = np.flatnonzero((v != 0.0) & (s <= 0.0))
        raise DegenerateProtocolError(
            "scaling vanishes on the support of the winner's state",
            {"indices": bad.tolist()[:16]},
        )
    c_side = side_probability(p, side)
    xi2 = build_xi(p).probabilities()
    active = (s > 0.0) & (e > 0.0)
    ratio = np.zeros_like(s)
    ratio[active] = e[active] / s[active]

    k_raw = float(np.sum(s * xi2 * e))
    t_raw = float(tree_levels(sum_max_chain(p.a, side), ratio)[0][0])
    if k_raw <= 0.0 or t_raw <= 0.0:
        raise DegenerateProtocolError(
            f"side {side} has no winning support under this scaling",
            {"K": k_raw, "tree": t_raw},
        )
    t = math.sqrt(t_raw / k_raw)
    s = t * s
    K = t * k_raw
    z = np.zeros_like(s)
    z[active] = (K / c_side) * e[active] / s[active]
    return DualCertificate(
        params=p,
        side=side,
        s=DiagonalOperator(p.n, s),
        z=DiagonalOperator(p.n, z),
        K=K,
        bound=K * K / c_side,
    )


def _direct_instance(p: ProtocolParams, side: str) -> Tuple[ProtocolParams, int, int]:
    """
    Odd-n side-B instance that carries the same bound.

    Returns (q, prefix, suffix): q is p role-switched for side A and padded
    for even length; an original string b sits in q at (0*prefix, b, 1*suffix).
    """
    q, prefix, suffix = p, 0, 0
    if side == "A":
        q, prefix = role_switched(q), 1
    if q.n % 2 == 0:
        q, suffix = padded(q), 1
    return q, prefix, suffix


def _pull_back(values: np.ndarray, n: int, suffix: int) -> np.ndarray:
    """Entries of the reduced instance at strings (0*prefix, b, 1*suffix); the zero prefix adds nothing to the index"""
    b = np.arange(1 << n)
    index = (b << suffix) | ((1 << suffix) - 1)
    return values[index]


def build_certificate(p: ProtocolParams, side: str) -> DualCertificate:
    """
    Optimal certificate for one side.

    Side A is side B of (1, a_1..a_n) with honest probability 1 - c, and an
    even-length instance gets a final weight 0; the sigma recursion then
    always runs on odd n and the result is mapped back to the n qubits of p.
    """
    _check_side(side)
    if p.n > DIAGONAL_MAX_N:
        raise ResourceLimitError(f"certificates are limited to n <= {DIAGONAL_MAX_N}")
    q, prefix, suffix = _direct_instance(p, side)
    if q.n > DIAGONAL_MAX_N + 2:
        raise ResourceLimitError(f"reduced instance too large (n={q.n})")
    sigma = sigma_assignment(q)
    s = _pull_back(sigma.leaf_scaling(), p.n, suffix)
    cert = certificate_from_scaling(p, side, s)
    cert.sigma = sigma
    logger.debug("certificate side %s n=%d: K=%.12g bound=%.12g", side, p.n, cert.K, cert.bound)
    return cert


# ============================================================================
# Verification
# ============================================================================

def rank_one_margin(z: Sequence[float], v: Sequence[complex]) -> float:
    """
    1 - sum |v_j|^2 / z_j over supp(v); diag(z) >= v v^dagger iff the
    margin is >= 0. Returns -inf when supp(v) is not inside supp(z).
    """
    z = np.asarray(z, dtype=float)
    v2 = np.abs(np.asarray(v)) ** 2
    on = v2 > 0.0
    if np.any(z[on] <= 0.0):
        return float("-inf")
    return float(1.0 - np.sum(v2[on] / z[on]))


def balance_residual(p: ProtocolParams, side: str, z: Sequence[float]) -> float:
    """Largest relative gap between the two values entering a max node"""
    chain = sum_max_chain(p.a, side)
    levels = tree_levels(chain, np.asarray(z, dtype=float))
    worst = 0.0
    for depth in range(p.n):
        if chain.ops[depth].kind is not NodeKind.MAX:
            continue
        child = levels[depth + 1]
        left, right = child[0::2], child[1::2]
        live = (left > 0.0) & (right > 0.0)
        if np.any(live):
            gap = np.abs(left[live] - right[live]) / np.maximum(left[live], right[live])
            worst = max(worst, float(gap.max()))
    return worst


def verify_certificate(
    cert: DualCertificate, oracle_max_qubits: int = DEFAULT_ORACLE_MAX_QUBITS
) -> CertReport:
    """
    Check a certificate against its protocol instance.

    Args:
        cert: certificate to check
        oracle_max_qubits: largest n for the eigenvalue oracle

    Returns:
        CertReport; accepted iff margin >= -1e-9 and the balance and
        tree-match residuals are <= 1e-9
    """
    p, side = cert.params, _check_side(cert.side)
    z = cert.z.d
    _, v = winner_vector(p, side)
    diagnostics: List[str] = []

    if np.any(z < 0.0):
        diagnostics.append(f"z has {int(np.count_nonzero(z < 0.0))} negative entries")
    outside = np.flatnonzero((v != 0.0) & (z <= 0.0))
    if outside.size:
        diagnostics.append(
            "support of v not contained in support of z at indices "
            + ",".join(str(j) for j in outside[:16])
        )

    margin = rank_one_margin(z, v)
    balance = balance_residual(p, side, z)
    tree_value = float(tree_levels(sum_max_chain(p.a, side), z)[0][0])
    tree_match = abs(tree_value - cert.bound) / max(1.0, abs(cert.bound))

    psd = float("nan")
    if p.n <= oracle_max_qubits:
        psd = float(linalg.eigvalsh(np.diag(z) - np.outer(v, v)).min())

    accepted = (
        not diagnostics
        and margin >= -ACCEPT_TOL
        and balance <= ACCEPT_TOL
        and tree_match <= ACCEPT_TOL
    )
    if margin < -ACCEPT_TOL and np.isfinite(margin):
        diagnostics.append(f"rank-one domination fails: margin {margin:.6g}")
    if balance > ACCEPT_TOL:
        diagnostics.append(f"max nodes unbalanced: residual {balance:.6g}")
    if tree_match > ACCEPT_TOL:
        diagnostics.append(f"tree value {tree_value:.12g} does not match bound {cert.bound:.12g}")

    report = CertReport(margin, balance, tree_match, psd, tree_value, accepted, diagnostics)
    if not accepted:
        logger.debug("certificate rejected: %s", "; ".join(diagnostics))
    return report


# ============================================================================
# Supporting lemmas
# ============================================================================

def lemma_min_trace(psi: PureState, E: DiagonalOperator, c: float = 0.5) -> Tuple[float, DiagonalOperator]:
    """
    Minimum of Tr(Z D), D = diag(|psi|^2), over diagonal Z >= E|psi><psi|E / c.

    The optimum is |<psi|E|psi>|^2 / c, attained at Z = (<psi|E|psi>/c) E
    (2 <psi|E|psi> E for c = 1/2).
    """
    if psi.k != E.n:
        raise InvalidArgumentError(f"state has {psi.k} qubits, projector {E.n}")
    overlap = float(np.dot(psi.probabilities(), E.d))
    return overlap * overlap / c, DiagonalOperator(E.n, (overlap / c) * E.d)


@dataclass
class BlockAbsorption:
    """Dominating matrix from block_absorb_certificate and its check"""
    matrix: np.ndarray
    min_eig: float
    lam: float
    gamma: float
    y: float


def _hermitian(name: str, x: np.ndarray, tol: float) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise InvalidArgumentError(f"{name} must be a square matrix")
    if np.max(np.abs(x - x.conj().T), initial=0.0) > tol:
        raise InvalidArgumentError(f"{name} is not Hermitian")
    return (x + x.conj().T) / 2


def block_absorb_certificate(
    m: np.ndarray, h: np.ndarray, phi: Sequence[complex], eps: float, tol: float = 1e-10
) -> BlockAbsorption:
    """
    Build B = (m + eps I) (x) |phi><phi| + (lam + y)(I - P) with B >= h.

    P = I (x) |phi><phi|. The precondition m >= (I (x) <phi|) h (I (x) |phi>)
    is checked; lam is the top eigenvalue of h on the range of I - P, gamma
    the norm of the off-diagonal block, and y = 1.001 * max(gamma^2/eps, gamma).

    Args:
        m: Hermitian k x k matrix on the kept subsystem
        h: Hermitian (k*d) x (k*d) matrix
        phi: state on the d-dimensional factor
        eps: positive slack

    Returns:
        BlockAbsorption with min_eig(B - h) (NaN above 256 dimensions)
    """
    if not eps > 0.0:
        raise InvalidArgumentError(f"eps must be positive, got {eps!r}")
    m = _hermitian("m", m, 1e-9)
    h = _hermitian("h", h, 1e-9)
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    norm = np.linalg.norm(phi)
    if norm == 0.0:
        raise InvalidArgumentError("phi must be nonzero")
    phi = phi / norm
    k, d = m.shape[0], phi.size
    if h.shape != (k * d, k * d):
        raise InvalidArgumentError(f"h must be {k * d} x {k * d}, got {h.shape}")

    eye_k = np.eye(k)
    keep = np.kron(eye_k, phi[:, None])  # (k*d) x k isometry onto range(P)
    reduced = keep.conj().T @ h @ keep
    gap, vecs = linalg.eigh(m - reduced)
    if gap[0] < -tol:
        raise InvalidArgumentError(
            f"precondition m >= T(h) fails: min eigenvalue {gap[0]:.6g}",
            {"min_eig": float(gap[0]), "eigenvector": vecs[:, 0].tolist()},
        )

    if d > 1:
        perp = np.kron(eye_k, linalg.null_space(phi[None, :].conj()))
        lam = float(linalg.eigvalsh(perp.conj().T @ h @ perp).max())
        gamma = float(np.linalg.norm(keep.conj().T @ h @ perp, 2))
    else:
        perp = np.zeros((k, 0))
        lam, gamma = 0.0, 0.0
    y = 1.001 * max(gamma * gamma / eps, gamma)

    projector = keep @ keep.conj().T
    b = np.kron(m + eps * eye_k, np.outer(phi, phi.conj())) + (lam + y) * (np.eye(k * d) - projector)
    min_eig = float("nan")
    if k * d <= BLOCK_CHECK_MAX_DIM:
        min_eig = float(linalg.eigvalsh(b - h).min())
    return BlockAbsorption(b, min_eig, lam, gamma, y)
