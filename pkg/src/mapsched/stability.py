"""Quadratic stability certification of the scheduled closed loop.

A common Lyapunov matrix for all vertex closed loops certifies every convex
combination; on top of that, Lipschitz constants of the polytopic maps give
the largest scheduling mismatch eps_star for which exponential stability
survives, with overshoot constant C and contraction rate lambda.

The common-P search is a heuristic (averaged Lyapunov solutions), so failure
is reported as "not certified", never as "unstable".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CertificationError, NumericalError, ParameterError
from .motor import VertexSet

POWER_TOL = 1e-12
POWER_MAX_ITER = 10_000


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class MismatchAssumptions:
    """Bounds on the scheduling estimation error and per-tick parameter drift."""

    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if self.epsilon < 0.0 or self.delta < 0.0:
            raise ParameterError("mismatch bounds must be non-negative")


@dataclass(frozen=True)
class LyapunovSearch:
    """Outcome of the common-P search: P, per-vertex margins, the minimum
    margin over sampled convex combinations, and feasibility."""

    P: np.ndarray
    vertex_margins: np.ndarray
    certified: bool
    rounds: int
    sampled_margin_min: float = float("nan")

    @property
    def alpha(self) -> float:
        return float(np.min(self.vertex_margins))

    @property
    def worst_margin(self) -> float:
        return float(np.min(self.vertex_margins))


@dataclass(frozen=True)
class StabilityCert:
    P_lyap: np.ndarray
    alpha: float
    vertex_margins: np.ndarray
    sampled_margins_min: float
    L_phi: float
    L_k: float
    L: float
    eps_star: float
    C: float
    lambda_: float
    epsilon_used: float
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "P_lyap", _frozen(self.P_lyap))
        object.__setattr__(self, "vertex_margins", _frozen(self.vertex_margins))


def spectral_norm(M: np.ndarray, tol: float = POWER_TOL,
                  max_iter: int = POWER_MAX_ITER) -> float:
    """Largest singular value by power iteration on M'M."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    G = M.T @ M
    v = np.ones(G.shape[0]) / np.sqrt(G.shape[0])
    sigma_sq = 0.0
    for _ in range(max_iter):
        w = G @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v_next = w / norm
        if abs(norm - sigma_sq) <= tol * max(1.0, norm):
            sigma_sq = norm
            break
        sigma_sq = norm
        v = v_next
    return float(np.sqrt(sigma_sq))


def dlyap_series(A: np.ndarray, rhs: np.ndarray | None = None) -> np.ndarray:
    """Solve A' P A - P = -rhs by summing the convergent series
    P = sum_k (A')^k rhs A^k, with squaring for speed."""
    A = np.asarray(A, dtype=float)
    if float(np.max(np.abs(np.linalg.eigvals(A)))) >= 1.0:
        raise NumericalError("Lyapunov series diverges: spectral radius >= 1")
    P = np.eye(A.shape[0]) if rhs is None else np.asarray(rhs, dtype=float).copy()
    M = A.copy()
    for _ in range(200):
        if float(np.max(np.abs(M))) < 1e-150:
            break
        P = P + M.T @ P @ M
        M = M @ M
    return 0.5 * (P + P.T)


def vertex_margins(P: np.ndarray, closed_loops) -> np.ndarray:
    """Per-vertex decrease margins -lambda_max(A' P A - P); positive means the
    Lyapunov inequality holds at that vertex."""
    margins = []
    for A in closed_loops:
        A = np.asarray(A, dtype=float)
        defect = A.T @ P @ A - P
        margins.append(-float(np.linalg.eigvalsh(0.5 * (defect + defect.T))[-1]))
    return np.array(margins)


def find_common_lyapunov(closed_loops, max_rounds: int = 500,
                         n_samples: int = 1000, seed: int = 42) -> LyapunovSearch:
    """Search for a single P certifying every vertex closed loop.

    Starts from the Lyapunov solution of the first vertex and repeatedly
    averages in the Lyapunov solutions of violating vertices; a candidate
    only counts as certified once the decrease inequality also holds on
    `n_samples` random convex combinations. Each vertex must be Schur
    stable on its own (precondition); an exhausted search is an
    inconclusive report, not an instability proof.
    """
    loops = [np.asarray(A, dtype=float) for A in closed_loops]
    if not loops:
        raise ParameterError("need at least one closed loop")
    for i, A in enumerate(loops):
        radius = float(np.max(np.abs(np.linalg.eigvals(A))))
        if radius >= 1.0:
            raise ParameterError(
                f"vertex {i + 1} closed loop has spectral radius {radius:.6f} >= 1"
            )
    P = dlyap_series(loops[0])
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        margins = vertex_margins(P, loops)
        if np.all(margins > 0.0):
            sampled = verify_convex_stability(P, loops, n_samples=n_samples, seed=seed)
            return LyapunovSearch(
                P=P, vertex_margins=margins, certified=sampled > 0.0,
                rounds=rounds, sampled_margin_min=sampled,
            )
        for i in np.flatnonzero(margins <= 0.0):
            P = 0.5 * (P + dlyap_series(loops[i]))
    margins = vertex_margins(P, loops)
    if np.all(margins > 0.0):
        sampled = verify_convex_stability(P, loops, n_samples=n_samples, seed=seed)
        return LyapunovSearch(
            P=P, vertex_margins=margins, certified=sampled > 0.0,
            rounds=rounds, sampled_margin_min=sampled,
        )
    return LyapunovSearch(P=P, vertex_margins=margins, certified=False, rounds=rounds)


def sample_simplex(n_samples: int, nv: int, seed: int = 42) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.dirichlet(np.ones(nv), size=n_samples)


def verify_convex_stability(P: np.ndarray, closed_loops, n_samples: int = 1000,
                            seed: int = 42) -> float:
    """Minimum Lyapunov decrease margin over randomly sampled convex
    combinations of the vertex closed loops; deterministic for a given seed."""
    loops = np.stack([np.asarray(A, dtype=float) for A in closed_loops])
    weights = sample_simplex(n_samples, loops.shape[0], seed=seed)
    worst = np.inf
    for w in weights:
        A = np.tensordot(w, loops, axes=1)
        defect = A.T @ P @ A - P
        margin = -float(np.linalg.eigvalsh(0.5 * (defect + defect.T))[-1])
        worst = min(worst, margin)
    return worst


def lipschitz_constants(vertices: VertexSet, Gamma) -> tuple[float, float, float]:
    """Lipschitz constants of the polytopic maps rho -> Phi(rho), rho -> K(rho)
    and the combined closed-loop sensitivity L = L_phi + ||Gamma|| L_k.

    The two-vertex family is affine, so the constants are exact slopes; with
    more vertices the pairwise maximum slope is used.
    """
    if vertices.K_vertices is None:
        raise ParameterError("vertex gains have not been synthesized")
    Gamma = np.asarray(Gamma, dtype=float)
    L_phi = 0.0
    L_k = 0.0
    nv = vertices.n_vertices
    for i in range(nv):
        for j in range(i + 1, nv):
            gap = vertices.rho[j] - vertices.rho[i]
            if gap <= 0.0:
                raise ParameterError("coincident scheduling vertices")
            L_phi = max(
                L_phi,
                spectral_norm(vertices.Phi_vertices[j] - vertices.Phi_vertices[i]) / gap,
            )
            L_k = max(
                L_k,
                spectral_norm(vertices.K_vertices[j] - vertices.K_vertices[i]) / gap,
            )
    L = L_phi + spectral_norm(Gamma) * L_k
    return L_phi, L_k, L


def epsilon_star(P: np.ndarray, alpha: float, L: float,
                 epsilon: float | None = None) -> tuple[float, float, float]:
    """Mismatch budget eps_star = sqrt(alpha / (2 lambda_max(P) L^2)),
    overshoot constant C, and the contraction rate evaluated at `epsilon`
    (defaults to eps_star / 2).

    The rate normalizes the Lyapunov decrease by lambda_max(P) so that
    ||x_k|| <= C * lambda^k * ||x_0|| holds along certified trajectories.
    """
    eigs = np.linalg.eigvalsh(0.5 * (P + P.T))
    lo, hi = float(eigs[0]), float(eigs[-1])
    if lo <= 0.0:
        raise ParameterError("P must be positive definite")
    if alpha <= 0.0 or L <= 0.0:
        raise ParameterError("need alpha > 0 and L > 0")
    eps_star = float(np.sqrt(alpha / (2.0 * hi * L * L)))
    C = float(np.sqrt(hi / lo))
    if epsilon is None:
        epsilon = 0.5 * eps_star
    alpha_tilde = alpha - hi * L * L * epsilon * epsilon
    if alpha_tilde <= 0.0:
        raise CertificationError(
            f"mismatch bound {epsilon:.3e} exceeds the certified budget (alpha_tilde <= 0)"
        )
    lam = float(np.sqrt(1.0 - alpha_tilde / hi))
    return eps_star, C, lam


def certify(vertices: VertexSet, Gamma=None,
            assumptions: MismatchAssumptions | None = None,
            n_samples: int = 1000, seed: int = 42) -> StabilityCert:
    """Full certification pipeline for a gain-filled vertex set.

    Raises CertificationError when the common-P heuristic fails or the
    sampled convex combinations violate the decrease inequality.
    """
    if vertices.K_vertices is None:
        raise ParameterError("vertex gains have not been synthesized")
    Gamma = vertices.Gamma if Gamma is None else np.asarray(Gamma, dtype=float)
    loops = [
        phi - Gamma @ K for phi, K in zip(vertices.Phi_vertices, vertices.K_vertices)
    ]
    search = find_common_lyapunov(loops, n_samples=n_samples, seed=seed)
    if not search.certified:
        raise CertificationError(
            "no common Lyapunov matrix found "
            f"(worst vertex margin {search.worst_margin:.3e}, sampled margin "
            f"{search.sampled_margin_min:.3e}, after {search.rounds} rounds); "
            "this does not prove instability"
        )
    sampled_min = search.sampled_margin_min
    L_phi, L_k, L = lipschitz_constants(vertices, Gamma)
    eps_used = assumptions.epsilon if assumptions is not None else None
    eps_star, C, lam = epsilon_star(search.P, search.alpha, L, epsilon=eps_used)
    return StabilityCert(
        P_lyap=search.P,
        alpha=search.alpha,
        vertex_margins=search.vertex_margins,
        sampled_margins_min=sampled_min,
        L_phi=L_phi,
        L_k=L_k,
        L=L,
        eps_star=eps_star,
        C=C,
        lambda_=lam,
        epsilon_used=eps_used if eps_used is not None else 0.5 * eps_star,
        delta=assumptions.delta if assumptions is not None else 0.0,
    )
