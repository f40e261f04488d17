"""LQR synthesis and probabilistically scheduled gain computation.

The Riccati equation is solved by fixed-point iteration (the plant is 3x3,
so a structured eigensolver buys nothing), vertex gains are synthesized
offline, and the per-tick scheduled gain is the probability-weighted convex
combination of the vertex gains. Sign convention: K is the regulator gain
for which u = -K x stabilizes, applied as u = K (x_ref - x_hat), so every
closed loop is Phi - Gamma K.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericalError, ParameterError
from .motor import DiscreteModel, VertexSet

DARE_TOL = 1e-12
DARE_MAX_ITER = 100_000
RESIDUAL_LIMIT = 1e-9


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class LqrWeights:
    """Quadratic cost weights; Q penalizes state error, R input effort."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = _frozen(self.Q)
        R = _frozen(np.atleast_2d(self.R))
        if np.any(np.linalg.eigvalsh(0.5 * (Q + Q.T)) < -1e-12):
            raise ParameterError("Q_lqr must be positive semidefinite")
        if np.any(np.linalg.eigvalsh(0.5 * (R + R.T)) <= 0.0):
            raise ParameterError("R_lqr must be positive definite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    @classmethod
    def default(cls) -> "LqrWeights":
        # tight position regulation, moderate input attenuation
        return cls(Q=np.diag([100.0, 1.0, 1.0]), R=np.array([[10.0]]))


@dataclass(frozen=True)
class RiccatiSolution:
    P: np.ndarray
    K: np.ndarray
    iterations: int
    residual: float

    def __post_init__(self):
        object.__setattr__(self, "P", _frozen(self.P))
        object.__setattr__(self, "K", _frozen(self.K))
        if not self.residual <= RESIDUAL_LIMIT:
            raise NumericalError(
                f"Riccati residual {self.residual:.3e} exceeds {RESIDUAL_LIMIT:.0e}"
            )


@dataclass(frozen=True)
class ScheduleWeights:
    """Convex weights over the polytope vertices (entries in [0, 1] up to
    round-off for scheduling values inside the polytope)."""

    xi: np.ndarray

    def __post_init__(self):
        xi = _frozen(self.xi)
        if abs(xi.sum() - 1.0) > 1e-12:
            raise ParameterError("scheduling weights must sum to 1")
        if np.any(xi < -1e-12) or np.any(xi > 1.0 + 1e-12):
            raise ParameterError("scheduling weights must lie in [0, 1]")
        object.__setattr__(self, "xi", xi)


@dataclass(frozen=True)
class ReferenceState:
    """Full-state reference (theta_ref, omega_ref, i_ref)."""

    vector: np.ndarray

    def __post_init__(self):
        v = _frozen(np.asarray(self.vector, dtype=float).reshape(-1))
        if v.size != 3 or not np.all(np.isfinite(v)):
            raise ParameterError("reference state must be a finite 3-vector")
        object.__setattr__(self, "vector", v)


def dare_residual(Phi, Gamma, Q, R, P) -> float:
    """Max-norm defect of P in the discrete algebraic Riccati equation."""
    G = Gamma.T @ P @ Gamma + R
    correction = Phi.T @ P @ Gamma @ np.linalg.solve(G, Gamma.T @ P @ Phi)
    defect = Phi.T @ P @ Phi - correction + Q - P
    return float(np.max(np.abs(defect)))


def solve_dare(model: DiscreteModel, weights: LqrWeights,
               tol: float = DARE_TOL, max_iter: int = DARE_MAX_ITER) -> RiccatiSolution:
    """Fixed-point Riccati iteration from P0 = Q with gain extraction.

    Iterates until the update stalls below `tol` in max norm; the returned
    solution is additionally validated against the residual bound, and the
    closed loop Phi - Gamma K must be Schur stable.
    """
    Phi, Gamma = model.Phi, model.Gamma
    Q, R = weights.Q, weights.R
    P = Q.copy()
    delta = np.inf
    iterations = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for iterations in range(1, max_iter + 1):
            G = Gamma.T @ P @ Gamma + R
            PPhi = P @ Phi
            P_next = Phi.T @ PPhi - (PPhi.T @ Gamma) @ np.linalg.solve(G, Gamma.T @ PPhi) + Q
            P_next = 0.5 * (P_next + P_next.T)
            delta = float(np.max(np.abs(P_next - P)))
            if not np.isfinite(delta) or not np.all(np.isfinite(P_next)):
                raise NumericalError(
                    f"Riccati iteration diverged after {iterations} iterations; "
                    "the model/weight pair is likely not stabilizable"
                )
            P = P_next
            if delta < tol:
                break
    residual = dare_residual(Phi, Gamma, Q, R, P)
    if delta >= tol and not residual <= RESIDUAL_LIMIT:
        raise NumericalError(
            f"Riccati iteration did not converge: update {delta:.3e}, residual {residual:.3e}"
        )
    K = np.linalg.solve(Gamma.T @ P @ Gamma + R, Gamma.T @ P @ Phi)
    closed = Phi - Gamma @ K
    radius = float(np.max(np.abs(np.linalg.eigvals(closed))))
    if not radius < 1.0:
        raise NumericalError(
            f"closed loop is not Schur stable (spectral radius {radius:.6f}); "
            "the model/weight pair is not stabilizable-detectable"
        )
    return RiccatiSolution(P=P, K=K, iterations=iterations, residual=residual)


def synthesize_vertex_gains(vertices: VertexSet, Gamma, weights: LqrWeights) -> VertexSet:
    """Solve one Riccati problem per vertex and return the gain-filled set."""
    Gamma = np.asarray(Gamma, dtype=float)
    gains = []
    for phi in vertices.Phi_vertices:
        model = DiscreteModel(Phi=phi, Gamma=Gamma, H=vertices.H, T=vertices.T)
        gains.append(solve_dare(model, weights).K)
    return vertices.with_gains(gains)


def vertex_matrix(rho_values) -> np.ndarray:
    """Vertex matrix [[rho...], [1...]] whose columns are the polytope corners."""
    rho = np.asarray(rho_values, dtype=float)
    return np.vstack([rho, np.ones_like(rho)])


def barycentric_weights(V: np.ndarray, rho: float) -> ScheduleWeights:
    """Convex weights xi with V xi = [rho, 1]: the weighted vertices
    reproduce the scheduling value and the weights sum to one.

    Values of rho outside the vertex interval are clamped onto it first (a
    configuration error upstream, since mode probabilities live on the
    simplex), with a warning.
    """
    V = np.asarray(V, dtype=float)
    if V.shape[0] != V.shape[1]:
        raise ParameterError("vertex matrix must be square for barycentric inversion")
    lo, hi = float(np.min(V[0])), float(np.max(V[0]))
    if rho < lo or rho > hi:
        warnings.warn(
            f"scheduling value {rho:.6g} outside the vertex polytope [{lo:.6g}, {hi:.6g}]; clamping"
        )
        rho = min(max(rho, lo), hi)
    rhs = np.array([rho, 1.0])
    try:
        xi = np.linalg.solve(V, rhs)
    except np.linalg.LinAlgError:
        raise ParameterError("vertex matrix is singular; vertices must be distinct") from None
    return ScheduleWeights(xi=xi)


def maps_gain(mu, vertices: VertexSet) -> np.ndarray:
    """Probability-scheduled gain K = sum_i mu_i K[i]."""
    mu = np.asarray(mu, dtype=float)
    if vertices.K_vertices is None:
        raise ParameterError("vertex gains have not been synthesized")
    if mu.size != len(vertices.K_vertices):
        raise ValueError("one probability per vertex gain required")
    K = np.zeros_like(vertices.K_vertices[0])
    for w, Kv in zip(mu, vertices.K_vertices):
        K = K + w * Kv
    return K


def control_input(K: np.ndarray, x_ref: ReferenceState, x_hat, v_limit: float):
    """Error-feedback law u = K (x_ref - x_hat), saturated to +/- v_limit.

    Returns (u, saturated) so callers can count saturation events.
    """
    K = np.asarray(K, dtype=float).reshape(-1)
    ref = x_ref.vector if isinstance(x_ref, ReferenceState) else np.asarray(x_ref, dtype=float)
    e = ref - np.asarray(x_hat, dtype=float).reshape(-1)
    u = float(K @ e)
    if u > v_limit:
        return v_limit, True
    if u < -v_limit:
        return -v_limit, True
    return u, False


def gain_report(vertices: VertexSet, solutions=None) -> dict:
    """JSON-friendly summary of the vertex gains and closed-loop eigenvalues."""
    if vertices.K_vertices is None:
        raise ParameterError("vertex gains have not been synthesized")
    report = {"mode": vertices.mode, "sample_time": vertices.T, "vertices": []}
    for i, (rho, phi, K) in enumerate(
        zip(vertices.rho, vertices.Phi_vertices, vertices.K_vertices)
    ):
        closed = phi - vertices.Gamma @ K
        moduli = sorted(float(m) for m in np.abs(np.linalg.eigvals(closed)))
        entry = {
            "index": i + 1,
            "rho": rho,
            "K": [float(v) for v in np.asarray(K).reshape(-1)],
            "closed_loop_eigenvalue_moduli": moduli,
        }
        if solutions is not None:
            entry["riccati_residual"] = solutions[i].residual
            entry["riccati_iterations"] = solutions[i].iterations
            entry["P"] = np.asarray(solutions[i].P).tolist()
        report["vertices"].append(entry)
    return report


def write_gain_report(path, report: dict) -> None:
    Path(path).write_text(json.dumps(report, indent=2) + "\n")


def write_gain_csv(path, report: dict) -> None:
    """One row per vertex: scheduling value, gain entries, eigenvalue moduli."""
    import csv

    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["vertex", "rho", "k_theta", "k_omega", "k_current",
             "eig_mod_1", "eig_mod_2", "eig_mod_3"]
        )
        for entry in report["vertices"]:
            writer.writerow(
                [entry["index"], repr(entry["rho"]),
                 *[repr(v) for v in entry["K"]],
                 *[repr(v) for v in entry["closed_loop_eigenvalue_moduli"]]]
            )
