"""Frictionless unilateral contact between massless-boundary reduced models.

Several :class:`~beamimpact.cms.ReducedModel` bodies are stacked into a
:class:`CoupledSystem` with boundary coordinates ``q_b`` and modal
coordinates ``eta``. Each time level solves the static boundary problem

    k_bb q_b + k_bi eta - W lam = 0,   0 <= g = W^T q_b + g0  _|_  lam >= 0,

and the modal coordinates are marched with the staggered leapfrog
(Verlet) update.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.linalg as la

from .cms import ReducedModel

logger = logging.getLogger(__name__)


class ContactSolverError(RuntimeError):
    """The static contact sub-problem did not converge."""


class InstabilityError(RuntimeError):
    """Energy growth indicates an unstable explicit update."""


@dataclass(frozen=True, eq=False)
class ContactProblem:
    """Contact pairs, force directions and solver settings.

    Column ``j`` of ``direction_map`` has ``+1`` at the dependent (sphere)
    boundary coordinate and ``-1`` at the independent (beam) one, so
    ``lam_j`` is the compressive contact force in N and
    ``g_j = q_sphere - q_beam + g0_j`` is the vertical gap.
    """

    direction_map: np.ndarray
    initial_gap: np.ndarray
    pairing: tuple[tuple[int, int], ...]
    penalty_scale: float = 1.0
    complementarity_tol: float = 1e-10
    max_iterations: int = 500
    gap_tol: float = 1e-12

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.direction_map, dtype=float))
        g0 = np.atleast_1d(np.asarray(self.initial_gap, dtype=float))
        if g0.shape != (W.shape[1],):
            raise ValueError("initial_gap must have one entry per contact pair")
        if np.any(g0 < 0):
            raise ValueError("initial_gap must be >= 0")
        if not self.penalty_scale > 0:
            raise ValueError("penalty_scale must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        object.__setattr__(self, "direction_map", W)
        object.__setattr__(self, "initial_gap", g0)

    @classmethod
    def from_pairs(cls, n_boundary: int, pairs: Sequence[tuple[int, int]],
                   initial_gap=0.0, **settings) -> "ContactProblem":
        """Node-to-node pairs ``(dependent, independent)`` of coupled boundary indices."""
        W = np.zeros((n_boundary, len(pairs)))
        for j, (s, b) in enumerate(pairs):
            if s == b:
                raise ValueError("a contact pair needs two distinct boundary dofs")
            W[s, j] = 1.0
            W[b, j] = -1.0
        g0 = np.broadcast_to(np.asarray(initial_gap, dtype=float), (len(pairs),)).copy()
        return cls(direction_map=W, initial_gap=g0,
                   pairing=tuple((int(s), int(b)) for s, b in pairs), **settings)

    @property
    def n_pairs(self) -> int:
        return self.direction_map.shape[1]

    def gap(self, q_b) -> np.ndarray:
        return self.direction_map.T @ q_b + self.initial_gap


class CoupledSystem:
    """Block-diagonal stack of reduced models.

    Boundary coordinates of body ``k`` occupy ``boundary_slices[k]`` of
    ``q_b``; its modal coordinates occupy ``modal_slices[k]`` of ``eta``.
    """

    def __init__(self, roms: Sequence[ReducedModel]):
        self.roms = tuple(roms)
        nb = [r.n_boundary for r in self.roms]
        nm = [r.n_modes for r in self.roms]
        ob = np.r_[0, np.cumsum(nb)]
        om = np.r_[0, np.cumsum(nm)]
        self.boundary_slices = [slice(ob[k], ob[k + 1]) for k in range(len(nb))]
        self.modal_slices = [slice(om[k], om[k + 1]) for k in range(len(nm))]
        self.n_boundary = int(ob[-1])
        self.n_modes = int(om[-1])
        self.k_bb = la.block_diag(*[r.k_bb for r in self.roms])
        self.k_bi = la.block_diag(*[r.k_bi for r in self.roms])
        self.k_ii = la.block_diag(*[r.k_ii for r in self.roms])
        try:
            self._kbb_factor = la.cho_factor(self.k_bb)
        except la.LinAlgError:
            raise ValueError("coupled k_bb is not positive definite") from None
        # q_b(eta, lam) = Q eta + k_bb^-1 W lam
        self.Q = -la.cho_solve(self._kbb_factor, self.k_bi)
        self.omega_max = float(max((r.retained_frequencies.max(initial=0.0)
                                    for r in self.roms), default=0.0))

    def kbb_solve(self, rhs) -> np.ndarray:
        return la.cho_solve(self._kbb_factor, rhs)

    def potential_energy(self, q_b, eta) -> float:
        return 0.5 * (q_b @ self.k_bb @ q_b + 2.0 * q_b @ self.k_bi @ eta
                      + eta @ self.k_ii @ eta)


class ContactOperator:
    """Precomputed linear maps for one (system, problem) pair.

    ``g_free = G eta + g0`` is the gap without contact forces,
    ``D = W^T k_bb^-1 W`` is the contact compliance (Delassus) matrix,
    ``q_b = Q eta + C lam`` and the modal acceleration is
    ``A eta + B lam``.
    """

    def __init__(self, system: CoupledSystem, problem: ContactProblem):
        W = problem.direction_map
        if W.shape[0] != system.n_boundary:
            raise ValueError(
                f"direction map has {W.shape[0]} rows, system has "
                f"{system.n_boundary} boundary coordinates")
        self.system = system
        self.problem = problem
        self.C = system.kbb_solve(W)
        self.D = W.T @ self.C
        self.D = 0.5 * (self.D + self.D.T)
        self.G = W.T @ system.Q
        self.A = -(system.k_ii + system.k_bi.T @ system.Q)
        self.B = -system.k_bi.T @ self.C
        d = np.diag(self.D)
        if np.any(d <= 0):
            raise ValueError("contact compliance must be positive for every pair")
        Ds = self.D / np.sqrt(np.outer(d, d))
        lam_max = float(np.linalg.eigvalsh(Ds).max()) if d.size else 1.0
        # projected Jacobi converges for rho * lam_max(Ds) < 2
        self.rho = min(problem.penalty_scale, 1.9 / lam_max)

    def gap_free(self, eta) -> np.ndarray:
        return self.G @ eta + self.problem.initial_gap

    def solve(self, eta) -> tuple[np.ndarray, np.ndarray, "LcpInfo"]:
        g_free = self.gap_free(eta)
        lam, info = solve_lcp(self.D, g_free, rho=self.rho,
                              tol=self.problem.complementarity_tol,
                              max_iterations=self.problem.max_iterations)
        gap = g_free + self.D @ lam
        if gap.size and gap.min() < -max(self.problem.gap_tol,
                                         self.problem.complementarity_tol * info.scale):
            raise AssertionError(f"penetration {gap.min():.3e} m exceeds gap tolerance")
        q_b = self.system.Q @ eta + self.C @ lam
        return q_b, lam, info

    def acceleration(self, eta, lam) -> np.ndarray:
        return self.A @ eta + self.B @ lam


@dataclass(frozen=True)
class LcpInfo:
    iterations: int
    residual: float  # scaled complementarity residual
    scale: float  # gap scale used for normalization


def complementarity_residual(D, g_free, lam) -> tuple[float, float]:
    """Scaled residual ``max_j |min(g_j, D_jj lam_j)| / s`` and the scale ``s``."""
    g = g_free + D @ lam
    scale = max(float(np.abs(g_free).max(initial=0.0)), 1e-300)
    r = np.abs(np.minimum(g, np.diag(D) * lam))
    neg = np.maximum(-lam, 0.0) * np.diag(D)
    return float(max(r.max(initial=0.0), neg.max(initial=0.0)) / scale), scale


def solve_lcp(D, g_free, rho: float = 1.0, tol: float = 1e-10,
              max_iterations: int = 500) -> tuple[np.ndarray, LcpInfo]:
    """Solve ``0 <= g_free + D lam _|_ lam >= 0`` for SPD ``D``.

    Augmented-Lagrangian projected Jacobi sweeps with per-pair penalty
    ``rho / D_jj``. After every sweep the equality problem on the current
    active set is solved; if it satisfies the sign conditions it is
    accepted as the exact solution.
    """
    D = np.atleast_2d(D)
    g_free = np.atleast_1d(np.asarray(g_free, dtype=float))
    m = g_free.size
    lam = np.zeros(m)
    if m == 0:
        return lam, LcpInfo(0, 0.0, 1.0)
    r = rho / np.diag(D)
    res, scale = complementarity_residual(D, g_free, lam)
    if res <= tol:
        return lam, LcpInfo(0, res, scale)
    for it in range(1, max_iterations + 1):
        lam = np.maximum(0.0, lam - r * (g_free + D @ lam))
        active = lam > 0
        if active.any():
            cand = np.zeros(m)
            Da = D[np.ix_(active, active)]
            cand[active] = la.solve(Da, -g_free[active], assume_a="pos")
            if np.all(cand[active] >= 0):
                cres, _ = complementarity_residual(D, g_free, cand)
                if cres <= tol:
                    return cand, LcpInfo(it, cres, scale)
        res, _ = complementarity_residual(D, g_free, lam)
        if res <= tol:
            return lam, LcpInfo(it, res, scale)
    raise ContactSolverError(
        f"contact solver did not converge in {max_iterations} iterations: "
        f"scaled complementarity residual {res:.3e}, min gap "
        f"{(g_free + D @ lam).min():.3e}, lam={lam}")


def solve_static_contact(system: CoupledSystem, eta, problem: ContactProblem):
    """Boundary displacements and multipliers ``(q_b, lam)`` for given ``eta``."""
    q_b, lam, _ = ContactOperator(system, problem).solve(np.asarray(eta, dtype=float))
    return q_b, lam


@dataclass(frozen=True, eq=False)
class SimState:
    """Time level ``n``: ``eta^n``, ``eta_dot^(n-1/2)`` and the contact solution at ``n``."""

    time: float
    step: int
    q_b: np.ndarray
    eta: np.ndarray
    eta_dot_half: np.ndarray
    lam: np.ndarray
    residual: float = 0.0


def initial_state(op: ContactOperator, eta0, eta_dot0, dt: float,
                  t0: float = 0.0) -> SimState:
    """Start the staggered scheme: ``eta_dot^(-1/2) = eta_dot^0 - dt/2 a^0``."""
    eta0 = np.array(eta0, dtype=float)
    q_b, lam, info = op.solve(eta0)
    a0 = op.acceleration(eta0, lam)
    return SimState(time=t0, step=0, q_b=q_b, eta=eta0,
                    eta_dot_half=np.asarray(eta_dot0, dtype=float) - 0.5 * dt * a0,
                    lam=lam, residual=info.residual)


def check_time_step(omega_max: float, dt: float) -> None:
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if dt * omega_max > 2.0:
        raise InstabilityError(
            f"dt*omega_max = {dt * omega_max:.3f} > 2: explicit update unstable")
    if dt * omega_max > 0.5:
        warnings.warn(f"dt*omega_max = {dt * omega_max:.3f} > 0.5", stacklevel=3)


def step(state: SimState, op: ContactOperator, dt: float) -> SimState:
    """Advance one level: modal velocity/position update, then contact solve."""
    a = op.acceleration(state.eta, state.lam)
    eta_dot_half = state.eta_dot_half + dt * a
    eta = state.eta + dt * eta_dot_half
    q_b, lam, info = op.solve(eta)
    return SimState(time=state.time + dt, step=state.step + 1, q_b=q_b, eta=eta,
                    eta_dot_half=eta_dot_half, lam=lam, residual=info.residual)


@dataclass(eq=False)
class RawHistory:
    """Per-level arrays of a semi-explicit run (row ``n`` is ``t^n``)."""

    t: np.ndarray
    q_b: np.ndarray
    eta: np.ndarray
    eta_dot: np.ndarray  # integer-level velocities
    lam: np.ndarray
    energy: np.ndarray
    residual: np.ndarray
    iterations: np.ndarray = field(default=None)


def integrate(op: ContactOperator, eta0, eta_dot0, dt: float, n_steps: int,
              energy_growth_limit: float = 0.10, check_every: int = 50) -> RawHistory:
    """March ``n_steps`` levels of the semi-explicit scheme.

    Integer-level velocities are averages of the adjacent half-level ones.
    Raises :class:`InstabilityError` when the total energy grows by more
    than ``energy_growth_limit`` relative to its initial value.
    """
    check_time_step(op.system.omega_max, dt)
    system = op.system
    nb, nm, m = system.n_boundary, system.n_modes, op.problem.n_pairs
    N = int(n_steps)
    t = dt * np.arange(N + 1)
    Qb = np.empty((N + 1, nb))
    E = np.empty((N + 1, nm))
    Ed = np.empty((N + 1, nm))
    L = np.empty((N + 1, m))
    res = np.empty(N + 1)
    its = np.empty(N + 1, dtype=int)

    A, B, G, C, Q, D = op.A, op.B, op.G, op.C, system.Q, op.D
    g0 = op.problem.initial_gap
    tol, maxit, rho = op.problem.complementarity_tol, op.problem.max_iterations, op.rho
    gap_tol = op.problem.gap_tol
    scalar = m == 1
    d11 = D[0, 0] if scalar else None

    def contact(eta):
        g_free = G @ eta + g0
        if scalar:
            # one pair: the complementarity problem has a closed-form solution
            gf = g_free[0]
            lam0 = max(0.0, -gf / d11)
            r = abs(min(gf + d11 * lam0, d11 * lam0)) / max(abs(gf), 1e-300)
            return np.array([lam0]), r, (1 if lam0 > 0 else 0)
        lam, info = solve_lcp(D, g_free, rho=rho, tol=tol, max_iterations=maxit)
        g = g_free + D @ lam
        if g.min() < -max(gap_tol, tol * info.scale):
            raise AssertionError(f"penetration {g.min():.3e} m exceeds gap tolerance")
        return lam, info.residual, info.iterations

    eta = np.array(eta0, dtype=float)
    lam, res[0], its[0] = contact(eta)
    a = A @ eta + B @ lam
    vh = np.asarray(eta_dot0, dtype=float) - 0.5 * dt * a
    E[0], L[0], Qb[0] = eta, lam, Q @ eta + C @ lam
    Ed[0] = np.asarray(eta_dot0, dtype=float)
    e0 = system.potential_energy(Qb[0], eta) + 0.5 * Ed[0] @ Ed[0]
    e_ref = max(e0, 1e-300)
    for n in range(1, N + 1):
        vh_new = vh + dt * a
        Ed[n - 1] = 0.5 * (vh + vh_new) if n > 1 else Ed[0]
        eta = eta + dt * vh_new
        vh = vh_new
        lam, res[n], its[n] = contact(eta)
        a = A @ eta + B @ lam
        E[n], L[n] = eta, lam
        if n % check_every == 0:
            qb = Q @ eta + C @ lam
            en = system.potential_energy(qb, eta) + 0.5 * vh @ vh
            if en > (1.0 + energy_growth_limit) * e_ref and e0 > 0:
                raise InstabilityError(
                    f"energy grew by {en / e_ref - 1:.1%} at step {n} (t={t[n]:.3e} s)")
    Ed[N] = vh + 0.5 * dt * a
    Qb[:] = E @ Q.T + L @ C.T
    energy = (0.5 * np.einsum("ij,ij->i", Ed, Ed)
              + 0.5 * np.einsum("ij,jk,ik->i", Qb, system.k_bb, Qb)
              + np.einsum("ij,jk,ik->i", Qb, system.k_bi, E)
              + 0.5 * np.einsum("ij,jk,ik->i", E, system.k_ii, E))
    return RawHistory(t=t, q_b=Qb, eta=E, eta_dot=Ed, lam=L, energy=energy,
                      residual=res, iterations=its)
