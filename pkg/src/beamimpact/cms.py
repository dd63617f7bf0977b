"""Free-interface normal modes and MacNeal massless-boundary reduction.

The reduced coordinates are ``[q_b; eta]``: physical boundary
displacements plus the coordinates of the retained free-interface
normal modes. The reduced mass matrix is ``blockdiag(0, I)``, so the
boundary carries no inertia.

Residual flexibility of a free (unsupported) body is computed with the
inertia-relief elastic flexibility ``G_e = P^T G_c P`` where ``G_c`` is
the flexibility with a statically determinate support set and
``P = I - M Phi_r Phi_r^T`` removes the rigid-body part of a load. For a
supported body this is simply ``K^-1``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg as la

from .assembly import AssembledModel, ModelError
from .matrix_io import MatrixFileError, read_matrix, write_general, write_symmetric

logger = logging.getLogger(__name__)

#: Rigid modes satisfy omega_k < RIGID_TOL * omega_first_elastic.
RIGID_TOL = 1e-4


class ReductionError(ValueError):
    """Raised when a reduced model cannot be built."""


@dataclass(frozen=True, eq=False)
class ModalBasis:
    """Mass-normalized modes, ascending; the first ``rigid_count`` are rigid."""

    frequencies: np.ndarray  # rad/s
    shapes: np.ndarray  # n x n_modes
    rigid_count: int

    @property
    def n_modes(self) -> int:
        return self.shapes.shape[1]

    @property
    def frequencies_hz(self) -> np.ndarray:
        return self.frequencies / (2.0 * np.pi)

    def elastic_labels(self, suffix: str = "F") -> list[str]:
        return [f"{k + 1}{suffix}" for k in range(self.n_modes - self.rigid_count)]


def _mass_orthonormalize(V: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt of the columns of V in the M inner product."""
    Q = np.array(V, dtype=float)
    for k in range(Q.shape[1]):
        for j in range(k):
            Q[:, k] -= (Q[:, j] @ M @ Q[:, k]) * Q[:, j]
        nrm = np.sqrt(Q[:, k] @ M @ Q[:, k])
        if not nrm > 0:
            raise ModelError("rigid-body seed vectors are linearly dependent")
        Q[:, k] /= nrm
    return Q


def _check_mass(model: AssembledModel, massless: np.ndarray):
    M = model.mass_matrix
    keep = np.setdiff1d(np.arange(model.n_dof), massless)
    if massless.size and np.abs(M[np.ix_(massless, np.arange(model.n_dof))]).max() > 0:
        raise ModelError("massless dofs must have zero mass rows")
    try:
        la.cholesky(M[np.ix_(keep, keep)])
    except la.LinAlgError:
        d = np.diag(M)[keep]
        bad = keep[int(np.argmin(d))]
        raise ModelError(
            f"mass matrix not positive definite near dof {bad} "
            f"{model.dof_labels[bad]}") from None


def solve_modes(model: AssembledModel, condense_massless: bool = False) -> ModalBasis:
    """All eigenpairs of ``(K, M)``, mass-normalized and ascending.

    Dofs with zero mass are rejected unless ``condense_massless`` is set,
    in which case they are eliminated statically (exact for massless dofs)
    and the returned shapes are expanded back to the full dof set.
    """
    M, K = model.mass_matrix, model.stiffness_matrix
    n = model.n_dof
    massless = np.flatnonzero(np.diag(M) == 0.0)
    if massless.size and not condense_massless:
        i = int(massless[0])
        raise ModelError(
            f"zero mass at dof {i} {model.dof_labels[i]}; reduce the model first "
            "or pass condense_massless=True")
    _check_mass(model, massless)

    s = np.setdiff1d(np.arange(n), massless)
    if massless.size:
        Kmm = K[np.ix_(massless, massless)]
        Kms = K[np.ix_(massless, s)]
        T = -la.solve(Kmm, Kms, assume_a="pos")
        Kc = K[np.ix_(s, s)] + K[np.ix_(s, massless)] @ T
        Kc = 0.5 * (Kc + Kc.T)
        lam, Vs = la.eigh(Kc, M[np.ix_(s, s)])
        V = np.zeros((n, Vs.shape[1]))
        V[s] = Vs
        V[massless] = T @ Vs
    else:
        lam, V = la.eigh(K, M)

    lam = np.asarray(lam)
    seeds = model.rigid_seeds
    if seeds is not None:
        r = seeds.shape[1]
        if r:
            resid = np.abs(K @ seeds).max()
            scale = np.abs(K).max() * np.abs(seeds).max()
            if resid > 1e-8 * scale:
                raise ModelError("rigid-body seeds are not in the stiffness null space")
            if r < lam.size and lam[r - 1] > RIGID_TOL ** 2 * lam[r]:
                raise ModelError("rigid seeds inconsistent with the computed spectrum")
    else:
        floor = 1e-9 * max(np.abs(lam).max(), 1e-300)
        above = np.flatnonzero(lam > floor)
        first = lam[above[0]] if above.size else np.inf
        r = int(np.count_nonzero(lam < RIGID_TOL ** 2 * first))
        seeds = V[:, :r]

    omega = np.sqrt(np.clip(lam, 0.0, None))
    if r:
        Phi_r = _mass_orthonormalize(seeds, M)
        Ve = V[:, r:]
        Ve = Ve - Phi_r @ (Phi_r.T @ M @ Ve)
        Ve = Ve / np.sqrt(np.einsum("ij,ij->j", Ve, M @ Ve))
        V = np.column_stack([Phi_r, Ve])
        omega[:r] = 0.0
    return ModalBasis(frequencies=omega, shapes=V, rigid_count=r)


def select_retained(basis: ModalBasis, f_cut: float) -> np.ndarray:
    """Indices of modes with f <= f_cut (Hz); rigid modes always included."""
    if not f_cut > 0:
        raise ReductionError("f_cut must be > 0")
    idx = np.flatnonzero(basis.frequencies_hz <= f_cut)
    idx = np.union1d(np.arange(basis.rigid_count), idx).astype(int)
    if idx.size == basis.rigid_count:
        warnings.warn(f"f_cut={f_cut} Hz is below the first elastic frequency; "
                      "no elastic modes retained", stacklevel=2)
    return idx


def _check_retained(basis: ModalBasis, retained) -> np.ndarray:
    retained = np.unique(np.asarray(retained, dtype=int))
    if retained.size and (retained[0] < 0 or retained[-1] >= basis.n_modes):
        raise ReductionError("retained mode index out of range")
    missing = np.setdiff1d(np.arange(basis.rigid_count), retained)
    if missing.size:
        raise ReductionError(
            f"retained set omits rigid mode(s) {missing.tolist()}; residual "
            "flexibility is undefined for zero-frequency modes")
    if retained.size and retained[-1] != retained.size - 1:
        warnings.warn("retained modes are not contiguous from the lowest frequency",
                      stacklevel=3)
    return retained


def _support_set(Phi_r: np.ndarray) -> np.ndarray:
    """Statically determinate support dofs (one per rigid mode)."""
    r = Phi_r.shape[1]
    if r == 0:
        return np.zeros(0, dtype=int)
    _, _, piv = la.qr(Phi_r.T, pivoting=True, mode="economic")
    return np.sort(piv[:r])


def elastic_flexibility(model: AssembledModel, basis: ModalBasis,
                        columns: Sequence[int]) -> np.ndarray:
    """Columns of the elastic (inertia-relief) flexibility matrix.

    For a supported model this is ``K^-1[:, columns]``.
    """
    M, K = model.mass_matrix, model.stiffness_matrix
    n = model.n_dof
    cols = np.asarray(columns, dtype=int)
    Phi_r = basis.shapes[:, :basis.rigid_count]
    S = _support_set(Phi_r)
    free = np.setdiff1d(np.arange(n), S)

    loads = np.zeros((n, cols.size))
    loads[cols, np.arange(cols.size)] = 1.0
    if S.size:
        loads = loads - M @ Phi_r @ Phi_r[cols].T

    Kf = K[np.ix_(free, free)]
    d = 1.0 / np.sqrt(np.diag(Kf))
    try:
        cf = la.cho_factor(Kf * d[:, None] * d[None, :])
    except la.LinAlgError:
        raise ReductionError("supported stiffness matrix is singular") from None
    U = np.zeros((n, cols.size))
    U[free] = d[:, None] * la.cho_solve(cf, d[:, None] * loads[free])
    if S.size:
        U = U - Phi_r @ (Phi_r.T @ M @ U)
    return U


def residual_flexibility(model: AssembledModel, basis: ModalBasis, retained,
                         method: str = "static") -> tuple[np.ndarray, np.ndarray]:
    """Residual flexibility partitions ``(F'_bb, F'_ib)``.

    ``method="static"`` subtracts the retained elastic modal flexibility
    from the (inertia-relief) static flexibility. ``method="modal"`` sums
    the non-retained elastic modes directly, which requires a complete
    eigenbasis of a model without massless dofs.
    """
    retained = _check_retained(basis, retained)
    b = np.asarray(model.boundary_set, dtype=int)
    i = np.asarray(model.inner_set, dtype=int)
    if b.size == 0:
        raise ReductionError("model has no boundary dofs")
    r = basis.rigid_count
    Phi, w = basis.shapes, basis.frequencies
    if method == "static":
        F = elastic_flexibility(model, basis, b)
        el = retained[retained >= r]
        F = F - (Phi[:, el] / w[el] ** 2) @ Phi[b][:, el].T
    elif method == "modal":
        if basis.n_modes != model.n_dof:
            raise ReductionError("modal residual flexibility needs the full eigenbasis")
        rest = np.setdiff1d(np.arange(r, basis.n_modes), retained)
        F = (Phi[:, rest] / w[rest] ** 2) @ Phi[b][:, rest].T
    else:
        raise ReductionError(f"unknown method {method!r}")
    Fbb = F[b]
    return 0.5 * (Fbb + Fbb.T), F[i]


@dataclass(frozen=True, eq=False)
class ReducedModel:
    """MacNeal reduced model in coordinates ``[q_b; eta]``.

    ``component_modes`` (R) maps reduced coordinates to the parent dofs in
    the parent's own dof ordering.
    """

    component_modes: np.ndarray
    k_bb: np.ndarray
    k_bi: np.ndarray
    k_ii: np.ndarray
    boundary_map: tuple[int, ...]
    retained: np.ndarray
    retained_frequencies: np.ndarray
    rigid_count: int
    mode_shapes: np.ndarray  # retained Phi, parent ordering
    parent: AssembledModel | None = None

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_map)

    @property
    def n_modes(self) -> int:
        return len(self.retained_frequencies)

    @property
    def n_dof(self) -> int:
        return self.n_boundary + self.n_modes

    @property
    def reduced_stiffness(self) -> np.ndarray:
        return np.block([[self.k_bb, self.k_bi], [self.k_bi.T, self.k_ii]])

    @property
    def reduced_mass(self) -> np.ndarray:
        Mt = np.zeros((self.n_dof, self.n_dof))
        Mt[self.n_boundary:, self.n_boundary:] = np.eye(self.n_modes)
        return Mt

    def condensed_inner_stiffness(self) -> np.ndarray:
        """``k_ii - k_bi^T k_bb^-1 k_bi``; equals diag(omega^2) exactly."""
        return self.k_ii - self.k_bi.T @ la.solve(self.k_bb, self.k_bi, assume_a="pos")

    def static_boundary_flexibility(self) -> np.ndarray:
        """Boundary flexibility of the reduced model under self-equilibrated loads.

        Solves ``K~ [q_b; eta] = [I; 0]`` with the rigid-mode coordinates
        held at zero (their equations carry the inertia-relief forces and
        are dropped), one column per boundary dof.
        """
        nb, r = self.n_boundary, self.rigid_count
        keep = np.r_[np.arange(nb), nb + np.arange(r, self.n_modes)]
        sub = self.reduced_stiffness[np.ix_(keep, keep)]
        rhs = np.zeros((keep.size, nb))
        rhs[:nb] = np.eye(nb)
        return la.solve(sub, rhs, assume_a="sym")[:nb]


def build_rom(model: AssembledModel, basis: ModalBasis, retained,
              method: str = "static") -> ReducedModel:
    """MacNeal reduced model of ``model`` keeping modes ``retained``."""
    retained = _check_retained(basis, retained)
    Fbb, Fib = residual_flexibility(model, basis, retained, method=method)
    b = np.asarray(model.boundary_set, dtype=int)
    i = np.asarray(model.inner_set, dtype=int)
    try:
        cf = la.cho_factor(Fbb)
        kbb = la.cho_solve(cf, np.eye(b.size))
    except la.LinAlgError:
        raise ReductionError(
            "residual boundary flexibility is singular: all boundary-active "
            "flexibility is already retained; lower the mode cutoff") from None
    kbb = 0.5 * (kbb + kbb.T)
    Phi = basis.shapes[:, retained]
    w = basis.frequencies[retained]
    Phi_b, Phi_i = Phi[b], Phi[i]
    kbi = -kbb @ Phi_b
    kii = np.diag(w ** 2) + Phi_b.T @ kbb @ Phi_b
    kii = 0.5 * (kii + kii.T)

    nb, nm = b.size, retained.size
    A = Fib @ kbb  # static attachment shapes
    R = np.zeros((model.n_dof, nb + nm))
    R[b, :nb] = np.eye(nb)
    R[np.ix_(i, np.arange(nb))] = A
    R[np.ix_(i, nb + np.arange(nm))] = Phi_i - A @ Phi_b
    r = int(np.count_nonzero(retained < basis.rigid_count))
    return ReducedModel(
        component_modes=R, k_bb=kbb, k_bi=kbi, k_ii=kii,
        boundary_map=tuple(int(x) for x in b), retained=retained,
        retained_frequencies=w, rigid_count=r, mode_shapes=Phi, parent=model)


def expand(rom: ReducedModel, q_b, eta) -> np.ndarray:
    """Parent dof vector(s) ``R [q_b; eta]``; accepts trailing time axes."""
    q_b = np.asarray(q_b, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if q_b.shape[0] != rom.n_boundary or eta.shape[0] != rom.n_modes:
        raise ReductionError(
            f"expected {rom.n_boundary} boundary and {rom.n_modes} modal "
            f"coordinates, got {q_b.shape[0]} and {eta.shape[0]}")
    return rom.component_modes @ np.concatenate([q_b, eta])


def reduce_sphere(model: AssembledModel) -> ReducedModel:
    """ROM of the two-dof sphere: contact point + rigid-body mode."""
    basis = solve_modes(model, condense_massless=True)
    return build_rom(model, basis, np.arange(basis.rigid_count))


# -- ROM files ---------------------------------------------------------------

def export_rom(rom: ReducedModel, stem) -> list[Path]:
    """Write ``stem.rom`` (bookkeeping), ``stem.ktil`` and ``stem.rmat``."""
    stem = Path(stem)
    head = stem.with_suffix(".rom")
    lines = [
        f"n_boundary {rom.n_boundary}",
        f"n_modes {rom.n_modes}",
        f"rigid_count {rom.rigid_count}",
        "boundary_map " + " ".join(str(i + 1) for i in rom.boundary_map),
        "retained " + " ".join(str(i + 1) for i in rom.retained),
        "retained_frequencies " + " ".join(f"{w:.16e}" for w in rom.retained_frequencies),
    ]
    if rom.parent is not None:
        labels = [f"{n}:{t}" for n, t in (rom.parent.dof_labels[i] for i in rom.boundary_map)]
        lines.append("boundary_labels " + " ".join(labels))
    head.write_text("\n".join(lines) + "\n")
    write_symmetric(stem.with_suffix(".ktil"), rom.reduced_stiffness,
                    comment="MacNeal reduced stiffness [q_b; eta]")
    write_general(stem.with_suffix(".rmat"), rom.component_modes,
                  comment="component modes R")
    write_general(stem.with_suffix(".phi"), rom.mode_shapes,
                  comment="retained mass-normalized mode shapes")
    return [head, stem.with_suffix(".ktil"), stem.with_suffix(".rmat"),
            stem.with_suffix(".phi")]


def import_rom(stem) -> ReducedModel:
    stem = Path(stem)
    fields = {}
    for line in stem.with_suffix(".rom").read_text().splitlines():
        if line.strip():
            key, _, rest = line.partition(" ")
            fields[key] = rest.split()
    try:
        nb = int(fields["n_boundary"][0])
        nm = int(fields["n_modes"][0])
        r = int(fields["rigid_count"][0])
        bmap = tuple(int(x) - 1 for x in fields["boundary_map"])
        retained = np.array([int(x) - 1 for x in fields["retained"]], dtype=int)
        w = np.array([float(x) for x in fields.get("retained_frequencies", [])])
    except (KeyError, IndexError, ValueError) as exc:
        raise MatrixFileError(f"{stem}.rom: malformed ({exc})") from None
    Kt = read_matrix(stem.with_suffix(".ktil"))
    R = read_matrix(stem.with_suffix(".rmat"))
    Phi = read_matrix(stem.with_suffix(".phi"))
    if Kt.shape != (nb + nm, nb + nm) or w.size != nm:
        raise MatrixFileError(f"{stem}: inconsistent ROM dimensions")
    return ReducedModel(
        component_modes=R, k_bb=Kt[:nb, :nb], k_bi=Kt[:nb, nb:], k_ii=Kt[nb:, nb:],
        boundary_map=bmap, retained=retained, retained_frequencies=w,
        rigid_count=r, mode_shapes=Phi, parent=None)
