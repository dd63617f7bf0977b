"""Finite-element models for the sphere/beam impact problem.

Three desk-scale models are provided:

- an axial rod of 2-node linear elements (one translation per node),
- a planar Euler-Bernoulli beam of 2-node cubic Hermite elements
  (transverse displacement ``w`` and rotation ``theta`` per node),
- a two-dof sphere: a rigid mass connected by the contact compliance
  to a massless contact point.

All models are returned as :class:`AssembledModel` with dense symmetric
matrices over the free (unconstrained) degrees of freedom.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

#: Transverse displacement and rotation tags for beam dofs.
TRANSVERSE = "w"
ROTATION = "theta"
AXIAL = "u"


class ModelError(ValueError):
    """Raised for invalid model input."""


@dataclass(frozen=True)
class MaterialSpec:
    elastic_modulus: float  # Pa
    poisson_ratio: float
    density: float  # kg/m^3

    def __post_init__(self):
        if not self.elastic_modulus > 0:
            raise ModelError("elastic_modulus must be > 0")
        if not 0.0 <= self.poisson_ratio < 0.5:
            raise ModelError("poisson_ratio must be in [0, 0.5)")
        if not self.density > 0:
            raise ModelError("density must be > 0")

    @property
    def shear_wave_speed(self) -> float:
        """Speed of transversal (shear) waves in m/s."""
        E, nu, rho = self.elastic_modulus, self.poisson_ratio, self.density
        return math.sqrt(E / (2.0 * (1.0 + nu) * rho))


STEEL = MaterialSpec(elastic_modulus=210e9, poisson_ratio=0.3, density=7800.0)


@dataclass(frozen=True)
class BeamGeometry:
    length: float
    width: float
    height: float

    def __post_init__(self):
        if min(self.length, self.width, self.height) <= 0:
            raise ModelError("beam dimensions must be > 0")
        if self.length / self.height < 5.0:
            logger.warning(
                "beam slenderness length/height = %.2f < 5; Euler-Bernoulli "
                "theory is questionable", self.length / self.height)

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def second_moment(self) -> float:
        # bending about the width axis (vertical motion)
        return self.width * self.height ** 3 / 12.0


#: 210 x 15 x 10 mm test beam.
TEST_BEAM = BeamGeometry(length=0.210, width=0.015, height=0.010)


@dataclass(frozen=True)
class SphereSpec:
    mass: float  # kg
    radius: float  # m
    contact_compliance: float  # m/N

    def __post_init__(self):
        if not self.mass > 0:
            raise ModelError("sphere mass must be > 0")
        if not self.radius > 0:
            raise ModelError("sphere radius must be > 0")
        if not self.contact_compliance > 0:
            raise ModelError("contact_compliance must be > 0")


@dataclass(frozen=True, eq=False)
class AssembledModel:
    """Symmetric mass/stiffness pair over the free dofs of a model.

    ``dof_labels[k]`` is the ``(node, tag)`` of row ``k``. ``boundary_set``
    and ``inner_set`` partition ``range(n_dof)``; ``constrained`` lists the
    labels of eliminated supports. ``rigid_seeds`` holds one column per
    rigid-body motion the model admits (used to build a reproducible
    rigid-mode basis); it has zero columns for a supported model.
    """

    mass_matrix: np.ndarray
    stiffness_matrix: np.ndarray
    dof_labels: tuple[tuple[int, str], ...]
    boundary_set: tuple[int, ...] = ()
    constrained: tuple[tuple[int, str], ...] = ()
    node_coords: np.ndarray | None = None
    rigid_seeds: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        M = np.array(self.mass_matrix, dtype=float)
        K = np.array(self.stiffness_matrix, dtype=float)
        n = len(self.dof_labels)
        if M.shape != (n, n) or K.shape != (n, n):
            raise ModelError(
                f"matrix shapes {M.shape}, {K.shape} do not match {n} dof labels")
        b = tuple(int(i) for i in self.boundary_set)
        if len(set(b)) != len(b) or any(not 0 <= i < n for i in b):
            raise ModelError("boundary_set must hold distinct indices in range")
        seeds = None
        if self.rigid_seeds is not None:
            seeds = np.array(self.rigid_seeds, dtype=float).reshape(n, -1)
            seeds.setflags(write=False)
        for a in (M, K):
            a.setflags(write=False)
        object.__setattr__(self, "mass_matrix", M)
        object.__setattr__(self, "stiffness_matrix", K)
        object.__setattr__(self, "boundary_set", b)
        object.__setattr__(self, "rigid_seeds", seeds)
        if self.node_coords is not None:
            x = np.array(self.node_coords, dtype=float)
            x.setflags(write=False)
            object.__setattr__(self, "node_coords", x)

    @property
    def n_dof(self) -> int:
        return len(self.dof_labels)

    @property
    def inner_set(self) -> tuple[int, ...]:
        b = set(self.boundary_set)
        return tuple(i for i in range(self.n_dof) if i not in b)

    @property
    def rigid_count(self) -> int:
        return 0 if self.rigid_seeds is None else self.rigid_seeds.shape[1]

    def dof_index(self, node: int, tag: str) -> int:
        try:
            return self.dof_labels.index((node, tag))
        except ValueError:
            raise ModelError(f"no free dof ({node}, {tag!r}) in model") from None

    def nearest_node(self, x: float) -> tuple[int, float]:
        """Snap an axial coordinate to the nearest node; returns (node, x_node)."""
        if self.node_coords is None:
            raise ModelError("model has no node coordinates")
        xs = self.node_coords
        if not xs[0] - 1e-12 <= x <= xs[-1] + 1e-12:
            raise ModelError(
                f"point x={x} outside [{xs[0]}, {xs[-1]}]")
        node = int(np.argmin(np.abs(xs - x)))
        return node, float(xs[node])

    def with_boundary(self, indices: Sequence[int]) -> "AssembledModel":
        """Copy of the model with a new boundary/inner partition."""
        return replace(self, boundary_set=tuple(int(i) for i in indices))

    def check_symmetry(self) -> float:
        """Largest absolute asymmetry of M and K."""
        M, K = self.mass_matrix, self.stiffness_matrix
        return float(max(np.abs(M - M.T).max(), np.abs(K - K.T).max()))


def _require_positive(**kw):
    for name, val in kw.items():
        if not val > 0:
            raise ModelError(f"{name} must be > 0, got {val}")


def _check_mass_style(mass_style):
    if mass_style not in ("consistent", "lumped"):
        raise ModelError(f"unknown mass_style {mass_style!r}")


def assemble_rod(n_elem: int, material: MaterialSpec, area: float, length: float,
                 mass_style: str = "consistent") -> AssembledModel:
    """Free-free axial rod of ``n_elem`` linear elements."""
    if n_elem < 1:
        raise ModelError("n_elem must be >= 1")
    _require_positive(area=area, length=length)
    _check_mass_style(mass_style)
    le = length / n_elem
    E, rho = material.elastic_modulus, material.density
    ke = E * area / le * np.array([[1.0, -1.0], [-1.0, 1.0]])
    if mass_style == "consistent":
        me = rho * area * le / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    else:
        me = rho * area * le / 2.0 * np.eye(2)
    n = n_elem + 1
    K = np.zeros((n, n))
    M = np.zeros((n, n))
    for e in range(n_elem):
        idx = np.ix_([e, e + 1], [e, e + 1])
        K[idx] += ke
        M[idx] += me
    return AssembledModel(
        mass_matrix=M, stiffness_matrix=K,
        dof_labels=tuple((i, AXIAL) for i in range(n)),
        node_coords=np.linspace(0.0, length, n),
        rigid_seeds=np.ones((n, 1)),
        meta={"kind": "rod", "length": length, "area": area,
              "mass_style": mass_style},
    )


def beam_element_matrices(material: MaterialSpec, geometry: BeamGeometry,
                          le: float, mass_style: str = "consistent"):
    """Hermite element stiffness and mass for dofs (w1, th1, w2, th2)."""
    EI = material.elastic_modulus * geometry.second_moment
    rhoA = material.density * geometry.area
    L = le
    ke = EI / L ** 3 * np.array([
        [12.0, 6 * L, -12.0, 6 * L],
        [6 * L, 4 * L * L, -6 * L, 2 * L * L],
        [-12.0, -6 * L, 12.0, -6 * L],
        [6 * L, 2 * L * L, -6 * L, 4 * L * L],
    ])
    if mass_style == "consistent":
        me = rhoA * L / 420.0 * np.array([
            [156.0, 22 * L, 54.0, -13 * L],
            [22 * L, 4 * L * L, 13 * L, -3 * L * L],
            [54.0, 13 * L, 156.0, -22 * L],
            [-13 * L, -3 * L * L, -22 * L, 4 * L * L],
        ])
    else:
        # translations: row-sum over translational columns (rhoA*L/2);
        # rotations: diagonal scaling (HRZ), rhoA*L^3/78
        mt = rhoA * L / 2.0
        mr = rhoA * L ** 3 / 78.0
        me = np.diag([mt, mr, mt, mr])
    return ke, me


def assemble_beam(n_elem: int, material: MaterialSpec, geometry: BeamGeometry,
                  bc: str = "free_free", mass_style: str = "consistent") -> AssembledModel:
    """Planar Euler-Bernoulli beam along x with uniform mesh.

    ``bc`` is ``"free_free"`` or ``"clamped_clamped"``; clamping removes
    both dofs at each end node.
    """
    if n_elem < 2:
        raise ModelError("n_elem must be >= 2")
    if bc not in ("free_free", "clamped_clamped"):
        raise ModelError(f"unknown bc {bc!r}")
    _check_mass_style(mass_style)
    le = geometry.length / n_elem
    ke, me = beam_element_matrices(material, geometry, le, mass_style)
    n_nodes = n_elem + 1
    n = 2 * n_nodes
    K = np.zeros((n, n))
    M = np.zeros((n, n))
    for e in range(n_elem):
        dofs = [2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3]
        idx = np.ix_(dofs, dofs)
        K[idx] += ke
        M[idx] += me
    labels = [(i, tag) for i in range(n_nodes) for tag in (TRANSVERSE, ROTATION)]
    x = np.linspace(0.0, geometry.length, n_nodes)
    if bc == "free_free":
        xc = 0.5 * geometry.length
        trans = np.zeros(n)
        trans[0::2] = 1.0
        rot = np.zeros(n)
        rot[0::2] = x - xc
        rot[1::2] = 1.0
        seeds = np.column_stack([trans, rot])
        constrained: list = []
    else:
        drop = [0, 1, n - 2, n - 1]
        keep = [i for i in range(n) if i not in drop]
        constrained = [labels[i] for i in drop]
        K = K[np.ix_(keep, keep)]
        M = M[np.ix_(keep, keep)]
        labels = [labels[i] for i in keep]
        seeds = np.zeros((len(keep), 0))
    return AssembledModel(
        mass_matrix=M, stiffness_matrix=K, dof_labels=tuple(labels),
        constrained=tuple(constrained), node_coords=x, rigid_seeds=seeds,
        meta={"kind": "beam", "bc": bc, "length": geometry.length,
              "mass_style": mass_style, "n_elem": n_elem},
    )


def beam_point_dof(model: AssembledModel, x: float) -> tuple[int, float]:
    """Free transverse dof nearest to axial coordinate ``x``.

    Returns ``(dof_index, snapped_x)``. Raises if the nearest node is a
    clamped support.
    """
    node, xs = model.nearest_node(x)
    return model.dof_index(node, TRANSVERSE), xs


def assemble_sphere(spec: SphereSpec) -> AssembledModel:
    """Rigid mass (dof 0, inner) + massless contact point (dof 1, boundary).

    The zero mass entry is intentional: the contact point carries no
    inertia and is eliminated statically when the model is reduced.
    """
    k = 1.0 / spec.contact_compliance
    K = k * np.array([[1.0, -1.0], [-1.0, 1.0]])
    M = np.diag([spec.mass, 0.0])
    return AssembledModel(
        mass_matrix=M, stiffness_matrix=K,
        dof_labels=((0, "mass"), (1, "contact")),
        boundary_set=(1,), rigid_seeds=np.ones((2, 1)),
        meta={"kind": "sphere", "radius": spec.radius, "mass": spec.mass,
              "compliance": spec.contact_compliance},
    )


def recommend_element_length(material: MaterialSpec, f_max: float,
                             nodes_per_wave: int = 20) -> tuple[float, float]:
    """Element length sampling the shortest transversal wave.

    Returns ``(element_length, wavelength)`` where the wavelength is
    ``c_T / f_max``.
    """
    _require_positive(f_max=f_max)
    wavelength = material.shear_wave_speed / f_max
    return wavelength / nodes_per_wave, wavelength


# -- Hertz contact helpers ----------------------------------------------------

def effective_modulus(m1: MaterialSpec, m2: MaterialSpec) -> float:
    """Hertz contact modulus E* with 1/E* = sum (1 - nu^2)/E."""
    return 1.0 / ((1 - m1.poisson_ratio ** 2) / m1.elastic_modulus
                  + (1 - m2.poisson_ratio ** 2) / m2.elastic_modulus)


def hertz_stiffness(e_star: float, radius: float) -> float:
    """k_H in F = k_H * delta^1.5 for a sphere on a flat."""
    return 4.0 / 3.0 * e_star * math.sqrt(radius)


def hertz_compliance(k_hertz: float, force: float, kind: str = "secant") -> float:
    """Linearized Hertz compliance (m/N) at contact force ``force``.

    ``kind="tangent"`` gives 1/(dF/d delta) = 1/(1.5 k_H^(2/3) F^(1/3));
    ``kind="secant"`` gives delta/F = 1/(k_H^(2/3) F^(1/3)).
    """
    _require_positive(k_hertz=k_hertz, force=force)
    base = k_hertz ** (2.0 / 3.0) * force ** (1.0 / 3.0)
    if kind == "tangent":
        return 1.0 / (1.5 * base)
    if kind == "secant":
        return 1.0 / base
    raise ModelError(f"unknown linearization {kind!r}")


def hertz_rigid_impact(mass: float, radius: float, e_star: float, velocity: float):
    """Closed-form Hertz impact on a rigid half-space.

    Returns a dict with maximum approach ``delta_max``, peak force
    ``f_max`` and contact duration ``duration``.
    """
    _require_positive(mass=mass, radius=radius, e_star=e_star, velocity=velocity)
    k = hertz_stiffness(e_star, radius)
    delta_max = (1.25 * mass * velocity ** 2 / k) ** 0.4
    # duration = 2 * int_0^dmax dd / sqrt(v^2 - 0.8 k d^2.5 / m)
    #          = 2 * dmax / v * int_0^1 dx / sqrt(1 - x^2.5)
    duration = 2.0 * delta_max / velocity * _HERTZ_TIME_INTEGRAL
    return {"delta_max": delta_max, "f_max": k * delta_max ** 1.5,
            "duration": duration, "k_hertz": k}


def _hertz_time_integral() -> float:
    # int_0^1 (1 - x^(5/2))^(-1/2) dx = B(2/5, 1/2) * 2/5
    return 0.4 * math.gamma(0.4) * math.gamma(0.5) / math.gamma(0.9)


_HERTZ_TIME_INTEGRAL = _hertz_time_integral()
