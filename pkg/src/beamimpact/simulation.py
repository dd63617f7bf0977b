"""Scenario-level drivers: ROM simulation, Hertz oracle, full-order reference."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as la

from . import assembly as asm
from .cms import ModalBasis, ReducedModel, build_rom, reduce_sphere, select_retained, solve_modes
from .contact import (ContactOperator, ContactProblem, CoupledSystem, check_time_step,
                      integrate, solve_lcp)
from .hertz import hertz_impact
from .scenario import Scenario
from .trajectory import Trajectory

logger = logging.getLogger(__name__)


def beam_model(s: Scenario) -> asm.AssembledModel:
    b = s.beam
    mat = asm.MaterialSpec(b.elastic_modulus_pa, b.poisson_ratio, b.density_kg_m3)
    geo = asm.BeamGeometry(b.length_m, b.width_m, b.height_m)
    return asm.assemble_beam(b.n_elem, mat, geo, bc=b.bc, mass_style=b.mass_style)


def hertz_constant(s: Scenario) -> float:
    beam = asm.MaterialSpec(s.beam.elastic_modulus_pa, s.beam.poisson_ratio,
                            s.beam.density_kg_m3)
    sph = asm.MaterialSpec(s.sphere.elastic_modulus_pa, s.sphere.poisson_ratio, 7800.0)
    return asm.hertz_stiffness(asm.effective_modulus(beam, sph), s.sphere.radius_m)


@dataclass(eq=False)
class Setup:
    """Everything derived from a scenario before time integration."""

    scenario: Scenario
    beam: asm.AssembledModel
    basis: ModalBasis
    retained: np.ndarray
    impact_dof: int
    impact_x: float
    probe_dofs: dict
    k_hertz: float
    compliance: float
    timings: dict = field(default_factory=dict)

    @property
    def impact_shape(self) -> np.ndarray:
        return self.basis.shapes[self.impact_dof, self.retained]

    @property
    def retained_frequencies(self) -> np.ndarray:
        return self.basis.frequencies[self.retained]

    @cached_property
    def beam_rom(self) -> ReducedModel:
        t0 = time.perf_counter()
        nodes = self.scenario.rom.nominal_area_nodes
        node, _ = self.beam.nearest_node(self.impact_x)
        bset = []
        for k in range(node - nodes, node + nodes + 1):
            try:
                bset.append(self.beam.dof_index(k, asm.TRANSVERSE))
            except asm.ModelError:
                continue
        rom = build_rom(self.beam.with_boundary(sorted(bset)), self.basis, self.retained)
        self.timings["beam_rom_s"] = time.perf_counter() - t0
        return rom

    @cached_property
    def sphere_rom(self) -> ReducedModel:
        spec = asm.SphereSpec(self.scenario.sphere.mass_kg, self.scenario.sphere.radius_m,
                              self.compliance)
        return reduce_sphere(asm.assemble_sphere(spec))

    @cached_property
    def system(self) -> CoupledSystem:
        return CoupledSystem([self.sphere_rom, self.beam_rom])

    @cached_property
    def problem(self) -> ContactProblem:
        c = self.scenario.contact
        j = self.beam_rom.boundary_map.index(self.impact_dof)
        return ContactProblem.from_pairs(
            self.system.n_boundary, [(0, 1 + j)], initial_gap=0.0,
            penalty_scale=c.penalty_scale, complementarity_tol=c.complementarity_tol,
            max_iterations=c.max_iterations, gap_tol=c.gap_tol_m)

    @property
    def rom_dof_count(self) -> int:
        return self.system.n_boundary + self.system.n_modes


def resolve_compliance(s: Scenario, k_hertz: float, omega=(), phi_p=()) -> float:
    """Sphere contact compliance from the configured linearization rule."""
    sp = s.sphere
    rule = sp.compliance_rule
    if rule == "fixed":
        return sp.compliance_m_per_n
    if rule == "hertz_duration":
        beam = asm.MaterialSpec(s.beam.elastic_modulus_pa, s.beam.poisson_ratio, 7800.0)
        sph = asm.MaterialSpec(sp.elastic_modulus_pa, sp.poisson_ratio, 7800.0)
        rigid = asm.hertz_rigid_impact(sp.mass_kg, sp.radius_m,
                                       asm.effective_modulus(beam, sph), s.impact.velocity_m_s)
        return (rigid["duration"] / math.pi) ** 2 / sp.mass_kg
    # linearize at the peak force of the Hertz reference for this scenario
    ref = hertz_impact(sp.mass_kg, k_hertz, s.impact.velocity_m_s, omega, phi_p,
                       t_end=s.integration.t_end_s, dt_out=s.integration.dt_s,
                       rtol=s.post.oracle_rtol, stop_after_release=True)
    kind = "secant" if rule == "hertz_secant" else "tangent"
    return asm.hertz_compliance(k_hertz, float(ref["f_c"].max()), kind=kind)


def build_setup(s: Scenario) -> Setup:
    timings = {}
    t0 = time.perf_counter()
    beam = beam_model(s)
    basis = solve_modes(beam)
    timings["modes_s"] = time.perf_counter() - t0
    retained = select_retained(basis, s.rom.f_cut_hz)
    impact_dof, impact_x = asm.beam_point_dof(beam, s.point_coordinate(s.impact.point))
    probes = {}
    for name in s.probes.points:
        dof, _ = asm.beam_point_dof(beam, s.point_coordinate(name))
        probes[name] = dof
    k_h = hertz_constant(s)
    c = resolve_compliance(s, k_h, basis.frequencies[retained],
                           basis.shapes[impact_dof, retained])
    logger.info("impact at x=%.6g m (dof %d), compliance %.4e m/N", impact_x, impact_dof, c)
    return Setup(scenario=s, beam=beam, basis=basis, retained=retained,
                 impact_dof=impact_dof, impact_x=impact_x, probe_dofs=probes,
                 k_hertz=k_h, compliance=c, timings=timings)


def _beam_momentum_map(setup: Setup) -> np.ndarray:
    """Row vector mapping retained modal velocities to vertical momentum."""
    M = setup.beam.mass_matrix
    trans = np.array([tag == asm.TRANSVERSE for _, tag in setup.beam.dof_labels], dtype=float)
    return trans @ M @ setup.basis.shapes[:, setup.retained]


def _probe_shapes(setup: Setup, names) -> np.ndarray:
    rows = [setup.probe_dofs[k] for k in names]
    return setup.basis.shapes[np.ix_(rows, setup.retained)]


def simulate(s: Scenario, setup: Setup | None = None) -> Trajectory:
    """Semi-explicit massless-boundary ROM run of a scenario.

    The beam starts at rest, the sphere at the impact speed (downward) and
    in touch with the beam (zero gap, zero force).
    """
    setup = setup or build_setup(s)
    system, problem = setup.system, setup.problem
    op = ContactOperator(system, problem)
    dt = s.integration.dt_s
    sph, beam = setup.sphere_rom, setup.beam_rom
    ms, mb = system.modal_slices
    eta0 = np.zeros(system.n_modes)
    etad0 = np.zeros(system.n_modes)
    # sphere rigid mode moves the mass dof by phi_r(mass) per unit coordinate
    etad0[ms] = -s.impact.velocity_m_s / sph.mode_shapes[0, 0]
    t0 = time.perf_counter()
    raw = integrate(op, eta0, etad0, dt, s.n_steps)
    wall = time.perf_counter() - t0

    bs_s, bs_b = system.boundary_slices
    # boundary velocities from q_b = Q eta + C lam
    lam_dot = np.gradient(raw.lam, dt, axis=0) if raw.lam.shape[0] > 1 else raw.lam * 0
    qb_dot = raw.eta_dot @ system.Q.T + lam_dot @ op.C.T
    R_s = sph.component_modes
    v_sph = np.concatenate([qb_dot[:, bs_s], raw.eta_dot[:, ms]], axis=1) @ R_s[0]
    Rb = beam.component_modes
    names = tuple(setup.probe_dofs)
    rows = Rb[[setup.probe_dofs[n] for n in names]]
    red_vel = np.concatenate([qb_dot[:, bs_b], raw.eta_dot[:, mb]], axis=1)
    probe_v = red_vel @ rows.T
    f_c = raw.lam.sum(axis=1)
    pm = _beam_momentum_map(setup)
    return Trajectory(
        method="rom_semi_explicit", t=raw.t, f_c=f_c, v_sph=v_sph, lam=raw.lam,
        probe_names=names, probe_velocity=probe_v,
        beam_eta=raw.eta[:, mb], beam_eta_dot=raw.eta_dot[:, mb],
        mode_frequencies=setup.retained_frequencies, impact_shape=setup.impact_shape,
        rigid_count=beam.rigid_count, energy=raw.energy, sphere_mass=s.sphere.mass_kg,
        beam_momentum=raw.eta_dot[:, mb] @ pm, residual=raw.residual,
        coalescence=s.post.coalescence_s,
        meta={"wall_time_s": wall, "dt": dt, "n_steps": s.n_steps,
              "dof_count": setup.rom_dof_count, "compliance": setup.compliance,
              "impact_x": setup.impact_x, "lcp_iterations": int(raw.iterations.max()),
              "probe_shapes": _probe_shapes(setup, names),
              "q_b": raw.q_b, "eta_all": raw.eta, "eta_dot_all": raw.eta_dot})


def hertz_oracle(s: Scenario, setup: Setup | None = None, rigid_target: bool = False) -> Trajectory:
    """Rigid sphere + Hertz law + retained beam modes (no residual flexibility)."""
    setup = setup or build_setup(s)
    if rigid_target:
        omega, phi = np.zeros(0), np.zeros(0)
    else:
        omega, phi = setup.retained_frequencies, setup.impact_shape
    t0 = time.perf_counter()
    out = hertz_impact(s.sphere.mass_kg, setup.k_hertz, s.impact.velocity_m_s, omega, phi,
                       t_end=s.integration.t_end_s, dt_out=s.integration.dt_s,
                       rtol=s.post.oracle_rtol, radius=s.sphere.radius_m)
    wall = time.perf_counter() - t0
    n = out["t"].size
    shapes = setup.basis.shapes[:, setup.retained]
    names = tuple(setup.probe_dofs)
    if rigid_target:
        probe_v = np.zeros((n, len(names)))
        eta = eta_dot = np.zeros((n, 0))
    else:
        eta, eta_dot = out["eta"], out["eta_dot"]
        probe_v = eta_dot @ shapes[[setup.probe_dofs[k] for k in names]].T
    w = omega
    energy = (0.5 * s.sphere.mass_kg * out["v"] ** 2
              + 0.5 * np.sum(eta_dot ** 2 + (w ** 2) * eta ** 2, axis=1)
              + 0.4 * setup.k_hertz * np.where(out["delta"] > 0, out["delta"], 0.0) ** 2.5)
    pm = _beam_momentum_map(setup) if not rigid_target else np.zeros(0)
    return Trajectory(
        method="hertz_oracle" + ("_rigid" if rigid_target else ""), t=out["t"],
        f_c=out["f_c"], v_sph=out["v"], lam=out["f_c"][:, None], probe_names=names,
        probe_velocity=probe_v, beam_eta=eta, beam_eta_dot=eta_dot,
        mode_frequencies=w, impact_shape=phi,
        rigid_count=0 if rigid_target else setup.basis.rigid_count,
        energy=energy, sphere_mass=s.sphere.mass_kg,
        beam_momentum=eta_dot @ pm if pm.size else np.zeros(n),
        coalescence=s.post.coalescence_s,
        meta={"wall_time_s": wall, "dt": s.integration.dt_s, "k_hertz": setup.k_hertz,
              "probe_shapes": _probe_shapes(setup, names)})


def full_order_time_step(setup: Setup, safety: float = 0.8) -> float:
    """Stable central-difference step of the unreduced beam plus sphere spring."""
    M, K = setup.beam.mass_matrix, setup.beam.stiffness_matrix
    K = K.copy()
    K[setup.impact_dof, setup.impact_dof] += 1.0 / setup.compliance
    w_beam = math.sqrt(la.eigh(K, M, eigvals_only=True, subset_by_index=[M.shape[0] - 1,
                                                                          M.shape[0] - 1])[0])
    w_sph = math.sqrt(1.0 / (setup.compliance * setup.scenario.sphere.mass_kg))
    return safety * 2.0 / max(w_beam, w_sph)


def full_order_reference(s: Scenario, setup: Setup | None = None,
                         dt: float | None = None) -> Trajectory:
    """Central-difference march of the unreduced beam.

    The sphere mass is joined to its massless contact point by the contact
    compliance; the contact point obeys the same complementarity condition
    as in the ROM run (solved in closed form for the single pair), with the
    beam node position frozen at each level. Output is sampled on the
    scenario time grid by linear interpolation.
    """
    setup = setup or build_setup(s)
    dt = dt or full_order_time_step(setup)
    beam = setup.beam
    M, K = beam.mass_matrix, beam.stiffness_matrix
    n = beam.n_dof
    P = setup.impact_dof
    m_s, c = s.sphere.mass_kg, setup.compliance
    cf = la.cho_factor(M)
    MiK = la.cho_solve(cf, K)
    e = np.zeros(n)
    e[P] = 1.0
    Mie = la.cho_solve(cf, e)

    t_end = s.integration.t_end_s
    N = int(math.ceil(t_end / dt))
    t_out = s.integration.dt_s * np.arange(s.n_steps + 1)
    shapes = setup.basis.shapes[:, setup.retained]
    proj = shapes.T @ M  # modal projection eta = Phi^T M q
    names = tuple(setup.probe_dofs)
    pidx = [setup.probe_dofs[k] for k in names]
    # channels recorded at fine levels bracketing output times:
    # [f, v_s, eta..., eta_dot..., v_probes..., energy]
    T = dt * np.arange(N + 1)
    fine = np.clip(np.searchsorted(T, t_out), 0, N)
    needed = np.zeros(N + 1, dtype=bool)
    needed[fine] = True
    needed[np.maximum(fine - 1, 0)] = True
    nm = shapes.shape[1]
    rec = {}
    force = np.empty(N + 1)

    def record(k, u, v, v_s, lam):
        force[k] = lam
        if needed[k]:
            rec[k] = np.concatenate((
                [lam, v_s], proj @ u, proj @ v, v[pidx],
                [0.5 * v @ M @ v + 0.5 * u @ K @ u + 0.5 * m_s * v_s ** 2
                 + 0.5 * c * lam ** 2]))

    def contact(u, x_s):
        # scalar complementarity: gap x_s - u_P + c lam >= 0, lam >= 0
        return max(0.0, -(x_s - u[P]) / c)

    u = np.zeros(n)
    x_s = 0.0
    v0 = np.zeros(n)
    v_s0 = -s.impact.velocity_m_s
    lam = contact(u, x_s)
    a_u = -MiK @ u - Mie * lam
    a_s = lam / m_s
    vh = v0 - 0.5 * dt * a_u
    vhs = v_s0 - 0.5 * dt * a_s
    record(0, u, v0, v_s0, lam)
    t0 = time.perf_counter()
    for k in range(1, N + 1):
        vh_new = vh + dt * a_u
        vhs_new = vhs + dt * a_s
        if k > 1 and needed[k - 1]:
            record(k - 1, u, 0.5 * (vh + vh_new), 0.5 * (vhs + vhs_new), lam)
        u = u + dt * vh_new
        x_s = x_s + dt * vhs_new
        vh, vhs = vh_new, vhs_new
        lam = contact(u, x_s)
        force[k] = lam
        a_u = -MiK @ u - Mie * lam
        a_s = lam / m_s
    record(N, u, vh + 0.5 * dt * a_u, vhs + 0.5 * dt * a_s, lam)
    wall = time.perf_counter() - t0

    from .trajectory import detect_events
    fine_events = detect_events(T, force, s.post.coalescence_s)
    keys = np.array(sorted(rec))
    data = np.array([rec[k] for k in keys])
    Tk = T[keys]
    out = np.column_stack([np.interp(t_out, Tk, data[:, j]) for j in range(data.shape[1])])
    f_c = out[:, 0]
    eta_dot = out[:, 2 + nm:2 + 2 * nm]
    pm = _beam_momentum_map(setup)
    return Trajectory(
        method="full_order_reference", t=t_out, f_c=f_c, v_sph=out[:, 1], lam=f_c[:, None],
        probe_names=names, probe_velocity=out[:, 2 + 2 * nm:-1],
        beam_eta=out[:, 2:2 + nm], beam_eta_dot=eta_dot,
        mode_frequencies=setup.retained_frequencies, impact_shape=setup.impact_shape,
        rigid_count=setup.basis.rigid_count, energy=out[:, -1],
        sphere_mass=m_s, beam_momentum=eta_dot @ pm, coalescence=s.post.coalescence_s,
        meta={"wall_time_s": wall, "dt": dt, "n_steps": N, "dof_count": n + 2,
              "fine_window": fine_events.contact_window,
              "probe_shapes": _probe_shapes(setup, names)})
