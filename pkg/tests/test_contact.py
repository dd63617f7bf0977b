import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beamimpact import assembly as asm
from beamimpact.cms import build_rom, reduce_sphere, select_retained
from beamimpact.contact import (ContactOperator, ContactProblem, ContactSolverError,
                                CoupledSystem, InstabilityError, check_time_step,
                                complementarity_residual, initial_state, integrate,
                                solve_lcp, solve_static_contact, step)


def sphere(c=2.4e-8, m=5.58e-3):
    return reduce_sphere(asm.assemble_sphere(asm.SphereSpec(m, 5.55e-3, c)))


def enumerate_lcp(D, g):
    """Brute-force active-set oracle for 0 <= g + D lam _|_ lam >= 0."""
    m = g.size
    for active in itertools.product([False, True], repeat=m):
        a = np.array(active)
        lam = np.zeros(m)
        if a.any():
            lam[a] = np.linalg.solve(D[np.ix_(a, a)], -g[a])
        gap = g + D @ lam
        if np.all(lam >= -1e-12) and np.all(gap >= -1e-12 * np.abs(g).max()):
            return lam
    raise AssertionError("no complementary solution")


@pytest.fixture(scope="module")
def beam_rom(freefree_beam, freefree_basis):
    m = freefree_beam.with_boundary(
        [freefree_beam.dof_index(n, asm.TRANSVERSE) for n in (29, 30, 31)])
    return build_rom(m, freefree_basis, select_retained(freefree_basis, 69.7e3))


@pytest.fixture(scope="module")
def three_pair_system(beam_rom):
    return CoupledSystem([sphere(), sphere(), sphere(), beam_rom])


class TestContactProblem:
    def test_direction_map(self):
        p = ContactProblem.from_pairs(3, [(0, 2)], initial_gap=1e-3)
        np.testing.assert_array_equal(p.direction_map[:, 0], [1.0, 0.0, -1.0])
        assert p.gap(np.array([0.5, 0.0, 0.2]))[0] == pytest.approx(0.3 + 1e-3)

    def test_action_reaction(self):
        p = ContactProblem.from_pairs(4, [(0, 2), (1, 3)])
        assert np.array_equal(p.direction_map.sum(axis=0), np.zeros(2))

    def test_negative_gap_rejected(self):
        with pytest.raises(ValueError):
            ContactProblem.from_pairs(2, [(0, 1)], initial_gap=-1.0)

    def test_same_dof_rejected(self):
        with pytest.raises(ValueError):
            ContactProblem.from_pairs(2, [(1, 1)])


class TestLcp:
    def test_scalar_closed_form(self):
        lam, _ = solve_lcp(np.array([[2.0]]), np.array([-3.0]))
        assert lam[0] == pytest.approx(1.5, rel=1e-14)
        lam, _ = solve_lcp(np.array([[2.0]]), np.array([3.0]))
        assert lam[0] == 0.0

    def test_nonconvergence_reports_residual(self):
        D = np.array([[1.0, 0.99], [0.99, 1.0]])
        with pytest.raises(ContactSolverError, match="residual"):
            solve_lcp(D, np.array([-1.0, -0.5]), max_iterations=1)

    def test_coupled_pair(self):
        D = np.array([[1.0, 0.99], [0.99, 1.0]])
        lam, info = solve_lcp(D, np.array([-1.0, -0.5]))
        np.testing.assert_allclose(lam, [1.0, 0.0], atol=1e-12)
        assert info.residual <= 1e-10

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 10 ** 6), m=st.integers(1, 5))
    def test_matches_enumeration(self, seed, m):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((m, m))
        D = A @ A.T + 0.1 * np.eye(m)
        g = rng.standard_normal(m)
        lam, info = solve_lcp(D, g, rho=1.9 / np.linalg.eigvalsh(
            D / np.sqrt(np.outer(np.diag(D), np.diag(D)))).max(), max_iterations=5000)
        np.testing.assert_allclose(lam, enumerate_lcp(D, g), atol=1e-8 * max(1, np.abs(lam).max()))
        res, _ = complementarity_residual(D, g, lam)
        assert res <= 1e-10


class TestStaticContact:
    def test_open_gap_is_linear_statics(self, beam_rom):
        system = CoupledSystem([sphere(), beam_rom])
        p = ContactProblem.from_pairs(system.n_boundary, [(0, 2)], initial_gap=1e-3)
        eta = np.zeros(system.n_modes)
        eta[3:] = 1e-6
        q_b, lam = solve_static_contact(system, eta, p)
        assert lam[0] == 0.0
        np.testing.assert_allclose(q_b, -np.linalg.solve(system.k_bb, system.k_bi @ eta),
                                   rtol=1e-12, atol=1e-20)

    def test_forced_interpenetration(self, beam_rom):
        system = CoupledSystem([sphere(), beam_rom])
        p = ContactProblem.from_pairs(system.n_boundary, [(0, 2)])
        eta = np.zeros(system.n_modes)
        eta[0] = -1e-5  # sphere rigid mode pushed downward
        op = ContactOperator(system, p)
        q_b, lam, _ = op.solve(eta)
        g_free = op.gap_free(eta)[0]
        k_eff = 1.0 / op.D[0, 0]
        assert lam[0] == pytest.approx(max(0.0, -k_eff * g_free), rel=1e-12)
        assert abs(p.gap(q_b)[0]) <= 1e-12 * abs(g_free)
        # boundary equilibrium k_bb q_b + k_bi eta - W lam = 0
        r = system.k_bb @ q_b + system.k_bi @ eta - p.direction_map @ lam
        assert np.abs(r).max() <= 1e-9 * np.abs(p.direction_map @ lam).max()

    def test_three_pairs_one_active(self, three_pair_system):
        system = three_pair_system
        pairs = [(0, 3), (1, 4), (2, 5)]
        p = ContactProblem.from_pairs(system.n_boundary, pairs, initial_gap=[0.0, 2e-6, 2e-6])
        eta = np.zeros(system.n_modes)
        phi = system.roms[0].mode_shapes[1, 0]
        eta[0] = -1e-6 / phi  # only the first sphere penetrates
        op = ContactOperator(system, p)
        q_b, lam, _ = op.solve(eta)
        ref = enumerate_lcp(op.D, op.gap_free(eta))
        assert np.count_nonzero(ref > 0) == 1
        np.testing.assert_allclose(lam, ref, rtol=1e-10, atol=1e-12 * ref.max())
        np.testing.assert_allclose(q_b, system.Q @ eta + op.C @ ref, rtol=1e-10, atol=1e-20)

    def test_three_pairs_all_active(self, three_pair_system):
        system = three_pair_system
        p = ContactProblem.from_pairs(system.n_boundary, [(0, 3), (1, 4), (2, 5)])
        eta = np.zeros(system.n_modes)
        for k in range(3):
            eta[k] = -(1 + k) * 1e-4
        op = ContactOperator(system, p)
        _, lam, info = op.solve(eta)
        np.testing.assert_allclose(lam, enumerate_lcp(op.D, op.gap_free(eta)), rtol=1e-9)
        assert info.residual <= 1e-10

    def test_deterministic(self, three_pair_system):
        p = ContactProblem.from_pairs(three_pair_system.n_boundary, [(0, 3), (1, 4), (2, 5)])
        eta = np.linspace(-1e-4, 1e-4, three_pair_system.n_modes)
        a = solve_static_contact(three_pair_system, eta, p)
        b = solve_static_contact(three_pair_system, eta, p)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))


def free_flight_operator(beam_rom):
    system = CoupledSystem([sphere(), beam_rom])
    p = ContactProblem.from_pairs(system.n_boundary, [(0, 2)], initial_gap=1.0)
    return ContactOperator(system, p)


class TestTimeStepping:
    def test_inner_dynamics_are_modal(self, beam_rom):
        op = free_flight_operator(beam_rom)
        w2 = np.r_[0.0, beam_rom.retained_frequencies ** 2]
        assert np.abs(op.A + np.diag(w2)).max() <= 1e-8 * w2.max()

    def test_leapfrog_cosine(self, beam_rom):
        op = free_flight_operator(beam_rom)
        k = 1 + 2  # first elastic beam mode (after sphere + 2 rigid)
        w = beam_rom.retained_frequencies[2]
        dt, n = 1e-7, 2000
        eta0 = np.zeros(op.system.n_modes)
        eta0[k] = 1e-6
        hist = integrate(op, eta0, np.zeros_like(eta0), dt, n)
        big = 2 * math.asin(w * dt / 2) / dt  # discrete frequency of the scheme
        expected = 1e-6 * np.cos(big * hist.t)
        assert np.abs(hist.eta[:, k] - expected).max() <= 1e-6 * 1e-7
        # leading-order period error (omega dt)^2 / 24
        assert big / w - 1 == pytest.approx((w * dt) ** 2 / 24, rel=1e-2)

    def test_step_matches_integrate(self, beam_rom):
        op = free_flight_operator(beam_rom)
        eta0 = np.zeros(op.system.n_modes)
        eta0[4] = 1e-6
        s = initial_state(op, eta0, np.zeros_like(eta0), 1e-7)
        for _ in range(10):
            s = step(s, op, 1e-7)
        hist = integrate(op, eta0, np.zeros_like(eta0), 1e-7, 10)
        np.testing.assert_allclose(s.eta, hist.eta[-1], rtol=1e-13, atol=1e-25)

    def test_free_flight_energy(self, beam_rom):
        op = free_flight_operator(beam_rom)
        rng = np.random.default_rng(7)
        eta0 = 1e-7 * rng.standard_normal(op.system.n_modes)
        v0 = 1e-2 * rng.standard_normal(op.system.n_modes)
        hist = integrate(op, eta0, v0, 1e-7, 5000)
        e = hist.energy
        assert np.abs(e - e[0]).max() / e[0] < 1e-3

    def test_second_order_convergence(self, beam_rom):
        op = free_flight_operator(beam_rom)
        k, T = 3, 2e-4
        w = beam_rom.retained_frequencies[2]
        eta0 = np.zeros(op.system.n_modes)
        eta0[k] = 1.0
        errs = []
        for dt in (4e-7, 2e-7):
            h = integrate(op, eta0, np.zeros_like(eta0), dt, int(round(T / dt)))
            errs.append(abs(h.eta[-1, k] - math.cos(w * T)))
        assert 3.6 <= errs[0] / errs[1] <= 4.4

    def test_rest_is_preserved(self, beam_rom):
        op = free_flight_operator(beam_rom)
        z = np.zeros(op.system.n_modes)
        h = integrate(op, z, z, 1e-7, 500)
        assert not h.eta.any() and not h.eta_dot.any() and not h.lam.any()

    def test_unstable_step_rejected(self):
        with pytest.raises(InstabilityError):
            check_time_step(1e7, 3e-7)

    def test_large_step_warns(self):
        with pytest.warns(UserWarning, match="omega_max"):
            check_time_step(1e7, 1e-7)

    def test_energy_guard(self, beam_rom):
        op = free_flight_operator(beam_rom)
        eta0 = np.zeros(op.system.n_modes)
        eta0[3] = 1e-6
        with pytest.raises(InstabilityError, match="energy grew"):
            integrate(op, eta0, np.zeros_like(eta0), 1e-7, 200,
                      energy_growth_limit=-0.5, check_every=10)


class TestImpactRun:
    def test_complementarity_every_step(self, central_run):
        assert central_run.residual.max() <= 1e-8
        assert central_run.lam.min() >= 0.0

    def test_single_window(self, central_run):
        ev = central_run.events
        assert len(ev.windows) == 1 and ev.sub_impacts == 0

    def test_action_reaction_momentum(self, central_run):
        p = central_run.sphere_momentum + central_run.beam_momentum
        assert np.abs(p - p[0]).max() <= 1e-12 * abs(p[0])

    def test_central_symmetry(self, central_run):
        eta = central_run.beam_eta
        even = eta[:, 3::2]  # 2F, 4F, ... (columns after two rigid modes)
        rot = eta[:, 1]  # rigid rotation
        big = np.abs(eta).max()
        assert np.abs(even).max() < 1e-6 * big
        assert np.abs(rot).max() < 1e-6 * big

    def test_energy_across_impact(self, central_run):
        on, off = central_run.contact_window
        e = central_run.energy
        ratio = e[central_run.index(off)] / e[central_run.index(on)]
        assert 0.99 <= ratio <= 1.01
