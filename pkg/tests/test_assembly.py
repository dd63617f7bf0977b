import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beamimpact import assembly as asm
from beamimpact.cms import solve_modes

# Euler-Bernoulli free-free / clamped-clamped eigenvalues (beta L)
BETA_L = (4.730040745, 7.853204624, 10.995607838, 14.137165491, 17.278759657)


def closed_form_hz(k, geometry=asm.TEST_BEAM, material=asm.STEEL):
    EI = material.elastic_modulus * geometry.second_moment
    rhoA = material.density * geometry.area
    return BETA_L[k] ** 2 / (2 * math.pi * geometry.length ** 2) * math.sqrt(EI / rhoA)


class TestSpecs:
    def test_material_invariants(self):
        with pytest.raises(asm.ModelError):
            asm.MaterialSpec(-1.0, 0.3, 7800.0)
        with pytest.raises(asm.ModelError):
            asm.MaterialSpec(1.0, 0.5, 7800.0)
        with pytest.raises(asm.ModelError):
            asm.MaterialSpec(1.0, 0.3, 0.0)

    def test_geometry_slenderness_warning(self, caplog):
        asm.BeamGeometry(0.04, 0.015, 0.010)
        assert "slenderness" in caplog.text

    def test_geometry_positive(self):
        with pytest.raises(asm.ModelError):
            asm.BeamGeometry(0.2, 0.0, 0.01)

    def test_sphere_rejects_bad_compliance(self):
        with pytest.raises(asm.ModelError):
            asm.SphereSpec(5.58e-3, 5.55e-3, 0.0)

    def test_second_moment_flapwise(self):
        assert asm.TEST_BEAM.second_moment == pytest.approx(0.015 * 0.010 ** 3 / 12, rel=1e-15)


class TestRod:
    def test_single_element_consistent(self):
        m = asm.assemble_rod(1, asm.MaterialSpec(1.0, 0.0, 6.0), 1.0, 1.0)
        np.testing.assert_array_equal(m.stiffness_matrix, [[1, -1], [-1, 1]])
        np.testing.assert_allclose(m.mass_matrix, [[2, 1], [1, 2]], rtol=1e-15)

    def test_single_element_lumped(self):
        m = asm.assemble_rod(1, asm.MaterialSpec(1.0, 0.0, 6.0), 1.0, 1.0, mass_style="lumped")
        np.testing.assert_allclose(m.mass_matrix, np.diag([3.0, 3.0]), rtol=1e-15)

    def test_first_axial_frequency(self):
        m = asm.assemble_rod(100, asm.STEEL, 1.5e-4, 0.21)
        b = solve_modes(m)
        c = math.sqrt(asm.STEEL.elastic_modulus / asm.STEEL.density)
        assert b.rigid_count == 1
        assert b.frequencies_hz[1] == pytest.approx(c / (2 * 0.21), rel=1e-3)

    def test_total_mass(self):
        m = asm.assemble_rod(17, asm.STEEL, 1.5e-4, 0.21)
        one = np.ones(m.n_dof)
        assert one @ m.mass_matrix @ one == pytest.approx(7800 * 1.5e-4 * 0.21, rel=1e-12)

    @pytest.mark.parametrize("bad", [dict(n_elem=0), dict(area=-1.0), dict(length=0.0)])
    def test_rejects_bad_input(self, bad):
        args = dict(n_elem=2, material=asm.STEEL, area=1.0, length=1.0) | bad
        with pytest.raises(asm.ModelError):
            asm.assemble_rod(**args)


class TestBeam:
    def test_symmetry_exact(self, freefree_beam, clamped_beam):
        assert freefree_beam.check_symmetry() == 0.0
        assert clamped_beam.check_symmetry() == 0.0

    def test_rigid_nullity(self, freefree_beam):
        K = freefree_beam.stiffness_matrix
        scale = np.abs(K).max()
        for seed in freefree_beam.rigid_seeds.T:
            assert np.abs(K @ seed).max() <= 1e-10 * scale * np.abs(seed).max()

    def test_translational_mass(self, freefree_beam):
        t = np.zeros(freefree_beam.n_dof)
        t[0::2] = 1.0
        total = t @ freefree_beam.mass_matrix @ t
        assert total == pytest.approx(7800 * asm.TEST_BEAM.area * 0.21, rel=1e-12)

    def test_lumped_mass_diagonal_positive(self):
        m = asm.assemble_beam(10, asm.STEEL, asm.TEST_BEAM, mass_style="lumped")
        M = m.mass_matrix
        assert np.all(M == np.diag(np.diag(M)))
        assert np.all(np.diag(M) > 0)

    def test_first_frequencies_closed_form(self, freefree_basis):
        f = freefree_basis.frequencies_hz
        r = freefree_basis.rigid_count
        for k in range(3):
            assert f[r + k] == pytest.approx(closed_form_hz(k), rel=5e-3)

    def test_ratio_2f_1f(self, freefree_basis):
        f = freefree_basis.frequencies_hz[2:]
        assert f[1] / f[0] == pytest.approx((7.8532 / 4.7300) ** 2, rel=1e-2)

    def test_rigid_count(self, freefree_basis, clamped_beam):
        assert freefree_basis.rigid_count == 2
        assert solve_modes(clamped_beam).rigid_count == 0

    def test_clamped_first_frequency_near_measured(self, clamped_beam):
        f1 = solve_modes(clamped_beam).frequencies_hz[0]
        assert abs(f1 - 1110.0) / 1110.0 <= 0.10
        assert f1 == pytest.approx(closed_form_hz(0), rel=5e-3)

    def test_mesh_convergence(self):
        def low(n):
            m = asm.assemble_beam(n, asm.STEEL, asm.TEST_BEAM)
            return solve_modes(m).frequencies[2:7]
        a, b = low(40), low(80)
        assert np.all(np.abs(b / a - 1) < 5e-3)

    def test_clamped_ends_removed(self, clamped_beam):
        n = 61
        assert clamped_beam.n_dof == 2 * n - 4
        assert (0, asm.TRANSVERSE) in clamped_beam.constrained
        assert (60, asm.ROTATION) in clamped_beam.constrained

    def test_point_snapping(self, freefree_beam):
        dof, x = asm.beam_point_dof(freefree_beam, 0.0526)
        assert x == pytest.approx(0.0525, abs=1e-12)
        assert freefree_beam.dof_labels[dof] == (15, asm.TRANSVERSE)

    def test_point_outside_span(self, freefree_beam):
        with pytest.raises(asm.ModelError, match="outside"):
            asm.beam_point_dof(freefree_beam, 0.3)

    def test_clamped_support_not_a_contact_dof(self, clamped_beam):
        with pytest.raises(asm.ModelError):
            asm.beam_point_dof(clamped_beam, 0.0)

    def test_rejects_single_element(self):
        with pytest.raises(asm.ModelError):
            asm.assemble_beam(1, asm.STEEL, asm.TEST_BEAM)

    def test_immutable(self, freefree_beam):
        with pytest.raises(ValueError):
            freefree_beam.mass_matrix[0, 0] = 1.0

    @settings(max_examples=20, deadline=None)
    @given(n=st.integers(2, 30), lumped=st.booleans())
    def test_symmetric_for_any_mesh(self, n, lumped):
        m = asm.assemble_beam(n, asm.STEEL, asm.TEST_BEAM,
                              mass_style="lumped" if lumped else "consistent")
        assert m.check_symmetry() == 0.0
        assert np.all(np.linalg.eigvalsh(m.mass_matrix) > 0)


class TestSphere:
    def test_table_values(self):
        spec = asm.SphereSpec(5.58e-3, 5.55e-3, 1e-8)
        m = asm.assemble_sphere(spec)
        assert m.mass_matrix[0, 0] == 5.58e-3
        assert m.mass_matrix[1, 1] == 0.0
        assert m.boundary_set == (1,)

    def test_spring_law(self):
        c = 2.5e-8
        m = asm.assemble_sphere(asm.SphereSpec(5.58e-3, 5.55e-3, c))
        K = m.stiffness_matrix
        # hold the mass dof, load the contact dof with F
        F = 123.0
        u = F / K[1, 1]
        assert u == pytest.approx(c * F, rel=1e-15)


class TestWaveSizing:
    def test_steel_wavelength(self):
        le, lam = asm.recommend_element_length(asm.STEEL, 35e3)
        assert lam == pytest.approx(0.092, abs=0.0005)
        assert le == pytest.approx(lam / 20, rel=1e-15)

    def test_steel_wave_speed(self):
        assert asm.STEEL.shear_wave_speed == pytest.approx(3218.0, abs=1.0)

    def test_unit_values(self):
        le, lam = asm.recommend_element_length(asm.MaterialSpec(2.0, 0.0, 1.0), 1.0)
        assert lam == pytest.approx(1.0)
        assert le == pytest.approx(1 / 20)

    def test_rejects_zero_frequency(self):
        with pytest.raises(asm.ModelError):
            asm.recommend_element_length(asm.STEEL, 0.0)


class TestHertzHelpers:
    def test_effective_modulus_steel(self):
        e = asm.effective_modulus(asm.STEEL, asm.STEEL)
        assert e == pytest.approx(210e9 / (2 * (1 - 0.09)), rel=1e-14)

    def test_tangent_compliance_at_1kn(self):
        # value from the linearization formula evaluated by hand:
        # k_H = 4/3 * 1.153846e11 * sqrt(5.55e-3) = 1.14616e10
        k = asm.hertz_stiffness(asm.effective_modulus(asm.STEEL, asm.STEEL), 5.55e-3)
        assert k == pytest.approx(1.14616e10, rel=1e-4)
        c = asm.hertz_compliance(k, 1000.0, kind="tangent")
        assert c == pytest.approx(1.0 / (1.5 * k ** (2 / 3) * 1000.0 ** (1 / 3)), rel=1e-14)
        assert c == pytest.approx(1.311e-8, rel=2e-3)

    def test_secant_is_tangent_times_1p5(self):
        assert asm.hertz_compliance(1e10, 500.0, "secant") == pytest.approx(
            1.5 * asm.hertz_compliance(1e10, 500.0, "tangent"), rel=1e-14)

    def test_rigid_impact_closed_form(self):
        m, R, v = 5.58e-3, 5.55e-3, 1.1
        e = asm.effective_modulus(asm.STEEL, asm.STEEL)
        out = asm.hertz_rigid_impact(m, R, e, v)
        classical = 2.87 * (m ** 2 / (R * e ** 2 * v)) ** 0.2
        assert out["duration"] == pytest.approx(classical, rel=5e-3)
        assert out["duration"] == pytest.approx(37.5e-6, rel=0.01)
        # energy balance at maximum approach
        assert 0.4 * out["k_hertz"] * out["delta_max"] ** 2.5 == pytest.approx(
            0.5 * m * v ** 2, rel=1e-12)
