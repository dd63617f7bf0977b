import warnings

import numpy as np
import pytest

from beamimpact import assembly as asm
from beamimpact import simulation as sim
from beamimpact.scenario import Scenario


class TestSetup:
    def test_boundary_and_counts(self, central_setup):
        rom = central_setup.beam_rom
        assert rom.n_boundary == 1 and rom.n_modes == 12
        assert central_setup.rom_dof_count == 2 + 13
        assert central_setup.impact_x == pytest.approx(0.105)

    def test_nominal_area(self, central):
        s = central.replace(rom={"nominal_area_nodes": 2})
        setup = sim.build_setup(s)
        assert setup.beam_rom.n_boundary == 5

    def test_compliance_rules(self, central, central_setup):
        k = central_setup.k_hertz
        tangent = sim.build_setup(central.replace(sphere={"compliance_rule": "hertz_tangent"}))
        assert tangent.compliance == pytest.approx(central_setup.compliance / 1.5, rel=1e-12)
        fixed = sim.build_setup(central.replace(
            sphere={"compliance_rule": "fixed", "compliance_m_per_n": 3e-8}))
        assert fixed.compliance == 3e-8
        dur = sim.build_setup(central.replace(sphere={"compliance_rule": "hertz_duration"}))
        e = asm.effective_modulus(asm.STEEL, asm.STEEL)
        ref = asm.hertz_rigid_impact(5.58e-3, 5.55e-3, e, 1.1)["duration"]
        assert np.pi * np.sqrt(5.58e-3 * dur.compliance) == pytest.approx(ref, rel=1e-12)
        assert k == pytest.approx(asm.hertz_stiffness(e, 5.55e-3))


class TestSimulate:
    def test_initial_conditions(self, central_run):
        assert central_run.v_sph[0] == pytest.approx(-1.1, rel=1e-15)
        assert central_run.f_c[0] == 0.0
        assert not central_run.beam_eta[0].any() and not central_run.beam_eta_dot[0].any()

    def test_rebound(self, central_run):
        assert central_run.v_sph[-1] > 0

    def test_contact_duration_band(self, central_run, central_oracle):
        d = central_run.contact_duration
        assert 30e-6 <= d <= 50e-6
        assert abs(d / central_oracle.contact_duration - 1) <= 0.10

    def test_eccentric_rebound_slower(self, eccentric_run):
        v_end = eccentric_run.v_sph[eccentric_run.index(eccentric_run.contact_window[1])]
        assert 0 < v_end < 0.769

    def test_eccentric_oracle_agreement(self, eccentric_run, eccentric_oracle):
        assert abs(eccentric_run.contact_duration / eccentric_oracle.contact_duration - 1) <= 0.10

    def test_deterministic(self, central, central_run):
        again = sim.simulate(central)
        for name in ("f_c", "v_sph", "probe_velocity", "beam_eta", "lam"):
            assert np.array_equal(getattr(again, name), getattr(central_run, name))

    def test_probe_velocity_matches_modes_after_contact(self, central_run):
        i = central_run.index(central_run.contact_window[1]) + 5
        shapes = central_run.meta["probe_shapes"]
        np.testing.assert_allclose(central_run.probe_velocity[i],
                                   shapes @ central_run.beam_eta_dot[i], rtol=1e-9,
                                   atol=1e-12)

    def test_unstable_time_step(self, central):
        s = central.replace(integration={"dt_s": 1e-5, "t_end_s": 1e-4})
        from beamimpact.contact import InstabilityError
        with pytest.raises(InstabilityError):
            sim.simulate(s)


class TestOracle:
    def test_rigid_oracle_closed_form(self, central, central_setup):
        tr = sim.hertz_oracle(central, central_setup, rigid_target=True)
        e = asm.effective_modulus(asm.STEEL, asm.STEEL)
        ref = asm.hertz_rigid_impact(5.58e-3, 5.55e-3, e, 1.1)["duration"]
        assert abs(tr.contact_duration / ref - 1) <= 0.01

    def test_oracle_energy(self, central_oracle):
        e = central_oracle.energy
        assert np.abs(e / e[0] - 1).max() < 1e-7


@pytest.fixture(scope="module")
def small():
    s = Scenario().replace(beam={"n_elem": 20}, integration={"t_end_s": 1e-4})
    setup = sim.build_setup(s)
    return s, setup, sim.simulate(s, setup), sim.full_order_reference(s, setup)


class TestFullOrder:
    def test_duration_agreement(self, small):
        _, _, rom, ref = small
        assert abs(rom.contact_duration / ref.contact_duration - 1) <= 0.05

    def test_energy_conserved(self, small):
        e = small[3].energy
        assert np.abs(e / e[0] - 1).max() < 1e-4

    def test_dof_count(self, small):
        assert small[3].meta["dof_count"] == 42 + 2

    def test_stable_step(self, small):
        _, setup, _, ref = small
        assert ref.meta["dt"] == pytest.approx(sim.full_order_time_step(setup))
