# Test the successive linear approximation driver
import dataclasses
import math
import os

import numpy as np
import pytest

from pydiapir import Simulation, fem, material, scenario_io, sla
from pydiapir import mesh as meshlib
from pydiapir.exceptions import ElementInverted, ValidationError
from pydiapir.mesh import Geometry, Region
from pydiapir.solver import SolverBreakdown

PRESET_GEOMETRY = Geometry(length=1200.0, salt_height=100.0, sediment_height=200.0, nx=120, ny_salt=10,
                           ny_sediment=20)


def _params(config):
    return config.params_by_region


def test_lithostatic_pressure(small_config):
    params = _params(small_config)
    bottom = sla.lithostatic_pressure(0.0, params, PRESET_GEOMETRY, 9.81)
    assert float(bottom) == pytest.approx((3000.0 * 200.0 + 2200.0 * 100.0) * 9.81)
    assert float(bottom) == pytest.approx(8.0442e6)
    assert float(sla.lithostatic_pressure(300.0, params, PRESET_GEOMETRY, 9.81)) == 0.0
    below, above = sla.lithostatic_pressure([100.0 - 1e-9, 100.0], params, PRESET_GEOMETRY, 9.81)
    assert below == pytest.approx(above, rel=1e-9)


def test_initial_state(equilibrium_state):
    st = equilibrium_state.states
    E = equilibrium_state.mesh.n_elements
    np.testing.assert_array_equal(st.F, np.broadcast_to(np.eye(2), (E, 2, 2)))
    assert not np.any(st.H_prev)
    m = equilibrium_state.element_params
    np.testing.assert_array_equal(st.rho, m.rho0)
    Te = material.elastic_stress(st.p, material.left_cauchy_green(st.F), m)
    np.testing.assert_allclose(Te, st.Te, rtol=0, atol=1e-6)
    assert np.all(st.Te[:, 0, 1] == 0)
    assert equilibrium_state.step == 0 and equilibrium_state.time == 0.0


def test_equilibrium_persists(equilibrium_state):
    dt = equilibrium_state.dt
    state = equilibrium_state
    for n in range(10):
        state, record = sla.step(state, dt, substeps=1 + n % 3)
        assert record.max_u == 0.0
        assert record.residual == 0.0
        assert record.step == n + 1
    np.testing.assert_array_equal(state.mesh.nodes, equilibrium_state.mesh.nodes)
    np.testing.assert_array_equal(state.states.Te, equilibrium_state.states.Te)
    np.testing.assert_array_equal(state.states.rho, equilibrium_state.states.rho)
    assert state.time == pytest.approx(10 * dt)


def test_equilibrium_skips_the_solver(equilibrium_state):
    class Untouchable(object):
        def solve(self, system, tol=None, max_iter=None):
            raise AssertionError("solver called at equilibrium")

    state, record = sla.step(equilibrium_state, equilibrium_state.dt, solver=Untouchable(), substeps=2)
    assert record.max_u == 0.0 and state.step == 1


def test_decomposition_at_equilibrium(equilibrium_state):
    i1, i2, i3 = sla.incremental_decomposition(equilibrium_state, equilibrium_state.gravity, None)
    assert not np.any(i1)
    assert not np.any(i2)
    assert not np.any(i3)


def test_decomposition_identity(perturbed_state):
    state, _ = sla.step(perturbed_state, perturbed_state.dt)
    next_g = sla.gravity_ramp(state.step + 1, state.ramp_steps, state.ramp_angle_deg, state.g0)
    system = fem.assemble(state.mesh, state.states, state.params_by_region, next_g, state.traction, dt=state.dt)
    i1, i2, i3 = sla.incremental_decomposition(state, next_g, state.traction)
    residual = sla.equilibrium_residual(state)
    scale = np.linalg.norm(fem.body_force_load(state.mesh, state.states.rho, state.gravity))
    assert np.linalg.norm(system.rhs - (i1 + i2 + i3 + residual)) <= 1e-6 * scale
    assert np.linalg.norm(i3) > 0


def test_decomposition_with_tilt_and_traction(perturbed_state):
    state = dataclasses.replace(perturbed_state, ramp_angle_deg=1.0, ramp_steps=10,
                                traction=np.array([0.0, -1.0e3]))
    next_g = sla.gravity_ramp(1, 10, 1.0, state.g0)
    next_f = np.array([0.0, -2.0e3])
    system = fem.assemble(state.mesh, state.states, state.params_by_region, next_g, next_f, dt=state.dt)
    i1, i2, i3 = sla.incremental_decomposition(state, next_g, next_f)
    residual = sla.equilibrium_residual(state)
    scale = np.linalg.norm(fem.body_force_load(state.mesh, state.states.rho, state.gravity))
    assert np.linalg.norm(i1) > 0 and np.linalg.norm(i2) > 0
    assert np.linalg.norm(system.rhs - (i1 + i2 + i3 + residual)) <= 1e-6 * scale


def test_gravity_ramp():
    g0 = np.array([0.0, -9.81])
    np.testing.assert_array_equal(sla.gravity_ramp(0, 10, 1.0, g0), g0)
    theta = math.radians(1.0)
    for n in (10, 11, 500):
        np.testing.assert_allclose(sla.gravity_ramp(n, 10, 1.0, g0),
                                   [9.81 * math.sin(theta), -9.81 * math.cos(theta)], rtol=1e-14)
    for n in range(12):
        assert np.linalg.norm(sla.gravity_ramp(n, 10, 1.0, g0)) == pytest.approx(9.81, rel=1e-14)
    half = sla.gravity_ramp(5, 10, 1.0, g0)
    assert math.degrees(math.atan2(half[0], -half[1])) == pytest.approx(0.5)
    with pytest.raises(ValidationError):
        sla.gravity_ramp(1, 0, 1.0, g0)


def test_perturbation_shape(small_config):
    state = sla.initialize(small_config)
    mesh, spec = state.mesh, small_config.perturbation
    assert spec.center_x == 600.0 and spec.half_width == 200.0 and spec.amplitude == 1.0
    u = sla.perturbation_field(mesh, spec)
    interface = mesh.interface_nodes
    x = mesh.nodes[interface, 0]
    assert not np.any(u[interface, 0])
    assert u[interface[x == 600.0], 1] == pytest.approx([1.0])
    np.testing.assert_allclose(u[interface[np.abs(x - 600.0) == 200.0], 1], 0.0, atol=1e-12)
    # the interface beyond the ramp sinks by amplitude * half_width / (outside length - half_width)
    np.testing.assert_allclose(u[interface[x >= 1000.0], 1], -1.0 / 3.0, rtol=1e-6)
    assert not np.any(u[fem.free_dof_map(mesh) < 0])
    assert np.any(u[:, 0])


def test_perturbation_keeps_salt_area(small_config):
    state = sla.initialize(small_config)
    spec = small_config.perturbation
    salt = state.mesh.region == Region.SALT
    before = meshlib.signed_areas(state.mesh)[salt].sum()
    moved = meshlib.displace_nodes(state.mesh, sla.perturbation_field(state.mesh, spec))
    after = meshlib.signed_areas(moved)[salt].sum()
    assert after == pytest.approx(before, abs=1e-6 * spec.amplitude * spec.half_width)


def test_perturbation_is_nearly_isochoric():
    config = scenario_io.load_preset("diapir_6_1")
    mesh = meshlib.build_two_layer_mesh(config.geometry)
    spec = sla.PerturbationSpec(center_x=600.0, half_width=200.0, amplitude=1.0)
    column = sla.perturbation_field(mesh, spec)
    bump_only = np.zeros_like(column)
    bump_only[mesh.interface_nodes, 1] = np.maximum(column[mesh.interface_nodes, 1], 0.0)
    spread = np.abs(np.trace(meshlib.element_gradient(mesh, column), axis1=1, axis2=2)).max()
    local = np.abs(np.trace(meshlib.element_gradient(mesh, bump_only), axis1=1, axis2=2)).max()
    assert spread < 0.25 * local


def test_perturbation_needs_room_for_return_flow(small_config):
    state = sla.initialize(small_config)
    wide = dataclasses.replace(small_config.perturbation, half_width=2000.0)
    with pytest.raises(ValidationError):
        sla.perturbation_field(state.mesh, wide)


def test_apply_perturbation(small_config, perturbed_state):
    assert sla.apex_deviation(perturbed_state) == pytest.approx(1.0)
    assert perturbed_state.step == 0
    assert np.any(perturbed_state.states.H_prev)
    state = sla.initialize(small_config)
    zero = dataclasses.replace(small_config.perturbation, amplitude=0.0)
    assert sla.apply_perturbation(state, zero) is state
    with pytest.raises(ValidationError):
        sla.apply_perturbation(state, dataclasses.replace(small_config.perturbation, amplitude=6.0))


def test_interface_maxima(perturbed_state):
    maxima = sla.interface_maxima(perturbed_state.mesh, 100.5)
    assert maxima == [(600.0, pytest.approx(101.0))]
    assert sla.interface_maxima(perturbed_state.mesh, 102.0) == []


def test_step_records(perturbed_state):
    state, record = sla.step(perturbed_state, perturbed_state.dt, decomposition=True)
    assert state.step == 1 and state.time == pytest.approx(perturbed_state.dt)
    assert record.min_area_ratio > 0
    assert record.residual <= 1e-6
    assert record.i1 == 0.0 and record.i2 == 0.0 and record.i3 > 0.0
    assert record.apex_height == pytest.approx(sla.apex_height(state.mesh))
    np.testing.assert_allclose(state.displacement, state.mesh.nodes - perturbed_state.reference.nodes)
    with pytest.raises(ValidationError):
        sla.step(state, 0.0)


def test_recompute_mode(perturbed_state):
    state = dataclasses.replace(perturbed_state, te_mode=material.TE_RECOMPUTE)
    new, record = sla.step(state, state.dt)
    np.testing.assert_array_equal(new.states.Te, np.swapaxes(new.states.Te, -1, -2))
    assert record.min_area_ratio > 0


def test_mass_conservation(perturbed_state):
    before = sla.region_mass(perturbed_state)
    assert set(before) == {Region.SALT, Region.SEDIMENT}
    state = perturbed_state
    for _ in range(3):
        state, _ = sla.step(state, state.dt)
    after = sla.region_mass(state)
    for region in before:
        assert after[region] == pytest.approx(before[region], rel=1e-9)


def test_symmetric_perturbation_stays_symmetric(perturbed_state):
    state = perturbed_state
    for _ in range(3):
        state, _ = sla.step(state, state.dt)
    interface = meshlib.extract_interface(state.mesh)
    np.testing.assert_allclose(interface[:, 1], interface[::-1, 1], rtol=0, atol=1e-6)
    L = state.mesh.geometry.length
    np.testing.assert_allclose(interface[:, 0], L - interface[::-1, 0], rtol=0, atol=1e-6)


def test_substeps_split_the_increment(perturbed_state):
    dt = perturbed_state.dt
    state, record = sla.step(perturbed_state, dt, substeps=4)
    assert state.step == 1 and state.time == pytest.approx(dt)
    assert state.dt == pytest.approx(dt / 4)
    assert record.max_u > 0 and record.min_area_ratio > 0
    single, _ = sla.step(perturbed_state, dt)
    assert sla.apex_deviation(state) > 1.0 and sla.apex_deviation(single) > 1.0
    with pytest.raises(ValidationError):
        sla.step(perturbed_state, dt, substeps=0)


def test_non_finite_stress_is_a_runtime_error(perturbed_state, monkeypatch):
    original = material.update_point_state

    def poisoned(st, H, dt, m, mode=material.TE_INCREMENT):
        new = original(st, H, dt, m, mode)
        return dataclasses.replace(new, Te=np.full_like(new.Te, np.nan))

    monkeypatch.setattr(material, "update_point_state", poisoned)
    with pytest.raises(SolverBreakdown, match="non-finite stress"):
        sla.step(perturbed_state, perturbed_state.dt)


def test_one_preset_step_stays_small():
    # the default time table on the coarse mesh
    config = scenario_io.load_preset("diapir_6_1", ["geometry.nx=12", "geometry.ny_salt=2",
                                                    "geometry.ny_sediment=4"])
    assert config.dt == 0.1 and config.substeps == 10
    state = sla.apply_perturbation(sla.initialize(config), config.perturbation)
    before = sla.region_mass(state)
    state, record = sla.step(state, config.dt, substeps=config.substeps)
    assert record.max_u < 0.05 * meshlib.element_size(state.mesh)
    assert record.min_area_ratio > 0.5
    for region, mass in sla.region_mass(state).items():
        assert mass == pytest.approx(before[region], rel=1e-9)


def test_simulation_run_matches_driver(small_config, tmp_path):
    sla.run(small_config, out_dir=str(tmp_path / "driver"))
    sim = Simulation(small_config, workers=1)
    sim.initialize()
    sim.perturb()
    series = sim.run(out_dir=str(tmp_path / "facade"))
    assert sim.state.step == small_config.n_steps == len(series)
    assert sorted(os.listdir(tmp_path / "facade")) == sorted(os.listdir(tmp_path / "driver"))
    assert ((tmp_path / "facade" / "diagnostics.csv").read_bytes()
            == (tmp_path / "driver" / "diagnostics.csv").read_bytes())


def test_run_without_steps(small_config, tmp_path):
    series = sla.run(small_config, n_steps=0, out_dir=str(tmp_path))
    assert series == []
    assert sorted(os.listdir(tmp_path)) == ["diagnostics.csv", "snapshot_00000.vtk"]
    with open(tmp_path / "diagnostics.csv") as f:
        assert f.read().splitlines() == [",".join(scenario_io.DIAGNOSTICS_HEADER)]


def test_run_writes_cadence(small_config, tmp_path):
    seen = []
    series = sla.run(small_config, out_dir=str(tmp_path), callback=lambda state, record: seen.append(state.step))
    assert [r.step for r in series] == [1, 2, 3]
    assert seen == [1, 2, 3]
    assert sorted(os.listdir(tmp_path)) == ["diagnostics.csv", "snapshot_00000.vtk", "snapshot_00002.vtk",
                                            "snapshot_00003.vtk"]


def test_run_aborts_with_partial_diagnostics(small_config, tmp_path, monkeypatch):
    original = sla.step
    calls = []

    def failing_step(state, dt, **kwargs):
        calls.append(dt)
        if len(calls) == 2:
            raise ElementInverted("inverted", element=3, step=state.step + 1)
        return original(state, dt, **kwargs)

    monkeypatch.setattr(sla, "step", failing_step)
    with pytest.raises(ElementInverted) as exc:
        sla.run(small_config, out_dir=str(tmp_path))
    assert [r.step for r in exc.value.diagnostics] == [1]
    assert exc.value.step == 2
    with open(tmp_path / "diagnostics.csv") as f:
        assert len(f.read().splitlines()) == 2


def test_simulation_facade(small_config, tmp_path):
    sim = Simulation(small_config, workers=1)
    sim.initialize()
    mass = sim.mass()
    sim.perturb()
    assert sim.apex() == pytest.approx(101.0)
    series = sim.run(2, out_dir=str(tmp_path))
    assert [r.step for r in series] == [1, 2]
    assert sim.state.step == 2
    for region, value in sim.mass().items():
        assert value == pytest.approx(mass[region], rel=1e-9)
    assert (tmp_path / "snapshot_00002.vtk").exists()
    assert len(sim.structures(0.0)) >= 1
    with pytest.raises(ValidationError):
        Simulation({"geometry": {}})


DESK = ["geometry.nx=60", "geometry.ny_salt=5", "geometry.ny_sediment=10"]
# the preset salt grows at roughly 13 per Ma, so the layer overturns within a few Ma
OVERTURNS = pytest.mark.xfail(raises=ElementInverted, strict=False,
                              reason="preset salt overturns before the long run completes")


def _mass_checked_run(config, n_steps=None):
    reference = {}

    def check(state, record):
        if not reference:
            reference.update(sla.region_mass(state))
        for region, mass in sla.region_mass(state).items():
            assert mass == pytest.approx(reference[region], rel=1e-6)

    return sla.run(config, n_steps=n_steps, callback=check)


def _apex_deviations(config, n_steps):
    return [r.apex_height - config.geometry.salt_height for r in _mass_checked_run(config, n_steps)]


@pytest.mark.slow
@OVERTURNS
def test_instability_dichotomy():
    heavy_top = scenario_io.load_preset("diapir_6_1", DESK)
    light_top = scenario_io.load_preset("diapir_6_1", DESK + ["salt.rho0=3000.0", "sediment.rho0=2200.0"])
    for config, grows in ((heavy_top, True), (light_top, False)):
        amplitude = config.perturbation.amplitude
        deviation = _apex_deviations(config, 50)[-1]
        if grows:
            assert deviation >= 5.0 * amplitude
        else:
            assert deviation <= 0.5 * amplitude


@pytest.mark.slow
def test_early_growth():
    config = scenario_io.load_preset("diapir_6_1", DESK)
    deviation = _apex_deviations(config, 2)
    assert config.perturbation.amplitude < deviation[0] < deviation[1]


@pytest.mark.slow
@OVERTURNS
def test_diapir_matures_without_remeshing():
    config = scenario_io.load_preset("diapir_6_1", DESK)
    series = _mass_checked_run(config, 300)
    assert all(r.min_area_ratio > 0 for r in series)
    deviation = [r.apex_height - config.geometry.salt_height for r in series]
    assert (deviation[299] - deviation[249]) / deviation[249] < 0.02
    assert deviation[199] > 0.5 * deviation[299]


@pytest.mark.slow
def test_time_step_consistency():
    config = scenario_io.load_preset("diapir_6_1", DESK)
    coarse = _apex_deviations(config, 1)[-1]
    fine = _apex_deviations(scenario_io.load_preset("diapir_6_1", DESK + [f"time.dt={config.dt / 2}"]), 2)[-1]
    assert abs(coarse - fine) <= 0.1 * max(abs(coarse), abs(fine))


@pytest.mark.slow
@OVERTURNS
def test_inclination_grows_structures_right_to_left():
    config = scenario_io.load_preset("incline_6_2", ["geometry.nx=100"])
    threshold = 1.5 * config.geometry.salt_height
    first_crossing = {}
    masses = []

    def watch(state, record):
        masses.append(sla.region_mass(state))
        for x, _ in sla.interface_maxima(state.mesh, threshold):
            first_crossing.setdefault(round(x / 250.0), (state.step, x))

    series = sla.run(config, callback=watch)
    assert all(r.min_area_ratio > 0 for r in series)
    for region, mass in masses[-1].items():
        assert mass == pytest.approx(masses[0][region], rel=1e-6)
    assert len(first_crossing) >= 2
    ordered = sorted(first_crossing.values(), key=lambda v: v[1])
    assert ordered[-1][0] <= ordered[0][0]
