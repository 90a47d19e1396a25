# Test finite element assembly
import numpy as np
import pytest

from pydiapir import fem, material
from pydiapir import mesh as meshlib
from pydiapir.exceptions import ValidationError
from pydiapir.mesh import BoundaryTag


def _assemble(state, **kwargs):
    args = dict(dt=state.dt, workers=1)
    args.update(kwargs)
    return fem.assemble(state.mesh, state.states, state.params_by_region, state.gravity, state.traction, **args)


def _load_scale(state):
    return np.linalg.norm(fem.body_force_load(state.mesh, state.states.rho, state.gravity))


def test_dof_elimination(equilibrium_state):
    mesh = equilibrium_state.mesh
    system = _assemble(equilibrium_state)
    sides = meshlib.constrained_nodes(mesh, BoundaryTag.SIDE_ROLLER)
    bottom = meshlib.constrained_nodes(mesh, BoundaryTag.BOTTOM_ROLLER)
    assert system.size == 2 * mesh.n_nodes - len(sides) - len(bottom)
    assert system.matrix.shape == (system.size, system.size)
    assert np.all(system.dof_map[sides, 0] == -1)
    assert np.all(system.dof_map[bottom, 1] == -1)


def test_already_constrained(equilibrium_state):
    system = _assemble(equilibrium_state)
    with pytest.raises(ValidationError):
        fem.apply_roller_constraints(system, equilibrium_state.mesh)


def test_expand_restrict(equilibrium_state, rng):
    system = _assemble(equilibrium_state)
    full = rng.standard_normal((equilibrium_state.mesh.n_nodes, 2))
    u = system.expand(system.restrict(full))
    free = system.dof_map >= 0
    np.testing.assert_array_equal(u[free], full[free])
    assert np.all(u[~free] == 0)


def test_equilibrium_load_vanishes(equilibrium_state):
    system = _assemble(equilibrium_state)
    assert np.linalg.norm(system.rhs) <= 1e-6 * _load_scale(equilibrium_state)


def test_rigid_translation_has_no_stiffness(perturbed_state):
    system = _assemble(perturbed_state, constrain=False)
    t = np.tile([3.0, -2.0], perturbed_state.mesh.n_nodes)
    scale = float(abs(system.matrix).sum(axis=1).max()) * np.abs(t).max()
    assert np.abs(system.matrix @ t).max() <= 1e-10 * scale


def test_viscous_part_scales_with_inverse_dt(perturbed_state):
    grads, area = meshlib.shape_gradients(perturbed_state.mesh)
    m = perturbed_state.element_params
    k = {dt: fem.element_stiffness(grads, area, perturbed_state.states, m, dt) for dt in (0.05, 0.1, 0.2)}
    np.testing.assert_allclose(k[0.05] - k[0.1], 2.0 * (k[0.1] - k[0.2]), rtol=1e-6,
                               atol=1e-9 * np.abs(k[0.1]).max())
    salt = perturbed_state.mesh.region == 0
    assert np.abs(k[0.05] - k[0.1])[salt].max() > 0
    np.testing.assert_allclose((k[0.05] - k[0.1])[~salt], 0.0, atol=1e-9 * np.abs(k[0.1]).max())


def test_element_stiffness_rejects_dt(equilibrium_state):
    grads, area = meshlib.shape_gradients(equilibrium_state.mesh)
    with pytest.raises(ValidationError):
        fem.element_stiffness(grads, area, equilibrium_state.states, equilibrium_state.element_params, 0.0)


def test_body_force_total(equilibrium_state):
    mesh, st = equilibrium_state.mesh, equilibrium_state.states
    load = fem.body_force_load(mesh, st.rho, equilibrium_state.gravity)
    _, area = meshlib.shape_gradients(mesh)
    assert load[1::2].sum() == pytest.approx(-9.81 * np.sum(st.rho * area))
    assert load[0::2].sum() == pytest.approx(0.0, abs=1e-6)


def test_traction_total(equilibrium_state):
    mesh = equilibrium_state.mesh
    q = 1.0e4
    constant = fem.traction_load(mesh, np.array([0.0, -q]))
    assert constant[1::2].sum() == pytest.approx(-q * mesh.geometry.length)
    np.testing.assert_allclose(fem.traction_load(mesh, lambda x: np.array([0.0, -q])), constant)
    assert not np.any(fem.traction_load(mesh, None))
    assert not np.any(fem.traction_load(mesh, np.zeros(2)))


def test_linear_traction_is_integrated_exactly(equilibrium_state):
    mesh = equilibrium_state.mesh
    L = mesh.geometry.length
    load = fem.traction_load(mesh, lambda x: np.array([x[0] / L, 0.0]))
    assert load[0::2].sum() == pytest.approx(L / 2.0)


def test_threaded_assembly_matches(perturbed_state, monkeypatch):
    monkeypatch.setattr(fem, "PARALLEL_MIN_ELEMENTS", 1)
    serial = _assemble(perturbed_state, workers=1)
    threaded = _assemble(perturbed_state, workers=3)
    np.testing.assert_allclose(threaded.matrix.toarray(), serial.matrix.toarray(), rtol=1e-13, atol=0)
    np.testing.assert_allclose(threaded.rhs, serial.rhs, rtol=1e-13, atol=1e-12 * np.abs(serial.rhs).max())


def test_element_matrices_shapes(equilibrium_state):
    grads, area = meshlib.shape_gradients(equilibrium_state.mesh)
    local = fem.element_matrices(grads, area, equilibrium_state.states, equilibrium_state.element_params,
                                 equilibrium_state.gravity, 0.1)
    E = equilibrium_state.mesh.n_elements
    assert local.k_local.shape == (E, 6, 6)
    assert local.f_local.shape == (E, 6)
    assert isinstance(equilibrium_state.states, material.PointState)
