# pyDiapir Module - Successive Linear Approximation Driver
# -*- coding: utf-8 -*-
"""
 Time stepping of the two-layer body by successive linear approximation:
 each step solves the linearized boundary value problem about the present
 configuration for the displacement increment u, moves the nodes and
 advances every element's state with H = grad u.

 Functions
    lithostatic_pressure(y, params_by_region, geometry, g)  # Overburden weight at height y (Pa)
    initialize(scenario)                                    # Equilibrium state at t0
    apply_perturbation(state, spec)                         # cos^2 bump on the interface
    gravity_ramp(n, ramp_steps, angle_deg, g0)              # Tilted gravity at step n
    incremental_decomposition(state, next_g, next_f)        # (I1, I2, I3) over free dofs
    equilibrium_residual(state)                             # Out-of-balance load at t_n
    step(state, dt, substeps=1)                             # One SLA step -> (state, Diagnostics)
    run(scenario, n_steps, out_dir)                         # Full scenario -> Diagnostics series
    region_mass(state)                                      # {Region: sum rho*area}
    interface_maxima(mesh, threshold)                       # Salt structures on the interface
    apex_deviation(state)                                   # Apex height - initial salt height
"""
import dataclasses
import logging
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from pydiapir import fem, material, mesh as meshlib
from pydiapir import tensor_core as tc
from pydiapir.aux import EQUILIBRIUM_RTOL, LOW_QUALITY_RATIO, env_workers
from pydiapir.exceptions import ElementInverted, PyDiapirException, ValidationError
from pydiapir.mesh import Region
from pydiapir.solver import NoConvergence, SolverBreakdown, make_solver

log = logging.getLogger(__name__)

# amplitude bound relative to the salt layer thickness
MAX_PERTURBATION_RATIO = 0.05
# fine grid for the volume balance of the perturbation
PROFILE_SAMPLES = 4097

SNAPSHOT_NAME = "snapshot_%05d.vtk"
DIAGNOSTICS_NAME = "diagnostics.csv"


@dataclass(frozen=True)
class PerturbationSpec:
    center_x: float    # m
    half_width: float  # m
    amplitude: float   # m, vertical

    def validate(self, geometry):
        if not np.isfinite(self.center_x) or not 0.0 <= self.center_x <= geometry.length:
            raise ValidationError(f"perturbation center_x {self.center_x} lies outside [0, {geometry.length}]")
        if not self.half_width > 0:
            raise ValidationError("perturbation half_width must be positive")
        if abs(self.amplitude) > MAX_PERTURBATION_RATIO * geometry.salt_height:
            raise ValidationError(f"perturbation amplitude {self.amplitude} exceeds "
                                  f"{MAX_PERTURBATION_RATIO} x salt height")
        return self


@dataclass(frozen=True)
class SimState:
    """
    Body at time t_n; u = 0 at the start of every step

    Args:
        mesh             = Mesh in the current configuration
        reference        = Mesh at t0 (same connectivity)
        states           = PointState batch, one per element
        step             = n
        time             = n * dt (Ma)
        dt               = increment of the step that produced this state (Ma)
        gravity          = g at t_n (m/s^2)
        g0               = untilted gravity
        ramp_angle_deg   = final tilt of the gravity vector
        ramp_steps       = steps over which the tilt is reached
        traction         = surface load on the top boundary (Pa), None if traction free
        params_by_region = {Region: MaterialParams}
        te_mode          = "increment" or "recompute"
    """
    mesh: meshlib.Mesh
    reference: meshlib.Mesh
    states: material.PointState
    step: int
    time: float
    dt: float
    gravity: np.ndarray
    g0: np.ndarray
    ramp_angle_deg: float
    ramp_steps: int
    traction: Optional[np.ndarray]
    params_by_region: dict
    te_mode: str = material.TE_INCREMENT

    @property
    def element_params(self):
        return material.stack_params(self.params_by_region, self.mesh.region)

    @property
    def displacement(self):
        """Cumulative nodal displacement since t0"""
        return self.mesh.nodes - self.reference.nodes


@dataclass(frozen=True)
class Diagnostics:
    step: int
    time: float
    apex_height: float
    min_area_ratio: float
    max_u: float
    residual: float
    i1: Optional[float] = None
    i2: Optional[float] = None
    i3: Optional[float] = None


def lithostatic_pressure(y, params_by_region, geometry, g):
    """
    Weight of the overburden above height y; 0 on the top surface and
    continuous across the interface

    Args:
        y                = height(s) in m
        params_by_region = {Region: MaterialParams}
        geometry         = Geometry
        g                = gravity magnitude (m/s^2)
    """
    y = np.asarray(y, dtype=np.float64)
    rho_salt = params_by_region[Region.SALT].rho0
    rho_sed = params_by_region[Region.SEDIMENT].rho0
    top, interface = geometry.height, geometry.salt_height
    in_sediment = rho_sed * g * (top - y)
    in_salt = rho_sed * g * geometry.sediment_height + rho_salt * g * (interface - y)
    return np.where(y >= interface, in_sediment, in_salt)


def _traction_vector(traction):
    if traction is None:
        return None
    value = np.asarray(traction, dtype=np.float64)
    return value if np.any(value) else None


def initialize(scenario):
    """
    Static equilibrium at t0: F = I, H_prev = 0, rho = rho0,
    Te = -p_lith(y_centroid) I and p = p_lith + s1 + s2 so that the
    elastic stress reproduces Te

    Args:
        scenario = ScenarioConfig
    """
    mesh = meshlib.build_two_layer_mesh(scenario.geometry)
    params = scenario.params_by_region
    m = material.stack_params(params, mesh.region)
    g0 = np.array([0.0, -scenario.gravity.magnitude])

    E = mesh.n_elements
    centroid_y = meshlib.element_coords(mesh)[..., 1].mean(axis=1)
    p_lith = lithostatic_pressure(centroid_y, params, scenario.geometry, scenario.gravity.magnitude)
    states = material.PointState(
        F=np.broadcast_to(tc.IDENTITY, (E, 2, 2)).copy(),
        Te=-p_lith[:, None, None] * tc.IDENTITY,
        p=p_lith + m.s1 + m.s2,
        rho=m.rho0.copy(),
        H_prev=np.zeros((E, 2, 2)),
    )
    state = SimState(mesh=mesh, reference=mesh, states=states, step=0, time=0.0, dt=scenario.dt,
                     gravity=g0.copy(), g0=g0, ramp_angle_deg=scenario.gravity.ramp_angle_deg,
                     ramp_steps=scenario.gravity.ramp_steps,
                     traction=_traction_vector(scenario.gravity.traction), params_by_region=params,
                     te_mode=scenario.solver.te_update)
    log.debug(f"initialized {mesh.n_elements} elements, bottom pressure "
              f"{float(lithostatic_pressure(0.0, params, scenario.geometry, scenario.gravity.magnitude)):.6g} Pa")
    return state


def _bump(x, spec):
    offset = x - spec.center_x
    inside = np.abs(offset) <= spec.half_width
    return np.where(inside, spec.amplitude * np.cos(np.pi * offset / (2.0 * spec.half_width)) ** 2, 0.0)


def _outside_weight(x, spec):
    # 0 under the bump, sin^2 ramp over one half width, 1 beyond
    d = np.abs(x - spec.center_x) - spec.half_width
    ramp = np.sin(np.pi * np.clip(d, 0.0, spec.half_width) / (2.0 * spec.half_width)) ** 2
    return np.where(d <= 0.0, 0.0, ramp)


def _column_profile(y, geometry):
    """phi(y) and phi'(y): 0 at the base and the top, 1 with zero slope at the interface"""
    hs, hd = geometry.salt_height, geometry.sediment_height
    y = np.clip(y, 0.0, geometry.height)
    salt = y <= hs
    phi = np.where(salt, np.sin(np.pi * y / (2.0 * hs)) ** 2, np.cos(np.pi * (y - hs) / (2.0 * hd)) ** 2)
    dphi = np.where(salt, np.pi / (2.0 * hs) * np.sin(np.pi * y / hs),
                    -np.pi / (2.0 * hd) * np.sin(np.pi * (y - hs) / hd))
    return phi, dphi


def perturbation_field(mesh, spec):
    """
    Nodal displacement of the cos^2 interface bump, spread over the column

    The interface profile is b(x) = bump(x) - c w(x), where w(x) vanishes under
    the bump and c balances the salt volume. With stream function
    psi = -Phi(x) phi(y), Phi' = b, the field

        u_x = -Phi(x) phi'(y),  u_y = b(x) phi(y)

    is divergence free, zero on the base and the side walls, and moves
    interface nodes vertically by exactly b(x).
    """
    geometry = mesh.geometry
    L = geometry.length
    samples = max(PROFILE_SAMPLES, int(16.0 * L / spec.half_width) + 1)
    xs = np.linspace(0.0, L, samples)
    room = trapezoid(_outside_weight(xs, spec), xs)
    if not room > 0:
        raise ValidationError("perturbation covers the whole interface; no room for the return flow")
    c = trapezoid(_bump(xs, spec), xs) / room
    flux = cumulative_trapezoid(_bump(xs, spec) - c * _outside_weight(xs, spec), xs, initial=0.0)

    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    phi, dphi = _column_profile(y, geometry)
    profile = _bump(x, spec) - c * _outside_weight(x, spec)
    u = np.stack([-np.interp(x, xs, flux) * dphi, profile * phi], axis=-1)
    u[mesh.interface_nodes, 0] = 0.0
    u[mesh.interface_nodes, 1] = profile[mesh.interface_nodes]
    u[fem.free_dof_map(mesh) < 0] = 0.0
    return u


def _advance(state, u, dt):
    # H in the configuration the displacement was computed on, then move the nodes
    H = meshlib.element_gradient(state.mesh, u)
    try:
        states = material.update_point_state(state.states, H, dt, state.element_params, state.te_mode)
        mesh = meshlib.displace_nodes(state.mesh, u)
        meshlib.shape_gradients(mesh)
    except ElementInverted as exc:
        raise ElementInverted(f"step {state.step + 1}: {exc}", element=exc.element, step=state.step + 1) from exc
    if not tc.is_finite(states.Te):
        raise SolverBreakdown(f"step {state.step + 1}: increment produced non-finite stress")
    return mesh, states


def apply_perturbation(state, spec):
    """
    Displace interface nodes by amplitude cos^2(pi (x - center_x) / (2 half_width))
    within half_width of center_x, updating the element states with the induced H.
    The rest of the column follows the divergence-free field of perturbation_field,
    and the interface away from the bump sinks slightly to keep the salt volume.
    """
    spec.validate(state.mesh.geometry)
    if spec.amplitude == 0:
        return state
    u = perturbation_field(state.mesh, spec)
    mesh, states = _advance(state, u, state.dt)
    log.debug(f"perturbation applied: amplitude {spec.amplitude} m at x = {spec.center_x} m, "
              f"max column displacement {float(np.abs(u).max()):.3g} m")
    return dataclasses.replace(state, mesh=mesh, states=states)


def gravity_ramp(n, ramp_steps, angle_deg, g0):
    """
    g0 rotated counter-clockwise by angle_deg * min(n / ramp_steps, 1);
    a positive angle tilts gravity towards +x
    """
    if ramp_steps < 1:
        raise ValidationError("ramp_steps must be at least 1")
    theta = math.radians(angle_deg * min(n / ramp_steps, 1.0))
    c, s = math.cos(theta), math.sin(theta)
    g0 = np.asarray(g0, dtype=np.float64)
    return np.array([c * g0[0] - s * g0[1], s * g0[0] + c * g0[1]])


def _free(state, vector):
    return np.asarray(vector).ravel()[fem.free_dof_map(state.mesh).ravel() >= 0]


def _viscous_memory(state):
    # M(F)[H_prev / dt]: the viscous stress carried over from the last step
    return material.viscosity_apply(state.states.F, state.states.H_prev / state.dt, state.element_params)


def incremental_decomposition(state, next_g, next_f):
    """
    Split of the step load into its three sources, over free dofs

    Returns (I1, I2, I3):
        I1 = int rho (g_{n+1} - g_n) . w
        I2 = int_Gamma1 (f_{n+1} - f_n) . w
        I3 = int M(F)[H_prev / dt] . grad w
    """
    mesh = state.mesh
    i1 = fem.body_force_load(mesh, state.states.rho, np.asarray(next_g) - state.gravity)
    i2 = fem.traction_load(mesh, _traction_vector(next_f)) - fem.traction_load(mesh, state.traction)
    i3 = -fem.stress_load(mesh, _viscous_memory(state))
    return _free(state, i1), _free(state, i2), _free(state, i3)


def equilibrium_residual(state):
    """
    R = int rho g_n . w + int f_n . w - int (Te + M[H_prev / dt]) . grad w
    over free dofs; the step load equals I1 + I2 + I3 + R
    """
    mesh = state.mesh
    load = (fem.body_force_load(mesh, state.states.rho, state.gravity)
            + fem.traction_load(mesh, state.traction)
            + fem.stress_load(mesh, state.states.Te + _viscous_memory(state)))
    return _free(state, load)


def apex_height(mesh):
    return float(mesh.nodes[mesh.interface_nodes, 1].max())


def apex_deviation(state):
    return apex_height(state.mesh) - state.mesh.geometry.salt_height


def region_mass(state):
    _, area = meshlib.shape_gradients(state.mesh)
    mass = state.states.rho * area
    return {Region(int(tag)): float(mass[state.mesh.region == tag].sum()) for tag in np.unique(state.mesh.region)}


def interface_maxima(mesh, threshold):
    """
    Local maxima of the interface above threshold, ordered by x

    Returns list of (x, height)
    """
    points = meshlib.extract_interface(mesh)
    points = points[np.argsort(points[:, 0], kind="stable")]
    y = points[:, 1]
    found = []
    for k in range(len(y)):
        left = y[k - 1] if k > 0 else -np.inf
        right = y[k + 1] if k + 1 < len(y) else -np.inf
        if y[k] > threshold and y[k] >= left and y[k] > right:
            found.append((float(points[k, 0]), float(y[k])))
    return found


def _increment(state, dt, next_g, next_f, solver, workers, tol, max_iter):
    # one linearized solve about state.mesh; u = 0 when the load is round-off of the weight
    n = state.step + 1
    try:
        system = fem.assemble(state.mesh, state.states, state.params_by_region, next_g, next_f, dt=dt,
                              workers=workers)
    except ElementInverted as exc:
        raise ElementInverted(f"step {n}: {exc}", element=exc.element, step=n) from exc
    weight = system.restrict(fem.body_force_load(state.mesh, state.states.rho, next_g)
                             + fem.traction_load(state.mesh, next_f))
    if np.linalg.norm(system.rhs) <= EQUILIBRIUM_RTOL * np.linalg.norm(weight):
        u_free, residual = np.zeros(system.size), 0.0
    else:
        try:
            u_free, report = solver.solve(system, tol, max_iter)
        except (SolverBreakdown, NoConvergence) as exc:
            raise type(exc)(f"step {n}: {exc}") from exc
        residual = report.residual_norm
    u = system.expand(u_free)
    mesh, states = _advance(state, u, dt)
    return dataclasses.replace(state, mesh=mesh, states=states, dt=dt), u, residual


def step(state, dt, solver=None, decomposition=False, workers=None, tol=None, max_iter=None, substeps=1):
    """
    One SLA step from t_n to t_{n+1}

    Args:
        state         = SimState at t_n
        dt            = time increment (Ma)
        solver        = PyDiapirSolverBase (default: direct)
        decomposition = also report |I1|, |I2|, |I3|
        workers       = element batches assembled concurrently (default: SLA_THREADS)
        substeps      = linearized increments of dt / substeps taken within the step

    Returns (SimState at t_{n+1}, Diagnostics); max_u is the displacement over the whole step
    """
    if not dt > 0:
        raise ValidationError("dt must be positive")
    if substeps < 1:
        raise ValidationError("substeps must be at least 1")
    solver = solver or make_solver()
    workers = env_workers() if workers is None else workers
    n = state.step + 1
    next_g = gravity_ramp(n, state.ramp_steps, state.ramp_angle_deg, state.g0)
    next_f = state.traction

    norms = (None, None, None)
    if decomposition:
        norms = tuple(float(np.linalg.norm(v)) for v in incremental_decomposition(state, next_g, next_f))

    current = state
    moved = np.zeros_like(state.mesh.nodes)
    residual = 0.0
    for _ in range(substeps):
        current, u, res = _increment(current, dt / substeps, next_g, next_f, solver, workers, tol, max_iter)
        moved += u
        residual = max(residual, res)

    mesh = current.mesh
    new_state = dataclasses.replace(current, step=n, time=state.time + dt, gravity=next_g)
    ratio = meshlib.min_area_ratio(mesh, state.reference)
    record = Diagnostics(step=n, time=new_state.time, apex_height=apex_height(mesh), min_area_ratio=ratio,
                         max_u=float(np.max(np.hypot(moved[:, 0], moved[:, 1]))), residual=residual,
                         i1=norms[0], i2=norms[1], i3=norms[2])
    if ratio < LOW_QUALITY_RATIO:
        log.warning(f"step {n}: min_area_ratio {ratio:.3g} below {LOW_QUALITY_RATIO}")
    log.debug(f"step {n}: t = {new_state.time:.4g} Ma, max|u| = {record.max_u:.3e} m, "
              f"residual = {residual:.2e}, apex = {record.apex_height:.4f} m")
    return new_state, record


def run(scenario, n_steps=None, out_dir=None, workers=None, callback=None, state=None, solver=None, series=None):
    """
    Execute a scenario: initialize, optional perturbation, n_steps steps

    Args:
        scenario = ScenarioConfig
        n_steps  = steps to take (default: scenario.n_steps)
        out_dir  = directory for snapshots and diagnostics.csv (default: none written)
        workers  = assembly worker cap (default: SLA_THREADS)
        callback = called as callback(state, record) after every step
        state    = SimState to continue from (default: initialize and perturb)
        solver   = PyDiapirSolverBase (default: from scenario.solver)
        series   = list the Diagnostics records are appended to

    The starting state is written as a snapshot, then every cadence step and the
    last one. Returns the Diagnostics series. On a step failure the exception is
    re-raised with the series so far attached as its diagnostics attribute.
    """
    from pydiapir.scenario_io import write_diagnostics, write_snapshot

    n_steps = scenario.n_steps if n_steps is None else n_steps
    if n_steps < 0:
        raise ValidationError("n_steps must be non-negative")
    solver = solver or make_solver(scenario.solver.method, scenario.solver.tol, scenario.solver.max_iter)
    cadence = scenario.output.cadence
    series = [] if series is None else series

    def snapshot(current):
        if out_dir is not None:
            write_snapshot(current, os.path.join(out_dir, SNAPSHOT_NAME % current.step))

    log.info(f"run: {n_steps} steps of {scenario.dt} Ma on {scenario.geometry.nx} x "
             f"{scenario.geometry.ny} cells")
    if state is None:
        state = initialize(scenario)
        if scenario.perturbation is not None:
            state = apply_perturbation(state, scenario.perturbation)
    snapshot(state)
    try:
        for k in range(n_steps):
            state, record = step(state, scenario.dt, solver=solver, decomposition=scenario.output.decomposition,
                                 workers=workers, substeps=scenario.substeps)
            series.append(record)
            if callback is not None:
                callback(state, record)
            if state.step % cadence == 0 or k == n_steps - 1:
                snapshot(state)
    except PyDiapirException as exc:
        log.error(f"run aborted after {len(series)} steps: {exc}")
        exc.diagnostics = list(series)
        if out_dir is not None:
            write_diagnostics(series, os.path.join(out_dir, DIAGNOSTICS_NAME))
        raise
    if out_dir is not None:
        write_diagnostics(series, os.path.join(out_dir, DIAGNOSTICS_NAME))
    log.info(f"run finished: {len(series)} steps, apex {apex_height(state.mesh):.4f} m")
    return series
