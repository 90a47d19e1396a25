# pyDiapir Module - Finite Element Assembly
# -*- coding: utf-8 -*-
"""
 Assembly of the linearized variational problem on linear triangles with
 one centroid quadrature point per element.

    K(w, u) = int (K(F, Te)[grad u] + M(F)[grad u] / dt) . grad w
    P(w)    = int rho g . w + int_Gamma1 f . w - int Te . grad w

 Degree of freedom 2*a + i is component i of node a. Roller constraints are
 applied by eliminating the constrained rows and columns.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix

from pydiapir import material
from pydiapir.exceptions import ValidationError
from pydiapir.mesh import BoundaryTag, constrained_nodes, shape_gradients

log = logging.getLogger(__name__)

# below this many elements the thread pool costs more than it saves
PARALLEL_MIN_ELEMENTS = 4096
GAUSS_EDGE = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


@dataclass(frozen=True)
class ElementMatrices:
    k_local: np.ndarray  # (E, 6, 6), Pa m
    f_local: np.ndarray  # (E, 6), Pa m^2


@dataclass(frozen=True)
class SparseSystem:
    matrix: object       # scipy.sparse.csr_matrix over free dofs
    rhs: np.ndarray
    dof_map: np.ndarray  # (N, 2) free index or -1 when constrained

    @property
    def free_dofs(self):
        return np.flatnonzero(self.dof_map.ravel() >= 0)

    @property
    def size(self):
        return len(self.rhs)

    def restrict(self, vector):
        """Full-length dof vector -> free dofs"""
        return np.asarray(vector).ravel()[self.free_dofs]

    def expand(self, u_free):
        """Free-dof solution -> nodal (N, 2) field, zero on constrained dofs"""
        u = np.zeros(self.dof_map.size)
        u[self.free_dofs] = u_free
        return u.reshape(self.dof_map.shape)


def basis_tensors(grads):
    """(E, 3, 2) basis gradients -> (E, 6, 2, 2) grad of each vector basis function"""
    E = grads.shape[0]
    G = np.zeros((E, 6, 2, 2))
    for a in range(3):
        for i in range(2):
            G[:, 2 * a + i, i, :] = grads[:, a, :]
    return G


def element_dofs(triangles):
    return np.stack([2 * triangles, 2 * triangles + 1], axis=-1).reshape(len(triangles), 6)


def element_stiffness(grads, area, states, m, dt):
    """Element matrices of K + M/dt for a batch of elements"""
    if dt <= 0:
        raise ValidationError("dt must be positive")
    G = basis_tensors(grads)
    mp = m.expand(1)
    F = states.F[:, None]
    Te = states.Te[:, None]
    KG = material.piola_elasticity_apply(F, Te, G, mp) + material.viscosity_apply(F, G, mp) / dt
    return area[:, None, None] * np.einsum('ebij,eaij->eab', KG, G)


def element_load(grads, area, states, g):
    body = (states.rho * area / 3.0)[:, None, None] * np.asarray(g, dtype=np.float64)[None, None, :]
    stress = area[:, None, None] * np.einsum('eij,eaj->eai', states.Te, grads)
    return (body - stress).reshape(len(area), 6)


def element_matrices(grads, area, states, m, g, dt):
    """
    Local stiffness and load for a batch of elements

    Args:
        grads  = (E, 3, 2) basis gradients in current coordinates
        area   = (E,) positive areas
        states = PointState batch
        m      = MaterialParams with per-element arrays
        g      = gravity Vec2 (m/s^2)
        dt     = time increment (Ma)
    """
    return ElementMatrices(k_local=element_stiffness(grads, area, states, m, dt),
                           f_local=element_load(grads, area, states, g))


def _take(states, m, sl):
    sub_states = material.PointState(F=states.F[sl], Te=states.Te[sl], p=states.p[sl],
                                     rho=states.rho[sl], H_prev=states.H_prev[sl])
    sub_params = material.MaterialParams(**{k: (v[sl] if isinstance(v, np.ndarray) else v)
                                            for k, v in vars(m).items()})
    return sub_states, sub_params


def _batched_element_matrices(grads, area, states, m, g, dt, workers):
    E = len(area)
    if workers <= 1 or E < PARALLEL_MIN_ELEMENTS:
        return element_matrices(grads, area, states, m, g, dt)
    bounds = np.linspace(0, E, workers + 1).astype(int)
    slices = [slice(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]

    def work(sl):
        sub_states, sub_params = _take(states, m, sl)
        return element_matrices(grads[sl], area[sl], sub_states, sub_params, g, dt)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(work, slices))
    return ElementMatrices(k_local=np.concatenate([p.k_local for p in parts]),
                           f_local=np.concatenate([p.f_local for p in parts]))


def scatter_vector(mesh, f_local):
    dofs = element_dofs(mesh.triangles)
    return np.bincount(dofs.ravel(), weights=f_local.ravel(), minlength=2 * mesh.n_nodes)


def body_force_load(mesh, rho, g):
    _, area = shape_gradients(mesh)
    body = (np.asarray(rho) * area / 3.0)[:, None, None] * np.asarray(g, dtype=np.float64)[None, None, :]
    return scatter_vector(mesh, np.broadcast_to(body, (len(area), 3, 2)).reshape(len(area), 6))


def stress_load(mesh, stress):
    """Full-length vector of -int stress . grad w"""
    grads, area = shape_gradients(mesh)
    local = -area[:, None, None] * np.einsum('eij,eaj->eai', stress, grads)
    return scatter_vector(mesh, local.reshape(len(area), 6))


def traction_load(mesh, f_surface):
    """
    int_Gamma1 f . w over TopFree edges, 2-point Gauss rule per edge

    Args:
        f_surface = None, a constant Vec2, or a callable x (2,) -> Vec2
    """
    load = np.zeros(2 * mesh.n_nodes)
    if f_surface is None:
        return load
    if not callable(f_surface):
        value = np.asarray(f_surface, dtype=np.float64)
        if not np.any(value):
            return load
        f_surface = lambda x, v=value: v  # noqa: E731
    for a, b in mesh.boundary_edges[mesh.boundary_tags == BoundaryTag.TOP_FREE]:
        xa, xb = mesh.nodes[a], mesh.nodes[b]
        length = np.hypot(*(xb - xa))
        for s in GAUSS_EDGE:
            f = np.asarray(f_surface(xa + s * (xb - xa)), dtype=np.float64)
            load[2 * a:2 * a + 2] += 0.5 * length * (1.0 - s) * f
            load[2 * b:2 * b + 2] += 0.5 * length * s * f
    return load


def free_dof_map(mesh, constrain=True):
    fixed = np.zeros((mesh.n_nodes, 2), dtype=bool)
    if constrain:
        fixed[constrained_nodes(mesh, BoundaryTag.SIDE_ROLLER), 0] = True
        fixed[constrained_nodes(mesh, BoundaryTag.BOTTOM_ROLLER), 1] = True
    dof_map = np.full((mesh.n_nodes, 2), -1, dtype=np.int64)
    dof_map[~fixed] = np.arange(np.count_nonzero(~fixed))
    return dof_map


def apply_roller_constraints(system, mesh):
    """
    Eliminate x dofs on SideRoller nodes and y dofs on BottomRoller nodes;
    the tangential traction condition is natural
    """
    if np.any(system.dof_map < 0):
        raise ValidationError("system is already constrained")
    dof_map = free_dof_map(mesh)
    keep = dof_map.ravel() >= 0
    matrix = system.matrix[keep][:, keep].tocsr()
    return SparseSystem(matrix=matrix, rhs=system.rhs[keep], dof_map=dof_map)


def assemble(mesh, states, params_by_region, g, f_surface=None, dt=0.1, constrain=True, workers=1):
    """
    Global system for K(w, u) = P(w)

    Args:
        mesh             = Mesh in the current configuration
        states           = PointState batch, one per element
        params_by_region = {Region: MaterialParams}
        g                = gravity Vec2 at t_{n+1}
        f_surface        = traction on Gamma1 at t_{n+1} (None = traction free)
        dt               = time increment (Ma)
        constrain        = eliminate roller dofs
        workers          = element batches evaluated concurrently
    """
    grads, area = shape_gradients(mesh)
    m = material.stack_params(params_by_region, mesh.region)
    local = _batched_element_matrices(grads, area, states, m, g, dt, workers)

    ndof = 2 * mesh.n_nodes
    dofs = element_dofs(mesh.triangles)
    rows = np.broadcast_to(dofs[:, :, None], local.k_local.shape).ravel()
    cols = np.broadcast_to(dofs[:, None, :], local.k_local.shape).ravel()
    matrix = coo_matrix((local.k_local.ravel(), (rows, cols)), shape=(ndof, ndof)).tocsr()
    rhs = scatter_vector(mesh, local.f_local) + traction_load(mesh, f_surface)

    system = SparseSystem(matrix=matrix, rhs=rhs, dof_map=free_dof_map(mesh, constrain=False))
    if constrain:
        system = apply_roller_constraints(system, mesh)
    log.debug(f"assembled {system.size} dofs, {matrix.nnz} nonzeros")
    return system
