# pyDiapir Module - Two-Layer Mesh
# -*- coding: utf-8 -*-
"""
 Structured triangulation of the two-layer rectangle, node motion and
 quality monitoring. The mesh follows the body (updated configuration) and
 is never re-meshed.

 Node (i, j) has index j*(nx+1) + i; rows 0..ny_salt are the salt layer,
 row ny_salt is the salt-sediment interface.
"""
import dataclasses
import enum
import logging
from dataclasses import dataclass

import numpy as np

from pydiapir.exceptions import ElementInverted, InvalidGeometry

log = logging.getLogger(__name__)


class Region(enum.IntEnum):
    SALT = 0
    SEDIMENT = 1


class BoundaryTag(enum.IntEnum):
    TOP_FREE = 0
    SIDE_ROLLER = 1
    BOTTOM_ROLLER = 2


@dataclass(frozen=True)
class Geometry:
    length: float
    salt_height: float
    sediment_height: float
    nx: int
    ny_salt: int
    ny_sediment: int

    @property
    def height(self):
        return self.salt_height + self.sediment_height

    @property
    def ny(self):
        return self.ny_salt + self.ny_sediment

    def validate(self):
        for name in ("length", "salt_height", "sediment_height"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise InvalidGeometry(f"{name} must be positive, got {value}")
        for name in ("nx", "ny_salt", "ny_sediment"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidGeometry(f"{name} must be a positive integer, got {value}")
        return self


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray           # (N, 2) current coordinates, m
    triangles: np.ndarray       # (E, 3) counter-clockwise node indices
    region: np.ndarray          # (E,) Region tags
    boundary_edges: np.ndarray  # (B, 2) node pairs
    boundary_tags: np.ndarray   # (B,) BoundaryTag
    edge_owner: np.ndarray      # (B,) triangle holding each boundary edge
    interface_nodes: np.ndarray
    geometry: Geometry

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.triangles)


def _cell_triangles(n00, n10, n01, n11, flip):
    if flip:
        return [(n00, n10, n01), (n10, n11, n01)]
    return [(n00, n10, n11), (n00, n11, n01)]


def build_two_layer_mesh(geom):
    """
    Structured two-layer mesh; cell diagonals alternate with (i + j) parity

    Args:
        geom = Geometry
    """
    geom.validate()
    nx, ny = geom.nx, geom.ny
    xs = np.linspace(0.0, geom.length, nx + 1)
    ys = np.concatenate([
        np.linspace(0.0, geom.salt_height, geom.ny_salt + 1),
        np.linspace(geom.salt_height, geom.height, geom.ny_sediment + 1)[1:],
    ])
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def node(i, j):
        return j * (nx + 1) + i

    triangles, region, cell_of = [], [], {}
    for j in range(ny):
        tag = Region.SALT if j < geom.ny_salt else Region.SEDIMENT
        for i in range(nx):
            tris = _cell_triangles(node(i, j), node(i + 1, j), node(i, j + 1), node(i + 1, j + 1),
                                   (i + j) % 2 == 1)
            for tri in tris:
                cell_of[len(triangles)] = (i, j)
                triangles.append(tri)
                region.append(tag)
    triangles = np.array(triangles, dtype=np.int64)

    # boundary edges, counter-clockwise around the domain
    edges, tags = [], []
    for i in range(nx):
        edges.append((node(i, 0), node(i + 1, 0)))
        tags.append(BoundaryTag.BOTTOM_ROLLER)
    for j in range(ny):
        edges.append((node(nx, j), node(nx, j + 1)))
        tags.append(BoundaryTag.SIDE_ROLLER)
    for i in range(nx, 0, -1):
        edges.append((node(i, ny), node(i - 1, ny)))
        tags.append(BoundaryTag.TOP_FREE)
    for j in range(ny, 0, -1):
        edges.append((node(0, j), node(0, j - 1)))
        tags.append(BoundaryTag.SIDE_ROLLER)
    edges = np.array(edges, dtype=np.int64)

    owner_of = {}
    for e, tri in enumerate(triangles):
        for k in range(3):
            owner_of.setdefault(frozenset((tri[k], tri[(k + 1) % 3])), []).append(e)
    owners = []
    for a, b in edges:
        found = owner_of.get(frozenset((a, b)), [])
        if len(found) != 1:
            raise InvalidGeometry(f"boundary edge ({a}, {b}) belongs to {len(found)} triangles")
        owners.append(found[0])

    interface = np.array([node(i, geom.ny_salt) for i in range(nx + 1)], dtype=np.int64)
    mesh = Mesh(nodes=nodes, triangles=triangles, region=np.array(region, dtype=np.int8),
                boundary_edges=edges, boundary_tags=np.array(tags, dtype=np.int8),
                edge_owner=np.array(owners, dtype=np.int64), interface_nodes=interface, geometry=geom)
    log.debug(f"built mesh: {mesh.n_nodes} nodes, {mesh.n_elements} triangles, {len(edges)} boundary edges")
    return mesh


def element_coords(mesh):
    return mesh.nodes[mesh.triangles]


def signed_areas(mesh):
    X = element_coords(mesh)
    d1 = X[:, 1] - X[:, 0]
    d2 = X[:, 2] - X[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def shape_gradients(mesh):
    """
    Gradients of the linear basis in current coordinates

    Returns (grads (E, 3, 2), area (E,)); ElementInverted if any area <= 0
    """
    X = element_coords(mesh)
    area = signed_areas(mesh)
    bad = np.flatnonzero(area <= 0)
    if bad.size:
        raise ElementInverted(f"non-positive area at element {int(bad[0])}", element=int(bad[0]))
    x, y = X[..., 0], X[..., 1]
    grads = np.empty(X.shape)
    grads[:, 0, 0] = y[:, 1] - y[:, 2]
    grads[:, 0, 1] = x[:, 2] - x[:, 1]
    grads[:, 1, 0] = y[:, 2] - y[:, 0]
    grads[:, 1, 1] = x[:, 0] - x[:, 2]
    grads[:, 2, 0] = y[:, 0] - y[:, 1]
    grads[:, 2, 1] = x[:, 1] - x[:, 0]
    grads /= (2.0 * area)[:, None, None]
    return grads, area


def element_gradient(mesh, u):
    """Per-element grad u, H_ij = du_i/dx_j, in current coordinates"""
    grads, _ = shape_gradients(mesh)
    return np.einsum('eai,eaj->eij', np.asarray(u)[mesh.triangles], grads)


def element_size(mesh):
    return mesh.geometry.length / mesh.geometry.nx


def displace_nodes(mesh, u):
    u = np.asarray(u, dtype=np.float64)
    if u.shape != mesh.nodes.shape:
        raise InvalidGeometry(f"displacement shape {u.shape} does not match nodes {mesh.nodes.shape}")
    return dataclasses.replace(mesh, nodes=mesh.nodes + u)


def min_area_ratio(mesh, reference):
    if mesh.triangles.shape != reference.triangles.shape or np.any(mesh.triangles != reference.triangles):
        raise InvalidGeometry("meshes do not share connectivity")
    return float(np.min(signed_areas(mesh) / signed_areas(reference)))


def extract_interface(mesh):
    return mesh.nodes[mesh.interface_nodes].copy()


def boundary_normal(mesh, edge):
    """
    Outward unit normal of a boundary edge in current coordinates

    Args:
        edge = index into mesh.boundary_edges
    """
    a, b = mesh.boundary_edges[edge]
    d = mesh.nodes[b] - mesh.nodes[a]
    n = np.array([d[1], -d[0]]) / np.hypot(d[0], d[1])
    tri = mesh.triangles[mesh.edge_owner[edge]]
    third = [k for k in tri if k != a and k != b][0]
    if np.dot(mesh.nodes[third] - mesh.nodes[a], n) > 0:
        n = -n
    return n


def constrained_nodes(mesh, tag):
    return np.unique(mesh.boundary_edges[mesh.boundary_tags == tag].ravel())
