"""Triangular meshes for the P1 test problems.

Meshes are read from and written to a plain text format:

    nv nt
    x y flag        (nv lines, flag 1 marks a Dirichlet vertex)
    i j k           (nt lines, 0-based vertex indices)

gen_structured_trimesh produces uniform refinements of the unit square split
into two triangles. The meshes shipped in sample_data/meshes are structured
grids with randomly displaced interior vertices; they are loaded with
load_trimesh.
"""
from dataclasses import dataclass
import logging

import numpy as np
import scipy.spatial

from linalg_util.file_util import ensure_parent_dir
from linalg_util.sparse_util import NumericalError

logger = logging.getLogger(__name__)

DUPLICATE_VERTEX_TOL = 1e-12


class MeshError(NumericalError, ValueError):
    """Raise when a mesh is malformed or not conforming."""
    module = 'problems'


@dataclass
class TriMesh(object):
    """A conforming triangulation with Dirichlet markers.

    On construction the triangles are turned counter-clockwise, and the mesh
    is checked for duplicate vertices, for edges shared by more than two
    triangles and for Dirichlet flags on interior vertices.
    """
    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.array(self.triangles, dtype=np.int64, copy=True)
        self.boundary = np.asarray(self.boundary, dtype=bool)
        nv = self.vertices.shape[0]
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError('vertices must be an (nv, 2) array')
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError('triangles must be an (nt, 3) array')
        if self.boundary.shape != (nv,):
            raise MeshError('need one boundary flag per vertex')
        if self.triangles.size and (self.triangles.min() < 0 or
                                    self.triangles.max() >= nv):
            raise MeshError('triangle refers to a vertex outside 0..%d' %
                            (nv - 1))
        self._orient()
        self._check_duplicates()
        self._check_conforming()

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @property
    def free_vertices(self):
        """Indices of the non-Dirichlet vertices, in matrix order."""
        return np.flatnonzero(~self.boundary)

    def signed_areas(self):
        p = self.vertices[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) -
                      (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    def edges(self):
        """(unique sorted edges, inverse index into the 3 * nt local edges,
        use count of each unique edge)."""
        t = self.triangles
        local = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        local.sort(axis=1)
        return np.unique(local, axis=0, return_inverse=True,
                         return_counts=True)

    def _orient(self):
        flip = self.signed_areas() < 0
        if np.any(flip):
            self.triangles[flip] = self.triangles[flip][:, [0, 2, 1]]

    def _check_duplicates(self):
        tree = scipy.spatial.cKDTree(self.vertices)
        pairs = tree.query_pairs(DUPLICATE_VERTEX_TOL)
        if pairs:
            i, j = min(pairs)
            raise MeshError('vertices %d and %d coincide' % (i, j))

    def _check_conforming(self):
        if not self.n_triangles:
            return
        unique, _, counts = self.edges()
        over = np.flatnonzero(counts > 2)
        if over.size:
            i, j = unique[over[0]]
            raise MeshError('edge (%d, %d) is shared by %d triangles' % (
                i, j, counts[over[0]]))
        # Dirichlet flags are only allowed on vertices of boundary edges
        on_boundary = np.zeros(self.n_vertices, dtype=bool)
        on_boundary[unique[counts == 1].ravel()] = True
        stray = np.flatnonzero(self.boundary & ~on_boundary)
        if stray.size:
            raise MeshError('vertex %d is flagged but lies inside the mesh' %
                            stray[0])


def refine_trimesh(mesh):
    """Split every triangle into four through its edge midpoints.

    Midpoints of boundary edges (edges used by one triangle) are flagged as
    Dirichlet vertices.
    """
    unique, inverse, counts = mesh.edges()
    inverse = inverse.ravel()
    nv = mesh.n_vertices
    nt = mesh.n_triangles
    midpoints = 0.5 * (mesh.vertices[unique[:, 0]] +
                       mesh.vertices[unique[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])
    boundary = np.concatenate([mesh.boundary, counts == 1])

    # local edge k of triangle t sits at inverse[k * nt + t]
    m01 = nv + inverse[:nt]
    m12 = nv + inverse[nt:2 * nt]
    m20 = nv + inverse[2 * nt:]
    v0, v1, v2 = mesh.triangles.T
    triangles = np.concatenate([
        np.stack([v0, m01, m20], axis=1),
        np.stack([m01, v1, m12], axis=1),
        np.stack([m20, m12, v2], axis=1),
        np.stack([m01, m12, m20], axis=1)])
    return TriMesh(vertices, triangles, boundary)


def gen_structured_trimesh(levels):
    """The unit square cut along its diagonal, refined levels times.

    Returns a TriMesh with (2^levels + 1)^2 vertices and 2 * 4^levels
    triangles; the vertices on the square's edges are Dirichlet.
    """
    if levels < 0:
        raise MeshError('levels must be non-negative, got %d' % levels)
    mesh = TriMesh(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
                   np.array([[0, 1, 2], [0, 2, 3]]),
                   np.ones(4, dtype=bool))
    for _ in range(levels):
        mesh = refine_trimesh(mesh)
    return mesh


def load_trimesh(path):
    """Read a mesh file; see the module docstring for the format."""
    try:
        with open(path) as infile:
            lines = [line.split() for line in infile if line.strip()]
    except OSError as exc:
        raise MeshError('cannot read mesh %s: %s' % (path, exc))
    if not lines or len(lines[0]) != 2:
        raise MeshError('%s: first line must be "nv nt"' % path)
    try:
        nv, nt = int(lines[0][0]), int(lines[0][1])
        if nv <= 0 or nt < 0 or len(lines) != 1 + nv + nt:
            raise MeshError('%s: expected %d vertex and %d triangle lines' % (
                path, nv, nt))
        verts = np.array(lines[1:1 + nv], dtype=float).reshape(nv, -1)
        tris = (np.array(lines[1 + nv:], dtype=np.int64).reshape(nt, -1)
                if nt else np.zeros((0, 3), dtype=np.int64))
    except ValueError as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError('cannot read mesh %s: %s' % (path, exc))
    if verts.shape[1] != 3:
        raise MeshError('%s: expected %d vertex lines "x y flag"' % (path, nv))
    if tris.shape[1] != 3:
        raise MeshError('%s: expected %d triangle lines "i j k"' % (path, nt))
    mesh = TriMesh(verts[:, :2], tris, verts[:, 2] != 0)
    logger.debug('loaded %s: %d vertices, %d triangles, %d free',
                 path, nv, nt, mesh.free_vertices.size)
    return mesh


def write_trimesh(mesh, path):
    ensure_parent_dir(path)
    with open(path, 'w') as outfile:
        outfile.write('%d %d\n' % (mesh.n_vertices, mesh.n_triangles))
        for (x, y), flag in zip(mesh.vertices, mesh.boundary):
            outfile.write('%.17g %.17g %d\n' % (x, y, int(flag)))
        for i, j, k in mesh.triangles:
            outfile.write('%d %d %d\n' % (i, j, k))
