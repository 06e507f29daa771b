"""Uniform simplicial meshes of intervals and rectangles.

Node numbering and cell orientation are deterministic so that repeated
construction with the same arguments gives bit-identical arrays. Boundary
facets carry one of three tags (TOP, BOTTOM, SIDE); surface integrals are
driven by facet tags, never by node tags.
"""

import enum

import numpy as np


class BoundaryTag(enum.IntEnum):
    """Tags partitioning the domain boundary."""

    TOP = 0
    BOTTOM = 1
    SIDE = 2


class Mesh:
    """Simplicial mesh of an interval (dim=1) or rectangle (dim=2).

    Attributes
    ----------
    dim : int
        Spatial dimension, 1 or 2.
    nodes : ndarray, shape (n_nodes, dim)
        Node coordinates.
    cells : ndarray, shape (n_cells, dim+1)
        Node indices per simplex, consistently oriented (positive measure).
    boundary_facets : ndarray, shape (n_facets, dim)
        Node indices per boundary facet (one node in 1D, an edge in 2D).
    boundary_tags : ndarray, shape (n_facets,)
        One BoundaryTag value per facet.
    """

    def __init__(self, dim, nodes, cells, boundary_facets, boundary_tags):
        self.dim = dim
        self.nodes = np.ascontiguousarray(nodes, dtype=float)
        self.cells = np.ascontiguousarray(cells, dtype=np.int64)
        self.boundary_facets = np.ascontiguousarray(boundary_facets, dtype=np.int64)
        self.boundary_tags = np.ascontiguousarray(boundary_tags, dtype=np.int64)
        if self.nodes.ndim == 1:
            self.nodes = self.nodes[:, None]

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]

    def cell_measures(self):
        """Signed measures (lengths/areas) of all cells; positive by construction."""
        x = self.nodes[self.cells]
        if self.dim == 1:
            return x[:, 1, 0] - x[:, 0, 0]
        d1 = x[:, 1, :] - x[:, 0, :]
        d2 = x[:, 2, :] - x[:, 0, :]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def build_interval_mesh(n_y, length):
    """Uniform mesh of [0, length] with n_y segments.

    Node 0 is tagged BOTTOM, node n_y is tagged TOP.
    """
    if n_y < 1:
        raise ValueError("n_y must be at least 1, got %r" % (n_y,))
    if not length > 0:
        raise ValueError("length must be positive, got %r" % (length,))
    nodes = np.linspace(0.0, float(length), n_y + 1)
    cells = np.column_stack([np.arange(n_y), np.arange(1, n_y + 1)])
    facets = np.array([[0], [n_y]])
    tags = np.array([BoundaryTag.BOTTOM, BoundaryTag.TOP], dtype=np.int64)
    return Mesh(1, nodes, cells, facets, tags)


def build_rect_mesh(n_x, n_y, L_x, L_y):
    """Uniform triangulation of [0, L_x] x [0, L_y] with n_x by n_y quads.

    Each quad is split along its bottom-left to top-right diagonal, giving
    2*n_x*n_y triangles on (n_x+1)*(n_y+1) nodes. Facets on y = L_y are
    tagged TOP, on y = 0 BOTTOM, and on x in {0, L_x} SIDE.
    """
    if n_x < 1 or n_y < 1:
        raise ValueError("cell counts must be at least 1, got (%r, %r)" % (n_x, n_y))
    if not (L_x > 0 and L_y > 0):
        raise ValueError("extents must be positive, got (%r, %r)" % (L_x, L_y))
    xs = np.linspace(0.0, float(L_x), n_x + 1)
    ys = np.linspace(0.0, float(L_y), n_y + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return j * (n_x + 1) + i

    I, J = np.meshgrid(np.arange(n_x), np.arange(n_y), indexing="xy")
    I = I.ravel()
    J = J.ravel()
    bl = nid(I, J)
    br = nid(I + 1, J)
    tr = nid(I + 1, J + 1)
    tl = nid(I, J + 1)
    # bottom-left -> top-right diagonal: (bl, br, tr) and (bl, tr, tl)
    cells = np.empty((2 * n_x * n_y, 3), dtype=np.int64)
    cells[0::2] = np.column_stack([bl, br, tr])
    cells[1::2] = np.column_stack([bl, tr, tl])

    facets = []
    tags = []
    for i in range(n_x):
        facets.append((nid(i, 0), nid(i + 1, 0)))
        tags.append(BoundaryTag.BOTTOM)
    for i in range(n_x):
        facets.append((nid(i, n_y), nid(i + 1, n_y)))
        tags.append(BoundaryTag.TOP)
    for j in range(n_y):
        facets.append((nid(0, j), nid(0, j + 1)))
        tags.append(BoundaryTag.SIDE)
    for j in range(n_y):
        facets.append((nid(n_x, j), nid(n_x, j + 1)))
        tags.append(BoundaryTag.SIDE)
    return Mesh(2, nodes, cells, np.array(facets), np.array(tags, dtype=np.int64))


def facets_with_tag(mesh, tag):
    """All boundary facets carrying the given tag, as an (k, dim) index array."""
    mask = mesh.boundary_tags == int(tag)
    return mesh.boundary_facets[mask]
