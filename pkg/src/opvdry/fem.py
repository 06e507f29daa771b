"""Lagrange P1/P2 spaces and finite element assembly on simplicial meshes.

Assembled operators are scipy CSR matrices; fields are plain numpy arrays
indexed by the degrees of freedom of one space. Vector-valued spaces are
blocked by component (all x-dofs, then all y-dofs), which keeps divergence
blocks and per-component multigrid trivially extractable.

Quadrature uses fixed Gauss rules (collapsed tensor rules on triangles)
exact for the polynomial degrees appearing in the weak forms; the degree
can be raised for verification purposes.
"""

import numpy as np
import scipy.sparse as sp

from .meshing import BoundaryTag

DEFAULT_QUAD_DEGREE = 5


# ---------------------------------------------------------------------------
# quadrature rules
# ---------------------------------------------------------------------------

def interval_rule(degree):
    """Gauss-Legendre points/weights on [0, 1], exact for the given degree."""
    n = max(1, (degree + 2) // 2)
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0)[:, None], 0.5 * w


def triangle_rule(degree):
    """Collapsed (Duffy) tensor Gauss rule on the unit reference triangle.

    Exact for bivariate polynomials of the given total degree; all weights
    positive. Weights sum to the triangle area 1/2.
    """
    nu = max(1, (degree + 3) // 2)  # Jacobian adds one degree in u
    nv = max(1, (degree + 2) // 2)
    xu, wu = np.polynomial.legendre.leggauss(nu)
    xv, wv = np.polynomial.legendre.leggauss(nv)
    xu = 0.5 * (xu + 1.0)
    wu = 0.5 * wu
    xv = 0.5 * (xv + 1.0)
    wv = 0.5 * wv
    pts = []
    wts = []
    for i in range(nu):
        for j in range(nv):
            u = xu[i]
            v = xv[j]
            pts.append((u, v * (1.0 - u)))
            wts.append(wu[i] * wv[j] * (1.0 - u))
    return np.array(pts), np.array(wts)


def simplex_rule(dim, degree):
    if dim == 1:
        return interval_rule(degree)
    return triangle_rule(degree)


# ---------------------------------------------------------------------------
# reference bases
# ---------------------------------------------------------------------------

def _basis_1d(degree, pts):
    x = pts[:, 0]
    if degree == 1:
        vals = np.column_stack([1.0 - x, x])
        grads = np.zeros((len(x), 2, 1))
        grads[:, 0, 0] = -1.0
        grads[:, 1, 0] = 1.0
    else:
        vals = np.column_stack([(1.0 - x) * (1.0 - 2.0 * x), x * (2.0 * x - 1.0), 4.0 * x * (1.0 - x)])
        grads = np.zeros((len(x), 3, 1))
        grads[:, 0, 0] = 4.0 * x - 3.0
        grads[:, 1, 0] = 4.0 * x - 1.0
        grads[:, 2, 0] = 4.0 - 8.0 * x
    return vals, grads


def _basis_2d(degree, pts):
    x = pts[:, 0]
    y = pts[:, 1]
    lam = np.column_stack([1.0 - x - y, x, y])
    dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    if degree == 1:
        vals = lam
        grads = np.broadcast_to(dlam, (len(x), 3, 2)).copy()
        return vals, grads
    nq = len(x)
    vals = np.zeros((nq, 6))
    grads = np.zeros((nq, 6, 2))
    for i in range(3):
        vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        grads[:, i, :] = (4.0 * lam[:, i] - 1.0)[:, None] * dlam[i]
    edges = [(0, 1), (1, 2), (0, 2)]
    for k, (i, j) in enumerate(edges):
        vals[:, 3 + k] = 4.0 * lam[:, i] * lam[:, j]
        grads[:, 3 + k, :] = 4.0 * (lam[:, i][:, None] * dlam[j] + lam[:, j][:, None] * dlam[i])
    return vals, grads


def reference_basis(dim, degree, pts):
    """Values (nq, nloc) and reference gradients (nq, nloc, dim) at points."""
    if dim == 1:
        return _basis_1d(degree, pts)
    return _basis_2d(degree, pts)


# ---------------------------------------------------------------------------
# function spaces
# ---------------------------------------------------------------------------

class FESpace:
    """Continuous Lagrange space of degree 1 or 2, scalar or vector valued.

    For degree 2 one dof per mesh edge (per cell midpoint in 1D) is appended
    after the node dofs. Vector dofs are blocked: global dof of component c
    and scalar dof s is c * n_scalar_dofs + s.
    """

    def __init__(self, mesh, degree=1, components=1, quad_degree=DEFAULT_QUAD_DEGREE):
        if degree not in (1, 2):
            raise ValueError("degree must be 1 or 2")
        if components not in (1, mesh.dim):
            raise ValueError("components must be 1 (scalar) or mesh.dim (vector)")
        self.mesh = mesh
        self.degree = degree
        self.components = components
        self.quad_degree = quad_degree

        n_nodes = mesh.n_nodes
        cells = mesh.cells
        if degree == 1:
            self.n_scalar_dofs = n_nodes
            self.cell_dofs = cells.copy()
            self._edge_lookup = None
        elif mesh.dim == 1:
            self.n_scalar_dofs = n_nodes + mesh.n_cells
            mid = n_nodes + np.arange(mesh.n_cells)
            self.cell_dofs = np.column_stack([cells, mid])
            self._edge_lookup = None
        else:
            pairs = np.concatenate([cells[:, [0, 1]], cells[:, [1, 2]], cells[:, [0, 2]]])
            pairs = np.sort(pairs, axis=1)
            keys = pairs[:, 0] * n_nodes + pairs[:, 1]
            uniq = np.unique(keys)
            self._edge_keys = uniq
            edge_idx = n_nodes + np.searchsorted(uniq, keys).reshape(3, -1).T
            self.n_scalar_dofs = n_nodes + len(uniq)
            self.cell_dofs = np.column_stack([cells, edge_idx])

        self.n_local = self.cell_dofs.shape[1]
        self.ndof = self.components * self.n_scalar_dofs

        pts, wts = simplex_rule(mesh.dim, quad_degree)
        self.quad_points = pts
        self.quad_weights = wts
        self.basis_vals, self.basis_grads = reference_basis(mesh.dim, degree, pts)
        self._geom = None

    # -- geometry ----------------------------------------------------------

    def geometry(self):
        """(detJ, invJT) of the affine cell maps; cached."""
        if self._geom is None:
            mesh = self.mesh
            x = mesh.nodes[mesh.cells]
            if mesh.dim == 1:
                det = x[:, 1, 0] - x[:, 0, 0]
                invJT = (1.0 / det)[:, None, None]
            else:
                J = np.stack([x[:, 1, :] - x[:, 0, :], x[:, 2, :] - x[:, 0, :]], axis=2)
                det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
                inv = np.empty_like(J)
                inv[:, 0, 0] = J[:, 1, 1]
                inv[:, 0, 1] = -J[:, 0, 1]
                inv[:, 1, 0] = -J[:, 1, 0]
                inv[:, 1, 1] = J[:, 0, 0]
                inv /= det[:, None, None]
                invJT = np.swapaxes(inv, 1, 2)
            self._geom = (det, invJT)
        return self._geom

    def physical_grads(self):
        """Basis gradients at quadrature points per cell, shape (ncell, nq, nloc, dim)."""
        _, invJT = self.geometry()
        return np.einsum("cde,qle->cqld", invJT, self.basis_grads)

    def dof_coords(self):
        """Coordinates of scalar dofs (nodes first, then edge/midpoint dofs)."""
        mesh = self.mesh
        if self.degree == 1:
            return mesh.nodes.copy()
        if mesh.dim == 1:
            mids = 0.5 * (mesh.nodes[mesh.cells[:, 0]] + mesh.nodes[mesh.cells[:, 1]])
            return np.vstack([mesh.nodes, mids])
        a = self._edge_keys // mesh.n_nodes
        b = self._edge_keys % mesh.n_nodes
        mids = 0.5 * (mesh.nodes[a] + mesh.nodes[b])
        return np.vstack([mesh.nodes, mids])

    def boundary_scalar_dofs(self):
        """Sorted scalar dofs lying on the domain boundary."""
        mesh = self.mesh
        dofs = set(int(n) for n in mesh.boundary_facets.ravel())
        if self.degree == 2 and mesh.dim == 2:
            pairs = np.sort(mesh.boundary_facets, axis=1)
            keys = pairs[:, 0] * mesh.n_nodes + pairs[:, 1]
            ranks = np.searchsorted(self._edge_keys, keys)
            dofs.update(int(r) + mesh.n_nodes for r in ranks)
        return np.array(sorted(dofs), dtype=np.int64)

    def boundary_dofs(self):
        """Boundary dofs of all components (for no-slip constraints)."""
        s = self.boundary_scalar_dofs()
        return np.concatenate([c * self.n_scalar_dofs + s for c in range(self.components)])

    def interpolate(self, fn):
        """Dof vector interpolating fn(x) (scalar) or fn(x) -> (dim,) (vector)."""
        coords = self.dof_coords()
        if self.components == 1:
            return np.array([fn(x) for x in coords], dtype=float)
        vals = np.array([fn(x) for x in coords], dtype=float)
        return np.concatenate([vals[:, c] for c in range(self.components)])


# ---------------------------------------------------------------------------
# field evaluation at quadrature points
# ---------------------------------------------------------------------------

def eval_at_quad(space, values):
    """Scalar field values at all quadrature points, shape (ncell, nq)."""
    return np.einsum("ql,cl->cq", space.basis_vals, values[space.cell_dofs])


def grad_at_quad(space, values):
    """Scalar field gradients at quadrature points, shape (ncell, nq, dim)."""
    grads = space.physical_grads()
    return np.einsum("cqld,cl->cqd", grads, values[space.cell_dofs])


def vector_at_quad(space, values):
    """Vector field values at quadrature points, shape (ncell, nq, dim)."""
    n = space.n_scalar_dofs
    comps = [eval_at_quad(space, values[c * n:(c + 1) * n]) for c in range(space.components)]
    return np.stack(comps, axis=-1)


# ---------------------------------------------------------------------------
# matrix assembly
# ---------------------------------------------------------------------------

def _scatter_matrix(space_rows, space_cols, local):
    """Accumulate per-cell local matrices (ncell, nra, nrb) into CSR."""
    rows = np.broadcast_to(space_rows[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(space_cols[:, None, :], local.shape).ravel()
    n_r = rows.max() + 1 if rows.size else 0
    return rows, cols, local.ravel()


def _coo_to_csr(rows, cols, vals, shape):
    A = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def _block_diag_components(space, scalar_matrix):
    if space.components == 1:
        return scalar_matrix
    return sp.kron(sp.eye(space.components, format="csr"), scalar_matrix, format="csr")


def assemble_mass(space, weight=None):
    """Mass matrix with optional P1 nodal weight field, int w zeta_a zeta_b dx."""
    det, _ = space.geometry()
    vals = space.basis_vals
    if weight is None:
        wq = np.broadcast_to(space.quad_weights, (space.mesh.n_cells, len(space.quad_weights)))
    else:
        weight = np.asarray(weight, dtype=float)
        if weight.shape != (space.mesh.n_nodes,):
            raise ValueError("weight must be a P1 nodal field on the same mesh")
        wvals, _ = reference_basis(space.mesh.dim, 1, space.quad_points)
        wfield = np.einsum("ql,cl->cq", wvals, weight[space.mesh.cells])
        wq = space.quad_weights[None, :] * wfield
    local = np.einsum("cq,c,qa,qb->cab", wq, det, vals, vals)
    rows, cols, data = _scatter_matrix(space.cell_dofs, space.cell_dofs, local)
    n = space.n_scalar_dofs
    M = _coo_to_csr(rows, cols, data, (n, n))
    return _block_diag_components(space, M)


def assemble_stiffness(space):
    """Stiffness matrix int grad zeta_a . grad zeta_b dx (per component)."""
    det, _ = space.geometry()
    grads = space.physical_grads()
    local = np.einsum("q,c,cqad,cqbd->cab", space.quad_weights, det, grads, grads)
    rows, cols, data = _scatter_matrix(space.cell_dofs, space.cell_dofs, local)
    n = space.n_scalar_dofs
    K = _coo_to_csr(rows, cols, data, (n, n))
    return _block_diag_components(space, K)


def convection_from_wind(space, wind):
    """Convection matrix int (w . grad zeta_b) zeta_a dx for wind samples.

    wind has shape (ncell, nq, dim), evaluated at this space's quadrature
    points.
    """
    det, _ = space.geometry()
    grads = space.physical_grads()
    local = np.einsum("q,c,cqd,cqbd,qa->cab", space.quad_weights, det, wind, grads, space.basis_vals)
    rows, cols, data = _scatter_matrix(space.cell_dofs, space.cell_dofs, local)
    n = space.n_scalar_dofs
    C = _coo_to_csr(rows, cols, data, (n, n))
    return _block_diag_components(space, C)


def assemble_convection(space, velocity, velocity_space=None):
    """Convection matrix with velocity given on the P2 vector space of the mesh."""
    if velocity_space is None:
        velocity_space = FESpace(space.mesh, degree=2, components=space.mesh.dim,
                                 quad_degree=space.quad_degree)
    if velocity_space.mesh is not space.mesh:
        raise ValueError("velocity space lives on a different mesh")
    velocity = np.asarray(velocity, dtype=float)
    if velocity.shape != (velocity_space.ndof,):
        raise ValueError("velocity vector does not match the velocity space")
    vv, _ = reference_basis(space.mesh.dim, velocity_space.degree, space.quad_points)
    nsc = velocity_space.n_scalar_dofs
    wind = np.stack(
        [np.einsum("ql,cl->cq", vv, velocity[c * nsc:(c + 1) * nsc][velocity_space.cell_dofs])
         for c in range(velocity_space.components)], axis=-1)
    return convection_from_wind(space, wind)


def assemble_sym_grad(vspace, viscosity):
    """Viscous matrix int 2 eta sym(grad u) : sym(grad w) dx on a vector space."""
    if vspace.components != vspace.mesh.dim:
        raise ValueError("assemble_sym_grad requires a vector-valued space")
    det, _ = vspace.geometry()
    grads = vspace.physical_grads()
    w = vspace.quad_weights
    dim = vspace.mesh.dim
    n = vspace.n_scalar_dofs
    gg = np.einsum("q,c,cqad,cqbd->cab", w, det, grads, grads)
    blocks_rows = []
    coo_r, coo_c, coo_v = [], [], []
    for c in range(dim):
        for d in range(dim):
            local = viscosity * np.einsum("q,e,cqa,cqb->cab", w, det * 0 + 1.0,
                                          grads[:, :, :, d], grads[:, :, :, c]) if False else None
            # eta * (delta_cd grad.grad + d_d a * d_c b)
            local = viscosity * np.einsum("q,c,cqa,cqb->cab", w, det,
                                          grads[:, :, :, d], grads[:, :, :, c])
            if c == d:
                local = local + viscosity * gg
            rows = np.broadcast_to((c * n + vspace.cell_dofs)[:, :, None], local.shape).ravel()
            cols = np.broadcast_to((d * n + vspace.cell_dofs)[:, None, :], local.shape).ravel()
            coo_r.append(rows)
            coo_c.append(cols)
            coo_v.append(local.ravel())
    N = vspace.ndof
    return _coo_to_csr(np.concatenate(coo_r), np.concatenate(coo_c),
                       np.concatenate(coo_v), (N, N))


def assemble_divergence(vspace, pspace):
    """Divergence matrix B with B[n, m] = -int div(zeta_m) hat-zeta_n dx."""
    if vspace.mesh is not pspace.mesh:
        raise ValueError("velocity and pressure spaces live on different meshes")
    if vspace.components != vspace.mesh.dim:
        raise ValueError("assemble_divergence requires a vector velocity space")
    det, _ = vspace.geometry()
    grads = vspace.physical_grads()
    pvals, _ = reference_basis(pspace.mesh.dim, pspace.degree, vspace.quad_points)
    w = vspace.quad_weights
    n = vspace.n_scalar_dofs
    coo_r, coo_c, coo_v = [], [], []
    for c in range(vspace.components):
        local = -np.einsum("q,c,qn,cqm->cnm", w, det, pvals, grads[:, :, :, c])
        rows = np.broadcast_to(pspace.cell_dofs[:, :, None], local.shape).ravel()
        cols = np.broadcast_to((c * n + vspace.cell_dofs)[:, None, :], local.shape).ravel()
        coo_r.append(rows)
        coo_c.append(cols)
        coo_v.append(local.ravel())
    return _coo_to_csr(np.concatenate(coo_r), np.concatenate(coo_c), np.concatenate(coo_v),
                       (pspace.n_scalar_dofs, vspace.ndof))


def assemble_boundary_load(space, tag, coefficient, boundary_degree=3):
    """Surface load with entries coefficient * int_{Gamma_tag} zeta_a ds (P1 scalar)."""
    if space.degree != 1 or space.components != 1:
        raise ValueError("boundary loads are assembled on scalar P1 spaces")
    mesh = space.mesh
    out = np.zeros(space.ndof)
    mask = mesh.boundary_tags == int(tag)
    facets = mesh.boundary_facets[mask]
    if facets.size == 0 or coefficient == 0.0:
        return out
    if mesh.dim == 1:
        # 0-dimensional facet: point evaluation
        np.add.at(out, facets[:, 0], coefficient)
        return out
    pts, wts = interval_rule(boundary_degree)
    t = pts[:, 0]
    shape = np.column_stack([1.0 - t, t])  # P1 on the edge
    a = mesh.nodes[facets[:, 0]]
    b = mesh.nodes[facets[:, 1]]
    lengths = np.linalg.norm(b - a, axis=1)
    contrib = coefficient * np.einsum("q,qa,f->fa", wts, shape, lengths)
    np.add.at(out, facets[:, 0], contrib[:, 0])
    np.add.at(out, facets[:, 1], contrib[:, 1])
    return out


def assemble_load(space, values_at_quad):
    """Load vector int g zeta_a dx from samples g at quadrature points (ncell, nq)."""
    det, _ = space.geometry()
    local = np.einsum("q,c,cq,qa->ca", space.quad_weights, det, values_at_quad, space.basis_vals)
    out = np.zeros(space.n_scalar_dofs)
    np.add.at(out, space.cell_dofs, local)
    return out


def assemble_grad_load(vspace, tensor_at_quad):
    """Velocity load int G : grad(u) dx from tensor samples (ncell, nq, dim, dim)."""
    det, _ = vspace.geometry()
    grads = vspace.physical_grads()
    out = np.zeros(vspace.ndof)
    n = vspace.n_scalar_dofs
    for c in range(vspace.components):
        local = np.einsum("q,c,cqd,cqmd->cm", vspace.quad_weights, det,
                          tensor_at_quad[:, :, c, :], grads)
        np.add.at(out, c * n + vspace.cell_dofs, local)
    return out


def apply_dirichlet(matrix, rhs, dofs, value=0.0):
    """Row replacement: zero the rows, put 1 on the diagonal, set rhs to value.

    Returns a new (matrix, rhs) pair; inputs are not modified.
    """
    dofs = np.asarray(dofs, dtype=np.int64)
    n = matrix.shape[0]
    if dofs.size and (dofs.min() < 0 or dofs.max() >= n):
        raise IndexError("constrained dof index out of range")
    A = matrix.tocsr(copy=True)
    counts = np.diff(A.indptr)
    rowmask = np.zeros(n, dtype=bool)
    rowmask[dofs] = True
    A.data[np.repeat(rowmask, counts)] = 0.0
    A = (A + sp.coo_matrix((np.ones(dofs.size), (dofs, dofs)), shape=A.shape)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    b = np.array(rhs, dtype=float, copy=True)
    b[dofs] = value
    return A, b


# ---------------------------------------------------------------------------
# error norms (verification helpers)
# ---------------------------------------------------------------------------

def l2_error(space, values, exact):
    """L2 norm of (discrete field - exact(x)) by quadrature."""
    det, _ = space.geometry()
    uh = eval_at_quad(space, values)
    coords = space.mesh.nodes[space.mesh.cells]  # (ncell, dim+1, dim)
    # physical quadrature points
    if space.mesh.dim == 1:
        xq = coords[:, 0, :][:, None, :] + space.quad_points[None, :, :] * (
            coords[:, 1, :] - coords[:, 0, :])[:, None, :]
    else:
        v0 = coords[:, 0, :][:, None, :]
        e1 = (coords[:, 1, :] - coords[:, 0, :])[:, None, :]
        e2 = (coords[:, 2, :] - coords[:, 0, :])[:, None, :]
        xq = v0 + space.quad_points[None, :, 0:1] * e1 + space.quad_points[None, :, 1:2] * e2
    ue = exact(xq)
    err2 = np.einsum("q,c,cq->", space.quad_weights, det, (uh - ue) ** 2)
    return np.sqrt(err2)
