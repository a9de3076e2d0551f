"""
Triangulated domains and P1/P0 field plumbing
=============================================

The discretization is deliberately plain:

* displacements -- continuous piecewise-linear (P1) vector fields,
* damage        -- continuous piecewise-linear (P1) scalar field,
* plastic strain -- piecewise-constant (P0) packed deviatoric field.

``Mesh`` carries the triangulation plus everything derived from it that the
rest of the code needs: element areas, P1 shape-function gradients, lumped
vertex weights, boundary tagging and the constrained-dof bookkeeping in
``FieldLayout``.

Scalar products
---------------
Nodal (z-type) fields use lumped quadrature: ``<a, b> = sum_V w_V a_V b_V``
with ``w_V = sum_{T owning V} area_T / 3``.  Element (p-type) fields use the
exact piecewise-constant product ``sum_T area_T a_T b_T``.  A consistent P1
mass matrix is also provided for cross-checks; lumping is what the solver
and all slope/dissipation formulas use, so that pointwise arguments (signs,
thresholds) translate one-to-one into weighted vector arithmetic.

Mesh file format
----------------
Plain text::

    <nv> vertices <ne> elements <nb> boundary_edges
    x y              (nv lines)
    i j k            (ne lines, zero-based vertex ids)
    i j tag          (nb lines, tag in {dir, neu})
"""

import io
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Mesh",
    "FieldLayout",
    "crossed_rectangle",
    "read_mesh",
    "write_mesh",
    "sym_grad",
]

_BOUNDARY_TAGS = ("dir", "neu")


@dataclass
class FieldLayout:
    """Dof counts and constraint masks for the (u, z, p) triple."""

    n_vertices: int
    n_elements: int
    dirichlet_vertices: np.ndarray  # sorted vertex ids
    u_fixed: np.ndarray  # bool mask over 2*n_vertices flattened (x0,y0,x1,y1,...)

    @property
    def n_u(self) -> int:
        return 2 * self.n_vertices

    @property
    def n_z(self) -> int:
        return self.n_vertices

    @property
    def n_p(self) -> int:
        return 2 * self.n_elements

    @property
    def u_free(self) -> np.ndarray:
        return ~self.u_fixed


class Mesh:
    """Triangle mesh with precomputed P1/P0 geometry.

    Parameters
    ----------
    vertices : (nv, 2) float array
    triangles : (ne, 3) int array
        Zero-based vertex indices; orientation is fixed up internally.
    boundary_edges : list of (int, int, str)
        Vertex pair plus tag, tag in ``{"dir", "neu"}``.
    """

    def __init__(self, vertices, triangles, boundary_edges):
        self.vertices = np.asarray(vertices, dtype=float)
        self.triangles = np.asarray(triangles, dtype=int)
        self.boundary_edges: List[Tuple[int, int, str]] = [
            (int(a), int(b), str(tag)) for a, b, tag in boundary_edges
        ]
        for _, _, tag in self.boundary_edges:
            if tag not in _BOUNDARY_TAGS:
                raise ValueError("unknown boundary tag %r" % tag)
        self._build_geometry()

    # ------------------------------------------------------------------
    # geometry precomputation
    # ------------------------------------------------------------------

    def _build_geometry(self):
        xy = self.vertices
        tri = self.triangles
        x = xy[tri, 0]  # (ne, 3)
        y = xy[tri, 1]

        # signed area; flip negatively oriented elements once and for all
        det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (
            x[:, 2] - x[:, 0]
        ) * (y[:, 1] - y[:, 0])
        flip = det < 0.0
        if np.any(flip):
            tri[flip, 1], tri[flip, 2] = tri[flip, 2].copy(), tri[flip, 1].copy()
            x = xy[tri, 0]
            y = xy[tri, 1]
            det = np.abs(det)
        self.area = 0.5 * det
        if np.any(self.area <= 0.0):
            raise ValueError("degenerate element in mesh")

        # P1 shape gradient coefficients: grad phi_i = (b_i, c_i) / (2 A)
        j, k = [1, 2, 0], [2, 0, 1]
        self.grad_b = (y[:, j] - y[:, k]) / (2.0 * self.area)[:, None]  # (ne,3)
        self.grad_c = (x[:, k] - x[:, j]) / (2.0 * self.area)[:, None]

        nv = len(self.vertices)
        ne = len(self.triangles)
        self.n_vertices = nv
        self.n_elements = ne

        # lumped vertex weights
        w = np.zeros(nv)
        np.add.at(w, tri.ravel(), np.repeat(self.area / 3.0, 3))
        self.vertex_weight = w

        self.centroids = xy[tri].mean(axis=1)

        dir_vs = sorted(
            {v for a, b, tag in self.boundary_edges if tag == "dir" for v in (a, b)}
        )
        fixed = np.zeros(2 * nv, dtype=bool)
        for v in dir_vs:
            fixed[2 * v] = True
            fixed[2 * v + 1] = True
        self.layout = FieldLayout(
            n_vertices=nv,
            n_elements=ne,
            dirichlet_vertices=np.asarray(dir_vs, dtype=int),
            u_fixed=fixed,
        )

    # ------------------------------------------------------------------
    # norms / products
    # ------------------------------------------------------------------

    def z_l1(self, v: np.ndarray) -> float:
        return float(np.sum(self.vertex_weight * np.abs(v)))

    def z_l2(self, v: np.ndarray) -> float:
        return float(np.sqrt(np.sum(self.vertex_weight * v * v)))

    def z_linf(self, v: np.ndarray) -> float:
        return float(np.max(np.abs(v))) if len(v) else 0.0

    def p0_l1(self, a: np.ndarray) -> float:
        """L1 norm of a packed deviatoric P0 field (Frobenius pointwise)."""
        mag = np.sqrt(2.0 * (a[..., 0] ** 2 + a[..., 1] ** 2))
        return float(np.sum(self.area * mag))

    def p0_l2(self, a: np.ndarray) -> float:
        return float(np.sqrt(np.sum(self.area * 2.0 * (a[..., 0] ** 2 + a[..., 1] ** 2))))

    def u_l2(self, u: np.ndarray) -> float:
        """Lumped L2 norm of a (nv, 2) displacement field."""
        return float(np.sqrt(np.sum(self.vertex_weight[:, None] * u * u)))

    def consistent_mass(self) -> sp.csr_matrix:
        """Exact P1 scalar mass matrix (for lumping cross-checks)."""
        tri = self.triangles
        ne = self.n_elements
        local = (np.ones((3, 3)) + np.eye(3)) / 12.0  # area-scaled below
        data = (local[None, :, :] * self.area[:, None, None]).ravel()
        rows = np.repeat(tri, 3, axis=1).ravel()
        cols = np.tile(tri, (1, 3)).ravel()
        return sp.coo_matrix((data, (rows, cols)), shape=(self.n_vertices,) * 2).tocsr()

    def element_averages(self, z: np.ndarray) -> np.ndarray:
        """Vertex-average of a nodal field per element (P0 restriction)."""
        return z[self.triangles].mean(axis=1)


def sym_grad(mesh: Mesh, disp: np.ndarray) -> np.ndarray:
    """Element-wise symmetric gradient of a P1 vector field.

    Parameters
    ----------
    mesh : Mesh
    disp : (nv, 2) array

    Returns
    -------
    (ne, 3) array of [e_xx, e_yy, e_xy] per element.
    """
    ux = disp[mesh.triangles, 0]
    uy = disp[mesh.triangles, 1]
    exx = np.sum(mesh.grad_b * ux, axis=1)
    eyy = np.sum(mesh.grad_c * uy, axis=1)
    exy = 0.5 * (np.sum(mesh.grad_c * ux, axis=1) + np.sum(mesh.grad_b * uy, axis=1))
    return np.stack([exx, eyy, exy], axis=-1)


# ---------------------------------------------------------------------------
# generators / IO
# ---------------------------------------------------------------------------


def crossed_rectangle(
    nx: int,
    ny: int,
    lx: float = 1.0,
    ly: float = 1.0,
    dirichlet_sides: Sequence[str] = ("left", "right"),
) -> Mesh:
    """Rectangle meshed with alternating-diagonal ("crossed") triangles.

    Each of the ``nx * ny`` cells is split into two triangles; the diagonal
    direction alternates per cell so the pattern has no preferred direction.
    Boundary edges on the sides named in ``dirichlet_sides`` are tagged
    ``dir``, the rest ``neu``.

    Parameters
    ----------
    nx, ny : int
        Cells per direction (16x16 gives the 512-element reference mesh).
    lx, ly : float
        Rectangle dimensions.
    dirichlet_sides : sequence of {"left", "right", "bottom", "top"}
    """
    if nx < 1 or ny < 1:
        raise ValueError("need at least one cell per direction")
    for s in dirichlet_sides:
        if s not in ("left", "right", "bottom", "top"):
            raise ValueError("unknown side %r" % s)

    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([X.ravel(), Y.ravel()], axis=-1)

    def vid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            if (i + j) % 2 == 0:
                tris.append((v00, v10, v11))
                tris.append((v00, v11, v01))
            else:
                tris.append((v00, v10, v01))
                tris.append((v10, v11, v01))

    edges = []

    def side_tag(name):
        return "dir" if name in dirichlet_sides else "neu"

    for j in range(ny):
        edges.append((vid(0, j), vid(0, j + 1), side_tag("left")))
        edges.append((vid(nx, j), vid(nx, j + 1), side_tag("right")))
    for i in range(nx):
        edges.append((vid(i, 0), vid(i + 1, 0), side_tag("bottom")))
        edges.append((vid(i, ny), vid(i + 1, ny), side_tag("top")))

    return Mesh(verts, np.asarray(tris, dtype=int), edges)


def write_mesh(mesh: Mesh, path) -> None:
    buf = io.StringIO()
    buf.write(
        "%d vertices %d elements %d boundary_edges\n"
        % (mesh.n_vertices, mesh.n_elements, len(mesh.boundary_edges))
    )
    for x, y in mesh.vertices:
        buf.write("%.17g %.17g\n" % (x, y))
    for i, j, k in mesh.triangles:
        buf.write("%d %d %d\n" % (i, j, k))
    for a, b, tag in mesh.boundary_edges:
        buf.write("%d %d %s\n" % (a, b, tag))
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        tokens = fh.read().split()
    try:
        if tokens[1] != "vertices" or tokens[3] != "elements" or tokens[5] != "boundary_edges":
            raise ValueError
        nv, ne, nb = int(tokens[0]), int(tokens[2]), int(tokens[4])
    except (IndexError, ValueError):
        raise ValueError("malformed mesh header") from None
    pos = 6
    need = nv * 2 + ne * 3 + nb * 3
    if len(tokens) - pos != need:
        raise ValueError(
            "mesh body has %d tokens, expected %d" % (len(tokens) - pos, need)
        )
    verts = np.array(tokens[pos : pos + 2 * nv], dtype=float).reshape(nv, 2)
    pos += 2 * nv
    tris = np.array(tokens[pos : pos + 3 * ne], dtype=int).reshape(ne, 3)
    pos += 3 * ne
    edges = []
    for _ in range(nb):
        a, b, tag = tokens[pos : pos + 3]
        edges.append((int(a), int(b), tag))
        pos += 3
    return Mesh(verts, tris, edges)
