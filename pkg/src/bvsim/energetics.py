"""
Energies, loads, and slope distances
====================================

The stored energy of a state q = (u, z, p) at time t is

    E(t, q) = Q(e, z) + Phi(z) - <F(t), u + w(t)>,
    e       = E(u + w(t)) - p,
    Q(e, z) = 1/2 sum_T area_T V(zbar_T) (C e_T) : e_T,
    Phi(z)  = 1/2 a_m(z, z) + sum_V w_V W(z_V),

with w(t) the (global P1 extension of the) Dirichlet datum and F(t) the
external load functional.  The partial time derivative, used for the work
term of every energy ledger, is

    dt E(t, q) = <sigma, E(w'(t))> - <F'(t), u + w(t)> - <F(t), w'(t)>.

Local slopes of E with respect to the dissipation metrics (the quantities
whose vanishing characterizes equilibrium, and which enter the viscous
energy balance through their conjugate pairing):

    d_z = lumped-L2 distance of the negative damage gradient to dR(0)
        = || min(xi + kappa, 0) ||,   xi = -(mass-inverted) D_z E,
    d_p = ( sum_T area_T max(|dev sigma_T| - sigma_y(zbar_T), 0)^2 )^(1/2).

Both have sup-style dual characterizations over unit L2 balls; the tests
verify them against projected-ascent oracles.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .materials import MaterialParams
from .mesh import Mesh, sym_grad
from .nonlocal_form import assemble_nonlocal_form

__all__ = ["TimeProfile", "Loads", "State", "Model"]


# ---------------------------------------------------------------------------
# loading programs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeProfile:
    """Scalar load multiplier s(t): ramp, hold, or triangle."""

    kind: str = "ramp"
    rate: float = 1.0
    t0: float = 0.5

    def value(self, t: float) -> float:
        if self.kind == "ramp":
            return self.rate * t
        if self.kind == "hold":
            return self.rate * min(t, self.t0)
        if self.kind == "triangle":
            return self.rate * (t if t <= self.t0 else 2.0 * self.t0 - t)
        raise ValueError("unknown profile kind %r" % self.kind)

    def slope(self, t: float) -> float:
        # left-continuous derivative at the (isolated) kinks
        if self.kind == "ramp":
            return self.rate
        if self.kind == "hold":
            return self.rate if t <= self.t0 else 0.0
        if self.kind == "triangle":
            return self.rate if t <= self.t0 else -self.rate
        raise ValueError("unknown profile kind %r" % self.kind)


class Loads:
    """Time-dependent Dirichlet extension w(t) and load functional F(t).

    Parameters
    ----------
    mesh : Mesh
    w_hat : (nv, 2) array
        Spatial shape of the Dirichlet extension; w(t) = s_w(t) * w_hat.
    w_profile : TimeProfile
    f_hat : (nv, 2) array, optional
        Nodal body-force density, applied with lumped weights.
    g_hat : (2,) array, optional
        Constant traction on every Neumann-tagged boundary edge.
    f_profile, g_profile : TimeProfile, optional
    """

    def __init__(
        self,
        mesh: Mesh,
        w_hat: np.ndarray,
        w_profile: TimeProfile = TimeProfile("ramp", 1.0),
        f_hat: Optional[np.ndarray] = None,
        g_hat: Optional[np.ndarray] = None,
        f_profile: Optional[TimeProfile] = None,
        g_profile: Optional[TimeProfile] = None,
    ):
        self.mesh = mesh
        self.w_hat = np.asarray(w_hat, dtype=float)
        self.w_profile = w_profile
        self.f_hat = None if f_hat is None else np.asarray(f_hat, dtype=float)
        self.g_hat = None if g_hat is None else np.asarray(g_hat, dtype=float)
        self.f_profile = f_profile or TimeProfile("ramp", 1.0)
        self.g_profile = g_profile or TimeProfile("ramp", 1.0)

        # unit load vectors (nodal dual arrays)
        nv = mesh.n_vertices
        self._f_unit = np.zeros((nv, 2))
        if self.f_hat is not None:
            self._f_unit = mesh.vertex_weight[:, None] * self.f_hat
        self._g_unit = np.zeros((nv, 2))
        if self.g_hat is not None:
            for a, b, tag in mesh.boundary_edges:
                if tag != "neu":
                    continue
                L = float(np.linalg.norm(mesh.vertices[b] - mesh.vertices[a]))
                self._g_unit[a] += 0.5 * L * self.g_hat
                self._g_unit[b] += 0.5 * L * self.g_hat

    @classmethod
    def uniaxial_stretch(cls, mesh: Mesh, rate: float = 1.0) -> "Loads":
        """Horizontal stretch ramp: w(t) = rate * t * (x, 0)."""
        w_hat = np.stack([mesh.vertices[:, 0], np.zeros(mesh.n_vertices)], axis=-1)
        return cls(mesh, w_hat, TimeProfile("ramp", rate))

    @classmethod
    def simple_shear(cls, mesh: Mesh, rate: float = 1.0) -> "Loads":
        """Horizontal shear ramp: w(t) = rate * t * (y, 0)."""
        w_hat = np.stack([mesh.vertices[:, 1], np.zeros(mesh.n_vertices)], axis=-1)
        return cls(mesh, w_hat, TimeProfile("ramp", rate))

    def w(self, t: float) -> np.ndarray:
        return self.w_profile.value(t) * self.w_hat

    def w_dot(self, t: float) -> np.ndarray:
        return self.w_profile.slope(t) * self.w_hat

    def F(self, t: float) -> np.ndarray:
        return self.f_profile.value(t) * self._f_unit + self.g_profile.value(t) * self._g_unit

    def F_dot(self, t: float) -> np.ndarray:
        return self.f_profile.slope(t) * self._f_unit + self.g_profile.slope(t) * self._g_unit


@dataclass
class State:
    """Solver state: time plus the (u, z, p) triple.

    ``u`` is the full nodal displacement (Dirichlet rows are zero; the
    total displacement is ``u + w(t)``), ``z`` the nodal damage field,
    ``p`` the packed deviatoric plastic strain per element.
    """

    t: float
    u: np.ndarray
    z: np.ndarray
    p: np.ndarray

    def copy(self) -> "State":
        return State(self.t, self.u.copy(), self.z.copy(), self.p.copy())


# ---------------------------------------------------------------------------
# model: mesh + material + loads + cached assembly
# ---------------------------------------------------------------------------


class Model:
    """Everything fixed along a run: discretization and material data.

    Assembles the nonlocal damage matrix once (dense, it is intrinsically
    nonlocal) and precomputes per-element stiffness blocks so that the
    z-dependent operator K(z) is a cheap weighted re-accumulation.
    """

    def __init__(
        self,
        mesh: Mesh,
        params: MaterialParams,
        loads: Loads,
        quad_order: int = 3,
        subdivisions: int = 1,
        nonlocal_matrix: Optional[np.ndarray] = None,
    ):
        self.mesh = mesh
        self.params = params
        self.loads = loads
        if nonlocal_matrix is None:
            nonlocal_matrix = assemble_nonlocal_form(
                mesh, params.m, order=quad_order, subdivisions=subdivisions
            )
        self.A = nonlocal_matrix
        self._build_elastic_blocks()

    # -- assembly ---------------------------------------------------------

    def _build_elastic_blocks(self):
        mesh = self.mesh
        mu, lam = self.params.mu, self.params.lam
        ne = mesh.n_elements

        B = np.zeros((ne, 3, 6))
        B[:, 0, 0::2] = mesh.grad_b
        B[:, 1, 1::2] = mesh.grad_c
        B[:, 2, 0::2] = 0.5 * mesh.grad_c
        B[:, 2, 1::2] = 0.5 * mesh.grad_b
        D = np.array(
            [
                [2.0 * mu + lam, lam, 0.0],
                [lam, 2.0 * mu + lam, 0.0],
                [0.0, 0.0, 4.0 * mu],
            ]
        )
        self._B = B
        self._unit_stiff = mesh.area[:, None, None] * np.einsum(
            "eci,cd,edj->eij", B, D, B
        )
        dofs = np.empty((ne, 6), dtype=int)
        dofs[:, 0::2] = 2 * mesh.triangles
        dofs[:, 1::2] = 2 * mesh.triangles + 1
        self._rows = np.repeat(dofs, 6, axis=1).ravel()
        self._cols = np.tile(dofs, (1, 6)).ravel()
        self._free = mesh.layout.u_free

    def stiffness(self, z: np.ndarray) -> sp.csr_matrix:
        """Global elastic stiffness K(z) on all displacement dofs."""
        v = self.params.V(self.mesh.element_averages(z))
        data = (v[:, None, None] * self._unit_stiff).ravel()
        n = 2 * self.mesh.n_vertices
        return sp.coo_matrix((data, (self._rows, self._cols)), shape=(n, n)).tocsr()

    # -- kinematics / stress ----------------------------------------------

    def strain(self, t: float, u: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Elastic strain e = E(u + w(t)) - p as an (ne, 3) array."""
        e = sym_grad(self.mesh, u + self.loads.w(t))
        e[:, 0] -= p[:, 0]
        e[:, 1] += p[:, 0]
        e[:, 2] -= p[:, 1]
        return e

    def stress(self, z: np.ndarray, e: np.ndarray) -> np.ndarray:
        """Damaged stress V(zbar) C e, component array (ne, 3)."""
        v = self.params.V(self.mesh.element_averages(z))
        mu, lam = self.params.mu, self.params.lam
        tr = e[:, 0] + e[:, 1]
        return np.stack(
            [
                v * (2.0 * mu * e[:, 0] + lam * tr),
                v * (2.0 * mu * e[:, 1] + lam * tr),
                v * (2.0 * mu * e[:, 2]),
            ],
            axis=-1,
        )

    @staticmethod
    def _inner(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1] + 2.0 * a[:, 2] * b[:, 2]

    def elastic_density(self, e: np.ndarray) -> np.ndarray:
        """(C e) : e per element (undamaged)."""
        mu, lam = self.params.mu, self.params.lam
        tr = e[:, 0] + e[:, 1]
        return 2.0 * mu * self._inner(e, e) + lam * tr * tr

    # -- energies -----------------------------------------------------------

    def phi(self, z: np.ndarray) -> float:
        """Damage energy Phi(z) = 1/2 a_m(z, z) + int W(z) (lumped)."""
        return 0.5 * float(z @ (self.A @ z)) + float(
            np.sum(self.mesh.vertex_weight * self.params.W(z))
        )

    def energy(
        self, t: float, u: np.ndarray, z: np.ndarray, p: np.ndarray
    ) -> Dict[str, float]:
        """Energy parts: Q, Phi, external work, and the total E."""
        mesh = self.mesh
        e = self.strain(t, u, p)
        v = self.params.V(mesh.element_averages(z))
        Q = 0.5 * float(np.sum(mesh.area * v * self.elastic_density(e)))
        Phi = 0.5 * float(z @ (self.A @ z)) + float(
            np.sum(mesh.vertex_weight * self.params.W(z))
        )
        total_disp = u + self.loads.w(t)
        work = float(np.sum(self.loads.F(t) * total_disp))
        return {"Q": Q, "Phi": Phi, "work": work, "E": Q + Phi - work}

    def d_t_energy(self, t: float, u: np.ndarray, z: np.ndarray, p: np.ndarray) -> float:
        """Partial time derivative of E at fixed state."""
        mesh = self.mesh
        e = self.strain(t, u, p)
        sig = self.stress(z, e)
        ew = sym_grad(mesh, self.loads.w_dot(t))
        power = float(np.sum(mesh.area * self._inner(sig, ew)))
        total_disp = u + self.loads.w(t)
        power -= float(np.sum(self.loads.F_dot(t) * total_disp))
        power -= float(np.sum(self.loads.F(t) * self.loads.w_dot(t)))
        return power

    # -- momentum -----------------------------------------------------------

    def momentum_system(
        self, t: float, z: np.ndarray, p: np.ndarray
    ) -> Tuple[sp.csr_matrix, np.ndarray]:
        """Full stiffness and right-hand side of the momentum balance.

        The solution of ``K_ff u_f = b_f`` (free rows/columns) minimizes
        ``Q(E(u + w) - p, z) - <F, u>`` over displacements vanishing on the
        Dirichlet set.
        """
        mesh = self.mesh
        K = self.stiffness(z)
        ew = sym_grad(mesh, self.loads.w(t))
        ew[:, 0] -= p[:, 0]
        ew[:, 1] += p[:, 0]
        ew[:, 2] -= p[:, 1]
        sig0 = self.stress(z, ew)  # stress at u = 0
        # internal nodal forces from sig0: sum_T area B^T sig0 (doubled xy)
        s = sig0.copy()
        s[:, 2] *= 2.0
        fe = np.einsum("eci,ec->ei", self._B, s) * mesh.area[:, None]
        b = self.loads.F(t).ravel().copy()
        dofs = np.empty((mesh.n_elements, 6), dtype=int)
        dofs[:, 0::2] = 2 * mesh.triangles
        dofs[:, 1::2] = 2 * mesh.triangles + 1
        np.subtract.at(b, dofs.ravel(), fe.ravel())
        return K, b

    def grad_u_residual(
        self, t: float, u: np.ndarray, z: np.ndarray, p: np.ndarray
    ) -> float:
        """Dual-norm momentum residual sqrt(r^T K^-1 r) on free dofs."""
        K, b = self.momentum_system(t, z, p)
        free = self._free
        r = (K @ u.ravel() - b)[free]
        Kff = K[free][:, free].tocsc()
        x = spla.splu(Kff).solve(r)
        return float(np.sqrt(max(r @ x, 0.0)))

    # -- damage gradient and slopes -----------------------------------------

    def grad_z(self, t: float, u: np.ndarray, z: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Dual vector of D_z E: A z + lumped W'(z) + damage-drive from Q."""
        mesh = self.mesh
        e = self.strain(t, u, p)
        cee = self.elastic_density(e)
        g = self.A @ z + mesh.vertex_weight * self.params.W_prime(z)
        vp = self.params.V_prime(mesh.element_averages(z))
        drive = mesh.area * vp * cee / 6.0  # d zbar / d z_V = 1/3, times 1/2
        np.add.at(g, mesh.triangles.ravel(), np.repeat(drive, 3))
        return g

    def slope_z(self, t: float, u: np.ndarray, z: np.ndarray, p: np.ndarray) -> float:
        """Damage slope d_z (lumped L2 distance of -D_z E to dR(0))."""
        g = self.grad_z(t, u, z, p)
        xi = -g / self.mesh.vertex_weight
        viol = np.minimum(xi + self.params.kappa, 0.0)
        return float(np.sqrt(np.sum(self.mesh.vertex_weight * viol * viol)))

    def slope_p(self, t: float, u: np.ndarray, z: np.ndarray, p: np.ndarray) -> float:
        """Plastic slope d_p (L2 excess of |dev sigma| over the yield radius)."""
        mesh = self.mesh
        e = self.strain(t, u, p)
        sig = self.stress(z, e)
        sd = self._dev_norm(sig)
        ry = self.params.sigma_y(mesh.element_averages(z))
        excess = np.maximum(sd - ry, 0.0)
        return float(np.sqrt(np.sum(mesh.area * excess * excess)))

    @staticmethod
    def _dev_norm(sig: np.ndarray) -> np.ndarray:
        d = 0.5 * (sig[:, 0] - sig[:, 1])
        return np.sqrt(2.0 * (d * d + sig[:, 2] * sig[:, 2]))

    def slopes(self, t, u, z, p) -> Tuple[float, float]:
        return self.slope_z(t, u, z, p), self.slope_p(t, u, z, p)
