"""
Constitutive laws
=================

Concrete material functions for the damage/plasticity model:

* degradation        V(z) = delta_V + z^2            (elastic stiffness scale)
* damage potential   W(z) = w_quad (z-1)^2 + w_sing z^(-5)
* yield radius       sigma_y(z) = r + (R - r) clamp(z, 0, 1)
* elasticity         C(z) e = V(z) (2 mu e + lambda tr(e) I)

Dissipation potentials:

* damage (unidirectional, rate-independent):
      R(eta) = kappa int |eta|   if eta <= 0,   +inf otherwise
* plasticity (von Mises, damage-weighted):
      H(z, pi) = sum_T area_T sigma_y(zbar_T) |pi_T|

with ``zbar_T`` the element average of the nodal damage field.  Both are
positively 1-homogeneous; H is Lipschitz in z with constant
``C_K = R - r`` (times the plastic-rate mass), which is what makes the
plastic dissipation stable under damage evolution.

All nodal integrals are lumped (vertex weights), all element integrals are
exact for piecewise constants; see :mod:`bvsim.mesh`.
"""

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh
from .tensors import SymTensor2, dev_norm

__all__ = [
    "MaterialParams",
    "elastic_apply",
    "elastic_tensor_eigenvalues",
    "dissipation_R",
    "dissipation_H",
    "project_K",
    "subdiff_R_at_zero_projection",
    "W_curvature_bound",
]

#: components of a violation of z-monotonicity larger than this are treated
#: as genuine sign errors rather than roundoff
TOL_UNIDIR = 1.0e-12


@dataclass(frozen=True)
class MaterialParams:
    """Material constants.  Defaults are the reference-scenario values."""

    mu: float = 1.0
    lam: float = 1.0
    delta_V: float = 0.1
    kappa: float = 0.5
    r_bar: float = 0.6
    R_bar: float = 1.2
    w_quad: float = 1.0
    w_sing: float = 0.05
    m: float = 1.5

    def __post_init__(self):
        if self.delta_V <= 0 or self.mu <= 0:
            raise ValueError("need mu > 0 and delta_V > 0")
        if not (0 < self.r_bar <= self.R_bar):
            raise ValueError("need 0 < r_bar <= R_bar")
        if not (1.0 < self.m < 2.0):
            raise ValueError("m must lie in (1, 2)")

    # -- damage functions ------------------------------------------------

    def V(self, z):
        return self.delta_V + np.square(z)

    def V_prime(self, z):
        return 2.0 * np.asarray(z, dtype=float)

    def W(self, z):
        z = np.asarray(z, dtype=float)
        return self.w_quad * (z - 1.0) ** 2 + self.w_sing * z ** (-5.0)

    def W_prime(self, z):
        z = np.asarray(z, dtype=float)
        return 2.0 * self.w_quad * (z - 1.0) - 5.0 * self.w_sing * z ** (-6.0)

    def W_second(self, z):
        z = np.asarray(z, dtype=float)
        return 2.0 * self.w_quad + 30.0 * self.w_sing * z ** (-7.0)

    def sigma_y(self, z):
        return self.r_bar + (self.R_bar - self.r_bar) * np.clip(z, 0.0, 1.0)

    @property
    def C_K(self) -> float:
        """Lipschitz constant of sigma_y (and hence of H) in z."""
        return self.R_bar - self.r_bar


def elastic_apply(params: MaterialParams, z, e: SymTensor2) -> SymTensor2:
    """Damaged stress ``sigma = V(z) (2 mu e + lambda tr(e) I)``.

    ``z`` is broadcast against the components of ``e``; pass element
    averages for P0 strain fields.
    """
    v = params.V(z)
    tr = e.trace()
    return SymTensor2(
        v * (2.0 * params.mu * e.xx + params.lam * tr),
        v * (2.0 * params.mu * e.yy + params.lam * tr),
        v * 2.0 * params.mu * e.xy,
    )


def elastic_tensor_eigenvalues(params: MaterialParams):
    """Extreme eigenvalues of the undamaged isotropic tensor.

    Computed numerically from the action on the 3-dimensional space of
    symmetric tensors (Frobenius metric) rather than hardcoded: the matrix
    of ``e -> 2 mu e + lambda tr(e) I`` in an orthonormal component basis.
    """
    basis = [
        SymTensor2(1.0, 0.0, 0.0),
        SymTensor2(0.0, 1.0, 0.0),
        SymTensor2(0.0, 0.0, np.sqrt(0.5)),  # unit Frobenius norm
    ]
    M = np.empty((3, 3))
    for j, b in enumerate(basis):
        tr = b.trace()
        cb = SymTensor2(
            2.0 * params.mu * b.xx + params.lam * tr,
            2.0 * params.mu * b.yy + params.lam * tr,
            2.0 * params.mu * b.xy,
        )
        for i, a in enumerate(basis):
            M[i, j] = a.inner(cb)
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    return float(w[0]), float(w[-1])


def dissipation_R(params: MaterialParams, mesh: Mesh, eta: np.ndarray) -> float:
    """Unidirectional damage dissipation of a nodal increment field.

    Returns ``kappa * ||eta||_L1`` (lumped) when ``eta <= 0`` up to the
    roundoff sentinel, ``+inf`` otherwise.
    """
    eta = np.asarray(eta, dtype=float)
    if np.any(eta > TOL_UNIDIR):
        return float("inf")
    return params.kappa * mesh.z_l1(eta)


def dissipation_H(
    params: MaterialParams, mesh: Mesh, z: np.ndarray, dp: np.ndarray
) -> float:
    """Plastic dissipation ``sum_T area_T sigma_y(zbar_T) |dp_T|``.

    ``dp`` is a packed deviatoric P0 increment, ``z`` the nodal damage
    field from which element averages are taken.
    """
    zbar = mesh.element_averages(np.asarray(z, dtype=float))
    return float(np.sum(mesh.area * params.sigma_y(zbar) * dev_norm(dp)))


def project_K(params: MaterialParams, zbar, sigma: SymTensor2) -> SymTensor2:
    """Project stresses onto the elastic domain ``|dev sigma| <= sigma_y(zbar)``.

    Acts radially on the deviatoric part and leaves the spherical part
    untouched; nonexpansive in the Frobenius norm.
    """
    ry = params.sigma_y(zbar)
    d = sigma.dev()
    nrm = d.norm()
    scale = np.where(nrm > ry, np.divide(ry, nrm, out=np.ones_like(nrm), where=nrm > 0), 1.0)
    h = 0.5 * sigma.trace()
    return SymTensor2(h + scale * d.xx, h + scale * d.yy, scale * d.xy)


def subdiff_R_at_zero_projection(
    params: MaterialParams, xi: np.ndarray
) -> np.ndarray:
    """Pointwise projection onto the subdifferential of R at zero.

    For the unidirectional potential, ``dR(0)`` is the set of nodal fields
    bounded below by ``-kappa``; the projection is ``max(xi, -kappa)``.
    The lumped L2 distance to this set is the damage slope ``d_z``.
    """
    return np.maximum(np.asarray(xi, dtype=float), -params.kappa)


def W_curvature_bound(params: MaterialParams, z_min: float, n_grid: int = 2048) -> float:
    """Upper bound for W'' on ``[z_min, 1]`` by fine-grid evaluation.

    W'' is monotone decreasing, so the grid maximum (which includes the
    left endpoint) is exact; the grid keeps the bound honest if the
    potential is ever swapped for a non-monotone one.
    """
    if z_min <= 0:
        raise ValueError("z_min must be positive")
    zs = np.linspace(z_min, 1.0, n_grid)
    return float(np.max(params.W_second(zs)))
