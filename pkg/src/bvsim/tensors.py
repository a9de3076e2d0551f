"""
Symmetric 2x2 tensors
=====================

Small-strain kinematics in two dimensions only ever needs symmetric 2x2
tensors (strain, stress, plastic strain).  A ``SymTensor2`` stores the three
independent components ``xx``, ``yy``, ``xy`` as numpy arrays so a single
instance can carry one tensor per element / quadrature point.

The Frobenius inner product ``A:B = A_xx B_xx + A_yy B_yy + 2 A_xy B_xy``
counts the off-diagonal component twice; all norms and contractions below
use that convention.

Deviatoric (trace-free) fields such as the plastic strain are stored in a
packed two-component form ``(d, s)`` meaning ``[[d, s], [s, -d]]``; helpers
to pack/unpack are provided at the bottom of the module.
"""

from typing import Tuple

import numpy as np

__all__ = [
    "SymTensor2",
    "dev_pack",
    "dev_unpack",
    "dev_norm",
    "dev_inner",
]


class SymTensor2:
    """Symmetric 2x2 tensor with array-valued components.

    Parameters
    ----------
    xx, yy, xy : array_like
        Component arrays of identical (broadcastable) shape.  Scalars are
        accepted, so ``SymTensor2(1.0, 1.0, 0.0)`` is the identity.
    """

    __slots__ = ("xx", "yy", "xy")

    # Without this, ``ndarray * SymTensor2`` is claimed by numpy's __mul__
    # and silently builds an object array; None makes numpy defer to our
    # __rmul__ instead.
    __array_ufunc__ = None

    def __init__(self, xx, yy, xy):
        self.xx = np.asarray(xx, dtype=float)
        self.yy = np.asarray(yy, dtype=float)
        self.xy = np.asarray(xy, dtype=float)

    # -- constructors ------------------------------------------------------

    @classmethod
    def zeros(cls, shape=()) -> "SymTensor2":
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(shape))

    @classmethod
    def identity(cls, shape=()) -> "SymTensor2":
        return cls(np.ones(shape), np.ones(shape), np.zeros(shape))

    @classmethod
    def from_array(cls, a: np.ndarray) -> "SymTensor2":
        """Build from an ``(..., 3)`` array ordered ``[xx, yy, xy]``."""
        a = np.asarray(a, dtype=float)
        return cls(a[..., 0], a[..., 1], a[..., 2])

    def to_array(self) -> np.ndarray:
        return np.stack([self.xx, self.yy, self.xy], axis=-1)

    # -- algebra -----------------------------------------------------------

    def __add__(self, other: "SymTensor2") -> "SymTensor2":
        return SymTensor2(self.xx + other.xx, self.yy + other.yy, self.xy + other.xy)

    def __sub__(self, other: "SymTensor2") -> "SymTensor2":
        return SymTensor2(self.xx - other.xx, self.yy - other.yy, self.xy - other.xy)

    def __mul__(self, c) -> "SymTensor2":
        c = np.asarray(c, dtype=float)
        return SymTensor2(c * self.xx, c * self.yy, c * self.xy)

    __rmul__ = __mul__

    def __neg__(self) -> "SymTensor2":
        return SymTensor2(-self.xx, -self.yy, -self.xy)

    def trace(self) -> np.ndarray:
        return self.xx + self.yy

    def dev(self) -> "SymTensor2":
        """Deviatoric part ``A - tr(A)/2 I`` (trace-free in 2d)."""
        h = 0.5 * self.trace()
        return SymTensor2(self.xx - h, self.yy - h, self.xy)

    def inner(self, other: "SymTensor2") -> np.ndarray:
        """Frobenius contraction ``A:B`` with the 2*xy convention."""
        return (
            self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy
        )

    def norm(self) -> np.ndarray:
        return np.sqrt(self.inner(self))

    def copy(self) -> "SymTensor2":
        return SymTensor2(self.xx.copy(), self.yy.copy(), self.xy.copy())

    @property
    def shape(self) -> Tuple[int, ...]:
        return np.broadcast(self.xx, self.yy, self.xy).shape

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return "SymTensor2(xx=%r, yy=%r, xy=%r)" % (self.xx, self.yy, self.xy)


# ---------------------------------------------------------------------------
# Packed deviatoric fields
# ---------------------------------------------------------------------------
#
# A trace-free symmetric tensor [[d, s], [s, -d]] is stored as the pair
# (d, s) in an (..., 2) array.  Frobenius norm: |A|^2 = 2 d^2 + 2 s^2.


def dev_pack(t: SymTensor2) -> np.ndarray:
    """Pack a (numerically) trace-free tensor into ``(..., 2)`` components."""
    return np.stack([0.5 * (t.xx - t.yy), t.xy], axis=-1)


def dev_unpack(a: np.ndarray) -> SymTensor2:
    """Expand packed deviatoric components back to a full tensor."""
    a = np.asarray(a, dtype=float)
    return SymTensor2(a[..., 0], -a[..., 0], a[..., 1])


def dev_norm(a: np.ndarray) -> np.ndarray:
    """Frobenius norm of a packed deviatoric field."""
    a = np.asarray(a, dtype=float)
    return np.sqrt(2.0 * (a[..., 0] ** 2 + a[..., 1] ** 2))


def dev_inner(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Frobenius contraction of two packed deviatoric fields."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return 2.0 * (a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1])
