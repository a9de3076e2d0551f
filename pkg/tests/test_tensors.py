"""Tensor algebra checks against explicit 2x2 matrix arithmetic.

Every identity is verified by expanding the packed representation to a
dense ``(..., 2, 2)`` numpy matrix and computing with plain matmul/trace,
so the component bookkeeping in ``bvsim.tensors`` never has to be trusted.
"""

import numpy as np
import numpy.testing as npt

from bvsim.tensors import SymTensor2, dev_inner, dev_norm, dev_pack, dev_unpack


def as_matrices(t):
    """Expand a SymTensor2 into a dense (..., 2, 2) array."""
    m = np.empty(t.shape + (2, 2))
    m[..., 0, 0] = t.xx
    m[..., 1, 1] = t.yy
    m[..., 0, 1] = t.xy
    m[..., 1, 0] = t.xy
    return m


def random_tensor(rng, shape=()):
    return SymTensor2(
        rng.standard_normal(shape),
        rng.standard_normal(shape),
        rng.standard_normal(shape),
    )


class TestAlgebra:
    def test_constructors(self):
        z = SymTensor2.zeros((4,))
        assert z.shape == (4,)
        npt.assert_array_equal(as_matrices(z), np.zeros((4, 2, 2)))

        i = SymTensor2.identity((3,))
        npt.assert_array_equal(as_matrices(i), np.broadcast_to(np.eye(2), (3, 2, 2)))

    def test_array_round_trip(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((5, 3))
        npt.assert_array_equal(SymTensor2.from_array(a).to_array(), a)

    def test_linear_ops_match_matrices(self):
        rng = np.random.default_rng(7)
        a = random_tensor(rng, (6,))
        b = random_tensor(rng, (6,))
        c = rng.standard_normal((6,))

        npt.assert_allclose(as_matrices(a + b), as_matrices(a) + as_matrices(b))
        npt.assert_allclose(as_matrices(a - b), as_matrices(a) - as_matrices(b))
        npt.assert_allclose(as_matrices(-a), -as_matrices(a))
        npt.assert_allclose(
            as_matrices(a * c), c[:, None, None] * as_matrices(a)
        )
        # left-multiplication by an ndarray must dispatch to __rmul__, not
        # to numpy broadcasting over an object scalar
        npt.assert_allclose(as_matrices(c * a), as_matrices(a * c))
        npt.assert_allclose(as_matrices(2.5 * a), 2.5 * as_matrices(a))

    def test_copy_is_independent(self):
        a = SymTensor2.identity((2,))
        b = a.copy()
        b.xx[0] = 99.0
        assert a.xx[0] == 1.0

    def test_trace_and_norm(self):
        rng = np.random.default_rng(11)
        a = random_tensor(rng, (8,))
        m = as_matrices(a)
        npt.assert_allclose(a.trace(), np.trace(m, axis1=-2, axis2=-1))
        npt.assert_allclose(a.norm(), np.linalg.norm(m, axis=(-2, -1)))

    def test_inner_is_frobenius(self):
        # A:B must equal sum_ij A_ij B_ij of the full matrices, i.e. the
        # off-diagonal really counts twice.
        rng = np.random.default_rng(13)
        a = random_tensor(rng, (8,))
        b = random_tensor(rng, (8,))
        frob = np.sum(as_matrices(a) * as_matrices(b), axis=(-2, -1))
        npt.assert_allclose(a.inner(b), frob, rtol=1e-14)
        npt.assert_allclose(a.inner(b), b.inner(a), rtol=1e-14)


class TestDeviatoric:
    def test_dev_removes_trace(self):
        rng = np.random.default_rng(17)
        a = random_tensor(rng, (10,))
        npt.assert_allclose(a.dev().trace(), 0.0, atol=1e-15)

    def test_dev_is_projection(self):
        # idempotent to round-off (the second pass subtracts a ~1e-17 trace)
        rng = np.random.default_rng(19)
        a = random_tensor(rng, (10,))
        d = a.dev()
        npt.assert_allclose(d.dev().to_array(), d.to_array(), atol=1e-15)

    def test_dev_self_adjoint(self):
        # <dev A, B> = <A, dev B>: dev is an orthogonal projection under
        # the Frobenius product, exactly (same floating-point operations).
        rng = np.random.default_rng(23)
        a = random_tensor(rng, (16,))
        b = random_tensor(rng, (16,))
        npt.assert_allclose(a.dev().inner(b), a.inner(b.dev()), rtol=1e-14)


class TestPackedFields:
    def test_pack_unpack_round_trip(self):
        rng = np.random.default_rng(29)
        packed = rng.standard_normal((7, 2))
        back = dev_pack(dev_unpack(packed))
        npt.assert_allclose(back, packed, rtol=1e-15)

    def test_unpack_gives_trace_free_symmetric(self):
        rng = np.random.default_rng(31)
        t = dev_unpack(rng.standard_normal((5, 2)))
        npt.assert_array_equal(t.trace(), np.zeros(5))
        m = as_matrices(t)
        npt.assert_array_equal(m, np.swapaxes(m, -1, -2))

    def test_pack_of_general_tensor_keeps_deviator(self):
        rng = np.random.default_rng(37)
        a = random_tensor(rng, (9,))
        packed = dev_pack(a)
        npt.assert_allclose(
            as_matrices(dev_unpack(packed)), as_matrices(a.dev()), rtol=1e-14
        )

    def test_dev_norm_matches_frobenius(self):
        rng = np.random.default_rng(41)
        packed = rng.standard_normal((12, 2))
        full = np.linalg.norm(as_matrices(dev_unpack(packed)), axis=(-2, -1))
        npt.assert_allclose(dev_norm(packed), full, rtol=1e-14)

    def test_dev_inner_matches_full_contraction(self):
        rng = np.random.default_rng(43)
        pa = rng.standard_normal((12, 2))
        pb = rng.standard_normal((12, 2))
        full = np.sum(
            as_matrices(dev_unpack(pa)) * as_matrices(dev_unpack(pb)), axis=(-2, -1)
        )
        npt.assert_allclose(dev_inner(pa, pb), full, rtol=1e-14)
        npt.assert_allclose(dev_norm(pa) ** 2, dev_inner(pa, pa), rtol=1e-14)
