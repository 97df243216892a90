"""Flat parameter-vector arithmetic and shape-identity guards."""

import numpy as np
import pytest

from fedsim.errors import ShapeMismatchError
from fedsim.params import ParamVector, mean_of, stack, zeros_like


def vec(values, shape_id="mlp:2-2:tanh"):
    return ParamVector(np.asarray(values, dtype=np.float64), shape_id)


class TestConstruction:
    def test_values_are_float64_and_contiguous(self):
        v = vec([1, 2, 3])
        assert v.values.dtype == np.float64
        assert v.values.flags["C_CONTIGUOUS"]

    def test_rejects_non_finite(self):
        with pytest.raises(ShapeMismatchError):
            vec([1.0, np.nan])
        with pytest.raises(ShapeMismatchError):
            vec([np.inf, 0.0])

    def test_rejects_matrix_input(self):
        with pytest.raises(ShapeMismatchError):
            ParamVector(np.zeros((2, 2)), "mlp:2-2:tanh")


class TestArithmetic:
    def test_add_sub_scale_neg(self):
        a, b = vec([1.0, 2.0]), vec([10.0, 20.0])
        assert np.array_equal((a + b).values, [11.0, 22.0])
        assert np.array_equal((b - a).values, [9.0, 18.0])
        assert np.array_equal((a * 3.0).values, [3.0, 6.0])
        assert np.array_equal((-a).values, [-1.0, -2.0])

    def test_shape_id_mismatch_rejected(self):
        a = vec([1.0, 2.0], "mlp:2-2:tanh")
        b = vec([1.0, 2.0], "mlp:2-2:relu")
        with pytest.raises(ShapeMismatchError):
            a + b
        with pytest.raises(ShapeMismatchError):
            a.distance(b)

    def test_length_mismatch_rejected(self):
        a = vec([1.0, 2.0])
        b = vec([1.0, 2.0, 3.0])
        with pytest.raises(ShapeMismatchError):
            a + b

    def test_norm_and_distance(self):
        a, b = vec([3.0, 4.0]), vec([0.0, 0.0])
        assert a.norm() == 5.0
        assert a.distance(b) == 5.0
        assert b.distance(a) == 5.0

    def test_copy_is_independent(self):
        a = vec([1.0, 2.0])
        c = a.copy()
        c.values[0] = 99.0
        assert a.values[0] == 1.0


class TestHelpers:
    def test_zeros_like(self):
        z = zeros_like(vec([5.0, 6.0, 7.0]))
        assert np.array_equal(z.values, [0.0, 0.0, 0.0])
        assert z.shape_id == "mlp:2-2:tanh"

    def test_stack_shape_and_order(self):
        rows = stack([vec([1.0, 2.0]), vec([3.0, 4.0])])
        assert rows.shape == (2, 2)
        assert np.array_equal(rows, [[1.0, 2.0], [3.0, 4.0]])

    def test_stack_rejects_mixed_shapes(self):
        with pytest.raises(ShapeMismatchError):
            stack([vec([1.0, 2.0]), vec([1.0, 2.0], "mlp:9-9:tanh")])

    def test_mean_of(self):
        m = mean_of([vec([1.0, 2.0]), vec([3.0, 4.0])])
        assert np.array_equal(m.values, [2.0, 3.0])

    def test_mean_of_opposites_is_zero(self):
        u = vec([1.5, -2.5])
        m = mean_of([u, -u])
        assert np.array_equal(m.values, [0.0, 0.0])

    def test_mean_of_empty_rejected(self):
        with pytest.raises(ShapeMismatchError):
            mean_of([])
