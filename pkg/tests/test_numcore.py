import math

import numpy as np
import pytest

from sstgcn import numcore as nc
from sstgcn.numcore import (
    GradientError,
    NumericError,
    ShapeError,
    Tape,
    Tensor,
    activation,
    add_rowvec,
    backward,
    concat_cols,
    grad_check,
    matmul,
    slice_cols,
)


def rand(rng, rows, cols, requires_grad=False):
    return Tensor(rng.standard_normal((rows, cols)), requires_grad=requires_grad)


class TestMatmul:
    def test_identity(self):
        m = Tensor([[2.0, -1.0], [0.5, 3.0]])
        out = matmul(Tensor(np.eye(2)), m)
        np.testing.assert_array_equal(out.data, m.data)

    def test_hand_product(self):
        out = matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[1.0], [1.0]]))
        np.testing.assert_array_equal(out.data, [[3.0], [7.0]])

    def test_shape_error_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
            matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 2))))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        b = Tensor(rng.standard_normal((4, 3)))
        a = rand(rng, 3, 4, requires_grad=True)
        err = grad_check(lambda t: matmul(t, b).sum(), a)
        assert err < 1e-6

    def test_gradient_wrt_right_operand(self):
        rng = np.random.default_rng(8)
        a = Tensor(rng.standard_normal((3, 4)))
        b = rand(rng, 4, 2, requires_grad=True)
        err = grad_check(lambda t: matmul(a, t).sum(), b)
        assert err < 1e-6


class TestActivations:
    def test_sigmoid_at_zero(self):
        assert activation(Tensor([[0.0]]), "sigmoid").item() == 0.5

    def test_softmax_uniform(self):
        out = activation(Tensor([[0.0, 0.0, 0.0]]), "softmax_rows")
        np.testing.assert_allclose(out.data, [[1 / 3, 1 / 3, 1 / 3]], atol=1e-15)

    def test_prelu_hand_value(self):
        alpha = Tensor([[0.25]], requires_grad=True)
        out = activation(Tensor([[-2.0]]), "prelu", alpha=alpha)
        assert out.item() == -0.5

    def test_prelu_alpha_one_is_identity(self):
        rng = np.random.default_rng(0)
        x = Tensor(rng.standard_normal((3, 5)))
        out = x.prelu(Tensor([[1.0]]))
        np.testing.assert_array_equal(out.data, x.data)

    def test_prelu_alpha_zero_is_relu(self):
        rng = np.random.default_rng(1)
        x = Tensor(rng.standard_normal((3, 5)))
        np.testing.assert_array_equal(x.prelu(Tensor([[0.0]])).data, x.relu().data)

    def test_softmax_rows_sum_to_one_and_stay_finite(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            x = Tensor(rng.uniform(-1e3, 1e3, (4, 6)))
            y = x.softmax_rows()
            assert np.all(np.isfinite(y.data))
            np.testing.assert_allclose(y.data.sum(axis=1), np.ones(4), atol=1e-12)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown activation"):
            activation(Tensor([[0.0]]), "gelu")

    @pytest.mark.parametrize("kind", ["sigmoid", "tanh", "relu"])
    def test_elementwise_gradients(self, kind):
        rng = np.random.default_rng(3)
        x = rand(rng, 3, 3, requires_grad=True)
        err = grad_check(lambda t: activation(t, kind).sum(), x)
        assert err < 1e-6

    def test_prelu_gradients_both_inputs(self):
        rng = np.random.default_rng(4)
        x = rand(rng, 4, 4, requires_grad=True)
        alpha = Tensor([[0.25]], requires_grad=True)
        assert grad_check(lambda t: t.prelu(alpha).sum(), x) < 1e-6
        assert grad_check(lambda a: (x.prelu(a) * x).sum(), alpha) < 1e-6

    def test_softmax_gradient(self):
        rng = np.random.default_rng(5)
        x = rand(rng, 2, 5, requires_grad=True)
        w = Tensor(rng.standard_normal((2, 5)))
        err = grad_check(lambda t: (t.softmax_rows() * w).sum(), x)
        assert err < 1e-6


class TestConcatSlice:
    def test_concat_shape(self):
        out = concat_cols(Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 3))))
        assert out.shape == (1, 5)

    def test_concat_then_slice_roundtrips(self):
        rng = np.random.default_rng(6)
        a = Tensor(rng.standard_normal((3, 2)))
        b = Tensor(rng.standard_normal((3, 4)))
        cat = concat_cols(a, b)
        np.testing.assert_array_equal(slice_cols(cat, 0, 2).data, a.data)
        np.testing.assert_array_equal(slice_cols(cat, 2, 6).data, b.data)

    def test_row_mismatch(self):
        with pytest.raises(ShapeError, match="row counts differ"):
            concat_cols(Tensor(np.zeros((1, 2))), Tensor(np.zeros((2, 2))))

    def test_gradient_routes_to_correct_halves(self):
        rng = np.random.default_rng(7)
        wa = Tensor(rng.standard_normal((2, 2)))
        wb = Tensor(rng.standard_normal((2, 3)))
        a = rand(rng, 2, 2, requires_grad=True)
        b = rand(rng, 2, 3, requires_grad=True)
        assert grad_check(lambda t: (concat_cols(t, b) * concat_cols(wa, wb)).sum(), a) < 1e-6
        assert grad_check(lambda t: (concat_cols(a, t) * concat_cols(wa, wb)).sum(), b) < 1e-6

    def test_slice_gradient(self):
        rng = np.random.default_rng(8)
        x = rand(rng, 3, 6, requires_grad=True)
        assert grad_check(lambda t: (slice_cols(t, 1, 4) * 2.0).sum(), x) < 1e-6


class TestAddRowvec:
    def test_broadcast_over_rows(self):
        x = Tensor(np.zeros((3, 2)))
        b = Tensor([[1.0, -1.0]])
        np.testing.assert_array_equal(
            add_rowvec(x, b).data, [[1.0, -1.0]] * 3
        )

    def test_bias_gradient_sums_over_rows(self):
        rng = np.random.default_rng(9)
        x = Tensor(rng.standard_normal((4, 3)))
        b = rand(rng, 1, 3, requires_grad=True)
        assert grad_check(lambda t: add_rowvec(x, t).sum(), b) < 1e-6

    def test_shape_error(self):
        with pytest.raises(ShapeError, match="does not broadcast"):
            add_rowvec(Tensor(np.zeros((3, 2))), Tensor(np.zeros((1, 3))))


class TestBackward:
    def test_sum_gives_ones(self):
        w = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        with Tape():
            loss = w.sum()
        backward(loss)
        np.testing.assert_array_equal(w.grad, np.ones((2, 3)))

    def test_square_hand_calculus(self):
        w = Tensor([[3.0]], requires_grad=True)
        with Tape():
            loss = (w * w).sum()
        backward(loss)
        assert w.grad[0, 0] == 6.0

    def test_non_scalar_loss_rejected(self):
        w = Tensor(np.zeros((2, 2)), requires_grad=True)
        with Tape():
            out = w * 2.0
        with pytest.raises(GradientError, match="1x1"):
            backward(out)

    def test_off_tape_loss_rejected(self):
        w = Tensor([[1.0]], requires_grad=True)
        loss = w.sum()  # no tape active
        with pytest.raises(GradientError, match="Tape"):
            backward(loss)

    def test_requires_grad_false_never_accumulates(self):
        w = Tensor([[2.0]], requires_grad=True)
        c = Tensor([[5.0]])
        with Tape():
            loss = (w * c).sum()
        backward(loss)
        assert c.grad is None
        assert w.grad[0, 0] == 5.0

    def test_unreachable_tensor_holds_zero(self):
        w = Tensor([[1.0]], requires_grad=True)
        u = Tensor([[1.0]], requires_grad=True)
        with Tape():
            _ = u * 3.0  # recorded but not part of the loss
            loss = (w * 2.0).sum()
        backward(loss)
        np.testing.assert_array_equal(u.grad, [[0.0]])

    def test_repeated_backward_bit_identical(self):
        rng = np.random.default_rng(10)
        w = rand(rng, 4, 4, requires_grad=True)
        x = Tensor(rng.standard_normal((4, 4)))
        with Tape():
            loss = (matmul(w, x).sigmoid() * matmul(x, w).tanh()).sum()
        backward(loss)
        first = w.grad.copy()
        backward(loss)
        assert np.array_equal(first, w.grad)

    def test_reuse_accumulates_within_one_pass(self):
        w = Tensor([[2.0]], requires_grad=True)
        with Tape():
            loss = (w * w * w).sum()  # d/dw w^3 = 3 w^2
        backward(loss)
        assert w.grad[0, 0] == pytest.approx(12.0)


class TestGradCheck:
    def test_identity_sum_is_exact(self):
        # Error floor is |f|·eps_mach/(2·eps) from the central difference.
        theta = Tensor(np.arange(4.0).reshape(2, 2), requires_grad=True)
        assert grad_check(lambda t: t.sum(), theta) < 1e-9

    def test_sigmoid_matmul_chain(self):
        rng = np.random.default_rng(11)
        m = Tensor(rng.standard_normal((3, 3)))
        theta = rand(rng, 3, 3, requires_grad=True)
        assert grad_check(lambda t: matmul(t, m).sigmoid().sum(), theta) < 1e-6

    def test_composite_ops_at_random_points(self):
        # Chain-rule property: every composite used by the model checks out.
        rng = np.random.default_rng(12)
        m = Tensor(rng.standard_normal((3, 3)))
        b = Tensor(rng.standard_normal((1, 3)))

        def f(t):
            h = add_rowvec(matmul(t, m), b).tanh()
            p = h.softmax_rows()
            return (concat_cols(h, p).sigmoid() * 0.5).sum()

        for _ in range(100):
            theta = rand(rng, 2, 3, requires_grad=True)
            assert grad_check(f, theta) < 1e-4

    def test_needs_requires_grad(self):
        with pytest.raises(GradientError):
            grad_check(lambda t: t.sum(), Tensor([[1.0]]))

    def test_nonfinite_raises(self):
        theta = Tensor([[-1.0]], requires_grad=True)
        with pytest.raises(NumericError):
            grad_check(lambda t: t.log().sum(), theta)


class TestTensorBasics:
    def test_rank_checks(self):
        assert Tensor(3.0).shape == (1, 1)
        assert Tensor([1.0, 2.0]).shape == (1, 2)
        with pytest.raises(ShapeError):
            Tensor(np.zeros((2, 2, 2)))

    def test_elementwise_shape_mismatch(self):
        with pytest.raises(ShapeError):
            Tensor(np.zeros((2, 2))) + Tensor(np.zeros((2, 3)))

    def test_scalar_arithmetic(self):
        x = Tensor([[2.0]])
        assert (1.0 - x).item() == -1.0
        assert (x * 3.0).item() == 6.0
        assert (-x).item() == -2.0

    def test_clip_gradient_masks_boundaries(self):
        x = Tensor([[0.5, 2.0, -2.0]], requires_grad=True)
        with Tape():
            loss = x.clip(0.0, 1.0).sum()
        backward(loss)
        np.testing.assert_array_equal(x.grad, [[1.0, 0.0, 0.0]])

    def test_nothing_recorded_outside_tape(self):
        w = Tensor([[1.0]], requires_grad=True)
        out = w * 2.0
        assert out.tape is None and not out.requires_grad

    def test_log_matches_math(self):
        x = Tensor([[math.e]])
        assert x.log().item() == pytest.approx(1.0)
