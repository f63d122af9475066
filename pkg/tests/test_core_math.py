import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tert.core import (
    AdamState,
    ShapeError,
    Tape,
    TapeConsumedError,
    Tensor,
    adam_step,
    backward,
    dropout,
    grad_check,
)
from tert.core import tensor as T


def rand(shape, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return (rng.standard_normal(shape) * scale).astype(np.float32)


class TestForwardOps:
    def test_softmax_symmetry(self):
        out = T.softmax(Tensor([0.0, 0.0, 0.0]))
        np.testing.assert_allclose(out.data, [1 / 3] * 3, atol=1e-7)

    def test_softmax_shift_invariance(self):
        x = rand((5, 7), seed=1)
        a = T.softmax(Tensor(x)).data
        b = T.softmax(Tensor(x + 100.0)).data
        np.testing.assert_allclose(a, b, atol=1e-5)

    def test_softmax_rows_sum_to_one(self):
        x = rand((8, 16), seed=2, scale=5.0)
        out = T.softmax(Tensor(x)).data
        np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-6)
        assert (out > 0).all() and (out <= 1).all()

    def test_matmul_identity(self):
        a = rand((3, 3), seed=3)
        out = T.matmul(Tensor(np.eye(3, dtype=np.float32)), Tensor(a))
        np.testing.assert_allclose(out.data, a, atol=1e-7)

    def test_matmul_shape_error_names_shapes(self):
        with pytest.raises(ShapeError, match="matmul"):
            T.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))

    def test_nan_input_rejected(self):
        bad = np.array([1.0, np.nan], dtype=np.float32)
        with pytest.raises(T.NonFiniteError):
            T.add(Tensor(bad), Tensor([1.0, 1.0]))

    def test_dropout_eval_is_identity(self):
        x = Tensor(rand((4, 9), seed=4))
        out = dropout(x, 0.5, key=(1, 2, 3), training=False)
        assert out is x

    def test_dropout_reproducible_from_key(self):
        x = Tensor(np.ones((64,), dtype=np.float32), requires_grad=False)
        a = dropout(x, 0.3, key=(7, 1, 5), training=True).data
        b = dropout(x, 0.3, key=(7, 1, 5), training=True).data
        c = dropout(x, 0.3, key=(7, 1, 6), training=True).data
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)


class TestBackward:
    def test_linear_regression_analytic_gradient(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(32).astype(np.float32)
        y = rng.standard_normal(32).astype(np.float32)
        w = Tensor(np.array([0.7], dtype=np.float32), requires_grad=True)
        with Tape() as tape:
            pred = T.mul(w, Tensor(x))
            loss = T.tmean(T.square(T.sub(pred, Tensor(y))))
        backward(tape, loss)
        expected = 2.0 * np.mean((0.7 * x - y) * x)
        np.testing.assert_allclose(w.grad[0], expected, atol=1e-6)

    def test_softmax_pick_matches_jacobian(self):
        x = Tensor(rand((5,), seed=6), requires_grad=True)
        with Tape() as tape:
            s = T.softmax(x)
            loss = T.tsum(T.take(s, [2], axis=0))
        backward(tape, loss)
        # d softmax_i / d x_j = s_i (delta_ij - s_j)
        s = T.softmax(Tensor(x.data)).data
        expected = s[2] * (np.eye(5)[2] - s)
        np.testing.assert_allclose(x.grad, expected, atol=1e-6)
        # and against central differences
        err = grad_check(lambda t: T.take(T.softmax(t), [2], axis=0), Tensor(x.data), eps=1e-5)
        assert err <= 1e-6

    def test_constant_branch_gets_zero_gradient(self):
        w = Tensor(np.ones(3, dtype=np.float32), requires_grad=True)
        unused = Tensor(np.ones(3, dtype=np.float32), requires_grad=True)
        with Tape() as tape:
            loss = T.tsum(T.square(w))
        backward(tape, loss)
        assert unused.grad is None
        np.testing.assert_array_equal(unused.grad_or_zero(), np.zeros(3, dtype=np.float32))

    def test_non_scalar_loss_rejected(self):
        x = Tensor(np.ones(3, dtype=np.float32), requires_grad=True)
        with Tape() as tape:
            y = T.square(x)
        with pytest.raises(ShapeError):
            backward(tape, y)

    def test_tape_single_use(self):
        x = Tensor(np.ones(3, dtype=np.float32), requires_grad=True)
        with Tape() as tape:
            loss = T.tsum(T.square(x))
        backward(tape, loss)
        with pytest.raises(TapeConsumedError):
            backward(tape, loss)

    def test_fan_out_accumulates(self):
        x = Tensor(np.array([2.0], dtype=np.float32), requires_grad=True)
        with Tape() as tape:
            loss = T.tsum(T.add(T.square(x), T.mul(x, 3.0)))
        backward(tape, loss)
        np.testing.assert_allclose(x.grad, [2 * 2.0 + 3.0], atol=1e-6)


class TestAdam:
    def test_zero_grad_leaves_params(self):
        p = {"w": Tensor(np.ones(4, dtype=np.float32), requires_grad=True)}
        st_ = AdamState(p)
        before = p["w"].data.copy()
        adam_step(p, {"w": np.zeros(4, dtype=np.float32)}, st_, lr=1e-3)
        np.testing.assert_array_equal(p["w"].data, before)
        assert st_.step == 1

    def test_first_step_is_signlike(self):
        # hand evaluation: step 1, g=0.5 -> m_hat=0.5, v_hat=0.25, update=lr*g/(|g|+eps)
        p = {"w": Tensor(np.array([1.0], dtype=np.float32), requires_grad=True)}
        st_ = AdamState(p)
        adam_step(p, {"w": np.array([0.5], dtype=np.float32)}, st_, lr=0.01)
        np.testing.assert_allclose(p["w"].data, [1.0 - 0.01], atol=1e-6)

    def test_deterministic(self):
        def run():
            p = {"w": Tensor(rand((8,), seed=9), requires_grad=True)}
            st_ = AdamState(p)
            for i in range(5):
                adam_step(p, {"w": rand((8,), seed=10 + i)}, st_, lr=3e-4)
            return p["w"].data

    # bit-identical across two runs
        a, b = run(), run()
        np.testing.assert_array_equal(a, b)

    def test_shape_mismatch_rejected(self):
        p = {"w": Tensor(np.ones(4, dtype=np.float32), requires_grad=True)}
        st_ = AdamState(p)
        with pytest.raises(ShapeError):
            adam_step(p, {"w": np.zeros(3, dtype=np.float32)}, st_, lr=1e-3)


class TestGradCheck:
    def test_quadratic_exact(self):
        err = grad_check(lambda t: T.tsum(T.square(t)), Tensor(rand((6,), seed=11)))
        assert err <= 1e-6

    @pytest.mark.parametrize(
        "fn",
        [
            lambda t: T.tsum(T.elu(t)),
            lambda t: T.tsum(T.exp(T.mul(t, 0.3))),
            lambda t: T.tsum(T.softmax(t)),
            lambda t: T.tsum(T.square(T.softmax(t))),
            lambda t: T.tmean(T.mul(t, t)),
            lambda t: T.tsum(T.matmul(T.reshape(t, (2, 3)), T.reshape(t, (3, 2)))),
            lambda t: T.tsum(
                T.layer_norm(
                    T.reshape(t, (2, 3)),
                    Tensor(np.ones(3, dtype=np.float64)),
                    Tensor(np.zeros(3, dtype=np.float64)),
                )
            ),
            lambda t: T.tsum(T.minimum(t, T.mul(t, -1.0))),
            lambda t: T.tsum(T.clip(t, -0.5, 0.5)),
            lambda t: T.tsum(
                T.gaussian_log_prob(
                    T.reshape(t, (2, 3)), Tensor(np.full(3, -0.2)), Tensor(rand((2, 3), seed=3))
                )
            ),
            lambda t: T.tsum(T.concat([t, T.square(t)], axis=0)),
            lambda t: T.tsum(T.take(t, [0, 2, 2], axis=0)),
            lambda t: T.mse(t, Tensor(rand((6,), seed=5))),
        ],
    )
    def test_all_op_kinds(self, fn):
        x = Tensor(rand((6,), seed=12, scale=0.8) + 0.05)
        assert grad_check(fn, x) <= 1e-4

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_softmax_rows_property(self, seed):
        x = rand((4, 6), seed=seed, scale=3.0)
        out = T.softmax(Tensor(x)).data
        np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-6)
