"""Gradient correctness of every primitive, double-backward support, and
the Adam update against a hand-computed step."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrgan import autodiff as ad
from mrgan.autodiff import Tensor

RNG = np.random.default_rng(7)
TOL = 1e-6


def check(f, x: np.ndarray, tol: float = TOL) -> None:
    err = ad.grad_check(f, Tensor(np.asarray(x, dtype=np.float64),
                                  requires_grad=True))
    assert err < tol, f"grad rel error {err:.3e}"


class TestPrimitiveGradients:
    def test_add(self):
        b = Tensor(RNG.normal(size=(4, 3)))
        check(lambda x: ad.sum_all(ad.add(x, b)), RNG.normal(size=(4, 3)))

    def test_sub(self):
        b = Tensor(RNG.normal(size=(4, 3)))
        check(lambda x: ad.sum_all(ad.mul(ad.sub(x, b), ad.sub(x, b))),
              RNG.normal(size=(4, 3)))

    def test_neg_scale_add_scalar(self):
        check(lambda x: ad.sum_all(ad.neg(ad.add_scalar(ad.scale(x, 2.5), 1.0))),
              RNG.normal(size=(3, 2)))

    def test_mul(self):
        b = Tensor(RNG.normal(size=(4, 3)))
        check(lambda x: ad.sum_all(ad.mul(x, b)), RNG.normal(size=(4, 3)))

    def test_matmul(self):
        b = Tensor(RNG.normal(size=(3, 5)))
        check(lambda x: ad.sum_all(ad.matmul(x, b)), RNG.normal(size=(4, 3)))

    def test_transpose(self):
        b = Tensor(RNG.normal(size=(3, 4)))
        check(lambda x: ad.sum_all(ad.mul(ad.transpose(x), b)),
              RNG.normal(size=(4, 3)))

    def test_power(self):
        check(lambda x: ad.sum_all(ad.power(x, 3.0)),
              RNG.uniform(0.5, 2.0, size=(4, 3)))

    def test_power_half(self):
        check(lambda x: ad.sum_all(ad.power(x, 0.5)),
              RNG.uniform(0.5, 2.0, size=(4, 3)))

    def test_leaky_relu(self):
        # keep inputs away from the kink
        x = RNG.normal(size=(5, 4))
        x[np.abs(x) < 0.1] = 0.5
        check(lambda t: ad.sum_all(ad.leaky_relu(t)), x)

    def test_relu(self):
        x = RNG.normal(size=(5, 4))
        x[np.abs(x) < 0.1] = -0.5
        check(lambda t: ad.sum_all(ad.relu(t)), x)

    def test_tanh(self):
        check(lambda x: ad.sum_all(ad.tanh(x)), RNG.normal(size=(4, 3)))

    def test_mean_all(self):
        check(lambda x: ad.scale(ad.mean_all(ad.mul(x, x)), 3.0),
              RNG.normal(size=(6, 2)))

    def test_sum_axis(self):
        b = Tensor(RNG.normal(size=(4, 1)))
        check(lambda x: ad.sum_all(ad.mul(ad.sum_axis(x, 1), b)),
              RNG.normal(size=(4, 3)))

    def test_broadcast(self):
        b = Tensor(RNG.normal(size=(5, 3)))
        check(lambda x: ad.sum_all(ad.mul(ad.broadcast_to(x, (5, 3)), b)),
              RNG.normal(size=(1, 3)))

    def test_reshape(self):
        b = Tensor(RNG.normal(size=(6, 2)))
        check(lambda x: ad.sum_all(ad.mul(ad.reshape(x, (6, 2)), b)),
              RNG.normal(size=(3, 4)))

    def test_pool_max(self):
        x = RNG.normal(size=(6, 3))  # distinct values: unique argmax
        check(lambda t: ad.sum_all(ad.mul(ad.pool(t, "max"), ad.pool(t, "max"))), x)

    def test_pool_min(self):
        check(lambda t: ad.sum_all(ad.pool(t, "min")), RNG.normal(size=(6, 3)))

    def test_block_pool(self):
        b = Tensor(RNG.normal(size=(3, 4)))
        check(lambda t: ad.sum_all(ad.mul(ad.block_pool(t, 2, "max"), b)),
              RNG.normal(size=(6, 4)))

    def test_gather_rows(self):
        idx = np.array([0, 2, 2, 1])
        b = Tensor(RNG.normal(size=(4, 3)))
        check(lambda t: ad.sum_all(ad.mul(ad.gather_rows(t, idx), b)),
              RNG.normal(size=(3, 3)))

    def test_concat(self):
        b = Tensor(RNG.normal(size=(4, 3)))
        check(lambda t: ad.sum_all(
            ad.mul(ad.concat([ad.slice_rows(t, 0, 2), ad.slice_rows(t, 2, 4)]), b)),
            RNG.normal(size=(4, 3)))

    def test_concat_cols(self):
        check(lambda t: ad.sum_all(ad.power(ad.concat([t, t], axis=1), 2.0)),
              RNG.uniform(0.5, 1.5, size=(3, 2)))

    def test_slice_cols(self):
        check(lambda t: ad.sum_all(ad.power(ad.slice_cols(t, 1, 3), 2.0)),
              RNG.normal(size=(4, 4)))

    def test_affine(self):
        w = Tensor(RNG.normal(size=(3, 2)))
        b = Tensor(RNG.normal(size=(1, 2)))
        check(lambda x: ad.sum_all(ad.tanh(ad.affine(x, w, b))),
              RNG.normal(size=(5, 3)))

    def test_affine_weight_grad(self):
        x = Tensor(RNG.normal(size=(5, 3)))
        b = Tensor(RNG.normal(size=(1, 2)))
        check(lambda w: ad.sum_all(ad.tanh(ad.affine(x, w, b))),
              RNG.normal(size=(3, 2)))


class TestDoubleBackward:
    def test_grad_norm_of_tanh_network(self):
        # d/dx ||grad_x sum(tanh(x W))||^2 must match finite differences:
        # only possible when the backward pass is itself differentiable.
        w = Tensor(RNG.normal(size=(3, 3)))

        def f(x):
            y = ad.sum_all(ad.tanh(ad.matmul(x, w)))
            (g,) = ad.grad(y, [x])
            return ad.sum_all(ad.mul(g, g))

        check(f, RNG.normal(size=(4, 3)), tol=1e-5)

    def test_penalty_style_expression(self):
        def f(x):
            y = ad.sum_all(ad.power(ad.add_scalar(ad.mul(x, x), 1.0), 0.5))
            (g,) = ad.grad(y, [x])
            norm = ad.power(ad.add_scalar(ad.sum_all(ad.mul(g, g)), 1e-12), 0.5)
            return ad.power(ad.add_scalar(norm, -1.0), 2.0)

        check(f, RNG.uniform(0.5, 1.5, size=(3, 2)), tol=1e-5)


class TestEngineBasics:
    def test_backward_accumulates_into_leaves(self):
        x = Tensor(np.array([[1.0, 2.0]]), requires_grad=True)
        y = ad.sum_all(ad.mul(x, x))
        y.backward()
        np.testing.assert_allclose(x.grad.data, [[2.0, 4.0]])
        y2 = ad.sum_all(x)
        y2.backward()
        np.testing.assert_allclose(x.grad.data, [[3.0, 5.0]])

    def test_grad_does_not_touch_dot_grad(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        (g,) = ad.grad(ad.sum_all(ad.mul(x, x)), [x])
        assert x.grad is None
        np.testing.assert_allclose(g.data, 2 * np.ones((2, 2)))

    def test_scalar_only_backward(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        with pytest.raises(ad.DimensionError):
            ad.mul(x, x).backward()

    def test_shape_mismatch_rejected(self):
        a = Tensor(np.ones((2, 3)))
        b = Tensor(np.ones((3, 2)))
        with pytest.raises(ad.DimensionError):
            ad.add(a, b)

    def test_activation_kinds(self):
        x = Tensor(np.array([[-1.0, 2.0]]))
        np.testing.assert_allclose(ad.activation(x, "leaky_relu").data, [[-0.2, 2.0]])
        np.testing.assert_allclose(ad.activation(x, "identity").data, [[-1.0, 2.0]])
        with pytest.raises(ValueError):
            ad.activation(x, "swish")
        with pytest.raises(ValueError):
            ad.activation(x, "leaky_relu", slope=1.5)

    def test_pool_tie_breaks_first_index(self):
        x = Tensor(np.array([[1.0], [1.0], [0.0]]), requires_grad=True)
        y = ad.sum_all(ad.pool(x, "max"))
        y.backward()
        np.testing.assert_allclose(x.grad.data, [[1.0], [0.0], [0.0]])


class TestAdam:
    def test_first_step_matches_hand_derivation(self):
        # [DERIVED] one Adam step from zero state: m-hat = g, v-hat = g^2,
        # so the update is -lr * g/(|g| + eps) = -lr * sign(g) (+O(eps)).
        p = ad.Parameter(np.array([[1.0, -2.0]]), name="p")
        p.grad = Tensor(np.array([[0.5, -3.0]]))
        opt = ad.Adam([p], lr=0.1, beta1=0.9, beta2=0.999)
        opt.step()
        expected = np.array([[1.0, -2.0]]) - 0.1 * np.sign([[0.5, -3.0]])
        np.testing.assert_allclose(p.data, expected, atol=1e-6)

    def test_two_steps_match_reference_formula(self):
        lr, b1, b2, eps = 0.01, 0.9, 0.99, 1e-8
        p = ad.Parameter(np.array([2.0]), name="p")
        opt = ad.Adam([p], lr=lr, beta1=b1, beta2=b2)
        m = v = 0.0
        ref = 2.0
        for t in (1, 2):
            g = 2.0 * ref  # d/dx x^2 at the reference value
            p.grad = Tensor(np.array([2.0 * p.data[0]]))
            opt.step()
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            mh, vh = m / (1 - b1**t), v / (1 - b2**t)
            ref -= lr * mh / (np.sqrt(vh) + eps)
            np.testing.assert_allclose(p.data[0], ref, rtol=1e-12)

    def test_zero_grad(self):
        p = ad.Parameter(np.ones(2), name="p")
        p.grad = Tensor(np.ones(2))
        ad.Adam([p]).zero_grad()
        assert p.grad is None


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(1, 4), st.integers(0, 10_000))
def test_matmul_grad_property(n, m, seed):
    rng = np.random.default_rng(seed)
    w = Tensor(rng.normal(size=(m, n)))
    check(lambda x: ad.sum_all(ad.tanh(ad.matmul(x, w))),
          rng.normal(size=(n, m)), tol=1e-5)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_sum_matches_numpy(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(5, 3))
    assert ad.sum_all(Tensor(x)).data == pytest.approx(x.sum())
    np.testing.assert_allclose(ad.sum_axis(Tensor(x), 0).data,
                               x.sum(axis=0, keepdims=True))
