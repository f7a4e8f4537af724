import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zvrd.errors import ContractError
from zvrd.flow import warp
from zvrd.temporal import NoiseBank, blend_noise, tc_loss_and_grad

from conftest import central_difference, random_frame


class TestNoiseBank:
    def test_bitwise_determinism_and_order_independence(self):
        bank = NoiseBank(42)
        a = bank.z(17, (8, 8, 3))
        bank.z(3, (8, 8, 3))
        bank.init_state((8, 8, 3))
        b = NoiseBank(42).z(17, (8, 8, 3))
        assert a.tobytes() == b.tobytes()

    def test_distinct_keys_give_distinct_fields(self):
        bank = NoiseBank(0)
        shape = (8, 8, 1)
        assert not np.array_equal(bank.z(1, shape), bank.z(2, shape))
        assert not np.array_equal(bank.z(1, shape), bank.z(1, shape, stream=1))
        assert not np.array_equal(bank.init_state(shape), bank.z(0, shape))

    def test_field_statistics(self):
        field = NoiseBank(7).z(100, (256, 256))
        assert abs(field.mean()) < 0.02
        assert abs(field.std() - 1.0) < 0.02
        init = NoiseBank(7).init_state((256, 256))
        assert abs(init.mean()) < 0.02
        assert abs(init.std() - 1.0) < 0.02


class TestTcLoss:
    def test_zero_residual(self, rng):
        prev = random_frame(rng)
        flow = rng.uniform(-1, 1, (16, 16, 2))
        cur = warp(prev, flow)
        loss, grad = tc_loss_and_grad(cur, prev, flow, np.ones((16, 16)))
        assert loss == pytest.approx(0.0, abs=1e-9)
        np.testing.assert_array_equal(grad, 0.0)

    def test_closed_form_sparse_difference(self):
        # k of P pixels differ by +0.5 with zero flow and a full mask
        eps = 1e-3
        h = w = 8
        prev = np.zeros((h, w, 1))
        cur = np.zeros((h, w, 1))
        k = 5
        cur[0, :k, 0] = 0.5
        loss, _ = tc_loss_and_grad(cur, prev, np.zeros((h, w, 2)), np.ones((h, w)), eps_s=eps)
        expected = k * (np.sqrt(0.25 + eps**2) - eps) / (h * w)
        assert loss == pytest.approx(expected, rel=1e-12)

    def test_gradient_matches_finite_differences(self, rng):
        prev = random_frame(rng)
        cur = random_frame(rng)
        flow = rng.uniform(-0.5, 0.5, (16, 16, 2))
        mask = (rng.random((16, 16)) >= 0.2).astype(np.float64)

        def loss_fn(v):
            return tc_loss_and_grad(v, prev, flow, mask)[0]

        loss, grad = tc_loss_and_grad(cur, prev, flow, mask)
        coords = rng.choice(cur.size, size=20, replace=False)
        fd = central_difference(loss_fn, cur, coords)
        np.testing.assert_allclose(grad.ravel()[coords], fd, rtol=1e-4, atol=1e-10)

    def test_all_zero_mask_degenerate(self, rng):
        loss, grad = tc_loss_and_grad(random_frame(rng), random_frame(rng), np.zeros((16, 16, 2)), np.zeros((16, 16)))
        assert loss == 0.0
        np.testing.assert_array_equal(grad, 0.0)

    def test_subgradient_mode(self, rng):
        prev = np.zeros((8, 8, 1))
        cur = np.zeros((8, 8, 1))
        cur[2, 2, 0] = 0.3
        cur[3, 3, 0] = -0.4
        loss, grad = tc_loss_and_grad(cur, prev, np.zeros((8, 8, 2)), np.ones((8, 8)), eps_s=0.0)
        assert loss == pytest.approx(0.7 / 64)
        assert grad[2, 2, 0] == pytest.approx(1 / 64)
        assert grad[3, 3, 0] == pytest.approx(-1 / 64)
        assert grad[0, 0, 0] == 0.0

    def test_loss_symmetric_under_residual_negation(self, rng):
        prev = random_frame(rng)
        delta = random_frame(rng, scale=0.3)
        flow = np.zeros((16, 16, 2))
        mask = np.ones((16, 16))
        plus, _ = tc_loss_and_grad(prev + delta, prev, flow, mask)
        minus, _ = tc_loss_and_grad(prev - delta, prev, flow, mask)
        assert plus == pytest.approx(minus, rel=1e-12)

    def test_descent_reduces_loss(self, rng):
        prev = random_frame(rng)
        cur = random_frame(rng)
        flow = np.zeros((16, 16, 2))
        mask = np.ones((16, 16))
        loss, grad = tc_loss_and_grad(cur, prev, flow, mask)
        eta = 8.0
        for _ in range(40):
            if tc_loss_and_grad(cur - eta * grad, prev, flow, mask)[0] < loss:
                break
            eta *= 0.5
        else:
            pytest.fail("no step size reduced the loss")


class TestBlendNoise:
    def test_zero_mask_passthrough_exact(self, rng):
        z = rng.standard_normal((8, 8, 3))
        zp = rng.standard_normal((8, 8, 3))
        out = blend_noise(z, zp, rng.uniform(-1, 1, (8, 8, 2)), np.zeros((8, 8)), lam=0.3)
        np.testing.assert_array_equal(out, z)

    def test_lambda_one_passthrough_exact(self, rng):
        z = rng.standard_normal((8, 8, 3))
        zp = rng.standard_normal((8, 8, 3))
        out = blend_noise(z, zp, np.zeros((8, 8, 2)), np.ones((8, 8)), lam=1.0)
        np.testing.assert_array_equal(out, z)

    @settings(max_examples=30, deadline=None)
    @given(lam=st.floats(min_value=0.0, max_value=1.0))
    def test_identical_inputs_fixed_point_any_lambda(self, lam):
        z = NoiseBank(5).z(3, (8, 8, 3))
        out = blend_noise(z, z.copy(), np.zeros((8, 8, 2)), np.ones((8, 8)), lam=lam)
        np.testing.assert_array_equal(out, z)

    def test_affine_blend_arithmetic(self, rng):
        z = rng.standard_normal((8, 8, 3))
        out = blend_noise(z, z + 2.0, np.zeros((8, 8, 2)), np.ones((8, 8)), lam=0.5)
        np.testing.assert_allclose(out, z + 1.0, atol=1e-12)

    def test_unwarped_mode_uses_raw_previous(self, rng):
        z = rng.standard_normal((8, 8, 3))
        zp = rng.standard_normal((8, 8, 3))
        flow = np.full((8, 8, 2), 1.0)
        blended = blend_noise(z, zp, flow, np.ones((8, 8)), lam=0.5, warp_prev=False)
        np.testing.assert_allclose(blended, 0.5 * z + 0.5 * zp, atol=1e-12)
        warped = blend_noise(z, zp, flow, np.ones((8, 8)), lam=0.5, warp_prev=True)
        assert not np.allclose(blended, warped)

    def test_lambda_out_of_range_rejected(self, rng):
        z = rng.standard_normal((4, 4, 1))
        with pytest.raises(ContractError):
            blend_noise(z, z, np.zeros((4, 4, 2)), np.ones((4, 4)), lam=1.5)
