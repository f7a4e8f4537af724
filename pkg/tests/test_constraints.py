import numpy as np
import pytest

from zvrd.constraints import ddnm_project, distance_gradient
from zvrd.errors import ConfigurationError
from zvrd.operators import Awgn, BlurConv, Grayscale, InpaintMask, SRAveragePool, gaussian_kernel

from conftest import central_difference, random_frame


def test_projection_enforces_consistency(rng):
    for op in (SRAveragePool(4), Grayscale(), InpaintMask((rng.random((16, 16)) >= 0.3).astype(float))):
        x_true = random_frame(rng, scale=0.9)
        y = op.apply(x_true)
        x0_hat = random_frame(rng, scale=0.9)
        out = ddnm_project(x0_hat, y, op)
        np.testing.assert_allclose(op.apply(out), y, atol=1e-6, err_msg=op.name)


def test_projection_keeps_consistent_estimate(rng):
    op = SRAveragePool(2)
    x0_hat = random_frame(rng)
    y = op.apply(x0_hat)
    np.testing.assert_allclose(ddnm_project(x0_hat, y, op), x0_hat, atol=1e-12)


def test_projection_inpainting_splits_exactly(rng):
    mask = (rng.random((16, 16)) >= 0.5).astype(np.float64)
    op = InpaintMask(mask)
    truth = random_frame(rng)
    y = op.apply(truth)
    x0_hat = random_frame(rng)
    out = ddnm_project(x0_hat, y, op)
    m = mask[:, :, None].astype(bool)
    np.testing.assert_array_equal(out[np.broadcast_to(m, out.shape)], y[np.broadcast_to(m, out.shape)])
    np.testing.assert_array_equal(out[~np.broadcast_to(m, out.shape)], x0_hat[~np.broadcast_to(m, out.shape)])


def test_projection_colorization_channel_mean(rng):
    op = Grayscale()
    y = op.apply(random_frame(rng))
    x0_hat = random_frame(rng)
    out = ddnm_project(x0_hat, y, op)
    # brute-force per-pixel mean oracle
    brute = out.sum(axis=2, keepdims=True) / 3.0
    np.testing.assert_allclose(brute, y, atol=1e-6)


def test_projection_idempotent(rng):
    op = SRAveragePool(4)
    y = op.apply(random_frame(rng))
    x0_hat = random_frame(rng)
    once = ddnm_project(x0_hat, y, op)
    twice = ddnm_project(once, y, op)
    np.testing.assert_allclose(twice, once, atol=1e-6)


def test_projection_identity_on_null_space(rng):
    # zero-mean channel triples are invisible to the grayscale operator
    op = Grayscale()
    x = random_frame(rng)
    x = x - x.mean(axis=2, keepdims=True)
    np.testing.assert_allclose(op.apply(x), 0.0, atol=1e-12)
    out = ddnm_project(x, np.zeros((16, 16, 1)), op)
    np.testing.assert_allclose(out, x, atol=1e-6)


def test_projection_requires_pseudo_inverse(rng):
    op = BlurConv(gaussian_kernel(5, 1.0))
    with pytest.raises(ConfigurationError):
        ddnm_project(random_frame(rng), random_frame(rng), op)


def test_distance_gradient_at_minimum(rng):
    op = SRAveragePool(2)
    x = random_frame(rng)
    grad, loss = distance_gradient(x, op.apply(x), op)
    assert loss == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(grad, 0.0, atol=1e-12)


def test_distance_gradient_identity_operator(rng):
    op = Awgn(0.0, seed=0)
    x = random_frame(rng)
    y = random_frame(rng)
    grad, loss = distance_gradient(x, y, op, norm="l2")
    np.testing.assert_allclose(grad, 2.0 * (x - y), atol=1e-12)
    assert loss == pytest.approx(float(((x - y) ** 2).sum()), abs=1e-10)


@pytest.mark.parametrize("norm", ["l2", "charbonnier"])
def test_distance_gradient_matches_finite_differences(rng, norm):
    ops = [SRAveragePool(4), Grayscale(), BlurConv(gaussian_kernel(5, 1.0))]
    for op in ops:
        x = random_frame(rng, scale=0.8)
        y = op.apply(random_frame(rng, scale=0.8))

        def loss_fn(v):
            return distance_gradient(v, y, op, norm=norm)[1]

        grad, _ = distance_gradient(x, y, op, norm=norm)
        coords = rng.choice(x.size, size=20, replace=False)
        fd = central_difference(loss_fn, x, coords)
        analytic = grad.ravel()[coords]
        np.testing.assert_allclose(analytic, fd, rtol=1e-4, atol=1e-9, err_msg=f"{op.name}/{norm}")


def test_gradient_step_reduces_loss(rng):
    op = SRAveragePool(4)
    x = random_frame(rng)
    y = op.apply(random_frame(rng))
    grad, loss = distance_gradient(x, y, op)
    eta = 1.0
    for _ in range(30):
        if distance_gradient(x - eta * grad, y, op)[1] < loss:
            break
        eta *= 0.5
    else:
        pytest.fail("no step size reduced the loss")


def test_unknown_norm_rejected(rng):
    with pytest.raises(ConfigurationError):
        distance_gradient(random_frame(rng), random_frame(rng), Awgn(0.0), norm="linf")
