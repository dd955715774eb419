import math

import numpy as np
import pytest

from gala.errors import DomainError
from gala.losses import (
    LossKind,
    adjusted_logits_batch,
    gala_adjust,
    grad_logits,
    grad_logits_batch,
    grad_params,
    loss,
    per_sample_losses,
    softmax_rows,
)
from gala.model import ClassifierParams, logits as model_logits

CE = LossKind.CROSS_ENTROPY
GALA = LossKind.GALA


def fd_grad_logits(kind, z, k, theta, phi, h):
    out = np.zeros_like(z)
    for j in range(len(z)):
        zp, zm = z.copy(), z.copy()
        zp[j] += h
        zm[j] -= h
        out[j] = (loss(kind, zp, k, theta, phi) - loss(kind, zm, k, theta, phi)) / (2 * h)
    return out


def fd_grad_weights(kind, params, x, k, theta, phi, h):
    shape = params.weights.shape
    out = np.zeros(shape)
    for j in range(shape[0]):
        for i in range(shape[1]):
            for sign in (+1.0, -1.0):
                params.weights[j, i] += sign * h
                out[j, i] += sign * loss(kind, model_logits(params, x), k, theta, phi)
                params.weights[j, i] -= sign * h
    return out / (2 * h)


def fd_grad_biases(kind, params, x, k, theta, phi, h):
    out = np.zeros(params.num_classes)
    for j in range(params.num_classes):
        for sign in (+1.0, -1.0):
            params.biases[j] += sign * h
            out[j] += sign * loss(kind, model_logits(params, x), k, theta, phi)
            params.biases[j] -= sign * h
    return out / (2 * h)


def logit_instance(rng, num_classes=4):
    z = rng.uniform(0.1, 10, num_classes)
    theta = rng.uniform(0.1, 10, num_classes)
    phi = rng.uniform(0.1, 10, num_classes)
    k = int(rng.integers(num_classes))
    return z, k, theta, phi


def param_instance(rng, num_classes=4, dim=5):
    """Rank-one weights chosen so the logits land exactly in [0.1, 10]."""
    target = rng.uniform(0.1, 10, num_classes)
    x = rng.uniform(0.5, 2.0, dim) * rng.choice([-1.0, 1.0], dim)
    weights = np.outer(target, x) / np.dot(x, x)
    params = ClassifierParams(weights=weights, biases=np.zeros(num_classes), use_bias=True)
    theta = rng.uniform(0.1, 10, num_classes)
    phi = rng.uniform(0.1, 10, num_classes)
    k = int(rng.integers(num_classes))
    return params, x, k, theta, phi


# --- gala_adjust -----------------------------------------------------------


def test_adjust_equal_margins_cancel():
    z = np.array([1.0, -2.0, 0.5])
    out = gala_adjust(z, 1, [3.0, 3.0, 3.0], [3.0, 3.0, 3.0])
    assert np.array_equal(out, z)


def test_adjust_hand_example():
    out = gala_adjust([0.0, 0.0], 0, [1.0, 2.0], [4.0, 1.0])
    np.testing.assert_allclose(out, [0.0, math.log(2) - math.log(4)])
    assert out[1] == pytest.approx(-math.log(2))


def test_adjust_true_class_untouched():
    rng = np.random.default_rng(41)
    for _ in range(100):
        z, k, theta, phi = logit_instance(rng)
        assert gala_adjust(z, k, theta, phi)[k] == z[k]


def test_adjust_rejects_nonpositive_accumulators():
    with pytest.raises(DomainError):
        gala_adjust([0.0, 0.0], 0, [1.0, 0.0], [1.0, 1.0])
    with pytest.raises(DomainError):
        gala_adjust([0.0, 0.0], 0, [1.0, 1.0], [-1.0, 1.0])


# --- loss ------------------------------------------------------------------


def test_loss_uniform_logits():
    for k_classes in (2, 5, 11):
        assert loss(CE, np.zeros(k_classes), 0) == pytest.approx(math.log(k_classes))


def test_loss_unit_margins_match_ce():
    rng = np.random.default_rng(42)
    for _ in range(50):
        z = rng.normal(size=6)
        k = int(rng.integers(6))
        assert loss(GALA, z, k, np.ones(6), np.ones(6)) == loss(CE, z, k)


def test_loss_hand_value():
    assert loss(CE, [2.0, 0.0, 0.0], 0) == pytest.approx(0.2395447662218845, rel=1e-12)


def test_loss_nonnegative():
    rng = np.random.default_rng(43)
    for _ in range(200):
        z, k, theta, phi = logit_instance(rng, num_classes=6)
        assert loss(CE, z, k) >= 0.0
        assert loss(GALA, z, k, theta, phi) >= 0.0


def test_margin_cancellation_property():
    rng = np.random.default_rng(44)
    for _ in range(1000):
        k_classes = int(rng.integers(2, 9))
        z = rng.uniform(-30, 30, k_classes)
        k = int(rng.integers(k_classes))
        c = float(10 ** rng.uniform(-8, 8))
        ones_c = np.full(k_classes, c)
        assert abs(loss(GALA, z, k, ones_c, ones_c) - loss(CE, z, k)) <= 1e-12


# --- grad_logits -----------------------------------------------------------


def test_grad_logits_uniform():
    g = grad_logits(CE, np.zeros(4), 0)
    np.testing.assert_allclose(g, [-0.75, 0.25, 0.25, 0.25])


def test_grad_logits_sum_zero_and_signs():
    rng = np.random.default_rng(45)
    for _ in range(200):
        z, k, theta, phi = logit_instance(rng, num_classes=5)
        for kind in (CE, GALA):
            g = grad_logits(kind, z, k, theta, phi)
            assert abs(g.sum()) <= 1e-12
            assert g[k] <= 0
            others = np.delete(g, k)
            assert np.all(others >= 0)


def test_grad_logits_matches_finite_differences():
    rng = np.random.default_rng(101)
    for _ in range(100):
        z, k, theta, phi = logit_instance(rng)
        for kind in (CE, GALA):
            analytic = grad_logits(kind, z, k, theta, phi)
            numeric = fd_grad_logits(kind, z, k, theta, phi, h=1e-5)
            np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=0)


def test_negative_gradient_monotone_in_accumulators():
    # Fixing everything else, the negative-class gradient magnitude grows with
    # that class's positive-gradient accumulator and shrinks as the true
    # class's produced-negative accumulator grows.
    rng = np.random.default_rng(46)
    grid = [0.5, 1.0, 2.0]
    for _ in range(100):
        k_classes = 5
        z = rng.uniform(-3, 3, k_classes)
        theta = rng.uniform(0.5, 2.0, k_classes)
        phi = rng.uniform(0.5, 2.0, k_classes)
        k = int(rng.integers(k_classes))
        j = int((k + 1 + rng.integers(k_classes - 1)) % k_classes)

        by_theta = []
        for value in grid:
            th = theta.copy()
            th[j] = value
            by_theta.append(abs(grad_logits(GALA, z, k, th, phi)[j]))
        assert by_theta[0] < by_theta[1] < by_theta[2]

        by_phi = []
        for value in grid:
            ph = phi.copy()
            ph[k] = value
            by_phi.append(abs(grad_logits(GALA, z, k, theta, ph)[j]))
        assert by_phi[0] > by_phi[1] > by_phi[2]


# --- grad_params -----------------------------------------------------------


def test_grad_params_zero_feature():
    params = ClassifierParams(weights=np.ones((3, 2)), biases=np.zeros(3), use_bias=False)
    wgrad, bgrad = grad_params(CE, params, [0.0, 0.0], 1)
    assert np.all(wgrad == 0)
    assert np.all(bgrad == 0)


def test_grad_params_rows_parallel_to_feature():
    rng = np.random.default_rng(47)
    params, x, k, theta, phi = param_instance(rng)
    wgrad, _ = grad_params(GALA, params, x, k, theta, phi)
    g = grad_logits(GALA, model_logits(params, x), k, theta, phi)
    for j in range(params.num_classes):
        np.testing.assert_allclose(wgrad[j], g[j] * x, atol=1e-15)


def test_grad_params_matches_finite_differences():
    rng = np.random.default_rng(404)
    for _ in range(100):
        params, x, k, theta, phi = param_instance(rng)
        for kind in (CE, GALA):
            aw, ab = grad_params(kind, params, x, k, theta, phi)
            fw = fd_grad_weights(kind, params, x, k, theta, phi, h=1e-6)
            np.testing.assert_allclose(aw, fw, rtol=1e-4, atol=0)
            fb = fd_grad_biases(kind, params, x, k, theta, phi, h=1e-6)
            np.testing.assert_allclose(ab, fb, rtol=1e-4, atol=0)


def test_grad_params_bias_disabled():
    params = ClassifierParams(
        weights=np.array([[0.2, -0.1], [0.4, 0.3]]), biases=np.zeros(2), use_bias=False
    )
    _, bgrad = grad_params(CE, params, [1.0, 2.0], 0)
    assert np.all(bgrad == 0)


# --- batch helpers ---------------------------------------------------------


def test_batch_helpers_match_per_sample():
    rng = np.random.default_rng(48)
    batch, k_classes = 32, 6
    z_rows = rng.normal(size=(batch, k_classes)) * 3
    labels = rng.integers(k_classes, size=batch)
    theta = rng.uniform(0.1, 10, k_classes)
    phi = rng.uniform(0.1, 10, k_classes)

    adjusted = adjusted_logits_batch(z_rows, labels, theta, phi)
    losses = per_sample_losses(adjusted, labels)
    probs = softmax_rows(adjusted)
    grads = grad_logits_batch(probs, labels)

    for b in range(batch):
        k = int(labels[b])
        assert np.array_equal(adjusted[b], gala_adjust(z_rows[b], k, theta, phi))
        assert losses[b] == loss(GALA, z_rows[b], k, theta, phi)
        np.testing.assert_array_equal(grads[b], grad_logits(GALA, z_rows[b], k, theta, phi))
