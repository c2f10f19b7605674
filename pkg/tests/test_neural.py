"""Network plumbing and exact-gradient checks for the recurrent nets.

Gradient checks compare hand-rolled backpropagation through time against
central finite differences on the flat parameter vector. The comparison
metric is |analytic - numeric| / max(|analytic| + |numeric|, 1e-4); the floor
keeps near-zero coordinates from inflating the relative error.
"""

import math

import numpy as np
import pytest

from glidelab.neural import (
    LOG_2PI,
    LOG_STD_INIT,
    GaussianPolicy,
    RecurrentNet,
    build_networks,
    log_prob,
    policy_widths,
    value_widths,
)

FD_EPS = 1e-4
TOL = 1e-4


def _loss(net: RecurrentNet, xs: np.ndarray, w_loss: np.ndarray) -> float:
    y, _ = net.forward_sequence(xs)
    return float(np.sum(y * w_loss))


def _fd_grad(net: RecurrentNet, xs: np.ndarray, w_loss: np.ndarray,
             idx: np.ndarray) -> np.ndarray:
    out = np.empty(idx.size)
    for k, i in enumerate(idx):
        orig = net.params[i]
        net.params[i] = orig + FD_EPS
        hi = _loss(net, xs, w_loss)
        net.params[i] = orig - FD_EPS
        lo = _loss(net, xs, w_loss)
        net.params[i] = orig
        out[k] = (hi - lo) / (2.0 * FD_EPS)
    return out


def _rel_err(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    return np.abs(analytic - numeric) / np.maximum(
        np.abs(analytic) + np.abs(numeric), 1e-4)


def test_bptt_matches_finite_differences_per_layer():
    rng = np.random.default_rng(42)
    net = RecurrentNet(3, (5, 4, 6, 2), rng)
    xs = rng.standard_normal((10, 3, 3))
    w_loss = rng.standard_normal((10, 3, 2))
    y, caches = net.forward_sequence(xs)
    analytic = net.backward_sequence(caches, w_loss)
    idx = np.arange(net.n_net_params)
    numeric = _fd_grad(net, xs, w_loss, idx)
    err = _rel_err(analytic[idx], numeric)
    for layer, name in zip(net.layers, ("dense_in", "gru", "dense_mid", "head")):
        sl = slice(layer.offset, layer.offset + layer.n_params)
        assert err[sl].max() < TOL, (name, err[sl].max())


def test_bptt_matches_finite_differences_production_widths():
    rng = np.random.default_rng(7)
    policy, value = build_networks(9, 2, rng)
    for net in (policy.net, value):
        xs = rng.standard_normal((10, 2, 9))
        w_loss = rng.standard_normal((10, 2, net.out_dim))
        _, caches = net.forward_sequence(xs)
        analytic = net.backward_sequence(caches, w_loss)
        idx = rng.choice(net.n_net_params, size=300, replace=False)
        numeric = _fd_grad(net, xs, w_loss, idx)
        assert _rel_err(analytic[idx], numeric).max() < TOL


def test_parameter_counts_match_architecture_table():
    assert policy_widths(9, 2) == (90, 42, 20, 2)
    assert value_widths(9) == (90, 21, 5, 1)
    rng = np.random.default_rng(0)
    policy, value = build_networks(9, 2, rng)
    assert policy.params.size == 18562  # includes the 2 log-std entries
    assert value.params.size == 8072


def test_step_matches_forward_sequence():
    rng = np.random.default_rng(1)
    net = RecurrentNet(4, (6, 5, 7, 3), rng)
    xs = rng.standard_normal((12, 1, 4))
    seq_out, _ = net.forward_sequence(xs)
    h = net.initial_hidden()
    for t in range(12):
        y, h = net.step(xs[t, 0], h)
        np.testing.assert_allclose(y, seq_out[t, 0], rtol=0, atol=1e-12)


def test_forward_is_pure():
    rng = np.random.default_rng(2)
    net = RecurrentNet(3, (4, 3, 4, 2), rng)
    params_before = net.params.copy()
    xs = rng.standard_normal((5, 2, 3))
    y1, _ = net.forward_sequence(xs)
    y2, _ = net.forward_sequence(xs)
    np.testing.assert_array_equal(y1, y2)
    np.testing.assert_array_equal(net.params, params_before)


def test_log_prob_matches_hand_formula():
    rng = np.random.default_rng(3)
    mean = rng.standard_normal((6, 4, 2))
    log_std = rng.standard_normal(2) * 0.3
    u = rng.standard_normal((6, 4, 2))
    got = log_prob(mean, log_std, u)
    sig = np.exp(log_std)
    hand = (-0.5 * ((u - mean) / sig) ** 2 - np.log(sig)
            - 0.5 * LOG_2PI).sum(axis=-1)
    np.testing.assert_allclose(got, hand, rtol=0, atol=1e-12)
    assert got.shape == (6, 4)


def test_gaussian_policy_sampling_statistics():
    rng = np.random.default_rng(4)
    policy = GaussianPolicy(9, 2, rng)
    assert np.all(policy.log_std == LOG_STD_INIT)
    mean = np.array([0.3, -0.2])
    draws = np.array([policy.sample(mean, rng) for _ in range(20000)])
    assert np.allclose(draws.mean(axis=0), mean, atol=0.02)
    assert np.allclose(draws.std(axis=0), math.exp(LOG_STD_INIT), atol=0.02)


def test_initial_hidden_shapes():
    rng = np.random.default_rng(5)
    net = RecurrentNet(3, (4, 6, 4, 1), rng)
    assert net.initial_hidden().shape == (6,)
    assert net.initial_hidden(8).shape == (8, 6)
    assert not net.initial_hidden(8).any()
