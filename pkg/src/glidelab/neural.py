"""Recurrent function approximators with hand-rolled exact gradients.

Networks are four layers: dense tanh, a gated-recurrent-unit layer, dense
tanh, linear head. Parameters live in one flat vector per network; layers
hold offsets and expose reshaped views, so optimizer updates to the flat
vector are visible everywhere. Sequence forward/backward passes batch the
dense layers over (time x batch) and loop only the recurrent layer, giving
exact backpropagation through time. All math is double precision so
finite-difference gradient checks can be tight.
"""

from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


def _sigmoid(x):
    # Numerically stable on both tails.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Dense:
    def __init__(self, in_dim: int, out_dim: int, activation: str = "tanh",
                 init_scale: float = 1.0):
        assert activation in ("tanh", "linear")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        self.init_scale = init_scale
        self.n_params = out_dim * (in_dim + 1)
        self.offset = 0

    def bind(self, offset: int) -> int:
        self.offset = offset
        return offset + self.n_params

    def views(self, flat: np.ndarray) -> tuple:
        o, nw = self.offset, self.out_dim * self.in_dim
        w = flat[o:o + nw].reshape(self.out_dim, self.in_dim)
        b = flat[o + nw:o + self.n_params]
        return w, b

    def init(self, flat: np.ndarray, rng: np.random.Generator) -> None:
        w, b = self.views(flat)
        bound = self.init_scale / math.sqrt(self.in_dim)
        w[:] = rng.uniform(-bound, bound, w.shape)
        b[:] = 0.0

    def forward(self, flat: np.ndarray, x: np.ndarray) -> tuple:
        """x: (N, in) -> (out (N, out), cache)."""
        w, b = self.views(flat)
        pre = x @ w.T + b
        if self.activation == "tanh":
            out = np.tanh(pre)
            return out, (x, out)
        return pre, (x, None)

    def backward(self, flat: np.ndarray, grads: np.ndarray, cache: tuple,
                 d_out: np.ndarray) -> np.ndarray:
        """Accumulate parameter grads; return gradient w.r.t. the input."""
        x, out = cache
        d_pre = d_out if out is None else d_out * (1.0 - out * out)
        w, _ = self.views(flat)
        gw, gb = self.views(grads)
        gw += d_pre.T @ x
        gb += d_pre.sum(axis=0)
        return d_pre @ w


class Gru:
    """Gated recurrent unit: update gate z, reset gate r, candidate c.

    h' = z*h + (1-z)*c with c = tanh(Wc x + Uc (r*h) + bc). Parameter blocks
    are W (3h, in), U (3h, h), b (3h,) with row blocks ordered [z, r, c].
    """

    def __init__(self, in_dim: int, hidden_dim: int):
        self.in_dim = in_dim
        self.out_dim = hidden_dim
        self.n_params = 3 * hidden_dim * in_dim + 3 * hidden_dim * hidden_dim \
            + 3 * hidden_dim
        self.offset = 0

    def bind(self, offset: int) -> int:
        self.offset = offset
        return offset + self.n_params

    def views(self, flat: np.ndarray) -> tuple:
        h, i, o = self.out_dim, self.in_dim, self.offset
        w = flat[o:o + 3 * h * i].reshape(3 * h, i)
        o += 3 * h * i
        u = flat[o:o + 3 * h * h].reshape(3 * h, h)
        o += 3 * h * h
        b = flat[o:o + 3 * h]
        return w, u, b

    def init(self, flat: np.ndarray, rng: np.random.Generator) -> None:
        w, u, b = self.views(flat)
        w[:] = rng.uniform(-1.0, 1.0, w.shape) / math.sqrt(self.in_dim)
        u[:] = rng.uniform(-1.0, 1.0, u.shape) / math.sqrt(self.out_dim)
        b[:] = 0.0

    def step(self, flat: np.ndarray, x: np.ndarray, h: np.ndarray) -> tuple:
        """One time step. x: (B, in), h: (B, h) -> (h', cache)."""
        nh = self.out_dim
        w, u, b = self.views(flat)
        pre = x @ w.T + b
        hz = h @ u[:2 * nh].T
        z = _sigmoid(pre[:, :nh] + hz[:, :nh])
        r = _sigmoid(pre[:, nh:2 * nh] + hz[:, nh:])
        rh = r * h
        c = np.tanh(pre[:, 2 * nh:] + rh @ u[2 * nh:].T)
        h_new = z * h + (1.0 - z) * c
        return h_new, (x, h, z, r, c, rh)

    def backward_step(self, flat: np.ndarray, grads: np.ndarray, cache: tuple,
                      d_h_new: np.ndarray) -> tuple:
        """Backprop one step; returns (d_x, d_h_prev)."""
        nh = self.out_dim
        x, h, z, r, c, rh = cache
        w, u, _ = self.views(flat)
        gw, gu, gb = self.views(grads)

        dz = d_h_new * (h - c)
        dc = d_h_new * (1.0 - z)
        dh = d_h_new * z

        dc_pre = dc * (1.0 - c * c)
        drh = dc_pre @ u[2 * nh:]
        dr = drh * h
        dh += drh * r

        dz_pre = dz * z * (1.0 - z)
        dr_pre = dr * r * (1.0 - r)

        gw[:nh] += dz_pre.T @ x
        gw[nh:2 * nh] += dr_pre.T @ x
        gw[2 * nh:] += dc_pre.T @ x
        gu[:nh] += dz_pre.T @ h
        gu[nh:2 * nh] += dr_pre.T @ h
        gu[2 * nh:] += dc_pre.T @ rh
        gb[:nh] += dz_pre.sum(axis=0)
        gb[nh:2 * nh] += dr_pre.sum(axis=0)
        gb[2 * nh:] += dc_pre.sum(axis=0)

        dx = dz_pre @ w[:nh] + dr_pre @ w[nh:2 * nh] + dc_pre @ w[2 * nh:]
        dh += dz_pre @ u[:nh] + dr_pre @ u[nh:2 * nh]
        return dx, dh


class RecurrentNet:
    """dense(tanh) -> gru -> dense(tanh) -> dense(linear) over a flat vector."""

    def __init__(self, in_dim: int, widths: Tuple[int, int, int, int],
                 rng: np.random.Generator, n_extra: int = 0):
        w1, wg, w3, w_out = widths
        self.in_dim = in_dim
        self.widths = widths
        self.out_dim = w_out
        self.hidden_dim = wg
        self.layers = [
            Dense(in_dim, w1, "tanh"),
            Gru(w1, wg),
            Dense(wg, w3, "tanh"),
            Dense(w3, w_out, "linear", init_scale=0.01),
        ]
        offset = 0
        for layer in self.layers:
            offset = layer.bind(offset)
        expected = (w1 * (in_dim + 1) + 3 * wg * (w1 + wg + 1)
                    + w3 * (wg + 1) + w_out * (w3 + 1))
        assert offset == expected, (offset, expected)
        self.n_net_params = offset
        self.params = np.zeros(offset + n_extra)
        self.extra = self.params[offset:]
        for layer in self.layers:
            layer.init(self.params, rng)

    def initial_hidden(self, batch: Optional[int] = None) -> np.ndarray:
        if batch is None:
            return np.zeros(self.hidden_dim)
        return np.zeros((batch, self.hidden_dim))

    def step(self, obs: np.ndarray, h: np.ndarray) -> tuple:
        """Single observation -> (output, new hidden). 1-D fast path."""
        p = self.params
        a1, _ = self.layers[0].forward(p, obs[None, :])
        h_new, _ = self.layers[1].step(p, a1, h[None, :])
        a3, _ = self.layers[2].forward(p, h_new)
        y, _ = self.layers[3].forward(p, a3)
        return y[0], h_new[0]

    def forward_sequence(self, xs: np.ndarray) -> tuple:
        """xs: (T, B, in) -> (outputs (T, B, out), caches).

        Hidden state starts at zero for every batch row (episode starts).
        """
        t_len, batch, _ = xs.shape
        p = self.params
        a1, c1 = self.layers[0].forward(p, xs.reshape(t_len * batch, -1))
        a1 = a1.reshape(t_len, batch, -1)
        h = np.zeros((batch, self.hidden_dim))
        hs = np.empty((t_len, batch, self.hidden_dim))
        gru_caches = []
        for t in range(t_len):
            h, cache = self.layers[1].step(p, a1[t], h)
            gru_caches.append(cache)
            hs[t] = h
        a3, c3 = self.layers[2].forward(p, hs.reshape(t_len * batch, -1))
        y, c4 = self.layers[3].forward(p, a3)
        y = y.reshape(t_len, batch, self.out_dim)
        return y, (t_len, batch, c1, gru_caches, c3, c4)

    def backward_sequence(self, caches: tuple, d_y: np.ndarray) -> np.ndarray:
        """Exact gradient of sum(d_y * y) w.r.t. the flat parameter vector.

        Callers zero d_y at padded steps; the zero gradient then propagates
        through the recurrent carry on its own.
        """
        t_len, batch, c1, gru_caches, c3, c4 = caches
        p = self.params
        grads = np.zeros_like(self.params)
        d3 = self.layers[3].backward(p, grads, c4, d_y.reshape(t_len * batch, -1))
        dh_all = self.layers[2].backward(p, grads, c3, d3)
        dh_all = dh_all.reshape(t_len, batch, self.hidden_dim)
        d_a1 = np.empty((t_len, batch, self.widths[0]))
        dh = np.zeros((batch, self.hidden_dim))
        for t in range(t_len - 1, -1, -1):
            dh = dh + dh_all[t]
            d_a1[t], dh = self.layers[1].backward_step(p, grads, gru_caches[t], dh)
        self.layers[0].backward(p, grads, c1, d_a1.reshape(t_len * batch, -1))
        return grads


LOG_STD_INIT = -0.5   # exploration std ~0.6 against the [-1, 1] action clip
LOG_STD_FLOOR = -2.5  # keep a sliver of exploration alive


class GaussianPolicy:
    """Recurrent mean network plus state-independent learnable log-std."""

    def __init__(self, obs_dim: int, act_dim: int, rng: np.random.Generator):
        widths = policy_widths(obs_dim, act_dim)
        self.net = RecurrentNet(obs_dim, widths, rng, n_extra=act_dim)
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.log_std = self.net.extra  # view into the flat vector
        self.log_std[:] = LOG_STD_INIT
        self.params = self.net.params

    def initial_hidden(self, batch: Optional[int] = None) -> np.ndarray:
        return self.net.initial_hidden(batch)

    def step(self, obs: np.ndarray, h: np.ndarray) -> tuple:
        """(mean, new hidden) for one observation."""
        return self.net.step(obs, h)

    def sample(self, mean: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return mean + np.exp(self.log_std) * rng.standard_normal(self.act_dim)


def policy_widths(obs_dim: int, act_dim: int) -> tuple:
    n_h1 = 10 * obs_dim
    n_h3 = 10 * act_dim
    return n_h1, round(math.sqrt(n_h1 * n_h3)), n_h3, act_dim


def value_widths(obs_dim: int) -> tuple:
    n_h1 = 10 * obs_dim
    n_h3 = 5
    return n_h1, round(math.sqrt(n_h1 * n_h3)), n_h3, 1


def build_networks(obs_dim: int, act_dim: int,
                   rng: np.random.Generator) -> tuple:
    """(GaussianPolicy, value RecurrentNet) sized from the I/O dimensions."""
    policy = GaussianPolicy(obs_dim, act_dim, rng)
    value = RecurrentNet(obs_dim, value_widths(obs_dim), rng)
    return policy, value


def log_prob(mean: np.ndarray, log_std: np.ndarray, u: np.ndarray):
    """Diagonal-Gaussian log density; broadcasts over leading axes."""
    inv_var = np.exp(-2.0 * log_std)
    dev = u - mean
    quad = np.sum(dev * dev * inv_var, axis=-1)
    return -0.5 * (quad + u.shape[-1] * LOG_2PI) - np.sum(log_std)
