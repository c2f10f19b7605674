"""Recurrent proximal policy optimization on the glide environment.

Rollouts are collected sequentially with the stochastic policy, advantages
are empirical discounted returns minus a learned value baseline (batch
normalized), and both networks train with full-sequence backpropagation
through time over minibatches of whole episodes. A KL servo adjusts the
learning rates and clip range toward a fixed per-update KL target, and the
policy epochs stop early once the sampled KL overshoots that target.
Observations are normalized by running statistics that update only between
collection and optimization, never inside the gradient epochs. The value
net regresses returns in running-normalized units so its bounded-width
head never has to chase the raw return scale; the baseline is mapped back
to raw units before advantages are formed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional

import numpy as np

from .environment import TerminationReason
from .neural import (LOG_STD_FLOOR, GaussianPolicy, RecurrentNet,
                     build_networks, log_prob)

CHECKPOINT_VERSION = 1


class NonFiniteLoss(RuntimeError):
    pass


class TrainerConfig(NamedTuple):
    discount: float = 0.995
    clip_eps: float = 0.2
    kl_target: float = 0.001
    lr_policy: float = 3.0e-4
    lr_value: float = 3.0e-3
    episodes_per_update: int = 60
    update_epochs: int = 3          # policy passes per update
    value_epochs: int = 3
    minibatch_episodes: int = 20
    max_updates: int = 300
    clip_floor: float = 0.01
    clip_cap: float = 0.3


class ObservationNormalizer:
    """Per-element running mean/variance, merged batch-at-a-time."""

    def __init__(self, dim: int, var_floor: float = 1e-8):
        self.mean = np.zeros(dim)
        self.var = np.ones(dim)
        self.count = 0.0
        self.var_floor = var_floor

    def normalize(self, obs: np.ndarray) -> np.ndarray:
        return (obs - self.mean) / np.sqrt(np.maximum(self.var, self.var_floor))

    def update(self, batch: np.ndarray) -> None:
        n = float(batch.shape[0])
        if n == 0:
            return
        b_mean = batch.mean(axis=0)
        b_var = batch.var(axis=0)
        if self.count == 0.0:
            self.mean, self.var, self.count = b_mean, b_var, n
            return
        total = self.count + n
        delta = b_mean - self.mean
        self.mean = self.mean + delta * (n / total)
        self.var = (self.var * self.count + b_var * n
                    + delta * delta * (self.count * n / total)) / total
        self.count = total

    def state(self) -> tuple:
        return self.mean.copy(), self.var.copy(), self.count

    def load(self, mean, var, count) -> None:
        self.mean = np.asarray(mean, dtype=float)
        self.var = np.asarray(var, dtype=float)
        self.count = float(count)


class RunningScalar:
    """Running mean/std of a scalar stream, merged batch-at-a-time."""

    def __init__(self):
        self.mean = 0.0
        self.var = 1.0
        self.count = 0.0

    def update(self, values: np.ndarray) -> None:
        n = float(values.size)
        if n == 0:
            return
        b_mean = float(values.mean())
        b_var = float(values.var())
        if self.count == 0.0:
            self.mean, self.var, self.count = b_mean, b_var, n
            return
        total = self.count + n
        delta = b_mean - self.mean
        self.mean += delta * (n / total)
        self.var = (self.var * self.count + b_var * n
                    + delta * delta * (self.count * n / total)) / total
        self.count = total

    @property
    def std(self) -> float:
        return math.sqrt(max(self.var, 1e-8))


GRAD_CLIP_POLICY = 5.0    # global-norm blowup guards; typical norms are
GRAD_CLIP_VALUE = 100.0   # orders of magnitude below these


def clip_grad_norm(grads: np.ndarray, max_norm: float) -> float:
    """Scale grads in place to max_norm if they exceed it; returns the norm."""
    norm = float(np.linalg.norm(grads))
    if norm > max_norm:
        grads *= max_norm / norm
    return norm


class Adam:
    def __init__(self, n_params: int, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0

    def step(self, params: np.ndarray, grads: np.ndarray, lr: float) -> None:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grads * grads
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        params -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class Episode:
    obs: np.ndarray        # (T, obs_dim) raw observations
    actions: np.ndarray    # (T, act_dim)
    rewards: np.ndarray    # (T,)
    reason: TerminationReason
    miss: float
    alt_err: float
    speed_err: float

    @property
    def steps(self) -> int:
        return len(self.rewards)

    @property
    def total_reward(self) -> float:
        return float(self.rewards.sum())

    @property
    def success(self) -> bool:
        return self.miss < 1000.0 and abs(self.alt_err) < 1000.0


def rollout(env, policy: GaussianPolicy, normalizer: ObservationNormalizer,
            rng: Optional[np.random.Generator], record_trace: bool = False):
    """One episode. Stochastic when rng given, mean action otherwise."""
    obs = env.reset(record_trace) if record_trace else env.reset()
    h = policy.initial_hidden()
    obs_list, act_list, rew_list = [], [], []
    done = False
    info = {}
    while not done:
        mean, h = policy.step(normalizer.normalize(obs), h)
        u = policy.sample(mean, rng) if rng is not None else mean
        obs_list.append(obs)
        act_list.append(u)
        obs, r, done, info = env.step(u)
        rew_list.append(r)
    miss, alt_err, speed_err = info["terminal_metrics"]
    return Episode(np.asarray(obs_list), np.asarray(act_list),
                   np.asarray(rew_list), info["reason"],
                   miss, alt_err, speed_err)


def compute_returns(rewards: np.ndarray, discount: float) -> np.ndarray:
    """Discounted reward-to-go for one episode."""
    returns = np.empty_like(rewards)
    acc = 0.0
    for k in range(len(rewards) - 1, -1, -1):
        acc = rewards[k] + discount * acc
        returns[k] = acc
    return returns


def pad_episodes(episodes: List[Episode], normalizer: ObservationNormalizer):
    """Stack episodes into (T, B, ...) arrays with a validity mask."""
    t_max = max(ep.steps for ep in episodes)
    batch = len(episodes)
    obs_dim = episodes[0].obs.shape[1]
    act_dim = episodes[0].actions.shape[1]
    xs = np.zeros((t_max, batch, obs_dim))
    us = np.zeros((t_max, batch, act_dim))
    mask = np.zeros((t_max, batch))
    for b, ep in enumerate(episodes):
        t = ep.steps
        xs[:t, b] = normalizer.normalize(ep.obs)
        us[:t, b] = ep.actions
        mask[:t, b] = 1.0
    return xs, us, mask


def ppo_objective(ratios: np.ndarray, advantages: np.ndarray, mask: np.ndarray,
                  clip_eps: float) -> tuple:
    """Clipped-surrogate value and diagnostics over masked entries."""
    n = mask.sum()
    unclipped = ratios * advantages
    clipped = np.clip(ratios, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    objective = float((np.minimum(unclipped, clipped) * mask).sum() / n)
    clip_fraction = float((((ratios < 1.0 - clip_eps) | (ratios > 1.0 + clip_eps))
                           * mask).sum() / n)
    return objective, clip_fraction


def kl_servo(measured_kl: float, config: TrainerConfig, clip_eps: float,
             lr_policy: float, lr_value: float) -> tuple:
    """Adjust (clip_eps, lr_policy, lr_value) toward the KL target."""
    if measured_kl > 2.0 * config.kl_target:
        lr_policy *= 0.5
        lr_value *= 0.5
        clip_eps = max(config.clip_floor, clip_eps * 0.9)
    elif measured_kl < 0.5 * config.kl_target:
        lr_policy *= 1.5
        lr_value *= 1.5
        clip_eps = min(config.clip_cap, clip_eps * 1.1)
    return clip_eps, lr_policy, lr_value


HISTORY_COLUMNS = ("update", "episodes", "mean_reward", "min_reward",
                   "mean_steps", "max_steps", "miss_mean", "miss_std",
                   "miss_max", "success_rate", "violations", "kl",
                   "clip_eps", "lr_policy", "lr_value")


class Trainer:
    def __init__(self, env, config: TrainerConfig, seed: int):
        self.env = env
        self.config = config
        ss = np.random.SeedSequence(seed)
        init_rng, self.action_rng = [np.random.default_rng(s)
                                     for s in ss.spawn(2)]
        self.policy, self.value = build_networks(env.obs_dim, env.act_dim,
                                                 init_rng)
        self.normalizer = ObservationNormalizer(env.obs_dim)
        self.return_norm = RunningScalar()
        self.policy_opt = Adam(self.policy.params.size)
        self.value_opt = Adam(self.value.params.size)
        self.clip_eps = config.clip_eps
        self.lr_policy = config.lr_policy
        self.lr_value = config.lr_value
        self.history: List[dict] = []
        self.episodes_seen = 0

    def warm_start(self, path) -> dict:
        """Load network weights and observation statistics from a checkpoint.

        Optimizer moments, the trust-region servo, and the value-target
        scaler restart fresh: they track the new run's gradient and return
        statistics, which a resumed run under different termination rules
        should re-estimate rather than inherit.
        """
        policy, value, normalizer, meta = load_checkpoint(path)
        if (policy.obs_dim, policy.act_dim) != (self.env.obs_dim,
                                                self.env.act_dim):
            raise ValueError(
                f"checkpoint dims ({policy.obs_dim}, {policy.act_dim}) do not "
                f"match env ({self.env.obs_dim}, {self.env.act_dim})")
        self.policy.params[:] = policy.params
        self.value.params[:] = value.params
        self.normalizer.load(*normalizer.state())
        return meta

    # -- update internals --------------------------------------------------

    def _policy_log_probs(self, xs, us):
        means, caches = self.policy.net.forward_sequence(xs)
        lp = log_prob(means, self.policy.log_std, us)
        return means, lp, caches

    def _policy_epoch(self, xs, us, mask, advantages, old_lp) -> float:
        """One clipped-surrogate ascent step on one minibatch.

        Returns the minibatch's sampled KL against the behavior policy as
        measured before this step, for the early-stop check.
        """
        means, lp, caches = self._policy_log_probs(xs, us)
        ratios = np.exp(lp - old_lp)
        n = mask.sum()
        kl_pre = float(((old_lp - lp) * mask).sum() / n)
        unclipped = ratios * advantages
        clipped = np.clip(ratios, 1.0 - self.clip_eps, 1.0 + self.clip_eps) \
            * advantages
        take = unclipped <= clipped
        # d(-J)/d(log_prob): active branch only, averaged over valid steps.
        dlp = -np.where(take, unclipped, 0.0) * mask / n
        if not np.isfinite(dlp).all():
            raise NonFiniteLoss("policy gradient is not finite")
        std2 = np.exp(2.0 * self.policy.log_std)
        dev = us - means
        d_mean = dlp[..., None] * dev / std2
        grads = self.policy.net.backward_sequence(caches, d_mean)
        d_log_std = (dlp[..., None] * (dev * dev / std2 - 1.0)).sum(axis=(0, 1))
        grads[self.policy.net.n_net_params:] += d_log_std
        clip_grad_norm(grads, GRAD_CLIP_POLICY)
        self.policy_opt.step(self.policy.params, grads, self.lr_policy)
        np.maximum(self.policy.log_std, LOG_STD_FLOOR, out=self.policy.log_std)
        return kl_pre

    def _value_epoch(self, xs, mask, returns):
        preds, caches = self.value.forward_sequence(xs)
        preds = preds[..., 0]
        n = mask.sum()
        err = (preds - returns) * mask
        loss = float((err * err).sum() / n)
        if not math.isfinite(loss):
            raise NonFiniteLoss("value loss is not finite")
        d_pred = (2.0 * err / n)[..., None]
        grads = self.value.backward_sequence(caches, d_pred)
        clip_grad_norm(grads, GRAD_CLIP_VALUE)
        self.value_opt.step(self.value.params, grads, self.lr_value)
        return loss

    def update(self, episodes: List[Episode]) -> dict:
        cfg = self.config
        self.normalizer.update(np.concatenate([ep.obs for ep in episodes]))
        xs, us, mask = pad_episodes(episodes, self.normalizer)
        valid = mask > 0.0

        # Value baseline and advantages from pre-update networks. The net
        # predicts returns in running-normalized units; map back to raw.
        returns = np.zeros_like(mask)
        for b, ep in enumerate(episodes):
            returns[:ep.steps, b] = compute_returns(ep.rewards, cfg.discount)
        self.return_norm.update(returns[valid])
        mu, sd = self.return_norm.mean, self.return_norm.std
        values = self.value.forward_sequence(xs)[0][..., 0] * sd + mu
        advantages = (returns - values) * mask
        a = advantages[valid]
        advantages[valid] = (a - a.mean()) / max(float(a.std()), 1e-8)

        # Refresh behavior log-probs through the same batched path used in
        # the epochs so the first-ratio identity is exact.
        old_lp = self._policy_log_probs(xs, us)[1]
        old_log_std = self.policy.log_std.copy()

        mb = cfg.minibatch_episodes
        slices = [slice(b, min(b + mb, len(episodes)))
                  for b in range(0, len(episodes), mb)]
        overshoot = False
        for _ in range(cfg.update_epochs):
            for s in slices:
                kl_mb = self._policy_epoch(xs[:, s], us[:, s], mask[:, s],
                                           advantages[:, s], old_lp[:, s])
                # A minibatch already far past the target means further
                # epochs would only dig deeper; let the servo catch up.
                overshoot = kl_mb > 4.0 * cfg.kl_target
                if overshoot:
                    break
            if overshoot:
                break
        targets = (returns - mu) / sd
        value_loss = 0.0
        for _ in range(cfg.value_epochs):
            for s in slices:
                value_loss = self._value_epoch(xs[:, s], mask[:, s],
                                               targets[:, s])

        new_lp = self._policy_log_probs(xs, us)[1]
        kl_sampled = float(((old_lp - new_lp) * mask).sum() / mask.sum())
        d_ls = self.policy.log_std - old_log_std
        kl_std = float(np.sum(d_ls + 0.5 * np.exp(-2.0 * d_ls) - 0.5))
        kl = kl_sampled + kl_std
        self.clip_eps, self.lr_policy, self.lr_value = kl_servo(
            kl, cfg, self.clip_eps, self.lr_policy, self.lr_value)
        return {"kl": kl, "value_loss": value_loss}

    # -- outer loop ---------------------------------------------------------

    def train(self, max_updates: Optional[int] = None,
              callback: Optional[Callable[[dict], None]] = None) -> List[dict]:
        cfg = self.config
        for update in range(max_updates or cfg.max_updates):
            episodes = [rollout(self.env, self.policy, self.normalizer,
                                self.action_rng)
                        for _ in range(cfg.episodes_per_update)]
            self.episodes_seen += len(episodes)
            diag = self.update(episodes)

            rewards = np.array([ep.total_reward for ep in episodes])
            steps = np.array([ep.steps for ep in episodes])
            misses = np.array([ep.miss for ep in episodes])
            row = {
                "update": update,
                "episodes": self.episodes_seen,
                "mean_reward": float(rewards.mean()),
                "min_reward": float(rewards.min()),
                "mean_steps": float(steps.mean()),
                "max_steps": int(steps.max()),
                "miss_mean": float(misses.mean()),
                "miss_std": float(misses.std()),
                "miss_max": float(misses.max()),
                "success_rate": float(np.mean([ep.success for ep in episodes])),
                "violations": int(sum(ep.reason is TerminationReason.CONSTRAINT_VIOLATION
                                      for ep in episodes)),
                "kl": diag["kl"],
                "clip_eps": self.clip_eps,
                "lr_policy": self.lr_policy,
                "lr_value": self.lr_value,
            }
            self.history.append(row)
            if callback is not None:
                callback(row)
        return self.history


def write_history(path, history: List[dict]) -> None:
    with open(path, "w") as fh:
        fh.write("\t".join(HISTORY_COLUMNS) + "\n")
        for row in history:
            fh.write("\t".join(repr(row[c]) for c in HISTORY_COLUMNS) + "\n")


def read_history(path) -> List[dict]:
    with open(path) as fh:
        header = fh.readline().strip().split("\t")
        rows = []
        for line in fh:
            vals = line.strip().split("\t")
            row = {}
            for name, val in zip(header, vals):
                row[name] = int(val) if name in ("update", "episodes",
                                                 "max_steps", "violations") \
                    else float(val)
            rows.append(row)
    return rows


def save_checkpoint(path, policy: GaussianPolicy, value: RecurrentNet,
                    normalizer: ObservationNormalizer, extra: dict = None) -> None:
    mean, var, count = normalizer.state()
    meta = {"version": CHECKPOINT_VERSION, "obs_dim": policy.obs_dim,
            "act_dim": policy.act_dim}
    meta.update(extra or {})
    np.savez(path,
             meta=json.dumps(meta),
             policy_widths=np.array(policy.net.widths),
             value_widths=np.array(value.widths),
             policy_params=policy.params,
             value_params=value.params,
             norm_mean=mean, norm_var=var, norm_count=count)


def load_checkpoint(path) -> tuple:
    """(policy, value, normalizer, meta) from a saved checkpoint."""
    data = np.load(path, allow_pickle=False)
    meta = json.loads(str(data["meta"]))
    if meta["version"] != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {meta['version']}")
    rng = np.random.default_rng(0)  # shapes only; params overwritten below
    policy, value = build_networks(meta["obs_dim"], meta["act_dim"], rng)
    if (tuple(data["policy_widths"]) != policy.net.widths
            or tuple(data["value_widths"]) != value.widths):
        raise ValueError("checkpoint width mismatch")
    policy.params[:] = data["policy_params"]
    value.params[:] = data["value_params"]
    normalizer = ObservationNormalizer(meta["obs_dim"])
    normalizer.load(data["norm_mean"], data["norm_var"], float(data["norm_count"]))
    return policy, value, normalizer, meta
