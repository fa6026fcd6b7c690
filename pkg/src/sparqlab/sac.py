"""Soft actor-critic for 2-D continuous control, gradients written by hand.

The actor is a tanh-squashed Gaussian (4 -> 64 -> 64 -> mean/log-std pairs),
the critics are twin Q-networks (6 -> 64 -> 64 -> 1) with Polyak-averaged
target copies; hidden layers are ReLU. All loss gradients are closed-form
backpropagation through the fixed two-hidden-layer shape;
:func:`gradient_check` validates them against central finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nets import Adam, Grads, Params, mlp_backward, mlp_forward, mlp_input_grad, mlp_init

LOG_2PI = math.log(2.0 * math.pi)
TANH_EPS = 1e-6

OBS_DIM = 4
ACT_DIM = 2
HIDDEN = 64


class NanLossError(RuntimeError):
    def __init__(self, message: str, batch_indices: np.ndarray | None = None):
        super().__init__(message)
        self.batch_indices = batch_indices


@dataclass(frozen=True)
class LearnerConfig:
    lr: float = 3e-4
    batch_size: int = 256
    gamma: float = 0.95
    tau: float = 0.005
    alpha: float = 0.2
    auto_alpha: bool = True
    target_entropy: float = -5.0
    warmup_steps: int = 1000
    update_every: int = 2      # env steps between gradient updates
    replay_capacity: int = 50_000
    grad_clip: float = 10.0
    log_std_min: float = -5.0
    log_std_max: float = 2.0
    actor_final_scale: float = 0.01


# ---------------------------------------------------------------------------
# Pure forward/backward pieces (used by both the agent and the gradient check)
# ---------------------------------------------------------------------------

def actor_sample(params: Params, s: np.ndarray, xi: np.ndarray,
                 log_std_min: float, log_std_max: float) -> tuple[np.ndarray, np.ndarray, dict]:
    """Reparameterized draw a = tanh(mean + std * xi) with its log-density.

    The log-density includes the tanh change-of-variables correction
    sum_i log(1 - a_i^2 + 1e-6).
    """
    trunk_out, cache = mlp_forward(params, s)
    mean = trunk_out[:, :ACT_DIM]
    pre = trunk_out[:, ACT_DIM:]
    log_std = np.clip(pre, log_std_min, log_std_max)
    std = np.exp(log_std)
    u = mean + std * xi
    a = np.tanh(u)
    sq = 1.0 - a * a
    log_prob = (
        np.sum(-0.5 * xi * xi - log_std - 0.5 * LOG_2PI, axis=1)
        - np.sum(np.log(sq + TANH_EPS), axis=1)
    )
    internals = {
        "cache": cache,
        "mean": mean,
        "pre": pre,
        "log_std": log_std,
        "std": std,
        "xi": xi,
        "a": a,
        "sq": sq,
        "clip_mask": (pre > log_std_min) & (pre < log_std_max),
    }
    return a, log_prob, internals


def actor_forward(params: Params, s: np.ndarray, rng: np.random.Generator,
                  log_std_min: float = -5.0, log_std_max: float = 2.0
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Stochastic actor pass for a batch of states (rows)."""
    s = np.atleast_2d(s)
    xi = rng.standard_normal((s.shape[0], ACT_DIM)).astype(s.dtype, copy=False)
    a, log_prob, _ = actor_sample(params, s, xi, log_std_min, log_std_max)
    return a, log_prob


def actor_mean_action(params: Params, s: np.ndarray) -> np.ndarray:
    """Deterministic head for evaluation: tanh of the mean."""
    trunk_out, _ = mlp_forward(params, np.atleast_2d(s))
    return np.tanh(trunk_out[:, :ACT_DIM])


def critic_forward(params: Params, s: np.ndarray, a: np.ndarray
                   ) -> tuple[np.ndarray, list[np.ndarray]]:
    x = np.concatenate([s, a], axis=1)
    q, cache = mlp_forward(params, x)
    return q[:, 0], cache


def critic_loss_and_grads(c1: Params, c2: Params, s: np.ndarray, a: np.ndarray,
                          y: np.ndarray) -> tuple[float, Grads, Grads]:
    """Summed MSE of both critics against the fixed target y."""
    n = s.shape[0]
    q1, cache1 = critic_forward(c1, s, a)
    q2, cache2 = critic_forward(c2, s, a)
    loss = float(np.mean((q1 - y) ** 2) + np.mean((q2 - y) ** 2))
    d1 = (2.0 / n) * (q1 - y)[:, None]
    d2 = (2.0 / n) * (q2 - y)[:, None]
    g1, _ = mlp_backward(c1, cache1, d1)
    g2, _ = mlp_backward(c2, cache2, d2)
    return loss, g1, g2


def actor_loss_and_grads(actor: Params, c1: Params, c2: Params, s: np.ndarray,
                         xi: np.ndarray, alpha: float, log_std_min: float,
                         log_std_max: float) -> tuple[float, Grads, np.ndarray]:
    """mean(alpha * log pi - min(Q1, Q2)) and its gradient w.r.t. actor params."""
    n = s.shape[0]
    a, log_prob, it = actor_sample(actor, s, xi, log_std_min, log_std_max)
    q1, cache_q1 = critic_forward(c1, s, a)
    q2, cache_q2 = critic_forward(c2, s, a)
    q_min = np.minimum(q1, q2)
    loss = float(np.mean(alpha * log_prob - q_min))

    # d(loss)/da through the active critic of the min, per sample
    m1 = (q1 <= q2).astype(s.dtype)
    da_q = np.zeros_like(a)
    if m1.any():
        g = mlp_input_grad(c1, cache_q1, (-(m1 / n))[:, None])
        da_q += g[:, OBS_DIM:]
    m2 = 1.0 - m1
    if m2.any():
        g = mlp_input_grad(c2, cache_q2, (-(m2 / n))[:, None])
        da_q += g[:, OBS_DIM:]

    sq, a_val = it["sq"], it["a"]
    da = da_q + (alpha / n) * (2.0 * a_val / (sq + TANH_EPS))
    du = da * sq
    dmean = du
    dlog_std = du * it["std"] * xi - (alpha / n)
    dpre = dlog_std * it["clip_mask"]
    dtrunk = np.concatenate([dmean, dpre], axis=1)
    grads, _ = mlp_backward(actor, it["cache"], dtrunk)
    return loss, grads, log_prob


def actor_loss_value(actor: Params, c1: Params, c2: Params, s: np.ndarray,
                     xi: np.ndarray, alpha: float, log_std_min: float,
                     log_std_max: float) -> float:
    a, log_prob, _ = actor_sample(actor, s, xi, log_std_min, log_std_max)
    q1, _ = critic_forward(c1, s, a)
    q2, _ = critic_forward(c2, s, a)
    return float(np.mean(alpha * log_prob - np.minimum(q1, q2)))


def critic_loss_value(c1: Params, c2: Params, s: np.ndarray, a: np.ndarray,
                      y: np.ndarray) -> float:
    q1, _ = critic_forward(c1, s, a)
    q2, _ = critic_forward(c2, s, a)
    return float(np.mean((q1 - y) ** 2) + np.mean((q2 - y) ** 2))


# ---------------------------------------------------------------------------
# Agent
# ---------------------------------------------------------------------------

class SacAgent:
    def __init__(self, cfg: LearnerConfig, rng: np.random.Generator, dtype=np.float32):
        self.cfg = cfg
        self.dtype = dtype
        self.actor = mlp_init(rng, [OBS_DIM, HIDDEN, HIDDEN, 2 * ACT_DIM],
                              final_scale=cfg.actor_final_scale, dtype=dtype)
        self.critic1 = mlp_init(rng, [OBS_DIM + ACT_DIM, HIDDEN, HIDDEN, 1], dtype=dtype)
        self.critic2 = mlp_init(rng, [OBS_DIM + ACT_DIM, HIDDEN, HIDDEN, 1], dtype=dtype)
        self.target1 = {k: v.copy() for k, v in self.critic1.items()}
        self.target2 = {k: v.copy() for k, v in self.critic2.items()}
        self.log_alpha = math.log(cfg.alpha)
        self.opt_actor = Adam(lr=cfg.lr, clip_norm=cfg.grad_clip)
        self.opt_critic1 = Adam(lr=cfg.lr, clip_norm=cfg.grad_clip)
        self.opt_critic2 = Adam(lr=cfg.lr, clip_norm=cfg.grad_clip)
        self.opt_alpha = Adam(lr=cfg.lr, clip_norm=None)
        self._updates = 0

    @property
    def alpha(self) -> float:
        return math.exp(self.log_alpha)

    def select_action(self, s: np.ndarray, deterministic: bool,
                      rng: np.random.Generator | None = None) -> np.ndarray:
        """Raw action in [-1, 1]^2; the caller maps it to workspace coordinates."""
        s = np.asarray(s, dtype=self.dtype)
        if deterministic:
            return actor_mean_action(self.actor, s)[0]
        if rng is None:
            raise ValueError("stochastic selection needs an rng")
        a, _ = actor_forward(self.actor, s, rng, self.cfg.log_std_min, self.cfg.log_std_max)
        return a[0]

    def compute_targets(self, batch, rng: np.random.Generator) -> np.ndarray:
        cfg = self.cfg
        xi = rng.standard_normal((batch.s_next.shape[0], ACT_DIM), dtype=self.dtype)
        a_next, logp_next, _ = actor_sample(self.actor, batch.s_next, xi,
                                            cfg.log_std_min, cfg.log_std_max)
        t1, _ = critic_forward(self.target1, batch.s_next, a_next)
        t2, _ = critic_forward(self.target2, batch.s_next, a_next)
        soft_value = np.minimum(t1, t2) - self.alpha * logp_next
        return batch.r_eff + cfg.gamma * (1.0 - batch.done) * soft_value

    def update(self, batch, rng: np.random.Generator) -> dict[str, float]:
        """One SAC step: critics, actor, optional temperature, Polyak targets."""
        cfg = self.cfg
        y = self.compute_targets(batch, rng)

        critic_loss, g1, g2 = critic_loss_and_grads(self.critic1, self.critic2,
                                                    batch.s, batch.a, y)
        if not math.isfinite(critic_loss):
            raise NanLossError("critic loss is not finite", batch.indices)
        self.opt_critic1.step(self.critic1, g1)
        self.opt_critic2.step(self.critic2, g2)

        xi = rng.standard_normal((batch.s.shape[0], ACT_DIM), dtype=self.dtype)
        actor_loss, ga, log_prob = actor_loss_and_grads(
            self.actor, self.critic1, self.critic2, batch.s, xi,
            self.alpha, cfg.log_std_min, cfg.log_std_max)
        if not math.isfinite(actor_loss):
            raise NanLossError("actor loss is not finite", batch.indices)
        self.opt_actor.step(self.actor, ga)

        alpha_loss = 0.0
        if cfg.auto_alpha:
            err = float(np.mean(log_prob + cfg.target_entropy))
            alpha_loss = -self.log_alpha * err
            if not math.isfinite(alpha_loss):
                raise NanLossError("temperature loss is not finite", batch.indices)
            box = {"log_alpha": np.array([self.log_alpha])}
            self.opt_alpha.step(box, {"log_alpha": np.array([-err])})
            self.log_alpha = float(box["log_alpha"][0])

        tau = cfg.tau
        for tgt, src in ((self.target1, self.critic1), (self.target2, self.critic2)):
            for k in tgt:
                tgt[k] *= 1.0 - tau
                tgt[k] += tau * src[k]

        self._updates += 1
        if self._updates % 1000 == 0:
            self.assert_finite()

        return {"critic_loss": critic_loss, "actor_loss": actor_loss,
                "alpha_loss": alpha_loss, "alpha": self.alpha}

    def param_groups(self) -> dict[str, Params]:
        return {"actor": self.actor, "critic1": self.critic1, "critic2": self.critic2,
                "target1": self.target1, "target2": self.target2}

    def assert_finite(self) -> None:
        for name, group in self.param_groups().items():
            for k, v in group.items():
                if not np.all(np.isfinite(v)):
                    raise NanLossError(f"non-finite parameter {name}.{k}")


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------

def _max_rel_error(analytic: Grads, numeric: Grads, floor: float = 1e-6) -> float:
    worst = 0.0
    for k in analytic:
        ga = analytic[k]
        gn = numeric[k]
        denom = np.maximum(np.maximum(np.abs(ga), np.abs(gn)), floor)
        worst = max(worst, float(np.max(np.abs(ga - gn) / denom)))
    return worst


def _fd_grads(loss_fn, params: Params, h: float) -> Grads:
    numeric = {k: np.zeros_like(v) for k, v in params.items()}
    for key in params:
        arr = params[key]
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            up = loss_fn()
            arr[idx] = orig - h
            down = loss_fn()
            arr[idx] = orig
            numeric[key][idx] = (up - down) / (2.0 * h)
            it.iternext()
    return numeric


def gradient_check(actor: Params, critic1: Params, critic2: Params,
                   s: np.ndarray, a: np.ndarray, y: np.ndarray,
                   noise_seed: int = 0, alpha: float = 0.2, h: float = 1e-5,
                   log_std_min: float = -5.0, log_std_max: float = 2.0,
                   corrupt: tuple[str, str] | None = None) -> float:
    """Max relative error of analytic vs central finite-difference gradients.

    Checks every parameter of the critic loss (both critics, fixed target y)
    and of the actor loss (fixed reparameterization noise). ``corrupt``
    doubles one analytic gradient array, for mutation-testing the check
    itself.
    """
    actor = {k: v.astype(np.float64).copy() for k, v in actor.items()}
    critic1 = {k: v.astype(np.float64).copy() for k, v in critic1.items()}
    critic2 = {k: v.astype(np.float64).copy() for k, v in critic2.items()}
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xi = np.random.default_rng(noise_seed).standard_normal((s.shape[0], ACT_DIM))

    _, ga1, ga2 = critic_loss_and_grads(critic1, critic2, s, a, y)
    _, ga_actor, _ = actor_loss_and_grads(actor, critic1, critic2, s, xi,
                                          alpha, log_std_min, log_std_max)
    analytic = {"critic1": ga1, "critic2": ga2, "actor": ga_actor}
    if corrupt is not None:
        group, key = corrupt
        analytic[group][key] = analytic[group][key] * 2.0

    worst = 0.0
    fd1 = _fd_grads(lambda: critic_loss_value(critic1, critic2, s, a, y), critic1, h)
    worst = max(worst, _max_rel_error(analytic["critic1"], fd1))
    fd2 = _fd_grads(lambda: critic_loss_value(critic1, critic2, s, a, y), critic2, h)
    worst = max(worst, _max_rel_error(analytic["critic2"], fd2))
    fd_actor = _fd_grads(
        lambda: actor_loss_value(actor, critic1, critic2, s, xi, alpha,
                                 log_std_min, log_std_max),
        actor, h)
    worst = max(worst, _max_rel_error(analytic["actor"], fd_actor))
    return worst


def _min_hidden_margin(params: Params, x: np.ndarray) -> float:
    """Smallest |pre-activation| over the hidden layers (distance to a ReLU kink)."""
    margin = np.inf
    h = x
    layers = sum(1 for k in params if k.startswith("w"))
    for i in range(layers - 1):
        z = h @ params[f"w{i}"] + params[f"b{i}"]
        margin = min(margin, float(np.min(np.abs(z))))
        h = np.maximum(z, 0.0)
    return margin


def draw_check_problem(seed: int, batch_size: int = 4,
                       log_std_min: float = -5.0, log_std_max: float = 2.0,
                       min_margin: float = 5e-4, max_tries: int = 200):
    """Random (params, batch) draw conditioned for finite differences.

    Finite differences need a locally smooth loss, so draws are rejected when
    any batch element sits within ``min_margin`` of a non-smooth point: a ReLU
    kink, the twin-critic crossover, or the log-std clamp boundary. The margin
    is two orders of magnitude above the probe step, so no kink flips inside a
    central-difference interval.
    """
    for attempt in range(max_tries):
        rng = np.random.default_rng((seed, attempt))
        actor = mlp_init(rng, [OBS_DIM, HIDDEN, HIDDEN, 2 * ACT_DIM])
        critic1 = mlp_init(rng, [OBS_DIM + ACT_DIM, HIDDEN, HIDDEN, 1])
        critic2 = mlp_init(rng, [OBS_DIM + ACT_DIM, HIDDEN, HIDDEN, 1])
        s = rng.uniform(-0.5, 0.5, size=(batch_size, OBS_DIM))
        a = rng.uniform(-0.9, 0.9, size=(batch_size, ACT_DIM))
        y = rng.standard_normal(batch_size)
        xi = np.random.default_rng(0).standard_normal((batch_size, ACT_DIM))

        a_pi, _, it = actor_sample(actor, s, xi, log_std_min, log_std_max)
        pre = it["pre"]
        if np.min(np.abs(pre - log_std_min)) <= min_margin:
            continue
        if np.min(np.abs(pre - log_std_max)) <= min_margin:
            continue
        q1, _ = critic_forward(critic1, s, a_pi)
        q2, _ = critic_forward(critic2, s, a_pi)
        if np.min(np.abs(q1 - q2)) <= min_margin:
            continue
        x_data = np.concatenate([s, a], axis=1)
        x_pi = np.concatenate([s, a_pi], axis=1)
        margins = [
            _min_hidden_margin(actor, s),
            _min_hidden_margin(critic1, x_data),
            _min_hidden_margin(critic2, x_data),
            _min_hidden_margin(critic1, x_pi),
            _min_hidden_margin(critic2, x_pi),
        ]
        if min(margins) <= min_margin:
            continue
        return actor, critic1, critic2, s, a, y
    raise RuntimeError(f"no well-conditioned draw after {max_tries} tries (seed {seed})")


# ---------------------------------------------------------------------------
# Checkpointing
# ---------------------------------------------------------------------------

def save_checkpoint(path, agent: SacAgent, config_hash: str) -> None:
    arrays: dict[str, np.ndarray] = {}
    for name, group in agent.param_groups().items():
        for k, v in group.items():
            arrays[f"{name}.{k}"] = v
    arrays["log_alpha"] = np.array([agent.log_alpha])
    arrays.update(agent.opt_actor.state_arrays("opt_actor"))
    arrays.update(agent.opt_critic1.state_arrays("opt_critic1"))
    arrays.update(agent.opt_critic2.state_arrays("opt_critic2"))
    arrays.update(agent.opt_alpha.state_arrays("opt_alpha"))
    arrays["config_hash"] = np.frombuffer(config_hash.encode(), dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path, cfg: LearnerConfig) -> tuple[SacAgent, str]:
    with np.load(path) as data:
        arrays = {k: data[k] for k in data.files}
    agent = SacAgent(cfg, np.random.default_rng(0))
    for name, group in agent.param_groups().items():
        for k in group:
            group[k] = arrays[f"{name}.{k}"].copy()
    agent.log_alpha = float(arrays["log_alpha"][0])
    agent.opt_actor.load_state_arrays("opt_actor", arrays)
    agent.opt_critic1.load_state_arrays("opt_critic1", arrays)
    agent.opt_critic2.load_state_arrays("opt_critic2", arrays)
    agent.opt_alpha.load_state_arrays("opt_alpha", arrays)
    config_hash = arrays["config_hash"].tobytes().decode()
    return agent, config_hash


def params_digest(agent: SacAgent) -> str:
    """Order-stable hash of every parameter array, for reproducibility checks."""
    import hashlib

    digest = hashlib.sha256()
    for name in sorted(agent.param_groups()):
        group = agent.param_groups()[name]
        for k in sorted(group):
            digest.update(name.encode())
            digest.update(k.encode())
            digest.update(np.ascontiguousarray(group[k]).tobytes())
    digest.update(repr(agent.log_alpha).encode())
    return digest.hexdigest()
