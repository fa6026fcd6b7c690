"""Minimal MLP machinery: explicit forward/backward passes and Adam.

Parameters live in plain dicts of numpy arrays keyed ``w0/b0, w1/b1, ...``.
Hidden layers use ReLU, the output layer is linear. Everything is written
against a fixed two-hidden-layer shape, no general autodiff.
"""

from __future__ import annotations

import numpy as np

Params = dict[str, np.ndarray]
Grads = dict[str, np.ndarray]


def mlp_init(rng: np.random.Generator, sizes: list[int], final_scale: float = 1.0,
             dtype=np.float64) -> Params:
    """Uniform fan-in init; the last layer is scaled by ``final_scale``."""
    params: Params = {}
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        b = rng.uniform(-bound, bound, size=fan_out)
        if i == len(sizes) - 2:
            w *= final_scale
            b *= final_scale
        params[f"w{i}"] = w.astype(dtype)
        params[f"b{i}"] = b.astype(dtype)
    return params


def n_layers(params: Params) -> int:
    return sum(1 for k in params if k.startswith("w"))


def mlp_forward(params: Params, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Returns the linear output and the cache of layer inputs for backward."""
    last = n_layers(params) - 1
    cache = [x]
    h = x
    for i in range(last):
        h = h @ params[f"w{i}"]
        h += params[f"b{i}"]
        np.maximum(h, 0.0, out=h)
        cache.append(h)
    out = h @ params[f"w{last}"]
    out += params[f"b{last}"]
    return out, cache


def mlp_backward(params: Params, cache: list[np.ndarray], dout: np.ndarray,
                 need_dx: bool = False) -> tuple[Grads, np.ndarray | None]:
    """Backprop ``dout`` through the net; optionally also return d(loss)/d(input)."""
    last = n_layers(params) - 1
    grads: Grads = {}
    delta = dout
    for i in range(last, -1, -1):
        h_in = cache[i]
        grads[f"w{i}"] = h_in.T @ delta
        grads[f"b{i}"] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params[f"w{i}"].T) * (cache[i] > 0)
        elif need_dx:
            delta = delta @ params[f"w{i}"].T
    return grads, (delta if need_dx else None)


def mlp_input_grad(params: Params, cache: list[np.ndarray], dout: np.ndarray) -> np.ndarray:
    """d(loss)/d(input) only, skipping the weight gradients."""
    last = n_layers(params) - 1
    delta = dout
    for i in range(last, 0, -1):
        delta = (delta @ params[f"w{i}"].T) * (cache[i] > 0)
    return delta @ params["w0"].T


class Adam:
    """Adam with a gradient-norm clip and a hard cap on the per-step move.

    The cap (``lr * max_step_scale`` per coordinate) is never binding in
    ordinary training but makes the update-boundedness guarantee exact.
    """

    def __init__(self, lr: float = 3e-4, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, clip_norm: float = 10.0, max_step_scale: float = 10.0):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.max_step_scale = max_step_scale
        self.m: Grads = {}
        self.v: Grads = {}
        self.t = 0

    def step(self, params: Params, grads: Grads) -> None:
        if not self.m:
            self.m = {k: np.zeros_like(v) for k, v in params.items()}
            self.v = {k: np.zeros_like(v) for k, v in params.items()}
        if self.clip_norm is not None:
            total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            if total > self.clip_norm:
                scale = self.clip_norm / total
                grads = {k: g * scale for k, g in grads.items()}
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        cap = self.lr * self.max_step_scale
        for k, g in grads.items():
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
            np.clip(update, -cap, cap, out=update)
            params[k] -= update

    def state_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        out = {f"{prefix}.t": np.array([self.t], dtype=np.int64)}
        for k, v in self.m.items():
            out[f"{prefix}.m.{k}"] = v
        for k, v in self.v.items():
            out[f"{prefix}.v.{k}"] = v
        return out

    def load_state_arrays(self, prefix: str, arrays: dict[str, np.ndarray]) -> None:
        self.t = int(arrays[f"{prefix}.t"][0])
        self.m = {}
        self.v = {}
        for key, value in arrays.items():
            if key.startswith(f"{prefix}.m."):
                self.m[key[len(f"{prefix}.m.") :]] = value.copy()
            elif key.startswith(f"{prefix}.v."):
                self.v[key[len(f"{prefix}.v.") :]] = value.copy()


def flat_iter(params: Params):
    """Yield (key, index_tuple) pairs covering every scalar parameter."""
    for key in sorted(params):
        arr = params[key]
        for idx in np.ndindex(arr.shape):
            yield key, idx
