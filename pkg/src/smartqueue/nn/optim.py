"""Parameter updates: plain SGD, Adam and Polyak (soft) target updates."""

from __future__ import annotations

import numpy as np

from ..errors import PreconditionError
from .params import ParamSet


def optimizer_step(params: ParamSet, grads: ParamSet, lr: float) -> ParamSet:
    """In-place ``p <- p - lr * g``. Returns ``params`` for chaining."""
    params.check_compatible(grads)
    if lr:
        for name, p in params.items():
            p -= lr * grads[name]
    return params


class SGD:
    def __init__(self, lr: float = 1e-3):
        self.lr = lr

    def step(self, params: ParamSet, grads: ParamSet) -> ParamSet:
        return optimizer_step(params, grads, self.lr)


class Adam:
    """Adaptive-moment variant with the same ``step(params, grads)`` contract."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: ParamSet, grads: ParamSet) -> ParamSet:
        params.check_compatible(grads)
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name, p in params.items():
            g = grads[name]
            m = self._m.get(name)
            if m is None:
                m = self._m[name] = np.zeros_like(p)
                self._v[name] = np.zeros_like(p)
            v = self._v[name]
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return params


def make_optimizer(name: str, lr: float):
    if name == "sgd":
        return SGD(lr)
    if name == "adam":
        return Adam(lr)
    raise ValueError(f"unknown optimizer {name!r}")


def soft_update(target: ParamSet, main: ParamSet, tau: float) -> ParamSet:
    """In-place ``target <- tau * main + (1 - tau) * target``; ``tau=1`` copies."""
    if not 0.0 <= tau <= 1.0:
        raise PreconditionError(f"tau must lie in [0, 1], got {tau}")
    target.check_compatible(main)
    for name, t in target.items():
        if tau == 1.0:
            t[...] = main[name]
        elif tau:
            t *= 1.0 - tau
            t += tau * main[name]
    return target
