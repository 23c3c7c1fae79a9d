"""Dense and attention layers with a single-use gradient tape.

Every forward function takes an optional :class:`Tape`. When one is given the
intermediates needed for the backward pass are kept on it; ``backward`` then
walks the recorded operations in reverse and returns gradients for every
parameter of the :class:`ParamSet` that was used.

Arrays may carry any number of leading batch axes; the feature axis is last.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import DimensionError, PreconditionError, StateError
from .params import AttentionConfig, ParamSet, mlp_layers

_NEG_INF = -np.inf


class Tape:
    """Record of one forward pass. Consumed by the first ``backward`` call."""

    def __init__(self):
        self._ops: list[tuple[np.ndarray, tuple, Callable]] = []
        self._params: ParamSet | None = None
        self._spent = False

    def _bind(self, params: ParamSet) -> None:
        if self._params is None:
            self._params = params
        elif self._params is not params:
            raise StateError("one tape cannot span two ParamSets")

    def record(self, out: np.ndarray, inputs: tuple, fn: Callable) -> None:
        if self._spent:
            raise StateError("tape already consumed by backward()")
        self._ops.append((out, inputs, fn))

    @property
    def output(self) -> np.ndarray:
        if not self._ops:
            raise StateError("backward() without a recorded forward pass")
        return self._ops[-1][0]

    def backward(self, loss_grad: np.ndarray, output: np.ndarray | None = None) -> ParamSet:
        if not self._ops or self._params is None:
            raise StateError("backward() without a recorded forward pass")
        if self._spent:
            raise StateError("tape already consumed by backward()")
        self._spent = True
        out = self.output if output is None else output
        loss_grad = np.asarray(loss_grad, dtype=np.float64)
        if loss_grad.shape != out.shape:
            raise DimensionError(f"loss_grad shape {loss_grad.shape} != output shape {out.shape}")
        grads = self._params.zeros_like()
        pending: dict[int, np.ndarray] = {id(out): loss_grad}
        for node, inputs, fn in reversed(self._ops):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            for x, gx in zip(inputs, fn(g, grads)):
                if gx is None:
                    continue
                key = id(x)
                if key in pending:
                    pending[key] = pending[key] + gx
                else:
                    pending[key] = gx
        return grads


def backward(loss_grad: np.ndarray, tape: Tape) -> ParamSet:
    """Gradients of the loss w.r.t. every parameter used in ``tape``."""
    return tape.backward(loss_grad)


def _flat(a: np.ndarray) -> np.ndarray:
    return a.reshape(-1, a.shape[-1])


def linear(x: np.ndarray, params: ParamSet, layer: str, tape: Tape | None = None) -> np.ndarray:
    W = params[f"{layer}.W"]
    b = params[f"{layer}.b"]
    if x.shape[-1] != W.shape[0]:
        raise DimensionError(f"layer {layer!r} expects {W.shape[0]} inputs, got {x.shape[-1]}")
    y = x @ W + b[0]
    if tape is not None:
        tape._bind(params)

        def back(g, grads):
            grads[f"{layer}.W"] += _flat(x).T @ _flat(g)
            grads[f"{layer}.b"] += _flat(g).sum(axis=0, keepdims=True)
            return (g @ W.T,)

        tape.record(y, (x,), back)
    return y


def relu(x: np.ndarray, tape: Tape | None = None) -> np.ndarray:
    y = np.maximum(x, 0.0)
    if tape is not None:
        tape.record(y, (x,), lambda g, _: (g * (x > 0),))
    return y


def concat(xs: Sequence[np.ndarray], tape: Tape | None = None) -> np.ndarray:
    y = np.concatenate(xs, axis=-1)
    if tape is not None:
        bounds = np.cumsum([0] + [x.shape[-1] for x in xs])

        def back(g, _):
            return tuple(g[..., a:b] for a, b in zip(bounds[:-1], bounds[1:]))

        tape.record(y, tuple(xs), back)
    return y


def mlp_forward(
    x: np.ndarray,
    params: ParamSet,
    activation: str = "relu",
    tape: Tape | None = None,
    prefix: str = "mlp",
    output_activation: str | None = None,
) -> np.ndarray:
    """Run the dense stack ``prefix.0, prefix.1, ...``.

    ``activation`` applies after every hidden layer and, unless
    ``output_activation`` says otherwise, after the last one too.
    """
    if activation not in ("relu", "identity"):
        raise ValueError(f"unknown activation {activation!r}")
    layers = mlp_layers(params, prefix)
    if not layers:
        raise DimensionError(f"no layers named {prefix}.0 ...")
    last_act = activation if output_activation is None else output_activation
    h = np.asarray(x, dtype=np.float64)
    for i, layer in enumerate(layers):
        h = linear(h, params, layer, tape)
        act = last_act if i == len(layers) - 1 else activation
        if act == "relu":
            h = relu(h, tape)
    return h


def _check_mask(mask: np.ndarray, n: int) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape[-2:] != (n, n):
        raise DimensionError(f"neighbor mask shape {mask.shape} does not match {n} agents")
    if not np.diagonal(mask, axis1=-2, axis2=-1).all():
        raise PreconditionError("neighbor mask must be reflexive: every agent attends to itself")
    return mask


def attention_conv(
    features: np.ndarray,
    neighbor_mask: np.ndarray,
    cfg: AttentionConfig,
    params: ParamSet,
    prefix: str = "conv0",
    tape: Tape | None = None,
) -> np.ndarray:
    """Multi-head dot-product attention restricted to graph neighbours.

    ``features`` is ``(..., N, F)``, ``neighbor_mask`` ``(..., N, N)`` with
    ``mask[i, j]`` true when agent ``i`` reads agent ``j``. Output rows are
    ``relu(W_out . concat_h sum_j softmax_j(q_i.k_j / sqrt(d_k)) v_j + b)``.
    """
    X = np.asarray(features, dtype=np.float64)
    n, d = X.shape[-2], X.shape[-1]
    if d != cfg.model_dim:
        raise DimensionError(f"attention {prefix!r} expects {cfg.model_dim} features, got {d}")
    mask = _check_mask(neighbor_mask, n)
    H, dk = cfg.heads, cfg.key_dim
    Wq, Wk, Wv = params[f"{prefix}.Wq"], params[f"{prefix}.Wk"], params[f"{prefix}.Wv"]
    Wo, bo = params[f"{prefix}.out.W"], params[f"{prefix}.out.b"]
    lead = X.shape[:-2]

    def heads(a):  # (..., N, H*dk) -> (..., H, N, dk)
        return np.swapaxes(a.reshape(*lead, n, H, dk), -2, -3)

    Q, K, V = heads(X @ Wq), heads(X @ Wk), heads(X @ Wv)
    scale = 1.0 / np.sqrt(dk)
    S = (Q @ np.swapaxes(K, -1, -2)) * scale
    m = mask[..., None, :, :]
    S = np.where(m, S, _NEG_INF)
    S = S - S.max(axis=-1, keepdims=True)
    E = np.exp(S)
    P = E / E.sum(axis=-1, keepdims=True)
    O = np.swapaxes(P @ V, -2, -3).reshape(*lead, n, H * dk)
    Z = O @ Wo + bo[0]
    Y = np.maximum(Z, 0.0)
    if tape is not None:
        tape._bind(params)

        def back(g, grads):
            dZ = g * (Z > 0)
            grads[f"{prefix}.out.W"] += _flat(O).T @ _flat(dZ)
            grads[f"{prefix}.out.b"] += _flat(dZ).sum(axis=0, keepdims=True)
            dO = heads(dZ @ Wo.T)
            dP = dO @ np.swapaxes(V, -1, -2)
            dV = np.swapaxes(P, -1, -2) @ dO
            dS = P * (dP - (dP * P).sum(axis=-1, keepdims=True)) * scale
            dQ = dS @ K
            dK = np.swapaxes(dS, -1, -2) @ Q

            def merge(a):  # (..., H, N, dk) -> (..., N, H*dk)
                return np.swapaxes(a, -2, -3).reshape(*lead, n, H * dk)

            dQm, dKm, dVm = merge(dQ), merge(dK), merge(dV)
            Xf = _flat(X)
            grads[f"{prefix}.Wq"] += Xf.T @ _flat(dQm)
            grads[f"{prefix}.Wk"] += Xf.T @ _flat(dKm)
            grads[f"{prefix}.Wv"] += Xf.T @ _flat(dVm)
            return (dQm @ Wq.T + dKm @ Wk.T + dVm @ Wv.T,)

        tape.record(Y, (X,), back)
    return Y
