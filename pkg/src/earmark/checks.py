"""Gradient validation suite covering every trainable layer.

Each check builds a small random instance, wires the layer input in as a
parameter so input gradients are verified too, reduces the output to a
scalar with fixed random weights, and compares analytic gradients against
central finite differences. The max-pool check resamples until the pooled
winners have a clear margin, since finite differences are meaningless at
an argmax tie.
"""

from __future__ import annotations

import numpy as np

from .nn import (AttentionPool, BiLstm, Linear, LstmDirection, MaxPoolTime, ParameterSet,
                 finite_diff_gradcheck, softmax_cross_entropy)

GRADCHECK_TOLERANCE = 1e-4


def _weighted_sum_check(build, seed: int, eps: float) -> float:
    """Gradcheck loss = sum(probe * layer(x)) with x itself a parameter.

    build(rng, params) must return (x_shape, forward, backward) where
    forward(x) evaluates the layer and backward(dy) accumulates parameter
    gradients and returns the input gradient.
    """
    rng = np.random.default_rng(seed)
    params = ParameterSet()
    x_shape, forward, backward = build(rng, params)
    x = params.add("x", rng.standard_normal(x_shape))
    probe = {}

    def loss_fn():
        y = forward(x.value)
        if "w" not in probe:
            probe["w"] = np.random.default_rng(seed + 7).standard_normal(y.shape)
        x.grad += backward(probe["w"])
        return float(np.sum(probe["w"] * y))

    return finite_diff_gradcheck(loss_fn, params, eps)


def check_linear(seed: int, eps: float = 1e-4) -> float:
    def build(rng, params):
        t, d, c = int(rng.integers(1, 6)), int(rng.integers(1, 5)), int(rng.integers(2, 5))
        layer = Linear(d, c, params, "lin", rng)
        return (t, d), layer.forward, layer.backward

    return _weighted_sum_check(build, seed, eps)


def check_lstm_cell_bptt(seed: int, eps: float = 1e-4, steps: int = 3) -> float:
    def build(rng, params):
        d, h = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        layer = LstmDirection(d, h, params, "cell", rng)
        return (steps, d), layer.forward, layer.backward

    return _weighted_sum_check(build, seed, eps)


def check_bilstm(seed: int, eps: float = 1e-4) -> float:
    def build(rng, params):
        t, d, h = int(rng.integers(2, 8)), int(rng.integers(1, 5)), int(rng.integers(1, 5))
        layer = BiLstm(d, h, 2, params, "bilstm", rng)
        return (t, d), layer.forward, layer.backward

    return _weighted_sum_check(build, seed, eps)


def check_attention_pool(seed: int, eps: float = 1e-4) -> float:
    def build(rng, params):
        t, h, a = int(rng.integers(1, 8)), int(rng.integers(1, 5)), int(rng.integers(1, 5))
        layer = AttentionPool(h, a, params, "attn", rng)
        forward = lambda x: layer.forward(x)[0][None, :]
        backward = lambda dy: layer.backward(dy[0])
        return (t, h), forward, backward

    return _weighted_sum_check(build, seed, eps)


def check_maxpool_path(seed: int, eps: float = 1e-4, margin: float = 1e-2) -> float:
    """Cross-entropy on max-pooled per-step logits, away from argmax ties."""
    rng = np.random.default_rng(seed)
    params = ParameterSet()
    t, d, c = int(rng.integers(2, 8)), int(rng.integers(1, 5)), int(rng.integers(2, 5))
    layer = Linear(d, c, params, "lin", rng)
    pool = MaxPoolTime()
    label = int(rng.integers(0, c))
    x_val = None
    for attempt in range(50):
        x_val = np.random.default_rng([seed, attempt]).standard_normal((t, d))
        z = layer.forward(x_val)
        top2 = np.sort(z, axis=0)[-2:]
        if t == 1 or np.min(top2[1] - top2[0]) > margin:
            break
    x = params.add("x", x_val)

    def loss_fn():
        z = layer.forward(x.value)
        loss, dscores = softmax_cross_entropy(pool.forward(z), label)
        x.grad += layer.backward(pool.backward(dscores))
        return loss

    return finite_diff_gradcheck(loss_fn, params, eps)


def check_cross_entropy(seed: int, eps: float = 1e-4) -> float:
    rng = np.random.default_rng(seed)
    params = ParameterSet()
    c = int(rng.integers(2, 6))
    logits = params.add("logits", rng.standard_normal(c))
    label = int(rng.integers(0, c))

    def loss_fn():
        loss, grad = softmax_cross_entropy(logits.value, label)
        logits.grad += grad
        return loss

    return finite_diff_gradcheck(loss_fn, params, eps)


LAYER_CHECKS = (
    ("linear", check_linear),
    ("lstm_cell_bptt3", check_lstm_cell_bptt),
    ("bilstm_2layer", check_bilstm),
    ("attention_pool", check_attention_pool),
    ("maxpool_path", check_maxpool_path),
    ("cross_entropy", check_cross_entropy),
)


def gradient_suite(seed: int = 0) -> list[tuple[str, float]]:
    """Max relative gradient error for every layer at this seed."""
    return [(name, fn(seed)) for name, fn in LAYER_CHECKS]
