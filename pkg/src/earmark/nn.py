"""Minimal dense neural-network core: float64 numpy arrays, hand-written
forward and backward passes, and a finite-difference gradient checker.

There is no autodiff graph. Each layer caches what its own backward pass
needs; backward() accumulates into the parameter gradient buffers and
returns the gradient w.r.t. the layer input. Every backward here is
validated against central finite differences in the test suite.

Shape conventions: sequences are [T x D] matrices, one row per time step.
LSTM gate order is (input, forget, cell-candidate, output).
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError, ValidationError


class Parameter:
    """A named float64 array with a matching gradient buffer."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


class ParameterSet:
    """Ordered collection of uniquely named parameters."""

    def __init__(self):
        self._params: dict[str, Parameter] = {}

    def add(self, name: str, value: np.ndarray) -> Parameter:
        if name in self._params:
            raise ValidationError(f"duplicate parameter name {name!r}")
        p = Parameter(name, value)
        self._params[name] = p
        return p

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self):
        return len(self._params)

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grads(self) -> None:
        for p in self:
            p.grad[...] = 0.0

    def tensors(self) -> dict[str, np.ndarray]:
        return {p.name: p.value for p in self}

    def load_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        for p in self:
            if p.name not in tensors:
                raise ValidationError(f"checkpoint is missing parameter {p.name!r}")
            src = np.asarray(tensors[p.name], dtype=np.float64)
            if src.shape != p.value.shape:
                raise ValidationError(
                    f"shape mismatch for {p.name!r}: {src.shape} vs {p.value.shape}"
                )
            p.value[...] = src


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - np.max(x))
    return e / e.sum()


class Linear:
    """y_t = W x_t + b applied per row."""

    def __init__(self, in_dim: int, out_dim: int, params: ParameterSet, prefix: str,
                 rng: np.random.Generator):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.W = params.add(f"{prefix}.W", uniform_init(rng, (out_dim, in_dim), in_dim))
        self.b = params.add(f"{prefix}.b", np.zeros(out_dim))
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValidationError(f"linear expected [T x {self.in_dim}], got {x.shape}")
        self._x = x
        return x @ self.W.value.T + self.b.value

    def backward(self, dy: np.ndarray) -> np.ndarray:
        self.W.grad += dy.T @ self._x
        self.b.grad += dy.sum(axis=0)
        return dy @ self.W.value


def lstm_cell(x_t: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray,
              w_x: np.ndarray, w_h: np.ndarray, b: np.ndarray):
    """One LSTM step. Returns (h_t, c_t). Weights are [4H x D], [4H x H],
    [4H] with gates stacked in (i, f, g, o) order."""
    H = h_prev.shape[0]
    z = w_x @ x_t + w_h @ h_prev + b
    i = sigmoid(z[:H])
    f = sigmoid(z[H : 2 * H])
    g = np.tanh(z[2 * H : 3 * H])
    o = sigmoid(z[3 * H :])
    c_t = f * c_prev + i * g
    h_t = o * np.tanh(c_t)
    return h_t, c_t


class LstmDirection:
    """A single-direction LSTM over a full sequence, with BPTT backward.

    Initial hidden and cell states are zero. The input projection for all
    steps is batched into one matmul; only the recurrent matvec loops.
    """

    def __init__(self, in_dim: int, hidden: int, params: ParameterSet, prefix: str,
                 rng: np.random.Generator, forget_bias: float = 1.0):
        self.in_dim = in_dim
        self.hidden = hidden
        self.w_x = params.add(f"{prefix}.w_x", uniform_init(rng, (4 * hidden, in_dim), in_dim))
        self.w_h = params.add(f"{prefix}.w_h", uniform_init(rng, (4 * hidden, hidden), hidden))
        bias = np.zeros(4 * hidden)
        bias[hidden : 2 * hidden] = forget_bias
        self.b = params.add(f"{prefix}.b", bias)
        self._cache = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValidationError(f"lstm expected [T x {self.in_dim}], got {x.shape}")
        T, H = x.shape[0], self.hidden
        pre = x @ self.w_x.value.T + self.b.value
        w_h = self.w_h.value
        gates = np.empty((T, 4 * H))
        cs = np.empty((T, H))
        tanh_cs = np.empty((T, H))
        hs = np.empty((T, H))
        h = np.zeros(H)
        c = np.zeros(H)
        for t in range(T):
            z = pre[t] + w_h @ h
            i = sigmoid(z[:H])
            f = sigmoid(z[H : 2 * H])
            g = np.tanh(z[2 * H : 3 * H])
            o = sigmoid(z[3 * H :])
            c = f * c + i * g
            tc = np.tanh(c)
            h = o * tc
            gates[t, :H] = i
            gates[t, H : 2 * H] = f
            gates[t, 2 * H : 3 * H] = g
            gates[t, 3 * H :] = o
            cs[t] = c
            tanh_cs[t] = tc
            hs[t] = h
        self._cache = (x, gates, cs, tanh_cs, hs)
        return hs

    def backward(self, dh_out: np.ndarray) -> np.ndarray:
        x, gates, cs, tanh_cs, hs = self._cache
        T, H = x.shape[0], self.hidden
        w_h = self.w_h.value
        dz = np.empty((T, 4 * H))
        dh_rec = np.zeros(H)
        dc = np.zeros(H)
        for t in range(T - 1, -1, -1):
            i = gates[t, :H]
            f = gates[t, H : 2 * H]
            g = gates[t, 2 * H : 3 * H]
            o = gates[t, 3 * H :]
            c_prev = cs[t - 1] if t > 0 else np.zeros(H)
            dh = dh_out[t] + dh_rec
            do = dh * tanh_cs[t]
            dc = dc + dh * o * (1.0 - tanh_cs[t] ** 2)
            dz[t, :H] = dc * g * i * (1.0 - i)
            dz[t, H : 2 * H] = dc * c_prev * f * (1.0 - f)
            dz[t, 2 * H : 3 * H] = dc * i * (1.0 - g**2)
            dz[t, 3 * H :] = do * o * (1.0 - o)
            dh_rec = w_h.T @ dz[t]
            dc = dc * f
        self.w_x.grad += dz.T @ x
        if T > 1:
            self.w_h.grad += dz[1:].T @ hs[:-1]
        self.b.grad += dz.sum(axis=0)
        return dz @ self.w_x.value


class BiLstm:
    """Stack of bidirectional LSTM layers; per step the forward and
    backward hidden states are concatenated, [T x 2H] per layer."""

    def __init__(self, in_dim: int, hidden: int, layers: int, params: ParameterSet,
                 prefix: str, rng: np.random.Generator):
        if layers < 1:
            raise ValidationError("need at least one LSTM layer")
        self.hidden = hidden
        self.directions: list[tuple[LstmDirection, LstmDirection]] = []
        dim = in_dim
        for layer in range(layers):
            fwd = LstmDirection(dim, hidden, params, f"{prefix}.l{layer}.fwd", rng)
            bwd = LstmDirection(dim, hidden, params, f"{prefix}.l{layer}.bwd", rng)
            self.directions.append((fwd, bwd))
            dim = 2 * hidden
        self.out_dim = 2 * hidden

    def forward(self, x: np.ndarray) -> np.ndarray:
        for fwd, bwd in self.directions:
            h_f = fwd.forward(x)
            h_b = bwd.forward(x[::-1])[::-1]
            x = np.concatenate([h_f, h_b], axis=1)
        return x

    def backward(self, dy: np.ndarray) -> np.ndarray:
        H = self.hidden
        for fwd, bwd in reversed(self.directions):
            dx = fwd.backward(dy[:, :H])
            dx = dx + bwd.backward(dy[::-1, H:])[::-1]
            dy = dx
        return dy


class MaxPoolTime:
    """scores_c = max_t z[t, c]; ties go to the smallest t, and the
    gradient routes only to the winning rows."""

    def __init__(self):
        self._argmax = None
        self._shape = None

    def forward(self, z: np.ndarray) -> np.ndarray:
        if z.ndim != 2 or z.shape[0] < 1:
            raise ValidationError(f"max pool expected [T x C] with T >= 1, got {z.shape}")
        self._argmax = np.argmax(z, axis=0)
        self._shape = z.shape
        return z[self._argmax, np.arange(z.shape[1])]

    @property
    def argmax_rows(self) -> np.ndarray:
        return self._argmax

    def backward(self, dscores: np.ndarray) -> np.ndarray:
        dz = np.zeros(self._shape)
        dz[self._argmax, np.arange(self._shape[1])] = dscores
        return dz


class AttentionPool:
    """Additive attention with a single learned query:
    e_t = v . tanh(W_a h_t + b_a), alpha = softmax(e), context = sum alpha_t h_t."""

    def __init__(self, in_dim: int, attn_dim: int, params: ParameterSet, prefix: str,
                 rng: np.random.Generator):
        self.in_dim = in_dim
        self.attn_dim = attn_dim
        self.W_a = params.add(f"{prefix}.W_a", uniform_init(rng, (attn_dim, in_dim), in_dim))
        self.b_a = params.add(f"{prefix}.b_a", np.zeros(attn_dim))
        self.v = params.add(f"{prefix}.v", uniform_init(rng, attn_dim, attn_dim))
        self._cache = None

    def forward(self, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if h.ndim != 2 or h.shape[1] != self.in_dim:
            raise ValidationError(f"attention expected [T x {self.in_dim}], got {h.shape}")
        u = np.tanh(h @ self.W_a.value.T + self.b_a.value)
        alpha = softmax(u @ self.v.value)
        context = alpha @ h
        self._cache = (h, u, alpha)
        return context, alpha

    def backward(self, dcontext: np.ndarray) -> np.ndarray:
        h, u, alpha = self._cache
        dalpha = h @ dcontext
        dh = np.outer(alpha, dcontext)
        de = alpha * (dalpha - float(alpha @ dalpha))
        self.v.grad += u.T @ de
        du = np.outer(de, self.v.value)
        dpre = du * (1.0 - u**2)
        self.W_a.grad += dpre.T @ h
        self.b_a.grad += dpre.sum(axis=0)
        return dh + dpre @ self.W_a.value


def softmax_cross_entropy(logits: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    """Stable -log softmax(logits)[label]; the gradient is p - onehot."""
    c = logits.shape[0]
    if not 0 <= label < c:
        raise ValidationError(f"label {label} out of range for {c} classes")
    shifted = logits - np.max(logits)
    log_z = np.log(np.sum(np.exp(shifted)))
    loss = log_z - shifted[label]
    grad = np.exp(shifted - log_z)
    grad[label] -= 1.0
    return float(loss), grad


def clip_gradients(params: ParameterSet, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = np.sqrt(sum(float(np.sum(p.grad**2)) for p in params))
    if max_norm > 0.0 and total > max_norm:
        scale = max_norm / total
        for p in params:
            p.grad *= scale
    return total


def _check_grads(params: ParameterSet) -> None:
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise NumericError(f"non-finite gradient in {p.name!r}")


class Sgd:
    def __init__(self, lr: float, momentum: float = 0.0):
        self.lr = lr
        self.momentum = momentum
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, params: ParameterSet) -> None:
        _check_grads(params)
        for p in params:
            if self.momentum > 0.0:
                v = self.velocity.setdefault(p.name, np.zeros_like(p.value))
                v *= self.momentum
                v += p.grad
                p.value -= self.lr * v
            else:
                p.value -= self.lr * p.grad
        params.zero_grads()

    def state_tensors(self) -> dict[str, np.ndarray]:
        return {f"velocity.{k}": v for k, v in self.velocity.items()}

    def load_state_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        self.velocity = {
            k[len("velocity."):]: np.array(v) for k, v in tensors.items()
            if k.startswith("velocity.")
        }


class Adam:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: ParameterSet) -> None:
        _check_grads(params)
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p in params:
            m = self.m.setdefault(p.name, np.zeros_like(p.value))
            v = self.v.setdefault(p.name, np.zeros_like(p.value))
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad**2
            p.value -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)
        params.zero_grads()

    def state_tensors(self) -> dict[str, np.ndarray]:
        out = {"adam.t": np.array(float(self.t))}
        for k, m in self.m.items():
            out[f"adam.m.{k}"] = m
        for k, v in self.v.items():
            out[f"adam.v.{k}"] = v
        return out

    def load_state_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        self.t = int(tensors["adam.t"])
        self.m = {k[len("adam.m."):]: np.array(v) for k, v in tensors.items()
                  if k.startswith("adam.m.")}
        self.v = {k[len("adam.v."):]: np.array(v) for k, v in tensors.items()
                  if k.startswith("adam.v.")}


def make_optimizer(name: str, lr: float, momentum: float = 0.0):
    if name == "adam":
        return Adam(lr=lr)
    if name == "sgd":
        return Sgd(lr=lr, momentum=momentum)
    raise ValidationError(f"unknown optimizer {name!r}")


def finite_diff_gradcheck(loss_fn, params: ParameterSet, eps: float = 1e-4) -> float:
    """Max relative error between analytic gradients and central finite
    differences over every entry of every parameter.

    loss_fn() must run forward + backward (accumulating grads) and return
    the scalar loss; it must be deterministic. Relative error per entry is
    |analytic - fd| / max(1e-8, |analytic| + |fd|).
    """
    params.zero_grads()
    loss_fn()
    analytic = {p.name: p.grad.copy() for p in params}
    worst = 0.0
    for p in params:
        flat = p.value.reshape(-1)
        a_flat = analytic[p.name].reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            params.zero_grads()
            loss_plus = loss_fn()
            flat[idx] = orig - eps
            params.zero_grads()
            loss_minus = loss_fn()
            flat[idx] = orig
            fd = (loss_plus - loss_minus) / (2.0 * eps)
            a = a_flat[idx]
            rel = abs(a - fd) / max(1e-8, abs(a) + abs(fd))
            worst = max(worst, rel)
    params.zero_grads()
    return worst
