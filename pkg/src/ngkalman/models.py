"""Prediction maps with exact Jacobians.

Static models compute ``y_hat = h(theta, u)``; recurrent models advance a
full internal state ``y_hat_t = Phi(y_hat_{t-1}, theta, u_t)``, of which a
contiguous slice is read by the output family.

Parameter vectors are flattened row-major, one weight matrix at a time in
declaration order, each bias directly after its matrix:

==============  ===================================
Linear          ``A (dim_y x dim_u)``, ``b`` (if bias)
OneHiddenLayer  ``W1 (hidden x dim_u)``, ``b1``, ``W2 (dim_y x hidden)``, ``b2``
LinearRNN       ``A (n x n)``, ``B (n x dim_u)``
TanhRNN         ``A (n x n)``, ``B (n x dim_u)``, ``c``
==============  ===================================
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError


def _vec(x, n, name):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (n,):
        raise ContractError(f"{name} must have shape ({n},), got {x.shape}")
    return x


def _row_kron(n, v):
    """Jacobian of ``M @ v`` with respect to row-major ``vec(M)``, M of shape (n, len(v))."""
    return np.kron(np.eye(n), v[None, :])


# ---------------------------------------------------------------------------
# static models

@dataclass(frozen=True)
class LinearModel:
    """``h = A u (+ b)``."""

    dim_u: int
    dim_y: int
    bias: bool = False

    @property
    def dim_theta(self):
        return self.dim_y * self.dim_u + (self.dim_y if self.bias else 0)

    def unpack(self, theta):
        theta = _vec(theta, self.dim_theta, "theta")
        k = self.dim_y * self.dim_u
        A = theta[:k].reshape(self.dim_y, self.dim_u)
        b = theta[k:] if self.bias else np.zeros(self.dim_y)
        return A, b

    def predict(self, theta, u):
        A, b = self.unpack(theta)
        return A @ _vec(u, self.dim_u, "u") + b

    def jacobian_theta(self, theta, u):
        _vec(theta, self.dim_theta, "theta")
        u = _vec(u, self.dim_u, "u")
        H = _row_kron(self.dim_y, u)
        if self.bias:
            H = np.hstack([H, np.eye(self.dim_y)])
        return H

    def fan_in(self):
        return np.full(self.dim_theta, float(self.dim_u))


@dataclass(frozen=True)
class OneHiddenLayerNet:
    """``h = W2 tanh(W1 u + b1) + b2``."""

    dim_u: int
    hidden: int
    dim_y: int

    @property
    def dim_theta(self):
        return self.hidden * (self.dim_u + 1) + self.dim_y * (self.hidden + 1)

    def unpack(self, theta):
        theta = _vec(theta, self.dim_theta, "theta")
        m, q, p = self.dim_u, self.hidden, self.dim_y
        i = 0
        W1 = theta[i:i + q * m].reshape(q, m); i += q * m
        b1 = theta[i:i + q]; i += q
        W2 = theta[i:i + p * q].reshape(p, q); i += p * q
        b2 = theta[i:i + p]
        return W1, b1, W2, b2

    def predict(self, theta, u):
        W1, b1, W2, b2 = self.unpack(theta)
        return W2 @ np.tanh(W1 @ _vec(u, self.dim_u, "u") + b1) + b2

    def jacobian_theta(self, theta, u):
        W1, b1, W2, b2 = self.unpack(theta)
        u = _vec(u, self.dim_u, "u")
        z = np.tanh(W1 @ u + b1)
        back = W2 * (1.0 - z**2)[None, :]          # d h / d (pre-activation)
        return np.hstack([
            back @ _row_kron(self.hidden, u),
            back,
            _row_kron(self.dim_y, z),
            np.eye(self.dim_y),
        ])

    def fan_in(self):
        q, p = self.hidden, self.dim_y
        return np.concatenate([
            np.full(q * self.dim_u + q, float(self.dim_u)),
            np.full(p * q + p, float(q)),
        ])


# ---------------------------------------------------------------------------
# recurrent models

@dataclass(frozen=True)
class LinearRNN:
    """``y_t = A y_{t-1} + B u_t``."""

    dim_u: int
    dim_y: int
    observed: tuple = None

    def __post_init__(self):
        _check_observed(self)

    @property
    def dim_theta(self):
        n = self.dim_y
        return n * n + n * self.dim_u

    @property
    def observed_slice(self):
        return slice(*self.observed) if self.observed else slice(0, self.dim_y)

    def unpack(self, theta):
        theta = _vec(theta, self.dim_theta, "theta")
        n = self.dim_y
        return theta[:n * n].reshape(n, n), theta[n * n:].reshape(n, self.dim_u)

    def pack(self, A, B):
        return np.concatenate([np.ravel(A), np.ravel(B)]).astype(float)

    def step(self, y_prev, theta, u):
        A, B = self.unpack(theta)
        return A @ _vec(y_prev, self.dim_y, "y_prev") + B @ _vec(u, self.dim_u, "u")

    def jacobians(self, y_prev, theta, u):
        A, _ = self.unpack(theta)
        y_prev = _vec(y_prev, self.dim_y, "y_prev")
        u = _vec(u, self.dim_u, "u")
        d_theta = np.hstack([_row_kron(self.dim_y, y_prev), _row_kron(self.dim_y, u)])
        return d_theta, A.copy()

    def fan_in(self):
        return np.full(self.dim_theta, float(self.dim_y + self.dim_u))


@dataclass(frozen=True)
class TanhRNN:
    """``y_t = tanh(A y_{t-1} + B u_t + c)``."""

    dim_u: int
    dim_y: int
    observed: tuple = None

    def __post_init__(self):
        _check_observed(self)

    @property
    def dim_theta(self):
        n = self.dim_y
        return n * n + n * self.dim_u + n

    @property
    def observed_slice(self):
        return slice(*self.observed) if self.observed else slice(0, self.dim_y)

    def unpack(self, theta):
        theta = _vec(theta, self.dim_theta, "theta")
        n, m = self.dim_y, self.dim_u
        A = theta[:n * n].reshape(n, n)
        B = theta[n * n:n * n + n * m].reshape(n, m)
        return A, B, theta[n * n + n * m:]

    def pack(self, A, B, c):
        return np.concatenate([np.ravel(A), np.ravel(B), np.ravel(c)]).astype(float)

    def step(self, y_prev, theta, u):
        A, B, c = self.unpack(theta)
        return np.tanh(A @ _vec(y_prev, self.dim_y, "y_prev") + B @ _vec(u, self.dim_u, "u") + c)

    def jacobians(self, y_prev, theta, u):
        A, B, c = self.unpack(theta)
        y_prev = _vec(y_prev, self.dim_y, "y_prev")
        u = _vec(u, self.dim_u, "u")
        d = 1.0 - np.tanh(A @ y_prev + B @ u + c) ** 2
        n = self.dim_y
        raw = np.hstack([_row_kron(n, y_prev), _row_kron(n, u), np.eye(n)])
        return d[:, None] * raw, d[:, None] * A

    def fan_in(self):
        return np.full(self.dim_theta, float(self.dim_y + self.dim_u))


def _check_observed(model):
    if model.observed is None:
        return
    lo, hi = model.observed
    if not 0 <= lo < hi <= model.dim_y:
        raise ContractError(f"observed slice {model.observed} outside state of dim {model.dim_y}")


def observed_dim(model):
    s = model.observed_slice
    return s.stop - s.start


# ---------------------------------------------------------------------------
# functional surface

def predict(model, theta, u):
    return model.predict(theta, u)


def jacobian_theta(model, theta, u):
    return model.jacobian_theta(theta, u)


def step_recurrent(model, y_prev, theta, u):
    return model.step(y_prev, theta, u)


def jacobians_recurrent(model, y_prev, theta, u):
    """Return ``(dPhi/dtheta, dPhi/dy_prev)`` at the given point."""
    return model.jacobians(y_prev, theta, u)


def fd_jacobian(f, x, h=1e-6):
    """Central-difference Jacobian of ``f`` at ``x``, one column per coordinate."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.atleast_1d(f(x + e)) - np.atleast_1d(f(x - e))) / (2 * h))
    if not cols:
        return np.zeros((np.atleast_1d(f(x)).size, 0))
    return np.column_stack(cols)


STATIC_KINDS = {"linear": LinearModel, "one_hidden_layer": OneHiddenLayerNet}
RECURRENT_KINDS = {"linear_rnn": LinearRNN, "tanh_rnn": TanhRNN}


def from_config(cfg):
    """Build a model from a dict like ``{"kind": "linear", "dim_u": 5, "dim_y": 1}``."""
    kind = cfg.get("kind")
    try:
        if kind == "linear":
            return LinearModel(int(cfg["dim_u"]), int(cfg["dim_y"]), bool(cfg.get("bias", False)))
        if kind == "one_hidden_layer":
            return OneHiddenLayerNet(int(cfg["dim_u"]), int(cfg["hidden"]), int(cfg["dim_y"]))
        if kind in RECURRENT_KINDS:
            obs = cfg.get("observed_slice")
            return RECURRENT_KINDS[kind](int(cfg["dim_u"]), int(cfg["dim_y"]),
                                         tuple(obs) if obs is not None else None)
    except KeyError as exc:
        raise ContractError(f"model.{exc.args[0]} is required for model kind {kind!r}") from None
    raise ContractError(f"model.kind must be one of {sorted({**STATIC_KINDS, **RECURRENT_KINDS})}; got {kind!r}")


def is_recurrent(model):
    return hasattr(model, "step")
