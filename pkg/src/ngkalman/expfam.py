"""Output-noise models: exponential families in mean parameterization.

Three families are provided: Gaussian with a known covariance, Bernoulli, and
categorical over ``K`` classes.  The mean parameter ``mean`` is always
``E[T(y)]`` for the sufficient statistics ``T``.  For the categorical family
the last class is the reference class and is left out of ``T`` and of the
mean, so ``stat_dim == K - 1``.  Classes are numbered ``1..K``.

All functions are pure; :class:`ExpFamModel` instances are immutable.
"""

from dataclasses import dataclass, field

import numpy as np

from ._linalg import spd_inv, spd_solve
from .errors import ContractError, DomainError, SingularityError

GAUSSIAN = "gaussian"
BERNOULLI = "bernoulli"
CATEGORICAL = "categorical"

#: means closer than this to the probability-simplex boundary are rejected
BOUNDARY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ExpFamModel:
    kind: str
    fixed_cov: np.ndarray | None = None
    n_classes: int = 0
    _chol: np.ndarray | None = field(default=None, repr=False)

    @property
    def stat_dim(self):
        if self.kind == GAUSSIAN:
            return self.fixed_cov.shape[0]
        if self.kind == BERNOULLI:
            return 1
        return self.n_classes - 1

    @property
    def is_discrete(self):
        return self.kind != GAUSSIAN

    def __repr__(self):
        if self.kind == GAUSSIAN:
            return f"ExpFamModel(gaussian, dim={self.stat_dim})"
        if self.kind == CATEGORICAL:
            return f"ExpFamModel(categorical, K={self.n_classes})"
        return "ExpFamModel(bernoulli)"


def gaussian(cov):
    """Gaussian with fixed covariance ``cov``; a scalar or 1-d input means a diagonal."""
    cov = np.asarray(cov, dtype=float)
    if cov.ndim == 0:
        cov = cov.reshape(1, 1)
    elif cov.ndim == 1:
        cov = np.diag(cov)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ContractError(f"covariance must be square, got shape {cov.shape}")
    if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-12:
        raise ContractError("covariance must be symmetric")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ContractError("covariance must be positive-definite") from exc
    cov = cov.copy()
    cov.setflags(write=False)
    return ExpFamModel(GAUSSIAN, fixed_cov=cov, _chol=chol)


def bernoulli():
    return ExpFamModel(BERNOULLI)


def categorical(n_classes):
    if int(n_classes) != n_classes or n_classes < 2:
        raise ContractError(f"categorical needs K >= 2 classes, got {n_classes}")
    return ExpFamModel(CATEGORICAL, n_classes=int(n_classes))


def from_config(cfg):
    """Build a family from a plain dict such as ``{"kind": "gaussian", "fixed_cov": [[1]]}``.

    ``cov`` is accepted as a short alias of ``fixed_cov``.
    """
    kind = cfg.get("kind")
    if kind == GAUSSIAN:
        cov = cfg.get("fixed_cov", cfg.get("cov"))
        if cov is None:
            raise ContractError("family.fixed_cov is required for a gaussian family")
        return gaussian(cov)
    if kind == BERNOULLI:
        return bernoulli()
    if kind == CATEGORICAL:
        return categorical(cfg.get("n_classes", 0))
    raise ContractError(f"family.kind must be one of gaussian, bernoulli, categorical; got {kind!r}")


# ---------------------------------------------------------------------------
# validation

def _check_mean(model, mean):
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    if mean.shape != (model.stat_dim,):
        raise ContractError(f"mean must have shape ({model.stat_dim},), got {mean.shape}")
    if not np.all(np.isfinite(mean)):
        raise DomainError("mean is not finite")
    if model.kind == GAUSSIAN:
        return mean
    last = 1.0 - mean.sum()
    if mean.min() < BOUNDARY_TOL or last < BOUNDARY_TOL:
        raise DomainError(f"mean {mean} is not strictly inside the probability simplex")
    return mean


def _class_index(model, y):
    if model.kind == BERNOULLI:
        k = np.asarray(y).reshape(-1)
        if k.size != 1 or k[0] not in (0, 1):
            raise DomainError(f"bernoulli observation must be 0 or 1, got {y!r}")
        return int(k[0])
    k = np.asarray(y).reshape(-1)
    if k.size != 1 or k[0] != int(k[0]) or not 1 <= k[0] <= model.n_classes:
        raise DomainError(f"categorical observation must be a class in 1..{model.n_classes}, got {y!r}")
    return int(k[0])


# ---------------------------------------------------------------------------
# operations

def sufficient_stats(model, y):
    """T(y): identity for Gaussian, y for Bernoulli, one-hot over classes 1..K-1."""
    if model.kind == GAUSSIAN:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if y.shape != (model.stat_dim,) or not np.all(np.isfinite(y)):
            raise DomainError(f"gaussian observation must be a finite vector of length {model.stat_dim}")
        return y.copy()
    k = _class_index(model, y)
    if model.kind == BERNOULLI:
        return np.array([float(k)])
    T = np.zeros(model.stat_dim)
    if k < model.n_classes:
        T[k - 1] = 1.0
    return T


def log_likelihood(model, y, mean):
    """Loss -ln p(y | mean), normalization constants included."""
    mean = _check_mean(model, mean)
    if model.kind == GAUSSIAN:
        r = sufficient_stats(model, y) - mean
        z = np.linalg.solve(model._chol, r)
        logdet = 2.0 * np.sum(np.log(np.diag(model._chol)))
        return float(0.5 * z @ z + 0.5 * logdet + 0.5 * model.stat_dim * np.log(2 * np.pi))
    k = _class_index(model, y)
    if model.kind == BERNOULLI:
        return float(-np.log(mean[0] if k == 1 else 1.0 - mean[0]))
    p = mean[k - 1] if k < model.n_classes else 1.0 - mean.sum()
    return float(-np.log(p))


def stat_covariance(model, mean):
    """Covariance R of T(y) under the given mean."""
    try:
        mean = _check_mean(model, mean)
    except DomainError as exc:
        raise SingularityError(f"statistic covariance is singular or undefined: {exc}") from exc
    if model.kind == GAUSSIAN:
        return np.array(model.fixed_cov)
    return np.diag(mean) - np.outer(mean, mean)


def fisher_wrt_mean(model, mean):
    """Fisher matrix of y with respect to its mean parameter, R(mean)^-1."""
    return spd_inv(stat_covariance(model, mean), "statistic covariance")


def loss_grad_mean(model, y, mean):
    """Row gradient d(-ln p)/d(mean) = -(T(y) - mean)^T R^-1."""
    R = stat_covariance(model, mean)
    resid = sufficient_stats(model, y) - np.asarray(mean, dtype=float).reshape(-1)
    return -spd_solve(R, resid, "statistic covariance")


def mean_to_natural(model, mean):
    mean = _check_mean(model, mean)
    if model.kind == GAUSSIAN:
        return np.linalg.solve(model.fixed_cov, mean)
    return np.log(mean) - np.log1p(-mean.sum())


def natural_to_mean(model, natural):
    natural = np.atleast_1d(np.asarray(natural, dtype=float))
    if natural.shape != (model.stat_dim,):
        raise ContractError(f"natural parameter must have shape ({model.stat_dim},)")
    if model.kind == GAUSSIAN:
        return model.fixed_cov @ natural
    # softmax with the reference class pinned at 0
    m = max(0.0, natural.max())
    e = np.exp(natural - m)
    return e / (np.exp(-m) + e.sum())


def mean_natural_roundtrip(model, mean):
    """Map mean -> natural -> mean; returns ``(natural, recovered_mean)``."""
    natural = mean_to_natural(model, mean)
    return natural, natural_to_mean(model, natural)


def sample(model, mean, rng, size=None):
    """Draw observations; class labels for discrete families, vectors for Gaussian."""
    mean = _check_mean(model, mean)
    if model.kind == GAUSSIAN:
        shape = () if size is None else (size,)
        z = rng.standard_normal(shape + (model.stat_dim,))
        return mean + z @ model._chol.T
    if model.kind == BERNOULLI:
        u = rng.random(size)
        return (u < mean[0]).astype(int)
    probs = np.append(mean, 1.0 - mean.sum())
    return rng.choice(np.arange(1, model.n_classes + 1), size=size, p=probs / probs.sum())


def outcomes(model):
    """All observations of a discrete family, in class order."""
    if model.kind == BERNOULLI:
        return [0, 1]
    if model.kind == CATEGORICAL:
        return list(range(1, model.n_classes + 1))
    raise ContractError("a gaussian family has no finite outcome set")


def probability(model, y, mean):
    return float(np.exp(-log_likelihood(model, y, mean)))


def enumerate_expectation(model, mean, fn):
    """Exact expectation of ``fn(y)`` over the outcomes of a discrete family."""
    total = None
    for y in outcomes(model):
        term = probability(model, y, mean) * np.asarray(fn(y), dtype=float)
        total = term if total is None else total + term
    return total


__all__ = [
    "ExpFamModel", "gaussian", "bernoulli", "categorical", "from_config",
    "sufficient_stats", "log_likelihood", "stat_covariance", "fisher_wrt_mean",
    "loss_grad_mean", "mean_to_natural", "natural_to_mean", "mean_natural_roundtrip",
    "sample", "outcomes", "probability", "enumerate_expectation",
]
