"""Seeded synthetic data streams.

Random numbers come from numpy's PCG64 generator.  A run seed is expanded with
``SeedSequence(seed).spawn(3)`` into three independent streams, always in this
order: ``truth`` (ground-truth parameter), ``data`` (inputs and observations),
``fisher`` (Monte Carlo Fisher samples).
"""

import numpy as np

from . import expfam

STREAMS = ("truth", "data", "fisher")


def rngs(seed):
    children = np.random.SeedSequence(int(seed)).spawn(len(STREAMS))
    return {name: np.random.Generator(np.random.PCG64(ss)) for name, ss in zip(STREAMS, children)}


def draw_inputs(rng, steps, dim_u, dist="normal", low=0.0, high=1.0, scale=1.0):
    if dist == "normal":
        return scale * rng.standard_normal((steps, dim_u))
    return rng.uniform(low, high, size=(steps, dim_u))


def static_stream(model, family, theta_star, steps, rng, **inputs):
    """Pairs ``(u_t, y_t)`` with ``y_t ~ p(. | h(theta_star, u_t))``."""
    U = draw_inputs(rng, steps, model.dim_u, **inputs)
    return [(u, expfam.sample(family, model.predict(theta_star, u), rng)) for u in U]


def recurrent_stream(model, family, theta_star, y0, steps, rng, **inputs):
    """Pairs ``(u_t, y_t)`` generated by running the true recurrent model from ``y0``."""
    U = draw_inputs(rng, steps, model.dim_u, **inputs)
    y_state = np.asarray(y0, dtype=float)
    out = []
    for u in U:
        y_state = model.step(y_state, theta_star, u)
        out.append((u, expfam.sample(family, y_state[model.observed_slice], rng)))
    return out


def stable_matrix(rng, n, radius):
    """Random ``n x n`` matrix rescaled to the given spectral radius."""
    A = rng.standard_normal((n, n))
    return A * (radius / max(np.abs(np.linalg.eigvals(A)).max(), 1e-12))
