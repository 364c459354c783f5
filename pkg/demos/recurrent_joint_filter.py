"""Train a small recurrent model two ways: a Kalman filter over the stacked
(parameter, hidden state) vector, and natural-gradient real-time recurrent
learning.  Then inspect the filter covariance through its block decomposition.

    python3 demos/recurrent_joint_filter.py
"""

import numpy as np

from ngkalman import ekf, equiv, expfam, models, recurrent
from ngkalman.data import recurrent_stream, stable_matrix

model = models.LinearRNN(dim_u=2, dim_y=3, observed=(0, 2))
family = expfam.gaussian(np.eye(2))
rng = np.random.default_rng(3)
theta_star = model.pack(stable_matrix(rng, 3, 0.7), rng.standard_normal((3, 2)))
data = recurrent_stream(model, family, theta_star, np.zeros(3), 100, rng)
theta0 = theta_star + 0.05 * rng.standard_normal(model.dim_theta)

rep = equiv.lockstep_recurrent(model, family, data, theta0, 0.01 * np.eye(model.dim_theta), np.zeros(3))
print(f"parameter gap {rep.max_theta_dev:.1e}, state gap {rep.max_state_dev:.1e}, "
      f"covariance structure gap {rep.max_structure_dev:.1e}")

# the filter's covariance splits into (P_theta, G, W) with W = 0 throughout
state = recurrent.build_joint(model, theta0, np.zeros(3), 0.01 * np.eye(model.dim_theta))
system = recurrent.JointSystem(model)
for t, (u, y) in enumerate(data[:20], start=1):
    state, _ = ekf.step(state, system, family, u, y)
blocks = recurrent.decompose_covariance(state.P, model.dim_theta, tol=1e-8)
print(f"after 20 steps: |W| = {np.abs(blocks.W).max():.1e}, |G| = {np.abs(blocks.G).max():.2f}")
print("G is the RTRL sensitivity of the hidden state to the parameters.")
