"""A Gaussian prior under fading memory turns into a Fisher ridge plus weight
decay toward the prior mean.  With no information in the inputs, the parameter
relaxes back to the prior on both the filter side and the optimizer side.

    python3 demos/prior_as_weight_decay.py
"""

import numpy as np

from ngkalman import equiv, expfam, models
from ngkalman.data import static_stream
from ngkalman.natgrad import PriorSpec, RateSchedule

model = models.LinearModel(2, 1)
family = expfam.gaussian(1.0)
prior = PriorSpec(theta_prior=[1.0, -1.0], sigma0=np.eye(2), n_prior=1.0)
schedule = RateSchedule.constant(0.1)

silent = [(np.zeros(2), np.array([3.0]))] * 200
rep = equiv.lockstep_regularized(model, family, silent, prior, schedule, theta0=[4.0, 3.0])
print(f"uninformative inputs: max deviation between the two sides {rep.max_deviation:.1e}")

rng = np.random.default_rng(2)
data = static_stream(model, family, np.array([0.5, 0.5]), 200, rng)
for n_prior in (0.0, 1.0, 10.0):
    p = PriorSpec(prior.theta_prior, prior.sigma0, n_prior)
    rep = equiv.lockstep_regularized(model, family, data, p, schedule)
    print(f"n_prior = {n_prior:4.1f}: max deviation {rep.max_deviation:.1e} over {rep.steps} steps")
