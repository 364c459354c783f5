"""Learning-rate schedules and fading-memory factors are two views of the same
quantity.  Convert a few schedules to decay factors and back, then track a
drifting target with a constant-rate filter.

    python3 demos/fading_memory_schedules.py
"""

import numpy as np

from ngkalman import ekf, expfam, models, natgrad
from ngkalman.natgrad import RateSchedule

schedules = {
    "1/(t+2)": RateSchedule.one_over_t_plus_c(2.0),
    "constant 0.1": RateSchedule.constant(0.1),
    "t^-1/2": RateSchedule.power_law(0.5, c=1.0),
}
print("schedule        lambda_1  lambda_10  lambda_100  round-trip error at t=1000")
for name, sched in schedules.items():
    lambdas = [natgrad.rate_to_decay(sched, t) for t in range(1, 1001)]
    err = abs(natgrad.decay_to_rate(lambdas, sched.rate(0), 1000) - sched.rate(1000))
    print(f"{name:14s}  {lambdas[0]:.4f}    {lambdas[9]:.4f}     {lambdas[99]:.4f}      {err:.1e}")

# a slope that flips sign halfway: memory decides how fast the filter notices
model = models.LinearModel(1, 1)
family = expfam.gaussian(0.1)
rng = np.random.default_rng(1)
for name in ("1/(t+2)", "constant 0.1"):
    sched = schedules[name]
    state = ekf.EkfState([0.0], [[sched.rate(0)]])
    for t in range(1, 401):
        slope = 1.0 if t <= 200 else -1.0
        u = rng.standard_normal(1)
        y = slope * u + np.sqrt(0.1) * rng.standard_normal(1)
        state, _ = ekf.step(state, model, family, u, y, lam=natgrad.rate_to_decay(sched, t))
    print(f"{name:14s} slope estimate after the flip: {state.s[0]:+.3f} (truth -1)")
