"""Extended Kalman filtering and online natural gradient, side by side.

Modules: :mod:`expfam` (output-noise families), :mod:`models` (prediction
maps), :mod:`ekf`, :mod:`natgrad`, :mod:`recurrent` (RTRL and the joint
filter), :mod:`equiv` (lockstep comparisons), :mod:`checks` (oracle suites),
:mod:`experiments` and :mod:`cli`.
"""

from . import checks, data, ekf, equiv, experiments, expfam, models, natgrad, recurrent
from .errors import ConfigError, ContractError, DecompositionError, DomainError, SingularityError

__version__ = "0.1.0"
