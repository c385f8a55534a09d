"""Group replication for exploiting stragglers: scheduler, simulator, experiments."""

from .scheduler import GroupAssignment, MasterState, NoWork, SkipSignal, new_master
from .sim_engine import Elasticity, Policy, SimConfig, SimResult, run
from .straggler_model import (PDF_I1, PDF_I2, PDF_N, Deterministic, Histogram, MixtureModel,
                              ShiftedExp, build_histogram, fit_profile_weights, mixture_mean)

__version__ = "0.1.0"
