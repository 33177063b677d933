"""Dynamic Hawkes processes: Hawkes models whose kernels run on a learned, monotone clock."""

from .baselines import HawkesModel, HppModel, RppModel, SelfCorrectingModel
from .dynamics import ConstantDynamics, LinearRampDynamics, MixtureIntegralDynamics, PiecewiseConstantDynamics
from .events import EventSequence, SplitSpec, chronological_split, load_events, make_sequence, save_events
from .evaluate import EvaluationReport, mape, residual_diagnostics, test_nll
from .kernels import KernelFamily, KernelParams, KernelSpec, kernel_integral, kernel_value
from .models import DhpModel, identity_dhp, inject_dynamics, model_from_dict
from .simulate import SimConfig, thinning_simulate
from .training import Adam, SweepSpec, TrainConfig, TrainReport, fit, sweep

__version__ = "0.1.0"
