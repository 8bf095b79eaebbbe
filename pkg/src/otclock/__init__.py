"""otclock: simulation and analysis engine for the Ostreococcus tauri
circadian clock network.

Deterministic ODE integration (adaptive Dormand-Prince 5(4)), exact
stochastic simulation (Direct and Gibson-Bruck next-reaction methods) under
light-entrained time-dependent rates, statistical model-checking of
time-bounded probabilistic queries, fixed-point/eigenvalue analysis, and
mutational-robustness sweeps.
"""

__version__ = "0.1.0"

from .analysis import (DistributionAt, Estimate, EventuallyAt, Globally,
                       Predicate, distribution_surface, estimate, sweep_query)
from .ensemble import Ensemble
from .errors import (ClockError, ConvergenceFailure, EnsembleFormatError,
                     IntegrationFailure, InvalidQueryError, ModelError,
                     ModelParseError, NumericalFailure, RateEvaluationError,
                     SweepError)
from .light import (ConstantDark, ConstantLight, Periodic, Transfer, light_at,
                    segments, switch_times)
from .modelfile import parse_network, parse_network_file, serialize_network
from .network import Network, Reaction, SpeciesDef, builtin_ostreococcus, rescale
from .ode import OdeConfig, integrate, rhs
from .phase import (Cycle, PhaseConfig, PhaseResult, circular_stats,
                    detect_phases)
from .robustness import (MutationSpec, SweepResult, bin_factor_vs_phase,
                         run_sweep)
from .ssa import RunResult, SsaConfig, run_stream, simulate, simulate_ensemble
from .steady import (Classification, FixedPoint, classify, find_fixed_point,
                     jacobian_eigenvalues, locate_clock_fixed_points)
from .trace import Trace, trace_from_csv

__all__ = [
    "__version__",
    "builtin_ostreococcus", "rescale", "Network", "Reaction", "SpeciesDef",
    "parse_network", "parse_network_file", "serialize_network",
    "ConstantDark", "ConstantLight", "Periodic", "Transfer", "light_at",
    "segments", "switch_times",
    "OdeConfig", "integrate", "rhs", "Trace", "trace_from_csv",
    "SsaConfig", "RunResult", "simulate", "simulate_ensemble", "run_stream",
    "Ensemble",
    "Predicate", "EventuallyAt", "Globally", "DistributionAt", "Estimate",
    "estimate", "sweep_query", "distribution_surface",
    "PhaseConfig", "PhaseResult", "Cycle", "detect_phases", "circular_stats",
    "FixedPoint", "Classification", "find_fixed_point", "jacobian_eigenvalues",
    "classify", "locate_clock_fixed_points",
    "MutationSpec", "SweepResult", "run_sweep", "bin_factor_vs_phase",
    "ClockError", "ModelError", "ModelParseError", "RateEvaluationError",
    "IntegrationFailure", "ConvergenceFailure", "NumericalFailure",
    "InvalidQueryError", "EnsembleFormatError", "SweepError",
]
