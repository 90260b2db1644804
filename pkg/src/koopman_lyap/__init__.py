"""Koopman-operator estimation of Lyapunov functions on a product-kernel RKHS."""
from .dynamics import (SampleSet, SystemDef, brusselator, fill_distance, get_system, lienard,
                       linear_map, linear_system, sample_trajectories, step)
from .exceptions import (ConfigError, ConvergenceWarning, DivergenceWarning, IllConditionedError,
                         InstabilityError, IntegrationDivergenceError, ParameterError)
from .kernels import ProductKernel, WendlandRadial, build_wendland, eval_kernel, gram, make_kernel
from .koopman import KoopmanEDMD, fit_kedmd, predict_trajectory, spectrum
from .lyapunov import (DecayKRR, DecayReport, LyapunovEstimator, LyapunovModel, check_decay,
                       estimate_lyapunov, eval_lyapunov, fit_decay, solve_stein)
from .oracle import exact_spectrum, linearized_lyapunov, series_stein, simulate_lyapunov

__version__ = "0.1.0"
