"""Joint Gaussian-process estimation of activation weights and a continuous HRF."""

from .design import (MeasurementBuild, RhoMap, build_design_matrix,
                     build_h_measurements, collect_rho)
from .errors import (ConfigError, DegenerateBeta, DegenerateDesign,
                     DegenerateInput, DegenerateTruth, DimensionMismatch,
                     EmptySupport, GphrfError, NonFinite, ParseError,
                     SingularCovariance)
from .estimator import (FitConfig, FitResult, estimate_beta, estimate_h_step,
                        fit, output_grid)
from .gp import (ConditionedGP, GPPosterior, GPPrior, HyperoptResult,
                 LinearMeasurement, OptimizerConfig, condition, cross_cov,
                 loo_error, marginal_loglik, marginal_loglik_grad,
                 measurement_cov, optimize_hyperparams)
from .hrf import (CANONICAL, GammaDiffParams, gamma_difference_hrf,
                  hrf_function, peaked, zero_mean)
from .kernels import KernelParams, eval_kernel, get_kernel, gram, kernel_grad
from .paradigm import (DEFAULT_SUPPORT, Event, HRFSupport, Paradigm,
                       SamplingGrid)
from .scores import (BenchmarkConfig, BenchmarkResult, ScoreReport,
                     benchmark_grid, pearson, posterior_mean_function,
                     prediction_score, projection_score, r2_score, summarize)
from .synth import (SimulatedSignal, SynthConfig, calibrated_beta,
                    generate_paradigm, sampling_grid_for, simulate_signal)

__version__ = "0.1.0"
