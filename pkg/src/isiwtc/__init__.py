"""Secure information rates of ISI wiretap channels with finite-state sources."""
from .channel import ObservationPair, gaussian_noise, transmit
from .errors import (ConfigError, InvalidRowsError, KappaDomainError, MemoryTooSmallError,
                     NoWaterError, NotIrreducibleError, NumericalError, ReducibleMatrixError,
                     SingularSystemError)
from .estimator import Seeds, TStatistics, estimate_secure_rate, t_statistics
from .optimizer import CellResult, OptimizeConfig, OptimizeResult, optimize, sweep
from .posterior import BOB, EVE, PosteriorTables, smooth
from .source import (EdgeDistribution, from_transitions, iud, load_distribution, sample_sequence,
                     save_distribution, validate, weyl_initializations)
from .surrogate import (SurrogateParams, maximize_surrogate, perron_frobenius, surrogate_penalty,
                        surrogate_value)
from .trellis import (DICODE, EPR4, Alphabet, IsiWtcSpec, JointTrellis, TransferPolynomial,
                      build_joint_trellis, normalize, snr_db_to_variance)
from .waterpour import SpectralSpec, flat_capacity, gain_to_noise_ratio_curve, waterpour_capacity

__version__ = "0.1.0"
