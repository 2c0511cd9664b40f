"""Forward-backward smoothing of one observation sequence on the joint trellis."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NumericalError
from .source import EdgeDistribution
from .trellis import JointTrellis

BOB = "bob"
EVE = "eve"


@dataclass(frozen=True, eq=False)
class PosteriorTables:
    """Per-time state and edge posteriors, kept in the log domain.

    Row ``t`` (0-based) of ``log_single`` is ``log P(S_t | obs)`` and row
    ``t`` of ``log_pairwise`` is ``log P(S_t, S_{t+1} | obs)``, i.e. the
    factors attached to observation ``t + 1``.
    """

    log_single: np.ndarray
    log_pairwise: np.ndarray
    loglik: float

    @property
    def n(self) -> int:
        return int(self.log_pairwise.shape[0])

    @property
    def single(self) -> np.ndarray:
        return np.exp(self.log_single)

    @property
    def pairwise(self) -> np.ndarray:
        return np.exp(self.log_pairwise)


def gaussian_log_metrics(trellis: JointTrellis, observations, noise_variance: float,
                         which: str = BOB) -> np.ndarray:
    """``-(obs_t - u_e)^2 / (2 sigma^2)`` for every time and edge."""
    if not noise_variance > 0:
        raise ValueError("noise_variance must be positive for smoothing")
    u = _outputs(trellis, which)
    obs = np.asarray(observations, dtype=float)
    if not np.all(np.isfinite(obs)):
        raise ValueError("observations must be finite")
    return -(obs[:, None] - u[None, :]) ** 2 / (2.0 * noise_variance)


def _outputs(trellis: JointTrellis, which: str) -> np.ndarray:
    if which == BOB:
        return trellis.uB
    if which == EVE:
        return trellis.uE
    raise ValueError(f"which must be {BOB!r} or {EVE!r}, got {which!r}")


def smooth_log_metrics(dist: EdgeDistribution, log_metrics: np.ndarray) -> PosteriorTables:
    """Smooth with arbitrary per-edge log-likelihoods, ``alpha_0 = mu``, ``beta_n = 1``."""
    tr = dist.trellis
    log_metrics = np.ascontiguousarray(log_metrics, dtype=float)
    if log_metrics.ndim != 2 or log_metrics.shape[1] != tr.n_edges:
        raise ValueError("log_metrics must have shape (n, n_edges)")
    n = log_metrics.shape[0]
    with np.errstate(divide="ignore"):
        logp = np.log(dist.p)
        logmu = np.log(dist.mu)
    log_pairwise = np.empty((n, tr.n_edges))
    log_single = np.empty((n, tr.n_states))
    try:
        loglik = _kernels.forward_backward(log_metrics, logp, logmu,
                                           np.asarray(tr.edge_from), np.asarray(tr.edge_to),
                                           tr.n_states, log_pairwise, log_single)
    except FloatingPointError as exc:
        raise NumericalError(str(exc)) from exc
    return PosteriorTables(log_single=log_single, log_pairwise=log_pairwise, loglik=float(loglik))


def smooth(trellis: JointTrellis, dist: EdgeDistribution, observations, noise_variance: float,
           which: str = BOB) -> PosteriorTables:
    """Posteriors of ``S_{t-1}`` and ``(S_{t-1}, S_t)`` given the full sequence."""
    if not dist.trellis.same_structure(trellis):
        raise ValueError("distribution belongs to a different trellis")
    return smooth_log_metrics(dist, gaussian_log_metrics(trellis, observations, noise_variance, which))
