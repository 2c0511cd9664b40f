"""Concave local surrogate of the secure rate and its closed-form maximizer.

Around the current point ``Qt`` the rate is replaced by

    psi(Q) = sum_e Q_e * payoff_e - penalty(Q)
    penalty(Q) = kp * ( sum_e Qt_e a_e log a_e - sum_i mut_i b_i log b_i )

with ``a_e = 1 + k (Q_e - Qt_e)/Qt_e``, ``b_i = 1 + k (mu_i - mut_i)/mut_i``
and ``payoff_e = tB_e - tE_e`` frozen at ``Qt``.  The maximizer over the flow
polytope follows from the Perron-Frobenius eigenpair of the tilted matrix
``A_ij = pt_ij exp(payoff_ij / (k kp))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from .errors import (ConfigError, KappaDomainError, NotIrreducibleError, NumericalError,
                     ReducibleMatrixError, SingularSystemError)
from .source import EdgeDistribution, _check_irreducible, from_transitions
from .trellis import JointTrellis

PF_TOL = 1e-12
PF_MAX_ITER = 200_000
KAPPA_BUMP = 0.01
SYSTEM_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class SurrogateParams:
    kappa: float = 0.8
    kappa_prime: float = 5.0

    def __post_init__(self):
        if not 0.0 < self.kappa <= 1.0:
            raise ConfigError(f"kappa must lie in (0, 1], got {self.kappa}")
        if not self.kappa_prime > 0.0:
            raise ConfigError(f"kappa_prime must be positive, got {self.kappa_prime}")


def _payoff(T) -> np.ndarray:
    if hasattr(T, "payoff"):
        return np.asarray(T.payoff, dtype=float)
    return np.asarray(T, dtype=float)


def _masses(Q, trellis: JointTrellis) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(Q, EdgeDistribution):
        return Q.Q, Q.mu
    Q = np.asarray(Q, dtype=float)
    return Q, trellis.per_state(Q).sum(axis=1)


def surrogate_penalty(Q, Qtilde: EdgeDistribution, params: SurrogateParams) -> float:
    """Convex penalty that vanishes with zero gradient at ``Qtilde``."""
    Q, mu = _masses(Q, Qtilde.trellis)
    k = params.kappa
    a = 1.0 + k * (Q - Qtilde.Q) / Qtilde.Q
    b = 1.0 + k * (mu - Qtilde.mu) / Qtilde.mu
    if np.any(a < 0) or np.any(b < 0):
        raise KappaDomainError("kappa domain: 1 + kappa * dQ must be non-negative")
    return float(params.kappa_prime * (np.dot(Qtilde.Q, xlogy(a, a)) - np.dot(Qtilde.mu, xlogy(b, b))))


def surrogate_value(Q, Qtilde: EdgeDistribution, T, params: SurrogateParams) -> float:
    """Linear rate term minus the penalty, in nats."""
    Qa, _ = _masses(Q, Qtilde.trellis)
    return float(np.dot(Qa, _payoff(T))) - surrogate_penalty(Q, Qtilde, params)


def perron_frobenius(A: np.ndarray, tol: float = PF_TOL,
                     max_iter: int = PF_MAX_ITER) -> tuple[float, np.ndarray]:
    """Dominant eigenpair of an irreducible non-negative matrix by power iteration.

    Stops when the Collatz-Wielandt bounds ``min (A x)/x <= rho <= max (A x)/x``
    are within ``tol * rho``.  The eigenvector is positive with max entry 1.
    """
    x = np.ones(A.shape[0])
    for _ in range(max_iter):
        y = A @ x
        ratio = y / x
        lo, hi = ratio.min(), ratio.max()
        x = y / y.max()
        if hi - lo <= tol * hi:
            rho = 0.5 * (lo + hi)
            return float(rho), x
    raise NumericalError(f"power iteration did not converge in {max_iter} steps")


@dataclass(eq=False)
class SurrogateStep:
    Q_star: EdgeDistribution
    rho: float
    gamma: np.ndarray
    kappa_used: float
    p_hat: np.ndarray
    Q_hat: EdgeDistribution
    kappa_history: list[float] = field(default_factory=list)

    @property
    def kappa_adjusted(self) -> bool:
        return len(self.kappa_history) > 1


def tilted_step(Qtilde: EdgeDistribution, payoff: np.ndarray, kappa: float, kappa_prime: float):
    """Eigen-step of the maximizer for a fixed kappa: ``(rho, gamma, p_hat)``."""
    tr = Qtilde.trellis
    expo = payoff / (kappa * kappa_prime)
    shift = float(expo.max())
    # A is scaled by exp(-shift) for range safety; rho is scaled back below
    weights = Qtilde.p * np.exp(expo - shift)
    try:
        _check_irreducible(tr, weights)
    except NotIrreducibleError as exc:
        raise ReducibleMatrixError(f"reducible A: {exc}") from exc
    A = tr.transition_matrix(weights)
    rho_s, gamma = perron_frobenius(A)
    p_hat = weights * gamma[tr.edge_to] / (rho_s * gamma[tr.edge_from])
    rows = tr.per_state(p_hat)
    p_hat = (rows / rows.sum(axis=1, keepdims=True)).ravel()
    return rho_s * np.exp(shift), gamma, p_hat


def solve_edge_system(Qtilde: EdgeDistribution, p_hat: np.ndarray, kappa: float) -> np.ndarray:
    """Solve the stationarity system for ``Q*`` given ``p_hat`` and ``kappa``.

    The full system has ``|B| + |S| + 1`` equations of rank ``|B|``: within
    each state the edge equations sum to zero and the flow equations sum to
    zero.  The last edge equation of every state and the flow equation of
    state 0 are dropped; the rest is solved by LU with partial pivoting and
    the dropped equations are checked afterwards.
    """
    tr = Qtilde.trellis
    nB, nS, q = tr.n_edges, tr.n_states, tr.q
    c = (1.0 - kappa) / kappa

    edge_rows = np.zeros((nB, nB))
    edge_rows[np.arange(nB), np.arange(nB)] = 1.0
    for e in range(nB):
        edge_rows[e, tr.succ[tr.edge_from[e]]] -= p_hat[e]
    edge_rhs = c * (Qtilde.mu[tr.edge_from] * p_hat - Qtilde.Q)

    flow_rows = np.zeros((nS, nB))
    np.add.at(flow_rows, (tr.edge_to, np.arange(nB)), 1.0)
    np.add.at(flow_rows, (tr.edge_from, np.arange(nB)), -1.0)

    full = np.vstack([edge_rows, flow_rows, np.ones((1, nB))])
    full_rhs = np.concatenate([edge_rhs, np.zeros(nS), [1.0]])

    keep_edges = np.ones(nB, dtype=bool)
    keep_edges[tr.succ[:, q - 1]] = False
    keep = np.concatenate([keep_edges, np.arange(nS) != 0, [True]])
    M, rhs = full[keep], full_rhs[keep]
    try:
        Q_star = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"singular system: {exc}") from exc
    resid = float(np.max(np.abs(full @ Q_star - full_rhs)))
    if not np.isfinite(resid) or resid > SYSTEM_RESIDUAL_TOL:
        raise SingularSystemError(f"singular system: residual {resid:.3e}")
    return Q_star


def maximize_surrogate(Qtilde: EdgeDistribution, T, params: SurrogateParams) -> SurrogateStep:
    """Closed-form maximizer of the surrogate over the flow polytope.

    When ``Q*`` would leave the polytope (some ``(Qt - Q_hat)/Qt > kappa``)
    kappa is raised to the largest such ratio plus 0.01, capped at 1, and the
    eigen-step is repeated.  At ``kappa = 1`` the bound always holds.
    """
    payoff = _payoff(T)
    if not np.all(np.isfinite(payoff)):
        raise NumericalError("payoff values must be finite")
    kappa = params.kappa
    history = [kappa]
    while True:
        rho, gamma, p_hat = tilted_step(Qtilde, payoff, kappa, params.kappa_prime)
        Q_hat = from_transitions(Qtilde.trellis, p_hat)
        worst = float(np.max((Qtilde.Q - Q_hat.Q) / Qtilde.Q))
        if kappa >= worst:
            break
        if kappa >= 1.0:
            raise NumericalError("kappa bound violated at kappa = 1")
        kappa = min(1.0, worst + KAPPA_BUMP)
        history.append(kappa)

    Q_star = solve_edge_system(Qtilde, p_hat, kappa)
    # roundoff can leave -1e-17 where the bound is tight
    Q_star = np.where(np.abs(Q_star) < 1e-15, 0.0, Q_star)
    return SurrogateStep(Q_star=EdgeDistribution.from_Q(Qtilde.trellis, Q_star), rho=rho,
                         gamma=gamma, kappa_used=kappa, p_hat=p_hat, Q_hat=Q_hat,
                         kappa_history=history)


def optimum_value(step: SurrogateStep, Qtilde: EdgeDistribution, T, params: SurrogateParams) -> float:
    """Surrogate value at the maximizer from the eigenvalue alone.

    ``psi(Q*) = kp * log(rho) - (1 - k)/k * sum_e Qt_e payoff_e``; at
    ``k = kp = 1`` this is just ``log(rho)``.
    """
    k = step.kappa_used
    return params.kappa_prime * np.log(step.rho) - (1.0 - k) / k * float(np.dot(Qtilde.Q, _payoff(T)))
