"""Markov source on the joint trellis, parameterized by its edge distribution.

The optimization variable is ``Q[e] = mu[i] * p[e]`` for edge ``e = (i, j)``,
living in the flow polytope: non-negative, summing to one, and with equal
in- and out-flow at every state.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .errors import ConfigError, InvalidRowsError, NotIrreducibleError
from .trellis import Alphabet, IsiWtcSpec, JointTrellis, TransferPolynomial, build_joint_trellis

ROW_TOL = 1e-9
FEASIBILITY_TOL = 1e-10
INTERIOR_FLOOR = 1e-8
WEYL_OFFSET = 0.25
DOCUMENT_FORMAT = "isiwtc.edge-distribution"
DOCUMENT_VERSION = 1


@dataclass(frozen=True, eq=False)
class EdgeDistribution:
    trellis: JointTrellis
    Q: np.ndarray
    mu: np.ndarray
    p: np.ndarray

    @classmethod
    def from_Q(cls, trellis: JointTrellis, Q) -> "EdgeDistribution":
        """Wrap edge masses without re-solving for stationarity."""
        Q = np.array(Q, dtype=float)
        if Q.shape != (trellis.n_edges,):
            raise ValueError(f"expected {trellis.n_edges} edge masses, got shape {Q.shape}")
        mu = trellis.per_state(Q).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(np.repeat(mu, trellis.q) > 0, Q / np.repeat(mu, trellis.q), 0.0)
        for a in (Q, mu, p):
            a.setflags(write=False)
        return cls(trellis, Q, mu, p)

    @property
    def n_edges(self) -> int:
        return self.trellis.n_edges

    def entropy_rate(self) -> float:
        """Conditional entropy H(S_t | S_{t-1}) in nats."""
        mask = self.Q > 0
        return float(-np.sum(self.Q[mask] * np.log(self.p[mask])))


def iud(trellis: JointTrellis) -> EdgeDistribution:
    """Independent, uniformly distributed input symbols."""
    return from_transitions(trellis, np.full(trellis.n_edges, 1.0 / trellis.q))


def _check_irreducible(trellis: JointTrellis, weights: np.ndarray) -> None:
    mask = weights > 0
    graph = csr_matrix((np.ones(mask.sum()), (trellis.edge_from[mask], trellis.edge_to[mask])),
                       shape=(trellis.n_states, trellis.n_states))
    n_comp, _ = connected_components(graph, directed=True, connection="strong")
    if n_comp != 1:
        raise NotIrreducibleError(
            f"not irreducible: support graph has {n_comp} strongly connected components")


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Solve ``mu P = mu``, ``sum(mu) = 1`` with the last balance row replaced."""
    n = P.shape[0]
    M = P.T - np.eye(n)
    M[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    mu = np.linalg.solve(M, rhs)
    return mu


def from_transitions(trellis: JointTrellis, p) -> EdgeDistribution:
    """Edge distribution of the stationary chain with transition probabilities ``p``.

    Raises
    ------
    InvalidRowsError
        If a state's outgoing probabilities do not sum to one.
    NotIrreducibleError
        If the chain restricted to positive-probability edges is reducible.
    """
    p = np.array(p, dtype=float)
    if p.shape != (trellis.n_edges,):
        raise ValueError(f"expected {trellis.n_edges} transition probabilities, got shape {p.shape}")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise InvalidRowsError("invalid rows: probabilities must be finite and non-negative")
    row_sums = trellis.per_state(p).sum(axis=1)
    bad = np.flatnonzero(np.abs(row_sums - 1.0) > ROW_TOL)
    if bad.size:
        raise InvalidRowsError(
            f"invalid rows: state {int(bad[0])} sums to {row_sums[bad[0]]!r}")
    _check_irreducible(trellis, p)
    mu = stationary_distribution(trellis.transition_matrix(p))
    mu = np.clip(mu, 0.0, None)
    mu /= mu.sum()
    Q = np.repeat(mu, trellis.q) * p
    for a in (Q, mu, p):
        a.setflags(write=False)
    return EdgeDistribution(trellis, Q, mu, p)


def floor_interior(dist: EdgeDistribution, floor: float = INTERIOR_FLOOR) -> EdgeDistribution:
    """Clip transition probabilities to ``floor`` and renormalize each row."""
    tr = dist.trellis
    rows = tr.per_state(dist.p).copy()
    dead = rows.sum(axis=1) <= 0
    rows[dead] = 1.0
    rows = np.maximum(rows / rows.sum(axis=1, keepdims=True), floor)
    rows /= rows.sum(axis=1, keepdims=True)
    return from_transitions(tr, rows.ravel())


@dataclass
class FeasibilityReport:
    feasible: bool
    min_mass: float
    normalization_residual: float
    flow_residual: float
    worst_flow_state: int
    violations: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.feasible


def validate(Q, trellis: JointTrellis | None = None, tol: float = FEASIBILITY_TOL) -> FeasibilityReport:
    """Check membership of ``Q`` in the flow polytope and report the residuals."""
    if isinstance(Q, EdgeDistribution):
        trellis, Q = Q.trellis, Q.Q
    if trellis is None:
        raise ValueError("a trellis is required when validating a raw array")
    Q = np.asarray(Q, dtype=float)
    outflow = np.bincount(trellis.edge_from, weights=Q, minlength=trellis.n_states)
    inflow = np.bincount(trellis.edge_to, weights=Q, minlength=trellis.n_states)
    flow = np.abs(outflow - inflow)
    worst = int(np.argmax(flow))
    report = FeasibilityReport(
        feasible=True,
        min_mass=float(Q.min()),
        normalization_residual=float(abs(Q.sum() - 1.0)),
        flow_residual=float(flow[worst]),
        worst_flow_state=worst,
    )
    if not np.all(np.isfinite(Q)):
        report.violations.append("non-finite masses")
    if report.min_mass < 0:
        report.violations.append(
            f"negativity: edge {int(np.argmin(Q))} has mass {report.min_mass!r}")
    if report.normalization_residual > tol:
        report.violations.append(f"normalization: |sum Q - 1| = {report.normalization_residual:.3e}")
    if report.flow_residual > tol:
        report.violations.append(f"flow: state {worst} imbalance {report.flow_residual:.3e}")
    report.feasible = not report.violations
    return report


def _first_primes(k: int) -> list[int]:
    primes: list[int] = []
    c = 2
    while len(primes) < k:
        if all(c % p for p in primes if p * p <= c):
            primes.append(c)
        c += 1
    return primes


def weyl_points(dim: int, count: int, start: int = 1) -> np.ndarray:
    """Members ``start .. start+count-1`` of the Weyl sequence ``frac(k * sqrt(prime))``."""
    alpha = np.array([math.sqrt(p) % 1.0 for p in _first_primes(dim)])
    k = np.arange(start, start + count, dtype=float)[:, None]
    return np.modf(k * alpha)[0]


def weyl_initializations(trellis: JointTrellis, count: int, seed: int = 0,
                         offset: float = WEYL_OFFSET) -> list[EdgeDistribution]:
    """Equidistributed interior starting points for the optimizer.

    Each Weyl point supplies one coordinate per edge; the coordinates of a
    state's outgoing edges are shifted by ``offset`` and normalized into a
    transition row.  ``seed`` selects where in the sequence to start.
    """
    if count < 1:
        raise ConfigError("count must be at least 1")
    pts = weyl_points(trellis.n_edges, count, start=int(seed) + 1)
    out = []
    for x in pts:
        rows = trellis.per_state(x) + offset
        rows /= rows.sum(axis=1, keepdims=True)
        out.append(floor_interior(from_transitions(trellis, rows.ravel())))
    return out


@dataclass(frozen=True, eq=False)
class SourceSample:
    states: np.ndarray
    edges: np.ndarray
    symbols: np.ndarray
    seed: int

    @property
    def n(self) -> int:
        return int(self.symbols.shape[0])


def sample_sequence(dist: EdgeDistribution, n: int, seed: int) -> SourceSample:
    """Draw ``S_0`` from ``mu`` and ``n`` further transitions from ``p``."""
    n = int(n)
    if n < 1:
        raise ConfigError("sequence length n must be at least 1")
    tr = dist.trellis
    rng = np.random.Generator(np.random.Philox(int(seed)))
    uniforms = rng.random(n + 1)
    cum_mu = np.cumsum(dist.mu)
    cum_rows = np.cumsum(tr.per_state(dist.p), axis=1)
    succ_to = np.ascontiguousarray(tr.edge_to[tr.succ])
    states = np.empty(n + 1, dtype=np.int64)
    edges = np.empty(n, dtype=np.int64)
    _kernels.sample_chain(cum_mu, cum_rows, succ_to, uniforms, states, edges)
    symbols = tr.alphabet.values[tr.edge_symbol[edges]]
    return SourceSample(states=states, edges=edges, symbols=symbols, seed=int(seed))


def trellis_metadata(trellis: JointTrellis) -> dict:
    spec = trellis.spec
    return {
        "alphabet": list(trellis.alphabet.symbols),
        "nu": trellis.nu,
        "gB": list(spec.gB.taps),
        "gE": list(spec.gE.taps),
        "sigmaB2": spec.sigmaB2,
        "sigmaE2": spec.sigmaE2,
        "n_states": trellis.n_states,
        "n_edges": trellis.n_edges,
    }


def to_document(dist: EdgeDistribution) -> dict:
    tr = dist.trellis
    return {
        "format": DOCUMENT_FORMAT,
        "version": DOCUMENT_VERSION,
        "trellis": trellis_metadata(tr),
        "edges": [[int(i), int(j), float(q)] for i, j, q in zip(tr.edge_from, tr.edge_to, dist.Q)],
    }


def from_document(doc: dict, trellis: JointTrellis | None = None) -> EdgeDistribution:
    if doc.get("format") != DOCUMENT_FORMAT:
        raise ConfigError(f"not an edge-distribution document: format={doc.get('format')!r}")
    if trellis is None:
        meta = doc["trellis"]
        spec = IsiWtcSpec(TransferPolynomial(tuple(meta["gB"])), TransferPolynomial(tuple(meta["gE"])),
                          meta["sigmaB2"], meta["sigmaE2"])
        trellis = build_joint_trellis(Alphabet(tuple(meta["alphabet"])), meta["nu"], spec)
    Q = np.zeros(trellis.n_edges)
    seen = np.zeros(trellis.n_edges, dtype=bool)
    for i, j, q in doc["edges"]:
        e = trellis.edge_index(int(i), int(j))
        Q[e] = q
        seen[e] = True
    if not seen.all():
        raise ConfigError("edge-distribution document does not cover every edge")
    return EdgeDistribution.from_Q(trellis, Q)


def save_distribution(dist: EdgeDistribution, path) -> None:
    Path(path).write_text(json.dumps(to_document(dist), indent=1) + "\n")


def load_distribution(path, trellis: JointTrellis | None = None) -> EdgeDistribution:
    return from_document(json.loads(Path(path).read_text()), trellis)
