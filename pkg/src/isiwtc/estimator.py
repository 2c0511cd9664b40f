"""Monte-Carlo secure-rate estimation from per-edge posterior statistics."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .channel import transmit
from .errors import NumericalError
from .posterior import BOB, EVE, PosteriorTables, smooth
from .source import EdgeDistribution, sample_sequence
from .trellis import IsiWtcSpec, JointTrellis

DEFAULT_N = 100_000
N_BLOCKS = 20
MU_EPS = 1e-300


@dataclass(frozen=True)
class Seeds:
    source: int
    noise_B: int
    noise_E: int

    @classmethod
    def derive(cls, seed) -> "Seeds":
        """Three independent stream seeds from one master seed (or a key tuple)."""
        entropy = seed if isinstance(seed, (list, tuple)) else [int(seed)]
        s = np.random.SeedSequence([int(x) for x in entropy]).generate_state(3, dtype=np.uint64)
        return cls(int(s[0]), int(s[1]), int(s[2]))

    def as_dict(self) -> dict:
        return {"source": self.source, "noise_B": self.noise_B, "noise_E": self.noise_E}


@dataclass(eq=False)
class TStatistics:
    tB: np.ndarray
    tE: np.ndarray
    n: int
    rate_estimate: float
    rate_B: float
    rate_E: float
    block_se: float
    seeds: Seeds
    block_rates: np.ndarray = field(repr=False, default=None)

    @property
    def payoff(self) -> np.ndarray:
        return self.tB - self.tE


def _plogp(logs: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", under="ignore"):
        out = np.exp(logs) * logs
    out[~np.isfinite(logs)] = 0.0
    return out


def per_time_information(post: PosteriorTables) -> np.ndarray:
    """``sum P log P`` over edges minus over states, per time step.

    This is minus the posterior conditional entropy of ``S_t`` given
    ``S_{t-1}`` and the observations; its time average equals
    ``sum_e Q_e * T_e`` for the same tables.
    """
    return _plogp(post.log_pairwise).sum(axis=1) - _plogp(post.log_single).sum(axis=1)


def t_statistics(dist: EdgeDistribution, post: PosteriorTables) -> np.ndarray:
    """Per-edge statistic ``T_e`` averaged over the sequence (nats).

    ``T_e = (1/n) sum_t [P_t(e)/Q_e * log P_t(e) - P_t(i)/mu_i * log P_t(i)]``
    with ``0 log 0 = 0``.  Edges with ``Q_e = 0`` get ``nan``; they carry no
    weight in any rate.
    """
    tr = dist.trellis
    if post.log_pairwise.shape[1] != tr.n_edges or post.log_single.shape[1] != tr.n_states:
        raise ValueError("posterior tables do not match the trellis")
    if np.any(dist.mu < MU_EPS):
        raise NumericalError("state probability below 1e-300; distribution is not interior")
    n = post.n
    edge_sum = _plogp(post.log_pairwise).sum(axis=0)
    state_sum = _plogp(post.log_single).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = edge_sum / (n * dist.Q) - (state_sum / (n * dist.mu))[tr.edge_from]
    t[dist.Q == 0] = np.nan
    return t


def _weighted(dist: EdgeDistribution, t: np.ndarray) -> float:
    mask = dist.Q > 0
    return float(np.dot(dist.Q[mask], t[mask]))


def estimate_secure_rate(dist: EdgeDistribution, trellis: JointTrellis | None = None,
                         spec: IsiWtcSpec | None = None, n: int = DEFAULT_N,
                         seeds=0) -> TStatistics:
    """Sample, transmit, smooth both observations and combine the statistics.

    ``seeds`` is either a :class:`Seeds` record or a master seed from which
    the three stream seeds are derived.
    """
    trellis = trellis or dist.trellis
    spec = spec or trellis.spec
    seeds = seeds if isinstance(seeds, Seeds) else Seeds.derive(seeds)
    sample = sample_sequence(dist, n, seeds.source)
    obs = transmit(sample, spec, trellis, (seeds.noise_B, seeds.noise_E))
    post_B = smooth(trellis, dist, obs.y, spec.sigmaB2, BOB)
    post_E = smooth(trellis, dist, obs.z, spec.sigmaE2, EVE)
    tB = t_statistics(dist, post_B)
    tE = t_statistics(dist, post_E)
    rB, rE = _weighted(dist, tB), _weighted(dist, tE)
    rate = _weighted(dist, tB - tE)

    per_t = per_time_information(post_B) - per_time_information(post_E)
    blocks = np.array([b.mean() for b in np.array_split(per_t, min(N_BLOCKS, n))])
    se = float(blocks.std(ddof=1) / np.sqrt(blocks.size)) if blocks.size > 1 else float("nan")
    return TStatistics(tB=tB, tE=tE, n=int(n), rate_estimate=rate, rate_B=rB, rate_E=rE,
                       block_se=se, seeds=seeds, block_rates=blocks)


def write_edge_csv(path, dist: EdgeDistribution, stats: TStatistics) -> None:
    tr = dist.trellis
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "Q_ij", "p_ij", "tB", "tE", "contribution"])
        for e in range(tr.n_edges):
            contrib = dist.Q[e] * (stats.tB[e] - stats.tE[e]) if dist.Q[e] > 0 else 0.0
            w.writerow([int(tr.edge_from[e]), int(tr.edge_to[e]), repr(float(dist.Q[e])),
                        repr(float(dist.p[e])), repr(float(stats.tB[e])), repr(float(stats.tE[e])),
                        repr(float(contrib))])


def summary(stats: TStatistics) -> dict:
    return {
        "rate_estimate": stats.rate_estimate,
        "rate_B": stats.rate_B,
        "rate_E": stats.rate_E,
        "block_se": stats.block_se,
        "n": stats.n,
        "seeds": stats.seeds.as_dict(),
    }
