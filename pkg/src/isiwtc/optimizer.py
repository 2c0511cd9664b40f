"""Iterative surrogate maximization of the secure rate, plus multi-start sweeps."""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .estimator import DEFAULT_N, Seeds, TStatistics, estimate_secure_rate
from .source import EdgeDistribution, floor_interior, iud, weyl_initializations
from .surrogate import SurrogateParams, maximize_surrogate
from .trellis import Alphabet, IsiWtcSpec, TransferPolynomial, build_joint_trellis

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizeConfig:
    n: int = DEFAULT_N
    kappa: float = 0.8
    kappa_prime: float = 5.0
    tol: float = 1e-4
    patience: int = 3
    max_iter: int = 60
    seed: int = 0
    floor: float = 1e-8

    @property
    def params(self) -> SurrogateParams:
        return SurrogateParams(self.kappa, self.kappa_prime)


@dataclass(eq=False)
class IterationRecord:
    iteration: int
    Q_entry: EdgeDistribution
    stats_used: TStatistics | None
    rho: float
    kappa_used: float
    Q_star: EdgeDistribution
    stats: TStatistics
    max_dQ: float
    kappa_history: list[float] = field(default_factory=list)

    @property
    def rate(self) -> float:
        return self.stats.rate_estimate

    @property
    def block_se(self) -> float:
        return self.stats.block_se


@dataclass(eq=False)
class OptimizeResult:
    final: EdgeDistribution
    trace: list[IterationRecord]
    converged: bool

    @property
    def rate(self) -> float:
        return self.trace[-1].rate

    @property
    def iterations(self) -> int:
        return self.trace[-1].iteration


def optimize(Q0: EdgeDistribution, trellis=None, spec: IsiWtcSpec | None = None,
             config: OptimizeConfig = OptimizeConfig(),
             estimator: Callable[[EdgeDistribution], TStatistics] | None = None) -> OptimizeResult:
    """Alternate Monte-Carlo estimation and surrogate maximization.

    Every estimate along one trajectory reuses the same seeds, so successive
    rates differ by the change in the source rather than by fresh noise.
    Stops once ``config.patience`` consecutive rate changes are below
    ``config.tol`` or after ``config.max_iter`` surrogate steps.
    """
    trellis = trellis or Q0.trellis
    spec = spec or trellis.spec
    if estimator is None:
        seeds = Seeds.derive(config.seed)

        def estimator(d):
            return estimate_secure_rate(d, trellis, spec, config.n, seeds)

    params = config.params
    Q = floor_interior(Q0, config.floor)
    stats = estimator(Q)
    trace = [IterationRecord(0, Q, None, float("nan"), float("nan"), Q, stats, 0.0)]
    quiet = 0
    converged = False
    for r in range(1, config.max_iter + 1):
        step = maximize_surrogate(Q, stats, params)
        if step.kappa_adjusted:
            log.debug("iteration %d: kappa raised to %.4f", r, step.kappa_used)
        Q_next = floor_interior(step.Q_star, config.floor)
        stats_next = estimator(Q_next)
        trace.append(IterationRecord(
            iteration=r, Q_entry=Q, stats_used=stats, rho=step.rho, kappa_used=step.kappa_used,
            Q_star=Q_next, stats=stats_next, max_dQ=float(np.max(np.abs(Q_next.Q - Q.Q))),
            kappa_history=step.kappa_history))
        quiet = quiet + 1 if abs(stats_next.rate_estimate - stats.rate_estimate) < config.tol else 0
        Q, stats = Q_next, stats_next
        if quiet >= config.patience:
            converged = True
            break
    return OptimizeResult(final=Q, trace=trace, converged=converged)


def write_trace_csv(path, result: OptimizeResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "rate", "block_se", "rho", "kappa_used", "max_abs_dQ"])
        for rec in result.trace:
            w.writerow([rec.iteration, repr(rec.rate), repr(rec.block_se), repr(rec.rho),
                        repr(rec.kappa_used), repr(rec.max_dQ)])


@dataclass
class CellResult:
    snr_bob_db: float
    snr_eve_db: float
    iud_rate: float = float("nan")
    iud_se: float = float("nan")
    rates: list[float] = field(default_factory=list)
    iterations: list[int] = field(default_factory=list)
    converged: list[bool] = field(default_factory=list)
    best_Q: EdgeDistribution | None = None
    errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def best_rate(self) -> float:
        return max(self.rates) if self.rates else float("nan")

    def histogram(self, bins: int = 20) -> tuple[np.ndarray, np.ndarray]:
        if not self.rates:
            return np.zeros(0), np.zeros(0)
        density, edges = np.histogram(self.rates, bins=bins, density=True)
        return edges, density


def sweep(gB: TransferPolynomial, gE: TransferPolynomial, nu: int,
          cells: Sequence[tuple[float, float]], init_count: int,
          config: OptimizeConfig = OptimizeConfig(), Es: float = 1.0,
          threads: int = 1, weyl_seed: int = 0,
          runner: Callable | None = None) -> list[CellResult]:
    """Multi-start optimization over a grid of (Bob SNR, Eve SNR) cells.

    Each (cell, start) job gets seeds derived from ``(config.seed, cell, start)``
    so results do not depend on scheduling.  A failing job marks its cell
    with the error and the sweep carries on.
    """
    if not cells:
        raise ValueError("sweep needs at least one SNR cell")
    runner = runner or optimize
    alphabet = Alphabet.bpsk(Es)
    setups = []
    for snrB, snrE in cells:
        spec = IsiWtcSpec.from_snr(gB, gE, snrB, snrE, Es, normalize_taps=False)
        setups.append((spec, build_joint_trellis(alphabet, nu, spec)))
    starts_per_cell = [weyl_initializations(tr, init_count, weyl_seed) for _, tr in setups]

    def job(c: int, k: int):
        spec, tr = setups[c]
        if k < 0:
            return estimate_secure_rate(iud(tr), tr, spec, config.n, Seeds.derive((config.seed, c, 0)))
        cfg = replace(config, seed=_job_seed(config.seed, c, k + 1))
        return runner(starts_per_cell[c][k], tr, spec, cfg)

    jobs = [(c, k) for c in range(len(cells)) for k in range(-1, init_count)]

    def guarded(ck):
        try:
            return ck, job(*ck), None
        except Exception as exc:  # recorded per cell; the sweep must finish
            log.warning("sweep job %s failed: %s", ck, exc)
            return ck, None, f"{type(exc).__name__}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(guarded, jobs))
    else:
        outcomes = [guarded(ck) for ck in jobs]

    results = [CellResult(float(b), float(e)) for b, e in cells]
    best = [(-np.inf, None)] * len(cells)
    for (c, k), out, err in sorted(outcomes, key=lambda o: o[0]):
        cell = results[c]
        if err is not None:
            cell.errors.append(f"init {k}: {err}" if k >= 0 else f"iud: {err}")
            continue
        if k < 0:
            cell.iud_rate, cell.iud_se = out.rate_estimate, out.block_se
            continue
        cell.rates.append(out.rate)
        cell.iterations.append(out.iterations)
        cell.converged.append(out.converged)
        if out.rate > best[c][0]:
            best[c] = (out.rate, out.final)
    for c, cell in enumerate(results):
        cell.best_Q = best[c][1]
    return results


def _job_seed(master: int, cell: int, start: int) -> int:
    return int(np.random.SeedSequence([int(master), cell, start]).generate_state(1, dtype=np.uint64)[0])


def write_sweep_csv(path, results: list[CellResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["snr_bob_db", "snr_eve_db", "best_rate", "iud_rate", "iud_block_se",
                    "n_inits", "n_converged", "status"])
        for r in results:
            w.writerow([repr(r.snr_bob_db), repr(r.snr_eve_db), repr(r.best_rate), repr(r.iud_rate),
                        repr(r.iud_se), len(r.rates), sum(r.converged),
                        "ok" if r.ok else "error: " + " | ".join(r.errors)])


def write_histogram_csv(path, results: list[CellResult], bins: int = 20) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["snr_bob_db", "snr_eve_db", "bin_left", "bin_right", "density"])
        for r in results:
            edges, density = r.histogram(bins)
            for lo, hi, d in zip(edges[:-1], edges[1:], density):
                w.writerow([repr(r.snr_bob_db), repr(r.snr_eve_db), repr(float(lo)),
                            repr(float(hi)), repr(float(d))])
