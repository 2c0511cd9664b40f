"""Command-line front end: estimate | optimize | sweep | waterpour."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import Manifest, RunConfig, load_config
from .errors import ConfigError, InvalidRowsError, KappaDomainError, NumericalError
from .estimator import Seeds, estimate_secure_rate, summary, write_edge_csv
from .optimizer import (OptimizeConfig, optimize, sweep, write_histogram_csv, write_sweep_csv,
                        write_trace_csv)
from .source import iud, load_distribution, save_distribution, trellis_metadata, weyl_initializations
from .waterpour import SpectralSpec, gain_to_noise_ratio_curve, sign_changes, waterpour_capacity

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("isiwtc")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _initial_distribution(cfg: RunConfig, tr):
    if cfg.source == "iud":
        return iud(tr)
    if cfg.source == "weyl":
        return weyl_initializations(tr, cfg.init_count, cfg.weyl_seed)[cfg.init_index]
    return load_distribution(cfg.source_file, tr)


def _optimize_config(cfg: RunConfig) -> OptimizeConfig:
    return OptimizeConfig(n=cfg.n, kappa=cfg.kappa, kappa_prime=cfg.kappa_prime, tol=cfg.tol,
                          patience=cfg.patience, max_iter=cfg.max_iter, seed=cfg.seed)


def _trellis(cfg: RunConfig, man: Manifest):
    with man.stage("trellis"):
        tr = cfg.trellis()
    man.derived["trellis"] = trellis_metadata(tr)
    return tr


def cmd_estimate(cfg: RunConfig, out: Path, man: Manifest, threads: int = 1) -> int:
    tr = _trellis(cfg, man)
    dist = _initial_distribution(cfg, tr)
    seeds = Seeds.derive(cfg.seed)
    man.seeds = {"master": cfg.seed, **seeds.as_dict()}
    with man.stage("estimate"):
        stats = estimate_secure_rate(dist, tr, tr.spec, cfg.n, seeds)
    write_edge_csv(out / "edges.csv", dist, stats)
    _write_json(out / "summary.json", summary(stats))
    man.outputs += ["edges.csv", "summary.json"]
    log.info("secure rate %.6f nats/use (block SE %.2e)", stats.rate_estimate, stats.block_se)
    return EXIT_OK


def cmd_optimize(cfg: RunConfig, out: Path, man: Manifest, threads: int = 1) -> int:
    tr = _trellis(cfg, man)
    dist = _initial_distribution(cfg, tr)
    opt = _optimize_config(cfg)
    man.seeds = {"master": cfg.seed, **Seeds.derive(cfg.seed).as_dict()}
    with man.stage("optimize"):
        res = optimize(dist, tr, tr.spec, opt)
    write_trace_csv(out / "trace.csv", res)
    save_distribution(res.final, out / "final_Q.json")
    doc = summary(res.trace[-1].stats)
    doc.update(iterations=res.iterations, converged=res.converged,
               initial_rate=res.trace[0].rate)
    _write_json(out / "summary.json", doc)
    man.outputs += ["trace.csv", "final_Q.json", "summary.json"]
    log.info("final rate %.6f after %d iterations (converged=%s)", res.rate, res.iterations, res.converged)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: Path, man: Manifest, threads: int = 1) -> int:
    if cfg.sweep is None:
        raise ConfigError("sweep command needs a 'sweep' section")
    cells = cfg.sweep.cells()
    man.derived["cells"] = [
        {"snr_bob_db": b, "snr_eve_db": e, "sigma2_bob": sB, "sigma2_eve": sE}
        for (b, e), (sB, sE) in ((c, cfg.variances(*c)) for c in cells)]
    man.seeds = {"master": cfg.seed, "weyl_seed": cfg.weyl_seed}
    with man.stage("sweep"):
        results = sweep(cfg.gB, cfg.gE, cfg.nu, cells, cfg.init_count, _optimize_config(cfg),
                        Es=cfg.Es, threads=threads, weyl_seed=cfg.weyl_seed)
    write_sweep_csv(out / "sweep.csv", results)
    write_histogram_csv(out / "histogram.csv", results, cfg.sweep.hist_bins)
    man.outputs += ["sweep.csv", "histogram.csv"]
    bad = [r for r in results if not r.ok]
    for r in bad:
        log.warning("cell (%g, %g) flagged: %s", r.snr_bob_db, r.snr_eve_db, "; ".join(r.errors))
    return EXIT_OK


def cmd_waterpour(cfg: RunConfig, out: Path, man: Manifest, threads: int = 1) -> int:
    sB, sE = cfg.variances()
    grid = cfg.waterpour
    # flat noise density equal to the per-symbol variance
    man.derived["noise_psd"] = {"bob": sB, "eve": sE}
    with man.stage("capacity"), open(out / "capacity.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["W", "C_Bob", "C_Eve"])
        for W in grid.bandwidths():
            cB = waterpour_capacity(SpectralSpec(cfg.gB, sB, cfg.Es, float(W)))
            cE = waterpour_capacity(SpectralSpec(cfg.gE, sE, cfg.Es, float(W)))
            w.writerow([repr(float(W)), repr(cB), repr(cE)])
    specB = SpectralSpec(cfg.gB, sB, cfg.Es, grid.ratio_W)
    specE = SpectralSpec(cfg.gE, sE, cfg.Es, grid.ratio_W)
    f = np.linspace(0.0, grid.ratio_W, grid.f_points)
    with man.stage("ratio"):
        curve = gain_to_noise_ratio_curve(specB, specE, f)
    with open(out / "ratio.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["f", "ratioB_dB", "ratioE_dB"])
        for row in zip(curve["f"], curve["bob_db"], curve["eve_db"]):
            w.writerow([repr(float(v)) for v in row])
    with np.errstate(invalid="ignore"):  # both channels may share a null
        man.derived["ratio_sign_changes"] = sign_changes(curve["bob_db"] - curve["eve_db"])
    man.outputs += ["capacity.csv", "ratio.csv"]
    return EXIT_OK


COMMANDS = {"estimate": cmd_estimate, "optimize": cmd_optimize,
            "sweep": cmd_sweep, "waterpour": cmd_waterpour}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isiwtc", description="Secure rates of ISI wiretap channels.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, type=Path,
                    help="YAML/JSON run config, or a manifest.json from an earlier run")
    ap.add_argument("--out", required=True, type=Path, help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg = cfg.model_copy(update={"seed": args.seed})
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        args.out.mkdir(parents=True, exist_ok=True)
        man = Manifest(args.command, cfg)
        man.derived["variances"] = dict(zip(("sigma2_bob", "sigma2_eve"), cfg.variances()))
        code = COMMANDS[args.command](cfg, args.out, man, args.threads)
        man.write(args.out)
        return code
    except (ConfigError, InvalidRowsError, KappaDomainError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError) as exc:
        log.error("numerical error: %s", exc)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
