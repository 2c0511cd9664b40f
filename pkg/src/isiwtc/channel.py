"""ISI + AWGN simulation of Bob's and Eve's channels."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .source import SourceSample
from .trellis import IsiWtcSpec, JointTrellis


@dataclass(frozen=True, eq=False)
class ObservationPair:
    y: np.ndarray
    z: np.ndarray
    uB: np.ndarray
    uE: np.ndarray
    noise_seed_B: int
    noise_seed_E: int


def gaussian_noise(n: int, variance: float, seed: int) -> np.ndarray:
    """White Gaussian noise from a counter-based (Philox) generator."""
    rng = np.random.Generator(np.random.Philox(int(seed)))
    return np.sqrt(variance) * rng.standard_normal(n)


def transmit(sample: SourceSample, spec: IsiWtcSpec, trellis: JointTrellis,
             seeds: tuple[int, int]) -> ObservationPair:
    """Pass a source sample through both channels with independent noise streams."""
    if sample.edges.size and (sample.edges.max() >= trellis.n_edges
                              or not np.array_equal(trellis.edge_from[sample.edges], sample.states[:-1])
                              or not np.array_equal(trellis.edge_to[sample.edges], sample.states[1:])):
        raise ConfigError("sample is not a path of this trellis")
    if trellis.nu < spec.max_memory:
        raise ConfigError("trellis memory does not cover the channel memory")
    seed_B, seed_E = (int(s) for s in seeds)
    # noiseless outputs come from the spec taps, so a spec differing from the
    # trellis' own (e.g. other noise levels) is still simulated correctly
    uB = _filter_outputs(sample, trellis, spec.gB.taps)
    uE = _filter_outputs(sample, trellis, spec.gE.taps)
    n = sample.n
    y = uB + gaussian_noise(n, spec.sigmaB2, seed_B)
    z = uE + gaussian_noise(n, spec.sigmaE2, seed_E)
    return ObservationPair(y=y, z=z, uB=uB, uE=uE, noise_seed_B=seed_B, noise_seed_E=seed_E)


def _filter_outputs(sample: SourceSample, trellis: JointTrellis, taps) -> np.ndarray:
    if tuple(taps) == trellis.spec.gB.taps:
        return trellis.uB[sample.edges]
    if tuple(taps) == trellis.spec.gE.taps:
        return trellis.uE[sample.edges]
    # past symbols before t=1 are read from the initial state window
    init = np.array(trellis.state_symbols(int(sample.states[0])))
    x = np.concatenate([init, sample.symbols])
    full = np.convolve(x, np.asarray(taps))
    nu = trellis.nu
    return full[nu: nu + sample.n]


def dump_observations(path, sample: SourceSample, obs: ObservationPair) -> None:
    """Write ``(t, x, uB, y, uE, z)`` rows for debugging."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "uB", "y", "uE", "z"])
        for t in range(sample.n):
            w.writerow([t + 1, repr(float(sample.symbols[t])), repr(float(obs.uB[t])),
                        repr(float(obs.y[t])), repr(float(obs.uE[t])), repr(float(obs.z[t]))])
