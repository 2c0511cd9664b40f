"""Water-pouring capacity of an ISI channel under an average energy constraint.

The channel is band-limited to ``|f| <= W`` with symbol period
``T = 1/(2W)``; its folded response is
``G(f) = sum_l g_l exp(-j 2 pi l f T) / sum_l |g_l|^2`` and the noise has a
flat density ``N`` (W/Hz) in the band.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import ConfigError, NoWaterError, NumericalError
from .trellis import TransferPolynomial

ENERGY_RTOL = 1e-12  # root-finding target; the accepted residual is 1e3 times looser
QUAD_ABS_TOL = 1e-11
SCAN_POINTS = 4097


@dataclass(frozen=True)
class SpectralSpec:
    g: TransferPolynomial
    noise_psd: float
    Es: float
    W: float

    def __post_init__(self):
        if not self.W > 0:
            raise ConfigError("bandwidth W must be positive")
        if not self.noise_psd > 0:
            raise ConfigError("noise_psd must be positive")
        if not self.Es >= 0:
            raise ConfigError("Es must be non-negative")

    @property
    def T(self) -> float:
        return 1.0 / (2.0 * self.W)


def folded_spectrum(spec: SpectralSpec, f) -> np.ndarray:
    """``|G(f)|^2``; zero outside the band."""
    f = np.asarray(f, dtype=float)
    taps = np.asarray(spec.g.taps)
    ell = np.arange(taps.size)
    energy = float(np.sum(taps ** 2))
    if energy == 0.0:
        return np.zeros(f.shape)
    G = (taps[None, :] * np.exp(-2j * np.pi * np.outer(f.ravel(), ell) * spec.T)).sum(axis=1)
    out = np.abs(G / energy) ** 2
    out[np.abs(f.ravel()) > spec.W] = 0.0
    return out.reshape(f.shape)


def _inverse_snr(spec: SpectralSpec, f: float) -> float:
    g2 = float(folded_spectrum(spec, f))
    return spec.noise_psd / g2 if g2 > 0 else math.inf


def _crossings(spec: SpectralSpec, level: float) -> list[float]:
    """Frequencies in ``[0, W]`` where ``N/|G|^2`` crosses ``level``."""
    f = np.linspace(0.0, spec.W, SCAN_POINTS)
    with np.errstate(divide="ignore"):
        h = spec.noise_psd / folded_spectrum(spec, f) - level
    pts = []
    for k in np.flatnonzero(np.sign(h[:-1]) != np.sign(h[1:])):
        a, b = f[k], f[k + 1]
        # step just off an exact spectral null so the bracket is finite
        if not np.isfinite(h[k]):
            a += (b - a) * 1e-12
        if not np.isfinite(h[k + 1]):
            b -= (b - a) * 1e-12
        pts.append(brentq(lambda x: _inverse_snr(spec, x) - level, a, b, xtol=1e-15))
    return pts


def _band_integral(spec: SpectralSpec, level: float, fn) -> float:
    """Integrate ``fn`` over the part of ``[-W, W]`` where ``N/|G|^2 < level``."""
    edges = [0.0, *_crossings(spec, level), spec.W]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a or _inverse_snr(spec, 0.5 * (a + b)) >= level:
            continue
        val, _ = quad(fn, a, b, epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=200)
        total += val
    return 2.0 * total


def poured_energy(spec: SpectralSpec, alpha: float) -> float:
    return _band_integral(spec, alpha, lambda f: max(0.0, alpha - _inverse_snr(spec, f)))


def water_level(spec: SpectralSpec) -> float:
    """Level ``alpha`` with ``integral max(0, alpha - N/|G|^2) df = Es``."""
    g2 = folded_spectrum(spec, np.linspace(0.0, spec.W, SCAN_POINTS))
    if not np.any(g2 > 0):
        raise NoWaterError("no water: the folded spectrum vanishes on the whole band")
    floor = spec.noise_psd / g2.max()
    if spec.Es == 0:
        return floor
    hi = floor + spec.Es / (2 * spec.W)
    while poured_energy(spec, hi) < spec.Es:
        hi = floor + 2 * (hi - floor)
    alpha = brentq(lambda a: poured_energy(spec, a) - spec.Es, floor, hi,
                   xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(poured_energy(spec, alpha) - spec.Es) > ENERGY_RTOL * 1e3 * spec.Es:
        raise NumericalError("water level search did not meet the energy constraint")
    return alpha


def waterpour_capacity(spec: SpectralSpec) -> float:
    """Capacity in nats per second."""
    alpha = water_level(spec)
    if spec.Es == 0:
        return 0.0
    return 0.5 * _band_integral(
        spec, alpha, lambda f: max(0.0, math.log(alpha / _inverse_snr(spec, f))))


def flat_capacity(Es: float, W: float, noise_psd: float) -> float:
    """Closed form for ``g(D) = 1``: ``W log(1 + Es / (2 W N))``."""
    return W * math.log1p(Es / (2.0 * W * noise_psd))


def gain_to_noise_db(spec: SpectralSpec, f) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(folded_spectrum(spec, f) / spec.noise_psd)


def gain_to_noise_ratio_curve(specB: SpectralSpec, specE: SpectralSpec, grid) -> dict:
    """Per-frequency gain-to-noise ratios (dB) of both channels on a shared grid."""
    grid = np.asarray(grid, dtype=float)
    W = min(specB.W, specE.W)
    if grid.size and (grid.min() < 0 or grid.max() > W):
        raise ConfigError("frequency grid must lie inside [0, W]")
    rB, rE = gain_to_noise_db(specB, grid), gain_to_noise_db(specE, grid)
    return {"f": grid, "bob_db": rB, "eve_db": rE}


def sign_changes(diff: np.ndarray) -> int:
    d = diff[np.isfinite(diff) & (diff != 0)]
    return int(np.count_nonzero(np.sign(d[1:]) != np.sign(d[:-1])))
