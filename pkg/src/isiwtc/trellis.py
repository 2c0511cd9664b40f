"""Joint finite-state machine of a Markov source feeding two ISI channels.

States are sliding windows of the last ``nu`` channel input symbols, encoded
as base-|X| integers with the oldest symbol most significant.  Edges leaving
state ``i`` are stored contiguously at indices ``i*|X| .. i*|X| + |X| - 1`` in
alphabet order, which keeps every per-state operation a reshape away.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, MemoryTooSmallError


def _frozen(a) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of real channel input levels."""

    symbols: tuple[float, ...]

    def __post_init__(self):
        syms = tuple(float(s) for s in self.symbols)
        if len(syms) < 2:
            raise ConfigError("alphabet needs at least 2 symbols")
        if not all(math.isfinite(s) for s in syms):
            raise ConfigError("alphabet symbols must be finite")
        if len(set(syms)) != len(syms):
            raise ConfigError("alphabet symbols must be distinct")
        object.__setattr__(self, "symbols", syms)

    @classmethod
    def bpsk(cls, Es: float = 1.0) -> "Alphabet":
        a = math.sqrt(Es)
        return cls((a, -a))

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.symbols)


@dataclass(frozen=True)
class TransferPolynomial:
    """Real ISI taps ``g_0 .. g_m``; trailing zeros are trimmed."""

    taps: tuple[float, ...]

    def __post_init__(self):
        taps = [float(t) for t in self.taps]
        if not taps:
            raise ConfigError("transfer polynomial needs at least one tap")
        if not all(math.isfinite(t) for t in taps):
            raise ConfigError("taps must be finite")
        while len(taps) > 1 and taps[-1] == 0.0:
            taps.pop()
        object.__setattr__(self, "taps", tuple(taps))

    @property
    def memory(self) -> int:
        return len(self.taps) - 1

    @property
    def energy(self) -> float:
        return float(sum(t * t for t in self.taps))

    def normalized(self) -> "TransferPolynomial":
        return normalize(self)


def normalize(p: TransferPolynomial) -> TransferPolynomial:
    """Scale taps to unit energy, sum of squared taps equal to one."""
    e = p.energy
    if e == 0.0:
        raise ConfigError("cannot normalize an all-zero transfer polynomial")
    s = math.sqrt(e)
    return TransferPolynomial(tuple(t / s for t in p.taps))


DICODE = TransferPolynomial((1.0, -1.0))
EPR4 = TransferPolynomial((1.0, 1.0, -1.0, -1.0))


@dataclass(frozen=True)
class IsiWtcSpec:
    """Bob's and Eve's channels: taps plus noise variances."""

    gB: TransferPolynomial
    gE: TransferPolynomial
    sigmaB2: float
    sigmaE2: float

    def __post_init__(self):
        # zero variance is accepted for noiseless simulation only
        if not (self.sigmaB2 >= 0 and self.sigmaE2 >= 0):
            raise ConfigError("noise variances must be non-negative")

    @classmethod
    def from_snr(cls, gB, gE, snrB_db: float, snrE_db: float, Es: float = 1.0,
                 normalize_taps: bool = True) -> "IsiWtcSpec":
        gB = gB if isinstance(gB, TransferPolynomial) else TransferPolynomial(tuple(gB))
        gE = gE if isinstance(gE, TransferPolynomial) else TransferPolynomial(tuple(gE))
        if normalize_taps:
            gB, gE = normalize(gB), normalize(gE)
        return cls(gB, gE, snr_db_to_variance(snrB_db, Es), snr_db_to_variance(snrE_db, Es))

    @property
    def max_memory(self) -> int:
        return max(self.gB.memory, self.gE.memory)


def snr_db_to_variance(snr_db: float, Es: float = 1.0) -> float:
    """Noise variance for ``SNR = Es / sigma^2`` given in decibels."""
    return Es * 10.0 ** (-snr_db / 10.0)


@dataclass(frozen=True, eq=False)
class JointTrellis:
    """Trellis section shared by the source, both channels and the estimator.

    Edge ``e`` goes from ``edge_from[e]`` to ``edge_to[e]``, carries the input
    symbol ``alphabet.symbols[edge_symbol[e]]`` and the noiseless outputs
    ``uB[e]`` and ``uE[e]``.  ``succ[i]`` and ``pred[j]`` hold edge indices.
    """

    alphabet: Alphabet
    nu: int
    spec: IsiWtcSpec
    states: tuple[tuple[int, ...], ...]
    edge_from: np.ndarray
    edge_to: np.ndarray
    edge_symbol: np.ndarray
    uB: np.ndarray
    uE: np.ndarray
    succ: np.ndarray
    pred: np.ndarray
    _key: tuple = field(repr=False, default=())

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_edges(self) -> int:
        return int(self.edge_from.shape[0])

    @property
    def q(self) -> int:
        return len(self.alphabet)

    @property
    def edges(self) -> list[tuple[int, int, float, float, float]]:
        syms = self.alphabet.symbols
        return [(int(i), int(j), syms[int(x)], float(b), float(e))
                for i, j, x, b, e in zip(self.edge_from, self.edge_to,
                                         self.edge_symbol, self.uB, self.uE)]

    def edge_index(self, i: int, j: int) -> int:
        for e in self.succ[i]:
            if self.edge_to[e] == j:
                return int(e)
        raise KeyError((i, j))

    def state_symbols(self, i: int) -> tuple[float, ...]:
        return tuple(self.alphabet.symbols[k] for k in self.states[i])

    def same_structure(self, other: "JointTrellis") -> bool:
        return self is other or self._key == other._key

    def per_state(self, edge_values: np.ndarray) -> np.ndarray:
        """View per-edge values as an ``(n_states, |X|)`` array of rows."""
        return np.asarray(edge_values).reshape(self.n_states, self.q)

    def transition_matrix(self, edge_values: np.ndarray) -> np.ndarray:
        """Dense ``|S| x |S|`` matrix with ``edge_values`` on the edge set."""
        M = np.zeros((self.n_states, self.n_states))
        M[self.edge_from, self.edge_to] = edge_values
        return M


def _noiseless_outputs(windows: np.ndarray, g: TransferPolynomial) -> np.ndarray:
    # windows[:, k] holds x_{t-nu+k}; the newest symbol is the last column
    out = np.zeros(windows.shape[0])
    for ell, gl in enumerate(g.taps):
        out += gl * windows[:, -1 - ell]
    return out


def build_joint_trellis(alphabet: Alphabet, nu: int, spec: IsiWtcSpec) -> JointTrellis:
    """Build the joint source/channel trellis of memory ``nu``.

    Raises
    ------
    MemoryTooSmallError
        If ``nu`` is below either channel memory.
    """
    if not isinstance(alphabet, Alphabet):
        alphabet = Alphabet(tuple(alphabet))
    nu = int(nu)
    if nu < 1:
        raise ConfigError("source memory nu must be at least 1")
    if nu < spec.max_memory:
        raise MemoryTooSmallError(
            f"memory too small: nu={nu} < max(m_B, m_E)={spec.max_memory}")
    q = len(alphabet)
    n_states = q ** nu
    states = tuple(itertools.product(range(q), repeat=nu))

    i = np.repeat(np.arange(n_states), q)
    x = np.tile(np.arange(q), n_states)
    j = (i * q + x) % n_states
    # symbol indices of the window (x_{t-nu}, ..., x_t) for each edge
    state_idx = np.asarray(states, dtype=np.int64).reshape(n_states, nu)
    window_idx = np.concatenate([state_idx[i], x[:, None]], axis=1)
    window = alphabet.values[window_idx]

    succ = np.arange(n_states * q).reshape(n_states, q)
    # predecessors of j: (a, j_0 .. j_{nu-2}) for every a, entering with j's last symbol
    jj = np.arange(n_states)
    pred_states = (np.arange(q)[None, :] * q ** (nu - 1)) + (jj[:, None] // q)
    pred = pred_states * q + (jj % q)[:, None]

    key = (alphabet.symbols, nu, spec.gB.taps, spec.gE.taps)
    return JointTrellis(
        alphabet=alphabet, nu=nu, spec=spec, states=states,
        edge_from=_frozen(i), edge_to=_frozen(j), edge_symbol=_frozen(x),
        uB=_frozen(_noiseless_outputs(window, spec.gB)),
        uE=_frozen(_noiseless_outputs(window, spec.gE)),
        succ=_frozen(succ), pred=_frozen(pred), _key=key,
    )
