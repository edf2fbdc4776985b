"""Pilots, frequency-selective channels and received pilot signals.

Two equivalent descriptions of the received signal after cyclic-prefix
removal are provided:

* ``received_direct``  -- circulant channel matrices applied to the
  time-domain pilots ``F^H s~_n``;
* ``received_effective`` -- effective pilot blocks ``S_n`` (L x P) applied
  to the first P channel taps.

Noise is always passed in by the caller so both routes can be fed the
same realization.

Random streams
--------------
Every random draw is taken from a substream keyed by
``(root_seed, trial, purpose)`` through ``numpy.random.SeedSequence``
(``spawn_key=(trial, purpose)``), with purposes enumerated in
:class:`Stream`.  A trial's pilots, channel, activities and noise are
therefore independent of each other and of every other trial, and trials
can be generated in any order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class Stream(enum.IntEnum):
    PILOTS = 0
    CHANNEL = 1
    ACTIVITY = 2
    NOISE = 3


def substream(root_seed: int, trial: int, purpose: int) -> np.random.Generator:
    """Generator for one (trial, purpose) pair under ``root_seed``."""
    ss = np.random.SeedSequence(int(root_seed), spawn_key=(int(trial), int(purpose)))
    return np.random.default_rng(ss)


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """i.i.d. CN(0, var) samples."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True)
class SystemConfig:
    N: int
    M: int
    L: int
    P: int
    noise_var: float = 0.1
    activity_prob: float = 0.07
    gains: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("N", "M", "L", "P"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.P < self.L:
            raise ValueError(f"need P < L, got P={self.P}, L={self.L}")
        if not self.noise_var > 0:
            raise ValueError(f"noise_var must be > 0, got {self.noise_var}")
        if not 0.0 <= self.activity_prob <= 1.0:
            raise ValueError(f"activity_prob must lie in [0, 1], got {self.activity_prob}")
        gains = np.ones(self.N) if self.gains is None else np.asarray(self.gains, dtype=float)
        if gains.shape != (self.N,):
            raise ValueError(f"gains must have length N={self.N}, got shape {gains.shape}")
        if np.any(gains < 0):
            raise ValueError("gains must be nonnegative")
        gains.setflags(write=False)
        object.__setattr__(self, "gains", gains)

    def replace(self, **changes) -> "SystemConfig":
        fields = dict(N=self.N, M=self.M, L=self.L, P=self.P, noise_var=self.noise_var,
                      activity_prob=self.activity_prob, gains=self.gains)
        if "N" in changes and "gains" not in changes:
            fields["gains"] = None
        fields.update(changes)
        return SystemConfig(**fields)


def dft_matrix(L: int) -> np.ndarray:
    """Unitary DFT matrix, ``F[l, k] = exp(-2j*pi*l*k/L) / sqrt(L)``."""
    idx = np.arange(L)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / L) / np.sqrt(L)


def circulant_channel(first_col: np.ndarray) -> np.ndarray:
    """Circulant matrix with entry (i, j) equal to ``first_col[(i - j) mod L]``."""
    c = np.asarray(first_col, dtype=complex)
    L = c.shape[0]
    i, j = np.indices((L, L))
    return c[(i - j) % L]


@dataclass(frozen=True)
class PilotSet:
    freq_pilots: np.ndarray      # L x N, columns s~_n
    effective_pilots: np.ndarray  # N x L x P, blocks S_n
    stacked: np.ndarray           # L x NP, [S_1, ..., S_N]

    @classmethod
    def from_freq(cls, freq_pilots: np.ndarray, P: int) -> "PilotSet":
        """Derive effective blocks ``S_n = (F^H diag(s~_n) F)[:, :P]``."""
        freq = np.array(freq_pilots, dtype=complex)
        L, N = freq.shape
        if not 1 <= P < L:
            raise ValueError(f"need 1 <= P < L, got P={P}, L={L}")
        F = dft_matrix(L)
        # F^H diag(s) F[:, :P] for all n at once
        blocks = np.einsum("lk,kn,kp->nlp", F.conj().T, freq, F[:, :P])
        stacked = blocks.transpose(1, 0, 2).reshape(L, N * P)
        for a in (freq, blocks, stacked):
            a.setflags(write=False)
        return cls(freq, blocks, stacked)

    @property
    def L(self) -> int:
        return self.freq_pilots.shape[0]

    @property
    def N(self) -> int:
        return self.freq_pilots.shape[1]

    @property
    def P(self) -> int:
        return self.effective_pilots.shape[2]


def generate_pilots(config: SystemConfig, seed: int | np.random.Generator) -> PilotSet:
    """Gaussian pilots CN(0, I_L), each column rescaled to norm sqrt(L)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    raw = complex_normal(rng, (config.L, config.N))
    raw *= np.sqrt(config.L) / np.linalg.norm(raw, axis=0)
    return PilotSet.from_freq(raw, config.P)


@dataclass(frozen=True)
class ChannelRealization:
    taps: np.ndarray  # (N, M, P)


@dataclass(frozen=True)
class Scene:
    activities: np.ndarray  # (N,) in {0, 1}
    channel: ChannelRealization
    seed: int = 0

    def __post_init__(self):
        act = np.asarray(self.activities)
        if not np.all((act == 0) | (act == 1)):
            raise ValueError("activities must be binary")


def generate_scene(config: SystemConfig, activity_rng: np.random.Generator,
                   channel_rng: np.random.Generator, seed: int = 0) -> Scene:
    """Bernoulli(activity_prob) activities and CN(0, 1) taps."""
    act = (activity_rng.random(config.N) < config.activity_prob).astype(np.int8)
    taps = complex_normal(channel_rng, (config.N, config.M, config.P))
    return Scene(act, ChannelRealization(taps), seed)


def generate_noise(config: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    return complex_normal(rng, (config.L, config.M), config.noise_var)


@dataclass(frozen=True)
class ReceivedBatch:
    R: np.ndarray  # L x M


@dataclass(frozen=True)
class SampleCovariance:
    mat: np.ndarray  # L x L Hermitian


def _check_dims(scene: Scene, pilots: PilotSet, config: SystemConfig, noise: np.ndarray):
    taps = scene.channel.taps
    expect = {
        "N (activities)": (len(scene.activities), config.N),
        "N (pilots)": (pilots.N, config.N),
        "N (channel)": (taps.shape[0], config.N),
        "M (channel)": (taps.shape[1], config.M),
        "P (channel)": (taps.shape[2], config.P),
        "P (pilots)": (pilots.P, config.P),
        "L (pilots)": (pilots.L, config.L),
        "L (noise rows)": (noise.shape[0], config.L),
        "M (noise columns)": (noise.shape[1], config.M),
    }
    for axis, (got, want) in expect.items():
        if got != want:
            raise ValueError(f"dimension mismatch on axis {axis}: got {got}, expected {want}")


def received_direct(scene: Scene, pilots: PilotSet, config: SystemConfig,
                    noise: np.ndarray) -> ReceivedBatch:
    """Circulant-channel model evaluated literally (O(N M L^2)).

    The circulant is built from the impulse response scaled by 1/sqrt(L):
    with the unitary DFT, ``F circ(c) F^H = diag(sqrt(L) F c)``, so this is
    the normalization under which the time-domain model coincides with the
    effective-pilot model for the same CN(0, 1) taps.
    """
    noise = np.asarray(noise)
    _check_dims(scene, pilots, config, noise)
    L = config.L
    Fh = dft_matrix(L).conj().T
    R = noise.astype(complex, copy=True)
    for n in np.flatnonzero(scene.activities):
        amp = np.sqrt(config.gains[n])
        s_time = Fh @ pilots.freq_pilots[:, n]
        for m in range(config.M):
            cir = np.zeros(L, dtype=complex)
            cir[: config.P] = scene.channel.taps[n, m] / np.sqrt(L)
            R[:, m] += amp * (circulant_channel(cir) @ s_time)
    return ReceivedBatch(R)


def received_effective(scene: Scene, pilots: PilotSet, config: SystemConfig,
                       noise: np.ndarray) -> ReceivedBatch:
    """Effective-pilot model ``R = sum_n a_n sqrt(g_n) S_n h_n + noise``."""
    noise = np.asarray(noise)
    _check_dims(scene, pilots, config, noise)
    weights = np.asarray(scene.activities, dtype=float) * np.sqrt(config.gains)
    # (N, M, P) -> (N, P, M) -> (NP, M), row index n*P + p matches `stacked`
    h = scene.channel.taps.transpose(0, 2, 1).reshape(config.N * config.P, config.M)
    R = noise + pilots.stacked @ (np.repeat(weights, config.P)[:, None] * h)
    return ReceivedBatch(R)


def sample_covariance(batch: ReceivedBatch | np.ndarray) -> SampleCovariance:
    R = batch.R if isinstance(batch, ReceivedBatch) else np.asarray(batch)
    M = R.shape[1]
    if M < 1:
        raise ValueError("need at least one antenna")
    mat = (R @ R.conj().T) / M
    mat = 0.5 * (mat + mat.conj().T)
    return SampleCovariance(mat)
