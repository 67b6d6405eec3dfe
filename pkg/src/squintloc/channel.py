"""OFDM grid, line-of-sight near-field channel and noise injection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import (
    SPEED_OF_LIGHT,
    DistanceModel,
    PolarPoint,
    antenna_indices,
    element_distances,
)


@dataclass(frozen=True)
class ArrayConfig:
    """ULA geometry plus the OFDM grid.

    Subcarrier ``m`` sits at ``f0 + m W / M`` for ``m = 0..M``, so ``f0`` is
    the lowest frequency and there are ``M + 1`` subcarriers. ``d`` defaults
    to half a wavelength at ``f0``.
    """

    N: int
    f0: float
    W: float
    M: int
    d: float | None = None

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if self.f0 <= 0 or self.W <= 0:
            raise ValueError("f0 and W must be positive")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.d is None:
            object.__setattr__(self, "d", SPEED_OF_LIGHT / (2 * self.f0))
        elif self.d <= 0:
            raise ValueError("d must be positive")

    @property
    def fM(self) -> float:
        return self.f0 + self.W

    @property
    def spacing(self) -> float:
        return self.W / self.M

    @property
    def frequencies(self) -> np.ndarray:
        return self.f0 + self.baseband

    @property
    def baseband(self) -> np.ndarray:
        # f~_m = m W / M, exact at both ends
        return np.arange(self.M + 1) * self.W / self.M

    @property
    def indices(self) -> np.ndarray:
        return antenna_indices(self.N)

    @property
    def lambda0(self) -> float:
        return SPEED_OF_LIGHT / self.f0

    def with_subcarriers(self, M: int) -> "ArrayConfig":
        return replace(self, M=M)


@dataclass
class ReceivedSpectrum:
    """Per-subcarrier complex samples at one user for one sweep."""

    samples: np.ndarray
    rescaled: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)

    def __len__(self):
        return len(self.samples)

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.samples)


def subcarrier_frequency(cfg: ArrayConfig, m: int) -> float:
    if not 0 <= m <= cfg.M:
        raise IndexError(f"subcarrier index {m} outside 0..{cfg.M}")
    return cfg.f0 + m * cfg.W / cfg.M


def path_loss(f, r):
    """Free-space amplitude ``c / (4 pi f r)``."""
    return SPEED_OF_LIGHT / (4 * math.pi * np.asarray(f) * np.asarray(r))


def channel_vector(
    cfg: ArrayConfig, user: PolarPoint, m: int, distance_model: DistanceModel = "exact"
) -> np.ndarray:
    f = subcarrier_frequency(cfg, m)
    rn = element_distances(user, cfg.N, cfg.d, distance_model)
    return path_loss(f, user.r) * np.exp(-2j * np.pi * f * rn / SPEED_OF_LIGHT)


def channel_matrix(
    cfg: ArrayConfig, user: PolarPoint, distance_model: DistanceModel = "exact"
) -> np.ndarray:
    """All subcarriers at once, shape ``(M + 1, N)``; row m equals channel_vector(m)."""
    f = cfg.frequencies[:, None]
    rn = element_distances(user, cfg.N, cfg.d, distance_model)[None, :]
    return path_loss(f, user.r) * np.exp(-2j * np.pi * f * rn / SPEED_OF_LIGHT)


def noise_variance(samples: np.ndarray, snr: float) -> float:
    return float(np.mean(np.abs(samples) ** 2)) / snr


def add_awgn(
    spectrum: ReceivedSpectrum, snr: float, rng: np.random.Generator
) -> ReceivedSpectrum:
    """Add circular complex Gaussian noise at linear ``snr``.

    The noise variance is the mean noiseless power over the sweep's samples
    divided by ``snr``; ``snr = inf`` returns the input unchanged.
    """
    if math.isinf(snr):
        return spectrum
    if not snr > 0:
        raise ValueError("snr must be positive")
    y = spectrum.samples
    sigma = math.sqrt(noise_variance(y, snr) / 2)
    noise = sigma * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    return ReceivedSpectrum(y + noise, spectrum.rescaled, dict(spectrum.meta))


def db_to_linear(snr_db: float) -> float:
    return math.inf if math.isinf(snr_db) else 10 ** (snr_db / 10)
