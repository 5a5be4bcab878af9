"""System configuration and the named scenario preset."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .array_model import SPEED_OF_LIGHT, ArrayLayout, ArrayShape, PolarPosition
from .channel import PathLossModel


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0


@dataclass(frozen=True)
class SystemConfig:
    """Everything needed to build and solve one network instance (SI units)."""

    shape: ArrayShape
    n_tx: int
    bs: PolarPosition
    users: tuple[PolarPosition, ...]
    carrier: float = 28e9
    harmonic: int = 1
    amplitude: float = 1.0
    phase0: float = 0.0
    f_min: float = 0.2e6
    f_max: float = 20e6
    rician_factor: float = 10.0
    p_max: float = 1.0
    noise_power: float = 1e-14
    weights: tuple[float, ...] = ()
    path_loss: PathLossModel = field(default_factory=PathLossModel)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        if not self.users:
            raise ValueError("at least one user is required")
        if not self.weights:
            object.__setattr__(self, "weights", (1.0 / len(self.users),) * len(self.users))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.weights) != len(self.users):
            raise ValueError("need one weight per user")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be non-negative")
        if self.n_tx < 1:
            raise ValueError("n_tx must be at least 1")
        if not 0 < self.f_min <= self.f_max:
            raise ValueError(f"need 0 < f_min <= f_max, got f_min={self.f_min}, f_max={self.f_max}")
        if self.p_max < 0:
            raise ValueError("power budget must be non-negative")
        if not self.noise_power > 0:
            raise ValueError("noise power must be positive")
        if not self.rician_factor >= 0:
            raise ValueError("Rician factor must be non-negative")
        if not 0 < self.amplitude <= 1:
            raise ValueError("reflection amplitude must lie in (0, 1]")
        if int(self.harmonic) != self.harmonic:
            raise ValueError("harmonic order must be an integer")
        lam = SPEED_OF_LIGHT / self.carrier
        if not math.isclose(self.shape.wavelength, lam, rel_tol=1e-12):
            raise ValueError("shape wavelength does not match the carrier frequency")

    @property
    def K(self) -> int:
        return len(self.users)

    @property
    def L(self) -> int:
        return self.shape.L

    @property
    def wavelength(self) -> float:
        return self.shape.wavelength

    @property
    def noise(self) -> np.ndarray:
        return np.full(self.K, self.noise_power)

    def layout(self) -> ArrayLayout:
        return ArrayLayout(self.shape)

    def replace(self, **changes) -> "SystemConfig":
        return replace(self, **changes)

    def with_subarrays(self, L: int) -> "SystemConfig":
        R, S = subarray_grid(L)
        return replace(self, shape=replace(self.shape, R=R, S=S))


def subarray_grid(L: int) -> tuple[int, int]:
    """Most nearly square factorization ``R <= S`` with ``R * S = L``."""
    if L < 1:
        raise ValueError("L must be positive")
    R = int(math.isqrt(L))
    while L % R:
        R -= 1
    return R, L // R


PAPER_SEC5 = "paper-sec5"
PRESET_REF_GAIN = 1e-3

# unequal weight preset favouring the farthest user
UNEQUAL_WEIGHTS = (0.2, 0.35, 0.25, 0.2)


def paper_preset(**overrides) -> SystemConfig:
    """Four-user scenario at 28 GHz with a 4x4 grid of 2x2 subarrays."""
    carrier = 28e9
    lam = SPEED_OF_LIGHT / carrier
    users = tuple(
        PolarPosition.from_degrees(d, 90.0, el)
        for d, el in zip((40.0, 75.0, 55.0, 40.0), (30.0, 70.0, 30.0, 150.0))
    )
    cfg = SystemConfig(
        shape=ArrayShape(R=4, S=4, M=2, N=2, wavelength=lam),
        n_tx=10,
        bs=PolarPosition.from_degrees(100.0, 30.0, 120.0),
        users=users,
        carrier=carrier,
        harmonic=1,
        f_min=0.2e6,
        f_max=20e6,
        rician_factor=db_to_linear(10.0),
        p_max=dbm_to_watt(30.0),
        noise_power=dbm_to_watt(-110.0),
        weights=(0.25, 0.25, 0.25, 0.25),
        # -30 dB at 1 m; free space leaves the cascade near -16 dB SNR
        path_loss=PathLossModel(ref_gain=PRESET_REF_GAIN),
        seed=0,
    )
    return replace(cfg, **overrides) if overrides else cfg


PRESETS = {PAPER_SEC5: paper_preset}
