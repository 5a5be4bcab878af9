"""Path loss and Rician channel realization for the BS -> surface -> user links.

Random draws use numpy's counter-based Philox bit generator keyed by a
``SeedSequence`` built from ``(seed, replicate)``, so a realization is a pure
function of the configuration and those two integers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .array_model import ArrayLayout, steering_br, steering_ru


@dataclass(frozen=True)
class PathLossModel:
    """Large-scale amplitude factor ``sqrt(ref_gain * d**-alpha)``.

    ``ref_gain`` is the power gain at 1 m; ``None`` means free space at the
    carrier, ``(wavelength / (4 pi))**2``.
    """

    ref_gain: float | None = None
    alpha_br: float = 2.2
    alpha_ru: float = 2.2

    def __post_init__(self):
        if self.ref_gain is not None and not self.ref_gain > 0:
            raise ValueError("reference gain must be positive")
        if self.alpha_br < 0 or self.alpha_ru < 0:
            raise ValueError("path-loss exponents must be non-negative")

    def resolved_gain(self, wavelength: float) -> float:
        if self.ref_gain is not None:
            return self.ref_gain
        return (wavelength / (4 * math.pi)) ** 2


def path_loss(distance: float, ref_gain: float, alpha: float) -> float:
    """Amplitude multiplier at ``distance`` meters."""
    if not distance > 0:
        raise ValueError(f"distance must be positive, got {distance}")
    return math.sqrt(ref_gain * distance ** (-alpha))


def channel_rng(seed: int, replicate: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, replicate])))


def _cgauss(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


@dataclass
class ChannelSet:
    """One channel realization.

    ``H_br`` is ``I x N_t``; ``h_ru`` is ``K x I`` with row k the surface-to-user
    channel of user k.  ``zeta_br`` and ``zeta_ru`` are the amplitude path
    losses used.
    """

    H_br: np.ndarray
    h_ru: np.ndarray
    rician_factor: float
    zeta_br: float
    zeta_ru: np.ndarray
    seed: int = 0
    replicate: int = 0

    @property
    def K(self) -> int:
        return self.h_ru.shape[0]

    def to_dict(self) -> dict:
        def pairs(a):
            a = np.asarray(a)
            return np.stack([a.real, a.imag], axis=-1).tolist()

        return {
            "format": "fdris-channels/1",
            "H_br": pairs(self.H_br),
            "h_ru": pairs(self.h_ru),
            "rician_factor": self.rician_factor,
            "zeta_br": self.zeta_br,
            "zeta_ru": list(map(float, self.zeta_ru)),
            "seed": self.seed,
            "replicate": self.replicate,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelSet":
        if data.get("format") != "fdris-channels/1":
            raise ValueError("not an fdris channel dump")

        def cplx(x):
            a = np.asarray(x, dtype=float)
            return a[..., 0] + 1j * a[..., 1]

        return cls(
            H_br=cplx(data["H_br"]),
            h_ru=cplx(data["h_ru"]),
            rician_factor=float(data["rician_factor"]),
            zeta_br=float(data["zeta_br"]),
            zeta_ru=np.asarray(data["zeta_ru"], dtype=float),
            seed=int(data["seed"]),
            replicate=int(data["replicate"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "ChannelSet":
        return cls.from_dict(json.loads(Path(path).read_text()))


def los_channels(config, layout: ArrayLayout):
    """Deterministic LoS parts ``(H_los, h_los)`` without path loss."""
    a_r, a_b = steering_br(layout, config.bs, config.n_tx)
    h_los = np.stack([steering_ru(layout, u) for u in config.users])
    return np.outer(a_r, a_b), h_los


def realize_channels(config, layout: ArrayLayout, seed: int | None = None,
                     replicate: int = 0) -> ChannelSet:
    """Draw ``H_br`` and ``h_rk`` from the Rician model for ``config``."""
    seed = config.seed if seed is None else seed
    rng = channel_rng(seed, replicate)
    beta = config.rician_factor
    if math.isinf(beta):
        los_w, nlos_w = 1.0, 0.0
    else:
        los_w, nlos_w = math.sqrt(beta / (1 + beta)), math.sqrt(1 / (1 + beta))

    gain = config.path_loss.resolved_gain(layout.shape.wavelength)
    zeta_br = path_loss(config.bs.distance, gain, config.path_loss.alpha_br)
    zeta_ru = np.array([path_loss(u.distance, gain, config.path_loss.alpha_ru)
                        for u in config.users])

    H_los, h_los = los_channels(config, layout)
    G = _cgauss(rng, H_los.shape)
    g = _cgauss(rng, h_los.shape)
    H_br = zeta_br * (los_w * H_los + nlos_w * G)
    h_ru = zeta_ru[:, None] * (los_w * h_los + nlos_w * g)
    return ChannelSet(H_br, h_ru, beta, zeta_br, zeta_ru, seed, replicate)
