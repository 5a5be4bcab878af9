"""Array geometry, index maps and time-modulated reflection coefficients.

Element indices ``i``, grid indices ``(i_z, i_y)`` and subarray indices ``l``
are 1-based in the scalar helpers, matching the usual notation for the
surface.  Vectorized quantities are stored as flat numpy arrays in element
order ``i = 1..I`` (row-major over ``(i_z, i_y)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

# relative tolerance on |PT - 2 z pi| for the harmonic-selection branch
_HARMONIC_RTOL = 1e-12


@dataclass(frozen=True)
class ArrayShape:
    """Subarray grid ``R x S`` of ``M x N`` element blocks.

    ``spacing`` is the element pitch and ``wavelength`` the carrier
    wavelength, both in meters.
    """

    R: int
    S: int
    M: int
    N: int
    wavelength: float
    spacing: float | None = None

    def __post_init__(self):
        for name in ("R", "S", "M", "N"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        if self.spacing is None:
            object.__setattr__(self, "spacing", self.wavelength / 2)
        if not self.spacing > 0:
            raise ValueError("element spacing must be positive")

    @property
    def I_z(self) -> int:
        return self.R * self.M

    @property
    def I_y(self) -> int:
        return self.S * self.N

    @property
    def I(self) -> int:  # noqa: E743
        return self.I_z * self.I_y

    @property
    def L(self) -> int:
        return self.R * self.S


@dataclass(frozen=True)
class PolarPosition:
    """Position relative to a reference element: distance, azimuth, elevation."""

    distance: float
    azimuth: float
    elevation: float

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError(f"distance must be positive, got {self.distance}")
        for name in ("azimuth", "elevation"):
            angle = getattr(self, name)
            if not 0.0 <= angle <= math.pi + 1e-12:
                raise ValueError(f"{name} must lie in [0, pi], got {angle}")

    @classmethod
    def from_degrees(cls, distance, azimuth_deg, elevation_deg):
        return cls(float(distance), math.radians(azimuth_deg), math.radians(elevation_deg))


@dataclass(frozen=True)
class ModulationParams:
    """Time-modulation settings of the surface.

    ``harmonic`` is the retained harmonic order g, ``frequencies`` the L
    per-subarray modulation frequencies in Hz and ``delays`` the I
    per-element time delays in seconds.  The phase slope of subarray l is
    ``2 pi g f_l`` so that ``P T_l = 2 g pi`` holds by construction.
    """

    harmonic: int
    frequencies: np.ndarray
    delays: np.ndarray
    amplitude: float = 1.0
    phase0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "frequencies", np.asarray(self.frequencies, dtype=float))
        object.__setattr__(self, "delays", np.asarray(self.delays, dtype=float))
        if np.any(self.delays < 0):
            raise ValueError("time delays must be non-negative")
        if not 0 < self.amplitude <= 1:
            raise ValueError("reflection amplitude must lie in (0, 1]")

    @property
    def phase_slopes(self) -> np.ndarray:
        return 2 * np.pi * self.harmonic * self.frequencies

    @property
    def periods(self) -> np.ndarray:
        return 1.0 / self.frequencies


def element_to_grid(i: int, shape: ArrayShape) -> tuple[int, int]:
    """Map 1-based element index to 1-based ``(i_z, i_y)``."""
    if not 1 <= i <= shape.I:
        raise IndexError(f"element index {i} outside [1, {shape.I}]")
    i_z = -(-i // shape.I_y)
    i_y = (i - 1) % shape.I_y + 1
    return i_z, i_y


def subarray_of(i_z: int, i_y: int, shape: ArrayShape) -> int:
    """1-based subarray index of grid position ``(i_z, i_y)``."""
    if not (1 <= i_z <= shape.I_z and 1 <= i_y <= shape.I_y):
        raise IndexError(f"grid index ({i_z}, {i_y}) outside the array")
    return (-(-i_z // shape.M) - 1) * shape.S + -(-i_y // shape.N)


def subarray_members(l: int, shape: ArrayShape) -> np.ndarray:  # noqa: E741
    """1-based element indices of subarray ``l`` in closed form.

    Enumerates ``(r-1) S M N + s N + (m-1) S N + n`` with ``r = ceil(l/S)``
    and ``s = (l-1) mod S`` over ``m = 1..M``, ``n = 1..N``.
    """
    if not 1 <= l <= shape.L:
        raise IndexError(f"subarray index {l} outside [1, {shape.L}]")
    S, M, N = shape.S, shape.M, shape.N
    r = -(-l // S)
    s = (l - 1) % S
    m = np.arange(1, M + 1)[:, None]
    n = np.arange(1, N + 1)[None, :]
    return ((r - 1) * S * M * N + s * N + (m - 1) * S * N + n).ravel()


def fourier_coefficient(slope, period, z, amplitude=1.0, phase0=0.0) -> complex:
    """Order-``z`` Fourier coefficient of ``A0 exp(j(phi0 + P mod(t, T)))``."""
    if not period > 0:
        raise ValueError("period must be positive")
    x = slope * period - 2 * z * math.pi
    scale = max(abs(slope * period), abs(2 * z * math.pi), 1.0)
    base = amplitude * complex(math.cos(phase0), math.sin(phase0))
    if abs(x) <= _HARMONIC_RTOL * scale:
        return base
    return 1j * base * (1 - complex(math.cos(x), math.sin(x))) / x


@dataclass(frozen=True)
class ArrayLayout:
    """Per-element index maps and coordinates derived from an :class:`ArrayShape`.

    All arrays are 0-based numpy arrays of length I in element order.
    """

    shape: ArrayShape
    iz: np.ndarray = field(init=False, repr=False)
    iy: np.ndarray = field(init=False, repr=False)
    subarray: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        shape = self.shape
        i = np.arange(shape.I)
        iz = i // shape.I_y
        iy = i % shape.I_y
        object.__setattr__(self, "iz", iz)
        object.__setattr__(self, "iy", iy)
        object.__setattr__(self, "subarray", (iz // shape.M) * shape.S + iy // shape.N)

    @property
    def I(self) -> int:  # noqa: E743
        return self.shape.I

    @property
    def L(self) -> int:
        return self.shape.L

    def offsets(self, position: PolarPosition) -> np.ndarray:
        """Path-length offsets of every element w.r.t. the reference element."""
        d = self.shape.spacing
        th, ph = position.azimuth, position.elevation
        return self.iz * d * math.cos(th) + self.iy * d * math.sin(th) * math.cos(ph)

    def distances(self, position: PolarPosition) -> np.ndarray:
        return position.distance + self.offsets(position)

    def per_element(self, per_subarray) -> np.ndarray:
        return np.asarray(per_subarray)[self.subarray]


def steering_br(layout: ArrayLayout, bs: PolarPosition, n_tx: int):
    """Factored BS-to-surface steering ``(a_R, a_B)`` so that ``H_LoS = a_R a_B^T``."""
    lam = layout.shape.wavelength
    d = layout.shape.spacing
    a_r = np.exp(-2j * np.pi * layout.offsets(bs) / lam)
    nt = np.arange(n_tx)
    a_b = np.exp(-2j * np.pi * nt * d * math.sin(bs.azimuth) * math.sin(bs.elevation) / lam)
    return a_r, a_b


def steering_ru(layout: ArrayLayout, user: PolarPosition) -> np.ndarray:
    """LoS response of the surface towards ``user``."""
    return np.exp(-2j * np.pi * layout.offsets(user) / layout.shape.wavelength)


def theta_tilde(harmonic, frequencies, delays, layout: ArrayLayout) -> np.ndarray:
    """Phase factors ``exp(-j 2 pi g f_l tau_i)`` realized by the time delays."""
    f = layout.per_element(frequencies)
    return np.exp(-2j * np.pi * harmonic * f * np.asarray(delays))


def theta_k(harmonic, frequencies, layout: ArrayLayout, user: PolarPosition,
            amplitude=1.0, phase0=0.0, t_snap=0.0) -> np.ndarray:
    """Distance-dependent reflection coefficients seen by ``user`` at ``t_snap``."""
    f = layout.per_element(frequencies)
    dist = layout.distances(user)
    phase = phase0 + 2 * np.pi * harmonic * f * (t_snap - dist / SPEED_OF_LIGHT)
    return amplitude * np.exp(1j * phase)


def delays_from_phases(phases, harmonic, frequencies, layout: ArrayLayout) -> np.ndarray:
    """Smallest non-negative delays reproducing unit-modulus ``phases``.

    Inverse of :func:`theta_tilde`; each delay lies in ``[0, 1/(|g| f_l))``.
    """
    if harmonic == 0:
        raise ValueError("harmonic order 0 gives no phase control through delays")
    f = layout.per_element(frequencies)
    if np.any(f <= 0):
        raise ValueError("modulation frequencies must be positive")
    sign = 1 if harmonic > 0 else -1
    angle = np.mod(-sign * np.angle(phases), 2 * np.pi)
    # angle() can land exactly on 2 pi after the mod for tiny negative inputs
    angle = np.where(angle >= 2 * np.pi, 0.0, angle)
    return angle / (2 * np.pi * abs(harmonic) * f)
