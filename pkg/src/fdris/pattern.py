"""Received-energy patterns over distance-angle grids.

Only the deterministic LoS propagation is used.  Because the LoS
BS-to-surface channel is rank one, every beam sees the same spatial shape
(the surface array factor) scaled by ``|a_B^T w_k|^2``; the normalized
pattern is therefore the array-factor power relative to its grid maximum.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .array_model import SPEED_OF_LIGHT, PolarPosition, steering_br
from .channel import path_loss

DB_FLOOR = -200.0


@dataclass(frozen=True)
class GridSpec:
    """Distances in meters and elevation angles in radians at a fixed azimuth."""

    distances: np.ndarray
    angles: np.ndarray
    azimuth: float = math.pi / 2

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=float)
        a = np.asarray(self.angles, dtype=float)
        if d.size == 0 or a.size == 0:
            raise ValueError("pattern grid is empty")
        if np.any(np.diff(d) <= 0) or np.any(np.diff(a) <= 0):
            raise ValueError("grid axes must be strictly increasing")
        if d[0] <= 0:
            raise ValueError("distances must be positive")
        object.__setattr__(self, "distances", d)
        object.__setattr__(self, "angles", a)

    @classmethod
    def uniform(cls, d_min=20.0, d_max=100.0, n_dist=200, n_angle=180,
                azimuth_deg=90.0) -> "GridSpec":
        """``n_angle`` elevation samples spanning ``[0, 180)`` degrees."""
        return cls(np.linspace(d_min, d_max, n_dist),
                   np.deg2rad(np.arange(n_angle) * 180.0 / n_angle),
                   math.radians(azimuth_deg))


@dataclass
class PatternGrid:
    """Energies indexed ``[distance, angle]``.

    ``linear`` includes path loss and beam gains (noise excluded);
    ``normalized_db`` is the path-loss-free array-factor power in dB
    relative to its maximum over the grid.
    """

    distances: np.ndarray
    angles: np.ndarray
    azimuth: float
    linear: np.ndarray
    normalized: np.ndarray
    noise_power: float

    @property
    def db(self) -> np.ndarray:
        return to_db(self.linear)

    @property
    def normalized_db(self) -> np.ndarray:
        return to_db(self.normalized)

    def cell_of(self, position: PolarPosition) -> tuple[int, int]:
        i = int(np.argmin(np.abs(self.distances - position.distance)))
        j = int(np.argmin(np.abs(self.angles - position.elevation)))
        return i, j

    def local_maxima(self) -> np.ndarray:
        """``(n, 2)`` cell indices that are no smaller than their 8 neighbours."""
        z = self.normalized
        pad = np.pad(z, 1, constant_values=-np.inf)
        core = pad[1:-1, 1:-1]
        ok = np.ones_like(core, dtype=bool)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di or dj:
                    ok &= core >= pad[1 + di:pad.shape[0] - 1 + di, 1 + dj:pad.shape[1] - 1 + dj]
        return np.argwhere(ok)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# distance in m, angle = elevation in deg at azimuth "
                     f"{math.degrees(self.azimuth):g} deg, energies exclude noise "
                     f"({self.noise_power:g} W)\n")
            writer = csv.writer(fh)
            writer.writerow(["distance", "angle", "energy_linear", "energy_db", "normalized_db"])
            lin, db, ndb = self.linear, self.db, self.normalized_db
            for i, d in enumerate(self.distances):
                for j, a in enumerate(self.angles):
                    writer.writerow([repr(float(d)), repr(math.degrees(a)), repr(float(lin[i, j])),
                                     repr(float(db[i, j])), repr(float(ndb[i, j]))])

    def to_dict(self) -> dict:
        return {
            "distance_m": self.distances.tolist(),
            "angle_deg": np.degrees(self.angles).tolist(),
            "azimuth_deg": math.degrees(self.azimuth),
            "noise_power_w": self.noise_power,
            "energy_linear": self.linear.tolist(),
            "energy_db": self.db.tolist(),
            "normalized_db": self.normalized_db.tolist(),
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))


def to_db(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = 10 * np.log10(x)
    return np.maximum(out, DB_FLOOR)


def _beam_gains(config, layout, w, beam):
    _, a_b = steering_br(layout, config.bs, config.n_tx)
    proj = np.abs(np.asarray(w) @ a_b) ** 2
    return float(proj.sum() if beam is None else proj[beam])


def _surface_weights(config, layout, phases, f, distances, elevations, azimuth, harmonic):
    """``D x A`` complex array factor, without amplitude or path loss."""
    a_r, _ = steering_br(layout, config.bs, config.n_tx)
    lam = layout.shape.wavelength
    sp = layout.shape.spacing
    fe = layout.per_element(f)
    # offsets depend only on the angle pair, distances enter linearly
    off = (layout.iz[:, None] * sp * math.cos(azimuth)
           + layout.iy[:, None] * sp * math.sin(azimuth) * np.cos(elevations)[None, :])
    k = 2 * np.pi * harmonic * fe
    per_angle = (a_r * phases)[:, None] * np.exp(-1j * (k[:, None] / SPEED_OF_LIGHT + 2 * np.pi / lam) * off)
    per_dist = np.exp(-1j * np.outer(distances, k) / SPEED_OF_LIGHT)
    return per_dist @ per_angle


def received_energy(position: PolarPosition, state, config, t_snap: float = 0.0,
                    beam: int | None = None, harmonic: int | None = None) -> float:
    """Noise-free LoS energy at ``position``; ``beam=None`` sums all beams."""
    layout = config.layout()
    g = config.harmonic if harmonic is None else harmonic
    # the snapshot time rotates each element by exp(j 2 pi g f_l t)
    phases = state.phases * np.exp(2j * np.pi * g * layout.per_element(state.f) * t_snap)
    af = _surface_weights(config, layout, phases, state.f, np.array([position.distance]),
                          np.array([position.elevation]), position.azimuth, g)[0, 0]
    ref = config.path_loss.resolved_gain(layout.shape.wavelength)
    zeta2 = (path_loss(position.distance, ref, config.path_loss.alpha_ru)
             * path_loss(config.bs.distance, ref, config.path_loss.alpha_br)) ** 2
    return float(config.amplitude ** 2 * zeta2 * np.abs(af) ** 2
                 * _beam_gains(config, layout, state.w, beam))


def compute_pattern(state, config, grid: GridSpec, beam: int | None = None,
                    harmonic: int | None = None) -> PatternGrid:
    """Energy over ``grid`` at the snapshot ``t = 0``."""
    layout = config.layout()
    g = config.harmonic if harmonic is None else harmonic
    af = np.abs(_surface_weights(config, layout, state.phases, state.f, grid.distances,
                                 grid.angles, grid.azimuth, g)) ** 2
    lam = layout.shape.wavelength
    ref = config.path_loss.resolved_gain(lam)
    zeta_ru = np.array([path_loss(d, ref, config.path_loss.alpha_ru) for d in grid.distances])
    zeta_br = path_loss(config.bs.distance, ref, config.path_loss.alpha_br)
    gain = _beam_gains(config, layout, state.w, beam)
    linear = config.amplitude ** 2 * (zeta_br * zeta_ru[:, None]) ** 2 * af * gain
    peak = af.max()
    normalized = af / peak if peak > 0 else np.zeros_like(af)
    return PatternGrid(grid.distances, grid.angles, grid.azimuth, linear, normalized,
                       float(np.mean(config.noise)))
