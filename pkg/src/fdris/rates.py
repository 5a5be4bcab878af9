"""Effective channels, SINR/rates and the MMSE auxiliary-variable machinery.

Rates are in bits/s/Hz.  The MMSE surrogate of user k,

    R~_k = (ln W_k - W_k E_k + 1) / ln 2,

lower-bounds R_k for any fixed ``(W_k, u_k)`` and is tight when
``(W_k, u_k)`` come from :func:`update_aux` at the same point.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .array_model import ArrayLayout, SPEED_OF_LIGHT, delays_from_phases
from .channel import ChannelSet
from .config import SystemConfig

LN2 = np.log(2.0)


@dataclass(frozen=True)
class MmseAux:
    """Per-user MMSE weight ``W``, receive filter ``u`` and MSE ``E``."""

    W: np.ndarray
    u: np.ndarray
    E: np.ndarray


@dataclass
class SolutionState:
    """Current iterate.

    ``w`` is ``K x N_t`` (row k is user k's beamformer), ``phases`` the
    delay-induced factors ``exp(-j 2 pi g f_l tau_i)``, ``f`` the L
    modulation frequencies and ``delays`` the matching time delays.
    ``harmonic`` is the order used in the distance-dependent coefficients
    (0 for a conventional surface).
    """

    w: np.ndarray
    phases: np.ndarray
    f: np.ndarray
    delays: np.ndarray
    harmonic: int
    aux: MmseAux | None = None
    objective: float = float("nan")

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.w) ** 2))

    def copy(self) -> "SolutionState":
        return replace(self, w=self.w.copy(), phases=self.phases.copy(),
                       f=self.f.copy(), delays=self.delays.copy())


@dataclass
class Problem:
    """One network instance: configuration, layout and channel realization.

    ``harmonic`` overrides the order used in the distance-dependent
    reflection coefficients; ``0`` models a conventional surface.
    """

    config: SystemConfig
    channels: ChannelSet
    harmonic: int | None = None
    layout: ArrayLayout = field(init=False)
    user_distances: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.harmonic is None:
            self.harmonic = self.config.harmonic
        self.layout = self.config.layout()
        self.user_distances = np.stack([self.layout.distances(u) for u in self.config.users])
        I, K = self.layout.I, self.config.K
        if self.channels.H_br.shape != (I, self.config.n_tx):
            raise ValueError(f"H_br has shape {self.channels.H_br.shape}, expected {(I, self.config.n_tx)}")
        if self.channels.h_ru.shape != (K, I):
            raise ValueError(f"h_ru has shape {self.channels.h_ru.shape}, expected {(K, I)}")

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.config.weights)

    @property
    def noise(self) -> np.ndarray:
        return self.config.noise

    @property
    def conventional(self) -> bool:
        return self.harmonic == 0

    def user_coefficients(self, f, t_snap: float = 0.0) -> np.ndarray:
        """``K x I`` array of distance-dependent coefficients ``theta^k_i``."""
        cfg = self.config
        fe = self.layout.per_element(f)
        phase = cfg.phase0 + 2 * np.pi * self.harmonic * fe * (t_snap - self.user_distances / SPEED_OF_LIGHT)
        return cfg.amplitude * np.exp(1j * phase)

    def cascade(self, phases, f) -> np.ndarray:
        """``K x I`` per-element cascade ``h_rk * theta~ * theta^k``."""
        return self.channels.h_ru * phases[None, :] * self.user_coefficients(f)

    def effective(self, phases, f) -> np.ndarray:
        """``K x N_t`` effective channels; row k is ``h_rk^T Theta~ Theta_k H_BR``."""
        return self.cascade(phases, f) @ self.channels.H_br

    def delays_for(self, phases, f) -> np.ndarray:
        # a conventional surface has no time modulation; report the delays
        # that would realize the phases at the configured harmonic
        g = self.harmonic if self.harmonic != 0 else self.config.harmonic
        if g == 0:
            return np.zeros(self.layout.I)
        return delays_from_phases(phases, g, f, self.layout)

    def rates(self, state: SolutionState) -> np.ndarray:
        return user_rates(self.effective(state.phases, state.f), state.w, self.noise)

    def wsr(self, state: SolutionState) -> float:
        return weighted_sum_rate(self.rates(state), self.weights)

    def aux(self, state: SolutionState) -> MmseAux:
        return update_aux(self.effective(state.phases, state.f), state.w, self.noise)

    def surrogate(self, state: SolutionState, aux: MmseAux) -> float:
        G = self.effective(state.phases, state.f)
        return surrogate_wsr(G, state.w, self.noise, aux, self.weights)


def _gains(G, w):
    # S[k, j] = g_k w_j
    S = G @ w.T
    return np.abs(S) ** 2, S


def user_rates(G, w, noise) -> np.ndarray:
    P, _ = _gains(G, w)
    signal = np.diag(P)
    interference = P.sum(axis=1) - signal
    return np.log2(1 + signal / (interference + noise))


def rate_of_user(k: int, G, w, noise) -> float:
    """Rate of user ``k`` (0-based) in bits/s/Hz."""
    return float(user_rates(G, w, noise)[k])


def weighted_sum_rate(rates, weights) -> float:
    return float(np.dot(weights, rates))


def update_aux(G, w, noise) -> MmseAux:
    """MMSE receive filters and weights maximizing the surrogate at ``(G, w)``."""
    P, S = _gains(G, w)
    total = P.sum(axis=1) + noise
    signal = np.diag(P)
    s = np.diag(S)
    u = s / total
    # E = (interference + noise) / total, written to avoid 1 - x cancellation
    E = (total - signal) / total
    dead = np.abs(G).sum(axis=1) == 0
    u = np.where(dead, 0, u)
    E = np.where(dead, 1.0, E)
    return MmseAux(W=1.0 / E, u=u, E=E)


def mse(G, w, noise, u) -> np.ndarray:
    """MSE of each user for receive filters ``u`` at ``(G, w)``."""
    P, S = _gains(G, w)
    interference = P.sum(axis=1) - np.diag(P)
    s = np.diag(S)
    return np.abs(u) ** 2 * (interference + noise) + np.abs(np.conj(u) * s - 1) ** 2


def surrogate_rates(G, w, noise, aux: MmseAux) -> np.ndarray:
    E = mse(G, w, noise, aux.u)
    return (np.log(aux.W) - aux.W * E + 1) / LN2


def surrogate_wsr(G, w, noise, aux: MmseAux, weights) -> float:
    return float(np.dot(weights, surrogate_rates(G, w, noise, aux)))
