"""Active beamforming by Lagrange duality and bisection on the power multiplier.

For fixed MMSE variables the surrogate is a concave quadratic in the
beamformers, and the stationary point for multiplier ``mu`` is

    w_j(mu) = (A + mu I)^+ (omega_j W_j a_j / ln 2).

The total power ``P(mu)`` is nonincreasing in ``mu``, so the multiplier that
meets the budget can be bracketed and bisected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rates import LN2, MmseAux

_EIG_RCUTOFF = 1e-12
_MAX_DOUBLINGS = 60
_MAX_BISECTIONS = 2000


class BracketError(RuntimeError):
    """Upper bracket for the multiplier could not be found."""


@dataclass(frozen=True)
class Quadratics:
    """Weighted Gram matrix ``A_hat`` and right-hand sides ``omega_j W_j a_j / ln 2``.

    ``a`` holds the un-weighted vectors ``a_k`` as rows.
    """

    A_hat: np.ndarray
    a: np.ndarray
    rhs: np.ndarray


def assemble_quadratics(G, aux: MmseAux, weights) -> Quadratics:
    """Build ``A_hat`` and the ``a_k`` from effective channels ``G`` (K x N_t)."""
    weights = np.asarray(weights, dtype=float)
    coef = weights * aux.W / LN2
    a = np.conj(G) * aux.u[:, None]
    # sum_k coef_k |u_k|^2 g_k^H g_k
    scaled = np.sqrt(coef)[:, None] * np.abs(aux.u)[:, None] * G
    A_hat = scaled.conj().T @ scaled
    A_hat = 0.5 * (A_hat + A_hat.conj().T)
    return Quadratics(A_hat=A_hat, a=a, rhs=coef[:, None] * a)


class DualFunction:
    """Evaluates ``w(mu)`` and ``P(mu)`` through one eigendecomposition of ``A_hat``."""

    def __init__(self, quad: Quadratics):
        lam, U = np.linalg.eigh(quad.A_hat)
        lam = np.clip(lam, 0.0, None)
        self.lam = lam
        self.U = U
        self.cutoff = _EIG_RCUTOFF * (lam.max() if lam.size else 0.0)
        # coordinates of each rhs in the eigenbasis, N_t x K
        self.c = U.conj().T @ quad.rhs.T

    def _inv(self, mu: float) -> np.ndarray:
        if mu > 0:
            return 1.0 / (self.lam + mu)
        keep = self.lam > self.cutoff
        out = np.zeros_like(self.lam)
        out[keep] = 1.0 / self.lam[keep]
        return out

    def w(self, mu: float) -> np.ndarray:
        """Beamformers as a ``K x N_t`` array."""
        return (self.U @ (self._inv(mu)[:, None] * self.c)).T

    def power(self, mu: float) -> float:
        return float(np.sum(self._inv(mu)[:, None] ** 2 * np.abs(self.c) ** 2))


def w_opt(mu: float, quad: Quadratics) -> np.ndarray:
    return DualFunction(quad).w(mu)


def total_power(mu: float, quad: Quadratics) -> float:
    return DualFunction(quad).power(mu)


@dataclass(frozen=True)
class ActiveResult:
    w: np.ndarray
    mu: float
    power: float
    iterations: int


def solve_active(quad: Quadratics, p_max: float, eps: float = 1e-10) -> ActiveResult:
    """Optimal beamformers under ``sum ||w_k||^2 <= p_max``.

    ``eps`` bounds the final bracket width relative to its upper end.
    """
    if eps <= 0:
        raise ValueError("tolerance must be positive")
    dual = DualFunction(quad)
    K, nt = quad.rhs.shape
    if p_max <= 0:
        return ActiveResult(np.zeros((K, nt), dtype=complex), 0.0, 0.0, 0)

    p0 = dual.power(0.0)
    if p0 <= p_max:
        return ActiveResult(dual.w(0.0), 0.0, p0, 0)

    lo, hi = 0.0, 1.0
    doublings = 0
    while dual.power(hi) >= p_max:
        hi *= 2
        doublings += 1
        if doublings > _MAX_DOUBLINGS:
            raise BracketError(f"P(mu) still above budget at mu={hi:g}")

    it = 0
    while hi - lo > eps * hi and it < _MAX_BISECTIONS:
        mid = 0.5 * (lo + hi)
        if dual.power(mid) >= p_max:
            lo = mid
        else:
            hi = mid
        it += 1
    # the upper end of the bracket is always feasible
    return ActiveResult(dual.w(hi), hi, dual.power(hi), it)


def lagrangian_gradient(w, mu: float, quad: Quadratics) -> np.ndarray:
    """Rows: ``2 A_hat w_j - 2 rhs_j + 2 mu w_j``."""
    return 2 * (w @ quad.A_hat.T) - 2 * quad.rhs + 2 * mu * w
