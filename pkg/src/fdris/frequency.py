"""Modulation-frequency design with the globally convergent method of moving asymptotes.

The frequency subproblem minimizes

    g(f) = sum_k x_k^H D_k x_k - 2 Re(x_k^H d_k) - C,   f_min <= f_l <= f_max,

where ``x_k = conj(theta^k)`` depends on ``f`` through the per-subarray
distance phases.  ``g`` equals minus the weighted MMSE surrogate.

Each outer iteration builds the separable convex model

    g_hat(f) = sum_l p_l / (u_l - f_l) + q_l / (f_l - o_l) + a,

which matches ``g`` in value and gradient at the expansion point, solves it
in closed form inside move limits, and inflates the conservative factor
``rho`` in an inner loop until ``g_hat >= g`` at the candidate.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .array_model import SPEED_OF_LIGHT
from .rates import LN2, MmseAux

log = logging.getLogger(__name__)

ASYMPTOTE_SHRINK = 0.7
ASYMPTOTE_GROW = 1.2
# asymptote distance kept within [0.01, 10] x (f_max - f_min)
ASYMPTOTE_MIN = 0.01
ASYMPTOTE_MAX = 10.0
RHO_FLOOR = 1e-5


@dataclass(frozen=True)
class FreqObjective:
    """Frequency subproblem of one alternation step.

    ``cols[k, j]`` is ``h_rk * theta~ * (H_BR w_j)`` so that
    ``g_k w_j = x_k^H cols[k, j]``; ``D_k = alpha_k |u_k|^2 sum_j cols cols^H``
    and ``d_k = alpha_k conj(u_k) cols[k, k]``.
    """

    cols: np.ndarray
    Dcoef: np.ndarray
    dvec: np.ndarray
    C: float
    problem: object = field(repr=False)

    @property
    def D(self) -> np.ndarray:
        return np.einsum("k,kji,kjm->kim", self.Dcoef, self.cols, self.cols.conj())

    def x(self, f) -> np.ndarray:
        return np.conj(self.problem.user_coefficients(f))

    def value(self, f) -> float:
        return eval_freq_objective(f, self)

    def gradient(self, f) -> np.ndarray:
        return freq_gradient(f, self)


def assemble_freq_objective(problem, w, phases, aux: MmseAux) -> FreqObjective:
    weights = np.asarray(problem.config.weights, dtype=float)
    alpha = weights * aux.W / LN2
    Hw = problem.channels.H_br @ w.T  # I x K
    hk = problem.channels.h_ru * phases[None, :]
    cols = hk[:, None, :] * Hw.T[None, :, :]
    K = len(weights)
    Dcoef = alpha * np.abs(aux.u) ** 2
    dvec = (alpha * np.conj(aux.u))[:, None] * cols[np.arange(K), np.arange(K)]
    C = -float(np.sum(weights * (aux.W * (1 + np.abs(aux.u) ** 2 * problem.noise)
                                 - np.log(aux.W) - 1) / LN2))
    return FreqObjective(cols=cols, Dcoef=Dcoef, dvec=dvec, C=C, problem=problem)


def _residual(x, obj: FreqObjective):
    # (D_k x_k - d_k) for every k, using the low-rank form of D_k
    proj = np.einsum("kji,ki->kj", obj.cols.conj(), x)  # cols^H x
    Dx = obj.Dcoef[:, None] * np.einsum("kji,kj->ki", obj.cols, proj)
    quad = obj.Dcoef * np.sum(np.abs(proj) ** 2, axis=1)
    return Dx - obj.dvec, quad


def eval_freq_objective(f, obj: FreqObjective) -> float:
    x = obj.x(f)
    proj = np.einsum("kji,ki->kj", obj.cols.conj(), x)
    quad = obj.Dcoef * np.sum(np.abs(proj) ** 2, axis=1)
    lin = np.real(np.einsum("ki,ki->k", x.conj(), obj.dvec))
    return float(np.sum(quad - 2 * lin) - obj.C)


def freq_gradient(f, obj: FreqObjective, t_snap: float = 0.0) -> np.ndarray:
    """Partial derivatives of the frequency objective w.r.t. each ``f_l``."""
    problem = obj.problem
    x = obj.x(f)
    g = problem.harmonic
    if g == 0:
        return np.zeros(problem.layout.L)
    # d x_{k,v} / d f_l(v) = j 2 pi g (d_v / c - t) x_{k,v}
    dx = 1j * 2 * np.pi * g * (problem.user_distances / SPEED_OF_LIGHT - t_snap) * x
    r, _ = _residual(x, obj)
    per_elem = 2 * np.real(np.conj(dx) * r).sum(axis=0)
    return np.bincount(problem.layout.subarray, weights=per_elem, minlength=problem.layout.L)


@dataclass
class MmaSubproblem:
    """Separable convex model around ``f0`` with move limits ``[lo, hi]``."""

    f0: np.ndarray
    p: np.ndarray
    q: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    a: float
    lo: np.ndarray
    hi: np.ndarray
    rho: float

    g0: float = float("nan")

    def value(self, f) -> float:
        # increment form; p/(u-f) and a are individually huge once rho grows
        f = np.asarray(f, dtype=float)
        step = f - self.f0
        inc = (self.p * step / ((self.upper - f) * (self.upper - self.f0))
               - self.q * step / ((f - self.lower) * (self.f0 - self.lower)))
        return float(self.g0 + np.sum(inc))

    def raw_value(self, f) -> float:
        f = np.asarray(f, dtype=float)
        return float(np.sum(self.p / (self.upper - f) + self.q / (f - self.lower)) + self.a)

    def gradient(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        return self.p / (self.upper - f) ** 2 - self.q / (f - self.lower) ** 2


def asymptotes(f_hist, prev_bounds, f_min, f_max, z):
    """Moving asymptotes for outer iteration ``z`` (1-based).

    ``f_hist`` lists previous iterates newest last; ``prev_bounds`` is the
    ``(lower, upper)`` pair of the previous iteration.
    """
    span = f_max - f_min
    f = f_hist[-1]
    if z <= 2 or len(f_hist) < 3:
        return f - span, f + span
    f1, f2, f3 = f_hist[-1], f_hist[-2], f_hist[-3]
    trend = (f1 - f2) * (f2 - f3)
    gamma = np.where(trend < 0, ASYMPTOTE_SHRINK, np.where(trend > 0, ASYMPTOTE_GROW, 1.0))
    low_prev, upp_prev = prev_bounds
    lower = f1 - gamma * (f2 - low_prev)
    upper = f1 + gamma * (upp_prev - f2)
    lower = np.clip(lower, f1 - ASYMPTOTE_MAX * span, f1 - ASYMPTOTE_MIN * span)
    upper = np.clip(upper, f1 + ASYMPTOTE_MIN * span, f1 + ASYMPTOTE_MAX * span)
    return lower, upper


def initial_rho(grad, f_min, f_max) -> float:
    L = len(grad)
    return float(np.sum(np.abs(grad)) * (f_max - f_min) / (10 * L))


def next_rho(rho, delta, sub: MmaSubproblem, cand, span) -> float:
    """Inflated conservative factor after a non-conservative candidate.

    ``delta`` is scaled by the model's sensitivity to ``rho`` at ``cand`` so
    the growth does not depend on the units of ``f``.
    """
    step = cand - sub.f0
    d = float(np.sum((sub.upper - sub.lower) * step ** 2
                     / ((sub.upper - cand) * (cand - sub.lower) * span)))
    if d <= 0:
        return 10 * rho
    return min(1.1 * (rho + delta / d), 10 * rho)


def build_mma(f0, g0, grad, lower, upper, rho, f_min, f_max) -> MmaSubproblem:
    """Model with value ``g0`` and gradient ``grad`` at ``f0``."""
    span = f_max - f_min
    gp = np.maximum(grad, 0.0)
    gm = np.maximum(-grad, 0.0)
    base = rho / span
    p = (upper - f0) ** 2 * (base + 1.001 * gp + 0.001 * gm)
    q = (f0 - lower) ** 2 * (base + 0.001 * gp + 1.001 * gm)
    a = g0 - float(np.sum(p / (upper - f0) + q / (f0 - lower)))
    lo = np.maximum.reduce([np.full_like(f0, f_min), lower + 0.1 * (f0 - lower), f0 - 0.5 * span])
    hi = np.minimum.reduce([np.full_like(f0, f_max), upper - 0.1 * (upper - f0), f0 + 0.5 * span])
    return MmaSubproblem(f0=f0, p=p, q=q, upper=upper, lower=lower, a=a, lo=lo, hi=hi, rho=rho,
                         g0=g0)


def solve_mma(sub: MmaSubproblem) -> np.ndarray:
    """Exact box-constrained minimizer of the separable model."""
    p, q = sub.p, sub.q
    flat = (p <= 0) & (q <= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt(q / p)
        f = np.where(np.isinf(r), sub.hi, (sub.upper * r + sub.lower) / (1 + r))
    f = np.where(p <= 0, sub.hi, f)
    f = np.where(q <= 0, sub.lo, f)
    f = np.clip(f, sub.lo, sub.hi)
    return np.where(flat, sub.f0, f)


@dataclass
class GcmmaResult:
    f: np.ndarray
    value: float
    outer_iterations: int
    inner_iterations: int
    history: list
    models: list = field(default_factory=list, repr=False)


def gcmma(obj: FreqObjective, f0, f_min, f_max, tol: float = 1e-6, max_outer: int = 100,
          max_inner: int = 20, keep_models: bool = False) -> GcmmaResult:
    """Minimize the frequency objective over the box from ``f0``.

    ``tol`` is relative: outer iterations stop once the objective changes by
    at most ``tol * max(1, |g|)``.
    """
    f = np.clip(np.asarray(f0, dtype=float), f_min, f_max)
    gval = obj.value(f)
    history = [gval]
    models = []
    if f_max <= f_min or obj.problem.harmonic == 0:
        return GcmmaResult(f, gval, 1 if f_max > f_min else 0, 0, history)

    f_hist = [f]
    bounds = None
    inner_total = 0
    z = 0
    while z < max_outer:
        z += 1
        grad = obj.gradient(f)
        lower, upper = asymptotes(f_hist, bounds, f_min, f_max, z)
        bounds = (lower, upper)
        rho = max(initial_rho(grad, f_min, f_max), RHO_FLOOR * max(abs(gval), 1e-300))
        sub = build_mma(f, gval, grad, lower, upper, rho, f_min, f_max)
        cand = solve_mma(sub)
        cval = obj.value(cand)
        slack = 1e-12 * max(abs(gval), 1e-300)
        inner = 0
        while sub.value(cand) < cval - slack:
            if inner >= max_inner:
                break
            delta = cval - sub.value(cand)
            rho = next_rho(rho, delta, sub, cand, f_max - f_min)
            sub = build_mma(f, gval, grad, lower, upper, rho, f_min, f_max)
            cand = solve_mma(sub)
            cval = obj.value(cand)
            inner += 1
        inner_total += inner
        if sub.value(cand) < cval - slack:
            if cval > gval:
                warnings.warn("GCMMA inner loop cap reached without descent; keeping iterate",
                              RuntimeWarning, stacklevel=2)
                break
            log.warning("GCMMA inner loop cap reached; accepting descending iterate")
        if keep_models:
            models.append((sub, cand, cval))
        change = abs(cval - gval)
        f, gval = cand, cval
        f_hist.append(f)
        history.append(gval)
        if change <= tol * max(1.0, abs(gval)):
            break
    return GcmmaResult(f, gval, z, inner_total, history, models)
