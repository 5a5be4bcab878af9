"""Time-delay phase design by Riemannian conjugate gradient on the complex circle.

For fixed beamformers, frequencies and MMSE variables the weighted
surrogate is a quadratic in ``x = conj(theta~)``:

    f(x) = -x^H B x + 2 Re(x^H b) + C,   |x_i| = 1.

The solver ascends ``f`` over the product of I unit circles with
Polak-Ribiere directions (PR+ restarts), projection-based vector transport,
Armijo backtracking and entrywise normalization as the retraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rates import LN2, MmseAux

ARMIJO_C = 1e-4
ARMIJO_SHRINK = 0.5
ARMIJO_MAX_BACKTRACKS = 50


@dataclass(frozen=True)
class QuadraticForm:
    B: np.ndarray
    b: np.ndarray
    C: float

    def value(self, x) -> float:
        return float(-np.real(np.vdot(x, self.B @ x)) + 2 * np.real(np.vdot(x, self.b)) + self.C)

    def scale(self) -> float:
        return float(np.linalg.norm(self.B, 2) + np.linalg.norm(self.b))


def assemble_delay_quadratic(problem, w, f, aux: MmseAux) -> QuadraticForm:
    """Quadratic in ``conj(theta~)`` equal to the weighted surrogate."""
    cfg = problem.config
    weights = np.asarray(cfg.weights, dtype=float)
    alpha = weights * aux.W / LN2
    # V[k, j, :] = h_rk * theta^k * (H w_j), so g_k w_j = x^H V[k, j]
    Hw = problem.channels.H_br @ w.T  # I x K
    hk = problem.channels.h_ru * problem.user_coefficients(f)  # K x I
    V = hk[:, None, :] * Hw.T[None, :, :]
    coef = alpha * np.abs(aux.u) ** 2
    Vs = np.sqrt(coef)[:, None, None] * V
    flat = Vs.reshape(-1, Vs.shape[-1])
    B = flat.T @ flat.conj()
    B = 0.5 * (B + B.conj().T)
    K = len(weights)
    b = np.einsum("k,ki->i", alpha * np.conj(aux.u), V[np.arange(K), np.arange(K)])
    C = -float(np.sum(weights * (aux.W * (1 + np.abs(aux.u) ** 2 * problem.noise)
                                 - np.log(aux.W) - 1) / LN2))
    return QuadraticForm(B=B, b=b, C=C)


def euclidean_grad(x, Q: QuadraticForm) -> np.ndarray:
    return -2 * (Q.B @ x) + 2 * Q.b


def project(x, v) -> np.ndarray:
    """Orthogonal projection of ``v`` onto the tangent space at ``x``."""
    return v - np.real(v * np.conj(x)) * x


def riemannian_grad(x, egrad) -> np.ndarray:
    return project(x, egrad)


def inner(u, v) -> float:
    return float(np.real(np.vdot(u, v)))


def polak_ribiere(grad, grad_prev_t, dir_prev_t, grad_prev_norm2):
    """PR+ coefficient and new search direction.

    ``grad_prev_t`` and ``dir_prev_t`` must already be transported to the
    current tangent space.  Falls back to steepest ascent when the
    coefficient is negative or the direction stops being an ascent one.
    """
    if grad_prev_norm2 <= 0:
        return 0.0, grad
    beta = inner(grad, grad - grad_prev_t) / grad_prev_norm2
    beta = max(beta, 0.0)
    direction = grad + beta * dir_prev_t
    if inner(direction, grad) <= 0:
        return 0.0, grad
    return beta, direction


def retract(x, prev=None) -> np.ndarray:
    mag = np.abs(x)
    out = np.empty_like(x)
    ok = mag >= 1e-300
    out[ok] = x[ok] / mag[ok]
    if prev is None:
        out[~ok] = 1.0
    else:
        out[~ok] = prev[~ok]
    return out


def initial_step(Q: QuadraticForm, direction, slope) -> float:
    """Maximizer of the objective along the straight line ``x + t d``.

    Falls back to a unit-length move when the curvature along ``d`` vanishes.
    """
    curv = float(np.real(np.vdot(direction, Q.B @ direction)))
    unit = 1.0 / np.linalg.norm(direction)
    if curv <= 0:
        return unit
    return min(slope / (2 * curv), unit)


@dataclass
class DelayResult:
    x: np.ndarray
    value: float
    iterations: int
    grad_norm: float
    history: list


def _value_with(Q: QuadraticForm, x, Bx) -> float:
    return float(-np.real(np.vdot(x, Bx)) + 2 * np.real(np.vdot(x, Q.b)) + Q.C)


def solve_delays(Q: QuadraticForm, x0, tol: float = 1e-8, max_iter: int = 500) -> DelayResult:
    """Maximize ``Q`` over unit-modulus vectors starting from ``x0``.

    Stops once an iteration changes the objective by at most ``tol`` and the
    Riemannian gradient norm is within ``10 tol`` of the problem scale, or when
    the line search cannot make progress.
    """
    x = retract(np.asarray(x0, dtype=complex))
    Bx = Q.B @ x
    fx = _value_with(Q, x, Bx)
    grad = project(x, 2 * (Q.b - Bx))
    gnorm2 = inner(grad, grad)
    direction = grad
    scale = max(Q.scale(), 1e-300)
    history = [fx]
    it = 0
    while it < max_iter:
        if np.sqrt(gnorm2) <= 10 * tol * scale:
            break
        slope = inner(grad, direction)
        if slope <= 0:
            direction, slope = grad, gnorm2
        eta = initial_step(Q, direction, slope)
        for _ in range(ARMIJO_MAX_BACKTRACKS):
            x_new = retract(x + eta * direction, x)
            Bx_new = Q.B @ x_new
            f_new = _value_with(Q, x_new, Bx_new)
            if f_new >= fx + ARMIJO_C * eta * slope:
                break
            eta *= ARMIJO_SHRINK
        else:
            break
        it += 1
        grad_new = project(x_new, 2 * (Q.b - Bx_new))
        _, direction = polak_ribiere(grad_new, project(x_new, grad),
                                     project(x_new, direction), gnorm2)
        delta = abs(f_new - fx)
        x, fx, grad = x_new, f_new, grad_new
        gnorm2 = inner(grad, grad)
        history.append(fx)
        if delta <= tol and np.sqrt(gnorm2) <= 10 * tol * scale:
            break
    return DelayResult(x=x, value=fx, iterations=it, grad_norm=float(np.sqrt(gnorm2)),
                       history=history)
