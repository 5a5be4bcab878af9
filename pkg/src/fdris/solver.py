"""Alternating optimization of beamformers, delay phases and modulation frequencies.

Each outer iteration refreshes the MMSE variables before every block:
beamformers (dual bisection), delay phases (Riemannian CG) and modulation
frequencies (GCMMA).  Every block ascends the surrogate, which is tight at
its entry point, so the true weighted sum rate never decreases.

Baselines: a conventional surface (no frequency diversity, phases still
optimized) and zero-forcing beamforming with water-filled power.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .active import assemble_quadratics, solve_active
from .delay import assemble_delay_quadratic, solve_delays
from .frequency import assemble_freq_objective, gcmma
from .rates import Problem, SolutionState, surrogate_wsr

log = logging.getLogger(__name__)

SCHEMES = ("fdris", "ris", "zf")


class SolverError(RuntimeError):
    """A sub-solver failed; the message carries the outer iteration."""


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-4
    max_iter: int = 200
    active_tol: float = 1e-10
    delay_tol: float = 1e-8
    delay_max_iter: int = 500
    freq_tol: float = 1e-6
    freq_max_iter: int = 100
    freq_max_inner: int = 20


@dataclass
class TraceRow:
    iteration: int
    wsr: float
    surrogate: float
    rates: np.ndarray
    mu: float
    delay_iterations: int
    freq_iterations: int
    wall_time: float


@dataclass
class SolveTrace:
    initial_wsr: float
    rows: list = field(default_factory=list)

    @property
    def wsr(self) -> np.ndarray:
        return np.array([r.wsr for r in self.rows])

    def __len__(self):
        return len(self.rows)


def initial_state(problem: Problem) -> SolutionState:
    """Matched-filter beams at full power, zero delays, evenly spread frequencies."""
    cfg = problem.config
    L, I = problem.layout.L, problem.layout.I
    f = np.linspace(cfg.f_min, cfg.f_max, L) if L > 1 else np.array([cfg.f_min])
    phases = np.ones(I, dtype=complex)
    G = problem.effective(phases, f)
    w = np.conj(G)
    norm = np.linalg.norm(w)
    if norm > 0 and cfg.p_max > 0:
        w = w * np.sqrt(cfg.p_max) / norm
    else:
        w = np.zeros_like(w)
    state = SolutionState(w=w, phases=phases, f=f, delays=np.zeros(I), harmonic=problem.harmonic)
    state.objective = problem.wsr(state)
    return state


def _active_step(problem, state, opts):
    G = problem.effective(state.phases, state.f)
    aux = problem.aux(state)
    quad = assemble_quadratics(G, aux, problem.weights)
    res = solve_active(quad, problem.config.p_max, opts.active_tol)
    before = surrogate_wsr(G, state.w, problem.noise, aux, problem.weights)
    after = surrogate_wsr(G, res.w, problem.noise, aux, problem.weights)
    if after >= before:
        state.w = res.w
    return res.mu


def _delay_step(problem, state, opts):
    aux = problem.aux(state)
    Q = assemble_delay_quadratic(problem, state.w, state.f, aux)
    x0 = np.conj(state.phases)
    res = solve_delays(Q, x0, opts.delay_tol, opts.delay_max_iter)
    if res.value >= Q.value(x0):
        state.phases = np.conj(res.x)
    return res.iterations


def _freq_step(problem, state, opts):
    cfg = problem.config
    if problem.conventional or cfg.f_max <= cfg.f_min:
        return 0
    aux = problem.aux(state)
    obj = assemble_freq_objective(problem, state.w, state.phases, aux)
    g0 = obj.value(state.f)
    res = gcmma(obj, state.f, cfg.f_min, cfg.f_max, opts.freq_tol, opts.freq_max_iter,
                opts.freq_max_inner)
    if res.value <= g0:
        state.f = res.f
    return res.outer_iterations


def _finish(problem, state):
    state.delays = problem.delays_for(state.phases, state.f)
    state.aux = problem.aux(state)
    state.objective = problem.wsr(state)


def solve(problem: Problem, opts: SolverOptions | None = None,
          state: SolutionState | None = None, zero_forcing: bool = False):
    """Run the alternating algorithm; returns ``(state, trace)``.

    With ``zero_forcing=True`` the beamformer block is replaced by ZF with
    water-filled power and the best iterate is kept.
    """
    opts = opts or SolverOptions()
    state = initial_state(problem) if state is None else state.copy()
    wsr = problem.wsr(state)
    trace = SolveTrace(initial_wsr=wsr)
    # the matched-filter start is not a ZF point, so ZF only ranks its own iterates
    best = (-np.inf, None) if zero_forcing else (wsr, state.copy())
    t0 = time.perf_counter()
    for q in range(1, opts.max_iter + 1):
        stage = "active"
        try:
            if zero_forcing:
                state.w = zf_beamformers(problem, state)
                mu = float("nan")
            else:
                mu = _active_step(problem, state, opts)
            stage = "delay"
            n_delay = _delay_step(problem, state, opts)
            stage = "frequency"
            n_freq = _freq_step(problem, state, opts)
            if zero_forcing:
                state.w = zf_beamformers(problem, state)
        except Exception as exc:  # noqa: BLE001
            raise SolverError(f"{stage} block failed at outer iteration {q}: {exc}") from exc
        aux = problem.aux(state)
        new = problem.wsr(state)
        G = problem.effective(state.phases, state.f)
        trace.rows.append(TraceRow(
            iteration=q, wsr=new,
            surrogate=surrogate_wsr(G, state.w, problem.noise, aux, problem.weights),
            rates=problem.rates(state), mu=mu, delay_iterations=n_delay,
            freq_iterations=n_freq, wall_time=time.perf_counter() - t0,
        ))
        if new > best[0]:
            best = (new, state.copy())
        if abs(new - wsr) <= opts.tol:
            wsr = new
            break
        wsr = new
    final = best[1] if zero_forcing else state
    _finish(problem, final)
    return final, trace


def solve_conventional(config, channels, opts: SolverOptions | None = None):
    """Same alternation on a conventional surface (no distance-dependent phases)."""
    return solve(Problem(config, channels, harmonic=0), opts)


def waterfill(gains, weights, p_total: float) -> np.ndarray:
    """Maximize ``sum w_k log2(1 + P_k gains_k)`` s.t. ``sum P_k = p_total``.

    ``P_k = max(0, w_k nu - 1/gains_k)`` with the level ``nu`` found by
    bisection.
    """
    gains = np.asarray(gains, dtype=float)
    weights = np.asarray(weights, dtype=float)
    active = (gains > 0) & (weights > 0)
    P = np.zeros_like(gains)
    if p_total <= 0 or not active.any():
        return P
    g, w = gains[active], weights[active]

    def alloc(nu):
        return np.maximum(0.0, w * nu - 1.0 / g)

    lo, hi = 0.0, (p_total + np.sum(1.0 / g)) / w.min()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if alloc(mid).sum() > p_total:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    p = alloc(lo)
    # hand the bisection residue to the active users proportionally
    if p.sum() > 0:
        p *= p_total / p.sum()
    P[active] = p
    return P


def zf_directions(Z) -> np.ndarray:
    """Unit-norm ZF directions as rows (``K x N_t``)."""
    K, nt = Z.shape
    if K > nt:
        raise ValueError(f"zero-forcing needs K <= N_t, got K={K}, N_t={nt}")
    s = np.linalg.svd(Z, compute_uv=False)
    if s.size == 0 or s[-1] <= 1e-10 * s[0]:
        warnings.warn("effective channels are rank deficient; using a regularized pseudo-inverse",
                      RuntimeWarning, stacklevel=2)
        Wt = np.linalg.pinv(Z, rcond=1e-10)
    else:
        Wt = Z.conj().T @ np.linalg.inv(Z @ Z.conj().T)
    norms = np.linalg.norm(Wt, axis=0)
    norms[norms == 0] = 1.0
    return (Wt / norms).T


def zf_beamformers(problem: Problem, state: SolutionState) -> np.ndarray:
    Z = problem.effective(state.phases, state.f)
    D = zf_directions(Z)
    gains = np.abs(np.sum(Z * D, axis=1)) ** 2 / problem.noise
    P = waterfill(gains, problem.weights, problem.config.p_max)
    return np.sqrt(P)[:, None] * D


def solve_zf(config, channels, opts: SolverOptions | None = None):
    """ZF beamforming with water-filling, alternating with the passive blocks."""
    return solve(Problem(config, channels), opts, zero_forcing=True)


def solve_scheme(scheme: str, config, channels, opts: SolverOptions | None = None):
    if scheme == "fdris":
        return solve(Problem(config, channels), opts)
    if scheme == "ris":
        return solve_conventional(config, channels, opts)
    if scheme == "zf":
        return solve_zf(config, channels, opts)
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
