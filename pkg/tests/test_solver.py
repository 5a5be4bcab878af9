import math

import numpy as np
import pytest

from fdris.channel import realize_channels
from fdris.rates import Problem
from fdris.solver import (
    SolverError,
    SolverOptions,
    initial_state,
    solve,
    solve_conventional,
    solve_scheme,
    solve_zf,
    waterfill,
    zf_directions,
)

from instances import random_config

FAST = SolverOptions(max_iter=15)


def small_config(seed=0, **kw):
    rng = np.random.default_rng(seed)
    return random_config(rng, K=3, n_tx=4, R=1, S=2, M=2, N=2, p_max=0.1, seed=seed, **kw)


class TestZeroForcing:
    def test_nulls_interference(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            K = int(rng.integers(1, 5))
            nt = int(rng.integers(K, 9))
            Z = rng.standard_normal((K, nt)) + 1j * rng.standard_normal((K, nt))
            D = zf_directions(Z)
            S = np.abs(Z @ D.T)
            norms = np.outer(np.linalg.norm(Z, axis=1), np.linalg.norm(D, axis=1))
            off = ~np.eye(K, dtype=bool)
            assert np.all(S[off] <= 1e-9 * norms[off])

    def test_orthogonal_channels_give_matched_filter(self):
        Z = np.array([[1.0, 0, 0], [0, 2j, 0]])
        D = zf_directions(Z)
        for k in range(2):
            expected = Z[k].conj() / np.linalg.norm(Z[k])
            np.testing.assert_allclose(D[k], expected, atol=1e-15)

    def test_too_many_users(self):
        with pytest.raises(ValueError):
            zf_directions(np.ones((3, 2)))

    def test_rank_deficient_warns(self):
        with pytest.warns(RuntimeWarning):
            zf_directions(np.array([[1.0, 1.0], [2.0, 2.0]]))

    def test_waterfill_symmetric(self):
        np.testing.assert_allclose(waterfill([3.0, 3.0], [1.0, 1.0], 2.0), [1.0, 1.0])

    def test_waterfill_kkt(self):
        gains, weights = np.array([10.0, 1.0, 0.05]), np.array([0.3, 0.5, 0.2])
        P = waterfill(gains, weights, 1.0)
        assert P.sum() == pytest.approx(1.0)
        # active users share the marginal utility, inactive ones are below it
        marg = weights * gains / (1 + P * gains)
        active = P > 0
        np.testing.assert_allclose(marg[active], marg[active][0], rtol=1e-8)
        assert np.all(marg[~active] <= marg[active][0] * (1 + 1e-8))

    def test_waterfill_zero_budget(self):
        np.testing.assert_array_equal(waterfill([1.0, 2.0], [1.0, 1.0], 0.0), 0.0)

    def test_zf_solution_is_interference_free(self):
        cfg = small_config(1)
        ch = realize_channels(cfg, cfg.layout())
        state, _ = solve_zf(cfg, ch, FAST)
        G = Problem(cfg, ch).effective(state.phases, state.f)
        S = np.abs(G @ state.w.T)
        off = ~np.eye(cfg.K, dtype=bool)
        scale = np.outer(np.linalg.norm(G, axis=1), np.linalg.norm(state.w, axis=1))
        assert np.all(S[off] <= 1e-9 * scale[off])
        assert state.power == pytest.approx(cfg.p_max)


class TestOrchestrator:
    @pytest.mark.parametrize("seed", range(3))
    def test_monotone_feasible(self, seed):
        cfg = small_config(seed)
        prob = Problem(cfg, realize_channels(cfg, cfg.layout()))
        state, trace = solve(prob, FAST)
        wsr = np.concatenate([[trace.initial_wsr], trace.wsr])
        assert np.all(np.diff(wsr) >= -1e-8)
        assert state.power <= cfg.p_max * (1 + 1e-9)
        assert np.all((state.f >= cfg.f_min) & (state.f <= cfg.f_max))
        assert np.all(state.delays >= 0)
        assert state.objective == pytest.approx(prob.wsr(state))
        assert state.objective == trace.wsr[-1]

    def test_deterministic(self):
        cfg = small_config(2)
        ch = realize_channels(cfg, cfg.layout())
        a, ta = solve(Problem(cfg, ch), FAST)
        b, tb = solve(Problem(cfg, ch), FAST)
        np.testing.assert_array_equal(ta.wsr, tb.wsr)
        np.testing.assert_array_equal(a.w, b.w)

    def test_zero_budget(self):
        cfg = small_config(3, ).replace(p_max=0.0)
        state, trace = solve(Problem(cfg, realize_channels(cfg, cfg.layout())), FAST)
        assert state.objective == 0.0
        np.testing.assert_array_equal(state.w, 0)

    def test_initial_state(self):
        cfg = small_config(4)
        prob = Problem(cfg, realize_channels(cfg, cfg.layout()))
        st_ = initial_state(prob)
        assert st_.power == pytest.approx(cfg.p_max)
        np.testing.assert_array_equal(st_.phases, 1)
        np.testing.assert_allclose(st_.f, np.linspace(cfg.f_min, cfg.f_max, cfg.L))

    def test_conventional_skips_frequencies(self):
        cfg = small_config(5)
        ch = realize_channels(cfg, cfg.layout())
        state, trace = solve_conventional(cfg, ch, FAST)
        assert all(r.freq_iterations == 0 for r in trace.rows)
        np.testing.assert_array_equal(state.f, np.linspace(cfg.f_min, cfg.f_max, cfg.L))
        wsr = np.concatenate([[trace.initial_wsr], trace.wsr])
        assert np.all(np.diff(wsr) >= -1e-8)

    def test_conventional_single_user_coherent_sum(self):
        # one user, one antenna, pure LoS: optimal phases co-phase every element
        rng = np.random.default_rng(6)
        cfg = random_config(rng, K=1, n_tx=1, R=1, S=2, M=2, N=2, rician=math.inf,
                            weights=(1.0,), p_max=1e-4)
        ch = realize_channels(cfg, cfg.layout())
        state, _ = solve_conventional(cfg, ch, SolverOptions(tol=1e-10, max_iter=200))
        amp = cfg.amplitude * np.sum(np.abs(ch.h_ru[0]) * np.abs(ch.H_br[:, 0]))
        bound = math.log2(1 + cfg.p_max * amp ** 2 / cfg.noise_power)
        assert state.objective == pytest.approx(bound, abs=1e-3)

    def test_scheme_dispatch(self):
        cfg = small_config(7)
        ch = realize_channels(cfg, cfg.layout())
        with pytest.raises(ValueError):
            solve_scheme("nope", cfg, ch)
        state, _ = solve_scheme("ris", cfg, ch, SolverOptions(max_iter=2))
        assert state.harmonic == 0

    def test_sub_solver_errors_carry_context(self, monkeypatch):
        cfg = small_config(8)
        prob = Problem(cfg, realize_channels(cfg, cfg.layout()))

        def boom(*a, **k):
            raise FloatingPointError("bad")

        monkeypatch.setattr("fdris.solver.solve_delays", boom)
        with pytest.raises(SolverError, match="delay block failed at outer iteration 1"):
            solve(prob, FAST)
