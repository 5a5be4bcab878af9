import json
import math

import numpy as np
import pytest

from fdris.array_model import PolarPosition, steering_br, steering_ru, theta_k
from fdris.channel import path_loss
from fdris.config import paper_preset
from fdris.pattern import DB_FLOOR, GridSpec, PatternGrid, compute_pattern, received_energy, to_db
from fdris.rates import SolutionState

from instances import random_config


def state_for(cfg, phases=None, w=None, f=None):
    lay = cfg.layout()
    if phases is None:
        phases = np.exp(1j * np.random.default_rng(0).uniform(-math.pi, math.pi, lay.I))
    if w is None:
        w = np.ones((cfg.K, cfg.n_tx), complex) / math.sqrt(cfg.K * cfg.n_tx)
    if f is None:
        f = np.linspace(cfg.f_min, cfg.f_max, lay.L)
    return SolutionState(w=w, phases=phases, f=f, delays=np.zeros(lay.I), harmonic=cfg.harmonic)


def link_gain(cfg, distance):
    ref = cfg.path_loss.resolved_gain(cfg.wavelength)
    return (path_loss(distance, ref, cfg.path_loss.alpha_ru)
            * path_loss(cfg.bs.distance, ref, cfg.path_loss.alpha_br)) ** 2


class TestEnergy:
    def test_single_element(self):
        rng = np.random.default_rng(0)
        cfg = random_config(rng, K=1, n_tx=1, R=1, S=1, M=1, N=1, weights=(1.0,), amplitude=0.8)
        st_ = state_for(cfg, phases=np.exp([0.3j]), w=np.ones((1, 1), complex))
        pos = PolarPosition.from_degrees(33.0, 90, 40)
        assert received_energy(pos, st_, cfg) == pytest.approx(0.64 * link_gain(cfg, 33.0), rel=1e-12)

    def test_coherent_phases_reach_the_bound(self):
        cfg = paper_preset()
        lay = cfg.layout()
        pos = PolarPosition.from_degrees(60.0, 90, 45)
        f = np.linspace(cfg.f_min, cfg.f_max, lay.L)
        a_r, a_b = steering_br(lay, cfg.bs, cfg.n_tx)
        elem = a_r * theta_k(cfg.harmonic, f, lay, pos) * steering_ru(lay, pos)
        st_ = state_for(cfg, phases=np.conj(elem) / np.abs(elem), f=f)
        beam = float(np.sum(np.abs(st_.w @ a_b) ** 2))
        expected = link_gain(cfg, 60.0) * lay.I ** 2 * beam
        assert received_energy(pos, st_, cfg) == pytest.approx(expected, rel=1e-10)

    def test_grid_matches_pointwise(self):
        cfg = paper_preset()
        st_ = state_for(cfg)
        grid = GridSpec(np.array([30.0, 60.0]), np.radians([20.0, 75.0, 140.0]))
        pg = compute_pattern(st_, cfg, grid)
        for i, d in enumerate(grid.distances):
            for j, a in enumerate(grid.angles):
                e = received_energy(PolarPosition(d, grid.azimuth, a), st_, cfg)
                assert pg.linear[i, j] == pytest.approx(e, rel=1e-10)

    def test_snapshot_rotation_is_a_common_phase_for_one_frequency(self):
        cfg = paper_preset().with_subarrays(1)
        st_ = state_for(cfg, f=np.array([5e6]))
        pos = PolarPosition.from_degrees(50.0, 90, 60)
        assert received_energy(pos, st_, cfg, t_snap=3.7e-8) == pytest.approx(
            received_energy(pos, st_, cfg), rel=1e-12)

    def test_zero_harmonic_distance_flat(self):
        cfg = paper_preset()
        st_ = state_for(cfg)
        pg = compute_pattern(st_, cfg, GridSpec.uniform(n_dist=60, n_angle=45), harmonic=0)
        spread = pg.normalized.max(axis=0) - pg.normalized.min(axis=0)
        assert spread.max() < 1e-9

    def test_per_beam_energies_sum(self):
        cfg = paper_preset()
        st_ = state_for(cfg, w=np.random.default_rng(1).standard_normal((4, 10)) + 0j)
        grid = GridSpec.uniform(n_dist=5, n_angle=7)
        total = compute_pattern(st_, cfg, grid).linear
        parts = sum(compute_pattern(st_, cfg, grid, beam=k).linear for k in range(4))
        np.testing.assert_allclose(parts, total, rtol=1e-12)
        assert np.all(total >= 0)


class TestGrid:
    def test_rejects_bad_axes(self):
        with pytest.raises(ValueError):
            GridSpec(np.array([]), np.array([0.1]))
        with pytest.raises(ValueError):
            GridSpec(np.array([2.0, 1.0]), np.array([0.1]))
        with pytest.raises(ValueError):
            GridSpec(np.array([0.0, 1.0]), np.array([0.1]))

    def test_uniform_axes(self):
        g = GridSpec.uniform()
        assert g.distances.size == 200 and g.angles.size == 180
        assert g.distances[0] == 20 and g.distances[-1] == 100
        assert math.degrees(g.angles[30]) == pytest.approx(30)

    def test_local_maxima_and_cells(self):
        d, a = np.linspace(20, 100, 9), np.radians(np.arange(0, 180, 20.0))
        z = np.zeros((9, 9))
        z[2, 3], z[6, 7] = 1.0, 0.5
        z[z == 0] = 0.1
        pg = PatternGrid(d, a, math.pi / 2, z, z, 1e-14)
        peaks = {tuple(p) for p in pg.local_maxima()}
        assert {(2, 3), (6, 7)} <= peaks
        assert pg.cell_of(PolarPosition(41.0, math.pi / 2, math.radians(61))) == (2, 3)

    def test_db_floor(self):
        assert to_db(0.0) == DB_FLOOR
        assert to_db(100.0) == pytest.approx(20.0)


class TestExport:
    def test_csv_and_json(self, tmp_path):
        cfg = paper_preset()
        pg = compute_pattern(state_for(cfg), cfg, GridSpec.uniform(n_dist=4, n_angle=3))
        pg.to_csv(tmp_path / "p.csv")
        lines = (tmp_path / "p.csv").read_text().splitlines()
        assert lines[0].startswith("# distance in m")
        assert lines[1] == "distance,angle,energy_linear,energy_db,normalized_db"
        assert len(lines) == 2 + 12
        first = [float(x) for x in lines[2].split(",")]
        assert first[0] == 20.0 and first[1] == 0.0
        assert first[2] == pytest.approx(pg.linear[0, 0])
        pg.to_json(tmp_path / "p.json")
        data = json.loads((tmp_path / "p.json").read_text())
        np.testing.assert_allclose(data["energy_linear"], pg.linear)
        np.testing.assert_allclose(data["angle_deg"], [0.0, 60.0, 120.0])
        assert max(max(r) for r in data["normalized_db"]) == pytest.approx(0.0)
