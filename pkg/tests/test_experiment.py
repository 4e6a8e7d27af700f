import math

import numpy as np
import pytest

from mea_sim.config import ExperimentConfig
from mea_sim.errors import BinInfeasible, InvalidArgument
from mea_sim.experiment import (
    RATE, SELECTION, SERVED, TTEST, crossover_misalignment, drop_served, exp_ttest_rounds,
    generate_drop, max_pair_distance, rate_bin_index, run_experiments, setup_for, target_gamma,
)
from mea_sim.geometry import in_sector, sample_points_in_sector
from mea_sim.network import gamma_hs, gamma_hs_batch

SMALL = ExperimentConfig(n_drops=4, rounds_grid=(1, 2, 5), stability_resamples=5, max_rounds=20,
                         misalignments_deg=(0.0, 45.0, 180.0))


def test_drop_deterministic():
    a = generate_drop(SMALL, 2, 3)
    b = generate_drop(SMALL, 2, 3)
    assert a.scene.scbs_position == b.scene.scbs_position
    assert a.scene.hotspot == b.scene.hotspot
    np.testing.assert_array_equal(a.scene.ues.positions, b.scene.ues.positions)
    assert (a.gamma_hs_db, a.install_offset_deg, a.tries) == (b.gamma_hs_db, b.install_offset_deg, b.tries)
    c = generate_drop(SMALL, 2, 4)
    assert c.scene.scbs_position != a.scene.scbs_position


@pytest.mark.parametrize("bin_index", range(5))
def test_drop_meets_bin(bin_index):
    cfg = SMALL
    d = generate_drop(cfg, bin_index, 0)
    assert abs(d.gamma_hs_db - cfg.gamma_bins_db[bin_index]) <= cfg.gamma_tol_db
    assert gamma_hs(d.scene) == pytest.approx(d.gamma_hs_db, abs=1e-9)
    pts = np.array([d.scene.scbs_position, d.scene.hotspot.center])
    assert in_sector(setup_for(cfg).layout, cfg.selected_sector, pts).all()
    assert d.scene.scbs_position.distance_to(d.scene.hotspot.center) >= 10.0
    assert 0.0 <= d.install_offset_deg < 90.0
    assert len(d.scene.ues) == cfg.n_ues


def test_realized_gamma_centred_in_bin():
    cfg = ExperimentConfig(n_drops=60)
    for bi, target in enumerate(cfg.gamma_bins_db):
        g = [generate_drop(cfg, bi, i).gamma_hs_db for i in range(60)]
        assert abs(np.mean(g) - target) <= 0.2


def test_pair_distance_bound_holds():
    # no independently drawn pair beyond the bound lands in the bin
    cfg = ExperimentConfig()
    s = setup_for(cfg)
    rng = np.random.default_rng(0)
    a = sample_points_in_sector(s.layout, 0, rng, 20000)
    b = sample_points_in_sector(s.layout, 0, rng, 20000)
    d = np.hypot(*(a - b).T)
    far = d >= 10.0
    g = gamma_hs_batch(s.macros, a[far], b[far], cfg.scbs_tx_power_dbm, s.scbs_pathloss, s.oda,
                       s.noise_dbm)
    for target in cfg.gamma_bins_db:
        hit = np.abs(g - target) <= cfg.gamma_tol_db
        assert np.all(d[far][hit] <= max_pair_distance(cfg, target))


def test_fixed_offset_and_infeasible_bin():
    d = generate_drop(SMALL.replace(install_offset_deg=45.0), 0, 0)
    assert d.install_offset_deg == 45.0
    cfg = SMALL.replace(gamma_bins_db=(60.0,), max_placement_tries=2000)
    with pytest.raises(BinInfeasible) as err:
        generate_drop(cfg, 0, 0)
    assert "60" in str(err.value)


def test_target_gamma_extra_bin():
    cfg = SMALL.replace(gamma_bins_db=(-3.0, 3.0))
    assert rate_bin_index(cfg) == 2
    assert target_gamma(cfg, 2) == 0.0
    assert rate_bin_index(SMALL) == 2
    with pytest.raises(InvalidArgument):
        target_gamma(cfg, 3)


def test_crossover_interpolation():
    assert crossover_misalignment([0, 20, 40], [10, 9, 7], 8) == pytest.approx(30.0)
    assert crossover_misalignment([0, 20], [7, 6], 8) == 0.0
    assert crossover_misalignment([0, 20], [10, 9], 8) is None


def test_served_keys_semantics():
    d = generate_drop(SMALL, 2, 1)
    out = drop_served(SMALL, d)
    s = setup_for(SMALL)
    assert out[("fixed", "single", 0.0)] == d.scene.served(s.single.pointed(d.scene.hotspot_bearing_deg))
    assert out[("mea", "single", None)] == max(d.scene.served(p) for p in d.mea(s.single).elements)
    assert out[("oda", "omni", None)] == d.scene.served(s.oda)


def test_alpha_monotone_on_same_seeds():
    cfg = ExperimentConfig(n_drops=15, gamma_bins_db=(0.0,))
    loose = exp_ttest_rounds(cfg.replace(alpha=0.5)).tables[0].rows[0]
    strict = exp_ttest_rounds(cfg).tables[0].rows[0]
    assert loose[1] < strict[1]


def test_small_run_shapes():
    res = run_experiments(SMALL)
    assert set(res.records) == {SELECTION, TTEST, SERVED, RATE}
    sel = res.records[SELECTION].tables[0]
    assert len(sel.rows) == 5 * 3
    assert all(0.0 <= r[3] <= 1.0 for r in sel.rows)
    served = res.records[SERVED].tables[0]
    assert len(served.rows) == 5 * (3 + 2 * 3)
    totals = {(r[0], r[1]): r for r in res.records[RATE].tables[1].rows}
    assert totals[("oda", "omni")][3] == 0.0
    assert set(res.placement) == {"-5", "-2", "0", "2", "5"}
    assert res.records[SELECTION].extra["single_round_sufficiency"]["n_placements"] == 20


def test_workers_do_not_change_results():
    cfg = SMALL.replace(gamma_bins_db=(0.0,))
    a = run_experiments(cfg, (SERVED,), workers=1).records[SERVED].tables[0].rows
    b = run_experiments(cfg, (SERVED,), workers=2).records[SERVED].tables[0].rows
    assert a == b


def test_unknown_experiment():
    with pytest.raises(InvalidArgument):
        run_experiments(SMALL, ("bogus",))
