import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from conftest import make_scene
from mea_sim.errors import InvalidArgument
from mea_sim.propagation import MeaConfig, double_patch, single_patch
from mea_sim.selection import (
    SelectionCandidate, chosen_from_counts, compare_leader, evaluate_candidates, one_sided_p,
    rounds_to_significance, run_training, select_centralized, select_distributed,
    served_counts, truth_element_by_angle, welch_t,
)

# scipy.stats.ttest_ind([12, 11, 13, 12], [8, 9, 7, 8], equal_var=False), computed once
WELCH_FROZEN_T = 6.92820323027551
WELCH_FROZEN_DF = 6.0


def _cands(s=(0, 0, 0, 0), r=(0, 0, 0, 0)):
    return [SelectionCandidate(i, s[i], r[i]) for i in range(4)]


def test_select_centralized():
    assert select_centralized(_cands(r=(10e6, 12e6, 9e6, 9e6))) == 1
    assert select_centralized(_cands(r=(9, 9, 9, 9))) == 0


def test_select_distributed():
    assert select_distributed(_cands(s=(12, 3, 2, 1))) == 0
    assert select_distributed(_cands(s=(5, 5, 2, 1))) == 0
    assert select_distributed(_cands(s=(1, 2, 9, 3))) == 2
    with pytest.raises(InvalidArgument):
        select_distributed(_cands()[:3])


@pytest.mark.parametrize("bearing,expected", [(100.0, 1), (45.0, 0), (269.0, 3)])
def test_truth_by_angle(bearing, expected):
    scbs = (400.0, 300.0)
    a = math.radians(bearing)
    centre = (scbs[0] + 30 * math.cos(a), scbs[1] + 30 * math.sin(a))
    s = make_scene(isd=1732, scbs=scbs, centre=centre)
    assert truth_element_by_angle(s, MeaConfig(single_patch())) == expected


def test_hotspot_due_east_picks_element_zero():
    scbs = (420.0, 300.0)
    ring = [(445.0 + 8 * math.cos(t), 300.0 + 8 * math.sin(t)) for t in np.linspace(0, 2 * np.pi, 10, endpoint=False)]
    s = make_scene(isd=1732, scbs=scbs, centre=(445.0, 300.0), ues=ring)
    cands = evaluate_candidates(s, MeaConfig(single_patch()))
    counts = [c.s_ue for c in cands]
    assert counts[0] > max(counts[1:])
    assert select_distributed(cands) == 0


def test_served_counts_matches_candidates(scene):
    mea = MeaConfig(single_patch(), 17.0)
    assert list(served_counts(scene, mea)) == [c.s_ue for c in evaluate_candidates(scene, mea)]


def _training_scene():
    return make_scene(isd=1732, scbs=(420.0, 300.0), centre=(445.0, 300.0))


def test_training_k1_equals_single_round():
    s = _training_scene()
    mea = MeaConfig(single_patch())
    rec = run_training(s, mea, 1, np.random.default_rng(3))
    one = served_counts(s.resample_ues(np.random.default_rng(3)), mea)
    assert rec.chosen == select_distributed(_cands(s=one))
    assert rec.rounds == 1


def test_training_prefix_consistent():
    s = _training_scene()
    mea = MeaConfig(single_patch())
    short = run_training(s, mea, 3, np.random.default_rng(9))
    long = run_training(s, mea, 8, np.random.default_rng(9))
    np.testing.assert_array_equal(long.counts[:, :3], short.counts)
    with pytest.raises(InvalidArgument):
        run_training(s, mea, 0, np.random.default_rng(0))


def test_chosen_from_counts_ties_low_index():
    assert chosen_from_counts(np.array([[1, 3], [2, 2], [0, 0], [4, 0]])) == 0


def test_welch_frozen_oracle():
    t, df = welch_t([12, 11, 13, 12], [8, 9, 7, 8])
    assert t == pytest.approx(WELCH_FROZEN_T, rel=1e-9)
    assert df == pytest.approx(WELCH_FROZEN_DF, rel=1e-9)


@pytest.mark.filterwarnings("ignore:Precision loss:RuntimeWarning")
@settings(max_examples=50)
@given(st.lists(st.integers(0, 30), min_size=2, max_size=12),
       st.lists(st.integers(0, 30), min_size=2, max_size=12))
def test_welch_matches_scipy(a, b):
    res = welch_t(a, b)
    if np.var(a) == 0 and np.var(b) == 0:
        return
    ref = stats.ttest_ind(a, b, equal_var=False)
    assert res.statistic == pytest.approx(ref.statistic, rel=1e-9, abs=1e-12)
    assert one_sided_p(res) == pytest.approx(ref.pvalue / 2 if ref.statistic > 0 else 1 - ref.pvalue / 2,
                                             rel=1e-7, abs=1e-12)


def test_welch_zero_variance_cases():
    assert welch_t([10, 10], [10, 10]).statistic == 0
    assert one_sided_p(welch_t([10, 10], [10, 10])) == 0.5
    r = welch_t([9, 9], [5, 5])
    assert r.statistic == math.inf
    assert one_sided_p(r) == 0.0
    assert one_sided_p(welch_t([5, 5], [9, 9])) == 1.0
    with pytest.raises(InvalidArgument):
        welch_t([1], [2, 3])


def test_compare_leader_modes():
    counts = np.array([[9, 10, 11], [5, 6, 7], [0, 0, 0], [1, 1, 2]])
    assert compare_leader(counts).statistic == pytest.approx(welch_t([9, 10, 11], [5, 6, 7]).statistic)
    pooled = compare_leader(counts, "pooled").statistic
    assert pooled == pytest.approx(welch_t([9, 10, 11], [5, 6, 7, 0, 0, 0, 1, 1, 2]).statistic)
    with pytest.raises(InvalidArgument):
        compare_leader(counts, "bogus")


def test_dominant_element_needs_two_rounds():
    # double patch facing an 18 m hotspot: element 0 always serves all ten users
    s = make_scene(isd=1732, scbs=(420.0, 300.0), centre=(438.0, 300.0))
    mea = MeaConfig(double_patch())
    for seed in range(5):
        out = rounds_to_significance(s, mea, np.random.default_rng(seed))
        assert out.rounds_needed == 2
        assert out.reached and out.p_value < 0.05


def test_alpha_near_one_stops_at_two():
    s = make_scene(isd=1732, scbs=(420.0, 300.0), centre=(450.0, 300.0))
    for seed in range(5):
        out = rounds_to_significance(s, MeaConfig(single_patch()), np.random.default_rng(seed), alpha=0.99)
        assert out.rounds_needed == 2


def test_alpha_monotone():
    s = make_scene(isd=1732, scbs=(420.0, 300.0), centre=(450.0, 300.0))
    mea = MeaConfig(single_patch())
    strict = [rounds_to_significance(s, mea, np.random.default_rng(i), alpha=0.01, max_rounds=60)
              for i in range(10)]
    loose = [rounds_to_significance(s, mea, np.random.default_rng(i), alpha=0.2, max_rounds=60)
             for i in range(10)]
    for a, b in zip(strict, loose):
        assert b.rounds_needed <= (a.rounds_needed or 61)


def test_not_reached_reports_none():
    s = make_scene(isd=1732, scbs=(420.0, 300.0), centre=(470.0, 300.0))
    out = rounds_to_significance(s, MeaConfig(single_patch()), np.random.default_rng(0),
                                 alpha=1e-12, max_rounds=3)
    assert out.rounds_needed is None and not out.reached


def test_rounds_argument_checks():
    s = _training_scene()
    with pytest.raises(InvalidArgument):
        rounds_to_significance(s, MeaConfig(single_patch()), np.random.default_rng(0), max_rounds=1)
    with pytest.raises(InvalidArgument):
        rounds_to_significance(s, MeaConfig(single_patch()), np.random.default_rng(0), alpha=1.0)
