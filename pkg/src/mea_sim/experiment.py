"""Seeded drop generation and the four Monte Carlo experiments.

Every drop owns a seed derived from ``(master_seed, bin_index, drop_index)``
and separate child streams per purpose, so a drop's result never depends on
which other drops ran, in what order, or in which worker process.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .config import ExperimentConfig
from .errors import BinInfeasible, InvalidArgument
from .geometry import (
    Hotspot,
    NetworkLayout,
    Point2D,
    build_layout,
    drop_ues,
    in_sector,
    sample_points_in_disk,
    sample_points_in_sector,
)
from .network import (
    Scene,
    ShannonParams,
    Transmitter,
    gamma_hs_batch,
    macro_transmitters,
    rx_matrix,
)
from .propagation import (
    AntennaPattern,
    MeaConfig,
    PathlossModel,
    dbm_to_mw,
    double_patch,
    macro_sector,
    mw_to_dbm,
    omni,
    single_patch,
    thermal_noise_dbm,
)
from .report import (
    ExperimentRecord,
    Table,
    empirical_cdf,
    summarize,
    wide_table,
)
from .selection import chosen_from_counts, rounds_to_significance, run_training, served_counts

SELECTION = "selection_accuracy"
TTEST = "ttest_rounds"
SERVED = "served_ues"
RATE = "rate_cdf"
EXPERIMENTS = (SELECTION, TTEST, SERVED, RATE)

# child-stream tags of a drop seed
_PLACEMENT, _OFFSET, _UES, _TRAINING, _TTEST, _STABILITY = range(6)

_PLACEMENT_BATCH = 256


@dataclass(frozen=True)
class Setup:
    """Objects derived once from a config."""

    layout: NetworkLayout
    macros: tuple[Transmitter, ...]
    oda: AntennaPattern
    single: AntennaPattern
    double: AntennaPattern
    scbs_pathloss: PathlossModel
    noise_dbm: float
    shannon: ShannonParams

    def element(self, kind: str) -> AntennaPattern:
        return {"single": self.single, "double": self.double}[kind]


@lru_cache(maxsize=8)
def setup_for(config: ExperimentConfig) -> Setup:
    layout = build_layout(config.isd_m, config.sector_offset_deg)
    macro_model = PathlossModel("macro_uma", config.macro_pl_intercept_db, config.macro_pl_slope_db)
    macros = macro_transmitters(
        layout, config.macro_tx_power_dbm,
        macro_sector(config.macro_gain_dbi, config.macro_hpbw_deg, config.macro_f2b_db), macro_model)
    return Setup(
        layout=layout,
        macros=macros,
        oda=omni(config.omni_gain_dbi),
        single=single_patch(config.single_patch_gain_dbi, config.single_patch_hpbw_deg,
                            config.single_patch_f2b_db),
        double=double_patch(config.double_patch_gain_dbi, config.double_patch_hpbw_deg,
                            config.double_patch_f2b_db),
        scbs_pathloss=PathlossModel("smallcell_outdoor", config.scbs_pl_intercept_db,
                                    config.scbs_pl_slope_db),
        noise_dbm=thermal_noise_dbm(config.bandwidth_hz, config.noise_figure_db),
        shannon=ShannonParams(config.shannon_bw_eff, config.shannon_sinr_eff, config.shannon_se_cap),
    )


def target_gamma(config: ExperimentConfig, bin_index: int) -> float:
    """Bin centre; ``bin_index == len(gamma_bins_db)`` is an extra 0 dB bin."""
    if 0 <= bin_index < len(config.gamma_bins_db):
        return float(config.gamma_bins_db[bin_index])
    if bin_index == len(config.gamma_bins_db):
        return 0.0
    raise InvalidArgument(f"bin index {bin_index} out of range")


def rate_bin_index(config: ExperimentConfig) -> int:
    bins = [float(g) for g in config.gamma_bins_db]
    return bins.index(0.0) if 0.0 in bins else len(bins)


@lru_cache(maxsize=64)
def max_pair_distance(config: ExperimentConfig, target_db: float) -> float:
    """Upper bound on the SCBS-to-hotspot distance of any pair in the bin.

    The omni SINR at the hotspot centre can never exceed the SCBS power over
    the weakest macro interference found in the sector (less a 3 dB margin for
    grid resolution), so pairs farther apart than this cannot be accepted.
    Drawing the SCBS uniformly in a disk of this radius around the hotspot
    centre therefore yields the same accepted-pair distribution as drawing
    both points independently over the sector.
    """
    s = setup_for(config)
    site = np.asarray(s.layout.sites[s.layout.sectors[config.selected_sector][0]])
    r = s.layout.cell_radius
    g = np.linspace(-r, r, 241)
    xy = site + np.array(np.meshgrid(g, g)).reshape(2, -1).T
    xy = xy[in_sector(s.layout, config.selected_sector, xy, config.min_distance_m)]
    floor_dbm = float(mw_to_dbm(dbm_to_mw(rx_matrix(xy, s.macros)).sum(axis=1).min()
                                + dbm_to_mw(s.noise_dbm))) - 3.0
    max_pl = (config.scbs_tx_power_dbm + config.omni_gain_dbi
              - (target_db - config.gamma_tol_db) - floor_dbm)
    d = 1000.0 * 10 ** ((max_pl - config.scbs_pl_intercept_db) / config.scbs_pl_slope_db)
    return float(min(d, 2.0 * r))


@dataclass(frozen=True)
class DropScenario:
    scene: Scene
    gamma_hs_db: float
    target_gamma_db: float
    bin_index: int
    drop_index: int
    install_offset_deg: float
    tries: int
    master_seed: int

    @property
    def seed(self) -> tuple[int, int, int]:
        return (self.master_seed, self.bin_index, self.drop_index)

    def rng(self, tag: int) -> np.random.Generator:
        return drop_rng(self.master_seed, self.bin_index, self.drop_index, tag)

    def mea(self, element: AntennaPattern) -> MeaConfig:
        return MeaConfig(element, self.install_offset_deg)


def drop_rng(master_seed: int, bin_index: int, drop_index: int, tag: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(bin_index, drop_index, tag))
    return np.random.Generator(np.random.PCG64(ss))


def generate_drop(config: ExperimentConfig, bin_index: int, drop_index: int) -> DropScenario:
    """Place SCBS and hotspot in the selected sector until the omni SINR hits the bin."""
    s = setup_for(config)
    target = target_gamma(config, bin_index)
    radius = max_pair_distance(config, target)
    rng = drop_rng(config.master_seed, bin_index, drop_index, _PLACEMENT)
    sector = config.selected_sector
    tries = 0
    while True:
        if tries >= config.max_placement_tries:
            raise BinInfeasible(target, tries)
        n = min(_PLACEMENT_BATCH, config.max_placement_tries - tries)
        tries += n
        centres = sample_points_in_sector(s.layout, sector, rng, n, config.min_distance_m)
        scbs = centres + sample_points_in_disk(Point2D(0.0, 0.0), radius, rng, n)
        ok = in_sector(s.layout, sector, scbs, config.min_distance_m)
        gamma = np.full(n, np.nan)
        if ok.any():
            gamma[ok] = gamma_hs_batch(s.macros, scbs[ok], centres[ok], config.scbs_tx_power_dbm,
                                       s.scbs_pathloss, s.oda, s.noise_dbm)
        hit = np.flatnonzero(np.abs(gamma - target) <= config.gamma_tol_db)
        if len(hit):
            i = int(hit[0])
            tries = tries - n + i + 1
            break

    if config.install_offset_deg is None:
        offset = float(drop_rng(config.master_seed, bin_index, drop_index, _OFFSET).uniform(0.0, 90.0))
    else:
        offset = float(config.install_offset_deg)
    hotspot = Hotspot(Point2D(*centres[i]), config.hotspot_radius_m)
    scbs_pos = Point2D(*scbs[i])
    scene = Scene(
        layout=s.layout, sector=sector, macros=s.macros, scbs_position=scbs_pos, hotspot=hotspot,
        ues=None, scbs_tx_power_dbm=config.scbs_tx_power_dbm, scbs_pathloss=s.scbs_pathloss,
        oda=s.oda, noise_dbm=s.noise_dbm, bandwidth_hz=config.bandwidth_hz, shannon=s.shannon,
        n_ues=config.n_ues, hotspot_fraction=config.hotspot_fraction, ue_region=config.ue_region,
        min_distance_m=config.min_distance_m, shadowing_std_db=config.shadowing_std_db,
    )
    scene = scene.resample_ues(drop_rng(config.master_seed, bin_index, drop_index, _UES))
    return DropScenario(scene, float(gamma[i]), target, bin_index, drop_index, offset, tries,
                        config.master_seed)


# ---------------------------------------------------------------- per-drop work

def drop_selection(config: ExperimentConfig, drop: DropScenario) -> dict:
    s = setup_for(config)
    mea = drop.mea(s.element(config.training_element))
    rec = run_training(drop.scene, mea, max(config.rounds_grid), drop.rng(_TRAINING))
    chosen = {k: chosen_from_counts(rec.counts[:, :k]) for k in config.rounds_grid}

    rng = drop.rng(_STABILITY)
    stab = np.array([served_counts(drop.scene.resample_ues(rng), mea)
                     for _ in range(config.stability_resamples)])
    winners = np.argmax(stab, axis=1)
    dominant = chosen_from_counts(stab.T)
    return {
        "truth": rec.truth,
        "correct": {k: bool(c == rec.truth) for k, c in chosen.items()},
        "agree_dominant": {k: bool(c == dominant) for k, c in chosen.items()},
        "stable": bool(np.all(winners == winners[0])),
        "dominant_is_truth": bool(dominant == rec.truth),
    }


def drop_ttest(config: ExperimentConfig, drop: DropScenario, alpha: Optional[float] = None) -> Optional[int]:
    s = setup_for(config)
    mea = drop.mea(s.element(config.training_element))
    out = rounds_to_significance(drop.scene, mea, drop.rng(_TTEST),
                                 alpha=config.alpha if alpha is None else alpha,
                                 max_rounds=config.max_rounds, mode=config.ttest_mode)
    return out.rounds_needed


def served_keys(config: ExperimentConfig) -> list[tuple[str, str, Optional[float]]]:
    """(config, patch_kind, misalignment) rows of the served-UE table, in output order."""
    keys: list[tuple[str, str, Optional[float]]] = []
    if "oda" in config.antenna_configs:
        keys.append(("oda", "omni", None))
    for kind in ("single", "double"):
        if f"mea_{kind}" in config.antenna_configs:
            keys.append(("mea", kind, None))
    for kind in ("single", "double"):
        if f"fixed_{kind}" in config.antenna_configs:
            keys.extend(("fixed", kind, float(m)) for m in sorted(config.misalignments_deg))
    return keys


def drop_served(config: ExperimentConfig, drop: DropScenario) -> dict:
    s = setup_for(config)
    scene = drop.scene
    bearing = scene.hotspot_bearing_deg
    out = {}
    for key in served_keys(config):
        name, kind, mis = key
        if name == "oda":
            out[key] = scene.served(s.oda)
        elif name == "mea":
            out[key] = int(served_counts(scene, drop.mea(s.element(kind))).max())
        else:
            out[key] = scene.served(s.element(kind).pointed(bearing + mis))
    return out


RATE_KEYS = (("macro_only", "none"), ("oda", "omni"), ("mea", "single"), ("fixed", "single"),
             ("mea", "double"), ("fixed", "double"))


def rate_pattern(setup: Setup, drop: DropScenario, key: tuple[str, str]) -> Optional[AntennaPattern]:
    name, kind = key
    if name == "macro_only":
        return None
    if name == "oda":
        return setup.oda
    if name == "fixed":
        return setup.element(kind).pointed(drop.scene.hotspot_bearing_deg)
    mea = drop.mea(setup.element(kind))
    counts = served_counts(drop.scene, mea)
    return mea.elements[int(np.argmax(counts))]


def drop_rates(config: ExperimentConfig, drop: DropScenario) -> dict:
    s = setup_for(config)
    out = {}
    for key in RATE_KEYS:
        res = drop.scene.evaluate(rate_pattern(s, drop, key))
        out[key] = (res.rates_bps.tolist(), res.total_bps)
    return out


_PARTS: dict[str, Callable] = {
    SELECTION: drop_selection,
    TTEST: drop_ttest,
    SERVED: drop_served,
    RATE: drop_rates,
}


def evaluate_drop(args) -> dict:
    config, bin_index, drop_index, parts = args
    drop = generate_drop(config, bin_index, drop_index)
    out = {"gamma": drop.gamma_hs_db, "tries": drop.tries}
    for part in parts:
        out[part] = _PARTS[part](config, drop)
    return out


def map_drops(config: ExperimentConfig, bin_index: int, parts: Sequence[str],
              executor: Optional[ProcessPoolExecutor] = None) -> list[dict]:
    """Evaluate every drop of one bin; results come back in drop-index order."""
    jobs = [(config, bin_index, d, tuple(parts)) for d in range(config.n_drops)]
    if executor is None:
        return [evaluate_drop(j) for j in jobs]
    return list(executor.map(evaluate_drop, jobs, chunksize=max(1, len(jobs) // 64)))


# ---------------------------------------------------------------- aggregation

def crossover_misalignment(misalignments: Sequence[float], fixed_means: Sequence[float],
                           mea_mean: float) -> Optional[float]:
    """First misalignment where the fixed antenna falls below the MEA (linear interpolation)."""
    pts = sorted(zip(misalignments, fixed_means))
    if not pts:
        return None
    if pts[0][1] < mea_mean:
        return float(pts[0][0])
    for (m0, f0), (m1, f1) in zip(pts, pts[1:]):
        if f1 < mea_mean:
            return float(m0 + (m1 - m0) * (f0 - mea_mean) / (f0 - f1))
    return None


@dataclass
class BinResult:
    bin_index: int
    gamma_db: float
    drops: list[dict]


def _sorted_bins(bins: Iterable[BinResult]) -> list[BinResult]:
    return sorted(bins, key=lambda b: (b.gamma_db, b.bin_index))


def aggregate_selection(config: ExperimentConfig, bins: Sequence[BinResult]) -> ExperimentRecord:
    table = Table("selection_accuracy.csv",
                  ("gamma_db", "rounds_k", "n_drops", "accuracy", "ci95_low", "ci95_high"))
    per_bin = {}
    grid = sorted(set(config.rounds_grid))
    all_stable = []
    for b in _sorted_bins(bins):
        sel = [d[SELECTION] for d in b.drops]
        for k in grid:
            row = summarize([s["correct"][k] for s in sel], 0.0, 1.0)
            table.rows.append((b.gamma_db, k, row.n, row.mean, row.ci95_low, row.ci95_high))
        stable = [s["stable"] for s in sel]
        all_stable += stable
        per_bin[f"{b.gamma_db:g}"] = {
            "single_round_stable_rate": float(np.mean(stable)),
            "n_placements": len(stable),
            "accuracy_vs_dominant": {str(k): float(np.mean([s["agree_dominant"][k] for s in sel]))
                                     for k in grid},
            "dominant_equals_angle_truth": float(np.mean([s["dominant_is_truth"] for s in sel])),
        }
    acc = {(r[0], r[1]): r[3] for r in table.rows}
    wide = wide_table([f"k{k}" for k in grid], [b.gamma_db for b in _sorted_bins(bins)],
                      lambda g, c: acc[(g, int(c[1:]))], "gamma_db")
    extra = {
        "per_bin": per_bin,
        "single_round_sufficiency": {
            "stable_rate": float(np.mean(all_stable)) if all_stable else None,
            "n_placements": len(all_stable),
            "resamples": config.stability_resamples,
        },
    }
    return ExperimentRecord(SELECTION, [table], config.n_drops, config.fingerprint(), extra,
                            wide={"selection_accuracy.dat": wide})


def aggregate_ttest(config: ExperimentConfig, bins: Sequence[BinResult]) -> ExperimentRecord:
    table = Table("ttest_rounds.csv",
                  ("gamma_db", "mean_rounds", "std_rounds", "n_reached", "n_not_reached"))
    for b in _sorted_bins(bins):
        rounds = [d[TTEST] for d in b.drops]
        reached = [r for r in rounds if r is not None]
        if reached:
            row = summarize(reached)
            mean, std = row.mean, row.std
        else:
            mean = std = math.nan
        table.rows.append((b.gamma_db, mean, std, len(reached), len(rounds) - len(reached)))
    return ExperimentRecord(TTEST, [table], config.n_drops, config.fingerprint())


def _series_name(key) -> str:
    name, kind, mis = key
    if name == "oda":
        return "oda"
    if name == "mea":
        return f"mea_{kind}"
    return f"fixed_{kind}_{mis:g}"


def aggregate_served(config: ExperimentConfig, bins: Sequence[BinResult]) -> ExperimentRecord:
    table = Table("served_ues.csv", ("gamma_db", "config", "patch_kind", "misalignment_deg",
                                     "mean_served", "ci95_low", "ci95_high", "n_drops"))
    keys = served_keys(config)
    means = {}
    crossover = {}
    for b in _sorted_bins(bins):
        for key in keys:
            row = summarize([d[SERVED][key] for d in b.drops], 0.0)
            means[(b.gamma_db, key)] = row.mean
            table.rows.append((b.gamma_db, key[0], key[1], key[2], row.mean, row.ci95_low,
                               row.ci95_high, row.n))
        for kind in ("single", "double"):
            fixed = [k for k in keys if k[0] == "fixed" and k[1] == kind]
            if fixed and ("mea", kind, None) in keys:
                crossover.setdefault(kind, {})[f"{b.gamma_db:g}"] = crossover_misalignment(
                    [k[2] for k in fixed], [means[(b.gamma_db, k)] for k in fixed],
                    means[(b.gamma_db, ("mea", kind, None))])
    # bin-pooled means give one crossover per patch kind
    ordered = _sorted_bins(bins)
    for kind in ("single", "double"):
        fixed = [k for k in keys if k[0] == "fixed" and k[1] == kind]
        if fixed and ("mea", kind, None) in keys and ordered:
            pooled = {k: float(np.mean([means[(b.gamma_db, k)] for b in ordered]))
                      for k in fixed + [("mea", kind, None)]}
            crossover[kind]["pooled"] = crossover_misalignment(
                [k[2] for k in fixed], [pooled[k] for k in fixed], pooled[("mea", kind, None)])
    by_name = {_series_name(k): k for k in keys}
    wide = wide_table(list(by_name), [b.gamma_db for b in _sorted_bins(bins)],
                      lambda g, c: means[(g, by_name[c])], "gamma_db")
    return ExperimentRecord(SERVED, [table], config.n_drops, config.fingerprint(),
                            {"crossover_misalignment_deg": crossover},
                            wide={"served_ues.dat": wide})


def rate_keys(config: ExperimentConfig) -> list[tuple[str, str]]:
    wanted = {"macro_only": ("macro_only", "none"), "oda": ("oda", "omni"),
              "mea_single": ("mea", "single"), "mea_double": ("mea", "double"),
              "fixed_single": ("fixed", "single"), "fixed_double": ("fixed", "double")}
    chosen = {wanted[c] for c in config.antenna_configs}
    return [k for k in RATE_KEYS if k in chosen]


def aggregate_rates(config: ExperimentConfig, b: BinResult) -> ExperimentRecord:
    cdf_table = Table("rate_cdf.csv", ("config", "patch_kind", "rate_bps", "cdf"))
    totals = Table("totals.csv", ("config", "patch_kind", "mean_total_rate_bps", "gain_over_oda_pct"))
    mean_total = {key: float(np.mean([d[RATE][key][1] for d in b.drops])) for key in RATE_KEYS}
    oda = mean_total[("oda", "omni")]
    cdfs = []
    for key in rate_keys(config):
        rates = np.concatenate([d[RATE][key][0] for d in b.drops])
        cdf = empirical_cdf(rates)
        cdfs.append(cdf)
        cdf_table.rows.extend((key[0], key[1], v, p) for v, p in zip(cdf.values, cdf.probs))
        totals.rows.append((key[0], key[1], mean_total[key], 100.0 * (mean_total[key] / oda - 1.0)))
    extra = {"gamma_db": b.gamma_db, "n_drops": len(b.drops)}
    return ExperimentRecord(RATE, [cdf_table, totals], config.n_drops, config.fingerprint(), extra,
                            cdfs=cdfs)


# ---------------------------------------------------------------- drivers

@dataclass
class RunResult:
    records: dict[str, ExperimentRecord]
    placement: dict[str, dict]


def run_experiments(config: ExperimentConfig, experiments: Sequence[str] = EXPERIMENTS,
                    workers: int = 1, progress: Optional[Callable[[str], None]] = None) -> RunResult:
    """Run the requested experiments on one shared drop pool per bin."""
    unknown = set(experiments) - set(EXPERIMENTS)
    if unknown:
        raise InvalidArgument(f"unknown experiments {sorted(unknown)}")
    per_bin = [e for e in experiments if e != RATE]
    rate_bin = rate_bin_index(config) if RATE in experiments else None
    bins_to_run = list(range(len(config.gamma_bins_db))) if per_bin else []
    if rate_bin is not None and rate_bin not in bins_to_run:
        bins_to_run.append(rate_bin)

    results: list[BinResult] = []
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for bi in bins_to_run:
            parts = [e for e in EXPERIMENTS if e in experiments and (e != RATE or bi == rate_bin)]
            if bi == len(config.gamma_bins_db):
                parts = [RATE]
            drops = map_drops(config, bi, parts, executor)
            results.append(BinResult(bi, target_gamma(config, bi), drops))
            if progress:
                progress(f"bin {target_gamma(config, bi):+g} dB: {len(drops)} drops ({', '.join(parts)})")
    finally:
        if executor is not None:
            executor.shutdown()

    regular = [b for b in results if b.bin_index < len(config.gamma_bins_db)]
    records = {}
    if SELECTION in experiments:
        records[SELECTION] = aggregate_selection(config, regular)
    if TTEST in experiments:
        records[TTEST] = aggregate_ttest(config, regular)
    if SERVED in experiments:
        records[SERVED] = aggregate_served(config, regular)
    if RATE in experiments:
        records[RATE] = aggregate_rates(config, next(b for b in results if b.bin_index == rate_bin))

    placement = {}
    for b in _sorted_bins(results):
        g = np.array([d["gamma"] for d in b.drops])
        placement[f"{b.gamma_db:g}"] = {
            "n_drops": len(b.drops),
            "mean_tries": float(np.mean([d["tries"] for d in b.drops])),
            "realized_gamma_mean_db": float(g.mean()),
            "realized_gamma_min_db": float(g.min()),
            "realized_gamma_max_db": float(g.max()),
        }
    return RunResult(records, placement)


def exp_selection_accuracy(config: ExperimentConfig, workers: int = 1) -> ExperimentRecord:
    return run_experiments(config, (SELECTION,), workers).records[SELECTION]


def exp_ttest_rounds(config: ExperimentConfig, workers: int = 1) -> ExperimentRecord:
    return run_experiments(config, (TTEST,), workers).records[TTEST]


def exp_served_ues(config: ExperimentConfig, workers: int = 1) -> ExperimentRecord:
    return run_experiments(config, (SERVED,), workers).records[SERVED]


def exp_rate_cdf(config: ExperimentConfig, workers: int = 1) -> ExperimentRecord:
    return run_experiments(config, (RATE,), workers).records[RATE]
