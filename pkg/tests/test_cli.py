import io
import json

import pytest

from mea_sim.cli import (
    EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO, EXIT_OK, CliInvocation, build_parser, main, run,
)

TINY = ["n_drops=3", "rounds_grid=1,2", "stability_resamples=3", "max_rounds=10",
        "gamma_bins_db=0", "misalignments_deg=0,90"]


def _run(sub, out, extra=(), **kw):
    err = io.StringIO()
    inv = CliInvocation(sub, overrides=list(TINY) + list(extra), out_dir=str(out), quiet=True, **kw)
    return run(inv, stdout=io.StringIO(), stderr=err), err.getvalue()


def _tree(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_validate_config_prints_and_runs_nothing(tmp_path, capsys):
    assert main(["validate-config", "--out", str(tmp_path / "x")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "scbs_tx_power_dbm=20.0" in out
    assert "gamma_bins_db=-5,-2,0,2,5" in out
    assert not (tmp_path / "x").exists()


def test_help_documents_exit_codes():
    text = build_parser().format_help()
    assert "exit status" in text and "bin could not be reached" in text


def test_unknown_key_exit_code(tmp_path):
    code, err = _run("served-ues", tmp_path, ["hotspt_radius_m=3"])
    assert code == EXIT_CONFIG
    assert "hotspt_radius_m" in err


def test_bad_workers(tmp_path):
    code, _ = _run("served-ues", tmp_path, workers=0)
    assert code == EXIT_CONFIG


def test_infeasible_bin_exit_code(tmp_path):
    code, err = _run("served-ues", tmp_path, ["gamma_bins_db=60", "max_placement_tries=500"])
    assert code == EXIT_INFEASIBLE
    assert "60" in err


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _ = _run("served-ues", blocker / "sub")
    assert code == EXIT_IO


def test_all_writes_files_and_manifest(tmp_path):
    code, _ = _run("all", tmp_path, seed=1)
    assert code == EXIT_OK
    names = {p.name for p in tmp_path.iterdir()}
    assert {"selection_accuracy.csv", "ttest_rounds.csv", "served_ues.csv", "rate_cdf.csv",
            "totals.csv", "run_manifest.json"} <= names
    assert not any(n.startswith(".") for n in names)
    m = json.loads((tmp_path / "run_manifest.json").read_text())
    assert m["master_seed"] == 1
    assert m["config"]["master_seed"] == 1
    assert "stable_rate" in m["single_round_sufficiency"]
    assert set(m["placement"]) == {"0"}


def test_all_twice_identical(tmp_path):
    assert _run("all", tmp_path / "a", seed=1)[0] == EXIT_OK
    assert _run("all", tmp_path / "b", seed=1)[0] == EXIT_OK
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")


def test_workers_identical_served(tmp_path):
    assert _run("served-ues", tmp_path / "w1", workers=1)[0] == EXIT_OK
    assert _run("served-ues", tmp_path / "w3", workers=3)[0] == EXIT_OK
    assert (tmp_path / "w1" / "served_ues.csv").read_bytes() == (tmp_path / "w3" / "served_ues.csv").read_bytes()


def test_json_format(tmp_path):
    inv = CliInvocation("ttest-rounds", overrides=TINY, out_dir=str(tmp_path), quiet=True, format="json")
    assert run(inv, stdout=io.StringIO(), stderr=io.StringIO()) == EXIT_OK
    doc = json.loads((tmp_path / "ttest_rounds.json").read_text())
    assert doc["tables"]["ttest_rounds"][0]["gamma_db"] == 0.0


def test_progress_on_stderr(tmp_path):
    err = io.StringIO()
    inv = CliInvocation("served-ues", overrides=TINY, out_dir=str(tmp_path))
    assert run(inv, stdout=io.StringIO(), stderr=err) == EXIT_OK
    assert "bin +0 dB" in err.getvalue()


def test_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("MEA_SIM_N_DROPS", "2")
    inv = CliInvocation("served-ues", overrides=[t for t in TINY if not t.startswith("n_drops")],
                        out_dir=str(tmp_path), quiet=True)
    assert run(inv, stdout=io.StringIO(), stderr=io.StringIO()) == EXIT_OK
    m = json.loads((tmp_path / "run_manifest.json").read_text())
    assert m["config"]["n_drops"] == 2


def test_argparse_rejects_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(["bogus"])
