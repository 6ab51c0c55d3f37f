import hashlib
import json

import pytest

from threebox.cli import (
    CSV_COLUMNS,
    ConfigError,
    config_from_dict,
    config_to_dict,
    json_safe,
    load_config,
    main,
    read_records_csv,
    record_from_row,
    record_to_row,
    summarize_records,
    write_records_csv,
)
from threebox.protocol import (
    BobOutcome,
    Context,
    ContextSchedule,
    EngineKind,
    MrStrategy,
    ScheduleKind,
    SessionConfig,
    run_session,
)


QUANTUM_CONFIG = {
    "engine": "quantum",
    "rounds": 240,
    "context_schedule": {"kind": "blocks", "n": 120},
    "odds": 2.0,
    "seed": 2024,
}


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


# ---------------------------------------------------------------------------
# config schema


def test_config_round_trip():
    cfg = config_from_dict(QUANTUM_CONFIG)
    assert cfg.engine is EngineKind.QUANTUM
    assert cfg.context_schedule == ContextSchedule(ScheduleKind.BLOCKS, 120)
    again = config_from_dict(config_to_dict(cfg))
    assert again == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        config_from_dict({**QUANTUM_CONFIG, "typo_key": 1})
    with pytest.raises(Exception):
        config_from_dict({**QUANTUM_CONFIG, "noise": {"f_readuot": 0.9}})


def test_config_requires_engine_and_strategy_pairing():
    with pytest.raises(ConfigError):
        config_from_dict({"rounds": 10})
    with pytest.raises(Exception):
        config_from_dict({"engine": "macroreal", "rounds": 10})
    strat = MrStrategy.hidden_ball().to_dict()
    cfg = config_from_dict({"engine": "macroreal", "rounds": 10, "mr_strategy": strat})
    assert cfg.engine is EngineKind.MACROREAL


def test_load_config_seed_override(tmp_path):
    path = write_config(tmp_path, QUANTUM_CONFIG)
    assert load_config(path).seed == 2024
    assert load_config(path, seed_override=7).seed == 7
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(bad)


# ---------------------------------------------------------------------------
# record files


def test_record_row_round_trip():
    cfg = SessionConfig(engine=EngineKind.MACROREAL, mr_strategy=MrStrategy.hidden_ball(),
                        rounds=40, seed=5,
                        context_schedule=ContextSchedule(ScheduleKind.UNIFORM_RANDOM))
    for record in run_session(cfg):
        row = dict(zip(CSV_COLUMNS, record_to_row(record)))
        assert record_from_row(row) == record


def test_csv_columns_and_blank_optionals(tmp_path):
    cfg = SessionConfig(engine=EngineKind.QUANTUM, rounds=30, seed=5,
                        context_schedule=ContextSchedule(ScheduleKind.UNIFORM_RANDOM))
    records = run_session(cfg)
    path = tmp_path / "records.csv"
    write_records_csv(records, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    none_line = next(
        line for line, rec in zip(lines[1:], records) if rec.context is Context.NONE
    )
    fields = none_line.split(",")
    assert fields[3] == ""  # no Bob outcome without a measurement
    assert fields[7] == fields[8] == fields[9] == ""  # no ground truth for quantum
    assert read_records_csv(path) == records


def test_read_records_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_records_csv(path)


def test_json_safe_strips_non_finite():
    data = {"a": float("inf"), "b": [1.0, float("nan")], "c": {"d": 2.0}}
    clean = json_safe(data)
    assert clean == {"a": None, "b": [1.0, None], "c": {"d": 2.0}}
    json.dumps(clean)


# ---------------------------------------------------------------------------
# commands through main()


def test_simulate_is_byte_deterministic(tmp_path):
    cfg_path = write_config(tmp_path, QUANTUM_CONFIG)
    assert main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "b")]) == 0
    for name in ("records.csv", "summary.json"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b


def test_simulate_worker_invariance(tmp_path):
    cfg_path = write_config(tmp_path, QUANTUM_CONFIG)
    main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "w1"), "--workers", "1"])
    main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "w4"), "--workers", "4"])
    assert (tmp_path / "w1" / "records.csv").read_bytes() == (
        tmp_path / "w4" / "records.csv"
    ).read_bytes()
    assert (tmp_path / "w1" / "summary.json").read_bytes() == (
        tmp_path / "w4" / "summary.json"
    ).read_bytes()


# Golden pins of the output byte formats for one small fixed-seed run.
GOLDEN_RECORDS_SHA256 = "430b858b6f63cfc854b2c8c9bad9082cbe33b5c67702b55ff5bf475ec8ecbd0c"
GOLDEN_SUMMARY_SHA256 = "72a27995000febaf19bf4821c4b23b29cd685667376288c3afdcdb84c767f619"


def test_simulate_golden_bytes(tmp_path):
    config = {
        "engine": "quantum",
        "rounds": 12,
        "context_schedule": "alternate",
        "odds": 2.0,
        "seed": 424242,
    }
    cfg_path = write_config(tmp_path, config)
    assert main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "g")]) == 0
    records = hashlib.sha256((tmp_path / "g" / "records.csv").read_bytes()).hexdigest()
    assert records == GOLDEN_RECORDS_SHA256
    summary = hashlib.sha256((tmp_path / "g" / "summary.json").read_bytes()).hexdigest()
    assert summary == GOLDEN_SUMMARY_SHA256


def test_simulate_rejects_bad_config(tmp_path, capsys):
    cfg_path = write_config(tmp_path, {**QUANTUM_CONFIG, "bogus": 1})
    assert main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "x")]) == 2
    cfg_path = write_config(tmp_path, {**QUANTUM_CONFIG, "context_schedule": "external"})
    assert main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "x")]) == 2


def test_simulate_missing_config_is_io_error(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "x")]) == 3


def test_analyze_ideal_records(tmp_path, capsys):
    config = {
        "engine": "quantum",
        "noise": {"f_herald": 1.0, "herald_success_rate": 1.0, "f_readout": 1.0,
                   "p_preserve": 1.0},
        "rounds": 3000,
        "context_schedule": "alternate",
        "seed": 5,
    }
    cfg_path = write_config(tmp_path, config)
    main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "run")])
    code = main(["analyze", str(tmp_path / "run" / "records.csv"),
                 "--policy", "fair", "--out", str(tmp_path / "run")])
    assert code == 0
    report = json.loads((tmp_path / "run" / "lg_report.json").read_text())
    assert report["k_hat"] == pytest.approx(-13 / 9, abs=1e-12)
    assert report["sigma_fair"] is None  # infinite sigma serializes as null


def test_analyze_macroreal_records(tmp_path):
    config = {
        "engine": "macroreal",
        "mr_strategy": MrStrategy.hidden_ball().to_dict(),
        "rounds": 6000,
        "context_schedule": "alternate",
        "seed": 6,
    }
    cfg_path = write_config(tmp_path, config)
    main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "mr")])
    assert main(["analyze", str(tmp_path / "mr" / "records.csv"), "--out",
                 str(tmp_path / "mr")]) == 0
    report = json.loads((tmp_path / "mr" / "lg_report.json").read_text())
    se = report["k_std_err"]
    assert report["k_hat"] >= -1.0 - 3 * se
    summary = json.loads((tmp_path / "mr" / "summary.json").read_text())
    assert -1.0 - 0.05 <= summary["k_direct"] <= 3.0


def test_analyze_insufficient_data_exit_code(tmp_path):
    config = {"engine": "quantum", "rounds": 3, "context_schedule": "alternate", "seed": 1}
    cfg_path = write_config(tmp_path, config)
    main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "tiny")])
    assert main(["analyze", str(tmp_path / "tiny" / "records.csv")]) == 4


def test_verify_outputs(tmp_path, capsys):
    cfg_path = write_config(tmp_path, {**QUANTUM_CONFIG, "rounds": 1})
    assert main(["verify", "--config", cfg_path, "--out", str(tmp_path / "v"),
                 "--pairs", "1800"]) == 0
    tables = json.loads((tmp_path / "v" / "verification.json").read_text())
    assert tables["n_pairs"] == 1800
    text = (tmp_path / "v" / "verification.txt").read_text()
    assert "repeatability" in text
    out = capsys.readouterr().out
    assert "first-measurement marginals" in out


def test_mrscan_outputs(tmp_path):
    targets = {
        "p_alice_m1": 1 / 9, "p_alice_m2": 1 / 9, "p_alice_none": 1 / 9,
        "p_bob_given_alice_m1": 1.0, "p_bob_given_alice_m2": 1.0,
    }
    tpath = tmp_path / "targets.json"
    tpath.write_text(json.dumps(targets), encoding="utf-8")
    assert main(["mrscan", "--targets", str(tpath), "--budget", "3000",
                 "--out", str(tmp_path / "scan"), "--lock-identity"]) == 0
    fit = json.loads((tmp_path / "scan" / "fit.json").read_text())
    assert fit["fit_error"] >= 0.25
    frontier_lines = (tmp_path / "scan" / "frontier.csv").read_text().splitlines()
    assert frontier_lines[0] == "disturbance,fit_error"
    assert len(frontier_lines) > 1


def test_mrscan_rejects_bad_targets(tmp_path):
    tpath = tmp_path / "targets.json"
    tpath.write_text(json.dumps({"p_alice_m1": 0.5}), encoding="utf-8")
    assert main(["mrscan", "--targets", str(tpath), "--budget", "2000",
                 "--out", str(tmp_path / "scan")]) == 2


def test_summary_contents(tmp_path):
    cfg = config_from_dict(QUANTUM_CONFIG)
    records = run_session(cfg)
    summary = summarize_records(cfg, records)
    assert summary["rounds"] == 240
    assert summary["per_context"]["M1"]["rounds"] == 120
    assert summary["per_context"]["none"]["rounds"] == 0
    assert summary["herald_attempts_expected"] == pytest.approx(240 / 0.01)
    assert summary["lg"] is None or "k_hat" in summary["lg"]
