"""Command-line entry point and the file schemas it owns.

Commands: simulate, verify, analyze, mrscan, serve. All are deterministic
given the config seed (except serve). Exit codes: 0 ok, 2 config error,
3 I/O error, 4 insufficient data.

The config file is strict JSON: unknown keys anywhere are a hard error,
because a silently ignored typo in a noise parameter would corrupt the
conclusions drawn from a run.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import lg_stats, mr_search
from .lg_stats import InsufficientData, StatsError, build_report, verification_report
from .mr_search import SearchError, best_noncontextual_fit, frontier
from .noise import NoiseError, NoiseParams
from .protocol import (
    BobOutcome,
    Context,
    ContextSchedule,
    EngineKind,
    MrStrategy,
    ProtocolError,
    RoundRecord,
    ScheduleKind,
    SessionConfig,
    run_session,
    run_verification,
    settle,
)

log = logging.getLogger("threebox")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INSUFFICIENT = 4

CSV_COLUMNS = (
    "round_id",
    "engine",
    "context",
    "bob_outcome",
    "alice_m3",
    "alice_bets",
    "alice_wins",
    "gt_box_t1",
    "gt_box_t2",
    "gt_box_t3",
    "seed_path",
)

_CONFIG_KEYS = {"engine", "noise", "mr_strategy", "rounds", "context_schedule", "odds", "seed"}


class ConfigError(ValueError):
    pass


def config_from_dict(data: dict) -> SessionConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    if "engine" not in data:
        raise ConfigError("config requires an engine")
    try:
        engine = EngineKind(data["engine"])
    except ValueError:
        raise ConfigError(f"unknown engine {data['engine']!r}") from None
    noise = NoiseParams.from_dict(data.get("noise", {}))
    strategy = None
    if data.get("mr_strategy") is not None:
        strategy = MrStrategy.from_dict(data["mr_strategy"])
    schedule = ContextSchedule.from_json_value(data.get("context_schedule", "alternate"))
    return SessionConfig(
        engine=engine,
        noise=noise,
        mr_strategy=strategy,
        rounds=int(data.get("rounds", 2400)),
        context_schedule=schedule,
        odds=float(data.get("odds", 2.0)),
        seed=int(data.get("seed", 0)),
    )


def config_to_dict(config: SessionConfig) -> dict:
    return {
        "engine": config.engine.value,
        "noise": config.noise.to_dict(),
        "mr_strategy": None if config.mr_strategy is None else config.mr_strategy.to_dict(),
        "rounds": config.rounds,
        "context_schedule": config.context_schedule.to_json_value(),
        "odds": config.odds,
        "seed": config.seed,
    }


def load_config(path: str | Path, seed_override: int | None = None) -> SessionConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    if seed_override is not None:
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        data = dict(data)
        data["seed"] = seed_override
    return config_from_dict(data)


# ---------------------------------------------------------------------------
# Record file schema.


def _bool_str(value: bool) -> str:
    return "true" if value else "false"


def record_to_row(record: RoundRecord) -> list[str]:
    gt = record.ground_truth_boxes or (None, None, None)
    return [
        str(record.round_id),
        record.engine.value,
        record.context.value,
        "" if record.bob_outcome is None else record.bob_outcome.value,
        _bool_str(record.alice_m3),
        _bool_str(record.alice_bets),
        "" if record.alice_wins is None else _bool_str(record.alice_wins),
        "" if gt[0] is None else str(gt[0]),
        "" if gt[1] is None else str(gt[1]),
        "" if gt[2] is None else str(gt[2]),
        record.seed_path,
    ]


def _parse_bool(text: str) -> bool:
    if text == "true":
        return True
    if text == "false":
        return False
    raise ConfigError(f"expected true/false, got {text!r}")


def record_from_row(row: dict) -> RoundRecord:
    gt = None
    if row["gt_box_t1"]:
        gt = (int(row["gt_box_t1"]), int(row["gt_box_t2"]), int(row["gt_box_t3"]))
    return RoundRecord(
        round_id=int(row["round_id"]),
        engine=EngineKind(row["engine"]),
        context=Context(row["context"]),
        bob_outcome=BobOutcome(row["bob_outcome"]) if row["bob_outcome"] else None,
        alice_m3=_parse_bool(row["alice_m3"]),
        alice_bets=_parse_bool(row["alice_bets"]),
        alice_wins=_parse_bool(row["alice_wins"]) if row["alice_wins"] else None,
        ground_truth_boxes=gt,
        seed_path=row["seed_path"],
    )


def write_records_csv(records, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for record in records:
            writer.writerow(record_to_row(record))


def read_records_csv(path: str | Path) -> list[RoundRecord]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ConfigError(f"record file must have columns {','.join(CSV_COLUMNS)}")
        return [record_from_row(row) for row in reader]


# ---------------------------------------------------------------------------
# Summaries.


def json_safe(value):
    """Replace non-finite floats by null so every consumer can parse us."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    return value


def summarize_records(config: SessionConfig, records) -> dict:
    per_context = {}
    for ctx in (Context.M1, Context.M2, Context.NONE):
        rounds = [r for r in records if r.context is ctx]
        alice_true = sum(1 for r in rounds if r.alice_m3)
        decided = [r for r in rounds if r.alice_wins is not None]
        wins = sum(1 for r in decided if r.alice_wins)
        per_context[ctx.value] = {
            "rounds": len(rounds),
            "alice_true": alice_true,
            "bet_rate": alice_true / len(rounds) if rounds else None,
            "bets_decided": len(decided),
            "alice_wins": wins,
            "win_rate": wins / len(decided) if decided else None,
        }
    payoff = sum(settle(record, config.odds) for record in records)
    summary = {
        "config": config_to_dict(config),
        "rounds": len(records),
        "bet_rate": sum(1 for r in records if r.alice_bets) / len(records) if records else None,
        "per_context": per_context,
        "alice_payoff_total": payoff,
        "herald_attempts_expected": (
            len(records) / config.noise.herald_success_rate
            if config.noise.herald_success_rate > 0
            else None
        ),
        "lg": None,
        "k_direct": None,
    }
    report = lg_stats.report_or_none(records)
    if report is not None:
        summary["lg"] = report.to_dict()
    if config.engine is EngineKind.MACROREAL and records:
        summary["k_direct"] = lg_stats.k_direct(records)
    return json_safe(summary)


def _write_json(data, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _print_lg_report(report) -> None:
    print("Leggett-Garg report")
    print(f"  K (fair sampling)   = {report.k_hat:.6g} +/- {report.k_std_err:.6g}")
    print(f"  sigma below MR bound = {report.sigma_fair:.6g}")
    print(f"  K (adverse policy)  = {report.k_hat_adverse:.6g} +/- {report.k_std_err_adverse:.6g}")
    print(f"  sigma below MR bound = {report.sigma_adverse:.6g}")
    for label, conds in (
        ("fair", report.conditionals),
        ("adverse", report.adverse_conditionals),
    ):
        for ctx in (Context.M1, Context.M2):
            est = conds[ctx]
            print(
                f"  P(Bob true | Alice true, {ctx.value}, {label}) = "
                f"{est.p_hat:.6g} +/- {est.std_err:.6g}  "
                f"({est.n_joint_true}/{est.n_alice_true})"
            )


# ---------------------------------------------------------------------------
# Commands.


def cmd_simulate(config: SessionConfig, out_dir: str | Path, workers: int = 1) -> int:
    out = Path(out_dir)
    records = run_session(config, workers=workers)
    summary = summarize_records(config, records)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_records_csv(records, out / "records.csv")
        _write_json(summary, out / "summary.json")
    except OSError as exc:
        log.error("cannot write outputs: %s", exc)
        return EXIT_IO
    print(f"simulated {len(records)} rounds -> {out / 'records.csv'}")
    bet_rate = summary["bet_rate"]
    print(f"  bet rate {bet_rate:.6g}")
    if summary["lg"] is not None:
        k_hat = summary["lg"]["k_hat"]
        print(f"  K (fair sampling) {k_hat:.6g}")
    return EXIT_OK


def cmd_verify(config: SessionConfig, out_dir: str | Path, n_pairs: int = 9999) -> int:
    tables = run_verification(config, n_pairs)
    text = verification_report(tables)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write_json(json_safe(tables.to_dict()), out / "verification.json")
        (out / "verification.txt").write_text(text + "\n", encoding="utf-8")
    except OSError as exc:
        log.error("cannot write outputs: %s", exc)
        return EXIT_IO
    print(text)
    return EXIT_OK


def cmd_analyze(records_path: str | Path, policy: str, out_dir: str | Path | None = None) -> int:
    records = read_records_csv(records_path)
    try:
        report = build_report(records)
    except InsufficientData as exc:
        log.error("insufficient data: %s", exc)
        print(f"insufficient data: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    _print_lg_report(report)
    chosen = (
        (report.k_hat, report.k_std_err, report.sigma_fair)
        if policy == "fair"
        else (report.k_hat_adverse, report.k_std_err_adverse, report.sigma_adverse)
    )
    print(
        f"  selected policy {policy}: K = {chosen[0]:.6g} +/- {chosen[1]:.6g}, "
        f"sigma = {chosen[2]:.6g}"
    )
    if out_dir is not None:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            _write_json(json_safe(report.to_dict()), out / "lg_report.json")
        except OSError as exc:
            log.error("cannot write outputs: %s", exc)
            return EXIT_IO
    return EXIT_OK


def cmd_mrscan(
    targets_path: str | Path,
    budget: int,
    out_dir: str | Path,
    seed: int = 0,
    lock_identity: bool = False,
) -> int:
    with open(targets_path, "r", encoding="utf-8") as fh:
        try:
            targets = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"targets file is not valid JSON: {exc}") from None
    rng = np.random.default_rng(seed)
    result, archive = best_noncontextual_fit(
        targets, budget, rng, lock_identity_disturbance=lock_identity
    )
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write_json(json_safe(result.to_dict()), out / "fit.json")
        with open(out / "frontier.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("disturbance", "fit_error"))
            for dist, err in frontier(archive):
                writer.writerow((repr(dist), repr(err)))
    except OSError as exc:
        log.error("cannot write outputs: %s", exc)
        return EXIT_IO
    print(
        f"best fit_error {result.fit_error:.6g} at disturbance "
        f"{result.disturbance:.6g} ({len(archive)} evaluations)"
    )
    return EXIT_OK


def cmd_serve(config: SessionConfig | None, bind: str) -> int:
    import uvicorn

    from .serve import create_app

    host, _, port = bind.rpartition(":")
    if not host:
        host = "127.0.0.1"
    webui_dir = os.environ.get("THREEBOX_WEBUI")
    if webui_dir and not Path(webui_dir).is_dir():
        log.warning("THREEBOX_WEBUI=%s is not a directory; ignoring", webui_dir)
        webui_dir = None
    app = create_app(default_config=config, webui_dir=webui_dir)
    uvicorn.run(app, host=host, port=int(port), log_level="info")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing.


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="threebox",
        description="Simulate, verify and analyze the three-box game; serve it interactively.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a batch session, write records + summary")
    sim.add_argument("--config", required=True, help="session config JSON")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, default=None, help="override config seed")
    sim.add_argument("--workers", type=int, default=1, help="parallel round workers")

    ver = sub.add_parser("verify", help="run the pre-game measurement verification")
    ver.add_argument("--config", required=True)
    ver.add_argument("--out", required=True)
    ver.add_argument("--seed", type=int, default=None)
    ver.add_argument("--pairs", type=int, default=9999, help="measurement pairs to run")

    ana = sub.add_parser("analyze", help="Leggett-Garg report over an existing record file")
    ana.add_argument("records", help="records.csv produced by simulate")
    ana.add_argument("--policy", choices=("fair", "adverse"), default="fair")
    ana.add_argument("--out", default=None, help="optional output directory for JSON report")

    scan = sub.add_parser("mrscan", help="search macrorealist strategies against target stats")
    scan.add_argument("--targets", required=True, help="target observables JSON")
    scan.add_argument("--budget", type=int, default=100_000)
    scan.add_argument("--out", required=True)
    scan.add_argument("--seed", type=int, default=0)
    scan.add_argument("--lock-identity", action="store_true",
                      help="restrict the search to non-disturbing measurements")

    srv = sub.add_parser("serve", help="start the interactive game service")
    srv.add_argument("--config", default=None, help="default session config JSON")
    srv.add_argument("--bind", default="127.0.0.1:8000")
    srv.add_argument("--seed", type=int, default=None)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("THREEBOX_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            config = load_config(args.config, args.seed)
            if config.context_schedule.kind is ScheduleKind.EXTERNAL:
                raise ConfigError("simulate cannot run an external context schedule")
            return cmd_simulate(config, args.out, workers=args.workers)
        if args.command == "verify":
            config = load_config(args.config, args.seed)
            return cmd_verify(config, args.out, n_pairs=args.pairs)
        if args.command == "analyze":
            return cmd_analyze(args.records, args.policy, args.out)
        if args.command == "mrscan":
            return cmd_mrscan(
                args.targets, args.budget, args.out,
                seed=args.seed, lock_identity=args.lock_identity,
            )
        if args.command == "serve":
            config = load_config(args.config, args.seed) if args.config else None
            return cmd_serve(config, args.bind)
        parser.error(f"unknown command {args.command!r}")
    except (ConfigError, NoiseError, ProtocolError, SearchError, StatsError, ValueError) as exc:
        log.error("configuration error: %s", exc)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
