"""Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 theorem-suite failure, 3 replay mismatch.
Each subcommand prints one JSON summary line on stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import sim, theorems
from .errors import ConfigError

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_THEOREMS = 2
EXIT_REPLAY = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="patchwork", description="Patchwork quantum money simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, scenario_required=True):
        p.add_argument("--scenario", type=Path, required=scenario_required, help="scenario JSON file")
        p.add_argument("--seed", type=int, help="seed override (falls back to $PATCHWORK_SEED)")
        p.add_argument("--trials", type=int, help="trial count override")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--format", choices=["json", "csv", "both"], default="json")

    common(sub.add_parser("run", help="run one trial of a scenario"))
    common(sub.add_parser("campaign", help="run all trials of a scenario"))
    common(sub.add_parser("sweep", help="evaluate the profit model over the scenario's grid"))

    p = sub.add_parser("verify-theorems", help="run the bundled acceptance checks")
    p.add_argument("--seed", type=int)
    p.add_argument("--scale", type=float, default=1.0,
                   help="multiply sample sizes (below 1 for a quick smoke run)")
    p.add_argument("--out", type=Path, default=None, help="write results JSON here")

    p = sub.add_parser("replay", help="re-run a report and diff it against the recording")
    p.add_argument("report", type=Path)
    return parser


def _seed(args, default: int | None = None) -> int | None:
    if args.seed is not None:
        seed = args.seed
    elif os.environ.get("PATCHWORK_SEED"):
        try:
            seed = int(os.environ["PATCHWORK_SEED"])
        except ValueError:
            raise ConfigError("PATCHWORK_SEED must be an integer") from None
    else:
        return default
    if not 0 <= seed < 2**64:
        raise ConfigError(f"seed {seed} is outside 0..2^64-1")
    return seed


def _load(args) -> sim.ScenarioConfig:
    config = sim.load_config(args.scenario)
    updates = {}
    seed = _seed(args)
    if seed is not None:
        updates["seed"] = seed
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials must be positive")
        updates["trials"] = args.trials
    if updates:
        config = sim.load_config({**config.model_dump(mode="json"), **updates})
    return config


def _summary(**fields) -> None:
    print(json.dumps(fields, sort_keys=True))


def _cmd_simulate(args) -> int:
    config = _load(args)
    report = sim.run_scenario(config) if args.command == "run" else sim.run_campaign(config)
    paths = []
    if args.format in ("json", "both"):
        paths.append(sim.write_report(report, args.out, stem=config.name))
    if args.format in ("csv", "both"):
        args.out.mkdir(parents=True, exist_ok=True)
        path = args.out / f"{config.name}_trials.csv"
        path.write_text(sim.trials_csv(report))
        paths.append(path)
    agg = report["body"]["aggregate"]
    _summary(status="ok", command=args.command, seed=config.seed, trials=agg["trials"],
             report=[str(p) for p in paths], fraud_events=agg["fraud_events"])
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = _load(args)
    rows = sim.sweep(config)
    args.out.mkdir(parents=True, exist_ok=True)
    paths = []
    if args.format in ("csv", "both"):
        path = args.out / f"{config.name}_sweep.csv"
        path.write_text(sim.sweep_csv(rows))
        paths.append(path)
    if args.format in ("json", "both"):
        path = args.out / f"{config.name}_sweep.json"
        path.write_text(json.dumps({"config": config.model_dump(mode="json"), "rows": rows},
                                   sort_keys=True, indent=1))
        paths.append(path)
    _summary(status="ok", command="sweep", seed=config.seed, points=len(rows),
             report=[str(p) for p in paths])
    return EXIT_OK


def _cmd_verify(args) -> int:
    seed = _seed(args, default=42)
    if args.scale <= 0:
        raise ConfigError("--scale must be positive")
    results = theorems.run_suite(seed=seed, scale=args.scale,
                                 echo=lambda line: print(line, file=sys.stderr))
    failed = [r.name for r in results if not r.passed]
    report = None
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        report = args.out / "theorems.json"
        report.write_text(json.dumps(
            {"seed": seed, "scale": args.scale,
             "results": [{"name": r.name, "passed": r.passed, "details": r.details} for r in results]},
            sort_keys=True, indent=1))
    _summary(status="ok" if not failed else "fail", command="verify-theorems", seed=seed,
             checks=len(results), failed=failed, report=str(report) if report else None)
    return EXIT_OK if not failed else EXIT_THEOREMS


def _cmd_replay(args) -> int:
    try:
        report = json.loads(args.report.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read report: {exc}") from None
    if "body" not in report or "config" not in report.get("body", {}):
        raise ConfigError("report has no embedded config")
    same, diff = sim.replay(report)
    if diff:
        print(diff, file=sys.stderr)
    _summary(status="ok" if same else "mismatch", command="replay", seed=report["body"]["seed"],
             report=str(args.report))
    return EXIT_OK if same else EXIT_REPLAY


COMMANDS = {"run": _cmd_simulate, "campaign": _cmd_simulate, "sweep": _cmd_sweep,
            "verify-theorems": _cmd_verify, "replay": _cmd_replay}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"patchwork: {exc}", file=sys.stderr)
        _summary(status="invalid", command=args.command, seed=getattr(args, "seed", None))
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
