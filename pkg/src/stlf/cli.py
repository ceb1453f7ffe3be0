"""Command-line front end.

Exit codes: 0 satisfied / not falsified, 1 falsified, 2 inconclusive
(robustness exactly 0), 3 and above for errors.
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

from .campaign import Campaign, ConfigError, Scenario
from .covering import CoverageError, MixedStrengthSpec, generate_ca, write_ca
from .monitor import monitor
from .optimize import CampaignResult, SearchError, SimulationError, robustness_heatmap
from .requirements import RequirementError
from .scenarios import ScenarioError
from .stl import ParseError, parse_formula
from .trace import ChannelError, TraceError, read_trace, validate_trace, write_trace

EXIT_OK, EXIT_FALSIFIED, EXIT_INCONCLUSIVE, EXIT_ERROR, EXIT_USAGE = 0, 1, 2, 3, 4

log = logging.getLogger("stlf")

_EXPECTED_ERRORS = (
    ConfigError,
    CoverageError,
    ParseError,
    TraceError,
    ChannelError,
    ScenarioError,
    SearchError,
    RequirementError,
    SimulationError,
    OSError,
    json.JSONDecodeError,
)


def _json_num(x: float):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return x


def _print(record: dict) -> None:
    print(json.dumps(record, sort_keys=True))


def _read_formula(arg: str) -> str:
    if arg.startswith("@"):
        return Path(arg[1:]).read_text()
    return arg


def cmd_monitor(args) -> int:
    tr = read_trace(args.trace)
    problems = validate_trace(tr)
    if problems:
        raise TraceError("; ".join(problems))
    f = parse_formula(_read_formula(args.formula), tr.space)
    res = monitor(f, tr)
    _print(res.to_json())
    if res.inconclusive:
        return EXIT_INCONCLUSIVE
    return EXIT_OK if res.robustness > 0 else EXIT_FALSIFIED


def cmd_generate_ca(args) -> int:
    spec = MixedStrengthSpec.from_json(json.loads(Path(args.config).read_text()))
    ca = generate_ca(spec, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report = write_ca(ca, out)
    _print({"rows": len(ca), "covered": report.covered, "required": report.required, "percent": report.percent})
    return EXIT_OK if report.complete else EXIT_ERROR


def _write_campaign(result: CampaignResult, campaign: Campaign, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with (out / "evaluations.jsonl").open("w") as fh:
        for ev in result.evaluations:
            fh.write(
                json.dumps(
                    {
                        "id": ev.trace_id,
                        "phase": ev.phase,
                        "point": ev.point,
                        "robustness": _json_num(ev.robustness),
                        "trace": f"trace_{ev.trace_id}",
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    summary = result.summary()
    summary["best_robustness"] = _json_num(summary["best_robustness"])
    summary["min_envelope"] = [_json_num(float(v)) for v in result.min_envelope]
    best = result.best
    if best is not None:
        write_trace(campaign.scenario(best.point), out / "best_trace.csv")
        summary["best_trace"] = "best_trace.csv"
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def cmd_falsify(args) -> int:
    campaign = Campaign.load(args.config)
    result = campaign.run(seed=args.seed, ca_file=args.ca, jobs=args.jobs)
    _write_campaign(result, campaign, Path(args.out))
    summary = result.summary()
    _print({k: _json_num(v) if isinstance(v, float) else v for k, v in summary.items() if k != "best_point"})
    return EXIT_FALSIFIED if result.falsified else EXIT_OK


def cmd_heatmap(args) -> int:
    cfg = json.loads(Path(args.config).read_text())
    campaign = Campaign.from_json({"method": {}, **cfg})
    space, objective = campaign.space, campaign.objective()
    hm_cfg = cfg.get("heatmap", {})
    shape = tuple(hm_cfg.get("grid", (20, 20)))
    hm = robustness_heatmap(space, objective, shape, hm_cfg.get("fixed", {}), jobs=args.jobs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        for row, bad in zip(hm.values, hm.invalid):
            w.writerow(["nan" if b else f"{v:.17g}" for v, b in zip(row, bad)])
    meta = {
        "x": {"name": hm.x_name, "values": hm.x_values.tolist()},
        "y": {"name": hm.y_name, "values": hm.y_values.tolist()},
        "rows_follow": hm.y_name,
        "counterexamples": int(hm.counterexamples.sum()),
        "invalid": int(hm.invalid.sum()),
    }
    out.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")
    _print({"cells": int(hm.values.size), "counterexamples": meta["counterexamples"], "invalid": meta["invalid"]})
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = json.loads(Path(args.config).read_text())
    scenario = Scenario.from_json(cfg["scenario"] if "scenario" in cfg else cfg)
    point = json.loads(args.point) if args.point else {}
    tr = scenario(point)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trace(tr, out)
    _print({"samples": len(tr), "duration": tr.duration, "out": str(out)})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stlf", description="STL monitoring, covering arrays and falsification")
    sub = ap.add_subparsers(dest="command", required=True)

    m = sub.add_parser("monitor", help="evaluate a formula on a trace CSV")
    m.add_argument("--formula", required=True, help="formula text, or @file")
    m.add_argument("--trace", required=True, help="trace CSV (sidecar JSON alongside)")
    m.set_defaults(func=cmd_monitor)

    g = sub.add_parser("generate-ca", help="generate a covering array from a JSON spec")
    g.add_argument("--config", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate_ca)

    f = sub.add_parser("falsify", help="run a falsification campaign")
    f.add_argument("--config", required=True)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", required=True, help="output directory")
    f.add_argument("--ca", help="covering-array CSV for method ca+sa")
    f.add_argument("--jobs", type=int, default=1)
    f.set_defaults(func=cmd_falsify)

    h = sub.add_parser("heatmap", help="robustness over a 2-D grid")
    h.add_argument("--config", required=True)
    h.add_argument("--out", required=True)
    h.add_argument("--jobs", type=int, default=1)
    h.set_defaults(func=cmd_heatmap)

    s = sub.add_parser("simulate", help="dump a raw scenario trace")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--point", help="JSON object of search-variable values")
    s.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("STLF_LOG", "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except _EXPECTED_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
