"""Command-line experiment harness.

    udsched run --workflow pipeline:100 --theta 0.1,0.5,0.9 --reps 30 --out results/
    udsched bounds --workflow montage.xml
    udsched validate montage.xml

Settings come from an optional ``key = value`` config file with sections
[workflow], [catalog], [uds], [flc], [sim] and [sweep]; every key can be
overridden by a flag of the same name.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
from dataclasses import dataclass
from typing import Callable, Optional

from .experiment import ExperimentSpec, load_workflow, summary_csv, sweep
from .flc import FuzzyController, FuzzyRuleBase, Partition, Rule, Term, TriangularMf
from .resources import Variation, default_catalog, load_catalog
from .schedcore import Problem, plan_cost, plan_makespan
from .simulator import SimConfig
from .uds import static_reference
from .workflow import SyntheticConfig, WorkflowError, normalize_entries_exits, parse_dax

logger = logging.getLogger("udsched")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _strings(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.replace("\n", ",").split(",") if x.strip())


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Key:
    section: str
    parse: Callable
    default: object
    help: str = ""


KEYS: dict[str, Key] = {
    "workflow": Key("workflow", _strings, (), "DAX path or pattern:n, comma separated"),
    "demand_min": Key("workflow", float, 1_000.0, "synthetic task demand lower bound (MI)"),
    "demand_max": Key("workflow", float, 100_000.0, "synthetic task demand upper bound (MI)"),
    "data_min": Key("workflow", float, 8.0, "synthetic edge size lower bound (Mbit)"),
    "data_max": Key("workflow", float, 800.0, "synthetic edge size upper bound (Mbit)"),
    "catalog": Key("catalog", str, None, "catalog CSV replacing the built-in a1 family"),
    "base_mips": Key("catalog", float, 1000.0, "MIPS per vCPU"),
    "theta": Key("uds", _floats, (0.5,), "PMI threshold(s)"),
    "a": Key("uds", _floats, (2.0,), "makespan upper-bound scalar(s)"),
    "b": Key("uds", _floats, (2.0,), "cost upper-bound scalar(s)"),
    "low": Key("flc", _floats, (0.0, 0.0, 0.5), "Low triangle left,peak,right"),
    "medium": Key("flc", _floats, (0.0, 0.5, 1.0), "Medium triangle"),
    "high": Key("flc", _floats, (0.5, 1.0, 1.0), "High triangle"),
    "rules": Key("flc", str, None, "rules as 'm,c,out; ...' with any for a free input"),
    "slot_seconds": Key("sim", float, 1.0, ""),
    "billing_cycle": Key("sim", float, 3600.0, ""),
    "bandwidth_mbps": Key("sim", float, 20.0, ""),
    "provisioning_seconds": Key("sim", float, 96.9, ""),
    "variation": Key("sim", _bool, True, "performance variation on/off"),
    "variation_mean": Key("sim", float, 0.095, ""),
    "variation_stdev": Key("sim", float, 0.05, ""),
    "variation_cap": Key("sim", float, 0.19, ""),
    "max_sim_seconds": Key("sim", float, 30 * 24 * 3600.0, "watchdog on simulated time"),
    "reps": Key("sweep", int, 1, "replications per sweep point"),
    "seed": Key("sweep", int, 0, "master seed"),
    "out": Key("sweep", str, "results", "output directory"),
    "trace": Key("sweep", _bool, False, "write trace-<id>.csv per run"),
    "jobs": Key("sweep", int, 1, "worker processes"),
}


def parse_rules(text: str) -> FuzzyRuleBase:
    rules = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        m, c, out = (x.strip().lower() for x in chunk.split(","))
        rules.append(Rule(None if m == "any" else Term(m), None if c == "any" else Term(c), Term(out)))
    return FuzzyRuleBase(tuple(rules))


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, the config file and command-line flags (flags win)."""
    values = {k: key.default for k, key in KEYS.items()}
    if getattr(args, "config", None):
        cp = configparser.ConfigParser()
        if not cp.read(args.config, encoding="utf-8"):
            raise FileNotFoundError(f"config file not found: {args.config}")
        for name, key in KEYS.items():
            if cp.has_option(key.section, name):
                values[name] = key.parse(cp.get(key.section, name))
        unknown = [f"[{s}] {o}" for s in cp.sections() for o in cp.options(s) if o not in KEYS]
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    for name, key in KEYS.items():
        raw = getattr(args, name, None)
        if raw is not None:
            values[name] = raw if isinstance(raw, bool) else key.parse(raw)
    return values


def build_spec(values: dict) -> ExperimentSpec:
    catalog = (load_catalog(values["catalog"], values["base_mips"]) if values["catalog"]
               else default_catalog(values["base_mips"]))
    sim = SimConfig(values["slot_seconds"], values["billing_cycle"], values["bandwidth_mbps"],
                    values["provisioning_seconds"],
                    Variation(values["variation"], values["variation_mean"],
                              values["variation_stdev"], values["variation_cap"]),
                    0, values["max_sim_seconds"])
    partition = Partition(*(TriangularMf(*values[k]) for k in ("low", "medium", "high")))
    rulebase = parse_rules(values["rules"]) if values["rules"] else FuzzyRuleBase()
    controller = FuzzyController(rulebase, partition, partition)
    synthetic = SyntheticConfig((values["demand_min"], values["demand_max"]),
                                (values["data_min"], values["data_max"]))
    if not values["workflow"]:
        raise ValueError("no workflow given (--workflow or [workflow] workflow)")
    return ExperimentSpec(tuple(values["workflow"]), tuple(values["theta"]), tuple(values["a"]),
                          tuple(values["b"]), values["reps"], values["seed"], catalog, synthetic,
                          sim, controller)


def cmd_run(args) -> int:
    values = resolve(args)
    spec = build_spec(values)
    out = values["out"]
    os.makedirs(out, exist_ok=True)
    failures = []
    good = []
    for wf in spec.workflows:
        try:
            load_workflow(wf, spec)
            good.append(wf)
        except (OSError, WorkflowError, ValueError) as exc:
            failures.append(f"{wf}: {exc}")
    outcomes = []
    if good:
        runnable = ExperimentSpec(tuple(good), spec.thetas, spec.a_values, spec.b_values,
                                  spec.replications, spec.seed, spec.catalog, spec.synthetic,
                                  spec.sim, spec.controller)
        outcomes = sweep(runnable, jobs=values["jobs"])
    failures += [o.error for o in outcomes if o.error]
    with open(os.path.join(out, "summary.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(summary_csv(outcomes))
    if values["trace"]:
        for o in outcomes:
            if o.row is None:
                continue
            r = o.row
            name = (f"trace-{_safe(r['workflow'])}-t{r['theta']}-a{r['a']}-b{r['b']}-r{r['rep']}.csv")
            with open(os.path.join(out, name), "w", encoding="utf-8", newline="") as fh:
                fh.write(o.trace)
    n_ok = sum(o.row is not None for o in outcomes)
    print(f"{n_ok} runs written to {os.path.join(out, 'summary.csv')}")
    for f in failures:
        print(f"FAILED {f}", file=sys.stderr)
    return 1 if failures else 0


def _safe(text: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in os.path.basename(text))


def cmd_bounds(args) -> int:
    values = resolve(args)
    spec = build_spec(values)
    status = 0
    for wf in spec.workflows:
        try:
            prob = Problem(load_workflow(wf, spec), spec.catalog, spec.sim.timing)
        except (OSError, WorkflowError) as exc:
            print(f"{wf}: {exc}", file=sys.stderr)
            status = 1
            continue
        ref = static_reference(prob)
        print(f"workflow {wf}: {len(prob.real)} tasks")
        print(f"  m_lower = {ref.m_lower:.6g} s")
        print(f"  c_lower = {ref.c_lower:.6g}")
        for name, plan in (("heft", ref.heft), ("gc", ref.gc)):
            used = sorted({p.vm for p in plan.placements})
            rel = sum(p.pricing.value == "reliable" for p in plan.placements)
            print(f"  {name}: makespan {plan_makespan(plan):.6g} s, cost {plan_cost(plan, spec.catalog):.6g}, "
                  f"{len(used)} VMs ({', '.join(used)}), {rel}/{len(plan.placements)} tasks reliable")
    return status


def cmd_validate(args) -> int:
    catalog = (load_catalog(args.catalog, args.base_mips) if args.catalog
               else default_catalog(args.base_mips))
    try:
        with open(args.path, encoding="utf-8") as fh:
            raw = parse_dax(fh.read(), catalog.slowest_speed)
    except (OSError, WorkflowError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    entries, exits = raw.entries(), raw.exits()
    isolated = [t for t in raw.tasks if not raw.predecessors(t) and not raw.successors(t)]
    if isolated and len(raw) > 1:
        print(f"warning: isolated tasks {', '.join(isolated[:10])} joined via pseudo tasks")
    if len(entries) > 1 or len(exits) > 1:
        print(f"note: {len(entries)} entry / {len(exits)} exit tasks; pseudo tasks inserted")
    graph = normalize_entries_exits(raw)
    print(f"ok: {len(raw.tasks)} tasks, {len(raw.edges)} edges "
          f"({len(graph.tasks)} tasks, {len(graph.edges)} edges after normalization)")
    return 0


def _add_keys(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    for name, key in KEYS.items():
        if key.parse is _bool:
            p.add_argument(f"--{name}", dest=name, default=None, nargs="?", const="true", help=key.help)
        else:
            p.add_argument(f"--{name}", dest=name, default=None, help=key.help or None)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="udsched", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a seeded parameter sweep")
    _add_keys(run)
    run.set_defaults(func=cmd_run)
    bounds = sub.add_parser("bounds", help="print the static makespan/cost lower bounds")
    _add_keys(bounds)
    bounds.set_defaults(func=cmd_bounds)
    val = sub.add_parser("validate", help="check a DAX file")
    val.add_argument("path")
    val.add_argument("--catalog")
    val.add_argument("--base_mips", type=float, default=1000.0)
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
