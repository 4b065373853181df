"""Command-line interface: ``pooltest <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 input/parse error, 3 infeasible,
4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import random
import sys
import time
from pathlib import Path
from typing import Optional

from pooltest import errors
from pooltest.instances import (
    BUILTIN_NAMES,
    DEFAULT_LAMBDA,
    DEFAULT_SE,
    DEFAULT_SP,
    InstanceSpec,
    builtin_instance,
    builtin_paper_instances,
    chi_square_two_proportions,
    disaggregate,
    load_instance,
)
from pooltest.metrics import group_metrics
from pooltest.model import DesignConfig, Population, Subject, TestCharacteristics, validate_population
from pooltest.oracle import enumerate_all_partitions_optimum, enumerate_ordered_optimum
from pooltest.simulator import analytic_expectations, compare_to_analytic
from pooltest.solver import SolveResult, expected_gain_percent, minimum_feasible_budget, solve

SCHEMA = "pooltest-report/1"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_VERIFY = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _resolve_instance(args) -> tuple[str, Population, TestCharacteristics, float]:
    source = args.instance
    spec: Optional[InstanceSpec] = None
    if source in BUILTIN_NAMES:
        spec = builtin_instance(source)
    else:
        path = Path(source)
        if not path.exists():
            raise errors.InstanceIOError(
                f"{source!r} is neither a built-in instance ({', '.join(BUILTIN_NAMES)}) nor a file"
            )
        loaded = load_instance(path)
        if isinstance(loaded, InstanceSpec):
            spec = loaded
        else:
            population = loaded
            name = path.stem
    if spec is not None:
        population = disaggregate(spec)
        name = spec.name
        se = spec.tc.se if args.se is None else args.se
        sp = spec.tc.sp if args.sp is None else args.sp
        lam = spec.lam if args.lam is None else args.lam
    else:
        se = DEFAULT_SE if args.se is None else args.se
        sp = DEFAULT_SP if args.sp is None else args.sp
        lam = DEFAULT_LAMBDA if args.lam is None else args.lam
    return name, population, TestCharacteristics(se, sp), lam


def report_document(
    name: str,
    population: Population,
    tc: TestCharacteristics,
    lam: float,
    config: DesignConfig,
    result: SolveResult,
    seconds: float,
    gain: Optional[float] = None,
) -> dict:
    """JSON-ready solve report. Everything outside ``volatile`` is deterministic."""
    doc = {
        "schema": SCHEMA,
        "instance": name,
        "n_subjects": len(population),
        "parameters": {
            "se": tc.se,
            "sp": tc.sp,
            "lambda": lam,
            "max_group_size": config.max_group_size,
            "budget": config.budget,
        },
        "feasible": result.feasible,
    }
    if result.feasible:
        m = result.metrics
        groups = []
        for g in result.partition.groups:
            gm = group_metrics(g, tc, lam)
            groups.append(
                {
                    "members": list(g.ids),
                    "size": g.size,
                    "expected_fn": gm.expected_fn,
                    "expected_fp": gm.expected_fp,
                    "expected_tests": gm.expected_tests,
                    "cost": gm.cost,
                }
            )
        sizes = result.partition.sizes
        doc.update(
            {
                "objective": m.objective,
                "expected_fn": m.expected_fn,
                "expected_fp": m.expected_fp,
                "expected_tests": m.expected_tests,
                "n_groups": len(groups),
                "min_group_size": min(sizes),
                "max_group_size": max(sizes),
                "groups": groups,
            }
        )
    else:
        doc.update({"objective": None, "groups": []})
    if gain is not None:
        doc["gain_percent"] = gain
    doc["volatile"] = {"wall_clock_seconds": round(seconds, 3)}
    return doc


def _print_table(doc: dict, out) -> None:
    params = doc["parameters"]
    print(
        f"instance {doc['instance']}  N={doc['n_subjects']}  Se={params['se']} Sp={params['sp']} "
        f"lambda={params['lambda']} L={params['max_group_size']} B={params['budget']:g}",
        file=out,
    )
    if not doc["feasible"]:
        print("infeasible: no partition meets the size cap and budget", file=out)
        return
    print(
        f"objective {doc['objective']:.4f}  E[FN] {doc['expected_fn']:.4f}  "
        f"E[FP] {doc['expected_fp']:.4f}  E[T] {doc['expected_tests']:.4f}  groups {doc['n_groups']}",
        file=out,
    )
    if "gain_percent" in doc:
        print(f"expected gain {doc['gain_percent']:.2f}%", file=out)
    for k, g in enumerate(doc["groups"], start=1):
        members = g["members"]
        shown = ", ".join(members) if len(members) <= 4 else f"{members[0]} .. {members[-1]}"
        print(
            f"  {k:3d}  n={g['size']:<3d} E[T]={g['expected_tests']:.4f} cost={g['cost']:.5f}  [{shown}]",
            file=out,
        )
    print(f"({doc['volatile']['wall_clock_seconds']:.3f} s)", file=out)


def _emit(doc: dict, fmt: str, out) -> None:
    if fmt == "json":
        json.dump(doc, out, indent=2)
        out.write("\n")
    else:
        _print_table(doc, out)


def cmd_solve(args, out) -> int:
    name, population, tc, lam = _resolve_instance(args)
    budget = float(len(population)) if args.budget is None else args.budget
    config = DesignConfig(lam, args.max_group_size, budget)
    t0 = time.perf_counter()
    result = solve(population, tc, config)
    doc = report_document(name, population, tc, lam, config, result, time.perf_counter() - t0)
    _emit(doc, args.format, out)
    return EXIT_OK if result.feasible else EXIT_INFEASIBLE


def cmd_min_budget(args, out) -> int:
    name, population, tc, lam = _resolve_instance(args)
    t0 = time.perf_counter()
    try:
        search = minimum_feasible_budget(
            population, tc, lam, args.max_group_size, linear_scan=args.linear_scan
        )
    except errors.NoFeasibleBudget as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    seconds = time.perf_counter() - t0
    config = DesignConfig(lam, args.max_group_size, search.budget)
    gain = expected_gain_percent(len(population), search.budget)
    doc = report_document(name, population, tc, lam, config, search.result, seconds, gain)
    doc["b_min"] = search.budget
    doc["volatile"]["budget_probes"] = len(search.probes)
    _emit(doc, args.format, out)
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    name, population, tc, lam = _resolve_instance(args)
    budget = float(len(population)) if args.budget is None else args.budget
    config = DesignConfig(lam, args.max_group_size, budget)
    result = solve(population, tc, config)
    if not result.feasible:
        print("infeasible: nothing to simulate", file=sys.stderr)
        return EXIT_INFEASIBLE
    ok, rep = compare_to_analytic(result.partition, tc, args.replications, args.seed, z=args.z)
    analytic = analytic_expectations(result.partition, tc)
    doc = {
        "schema": SCHEMA,
        "instance": name,
        "replications": rep.replications,
        "seed": rep.seed,
        "z": args.z,
        "analytic": dict(zip(("fn", "fp", "tests"), analytic)),
        "empirical": dict(zip(("fn", "fp", "tests"), rep.means)),
        "stderr": dict(zip(("fn", "fp", "tests"), rep.stderrs)),
        "pass": ok,
    }
    if args.format == "json":
        json.dump(doc, out, indent=2)
        out.write("\n")
    else:
        print(f"instance {name}: {rep.replications} replications, seed {rep.seed}", file=out)
        for key, a, e, s in zip(("E[FN]", "E[FP]", "E[T]"), analytic, rep.means, rep.stderrs):
            z = (e - a) / s if s > 0 else 0.0
            print(f"  {key:6s} analytic {a:10.5f}  empirical {e:10.5f} +- {s:.5f}  (z={z:+.2f})", file=out)
        print("PASS" if ok else "FAIL", file=out)
    return EXIT_OK if ok else EXIT_VERIFY


def random_instance(rng: random.Random, n: int):
    """Random oracle-scale instance: risks in [0, 0.5], Se, Sp in [0.6, 1], integer budget."""
    risks = sorted(rng.uniform(0.0, 0.5) for _ in range(n))
    population = validate_population(Subject(f"s{k + 1}", p) for k, p in enumerate(risks))
    tc = TestCharacteristics(rng.uniform(0.6, 1.0), rng.uniform(0.6, 1.0))
    L = rng.randint(1, n)
    budget = rng.randint(math.ceil(n / L), n)
    return population, tc, DesignConfig(rng.uniform(0.0, 1.0), L, budget)


def cmd_verify(args, out) -> int:
    if not 1 <= args.n <= 12:
        raise UsageError("--n must be between 1 and 12")
    rng = random.Random(args.seed)
    failures = 0
    for trial in range(args.trials):
        n = rng.randint(max(1, min(2, args.n)), args.n)
        population, tc, config = random_instance(rng, n)
        res = solve(population, tc, config)
        orc = enumerate_ordered_optimum(population, tc, config)
        problems = []
        if res.feasible != orc.feasible:
            problems.append(f"feasibility solver={res.feasible} oracle={orc.feasible}")
        elif res.feasible and abs(res.objective - orc.best_objective) > 1e-9:
            problems.append(f"objective solver={res.objective!r} oracle={orc.best_objective!r}")
        if n <= 8:
            allp = enumerate_all_partitions_optimum(population, tc, config)
            if allp.feasible != orc.feasible or (
                orc.feasible and abs(allp.best_objective - orc.best_objective) > 1e-9
            ):
                problems.append(
                    f"ordered optimum {orc.best_objective!r} != set-partition optimum {allp.best_objective!r}"
                )
        status = "ok" if not problems else "MISMATCH " + "; ".join(problems)
        print(
            f"trial {trial:3d} n={n:2d} L={config.max_group_size:2d} B={config.budget:g} "
            f"obj={res.objective:.6g} {status}",
            file=out,
        )
        failures += bool(problems)
    print(f"{args.trials - failures}/{args.trials} trials agree", file=out)
    return EXIT_OK if failures == 0 else EXIT_VERIFY


def paper_table_rows() -> list[dict]:
    """Minimal budgets at L=8 and L=32, then L=32 at the L=8 budget, for the six built-ins."""
    rows = []
    for spec in builtin_paper_instances():
        population = disaggregate(spec)
        n = len(population)
        row = {"instance": spec.name, "n": n, "min_risk": population[0].risk, "max_risk": population[-1].risk}
        for L in (8, 32):
            search = minimum_feasible_budget(population, spec.tc, spec.lam, L)
            t0 = time.perf_counter()
            res = solve(population, spec.tc, DesignConfig(spec.lam, L, search.budget))
            row[f"L{L}"] = _row_cells(n, search.budget, res, time.perf_counter() - t0)
        b8 = row["L8"]["B"]
        t0 = time.perf_counter()
        res = solve(population, spec.tc, DesignConfig(spec.lam, 32, b8))
        row["L32_at_B8"] = _row_cells(n, b8, res, time.perf_counter() - t0)
        rows.append(row)
    return rows


def _row_cells(n: int, budget: int, res: SolveResult, seconds: float) -> dict:
    sizes = res.partition.sizes
    return {
        "B": budget,
        "objVal": res.objective,
        "G": len(sizes),
        "minSubG": min(sizes),
        "maxSubG": max(sizes),
        "gain": expected_gain_percent(n, budget),
        "cpu": seconds,
    }


def cmd_paper_tables(args, out) -> int:
    rows = paper_table_rows()
    if args.format == "json":
        json.dump({"schema": SCHEMA, "rows": rows}, out, indent=2)
        out.write("\n")
        return EXIT_OK
    head = f"{'inst':6s} {'N':>4s} {'minR':>6s} {'maxR':>6s}  {'B':>4s} {'objVal':>7s} {'G':>3s} {'min':>3s} {'max':>3s} {'gain%':>6s} {'CPU(s)':>7s}"
    for title, keys in (
        ("Minimal budget, L = 8 | L = 32", ("L8", "L32")),
        ("Same budget (L = 8 minimum), L = 8 | L = 32", ("L8", "L32_at_B8")),
    ):
        print(title, file=out)
        print(head, file=out)
        for row in rows:
            for key in keys:
                c = row[key]
                print(
                    f"{row['instance']:6s} {row['n']:4d} {row['min_risk']:6.3f} {row['max_risk']:6.3f}  "
                    f"{c['B']:4d} {c['objVal']:7.3f} {c['G']:3d} {c['minSubG']:3d} {c['maxSubG']:3d} "
                    f"{c['gain']:6.2f} {c['cpu']:7.3f}   L={key[1:3]}",
                    file=out,
                )
        print(file=out)
    return EXIT_OK


def cmd_chisq(args, out) -> int:
    res = chi_square_two_proportions(args.a_pos, args.a_tot, args.b_pos, args.b_tot)
    doc = {
        "schema": SCHEMA,
        "statistic": res.statistic,
        "p_value": res.p_value,
        "significant_at_5pct": res.significant_at_5pct,
        "degenerate": res.degenerate,
    }
    if args.format == "json":
        json.dump(doc, out, indent=2)
        out.write("\n")
    else:
        note = " (degenerate table)" if res.degenerate else ""
        verdict = "significant" if res.significant_at_5pct else "not significant"
        print(f"chi2 = {res.statistic:.4f}  p = {res.p_value:.4g}  {verdict} at 5%{note}", file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pooltest", description="Group testing design via constrained shortest path.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def instance_args(p, budget=True):
        p.add_argument("--instance", required=True, help=f"built-in name ({', '.join(BUILTIN_NAMES)}) or a .csv/.json path")
        p.add_argument("--se", type=float, help=f"sensitivity (default {DEFAULT_SE})")
        p.add_argument("--sp", type=float, help=f"specificity (default {DEFAULT_SP})")
        p.add_argument("--lambda", dest="lam", type=float, help=f"weight of false negatives (default {DEFAULT_LAMBDA})")
        p.add_argument("--max-group-size", type=int, default=8)
        if budget:
            p.add_argument("--budget", type=float, help="expected-test budget (default: N)")
        p.add_argument("--format", choices=("json", "table"), default="table")

    p = sub.add_parser("solve", help="optimal partition for one budget")
    instance_args(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("min-budget", help="smallest feasible integer budget")
    instance_args(p, budget=False)
    p.add_argument("--linear-scan", action="store_true", help="decrement from N-1 instead of bisecting")
    p.set_defaults(func=cmd_min_budget)

    p = sub.add_parser("simulate", help="Monte Carlo check of the optimal partition")
    instance_args(p)
    p.add_argument("--replications", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--z", type=float, default=4.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="randomised solver-vs-enumeration cross-check")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("paper-tables", help="minimal-budget and same-budget tables for the built-ins")
    p.add_argument("--format", choices=("json", "table"), default="table")
    p.set_defaults(func=cmd_paper_tables)

    p = sub.add_parser("chisq", help="chi-square test of two proportions")
    p.add_argument("--a-pos", type=int, required=True)
    p.add_argument("--a-tot", type=int, required=True)
    p.add_argument("--b-pos", type=int, required=True)
    p.add_argument("--b-tot", type=int, required=True)
    p.add_argument("--format", choices=("json", "table"), default="table")
    p.set_defaults(func=cmd_chisq)
    return parser


def run(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (errors.ParseError, errors.SchemaError, errors.InstanceIOError, errors.RiskOutOfRange,
            errors.EmptyPopulation) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
