"""Experiment harness: generate -> run -> verify -> report.

Exit status is 0 when every enabled check passes, 1 on a check failure and
2 on a malformed spec or an I/O problem.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import random
import statistics
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .congest_sim import BandwidthViolation, derive_seed
from .graph_core import (
    Graph,
    GraphError,
    assign_random_weights,
    diameter,
    generate_graph,
    load_edge_list,
    sequential_wbfs_tree,
    write_edge_list,
)
from .spanner import (
    PathBuyParams,
    distributed_6ap,
    fit_round_bound,
    round_scale,
    sequential_6ap,
    size_scale,
)
from .verify import check_detection, check_stretch, check_wbfs_tree, true_proximity_lists, write_violations
from .wbfs import IncompleteRun, check_round_invariants, last_change_round, run_wbfs, solve_detection

log = logging.getLogger("congest_spanner")

COMMANDS = ("wbfs", "detection", "spanner-seq", "spanner-dist", "verify", "bench", "trend")


class SpecError(ValueError):
    """Invalid experiment specification (exit status 2)."""


@dataclass
class ExperimentSpec:
    command: str
    graph: str = "gen:gnp:n=50,p=0.2"
    seeds: list[int] = field(default_factory=lambda: [0])
    c: float = 3.0
    sources: str = "0"
    rounds: int | None = None
    d: int | None = None
    k: int | None = None
    beta: int = 6
    verify: bool = False
    spanner: str | None = None
    sizes: list[int] = field(default_factory=list)
    p: float = 0.1
    distributed: bool = False
    trace: str | None = None
    out: str | None = None
    format: str = "json"
    export: str | None = None

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise SpecError(f"unknown command {self.command!r}")
        if not self.seeds:
            raise SpecError("seed list is empty")
        if self.format not in ("json", "csv"):
            raise SpecError(f"unknown format {self.format!r}")
        if self.command == "detection" and (self.d is None or self.k is None):
            raise SpecError("detection needs --d and --k")
        if self.command == "trend":
            if not self.sizes:
                raise SpecError("trend needs --sizes")
            if self.sizes != sorted(self.sizes):
                raise SpecError("--sizes must be ascending")
        if self.rounds is not None and self.rounds < 0:
            raise SpecError("--rounds must be non-negative")


# -- parsing helpers ----------------------------------------------------------

def parse_int_list(text: str) -> list[int]:
    """``"0-4,7"`` -> ``[0, 1, 2, 3, 4, 7]``."""
    out: list[int] = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def load_graph(source: str, seed: int) -> Graph:
    """``gen:<kind>:k=v,...`` (optional ``W=<max>`` for random weights) or a file path."""
    if not source.startswith("gen:"):
        return load_edge_list(source)
    _, kind, *rest = source.split(":", 2)
    params: dict = {}
    if rest and rest[0]:
        for item in rest[0].split(","):
            key, _, value = item.partition("=")
            if not _:
                raise SpecError(f"bad generator parameter {item!r}")
            params[key.strip()] = float(value) if key.strip() == "p" else int(value)
    max_w = params.pop("W", None)
    g = generate_graph(kind, params, seed=seed)
    if max_w is not None:
        g = assign_random_weights(g, max_w, derive_seed("weights", seed))
    return g


def pick_sources(spec: str, g: Graph, seed: int) -> list[int]:
    if spec == "all":
        return list(range(g.n))
    if spec.startswith("random:"):
        k = int(spec.split(":", 1)[1])
        if not 1 <= k <= g.n:
            raise SpecError(f"cannot pick {k} sources from {g.n} nodes")
        return sorted(random.Random(derive_seed("sources", seed)).sample(range(g.n), k))
    src = sorted(set(parse_int_list(spec)))
    if not src or not all(0 <= s < g.n for s in src):
        raise SpecError(f"sources {spec!r} invalid for n={g.n}")
    return src


# -- commands -----------------------------------------------------------------

def _trace_path(base: str | None, seed: int, many: bool) -> str | None:
    if base is None or not many:
        return base
    p = Path(base)
    return str(p.with_name(f"{p.stem}.seed{seed}{p.suffix}"))


def _run_wbfs(spec: ExperimentSpec, seed: int) -> tuple[dict, bool]:
    g = load_graph(spec.graph, seed)
    src = pick_sources(spec.sources, g, seed)
    D = diameter(g)
    budget = len(src) + D - 1
    rounds = budget if spec.rounds is None else spec.rounds
    states, trace = run_wbfs(g, src, rounds, record_trace=True, seed=seed)
    path = _trace_path(spec.trace, seed, len(spec.seeds) > 1)
    if path:
        trace.write_jsonl(path)
    row = {
        "seed": seed, "n": g.n, "m": g.m, "sources": len(src), "diameter": D,
        "budget": budget, "rounds": rounds, "round_stabilized": last_change_round(trace),
        "messages": trace.message_count, "max_bits": trace.max_bits, "budget_bits": trace.budget_bits,
    }
    ok = True
    if spec.verify:
        truth = true_proximity_lists(g, src)
        wrong = sum(1 for v, st in enumerate(states) if st.order != truth[v])
        invariants = check_round_invariants(trace)
        row.update(nodes_wrong=wrong, invariant_violations=len(invariants))
        ok = wrong == 0 and not invariants
    return row, ok


def _run_detection(spec: ExperimentSpec, seed: int) -> tuple[dict, bool]:
    g = load_graph(spec.graph, seed)
    src = pick_sources(spec.sources, g, seed)
    answer = solve_detection(g, src, spec.d, spec.k, seed=seed)
    row = {"seed": seed, "n": g.n, "m": g.m, "sources": len(src), "d": spec.d, "k": spec.k,
           "entries": sum(len(a[0]) for a in answer.values())}
    ok = True
    if spec.verify:
        viol = check_detection(g, src, spec.d, spec.k, answer)
        row["violations"] = len(viol)
        ok = not viol
    return row, ok


def _run_spanner(spec: ExperimentSpec, seed: int, distributed: bool) -> tuple[dict, bool]:
    g = load_graph(spec.graph, seed)
    params = PathBuyParams(g.n, spec.c)
    if distributed:
        from .congest_sim import SimConfig

        cfg = SimConfig(max_rounds=0, record_trace=spec.trace is not None)
        result, trace = distributed_6ap(g, params, seed, cfg)
        path = _trace_path(spec.trace, seed, len(spec.seeds) > 1)
        if path:
            trace.write_jsonl(path)
    else:
        result = sequential_6ap(g, params, seed)
    stretch = None
    ok = True
    if spec.verify:
        chk = check_stretch(g, result.edges, spec.beta)
        stretch, ok = chk.max_excess, chk.passed
    if spec.export:
        out = _trace_path(spec.export, seed, len(spec.seeds) > 1)
        write_edge_list(g.subgraph(result.edges), out, comment=f"spanner seed={seed} c={spec.c}")
    return result.report(g, stretch), ok


def _run_verify(spec: ExperimentSpec, seed: int) -> tuple[dict, bool]:
    g = load_graph(spec.graph, seed)
    if spec.spanner:
        h = load_edge_list(spec.spanner)
        if h.n != g.n:
            raise SpecError(f"spanner has n={h.n}, graph has n={g.n}")
        chk = check_stretch(g, h.edge_set(), spec.beta)
        excess = chk.max_excess if chk.max_excess != float("inf") else None
        return {"seed": seed, "n": g.n, "edges_H": h.m, "stretch_max": excess,
                "worst_pair": chk.worst_pair, "beta": spec.beta}, chk.passed
    src = pick_sources(spec.sources, g, seed)
    viol = [v for s in src for v in check_wbfs_tree(g, sequential_wbfs_tree(g, s))]
    if viol and spec.trace:
        with open(spec.trace, "w", encoding="utf-8") as fh:
            write_violations(viol, fh)
    return {"seed": seed, "n": g.n, "sources": len(src), "violations": len(viol)}, not viol


def _run_bench(spec: ExperimentSpec, seed: int) -> tuple[dict, bool]:
    t0 = time.perf_counter()
    row, ok = _run_spanner(spec, seed, distributed=True)
    row["wall_time"] = round(time.perf_counter() - t0, 4)
    return row, ok


def trend_report(sizes: list[int], seeds: list[int], c: float, p: float = 0.1,
                 distributed: bool = False) -> tuple[list[dict], dict]:
    """Per-size means and ratios, plus the fitted constants ``C`` (and ``a``, ``b``)."""
    if not seeds:
        raise SpecError("seed list is empty")
    rows, points = [], []
    for n in sizes:
        sizes_h, rounds = [], []
        for seed in seeds:
            g = generate_graph("gnp", n=n, p=p, seed=seed)
            if distributed:
                res, _ = distributed_6ap(g, c, seed)
                rounds.append(res.rounds)
                points.append((n, diameter(g), res.rounds))
            else:
                res = sequential_6ap(g, c, seed)
            sizes_h.append(res.size)
        mean_h = statistics.fmean(sizes_h)
        rows.append({
            "n": n,
            "mean_H": round(mean_h, 4),
            "H_ratio": round(mean_h / size_scale(n), 6),
            "mean_rounds": round(statistics.fmean(rounds), 4) if rounds else None,
            "rounds_ratio": None,
        })
    fit = {"C": max(r["H_ratio"] for r in rows),
           "H_ratio_spread": round(max(r["H_ratio"] for r in rows) / min(r["H_ratio"] for r in rows), 6)}
    if distributed:
        a, b = fit_round_bound(points)
        fit.update(a=a, b=b)
        for row in rows:
            mine = [(D, r) for n, D, r in points if n == row["n"]]
            row["rounds_ratio"] = round(
                statistics.fmean(r / (a * round_scale(row["n"]) + b * D) for D, r in mine), 6)
    return rows, fit


RUNNERS = {
    "wbfs": _run_wbfs,
    "detection": _run_detection,
    "spanner-seq": lambda s, seed: _run_spanner(s, seed, False),
    "spanner-dist": lambda s, seed: _run_spanner(s, seed, True),
    "verify": _run_verify,
    "bench": _run_bench,
}


def _csv_text(rows: list[dict], footer: dict | None = None) -> str:
    buf = io.StringIO()
    flat = [{k: v for k, v in r.items() if not isinstance(v, (list, dict))} for r in rows]
    if flat:
        writer = csv.DictWriter(buf, fieldnames=list(flat[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(flat)
    for key, value in (footer or {}).items():
        buf.write(f"# {key}={value}\n")
    return buf.getvalue()


def run_experiment(spec: ExperimentSpec, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        spec.validate()
        footer = None
        if spec.command == "trend":
            rows, fit = trend_report(spec.sizes, spec.seeds, spec.c, spec.p, spec.distributed)
            ok = True
            report = {"spec": asdict(spec), "rows": rows, "fit": fit}
            footer = fit
        else:
            runner = RUNNERS[spec.command]
            rows, ok = [], True
            for seed in spec.seeds:
                row, passed = runner(spec, seed)
                rows.append(row)
                ok = ok and passed
            report = {"spec": asdict(spec), "runs": rows, "passed": ok}
        text = _csv_text(rows, footer) if spec.format == "csv" else json.dumps(report, indent=2) + "\n"
        if spec.out:
            Path(spec.out).write_text(text, encoding="utf-8")
        else:
            stdout.write(text)
    except (SpecError, GraphError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (IncompleteRun, BandwidthViolation) as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--graph", default="gen:gnp:n=50,p=0.2",
                        help="edge-list file, or gen:<kind>:n=..,p=..[,W=..]")
    common.add_argument("--seed", type=int, help="single seed")
    common.add_argument("--seeds", help="seed list, e.g. 0-19 or 1,5,9")
    common.add_argument("--c", type=float, default=3.0)
    common.add_argument("--sources", default="0", help="id list, random:<k> or all")
    common.add_argument("--rounds", type=int)
    common.add_argument("--verify", action="store_true")
    common.add_argument("--trace", help="JSON-lines trace output")
    common.add_argument("--out", help="report path (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="congest-spanner", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("wbfs", parents=[common], help="multiple WBFS trees")
    det = sub.add_parser("detection", parents=[common], help="weighted (S,d,k)-detection")
    det.add_argument("--d", type=int, required=True)
    det.add_argument("--k", type=int, required=True)
    for name in ("spanner-seq", "spanner-dist", "bench"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("--beta", type=int, default=6)
        sp.add_argument("--export", help="write the spanner as an edge list")
    ver = sub.add_parser("verify", parents=[common], help="check a spanner file or WBFS trees")
    ver.add_argument("--spanner")
    ver.add_argument("--beta", type=int, default=6)
    tr = sub.add_parser("trend", parents=[common], help="size / round scaling table")
    tr.add_argument("--sizes", required=True)
    tr.add_argument("--p", type=float, default=0.1)
    tr.add_argument("--distributed", action="store_true")
    return parser


def spec_from_args(ns: argparse.Namespace) -> ExperimentSpec:
    if ns.seeds is not None:
        seeds = parse_int_list(ns.seeds)
    else:
        seeds = [ns.seed if ns.seed is not None else 0]
    return ExperimentSpec(
        command=ns.command, graph=ns.graph, seeds=seeds, c=ns.c, sources=ns.sources,
        rounds=ns.rounds, d=getattr(ns, "d", None), k=getattr(ns, "k", None),
        beta=getattr(ns, "beta", 6), verify=ns.verify, spanner=getattr(ns, "spanner", None),
        sizes=parse_int_list(ns.sizes) if getattr(ns, "sizes", None) else [],
        p=getattr(ns, "p", 0.1), distributed=getattr(ns, "distributed", False),
        trace=ns.trace, out=ns.out, format=ns.format, export=getattr(ns, "export", None),
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING)
    try:
        spec = spec_from_args(ns)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run_experiment(spec)


if __name__ == "__main__":
    sys.exit(main())
