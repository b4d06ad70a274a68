"""Command-line entry point: ``bcpdrc {exact,dominance,sample,scan,constants}``.

Exit status: 0 success, 1 validation or domain error, 2 capacity exceeded,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import audit, exact
from .config import COMMANDS, ENV_PREFIX, RunConfig, load_config
from .distribution import fmt17
from .errors import BCPError, CapacityError, DomainError, ValidationError
from .graph import ONE, ZERO, BoundaryCondition, Graph, Region, build_box, read_edge_list
from .orderings import BinaryMeasure, dominance_exact, holley_check, vertex_comparison_condition
from .params import ModelParams
from .sampler import (OBSERVABLES, ChainState, lattice_from_graph, make_lattice, run_chain)
from .scan import ScanGrid, batch_means, critical_constants, scan

EXIT_OK, EXIT_VALIDATION, EXIT_CAPACITY, EXIT_RUNTIME = 0, 1, 2, 3


def human(x) -> str:
    return format(float(x), ".6g")


# ---------------------------------------------------------------------------
# output helpers


class Output:
    def __init__(self, cfg: RunConfig, stream=None):
        self.dir = Path(cfg.out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.format = cfg.format
        self.stream = sys.stdout if stream is None else stream
        self.written: list[Path] = []

    def say(self, text: str = ""):
        print(text, file=self.stream)

    def text(self, name: str, text: str) -> Path:
        path = self.dir / name
        path.write_text(text)
        self.written.append(path)
        return path

    def table(self, stem: str, rows: list[dict]) -> Path:
        if self.format == "json":
            return self.text(f"{stem}.json", json.dumps(rows, indent=1, default=_plain))
        return self.text(f"{stem}.csv", rows_to_csv(rows))

    def distribution(self, stem: str, dist) -> Path:
        if self.format == "json":
            return self.text(f"{stem}.json", dist.to_json())
        return self.text(f"{stem}.csv", dist.to_csv())

    def report(self, name: str, payload: dict) -> Path:
        return self.text(name, json.dumps(payload, indent=1, default=_plain))


def _plain(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return fmt17(v)
    if isinstance(v, (list, tuple)):
        return json.dumps(v, default=_plain)
    return "" if v is None else str(v)


def rows_to_csv(rows: list[dict]) -> str:
    keys: list[str] = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(keys)
    for r in rows:
        writer.writerow([_cell(r.get(k)) for k in keys])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# targets


def resolve_target(cfg: RunConfig):
    if cfg.graph is not None and cfg.n is not None:
        raise ValidationError("give either a graph or a box radius n, not both")
    if cfg.graph is not None:
        path = Path(cfg.graph)
        return read_edge_list(path) if path.is_file() else Graph.named(cfg.graph)
    if cfg.n is not None:
        return build_box(cfg.d, cfg.n)
    raise ValidationError("no target: set graph (name or edge-list file) or box radius n")


def _boundary(cfg: RunConfig, target) -> BoundaryCondition | None:
    if not isinstance(target, Region):
        return None
    bc = BoundaryCondition.parse(cfg.boundary)
    if bc.kind not in ("zero", "one"):
        raise DomainError("exact tables support ZERO and ONE boundaries")
    return bc


def _param_echo(params: ModelParams) -> dict:
    return {"a": params.a, "p": params.p, "q": params.q, "K": params.K, "Delta": params.Delta}


# ---------------------------------------------------------------------------
# commands


def cmd_exact(cfg: RunConfig, out: Output) -> dict:
    target = resolve_target(cfg)
    params = cfg.params()
    bc = _boundary(cfg, target)
    if bc is None:
        drc = exact.drc_measure(target, params)
    else:
        drc = exact.drc_measure_with_boundary(target, bc, params)
    out.distribution("drc", drc)
    out.distribution("vertex_marginal", exact.vertex_marginal(drc))
    out.distribution("edge_marginal", exact.edge_marginal(drc))
    n_free = drc.block("psi").shape[1]
    report = {"params": _param_echo(params), "boundary": None if bc is None else str(bc),
              "log_Z_DRC": drc.log_total, "notes": []}
    if params.a == 1.0:
        report["notes"].append("a = 1: random-cluster specialization, every vertex open")
    spin_ok = params.q == int(params.q) and params.q >= 1
    if spin_ok:
        q = int(params.q)
        s = cfg.s if bc is ONE else 0
        if bc is None:
            bcp = exact.bcp_measure(target, params.K, params.Delta, q)
        else:
            bcp = exact.bcp_measure_with_boundary(target, s, params.K, params.Delta, q)
        coup = exact.coupling_measure(target, params.K, params.Delta, q, s)
        out.distribution("bcp", bcp)
        out.distribution("coupling", coup)
        dev_spin = _max_dev(coup.marginal(["sigma"]), bcp)
        dev_drc = _max_dev(coup.marginal(["psi", "omega"]), drc)
        # Z^BCP = Z^DRC e^{|V| Delta}; a = 1 uses the indicator normalization;
        # a wired boundary cluster has its spin fixed, removing one factor q
        expected = drc.log_total
        if params.a != 1.0:
            expected += n_free * params.Delta
        if s > 0:
            expected -= math.log(q)
        report.update({
            "log_Z_BCP": bcp.log_total,
            "log_Z_identity_rhs": expected,
            "partition_identity_rel_error": abs(math.expm1(bcp.log_total - expected)),
            "coupling_max_deviation": max(dev_spin, dev_drc),
        })
        rows = []
        sig = bcp.block("sigma")
        labels = drc.table.labels if hasattr(drc, "table") else None
        for x, y in itertools.combinations(range(n_free), 2):
            both = (sig[:, x] != 0) & (sig[:, y] != 0)
            tau_spin = bcp.prob(both & (sig[:, x] == sig[:, y])) - bcp.prob(both) / q
            row = {"x": x, "y": y, "tau_spin": tau_spin}
            if labels is not None:
                conn = drc.prob((labels[:, x] >= 0) & (labels[:, x] == labels[:, y]))
                row.update({"connectivity": conn, "tau_connectivity": (1 - 1 / q) * conn,
                            "difference": tau_spin - (1 - 1 / q) * conn})
            rows.append(row)
        out.table("correlations", rows)
    else:
        report["notes"].append(f"q = {params.q} is not an integer: spin tables skipped")
    out.report("report.json", report)
    out.say(f"params  a={human(params.a)} p={human(params.p)} q={human(params.q)} "
            f"K={human(params.K)} Delta={human(params.Delta)}")
    out.say(f"log Z^DRC = {human(drc.log_total)}")
    if spin_ok:
        out.say(f"log Z^BCP = {human(report['log_Z_BCP'])}  identity rel. error "
                f"{human(report['partition_identity_rel_error'])}")
        out.say(f"coupling max marginal deviation {human(report['coupling_max_deviation'])}")
    for note in report["notes"]:
        out.say(note)
    return report


def _max_dev(d1, d2) -> float:
    """Max |P1 - P2| over the union of supports (rows matched by configuration)."""
    index = {tuple(c): i for i, c in enumerate(d2.configs)}
    dev = 0.0
    seen = set()
    for c, p in zip(d1.configs, d1.probs):
        key = tuple(c)
        seen.add(key)
        dev = max(dev, abs(p - (d2.probs[index[key]] if key in index else 0.0)))
    for key, i in index.items():
        if key not in seen:
            dev = max(dev, d2.probs[i])
    return float(dev)


SWEEPS = {
    "vertex-i": lambda cfg: audit.sweep_vertex_comparison("i"),
    "vertex-ii": lambda cfg: audit.sweep_vertex_comparison("ii"),
    "vertex-iii": lambda cfg: audit.sweep_vertex_comparison("iii"),
    "vertex-iv": lambda cfg: audit.sweep_vertex_comparison("iv"),
    "boundary-order": lambda cfg: audit.sweep_boundary_order(),
    "rc-edge-a": lambda cfg: audit.sweep_rc_comparison("a"),
    "rc-edge-b": lambda cfg: audit.sweep_rc_comparison("b"),
    "edge-monotone": lambda cfg: audit.sweep_edge_monotonicity(),
    "nested": lambda cfg: audit.sweep_nested_boxes(),
    "full": lambda cfg: audit.sweep_full_measure(),
    "holley": lambda cfg: audit.holley_audit(cfg.pairs, cfg.measure_size, cfg.seed),
    "finite-energy": lambda cfg: audit.finite_energy_audit(
        build_box(2, 1), audit.param_grid(q_values=(1.0, 1.5, 2.0))),
}
CHECKS = tuple(SWEEPS) + ("pair",)


def cmd_dominance(cfg: RunConfig, out: Output) -> dict:
    if cfg.check not in CHECKS:
        raise ValidationError(f"unknown check {cfg.check!r}; expected one of {', '.join(CHECKS)}")
    if cfg.check == "pair":
        return _dominance_pair(cfg, out)
    records = SWEEPS[cfg.check](cfg)
    key = "inside" if cfg.check == "finite-energy" else "dominance"
    violations = [r for r in records if r.get(key) is False or (cfg.check == "holley" and r["holley"]
                                                                 and not r["dominance"])]
    out.table(f"dominance_{cfg.check}", records)
    out.report("violations.json", violations)
    summary = {"check": cfg.check, "records": len(records), "violations": len(violations)}
    out.report("summary.json", summary)
    out.say(f"{cfg.check}: {len(records)} records, {len(violations)} violations")
    return summary


def _dominance_pair(cfg: RunConfig, out: Output) -> dict:
    target = resolve_target(cfg)
    p1, p2 = cfg.params(), cfg.second_params()
    bc = _boundary(cfg, target)
    delta = target.lattice_degree if isinstance(target, Region) else target.max_degree
    try:
        met = vertex_comparison_condition(cfg.variant, p1, p2, delta)
        condition = "met" if met else "not met"
    except DomainError as exc:
        condition = f"not applicable: {exc}"
    mu1 = BinaryMeasure.from_distribution(exact.vertex_measure(target, p1, bc))
    mu2 = BinaryMeasure.from_distribution(exact.vertex_measure(target, p2, bc))
    dom = dominance_exact(mu1, mu2, report=True)
    holley = holley_check(mu1, mu2)
    payload = {"variant": cfg.variant, "params1": _param_echo(p1), "params2": _param_echo(p2),
               "condition": condition, "dominance": dom.ok, "witness": dom.witness,
               "holley": holley.ok, "holley_mode": holley.mode}
    out.report("dominance_pair.json", payload)
    out.say(f"condition {cfg.variant}: {condition}; dominance: {'pass' if dom.ok else 'fail'}")
    return payload


def _sample_lattice(cfg: RunConfig):
    if cfg.graph is not None:
        return lattice_from_graph(resolve_target(cfg))
    if cfg.n is None:
        raise ValidationError("no target: set graph or box radius n")
    return make_lattice(cfg.d, cfg.n, cfg.boundary, cfg.s)


def cmd_sample(cfg: RunConfig, out: Output) -> dict:
    params = cfg.params()
    lattice = _sample_lattice(cfg)
    state = None
    if cfg.resume:
        state = ChainState.load(cfg.resume)
        if len(state.spins) != lattice.n:
            raise ValidationError("checkpoint does not match the lattice")
    series, state = run_chain(lattice, params, cfg.sweeps, cfg.burn_in, cfg.thin, seed=cfg.seed,
                              random_order=cfg.random_order, keep_configs=cfg.keep_configs,
                              init=cfg.init, state=state)
    if out.format == "json":
        payload = {"sweep": series.sweep.tolist(),
                   **{name: series.column(name).tolist() for name in OBSERVABLES}}
        out.text("series.json", json.dumps(payload))
    else:
        out.text("series.csv", series.to_csv())
    ckpt = Path(cfg.checkpoint) if cfg.checkpoint else out.dir / "checkpoint.json"
    state.save(ckpt, {"lattice": lattice.description, "params": _param_echo(params)})
    out.written.append(ckpt)
    summary = {"params": _param_echo(params), "sweeps": state.sweeps, "samples": len(series)}
    for name in OBSERVABLES:
        mean, err = batch_means(series.column(name))
        summary[name] = mean
        summary[name + "_err"] = err
    out.report("summary.json", summary)
    out.say(f"{len(series)} samples, chain at sweep {state.sweeps}")
    for name in OBSERVABLES:
        out.say(f"  {name:24s} {human(summary[name])} +- {human(summary[name + '_err'])}")
    return summary


def cmd_scan(cfg: RunConfig, out: Output) -> dict:
    if not cfg.a_values or not cfg.p_values:
        raise ValidationError("scan needs a_values and p_values")
    grid = ScanGrid.product(cfg.a_values, cfg.p_values, q=cfg.q, n=16 if cfg.n is None else cfg.n, d=cfg.d,
                            boundary=cfg.boundary, s=cfg.s, sweeps=cfg.sweeps, burn_in=cfg.burn_in,
                            thin=cfg.thin, seed=cfg.seed, random_order=cfg.random_order)
    result = scan(grid, jobs=cfg.jobs)
    if out.format == "json":
        out.text("scan.json", result.to_json())
    else:
        out.text("scan.csv", result.to_csv())
    for name in cfg.gnuplot:
        if name not in OBSERVABLES:
            raise ValidationError(f"unknown observable {name!r}")
        out.text(f"scan_{name}.dat", result.to_gnuplot(name))
    out.say(f"scanned {len(result.rows)} points")
    return {"points": len(result.rows)}


def cmd_constants(cfg: RunConfig, out: Output) -> dict:
    table = critical_constants(cfg.d)
    out.table("constants", [{"name": k, "value": v} for k, v in table.items()])
    for k, v in table.items():
        out.say(f"{k:14s} {human(v)}")
    return table


COMMAND_FUNCS = {"exact": cmd_exact, "dominance": cmd_dominance, "sample": cmd_sample,
                 "scan": cmd_scan, "constants": cmd_constants}


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bcpdrc", description="Exact tables, orderings and Monte Carlo for the "
                     "Blume-Capel-Potts and diluted random-cluster models.",
                     epilog=f"Settings may also come from a TOML file (--config) and from "
                     f"{ENV_PREFIX}<NAME> environment variables; flags win over both.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML settings file")
        for f in fields(RunConfig):
            if f.name == "command":
                continue
            flag = "--" + f.name.replace("_", "-")
            if str(f.type) == "bool":
                p.add_argument(flag, dest=f.name, action="store_const", const=True, default=None)
            else:
                p.add_argument(flag, dest=f.name, default=None, metavar=f.name.upper())
    return parser


def run(argv=None, environ=None, stream=None) -> int:
    err = sys.stderr
    try:
        args = build_parser().parse_args(argv)
        flags = {k: v for k, v in vars(args).items() if k != "config"}
        cfg = load_config(args.config, flags, environ)
        COMMAND_FUNCS[cfg.command](cfg, Output(cfg, stream))
        return EXIT_OK
    except ValidationError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_VALIDATION
    except CapacityError as exc:
        print(f"capacity exceeded: {exc}", file=err)
        return EXIT_CAPACITY
    except (BCPError, OSError, RuntimeError, ArithmeticError) as exc:
        print(f"runtime failure: {exc}", file=err)
        return EXIT_RUNTIME


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
