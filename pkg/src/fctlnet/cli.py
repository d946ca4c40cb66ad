"""Command-line front end: read a JSON config, analyze or simulate, write CSVs.

Exit codes: 0 success, 1 bad configuration or usage, 2 instability,
3 numerics failure, 4 ``compare`` found a deviation beyond 4 standard errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema

from . import __version__
from .arrivals import (
    ArrivalProcess,
    Scenario,
    SlotDistribution,
    as_fraction,
    platoon_process,
    poisson_process,
    superpose,
    zero_process,
)
from .errors import ConfigError, InstabilityError, NumericsError
from .network import Link, NetworkSpec, Node, analyze_network
from .simulator import SimConfig, simulate_network
from .solver import SignalPlan, tail_table

log = logging.getLogger("fctlnet")

MODES = (
    "analyze-single",
    "analyze-network",
    "simulate-single",
    "simulate-network",
    "compare",
    "roots",
    "invert",
)
EXIT_OK, EXIT_CONFIG, EXIT_UNSTABLE, EXIT_NUMERICS, EXIT_COMPARE = 0, 1, 2, 3, 4
SIGMA_LIMIT = 4.0
TAIL_LEVELS = 6
WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class RunConfig:
    mode: str
    config_path: Path
    out_dir: Path
    sim: SimConfig
    epsilon_weight: float = 0.0
    terms: int = 30


# --- configuration --------------------------------------------------------------------


def bundled_config(name: str) -> Path:
    return Path(str(resources.files("fctlnet") / "data" / name))


def load_schema() -> dict:
    return json.loads(bundled_config("config.schema.json").read_text(encoding="utf-8"))


def _field(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def validate_document(doc) -> None:
    """Raise ConfigError listing every schema violation with its field path."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = []
        for e in errors:
            lines.append(f"{_field(e.absolute_path)}: {e.message}")
        raise ConfigError("config does not match the schema:\n  " + "\n  ".join(lines))


def _weights(raw, where: str, normalize: bool) -> list:
    vals = [as_fraction(w) for w in raw]
    total = sum(vals, Fraction(0))
    if total == 0:
        raise ConfigError(f"{where}: weights are all zero")
    if not normalize and abs(float(total) - 1.0) > WEIGHT_SUM_TOL:
        raise ConfigError(f"{where}: weights sum to {float(total):.6g}, not 1 (set \"normalize\": true to rescale)")
    return [float(v / total) for v in vals]


def build_arrivals(node: dict, c: int, where: str) -> ArrivalProcess:
    kind = node["kind"]
    if kind == "zero":
        return zero_process(c)
    if kind == "poisson":
        return poisson_process(c, node["rate"])
    if kind == "platoon":
        if node["green"] > c:
            raise ConfigError(f"{where}.green: window longer than the cycle")
        w = _weights(node["weights"], f"{where}.weights", node.get("normalize", False))
        if len(w) != node["green"] + 1:
            raise ConfigError(f"{where}.weights: need green + 1 = {node['green'] + 1} weights, got {len(w)}")
        return platoon_process(c, node["start"], node["green"], node["rate"], w)
    if kind == "mixture":
        scen = node["scenarios"]
        w = _weights([s["weight"] for s in scen], f"{where}.scenarios", node.get("normalize", False))
        out = []
        for i, (wi, s) in enumerate(zip(w, scen)):
            if len(s["slots"]) != c:
                raise ConfigError(f"{where}.scenarios[{i}].slots: expected {c} slots, got {len(s['slots'])}")
            slots = tuple(SlotDistribution(d.get("shift", 0), as_fraction(d.get("rate", "0"))) for d in s["slots"])
            out.append(Scenario(wi, slots))
        return ArrivalProcess(c, tuple(out))
    if kind == "superpose":
        parts = [build_arrivals(p, c, f"{where}.parts[{i}]") for i, p in enumerate(node["parts"])]
        total = parts[0]
        for p in parts[1:]:
            total = superpose(total, p)
        return total
    raise ConfigError(f"{where}.kind: unknown kind {kind!r}")  # unreachable after schema check


def build_spec(doc: dict) -> NetworkSpec:
    c = doc["cycle_length"]
    names = [q["name"] for q in doc["queues"]]
    if len(set(names)) != len(names):
        raise ConfigError("queues: duplicate queue names")
    nodes = []
    for i, q in enumerate(doc["queues"]):
        where = f"queues[{i}]"
        if q["green"] + q["red"] != c:
            raise ConfigError(f"{where}: green + red = {q['green'] + q['red']} differs from cycle_length {c}")
        ext = build_arrivals(q["arrivals"], c, f"{where}.arrivals") if "arrivals" in q else None
        links = []
        for j, l in enumerate(q.get("inputs", [])):
            if l["source"] not in names:
                raise ConfigError(f"{where}.inputs[{j}].source: unknown queue {l['source']!r}")
            links.append(Link(l["source"], l.get("travel_time", 0)))
        if ext is None and not links:
            raise ConfigError(f"{where}: queue has neither arrivals nor inputs")
        plan = SignalPlan(q["green"], q["red"], q.get("offset", 0))
        nodes.append(Node(q["name"], plan, ext, tuple(links)))
    return NetworkSpec(tuple(nodes), c)


def parse_config(path) -> tuple:
    """Read, validate and build a config; returns (NetworkSpec, raw document)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    validate_document(doc)
    try:
        spec = build_spec(doc)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    spec.order()  # reject cyclic networks early
    return spec, doc


def resolve_config(name: str) -> Path:
    """A filesystem path, or the name of a bundled config."""
    p = Path(name)
    if p.exists():
        return p
    bundled = bundled_config(name if name.endswith(".json") else name + ".json")
    if bundled.exists():
        return bundled
    raise ConfigError(f"config {name!r} not found (neither a file nor a bundled config)")


# --- output -----------------------------------------------------------------------------


def _num(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    x = float(x)
    if x == 0.0:
        return "0"  # no negative zero
    return f"{x:.12g}"


def write_csv(path: Path, header, rows, meta: dict) -> None:
    buf = io.StringIO()
    buf.write(f"# fctlnet {__version__}\n")
    for k, v in meta.items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([c if isinstance(c, str) else _num(c) for c in r])
    path.write_bytes(buf.getvalue().encode("utf-8"))


def _tail_header():
    return ["queue", "variable"] + [f"P(X>={m})" for m in range(1, TAIL_LEVELS + 1)]


def analyze(spec: NetworkSpec, cfg: RunConfig, meta: dict, tails: bool = True) -> dict:
    sol = analyze_network(spec, cfg.epsilon_weight)
    summary, tail_rows = [], []
    for name in spec.order():
        res = sol[name]
        qs = res.solution
        means = qs.mean_queue
        write_csv(cfg.out_dir / f"means_{name}.csv", ["slot", "mean"], [[str(k), m] for k, m in enumerate(means)], meta)
        summary.append([name, res.rho, qs.mean_xbar])
        if tails:
            for var, vals in tail_table(qs, TAIL_LEVELS).items():
                tail_rows.append([name, var, *vals])
    write_csv(cfg.out_dir / "summary.csv", ["queue", "rho", "mean_xbar"], summary, meta)
    if tails:
        write_csv(cfg.out_dir / "tails.csv", _tail_header(), tail_rows, meta)
    return {name: sol[name] for name in spec.order()}


def simulate(spec: NetworkSpec, cfg: RunConfig, meta: dict) -> dict:
    stats = simulate_network(spec, cfg.sim, TAIL_LEVELS)
    summary, tail_rows = [], []
    for name in spec.order():
        st = stats[name]
        rows = [[str(k), m, s] for k, (m, s) in enumerate(zip(st.slot_means, st.slot_stderr))]
        write_csv(cfg.out_dir / f"means_{name}.csv", ["slot", "mean", "stderr"], rows, meta)
        summary.append([name, st.arrivals_per_cycle / st.plan.g, st.mean_xbar, st.mean_xbar_stderr])
        g = st.plan.g
        for var, vals in (("X0", st.tail_x0), (f"X{g}", st.tail_xg), ("Xbar", st.tail_xbar)):
            tail_rows.append([name, var, *vals])
    write_csv(cfg.out_dir / "summary.csv", ["queue", "rho", "mean_xbar", "stderr"], summary, meta)
    write_csv(cfg.out_dir / "tails.csv", _tail_header(), tail_rows, meta)
    return stats


def compare(spec: NetworkSpec, cfg: RunConfig, meta: dict) -> int:
    """Analytic means against simulation; nonzero when any point is beyond 4 standard errors."""
    a_dir, s_dir = cfg.out_dir / "analytic", cfg.out_dir / "simulation"
    a_dir.mkdir(parents=True, exist_ok=True)
    s_dir.mkdir(parents=True, exist_ok=True)
    ana = analyze(spec, replace(cfg, out_dir=a_dir), meta, tails=False)
    sim = simulate(spec, replace(cfg, out_dir=s_dir), meta)
    rows = []
    worst_dev, worst_sigma = 0.0, 0.0
    for name in spec.order():
        am = ana[name].solution.mean_queue
        st = sim[name]
        points = [(str(k), am[k], st.slot_means[k], st.slot_stderr[k]) for k in range(len(am))]
        points.append(("bar", ana[name].solution.mean_xbar, st.mean_xbar, st.mean_xbar_stderr))
        for slot, a, s, se in points:
            dev = s - a
            if se > 0:
                sig = abs(dev) / se
            else:
                sig = 0.0 if abs(dev) < 1e-12 else math.inf
            worst_dev = max(worst_dev, abs(dev))
            worst_sigma = max(worst_sigma, sig)
            rows.append([name, slot, a, s, se, dev, sig if math.isfinite(sig) else "inf"])
    write_csv(
        cfg.out_dir / "compare.csv",
        ["queue", "slot", "analytic", "simulated", "stderr", "deviation", "sigmas"],
        rows,
        meta,
    )
    flagged = sum(1 for r in rows if r[-1] == "inf" or r[-1] > SIGMA_LIMIT)
    print(f"max |deviation| = {worst_dev:.6f}, max sigma multiple = {worst_sigma:.3f}, "
          f"points beyond {SIGMA_LIMIT:g} sigma: {flagged} of {len(rows)}")
    return EXIT_COMPARE if flagged else EXIT_OK


def roots_report(spec: NetworkSpec, cfg: RunConfig, meta: dict) -> None:
    sol = analyze_network(spec, cfg.epsilon_weight)
    for name in spec.order():
        rs = sol[name].solution.roots
        rows = [[str(i), z.real, z.imag, abs(z), r] for i, (z, r) in enumerate(zip(rs.roots, rs.residuals))]
        write_csv(cfg.out_dir / f"roots_{name}.csv", ["index", "real", "imag", "modulus", "residual"], rows, meta)


def invert_report(spec: NetworkSpec, cfg: RunConfig, meta: dict) -> None:
    sol = analyze_network(spec, cfg.epsilon_weight)
    n = cfg.terms
    for name in spec.order():
        qs = sol[name].solution
        cols = [qs.x0_pmf(n), qs.pmf(qs.g, n), qs.pmf("bar", n)]
        rows = [[str(k)] + [c[k] for c in cols] for k in range(n)]
        header = ["n", "P(X0=n)", f"P(X{qs.g}=n)", "P(Xbar=n)"]
        write_csv(cfg.out_dir / f"pmf_{name}.csv", header, rows, meta)


# --- entry point -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fctlnet", description="Fixed-cycle traffic-light queues and networks.")
    ap.add_argument("--config", required=True, help="config JSON path or bundled config name")
    ap.add_argument("--mode", required=True, choices=MODES)
    ap.add_argument("--out", default="out", help="output directory (created if missing)")
    ap.add_argument("--seed", type=int, help="simulation seed (unsigned 64-bit)")
    ap.add_argument("--cycles", type=int, help="simulated cycles per replication")
    ap.add_argument("--warmup-cycles", type=int, help="discarded cycles per replication")
    ap.add_argument("--replications", type=int)
    ap.add_argument("--epsilon-weight", type=float, help="drop mixture components lighter than this")
    ap.add_argument("--terms", type=int, default=30, help="pmf terms in invert mode")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def make_run_config(args, doc: dict, path: Path) -> RunConfig:
    sim_doc = doc.get("simulation", {})
    cycles = args.cycles if args.cycles is not None else sim_doc.get("cycles", SimConfig.cycles)
    warm = args.warmup_cycles if args.warmup_cycles is not None else sim_doc.get("warmup_cycles")
    if warm is None:
        warm = min(SimConfig.warmup_cycles, cycles // 10)
    sim = SimConfig(
        cycles=cycles,
        warmup_cycles=warm,
        seed=args.seed if args.seed is not None else sim_doc.get("seed", SimConfig.seed),
        replications=args.replications if args.replications is not None else sim_doc.get("replications", SimConfig.replications),
    )
    eps = args.epsilon_weight if args.epsilon_weight is not None else doc.get("epsilon_weight", 0.0)
    if not 0.0 <= eps < 1.0:
        raise ConfigError("--epsilon-weight must lie in [0, 1)")
    return RunConfig(args.mode, path, Path(args.out), sim, eps, args.terms)


def run(cfg: RunConfig, spec: NetworkSpec) -> int:
    if cfg.mode.endswith("-single") and len(spec.nodes) != 1:
        raise ConfigError(f"mode {cfg.mode} needs exactly one queue, config has {len(spec.nodes)}")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    meta = {"mode": cfg.mode, "config": cfg.config_path.name}
    if cfg.mode.startswith("simulate") or cfg.mode == "compare":
        meta.update(seed=cfg.sim.seed, cycles=cfg.sim.cycles, warmup_cycles=cfg.sim.warmup_cycles,
                    replications=cfg.sim.replications)
    if cfg.epsilon_weight:
        meta["epsilon_weight"] = repr(cfg.epsilon_weight)
    if cfg.mode.startswith("analyze"):
        analyze(spec, cfg, meta)
    elif cfg.mode.startswith("simulate"):
        simulate(spec, cfg, meta)
    elif cfg.mode == "compare":
        return compare(spec, cfg, meta)
    elif cfg.mode == "roots":
        roots_report(spec, cfg, meta)
    else:
        invert_report(spec, cfg, meta)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        path = resolve_config(args.config)
        spec, doc = parse_config(path)
        cfg = make_run_config(args, doc, path)
        return run(cfg, spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InstabilityError as exc:
        print(f"unstable: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except NumericsError as exc:
        print(f"numerics failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
