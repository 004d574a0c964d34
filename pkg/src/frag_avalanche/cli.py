"""Command-line front end (``frag-avalanche``).

Exit codes: 0 success, 1 usage or validation error, 2 acceptance failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import stats
from .config import RunConfig
from .errors import AvalancheError
from .model import Configuration, FractalCoord, ModelParams, coord_value
from .montecarlo import _backend
from .montecarlo.rng import TAG_BRANCHING, TAG_CHAIN, TAG_SDE, TAG_SIZES
from .montecarlo.simulate import available_workers, run_replicas, simulate_branching, simulate_chain, simulate_sde
from .montecarlo.sizes import SizeSequence, project_sizes
from .semigroup import (
    CumulantOptions,
    StateSpace,
    cumulant_solve,
    generator_apply,
    reachable_support,
    resolvent_apply,
    transition_at,
)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_ACCEPTANCE = 0, 1, 2

EVENT_HEADER = ("replica", "time", "kind", "size_before", "size_after", "root", "i", "j", "clipped_band")
TERMINAL_HEADER = ("value", "root", "i", "j", "count", "probability")
FUNCTIONS = {
    "one": lambda y: 1.0,
    "identity": lambda y: y,
    "exp_neg": lambda y: math.exp(-y),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- formatting -----------------------------------------------------------------

def _num(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) for v in row])


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _coord_cols(c: FractalCoord) -> tuple[int, int, int, int]:
    if c.clipped:
        return (-1, -1, -1, c.clipped_band)
    return (c.root, c.i, c.j, -1)


def _params_payload(params: ModelParams) -> dict:
    return {"r": params.r, "beta": params.beta, "lambda0": params.lambda0,
            "thresholds": list(params.thresholds), "depth": params.depth}


def _summary(command: str, cfg: RunConfig, params: ModelParams, extra: dict) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "command": command, "params": _params_payload(params),
           "seed": cfg.resolved_seed()}
    out.update(extra)
    return out


def _ci(values) -> dict:
    mean = float(np.mean(values)) if len(values) else float("nan")
    out = {"mean": mean}
    if len(values) >= stats.MIN_CI_SAMPLES:
        _, hw = stats.mean_ci(values, 0.997)
        out["half_width_997"] = hw
    return out


class _Output:
    def __init__(self, cfg: RunConfig):
        self.dir = Path(cfg.out) if cfg.out else None
        self.quiet = cfg.quiet
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def say(self, text: str = "") -> None:
        if not self.quiet:
            print(text)

    def path(self, name: str) -> Path | None:
        return None if self.dir is None else self.dir / name


def _workers(cfg: RunConfig) -> int:
    if cfg.workers is not None:
        if cfg.workers < 1:
            raise ValueError("--workers must be positive")
        return cfg.workers
    return available_workers()


def _start(cfg: RunConfig):
    return list(cfg.sizes) if cfg.sizes else cfg.x0


# -- subcommands ----------------------------------------------------------------

def cmd_params(cfg: RunConfig) -> int:
    params = cfg.params()
    out = _Output(cfg)
    out.say(f"r        = {params.r!r}")
    out.say(f"beta     = {params.beta!r}")
    out.say(f"lambda0  = {params.lambda0!r}")
    out.say("band  lower                 upper")
    bands = []
    for k in range(params.depth):
        lo, hi = params.lower_edge(k), params.upper_edge(k)
        bands.append({"band": k, "lower": lo, "upper": hi})
        out.say(f"{k:<5d} {lo:<21.17g} {hi:.17g}")
    if out.dir is not None:
        payload = {"schema_version": SCHEMA_VERSION, **_params_payload(params), "bands": bands}
        write_json(out.path("params.json"), payload)
    return EXIT_OK


def _space(cfg: RunConfig, params: ModelParams) -> StateSpace:
    return reachable_support(_start(cfg), params, cfg.policy())


def cmd_support(cfg: RunConfig) -> int:
    params = cfg.params()
    S = _space(cfg, params)
    out = _Output(cfg)
    out.say(f"{len(S)} states")
    for c, v in zip(S.coords, S.values):
        out.say(f"  {v:.17g}  {c!r}")
    if out.dir is not None:
        write_csv(out.path("support.csv"), ("value", "root", "i", "j", "clipped_band"),
                  ((float(v),) + _coord_cols(c) for c, v in zip(S.coords, S.values)))
    return EXIT_OK


def cmd_semigroup(cfg: RunConfig) -> int:
    params = cfg.params()
    S = _space(cfg, params)
    out = _Output(cfg)
    if cfg.function not in FUNCTIONS:
        raise ValueError(f"--function must be one of {sorted(FUNCTIONS)}")
    f = S.function(FUNCTIONS[cfg.function])
    base = [(float(v),) + _coord_cols(c) for c, v in zip(S.coords, S.values)]
    coord_header = ("value", "root", "i", "j", "clipped_band")
    extra: dict = {"quantity": cfg.quantity, "states": len(S)}
    q = cfg.quantity
    if q == "transition":
        op = transition_at(cfg.t_end, S, tol=cfg.tol)
        header = coord_header + tuple(f"to_{k}" for k in range(len(S)))
        rows = [b + tuple(float(x) for x in op.matrix[a]) for a, b in enumerate(base)]
        extra.update(t=cfg.t_end, tol=cfg.tol, terms=op.terms)
    elif q == "generator":
        af = generator_apply(f, S)
        header = coord_header + ("f", "Af")
        rows = [b + (float(f[a]), float(af[a])) for a, b in enumerate(base)]
        extra.update(function=cfg.function)
    elif q == "resolvent":
        u = resolvent_apply(cfg.alpha, f, S)
        header = coord_header + ("f", "u")
        rows = [b + (float(f[a]), float(u[a])) for a, b in enumerate(base)]
        extra.update(function=cfg.function, alpha=cfg.alpha)
    elif q == "cumulant":
        sol = cumulant_solve(f, cfg.t_end, S, CumulantOptions(tol=cfg.cumulant_tol))
        header = coord_header + ("phi", "h")
        rows = [b + (float(f[a]), float(sol.final[a])) for a, b in enumerate(base)]
        extra.update(function=cfg.function, t=cfg.t_end, tol=cfg.cumulant_tol, steps=sol.steps,
                     halving_change=sol.halving_change, picard_iterations=sol.picard_iterations,
                     picard_discrepancy=sol.picard_discrepancy)
    else:
        raise ValueError(f"unknown quantity {q!r}; use transition, generator, resolvent or cumulant")
    out.say(",".join(header))
    for row in rows:
        out.say(",".join(_num(v) for v in row))
    if out.dir is not None:
        write_csv(out.path("semigroup.csv"), header, rows)
        write_json(out.path("summary.json"), _summary("semigroup", cfg, params, extra))
    return EXIT_OK


def _path_worker(stream, kind: str, x0: float, t_end: float, params: ModelParams, banded: bool):
    if kind == "chain":
        return simulate_chain(x0, t_end, params, stream)
    return simulate_sde(x0, t_end, params, stream, banded=banded)


def _branching_worker(stream, config: Configuration, t_end: float, params: ModelParams, policy, cap: int):
    return simulate_branching(config, t_end, params, policy, stream, cap=cap)


def _terminal_rows(coords: Iterable[FractalCoord], roots, params: ModelParams):
    tally = Counter(coords)
    total = sum(tally.values())
    items = []
    for c, n in tally.items():
        v = coord_value(c, roots, params)
        root, i, j, _ = _coord_cols(c)
        items.append((v, root, i, j, n, n / total if total else 0.0))
    items.sort(key=lambda row: (-row[0], row[1], row[2], row[3]))
    return items


def _event_rows(replica: int, events):
    # clipped coordinates keep their pre-clip exponents in the event log
    for e in events:
        c = e.coord_after
        cb = -1 if c.clipped_band is None else c.clipped_band
        yield (replica, e.time, e.kind.label, e.size_before, e.size_after, c.root, c.i, c.j, cb)


def _finish(out: _Output, cfg: RunConfig, command: str, params, logs, terminal, summary: dict, started: float):
    if out.dir is not None:
        if cfg.events:
            rows = (row for k, events in enumerate(logs) for row in _event_rows(k, events))
            write_csv(out.path("events.csv"), EVENT_HEADER, rows)
        write_csv(out.path("terminal.csv"), TERMINAL_HEADER, terminal)
        write_json(out.path("summary.json"), _summary(command, cfg, params, summary))
        write_json(out.path("timing.json"), {"wall_seconds": time.perf_counter() - started,
                                             "workers": _workers(cfg), "backend": _backend.BACKEND})
    for key, value in summary.items():
        out.say(f"{key}: {value}")


def _run_info(cfg: RunConfig) -> dict:
    return {"replicas": cfg.replicas, "t_end": cfg.t_end}


def cmd_simulate_path(cfg: RunConfig, kind: str) -> int:
    started = time.perf_counter()
    params = cfg.params()
    out = _Output(cfg)
    tag = TAG_CHAIN if kind == "chain" else TAG_SDE
    trajs = run_replicas(_path_worker, cfg.replicas, cfg.resolved_seed(), tag,
                         (kind, cfg.x0, cfg.t_end, params, not cfg.unbanded), workers=_workers(cfg))
    finals = [t.final_size for t in trajs]
    counts = [len(t.events) for t in trajs]
    roots = (cfg.x0,)
    summary = {**_run_info(cfg), "x0": cfg.x0, "terminal_size": _ci(finals), "events_per_replica": _ci(counts),
               "monotonicity_violations": sum(e.size_after > e.size_before for t in trajs for e in t.events)}
    if kind == "sde":
        summary["banded"] = not cfg.unbanded
    terminal = _terminal_rows((t.final for t in trajs), roots, params)
    _finish(out, cfg, f"simulate-{kind}", params, (t.events for t in trajs), terminal, summary, started)
    return EXIT_OK


def _population_summary(finals: list[Configuration], params: ModelParams) -> dict:
    counts = [c.count for c in finals]
    masses = [sum(c.values(params)) for c in finals]
    products = [math.prod(math.exp(-v) for v in c.values(params)) for c in finals]
    maxima = [max(c.values(params), default=0.0) for c in finals]
    return {"particle_count": _ci(counts), "total_mass": _ci(masses),
            "product_exp_neg_size": _ci(products), "max_size": max(maxima, default=0.0)}


def cmd_simulate_branching(cfg: RunConfig) -> int:
    started = time.perf_counter()
    params = cfg.params()
    out = _Output(cfg)
    sizes = list(cfg.sizes) if cfg.sizes else [cfg.x0]
    config0 = Configuration.from_sizes(sizes)
    runs = run_replicas(_branching_worker, cfg.replicas, cfg.resolved_seed(), TAG_BRANCHING,
                        (config0, cfg.t_end, params, cfg.policy(), cfg.cap), workers=_workers(cfg))
    finals = [r[0] for r in runs]
    summary = {**_run_info(cfg), "sizes": sizes, "clip_policy": cfg.policy().value,
               **_population_summary(finals, params)}
    terminal = _terminal_rows((c for f in finals for c in f.coords), config0.roots, params)
    _finish(out, cfg, "simulate-branching", params, (r[1].events for r in runs), terminal, summary, started)
    return EXIT_OK


def cmd_simulate_sizes(cfg: RunConfig) -> int:
    started = time.perf_counter()
    params = cfg.params()
    out = _Output(cfg)
    level = cfg.level if cfg.level is not None else params.depth
    p = params.at_level(level)
    x0 = SizeSequence(tuple(cfg.sizes) if cfg.sizes else (cfg.x0,), level)
    config0 = project_sizes(x0, level, params)
    runs = run_replicas(_branching_worker, cfg.replicas, cfg.resolved_seed(), TAG_SIZES,
                        (config0, cfg.t_end, p, cfg.policy(), cfg.cap), workers=_workers(cfg))
    finals = [r[0] for r in runs]
    summary = {**_run_info(cfg), "sizes": list(x0.sizes), "level": level, "clip_policy": cfg.policy().value,
               "projected_start": config0.values(p), **_population_summary(finals, p)}
    summary["max_size_violations"] = sum(1 for f in finals if max(f.values(p), default=0.0) > x0.max_size)
    terminal = _terminal_rows((c for f in finals for c in f.coords), config0.roots, p)
    _finish(out, cfg, "simulate-sizes", p, (r[1].events for r in runs), terminal, summary, started)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    from .verify import Scenario, run_verify

    cfg.params()  # validate before any heavy work
    sc = Scenario(r=cfg.r, thresholds=cfg.threshold_values(), x0=cfg.x0, seed=cfg.resolved_seed(),
                  workers=_workers(cfg), tol_scale=cfg.tol_scale)
    out = _Output(cfg)
    results = run_verify(sc, only=cfg.only or None, progress=lambda r: out.say(r.line()))
    failed = [r.id for r in results if not r.passed]
    out.say(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    if out.dir is not None:
        write_json(out.path("report.json"), {
            "schema_version": SCHEMA_VERSION,
            "seed": sc.seed,
            "criteria": [{"id": r.id, "title": r.title, "target": r.target, "measured": r.measured,
                          "pass": r.passed, "seconds": r.seconds, "details": r.details} for r in results],
            "passed": not failed,
        })
    if failed:
        print(f"failing criteria: {', '.join(map(str, failed))}", file=sys.stderr)
        return EXIT_ACCEPTANCE
    return EXIT_OK


COMMANDS = {
    "params": cmd_params,
    "support": cmd_support,
    "semigroup": cmd_semigroup,
    "simulate-chain": lambda cfg: cmd_simulate_path(cfg, "chain"),
    "simulate-sde": lambda cfg: cmd_simulate_path(cfg, "sde"),
    "simulate-branching": cmd_simulate_branching,
    "simulate-sizes": cmd_simulate_sizes,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="INI run configuration; flags override its values")
    m = common.add_argument_group("model")
    m.add_argument("--r", type=float, help="rupture ratio in (0, 1)")
    m.add_argument("--thresholds", help="comma-separated decreasing thresholds or 'geometric:BASE'")
    m.add_argument("--depth", type=int, help="number of thresholds for a geometric rule")
    r = common.add_argument_group("run")
    r.add_argument("--x0", type=float, help="start size")
    r.add_argument("--sizes", help="comma-separated start sizes (several particles)")
    r.add_argument("--level", type=int, help="projection level for simulate-sizes")
    r.add_argument("--t-end", dest="t_end", type=float, help="time horizon")
    r.add_argument("--replicas", type=int)
    r.add_argument("--seed", type=lambda s: int(s, 0), help="master seed (fallback: $FRAG_AVALANCHE_SEED)")
    r.add_argument("--clip-policy", dest="clip_policy", choices=("edge", "conditioned"))
    r.add_argument("--workers", type=int, help="worker processes (default: available CPUs)")
    r.add_argument("--cap", type=int, help="population cap for branching runs")
    r.add_argument("--quantity", choices=("transition", "generator", "resolvent", "cumulant"))
    r.add_argument("--alpha", type=float, help="resolvent parameter")
    r.add_argument("--function", choices=tuple(FUNCTIONS))
    r.add_argument("--tol", type=float, help="uniformization truncation tolerance")
    r.add_argument("--cumulant-tol", dest="cumulant_tol", type=float)
    r.add_argument("--unbanded", action="store_true", help="simulate-sde on the whole interval")
    r.add_argument("--tol-scale", dest="tol_scale", type=float, help="scale verify tolerances")
    r.add_argument("--only", help="comma-separated criterion ids for verify")
    o = common.add_argument_group("output")
    o.add_argument("--out", help="output directory")
    o.add_argument("--no-events", dest="events", action="store_false", help="skip the event-log CSV")
    o.add_argument("--quiet", action="store_true")

    parser = _Parser(prog="frag-avalanche", description="Avalanche fragmentation-branching simulator and verifier")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "params": "validate parameters and print derived constants",
        "support": "reachable state space from the start",
        "semigroup": "exact transition, generator, resolvent or cumulant on the reachable support",
        "simulate-chain": "uniformized jump chain replicas",
        "simulate-sde": "Poisson-driven fragmentation equation replicas",
        "simulate-branching": "branching particle system replicas",
        "simulate-sizes": "finite projection of the size-sequence process",
        "verify": "run the acceptance suite",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    args = vars(ns).copy()
    args.pop("command", None)
    path = args.pop("config", None)
    cfg = RunConfig.load(path) if path else RunConfig()
    for key, value in args.items():
        cfg.set(key, value)
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = resolve_config(ns)
        return COMMANDS[ns.command](cfg)
    except (AvalancheError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
