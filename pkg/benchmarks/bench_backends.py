"""Compare the pure-Python and compiled simulation kernels.

Two views are timed for each workload:

* ``kernel`` calls the backend kernel directly on pre-built generators, which
  isolates the code the two backends actually differ in;
* ``end-to-end`` goes through the public simulators, including stream
  construction and event-object assembly shared by both backends.

Both backends consume the same random streams, so the script also checks that
their outputs are identical.

    python3 benchmarks/bench_backends.py --replicas 5000
"""
from __future__ import annotations

import argparse
import json
import sys
import time

from frag_avalanche.model import Configuration, make_params
from frag_avalanche.montecarlo import (
    RngStream,
    compiled_available,
    simulate_branching,
    simulate_chain,
    simulate_sde,
)
from frag_avalanche.montecarlo._backend import kernels

PARAMS = make_params(0.5, (0.25, 0.0625))
T_BRANCH = 3.0


def _kernel_chain(mod, gen):
    p = PARAMS
    return mod.chain(gen, 1.0, 0, 0, False, 20.0, p.beta, p.lambda0, p.thresholds[0])


def _kernel_sde(mod, gen):
    p = PARAMS
    return mod.sde(gen, 1.0, 0, 0, False, 20.0, p.beta, p.lambda0, p.thresholds[0])


def _kernel_branching(mod, gen):
    p = PARAMS
    return mod.branching(gen, (1.0,), [(0, 0, 0, -1)], T_BRANCH, p.beta, p.lambda0, p.thresholds, True, 10**6)


def _e2e_chain(k, backend):
    t = simulate_chain(1.0, 20.0, PARAMS, RngStream(1, k, 1), backend=backend)
    return t.final, len(t.events)


def _e2e_sde(k, backend):
    t = simulate_sde(1.0, 20.0, PARAMS, RngStream(1, k, 2), backend=backend)
    return t.final, len(t.events)


def _e2e_branching(k, backend):
    final, log = simulate_branching(Configuration.from_sizes([1.0]), T_BRANCH, PARAMS, "edge",
                                    RngStream(1, k, 3), backend=backend)
    return final.coords, len(log)


KERNELS = {"chain": _kernel_chain, "sde": _kernel_sde, "branching": _kernel_branching}
END_TO_END = {"chain": _e2e_chain, "sde": _e2e_sde, "branching": _e2e_branching}


def _best(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def _row(view, name, replicas, timings, outputs):
    return {
        "view": view,
        "workload": name,
        "replicas": replicas,
        "python_s": timings["python"],
        "compiled_s": timings["compiled"],
        "speedup": timings["python"] / timings["compiled"],
        "identical": outputs["python"] == outputs["compiled"],
    }


def run(replicas: int, repeat: int) -> list[dict]:
    rows = []
    for name, fn in KERNELS.items():
        timings, outputs = {}, {}
        for backend in ("python", "compiled"):
            mod = kernels(backend)

            def batch():
                gens = [RngStream(1, k, 9).generator for k in range(replicas)]
                start = time.perf_counter()
                out = [fn(mod, g) for g in gens]
                return time.perf_counter() - start, out

            best = float("inf")
            for _ in range(repeat):
                elapsed, out = batch()
                best = min(best, elapsed)
            timings[backend], outputs[backend] = best, out
        rows.append(_row("kernel", name, replicas, timings, outputs))
    for name, fn in END_TO_END.items():
        timings, outputs = {}, {}
        for backend in ("python", "compiled"):
            timings[backend], outputs[backend] = _best(
                lambda: [fn(k, backend) for k in range(replicas)], repeat)
        rows.append(_row("end-to-end", name, replicas, timings, outputs))
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="Compare the Python and compiled simulation kernels.")
    ap.add_argument("--replicas", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=3, help="report the best of this many runs")
    ap.add_argument("--json", help="also write the table to this file")
    args = ap.parse_args(argv)
    if not compiled_available():
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1
    rows = run(args.replicas, args.repeat)
    print(f"{'view':<11} {'workload':<10} {'python (s)':>11} {'compiled (s)':>13} {'speedup':>8}  identical")
    for r in rows:
        print(f"{r['view']:<11} {r['workload']:<10} {r['python_s']:>11.3f} {r['compiled_s']:>13.3f} "
              f"{r['speedup']:>7.2f}x  {r['identical']}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if all(r["identical"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
