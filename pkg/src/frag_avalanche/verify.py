"""Executable acceptance suite.

Each criterion is a function returning a :class:`CriterionResult`.  Exact
criteria compare against closed forms or the deterministic semigroup;
statistical ones compare Monte Carlo estimates against them at fixed levels
(three standard errors, chi-square at alpha = 0.001).  All randomness comes
from purpose-tagged streams of one master seed, so a run is reproducible.
"""
from __future__ import annotations

import hashlib
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import stats
from .kernels import (
    ClipPolicy,
    compensator,
    drift_closed_form,
    levy_atoms,
    sde_kernel,
    step_distribution,
)
from .model import Configuration, FractalCoord, ModelParams, fractal_points, make_params
from .montecarlo.simulate import run_replicas, simulate_branching, simulate_chain, simulate_sde
from .montecarlo.sizes import SizeSequence, simulate_sizes
from .semigroup import (
    CumulantOptions,
    StateSpace,
    branching_expectation,
    cumulant_solve,
    generator_apply,
    generator_matrix,
    reachable_support,
    transition_at,
)

ALPHA = 0.001
SE_FACTOR = 3.0
DEFAULT_SEED = 20240917

# purpose tags; every Monte Carlo run in the suite uses its own
TAG_C4_CHAIN = 41
TAG_C4_SDE = 42
TAG_C10_SINGLE = 101
TAG_C11_PAIR = 111
TAG_C11_BIG = 112
TAG_C13_COND = 131
TAG_C13_EDGE = 132
TAG_C14_LEVEL2 = 141
TAG_C14_LEVEL1 = 142


@dataclass
class Scenario:
    r: float = 0.5
    thresholds: tuple[float, ...] = (0.25, 0.0625)
    x0: float = 1.0
    seed: int = DEFAULT_SEED
    workers: int = 1
    tol_scale: float = 1.0
    chain_replicas: int = 100_000
    branching_replicas: int = 10_000

    @property
    def params(self) -> ModelParams:
        return make_params(self.r, self.thresholds)


@dataclass
class CriterionResult:
    id: int
    title: str
    target: str
    measured: str
    passed: bool
    seconds: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.id:2d} {self.title}: {self.measured} (target {self.target}; {self.seconds:.2f} s)"


class _Context:
    """Lazily computed objects shared between criteria."""

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.params = sc.params
        self._space: StateSpace | None = None
        self._chain = None
        self._sde = None
        self._single = None

    @property
    def space(self) -> StateSpace:
        if self._space is None:
            self._space = reachable_support(self.sc.x0, self.params)
        return self._space

    def chain_runs(self) -> list:
        if self._chain is None:
            self._chain = run_replicas(_path_replica, self.sc.chain_replicas, self.sc.seed, TAG_C4_CHAIN,
                                       ("chain", self.sc.x0, self.params), workers=self.sc.workers)
        return self._chain

    def sde_runs(self) -> list:
        if self._sde is None:
            self._sde = run_replicas(_path_replica, self.sc.chain_replicas, self.sc.seed, TAG_C4_SDE,
                                     ("sde", self.sc.x0, self.params), workers=self.sc.workers)
        return self._sde

    def single_runs(self) -> list:
        if self._single is None:
            cfg = Configuration((FractalCoord(0),), (self.sc.x0,))
            self._single = run_replicas(_branching_replica, self.sc.branching_replicas, self.sc.seed,
                                        TAG_C10_SINGLE, (cfg, 1.0, self.params, ClipPolicy.EDGE),
                                        workers=self.sc.workers)
        return self._single


# -- replica workers (module level so worker processes can import them) ------

def _path_replica(stream, kind: str, x0: float, params: ModelParams):
    sim = simulate_chain if kind == "chain" else simulate_sde
    traj = sim(x0, 2.0, params, stream)
    violations = sum(1 for e in traj.events if e.size_after > e.size_before)
    return traj.final, traj.size_at(1.0), traj.final_size, violations, len(traj.events)


def _neg_exp_product(values: Iterable[float]) -> float:
    out = 1.0
    for v in values:
        out *= math.exp(-v)
    return out


def _branching_replica(stream, config: Configuration, t_end: float, params: ModelParams, policy):
    final, _ = simulate_branching(config, t_end, params, policy, stream)
    return _neg_exp_product(final.values(params)), final.count


def _support_replica(stream, config: Configuration, t_end: float, params: ModelParams, policy, allowed):
    final, log = simulate_branching(config, t_end, params, policy, stream)
    occupied = list(config.coords) + [e.coord_after for e in log] + list(final.coords)
    bad = sum(1 for c in occupied if not allowed(c))
    return bad, len(occupied)


class _LatticeOrEdge:
    """Picklable membership test for the fractal lattice, optionally with band edges."""

    def __init__(self, lattice: frozenset, edges: bool):
        self.lattice = lattice
        self.edges = edges

    def __call__(self, c: FractalCoord) -> bool:
        if c.clipped:
            return self.edges
        return c in self.lattice


def _sizes_replica(stream, x0: SizeSequence, level: int, params: ModelParams, policy, project_floor: float):
    seq = simulate_sizes(x0, level, 1.0, params, policy, stream)
    kept = [v for v in seq.sizes if v >= project_floor]
    return _neg_exp_product(kept), seq.max_size


# -- criteria -------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.3e}"


def _p_row_stay(ctx: _Context, t: float) -> float:
    hold = step_distribution(ctx.sc.x0, ctx.params).p_hold
    return math.exp(-ctx.params.lambda0 * t * (1.0 - hold))


def c1_semigroup(ctx: _Context) -> CriterionResult:
    s = ctx.sc.tol_scale
    S = ctx.space
    p1 = transition_at(1.0, S).matrix
    p2 = transition_at(2.0, S).matrix
    ck = float(np.max(np.abs(p2 - p1 @ p1)))
    identity = bool(np.array_equal(transition_at(0.0, S).matrix, np.eye(len(S))))
    k = S.index(FractalCoord(0))
    stay = max(abs(transition_at(t, S).matrix[k, k] - _p_row_stay(ctx, t)) for t in (0.5, 1.0, 2.0))
    ok = ck <= 1e-10 * s and identity and stay <= 1e-12 * s
    return CriterionResult(1, "Semigroup exactness", "CK <= 1e-10, P_0 = I, stay error <= 1e-12, < 1 s",
                           f"CK {_fmt(ck)}, P_0 = I {identity}, stay error {_fmt(stay)}", ok, 0.0,
                           {"chapman_kolmogorov": ck, "identity": identity, "stay_error": stay})


def _generator_id_target(x: float, params: ModelParams) -> float:
    st = step_distribution(x, params)
    b, g, lam = params.beta, params.gbeta, params.lambda0
    if st.p_small > 0 and st.p_big > 0:
        return -2.0 * lam * b * g * x * x
    return lam * (st.p_small * (b * x - x) + st.p_big * (g * x - x))


def c2_generator(ctx: _Context) -> CriterionResult:
    s = ctx.sc.tol_scale
    S, params = ctx.space, ctx.params
    rows = float(np.max(np.abs(generator_matrix(S).sum(axis=1))))
    k = S.index(FractalCoord(0))
    gid = float(generator_apply(S.values.copy(), S)[k])
    gid_err = abs(gid - _generator_id_target(ctx.sc.x0, params))

    rng = np.random.default_rng(np.random.SeedSequence(ctx.sc.seed, spawn_key=(21,)))
    worst = 0.0
    for _ in range(100):
        x = float(rng.random())
        kk, nn = sde_kernel(x, params), levy_atoms(x, params)
        for _ in range(20):
            c = rng.uniform(-1.0, 1.0, size=4)
            freq = float(rng.uniform(0.5, 10.0))

            def f(y, c=c, freq=freq):
                return c[0] + c[1] * y + c[2] * y * y + c[3] * math.sin(freq * y)

            fx = f(x)
            k_form = sum((f(x + d) - fx) * m for d, m in zip(kk.displacements, kk.masses))
            n_form = sum((f(y) - fx) * m for y, m in zip(nn.positions, nn.masses))
            scale = sum((abs(f(y)) + abs(fx)) * m for y, m in zip(nn.positions, nn.masses))
            if scale > 0:
                worst = max(worst, abs(k_form - n_form) / scale)
    ok = rows <= 1e-14 * s and gid_err <= 1e-13 * s and worst <= 1e-15 * s
    return CriterionResult(2, "Generator identities", "row sums <= 1e-14, A id error <= 1e-13, K vs N <= 1e-15 rel, < 1 s",
                           f"row sums {_fmt(rows)}, A id = {gid:.15f} (err {_fmt(gid_err)}), K vs N {_fmt(worst)}",
                           ok, 0.0, {"row_sums": rows, "generator_id": gid, "generator_id_error": gid_err,
                                     "k_vs_n_relative": worst})


def c3_compensator(ctx: _Context) -> CriterionResult:
    s = ctx.sc.tol_scale
    params = ctx.params
    b, lam = params.beta, params.lambda0
    rng = np.random.default_rng(np.random.SeedSequence(ctx.sc.seed, spawn_key=(31,)))
    worst = 0.0
    for x in rng.random(1000):
        x = float(x)
        comp = compensator(x, params)
        closed = 2.0 * lam * b * (1.0 - b) * x * x
        minus_drift = -drift_closed_form(x, params)
        ref = max(abs(closed), 1e-300)
        worst = max(worst, abs(comp - closed) / ref, abs(minus_drift - closed) / ref)
    ok = worst <= 1e-13 * s
    return CriterionResult(3, "Drift-compensator cancellation", "relative error <= 1e-13, < 1 s",
                           f"max relative error {_fmt(worst)}", ok, 0.0, {"relative_error": worst})


def _terminal_pmf(runs, S: StateSpace):
    return stats.empirical_pmf((r[0] for r in runs), S.coords)


def c4_equality_in_law(ctx: _Context) -> CriterionResult:
    S = ctx.space
    row = transition_at(2.0, S).row(FractalCoord(0))
    row = row / row.sum()
    out = {}
    ok = True
    pmfs = {}
    for name, runs in (("sde", ctx.sde_runs()), ("chain", ctx.chain_runs())):
        pmf = _terminal_pmf(runs, S)
        pmfs[name] = pmf
        gof = stats.chisq_gof(pmf, row)
        tv = stats.tv_distance(pmf.frequencies, row)
        out[name] = {"chi2": gof.statistic, "dof": gof.degrees_of_freedom, "p_value": gof.p_value, "tv": tv}
        ok &= gof.p_value > ALPHA and tv <= 0.01 * ctx.sc.tol_scale
    two = stats.chisq_two_sample(pmfs["sde"], pmfs["chain"])
    out["two_sample_p"] = two.p_value
    ok &= two.p_value > ALPHA
    measured = ", ".join(f"{k} p={v['p_value']:.3f} tv={v['tv']:.4f}" for k, v in out.items() if isinstance(v, dict))
    return CriterionResult(4, "Equality in law (SDE, chain vs exact P_2)", "p > 0.001, TV <= 0.01, < 30 s",
                           f"{measured}, sde vs chain p={two.p_value:.3f}", ok, 0.0, out)


def c5_monotone_support(ctx: _Context) -> CriterionResult:
    S = ctx.space
    violations = events = outside = 0
    for runs in (ctx.chain_runs(), ctx.sde_runs()):
        for final, _, _, v, n in runs:
            violations += v
            events += n
            outside += final not in S
    ok = violations == 0 and outside == 0
    return CriterionResult(5, "Path monotonicity and support", "0 violations, 0 terminal coords outside support",
                           f"{violations} violations in {events} events, {outside} outside support",
                           ok, 0.0, {"violations": violations, "events": events, "outside": outside})


def c6_absorbing(ctx: _Context) -> CriterionResult:
    s = ctx.sc.tol_scale
    S = ctx.space
    worst = 0.0
    for t in (0.5, 1.0, 2.0):
        P = transition_at(t, S).matrix
        for a in range(len(S)):
            above = S.values > S.values[a]
            worst = max(worst, float(P[a, above].sum()))
    ok = worst <= 1e-12 * s
    return CriterionResult(6, "Absorbing sets", "mass above start <= 1e-12",
                           f"max mass above {_fmt(worst)}", ok, 0.0, {"max_mass_above": worst})


def _phi_level(values: np.ndarray, edge: float) -> np.ndarray:
    return np.where(values >= edge, np.exp(-values), 1.0)


def c7_projective(ctx: _Context) -> CriterionResult:
    s = ctx.sc.tol_scale
    params = ctx.params
    if params.depth < 2:
        return CriterionResult(7, "Projective consistency", "depth >= 2", "scenario has depth 1", False, 0.0)
    p1 = params.at_level(1)
    S1 = reachable_support(ctx.sc.x0, p1)
    extra = [v for v in (0.2,) if params.thresholds[1] <= v < params.thresholds[0]]
    S2 = reachable_support(Configuration.from_sizes([ctx.sc.x0] + extra), params.at_level(2))
    idx = [S2.index(c) for c in S1.coords]
    rows = 0.0
    for t in (0.5, 1.0, 2.0):
        A = transition_at(t, S1).matrix
        B = transition_at(t, S2).matrix
        B_sub = B[np.ix_(idx, idx)]
        leak = float(np.max(np.abs(B[idx].sum(axis=1) - B_sub.sum(axis=1))))
        rows = max(rows, float(np.max(np.abs(A - B_sub))), leak)
    h1 = cumulant_solve(_phi_level(S1.values, p1.floor), 1.0, S1).final
    h2 = cumulant_solve(_phi_level(S2.values, p1.floor), 1.0, S2).final
    cum = float(np.max(np.abs(h2[idx] - h1)))
    ok = rows <= 1e-12 * s and cum <= 1e-8 * s
    return CriterionResult(7, "Projective consistency", "rows <= 1e-12, cumulant <= 1e-8, < 5 s",
                           f"rows {_fmt(rows)}, cumulant {_fmt(cum)}", ok, 0.0,
                           {"row_difference": rows, "cumulant_difference": cum})


def c8_dynkin(ctx: _Context) -> CriterionResult:
    S = ctx.space
    k = S.index(FractalCoord(0))
    af = generator_matrix(S) @ S.values
    nodes, weights = np.polynomial.legendre.leggauss(32)
    runs = ctx.chain_runs()
    out = {}
    ok = True
    for col, t in ((1, 1.0), (2, 2.0)):
        s_nodes = 0.5 * t * (nodes + 1.0)
        integral = 0.5 * t * sum(w * float(transition_at(sv, S).matrix[k] @ af)
                                 for sv, w in zip(s_nodes, weights))
        exact = ctx.sc.x0 + integral
        sample = [r[col] for r in runs]
        mean = float(np.mean(sample))
        se = stats.standard_error(sample)
        dev = abs(mean - exact)
        out[f"t={t:g}"] = {"mc_mean": mean, "exact": exact, "se": se, "deviation_se": dev / se if se else math.inf}
        ok &= dev <= SE_FACTOR * ctx.sc.tol_scale * se
    measured = ", ".join(f"{k}: {v['deviation_se']:.2f} SE" for k, v in out.items())
    return CriterionResult(8, "Dynkin check", "<= 3 SE at t = 1, 2", measured, ok, 0.0, out)


def c9_conservative(ctx: _Context) -> CriterionResult:
    s = ctx.sc.tol_scale
    S = ctx.space
    worst = 0.0
    for t in (0.5, 1.0, 2.0):
        h = cumulant_solve(np.ones(len(S)), t, S, CumulantOptions(cross_check=False)).values
        worst = max(worst, float(np.max(np.abs(h - 1.0))))
    ok = worst <= 1e-9 * s
    return CriterionResult(9, "Branching conservativeness", "|h - 1| <= 1e-9",
                           f"max |h - 1| {_fmt(worst)}", ok, 0.0, {"max_deviation": worst})


def _mc_mean_se(values) -> tuple[float, float]:
    return float(np.mean(values)), stats.standard_error(values)


def c10_branching_semigroup(ctx: _Context) -> CriterionResult:
    S = ctx.space
    sol = cumulant_solve(np.exp(-S.values), 1.0, S)
    exact = sol.at(FractalCoord(0))
    mean, se = _mc_mean_se([r[0] for r in ctx.single_runs()])
    dev = abs(mean - exact)
    disc = sol.picard_discrepancy
    ok = dev <= SE_FACTOR * ctx.sc.tol_scale * se and disc <= 1e-6 * ctx.sc.tol_scale
    return CriterionResult(10, "Branching semigroup agreement", "<= 3 SE, Picard discrepancy <= 1e-6, < 60 s",
                           f"MC {mean:.5f} vs h_1 {exact:.5f} ({dev / se:.2f} SE), Picard {_fmt(disc)}",
                           ok, 0.0, {"mc_mean": mean, "se": se, "exact": exact, "picard_discrepancy": disc})


def c11_branching_property(ctx: _Context) -> CriterionResult:
    sc, params = ctx.sc, ctx.params
    roots = (sc.x0,)
    big = FractalCoord(0, 0, 1)
    pair = Configuration((FractalCoord(0), big), roots)
    S = reachable_support(pair, params)
    sol = cumulant_solve(np.exp(-S.values), 1.0, S)
    h_top, h_big = sol.at(FractalCoord(0)), sol.at(big)
    exact_pair = branching_expectation(pair, None, 1.0, S, solution=sol)
    identity = exact_pair == h_top * h_big

    n = sc.branching_replicas
    args = (1.0, params, ClipPolicy.EDGE)
    pair_runs = run_replicas(_branching_replica, n, sc.seed, TAG_C11_PAIR, (pair,) + args, workers=sc.workers)
    big_runs = run_replicas(_branching_replica, n, sc.seed, TAG_C11_BIG,
                            (Configuration((big,), roots),) + args, workers=sc.workers)
    m_pair, se_pair = _mc_mean_se([r[0] for r in pair_runs])
    m_top, se_top = _mc_mean_se([r[0] for r in ctx.single_runs()])
    m_big, se_big = _mc_mean_se([r[0] for r in big_runs])
    prod = m_top * m_big
    se_prod = math.hypot(m_big * se_top, m_top * se_big)
    se = math.hypot(se_pair, se_prod)
    dev = abs(m_pair - prod)
    ok = identity and dev <= SE_FACTOR * sc.tol_scale * se
    return CriterionResult(11, "Branching property", "pair vs product <= 3 SE, exact product identity",
                           f"pair {m_pair:.5f} vs product {prod:.5f} ({dev / se:.2f} SE), identity {identity}",
                           ok, 0.0, {"pair_mean": m_pair, "product": prod, "se": se,
                                     "exact_pair": exact_pair, "exact_product": h_top * h_big,
                                     "identity": identity})


def c12_growth(ctx: _Context) -> CriterionResult:
    mean, se = _mc_mean_se([r[1] for r in ctx.single_runs()])
    dev = abs(mean - math.e)
    ok = dev <= SE_FACTOR * ctx.sc.tol_scale * se
    return CriterionResult(12, "Growth law", "mean count within 3 SE of e",
                           f"mean {mean:.4f} ({dev / se:.2f} SE)", ok, 0.0, {"mean": mean, "se": se})


def c13_fractal_support(ctx: _Context) -> CriterionResult:
    sc, params = ctx.sc, ctx.params
    lattice = frozenset(fractal_points(sc.x0, params.floor, params).coords)
    cfg = Configuration((FractalCoord(0),), (sc.x0,))
    out = {}
    ok = True
    for name, policy, tag, edges in (("conditioned", ClipPolicy.CONDITIONED, TAG_C13_COND, False),
                                     ("edge", ClipPolicy.EDGE, TAG_C13_EDGE, True)):
        runs = run_replicas(_support_replica, sc.branching_replicas, sc.seed, tag,
                            (cfg, 1.0, params, policy, _LatticeOrEdge(lattice, edges)), workers=sc.workers)
        bad = sum(r[0] for r in runs)
        total = sum(r[1] for r in runs)
        out[name] = {"outside": bad, "checked": total}
        ok &= bad == 0
    measured = ", ".join(f"{k}: {v['outside']}/{v['checked']} outside" for k, v in out.items())
    return CriterionResult(13, "Fractal absorbing support", "100% inside (edges allowed under Edge)",
                           measured, ok, 0.0, out)


def c14_projections(ctx: _Context) -> CriterionResult:
    sc, params = ctx.sc, ctx.params
    if params.depth < 2:
        return CriterionResult(14, "Size-sequence projections", "depth >= 2", "scenario has depth 1", False, 0.0)
    extra = 0.2 if params.thresholds[1] <= 0.2 < params.thresholds[0] else params.thresholds[1]
    x0 = SizeSequence((sc.x0, extra))
    floor1 = params.at_level(1).floor
    n = sc.branching_replicas
    lvl2 = run_replicas(_sizes_replica, n, sc.seed, TAG_C14_LEVEL2,
                        (x0, 2, params, ClipPolicy.EDGE, floor1), workers=sc.workers)
    lvl1 = run_replicas(_sizes_replica, n, sc.seed, TAG_C14_LEVEL1,
                        (x0, 1, params, ClipPolicy.EDGE, floor1), workers=sc.workers)
    m2, se2 = _mc_mean_se([r[0] for r in lvl2])
    m1, se1 = _mc_mean_se([r[0] for r in lvl1])
    se = math.hypot(se1, se2)
    dev = abs(m2 - m1)
    bound = x0.max_size
    max_viol = sum(1 for r in lvl2 + lvl1 if r[1] > bound)
    ok = dev <= SE_FACTOR * sc.tol_scale * se and max_viol == 0
    return CriterionResult(14, "Size-sequence projections", "projected level 2 vs level 1 <= 3 SE, max-size bound",
                           f"{m2:.5f} vs {m1:.5f} ({dev / se:.2f} SE), {max_viol} max-size violations",
                           ok, 0.0, {"level2_projected": m2, "level1": m1, "se": se, "max_violations": max_viol})


REPRO_COMMANDS = (
    ["params"],
    ["support"],
    ["semigroup", "--quantity", "transition", "--t-end", "1"],
    ["simulate-chain", "--t-end", "2", "--replicas", "400"],
    ["simulate-sde", "--t-end", "2", "--replicas", "400"],
    ["simulate-branching", "--t-end", "1", "--replicas", "200"],
    ["simulate-sizes", "--t-end", "1", "--replicas", "200", "--sizes", "1,0.2", "--level", "2"],
)


def _digest(directory: Path) -> dict[str, str]:
    out = {}
    for p in sorted(directory.iterdir()):
        if p.name == "timing.json":
            continue
        out[p.name] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


def c15_reproducibility(ctx: _Context) -> CriterionResult:
    from .cli import main

    sc = ctx.sc
    common = ["--r", repr(sc.r), "--thresholds", ",".join(repr(d) for d in sc.thresholds), "--seed", str(sc.seed)]
    mismatched = []
    compared = 0
    with tempfile.TemporaryDirectory() as tmp:
        for cmd in REPRO_COMMANDS:
            digests = []
            for run, workers in enumerate((1, 8, 1)):
                out = Path(tmp) / f"{cmd[0]}-{run}"
                code = main(cmd + common + ["--workers", str(workers), "--out", str(out), "--quiet"])
                if code != 0:
                    mismatched.append(f"{cmd[0]} exit {code}")
                    break
                digests.append(_digest(out))
            if len(digests) == 3:
                compared += len(digests[0])
                if not (digests[0] == digests[1] == digests[2]) or not digests[0]:
                    mismatched.append(cmd[0])
    ok = not mismatched
    return CriterionResult(15, "Reproducibility", "byte-identical artifacts for workers 1 and 8",
                           f"{compared} artifacts compared, mismatches: {mismatched or 'none'}",
                           ok, 0.0, {"artifacts": compared, "mismatches": mismatched})


RUNTIME_LIMITS = {1: 1.0, 2: 1.0, 3: 1.0, 4: 30.0, 7: 5.0, 10: 60.0}

CRITERIA: dict[int, Callable[[_Context], CriterionResult]] = {
    1: c1_semigroup,
    2: c2_generator,
    3: c3_compensator,
    4: c4_equality_in_law,
    5: c5_monotone_support,
    6: c6_absorbing,
    7: c7_projective,
    8: c8_dynkin,
    9: c9_conservative,
    10: c10_branching_semigroup,
    11: c11_branching_property,
    12: c12_growth,
    13: c13_fractal_support,
    14: c14_projections,
    15: c15_reproducibility,
}


def run_criterion(cid: int, ctx: _Context) -> CriterionResult:
    start = time.perf_counter()
    res = CRITERIA[cid](ctx)
    res.passed = bool(res.passed)
    res.seconds = time.perf_counter() - start
    limit = RUNTIME_LIMITS.get(cid)
    if limit is not None and res.seconds >= limit:
        res.passed = False
        res.measured += f"; runtime {res.seconds:.2f} s over {limit:g} s"
    return res


def run_verify(scenario: Scenario | None = None, only: Iterable[int] | None = None,
               progress: Callable[[CriterionResult], None] | None = None) -> list[CriterionResult]:
    """Run the selected criteria (all by default) in numerical order."""
    scenario = scenario or Scenario()
    ids = sorted(set(only)) if only else sorted(CRITERIA)
    unknown = [i for i in ids if i not in CRITERIA]
    if unknown:
        raise ValueError(f"unknown criteria {unknown}")
    ctx = _Context(scenario)
    results = []
    for cid in ids:
        res = run_criterion(cid, ctx)
        results.append(res)
        if progress is not None:
            progress(res)
    return results
