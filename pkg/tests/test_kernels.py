import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frag_avalanche.errors import BelowResolution, OutOfUnit
from frag_avalanche.kernels import (
    ClipPolicy,
    compensator,
    coord_step,
    drift_closed_form,
    levy_atoms,
    offspring_distribution,
    offspring_mass_a,
    offspring_mass_bruteforce,
    sample_offspring,
    sde_displacement,
    sde_kernel,
    step_distribution,
)
from frag_avalanche.model import FractalCoord, make_params
from frag_avalanche.montecarlo.rng import TAG_OFFSPRING, RngStream
from frag_avalanche.stats import chisq_gof, empirical_pmf

# Clip mass at x = 1 in exact arithmetic: in-band weights y(1 - y) for
# y in {2/3, 4/9, 1/3, 8/27}, divided by a(1) = 99/40.
IN_BAND_WEIGHT = Fraction(2, 9) + Fraction(20, 81) + Fraction(2, 9) + Fraction(152, 729)
A_ONE = Fraction(99, 40)
CLIP_AT_ONE = 1 - IN_BAND_WEIGHT / A_ONE


def test_levy_atoms(params):
    atoms = levy_atoms(1.0, params)
    assert atoms.positions == pytest.approx((1 / 3, 2 / 3), rel=1e-15)
    assert atoms.masses == pytest.approx((5 / 108, 5 / 54), rel=1e-15)
    assert atoms.total == pytest.approx(params.lambda0, rel=1e-15)
    assert len(levy_atoms(0.0, params)) == 0
    with pytest.raises(OutOfUnit):
        levy_atoms(1.5, params)


@given(st.floats(min_value=0.0, max_value=1.0))
def test_sde_kernel_shares_masses(x):
    p = make_params(0.5)
    k = sde_kernel(x, p)
    if x == 0.0:
        assert k.total == 0.0
        return
    atoms = levy_atoms(x, p)
    assert k.masses == atoms.masses
    assert k.drift == pytest.approx(drift_closed_form(x, p), rel=1e-12, abs=1e-300)
    assert k.total == pytest.approx(p.lambda0 * x, rel=1e-14)


def test_sde_kernel_outside_unit(params):
    assert sde_kernel(1.2, params).total == 0.0
    assert sde_kernel(-0.1, params).total == 0.0


@given(st.floats(min_value=1e-6, max_value=1.0))
def test_compensator_matches_drift(x):
    p = make_params(0.5)
    assert compensator(x, p) == pytest.approx(-drift_closed_form(x, p), rel=1e-12)


def test_compensator_value(params):
    # 2 lambda0 beta (1 - beta) at x = 1
    assert compensator(1.0, params) == pytest.approx(5 / 81, rel=1e-14)


@pytest.mark.parametrize(
    "s, expected",
    [(0.0, 1 / 3), (0.04, 1 / 3), (0.05, 2 / 3), (0.13, 2 / 3), (0.139, None), (0.2, None)],
)
def test_sde_displacement(params, s, expected):
    out = sde_displacement(1.0, s, params)
    if expected is None:
        assert out is None
    else:
        assert out == pytest.approx(expected, rel=1e-15)


def test_step_distribution_examples(params):
    d = step_distribution(1.0, params)
    assert (d.small, d.big) == pytest.approx((1 / 3, 2 / 3), rel=1e-15)
    assert (d.p_small, d.p_big, d.p_hold) == pytest.approx((1 / 3, 2 / 3, 0.0), abs=1e-15)
    d = step_distribution(2 / 3, params)
    assert not d.small_in_band and d.big_in_band
    assert d.p_big == pytest.approx(4 / 9, rel=1e-15)
    assert d.p_hold == pytest.approx(5 / 9, rel=1e-15)
    d = step_distribution(0.3, params)
    assert d.p_hold == 1.0


@settings(max_examples=200)
@given(st.floats(min_value=0.0625, max_value=1.0))
def test_step_distribution_is_stochastic_and_banded(x):
    p = make_params(0.5, (0.25, 0.0625))
    d = step_distribution(x, p)
    probs = d.as_dict()
    assert sum(probs.values()) == pytest.approx(1.0, abs=1e-15)
    assert all(v >= 0 for v in probs.values())
    edge = 0.25 if x >= 0.25 else 0.0625
    assert all(y >= edge for y, v in probs.items() if v > 0)


def test_step_below_floor(params):
    with pytest.raises(BelowResolution):
        step_distribution(0.01, params)


def test_clipped_coordinate_holds(params):
    c = FractalCoord(0, 2, 1, clipped_band=0)
    assert coord_step(c, (1.0,), params) == [(c, 1.0)]


def test_offspring_mass_closed_form(params):
    assert offspring_mass_a(1.0, params) == pytest.approx(2.475, rel=1e-14)
    assert offspring_mass_bruteforce(1.0, params) == pytest.approx(2.475, rel=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.34, max_value=0.98), st.floats(min_value=0.05, max_value=1.0))
def test_offspring_mass_against_bruteforce(r, x):
    p = make_params(r)
    assert offspring_mass_a(x, p) == pytest.approx(offspring_mass_bruteforce(x, p, order=400), rel=1e-10)


def test_offspring_distribution_at_one(params):
    law = offspring_distribution(1.0, params, ClipPolicy.EDGE)
    probs = {(c.i, c.j): p for c, p in law.atoms}
    assert probs[(0, 1)] == pytest.approx(80 / 891, rel=1e-14)
    assert probs[(0, 0)] == 0.0
    clip_coord, clip_p = law.clip_atom
    assert clip_coord.clipped_band == 0
    assert clip_p == pytest.approx(float(CLIP_AT_ONE), rel=1e-13)
    assert clip_p == pytest.approx(0.6364, abs=1e-4)
    assert law.total == pytest.approx(1.0, abs=1e-14)


def test_offspring_conditioned_renormalizes(params):
    law = offspring_distribution(1.0, params, "conditioned")
    assert law.clip_atom is None
    probs = {(c.i, c.j): p for c, p in law.atoms}
    assert probs[(0, 1)] == pytest.approx(float(Fraction(2, 9) / IN_BAND_WEIGHT), rel=1e-14)
    assert law.total == pytest.approx(1.0, abs=1e-14)


def test_offspring_conditioned_without_inband_children(params):
    # both children of 0.3 fall below 1/4: the law degenerates to the parent
    law = offspring_distribution(0.3, params, "conditioned")
    assert [(c, p) for c, p in law.atoms if p > 0] == [(FractalCoord(0), 1.0)]


@settings(max_examples=60, deadline=None)
@given(
    st.floats(min_value=0.34, max_value=0.95),
    st.floats(min_value=0.07, max_value=1.0),
    st.sampled_from(["edge", "conditioned"]),
)
def test_offspring_law_properties(r, x, policy):
    p = make_params(r, (0.25, 0.0625))
    law = offspring_distribution(x, p, policy)
    assert law.total == pytest.approx(1.0, abs=1e-12)
    edge = 0.25 if x >= 0.25 else 0.0625
    for c, prob in law.atoms:
        assert prob >= 0
        v = x * p.beta**c.i * p.gbeta**c.j
        assert edge <= v <= x


def _offspring_sample(n, policy, seed=11):
    p = make_params(0.5, (0.25, 0.0625))
    rng = RngStream(seed, 0, TAG_OFFSPRING).generator
    return [sample_offspring(1.0, p, policy, rng) for _ in range(n)]


@pytest.mark.parametrize("policy", ["edge", "conditioned"])
def test_sampler_matches_law(params, policy):
    law = offspring_distribution(1.0, params, policy)
    support = [c for c, _ in law.items()]
    expected = [p for _, p in law.items()]
    pmf = empirical_pmf(_offspring_sample(100_000, policy), support)
    rep = chisq_gof(pmf, expected)
    assert rep.p_value > 0.001


class _Counting:
    def __init__(self, gen):
        self.gen = gen
        self.calls = 0

    def random(self):
        self.calls += 1
        return self.gen.random()


def test_sampler_acceptance_rate(params):
    # each proposal consumes three uniforms: two exponents and the acceptance draw
    rng = _Counting(np.random.default_rng(5))
    n = 20_000
    for _ in range(n):
        sample_offspring(1.0, params, "edge", rng)
    rate = n / (rng.calls / 3)
    # exact rate: 1 - E[beta^i gamma^j] under the geometric proposals
    b, g = params.beta, params.gbeta
    exact = 1 - ((1 - b) / (1 - b * b)) * (b / (1 - g * g))
    assert exact == pytest.approx(0.55, abs=1e-12)
    assert rate == pytest.approx(exact, abs=0.01)


def test_sampler_deterministic(params):
    a = _offspring_sample(200, "edge", seed=3)
    b = _offspring_sample(200, "edge", seed=3)
    assert a == b


def test_clip_policy_parse():
    assert ClipPolicy.parse("EDGE") is ClipPolicy.EDGE
    assert ClipPolicy.parse(ClipPolicy.CONDITIONED) is ClipPolicy.CONDITIONED
    with pytest.raises(ValueError):
        ClipPolicy.parse("reflect")
    assert math.isfinite(offspring_mass_a(0.5, make_params(0.5)))


def test_levy_total_mass(params):
    assert levy_atoms(0.5, params).total == pytest.approx(5 / 72, rel=1e-15)


@pytest.mark.parametrize("s, expected", [(0.01, 1 / 3), (0.1, 2 / 3), (0.2, None)])
def test_sde_displacement_examples(params, s, expected):
    out = sde_displacement(1.0, s, params)
    assert out == (None if expected is None else pytest.approx(expected, rel=1e-15))


def test_offspring_mass_homogeneous(params):
    assert offspring_mass_a(0.0, params) == 0.0
    assert offspring_mass_a(0.5, params) == pytest.approx(2.475 / 4, rel=1e-14)


def test_sampler_frequency_of_two_thirds():
    n = 100_000
    hits = sum(1 for c in _offspring_sample(n, "edge", seed=21) if not c.clipped and (c.i, c.j) == (0, 1))
    p = 80 / 891
    assert abs(hits / n - p) <= 3 * math.sqrt(p * (1 - p) / n)
