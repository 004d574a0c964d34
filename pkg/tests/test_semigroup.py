import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from frag_avalanche.errors import UnknownCoordinate
from frag_avalanche.model import Configuration, FractalCoord, make_params
from frag_avalanche.semigroup import (
    CumulantOptions,
    branching_expectation,
    cumulant_solve,
    generator_apply,
    generator_matrix,
    offspring_matrix,
    poisson_truncation,
    reachable_support,
    resolvent_apply,
    step_matrix,
    transition_at,
)

DEFAULT_VALUES = [1, 2 / 3, 4 / 9, 1 / 3, 8 / 27, 1 / 4]

# h_1(1) for phi(y) = exp(-y), frozen from the hand-built ODE oracle below
H1_EDGE = 0.4033571038343467
H1_CONDITIONED = 0.34578633850683377


def test_support_default(space):
    np.testing.assert_allclose(space.values, DEFAULT_VALUES, rtol=1e-15)
    assert space.coords[-1].clipped_band == 0
    assert 0.0 not in space.values


def test_support_conditioned(params):
    S = reachable_support(1.0, params, "conditioned")
    np.testing.assert_allclose(S.values, DEFAULT_VALUES[:-1], rtol=1e-15)


def test_support_lower_band(params):
    S = reachable_support(0.2, params)
    assert S.values[0] == 0.2
    assert np.all(S.values >= 0.0625)


def test_unknown_coordinate(space):
    with pytest.raises(UnknownCoordinate):
        space.index(FractalCoord(0, 5, 5))


def test_step_matrix_rows(space):
    n = step_matrix(space).matrix
    np.testing.assert_allclose(n.sum(axis=1), 1.0, atol=1e-15)
    assert n[0, 1] == pytest.approx(2 / 3) and n[0, 3] == pytest.approx(1 / 3)
    assert n[1, 2] == pytest.approx(4 / 9) and n[1, 1] == pytest.approx(5 / 9)
    assert n[5, 5] == 1.0


def test_transition_identity_at_zero(space):
    np.testing.assert_array_equal(transition_at(0.0, space).matrix, np.eye(len(space)))


def test_transition_stay_probability(space):
    assert transition_at(1.0, space).matrix[0, 0] == pytest.approx(math.exp(-5 / 36), abs=1e-12)


@pytest.mark.parametrize("t", [0.1, 1.0, 3.0, 10.0])
def test_transition_matches_matrix_exponential(space, t):
    oracle = expm(generator_matrix(space) * t)
    np.testing.assert_allclose(transition_at(t, space).matrix, oracle, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=0.0, max_value=4.0), st.floats(min_value=0.0, max_value=4.0))
def test_chapman_kolmogorov(s, t):
    S = reachable_support(1.0, make_params(0.5, (0.25, 0.0625)))
    lhs = transition_at(s + t, S).matrix
    rhs = transition_at(s, S).matrix @ transition_at(t, S).matrix
    np.testing.assert_allclose(lhs, rhs, atol=1e-11)


def test_transition_rows_stochastic(space):
    m = transition_at(2.5, space).matrix
    assert np.all(m >= 0)
    np.testing.assert_allclose(m.sum(axis=1), 1.0, atol=1e-12)


def test_transition_tol_validation(space):
    with pytest.raises(ValueError):
        transition_at(1.0, space, tol=1e-3)
    with pytest.raises(ValueError):
        transition_at(-1.0, space)


def test_poisson_truncation():
    assert poisson_truncation(0.0, 1e-12) == 0
    k = poisson_truncation(5 / 36, 1e-12)
    from scipy.stats import poisson

    assert poisson.sf(k, 5 / 36) < 1e-12 <= poisson.sf(k - 1, 5 / 36)


def test_generator_of_identity(space):
    af = generator_apply(space.values, space)
    assert af[0] == pytest.approx(-5 / 81, rel=1e-14)
    assert af[-1] == 0.0


def test_generator_kills_constants(space):
    np.testing.assert_allclose(generator_apply(np.ones(len(space)), space), 0.0, atol=1e-16)


def test_resolvent_of_constant(space):
    u = resolvent_apply(2.0, np.ones(len(space)), space)
    np.testing.assert_allclose(u, 0.5, rtol=1e-14)
    with pytest.raises(ValueError):
        resolvent_apply(0.0, np.ones(len(space)), space)


def test_resolvent_inverts_generator(space):
    f = space.function(lambda y: y * y)
    u = resolvent_apply(1.5, f, space)
    np.testing.assert_allclose(1.5 * u - generator_apply(u, space), f, atol=1e-14)


def test_offspring_matrix_rows(space):
    q = offspring_matrix(space)
    np.testing.assert_allclose(q.sum(axis=1), 1.0, atol=1e-13)
    assert q[0, 1] == pytest.approx(80 / 891, rel=1e-13)


def test_cumulant_of_one_is_one(space):
    sol = cumulant_solve(np.ones(len(space)), 2.0, space)
    np.testing.assert_allclose(sol.values, 1.0, atol=1e-12)


def test_cumulant_at_time_zero(space):
    phi = space.function(lambda y: math.exp(-y))
    sol = cumulant_solve(phi, 0.0, space)
    np.testing.assert_array_equal(sol.final, phi)


def _hand_built(params, policy):
    """Generator and offspring matrices from the size-level formulas."""
    vals = np.array(DEFAULT_VALUES if policy == "edge" else DEFAULT_VALUES[:-1])
    b, g, lam = params.beta, params.gbeta, params.lambda0
    edge = 0.25
    idx = lambda y: int(np.argmin(np.abs(vals - y)))  # noqa: E731
    n = len(vals)
    gen = np.zeros((n, n))
    q = np.zeros((n, n))
    for k, x in enumerate(vals):
        if x == edge:
            q[k, k] = 1.0
            continue
        for y in (b * x, g * x):
            if y >= edge:
                gen[k, idx(y)] += lam * y
                gen[k, k] -= lam * y
        a = x * x * (1 / (b * g) - 1 / ((1 - b * b) * (1 - g * g)))
        inband = 0.0
        for i in range(10):
            for j in range(10):
                y = x * b**i * g**j
                if y >= edge:
                    q[k, idx(y)] += y * (x - y)
                    inband += y * (x - y)
        if policy == "edge":
            q[k] /= a
            q[k, idx(edge)] += 1 - inband / a
        else:
            q[k] = q[k] / inband if inband > 0 else np.eye(n)[k]
    return vals, gen, q


@pytest.mark.parametrize("policy, frozen", [("edge", H1_EDGE), ("conditioned", H1_CONDITIONED)])
def test_cumulant_matches_ode_oracle(params, policy, frozen):
    vals, gen, q = _hand_built(params, policy)
    phi = np.exp(-vals)
    rhs = lambda t, h: (gen - np.eye(len(h))) @ h + q @ (h * h)  # noqa: E731
    oracle = solve_ivp(rhs, (0.0, 1.0), phi, method="DOP853", rtol=1e-13, atol=1e-14).y[:, -1]
    S = reachable_support(1.0, params, policy)
    sol = cumulant_solve(S.function(lambda y: math.exp(-y)), 1.0, S)
    np.testing.assert_allclose(sol.final, oracle, atol=1e-9)
    assert sol.at(FractalCoord(0)) == pytest.approx(frozen, abs=1e-10)
    assert sol.picard_discrepancy <= 1e-8


def test_cumulant_monotone_in_phi(space):
    lo = space.function(lambda y: 0.5 * math.exp(-y))
    hi = space.function(lambda y: math.exp(-y))
    opts = CumulantOptions(cross_check=False)
    h_lo = cumulant_solve(lo, 1.0, space, opts).final
    h_hi = cumulant_solve(hi, 1.0, space, opts).final
    assert np.all(h_lo <= h_hi + 1e-15)
    assert np.all((0 <= h_lo) & (h_hi <= 1))


def test_cumulant_rejects_bad_phi(space):
    with pytest.raises(ValueError):
        cumulant_solve(np.full(len(space), 1.5), 1.0, space)
    with pytest.raises(ValueError):
        cumulant_solve(np.ones(3), 1.0, space)


def test_forward_equation_first_order(space):
    # (P_h f - f) / h -> A f with error O(h)
    f = space.function(lambda y: y**3)
    af = generator_apply(f, space)
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        diff = (transition_at(h, space).matrix @ f - f) / h
        errs.append(np.max(np.abs(diff - af)))
    assert errs[1] / errs[0] == pytest.approx(0.5, abs=0.05)
    assert errs[2] / errs[1] == pytest.approx(0.5, abs=0.05)


def test_branching_expectation_is_product(space):
    phi = space.function(lambda y: math.exp(-y))
    sol = cumulant_solve(phi, 1.0, space, CumulantOptions(cross_check=False))
    one = FractalCoord(0)
    pair = Configuration((one, one), (1.0,))
    assert branching_expectation(pair, phi, 1.0, space, solution=sol) == pytest.approx(sol.at(one) ** 2)
    assert branching_expectation(Configuration((), (1.0,)), phi, 1.0, space, solution=sol) == 1.0


def test_support_single_threshold_examples():
    p = make_params(0.5, (0.25,))
    np.testing.assert_allclose(reachable_support(1.0, p).values, DEFAULT_VALUES, rtol=1e-15)
    assert list(reachable_support(0.25, p).values) == [0.25]
    third = reachable_support(1 / 3, p)
    np.testing.assert_allclose(third.values, [1 / 3, 1 / 4], rtol=1e-15)
    assert third.coords[-1].clipped_band == 0


def test_frozen_state_generator_and_resolvent(space):
    f = space.function(lambda y: math.sin(7 * y))
    assert generator_apply(f, space)[-1] == 0.0
    u = resolvent_apply(3.0, f, space)
    assert u[-1] == pytest.approx(f[-1] / 3.0, rel=1e-14)


def test_chapman_kolmogorov_example(space):
    p1 = transition_at(1.0, space).matrix
    assert np.max(np.abs(transition_at(2.0, space).matrix - p1 @ p1)) <= 1e-10
