"""Closed-form cutoff-policy analytics against independent oracles."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qlink.cutoff import (
    Cutoff,
    count_sequences,
    cutoff_policy,
    expected_fidelity_cutoff,
    expected_success_rate,
    history_prob_cutoff,
    hyp2f1_series,
    joint_prob,
    memory_time_cutoff,
    prob_active,
    sequence_stats,
    simulate_waiting_time,
    steady_fidelity_cutoff,
    steady_state,
    success_rate_limits,
    transition_matrix,
    waiting_time,
)
from qlink.engine import History, iter_supported_histories
from qlink.quantum import FidelityCurve

from oracles import enumerate_supported, exact_joint_prob, exact_success_rate

TSTARS = [0, 1, 2, 3, 5, math.inf]


# ---------------------------------------------------------------------------
# Cutoff
# ---------------------------------------------------------------------------

def test_cutoff_parse_and_str():
    assert Cutoff.parse(3).finite_value == 3
    assert Cutoff.parse("7").finite_value == 7
    assert Cutoff.parse("inf").is_infinite
    assert Cutoff.parse("Infinity").is_infinite
    assert str(Cutoff(math.inf)) == "inf"
    assert str(Cutoff(4)) == "4"
    with pytest.raises(ValueError):
        Cutoff(-1)
    with pytest.raises(ValueError):
        Cutoff(2.5)
    with pytest.raises(ValueError):
        Cutoff(math.inf).finite_value


def test_cutoff_policy_decisions():
    rule = cutoff_policy(2).decide_state
    assert rule(1, 0, -1) == 1.0  # down: request
    assert rule(1, 1, 0) == 0.0   # fresh link: hold
    assert rule(1, 1, 1) == 0.0
    assert rule(1, 1, 2) == 1.0   # at cutoff age: discard and re-request
    inf_rule = cutoff_policy("inf").decide_state
    assert inf_rule(1, 0, -1) == 1.0
    assert inf_rule(1, 1, 99) == 0.0


@pytest.mark.parametrize("tstar", TSTARS)
def test_memory_time_cutoff_matches_engine_on_support(tstar):
    """On supported sequences the mod-convention memory time agrees with the
    engine's M(t) whenever loaded and equals t* when unloaded (finite t*)."""
    for t in (1, 3, 6, 8):
        for xs, _ns, _nf, age in enumerate_supported(t, tstar):
            m = memory_time_cutoff(xs, tstar)
            if age >= 0:
                assert m == age
            elif tstar != math.inf:
                assert m == tstar
            else:
                assert m == -1


# ---------------------------------------------------------------------------
# sequence statistics and per-sequence probabilities
# ---------------------------------------------------------------------------

def test_sequence_stats_examples():
    # t* = 3: full blocks are runs of 4 ones completed before the final time
    assert sequence_stats((1, 1, 1, 1, 0, 0, 0, 0, 0, 0), 3) == \
        sequence_stats((0, 0, 0, 0, 0, 1, 1, 1, 1, 0), 3)
    stats = sequence_stats((1, 1, 1, 1, 0, 0, 0, 0, 0, 0), 3)
    assert (stats.y1, stats.y2) == (1, 0)
    # a block completing exactly at time t counts as trailing ones
    stats = sequence_stats((0, 0, 0, 0, 0, 0, 1, 1, 1, 1), 3)
    assert (stats.y1, stats.y2) == (0, 4)
    stats = sequence_stats((1, 1, 1, 1, 1, 1, 1, 1, 1, 1), 3)
    assert (stats.y1, stats.y2) == (2, 2)
    stats = sequence_stats((1,) * 6, "inf")
    assert (stats.y1, stats.y2) == (0, 6)


@pytest.mark.parametrize("tstar", TSTARS)
@pytest.mark.parametrize("p", [0.2, 0.5, 0.85])
def test_history_prob_cutoff_matches_success_failure_counts(tstar, p):
    """p^(successes) (1-p)^(failures) from the replay oracle equals the
    (Y1, Y2) closed form on every supported sequence."""
    for t in (1, 4, 7, 9):
        for xs, n_succ, n_fail, _age in enumerate_supported(t, tstar):
            stats = sequence_stats(xs, tstar)
            expected = p ** n_succ * (1.0 - p) ** n_fail
            assert history_prob_cutoff(stats, t, tstar, p) == \
                pytest.approx(expected, rel=1e-12)


def test_history_prob_cutoff_rejects_unrealizable_stats():
    from qlink.cutoff import SequenceStats
    with pytest.raises(ValueError):
        history_prob_cutoff(SequenceStats(y1=3, y2=0), t=4, tstar=3, p=0.5)
    with pytest.raises(ValueError):
        history_prob_cutoff(SequenceStats(y1=0, y2=9), t=4, tstar=3, p=0.5)
    with pytest.raises(ValueError):
        history_prob_cutoff(SequenceStats(y1=1, y2=0), t=3, tstar=math.inf, p=0.5)


@pytest.mark.parametrize("tstar", TSTARS)
def test_count_sequences_matches_enumeration(tstar):
    for t in range(1, 13):
        assert count_sequences(t, tstar) == sum(1 for _ in enumerate_supported(t, tstar))


def test_count_sequences_closed_cases():
    for t in range(1, 15):
        assert count_sequences(t, 0) == 2 ** t          # every bitstring
        assert count_sequences(t, "inf") == 1 + t       # run length of final ones
        assert count_sequences(t, t) == 1 + t           # t <= t* + 1
    assert count_sequences(10, 3) == 36


# ---------------------------------------------------------------------------
# joint status distribution
# ---------------------------------------------------------------------------

def _joint_support(t, tstar):
    if tstar == math.inf:
        return [(m, 1) for m in range(t)] + [(-1, 0)]
    ts = int(tstar)
    return [(m, 1) for m in range(min(t, ts + 1))] + [(ts, 0)]


@given(t=st.integers(1, 300), tstar=st.sampled_from(TSTARS),
       p=st.floats(0.01, 0.99))
@settings(max_examples=150, deadline=None)
def test_joint_prob_normalizes(t, tstar, p):
    total = sum(joint_prob(t, tstar, p, m, x) for m, x in _joint_support(t, tstar))
    assert total == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("tstar", [0, 1, 2, 3, 5])
@pytest.mark.parametrize("p", [Fraction(1, 7), Fraction(1, 2), Fraction(9, 10)])
def test_joint_prob_matches_exact_rational_oracle(tstar, p):
    for t in range(1, 31):
        for m, x in _joint_support(t, tstar):
            exact = float(exact_joint_prob(t, tstar, p, m, x))
            got = joint_prob(t, tstar, float(p), m, x)
            assert got == pytest.approx(exact, rel=1e-11, abs=1e-13)


@pytest.mark.parametrize("tstar", TSTARS)
def test_joint_prob_matches_enumeration(tstar):
    p = 0.3
    for t in (1, 3, 6, 9):
        grouped = {}
        for xs, n_succ, n_fail, age in enumerate_supported(t, tstar):
            x = xs[-1]
            if tstar == math.inf:
                m = age
            else:
                m = age if age >= 0 else tstar
            grouped[(m, x)] = grouped.get((m, x), 0.0) + \
                p ** n_succ * (1.0 - p) ** n_fail
        for (m, x), weight in grouped.items():
            assert joint_prob(t, tstar, p, m, x) == pytest.approx(weight, rel=1e-12)


def test_joint_prob_edge_probabilities():
    assert joint_prob(8, 3, 0.0, 3, 0) == 1.0
    assert joint_prob(8, 3, 0.0, 1, 1) == 0.0
    assert joint_prob(8, 3, 1.0, (8 - 1) % 4, 1) == 1.0
    assert joint_prob(8, 3, 1.0, 3, 0) == 0.0
    with pytest.raises(ValueError):
        joint_prob(5, 3, 0.5, 4, 1)
    with pytest.raises(ValueError):
        joint_prob(5, math.inf, 0.5, 0, 0)


@pytest.mark.parametrize("tstar", TSTARS)
@pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
def test_prob_active_forms(tstar, p):
    for t in range(1, 15):
        if tstar == math.inf or t <= tstar + 1:
            assert prob_active(t, tstar, p) == pytest.approx(1 - (1 - p) ** t,
                                                             abs=1e-12)
        active = sum(joint_prob(t, tstar, p, m, 1) for m, x in
                     _joint_support(t, tstar) if x == 1)
        assert prob_active(t, tstar, p) == pytest.approx(active, abs=1e-12)


# ---------------------------------------------------------------------------
# steady state and fidelity expectations
# ---------------------------------------------------------------------------

def test_steady_state_values():
    ss = steady_state(2, 0.5)
    assert ss.prob_active_inf == pytest.approx(3 * 0.5 / 2.0)
    assert ss.joint_active_inf == {m: pytest.approx(0.25) for m in range(3)}
    assert ss.joint_failed_inf == pytest.approx(0.25)
    assert ss.conditional_m_inf == pytest.approx(1 / 3)
    inf_ss = steady_state("inf", 0.3)
    assert inf_ss.prob_active_inf == 1.0
    assert steady_state("inf", 0.0).prob_active_inf == 0.0


@pytest.mark.parametrize("tstar", [0, 2, 5])
@pytest.mark.parametrize("p", [0.2, 0.6])
def test_steady_state_is_large_t_limit(tstar, p):
    ss = steady_state(tstar, p)
    t = 2000
    assert prob_active(t, tstar, p) == pytest.approx(ss.prob_active_inf, abs=1e-8)
    for m in range(tstar + 1):
        assert joint_prob(t, tstar, p, m, 1) == pytest.approx(
            ss.joint_active_inf[m], abs=1e-8)


def test_fidelity_expectations():
    curve = FidelityCurve.depolarizing(1.0, 0.9, 4)
    fid = expected_fidelity_cutoff(6, 2, 0.4, curve)
    expected = sum(curve(m) * joint_prob(6, 2, 0.4, m, 1) for m in range(3))
    assert fid.e_ftilde == pytest.approx(expected, abs=1e-14)
    assert fid.e_f == pytest.approx(expected / prob_active(6, 2, 0.4), abs=1e-14)
    assert expected_fidelity_cutoff(4, 2, 0.0, curve).e_f is None

    steady = steady_fidelity_cutoff(2, 0.4, curve)
    assert steady.e_f == pytest.approx(sum(curve(m) for m in range(3)) / 3, abs=1e-14)
    # the finite-t expectation converges to the steady value
    late = expected_fidelity_cutoff(2000, 2, 0.4, curve)
    assert late.e_ftilde == pytest.approx(steady.e_ftilde, abs=1e-8)
    with pytest.raises(ValueError):
        steady_fidelity_cutoff("inf", 0.4, curve)


# ---------------------------------------------------------------------------
# success rate
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("tstar", [0, 1, 2, 3, 5, math.inf])
@pytest.mark.parametrize("p", [Fraction(1, 4), Fraction(3, 5)])
def test_success_rate_matches_exact_rational_oracle(tstar, p):
    for t in range(1, 31):
        exact = float(exact_success_rate(t, tstar, p))
        assert expected_success_rate(t, tstar, float(p)) == \
            pytest.approx(exact, rel=1e-11)


@pytest.mark.parametrize("tstar", [0, 2, math.inf])
def test_success_rate_matches_history_enumeration(tstar):
    p = 0.35
    policy = cutoff_policy(tstar)
    for t in (1, 4, 8):
        expected = sum(w * h.n_succ() / h.n_req()
                       for h, w in iter_supported_histories(p, policy, t))
        assert expected_success_rate(t, tstar, p) == pytest.approx(expected,
                                                                   abs=1e-13)


def test_success_rate_limits_and_plateaus():
    finite = success_rate_limits(3, 0.3)
    assert finite.limit == 0.3
    inf = success_rate_limits("inf", 0.3)
    assert inf.limit == pytest.approx(-0.3 * math.log(0.3) / 0.7, abs=1e-14)
    # plateau(0) is the t -> infinity limit itself
    assert inf.plateau(0) == pytest.approx(inf.limit, abs=1e-12)
    assert success_rate_limits("inf", 0.0).limit == 0.0
    assert success_rate_limits("inf", 1.0).limit == 1.0
    with pytest.raises(ValueError):
        inf.plateau(-1)


def test_hyp2f1_series():
    # 2F1(1,1;2;z) = -ln(1-z)/z
    for z in (0.05, 0.4, 0.9, -0.5):
        assert hyp2f1_series(1, 1, 2, z) == pytest.approx(-math.log1p(-z) / z,
                                                          rel=1e-12)
    # 2F1(1,b;b;z) = 1/(1-z)
    assert hyp2f1_series(1, 3, 3, 0.25) == pytest.approx(1 / 0.75, rel=1e-13)
    with pytest.raises(ValueError):
        hyp2f1_series(1, 1, 2, 1.0)
    with pytest.raises(ValueError):
        hyp2f1_series(1, 1, 0, 0.5)


# ---------------------------------------------------------------------------
# waiting time
# ---------------------------------------------------------------------------

def test_waiting_time_expectation_matches_pmf_series():
    wait = waiting_time(10, 5, 0.3)
    series = sum(t * wait.pmf(t) for t in range(1, 3000))
    assert wait.expectation == pytest.approx(series, rel=1e-12)
    assert wait.total_mass == pytest.approx(sum(wait.pmf(t) for t in range(1, 3000)),
                                            rel=1e-12)


def test_waiting_time_conditional_pmf_normalizes():
    for tstar in (0, 5, math.inf):
        wait = waiting_time(7, tstar, 0.4)
        total = sum(wait.conditional_pmf(t) for t in range(0, 2000))
        assert total == pytest.approx(1.0, abs=1e-12)
        assert wait.conditional_pmf(1) == 0.0


def test_waiting_time_known_values():
    # fresh request at t_req = 0: the link is down iff the A(0) request failed
    wait = waiting_time(0, 4, 0.25)
    assert wait.expectation == pytest.approx(1 / 0.25, rel=1e-12)
    assert wait.limit == pytest.approx(1 / (0.25 * (1 + 4 * 0.25)), rel=1e-12)
    # infinite cutoff: q = (1-p)^(t_req+1), the limit vanishes
    inf_wait = waiting_time(3, math.inf, 0.5)
    assert inf_wait.expectation == pytest.approx(0.5 ** 4 / (0.5 * 0.5), rel=1e-12)
    assert inf_wait.limit == 0.0
    # the expectation approaches the limit for late requests
    late = waiting_time(3000, 4, 0.25)
    assert late.expectation == pytest.approx(late.limit, abs=1e-8)


def test_waiting_time_edge_probabilities():
    sure = waiting_time(5, 3, 1.0)
    assert sure.expectation == 1.0 and sure.pmf(1) == 1.0
    never = waiting_time(5, 3, 0.0)
    assert never.expectation == math.inf
    with pytest.raises(ValueError):
        waiting_time(-1, 3, 0.5)


def test_simulated_waiting_time_matches_formula():
    wait = waiting_time(10, 5, 0.3)
    mean, se = simulate_waiting_time(10, 5, 0.3, n_trials=40_000, seed=11)
    assert abs(mean - wait.expectation) < 4 * se
    with pytest.raises(ValueError):
        simulate_waiting_time(2, 3, 1.0, 10, seed=0)


# ---------------------------------------------------------------------------
# Markov-chain form
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("tstar", [0, 1, 3, math.inf])
@pytest.mark.parametrize("p", [0.2, 0.7])
def test_transition_matrix_is_column_stochastic(tstar, p):
    tm = transition_matrix(tstar, p)
    np.testing.assert_allclose(tm.matrix.sum(axis=0), 1.0, atol=1e-14)
    assert (tm.matrix >= 0).all()
    np.testing.assert_allclose(tm.initial_distribution().sum(), 1.0, atol=1e-14)


def test_transition_matrix_entries():
    tm = transition_matrix(2, 0.4)
    i = tm.state_index
    # active below the cutoff age: deterministically ages by one step
    assert tm.matrix[i((1, 1)), i((1, 0))] == 1.0
    assert tm.matrix[i((1, 2)), i((1, 1))] == 1.0
    # at the cutoff age or down: a fresh request is made
    for src in ((1, 2), (0, 0), (0, 1), (0, 2)):
        assert tm.matrix[i((1, 0)), i(src)] == pytest.approx(0.4)
        assert tm.matrix[i((0, 2)), i(src)] == pytest.approx(0.6)
    inf_tm = transition_matrix(math.inf, 0.4)
    np.testing.assert_allclose(inf_tm.matrix, [[0.6, 0.0], [0.4, 1.0]])


@pytest.mark.parametrize("tstar", [0, 2, 4])
def test_transition_matrix_powers_reproduce_joint(tstar):
    p = 0.35
    tm = transition_matrix(tstar, p)
    for t in (1, 2, 7, 20):
        dist = tm.distribution_at(t)
        for (x, m), idx in ((s, i) for i, s in enumerate(tm.states)):
            assert dist[idx] == pytest.approx(joint_prob(t, tstar, p, m, x),
                                              abs=1e-12)


def test_transition_matrix_infinite_powers():
    p = 0.35
    tm = transition_matrix(math.inf, p)
    for t in (1, 5, 15):
        dist = tm.distribution_at(t)
        assert dist[tm.state_index(0)] == pytest.approx((1 - p) ** t, abs=1e-12)
        assert dist[tm.state_index(1)] == pytest.approx(1 - (1 - p) ** t, abs=1e-12)
