"""Closed-form analysis of the memory-cutoff policy.

Under cutoff t*, a request is made at every step while the link is down,
and an established link is held for exactly t* further steps before being
discarded and re-requested.  t* = 0 requests every step; t* = infinity keeps
the first established link forever.  All formulas here are exact in the
model and are cross-checked against brute-force history enumeration in the
tests.

Convention: this module uses the cutoff policy's mod-(t*+1) memory time
M_{t*}(t) = (sum_j X(j) - 1) mod (t*+1), which lives in {0..t*} and equals
t* when the memory is unloaded.  The engine's general M(t) (with -1 for
unloaded) is a different accessor; `memory_time_cutoff` maps between them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .engine import History, Policy

HYP2F1_REL_TOL = 1e-14
HYP2F1_MAX_TERMS = 10 ** 6


# ---------------------------------------------------------------------------
# the cutoff itself
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cutoff:
    """A memory cutoff t*: a non-negative integer or infinity."""

    value: float

    def __post_init__(self) -> None:
        if self.value == math.inf:
            return
        if self.value < 0 or int(self.value) != self.value:
            raise ValueError(f"cutoff must be a non-negative integer or inf, got {self.value}")
        object.__setattr__(self, "value", int(self.value))

    @property
    def is_infinite(self) -> bool:
        return self.value == math.inf

    @property
    def finite_value(self) -> int:
        if self.is_infinite:
            raise ValueError("infinite cutoff has no finite value")
        return int(self.value)

    @classmethod
    def parse(cls, value: Union["Cutoff", int, float, str]) -> "Cutoff":
        if isinstance(value, Cutoff):
            return value
        if isinstance(value, str):
            if value.lower() in ("inf", "infinity"):
                return cls(math.inf)
            return cls(int(value))
        return cls(value)

    def __str__(self) -> str:
        return "inf" if self.is_infinite else str(int(self.value))


CutoffLike = Union[Cutoff, int, float, str]


def _validate_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"success probability must be in [0, 1], got {p}")


# ---------------------------------------------------------------------------
# the policy and its memory/sequence accessors
# ---------------------------------------------------------------------------

def cutoff_policy(tstar: CutoffLike) -> Policy:
    """The deterministic memory-cutoff policy as an engine Policy.

    In engine state terms (x, M(t) with -1 for unloaded): request iff the
    memory is unloaded or has been held for t* steps.
    """
    cut = Cutoff.parse(tstar)
    if cut.is_infinite:
        rule = lambda t, x, m: 1.0 if x == 0 else 0.0
        label = "cutoff(inf)"
    else:
        ts = cut.finite_value
        rule = lambda t, x, m: 1.0 if (m == -1 or m >= ts) else 0.0
        label = f"cutoff({ts})"
    return Policy.from_state_rule(rule, "deterministic", label)


def memory_time_cutoff(history: Union[History, Sequence[int]], tstar: CutoffLike) -> int:
    """The cutoff policy's memory time M_{t*}(t) = (sum_j x_j - 1) mod (t*+1).

    Equals the engine's general M(t) whenever that is >= 0, and t* when the
    general M(t) is -1 (unloaded).  For t* = infinity it is sum_j x_j - 1.
    """
    xs = history.observations if isinstance(history, History) else tuple(history)
    cut = Cutoff.parse(tstar)
    total = sum(xs)
    if cut.is_infinite:
        return total - 1
    return (total - 1) % (cut.finite_value + 1)


@dataclass(frozen=True)
class SequenceStats:
    """(Y1, Y2) for a link-value sequence under a given cutoff.

    Y1 counts full blocks of t*+1 consecutive ones completed by time t-1;
    Y2 counts the remaining trailing ones up to time t.
    """

    y1: int
    y2: int


def sequence_stats(xs: Sequence[int], tstar: CutoffLike) -> SequenceStats:
    cut = Cutoff.parse(tstar)
    t = len(xs)
    if cut.is_infinite:
        trailing = 0
        for x in reversed(xs):
            if x != 1:
                break
            trailing += 1
        return SequenceStats(y1=0, y2=trailing)
    block = cut.finite_value + 1
    y1 = 0
    run = 0
    for j, x in enumerate(xs, start=1):
        if x == 1:
            run += 1
            if run == block and j < t:
                y1 += 1
                run = 0
        else:
            run = 0
    return SequenceStats(y1=y1, y2=run)


def history_prob_cutoff(stats: SequenceStats, t: int, tstar: CutoffLike,
                        p: float) -> float:
    """Probability of a supported history from its (Y1, Y2) statistics."""
    _validate_p(p)
    cut = Cutoff.parse(tstar)
    y1, y2 = stats.y1, stats.y2
    if t < 1 or y1 < 0 or y2 < 0:
        raise ValueError(f"unrealizable stats (t={t}, Y1={y1}, Y2={y2})")
    if cut.is_infinite:
        if y1 != 0 or y2 > t:
            raise ValueError(f"unrealizable stats for infinite cutoff (Y1={y1}, Y2={y2})")
        if y2 == 0:
            return (1.0 - p) ** t
        return p * (1.0 - p) ** (t - y2)
    ts = cut.finite_value
    block = ts + 1
    fail_exp = t - y2 - block * y1
    ok = (y2 <= min(block, t)) and fail_exp >= 0
    if y2 == 0:
        ok = ok and y1 <= (t - 1) // block
    if not ok:
        raise ValueError(f"unrealizable stats (t={t}, t*={ts}, Y1={y1}, Y2={y2})")
    if y2 == 0:
        return p ** y1 * (1.0 - p) ** fail_exp
    return p ** (y1 + 1) * (1.0 - p) ** fail_exp


def count_sequences(t: int, tstar: CutoffLike) -> int:
    """|Omega(t; t*)|: the number of link-value sequences with nonzero probability."""
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    cut = Cutoff.parse(tstar)
    if cut.is_infinite:
        return 1 + t
    ts = cut.finite_value
    block = ts + 1
    total = 0
    for b in range((t - 1) // block + 1):
        total += math.comb(t - 1 - b * ts, b)  # Y2 = 0 sequences
        for k in range(1, block + 1):
            if t - k - b * block >= 0:
                total += math.comb(t - k - b * ts, b)
    return total


# ---------------------------------------------------------------------------
# numerically stable binomial-sum terms
# ---------------------------------------------------------------------------

def _log_comb(n: int, k: int) -> float:
    if k < 0 or k > n:
        raise ValueError(f"invalid binomial C({n}, {k})")
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _term(n: int, b: int, p: float, succ: int, fail: int) -> float:
    """C(n, b) * p^succ * (1-p)^fail, evaluated in log space.

    All binomial-sum formulas below add terms of this positive form; log
    evaluation keeps huge binomials times tiny probability powers finite.
    """
    log_val = _log_comb(n, b)
    if succ:
        log_val += succ * math.log(p)
    if fail:
        log_val += fail * math.log1p(-p)
    return math.exp(log_val)


# ---------------------------------------------------------------------------
# joint and marginal link-status distributions
# ---------------------------------------------------------------------------

def joint_prob(t: int, tstar: CutoffLike, p: float, m: int, x: int) -> float:
    """Pr[M_{t*}(t) = m, X(t) = x] under the cutoff policy.

    For finite t* the memory time is the mod convention value in {0..t*};
    for t* = infinity, m = -1 encodes the unloaded memory (only state with
    X = 0) and m in {0..t-1} indexes ages of the kept link.
    """
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if x not in (0, 1):
        raise ValueError(f"x must be a bit, got {x}")
    _validate_p(p)
    cut = Cutoff.parse(tstar)

    if cut.is_infinite:
        if x == 0:
            if m != -1:
                raise ValueError(f"for infinite cutoff X=0 requires m=-1, got m={m}")
            return (1.0 - p) ** t
        if not 0 <= m <= t - 1:
            if m == -1:
                raise ValueError("m=-1 encodes the unloaded memory, not an active link")
            return 0.0
        return p * (1.0 - p) ** (t - m - 1)

    ts = cut.finite_value
    block = ts + 1
    if not 0 <= m <= ts:
        raise ValueError(f"m must be in 0..{ts}, got {m}")

    if p == 0.0:
        return 1.0 if (x == 0 and m == ts) else 0.0
    if p == 1.0:
        # the only sequence is all ones
        return 1.0 if (x == 1 and m == (t - 1) % block) else 0.0

    if x == 0:
        if m != ts:
            return 0.0
        if t <= ts + 1:
            return (1.0 - p) ** t
        total = 0.0
        for b in range((t - 1) // block + 1):
            total += _term(t - 1 - b * ts, b, p, b, t - b * block)
        return total

    # x == 1
    if t <= ts + 1:
        return p * (1.0 - p) ** (t - m - 1) if m <= t - 1 else 0.0
    total = 0.0
    for b in range((t - 1) // block + 1):
        fail = t - (m + 1) - b * block
        if fail < 0:
            continue
        total += _term(t - (m + 1) - b * ts, b, p, b + 1, fail)
    return total


def prob_active(t: int, tstar: CutoffLike, p: float) -> float:
    """Pr[X(t) = 1] under the cutoff policy."""
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    _validate_p(p)
    cut = Cutoff.parse(tstar)
    if cut.is_infinite or t <= cut.finite_value + 1:
        return 1.0 - (1.0 - p) ** t
    return sum(joint_prob(t, cut, p, m, 1) for m in range(cut.finite_value + 1))


@dataclass(frozen=True)
class SteadyState:
    """t -> infinity limits of the link-status distribution."""

    prob_active_inf: float
    joint_active_inf: dict[int, float]  # m -> lim Pr[M=m, X=1]
    joint_failed_inf: float             # lim Pr[M=t*, X=0]
    conditional_m_inf: Optional[float]  # lim Pr[M=m | X=1], uniform over m
    failure_weight_inf: float
    age_weights_inf: dict[int, float]


def steady_state(tstar: CutoffLike, p: float) -> SteadyState:
    _validate_p(p)
    cut = Cutoff.parse(tstar)
    if cut.is_infinite:
        # the first established link is kept forever
        active = 1.0 if p > 0.0 else 0.0
        return SteadyState(prob_active_inf=active, joint_active_inf={},
                           joint_failed_inf=1.0 - active, conditional_m_inf=None,
                           failure_weight_inf=1.0 - active, age_weights_inf={})
    ts = cut.finite_value
    denom = 1.0 + ts * p
    active = (ts + 1) * p / denom
    per_age = p / denom
    joint_active = {m: per_age for m in range(ts + 1)}
    failed = (1.0 - p) / denom
    conditional = 1.0 / (ts + 1) if p > 0.0 else None
    return SteadyState(prob_active_inf=active, joint_active_inf=joint_active,
                       joint_failed_inf=failed, conditional_m_inf=conditional,
                       failure_weight_inf=failed, age_weights_inf=dict(joint_active))


@dataclass(frozen=True)
class FidelityExpectations:
    e_ftilde: float
    e_f: Optional[float]  # None when the link is never active


def expected_fidelity_cutoff(t: int, tstar: CutoffLike, p: float,
                             fcurve: Callable[[int], float]) -> FidelityExpectations:
    """E[F~(t)] = sum_m f_m Pr[M=m, X=1] and E[F(t)] = E[F~(t)] / Pr[X=1]."""
    cut = Cutoff.parse(tstar)
    if cut.is_infinite:
        ages = range(t)
    else:
        ages = range(min(t, cut.finite_value + 1))
    e_ftilde = sum(fcurve(m) * joint_prob(t, cut, p, m, 1) for m in ages)
    active = prob_active(t, cut, p)
    if active == 0.0:
        return FidelityExpectations(e_ftilde=0.0, e_f=None)
    return FidelityExpectations(e_ftilde=e_ftilde, e_f=e_ftilde / active)


def steady_fidelity_cutoff(tstar: CutoffLike, p: float,
                           fcurve: Callable[[int], float]) -> FidelityExpectations:
    """Steady-state fidelity: E[F~] = p/(1+t*p) sum_m f_m, E[F] = mean of f_0..f_t*."""
    _validate_p(p)
    cut = Cutoff.parse(tstar)
    if cut.is_infinite:
        raise ValueError("steady-state fidelity sums require a finite cutoff")
    ts = cut.finite_value
    f_sum = sum(fcurve(m) for m in range(ts + 1))
    e_ftilde = p / (1.0 + ts * p) * f_sum
    if p == 0.0:
        return FidelityExpectations(e_ftilde=0.0, e_f=None)
    return FidelityExpectations(e_ftilde=e_ftilde, e_f=f_sum / (ts + 1))


# ---------------------------------------------------------------------------
# success rate
# ---------------------------------------------------------------------------

def expected_success_rate(t: int, tstar: CutoffLike, p: float) -> float:
    """E[S(t)]: expected fraction of link requests that succeeded by time t."""
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    _validate_p(p)
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    cut = Cutoff.parse(tstar)
    if cut.is_infinite or t <= cut.finite_value + 1:
        return sum(p * (1.0 - p) ** j / (j + 1) for j in range(t))
    ts = cut.finite_value
    block = ts + 1
    total = 0.0
    for b in range((t - 1) // block + 1):
        if b > 0:
            # all-trailing-zeros sequences: S = Y1 / (t - t* Y1)
            total += b / (t - ts * b) * _term(t - 1 - b * ts, b, p, b, t - b * block)
        for k in range(1, block + 1):
            fail = t - k - b * block
            if fail < 0:
                continue
            total += (b + 1) / (t - k - ts * b + 1) * _term(t - k - b * ts, b, p,
                                                           b + 1, fail)
    return total


@dataclass(frozen=True)
class SuccessRateLimits:
    limit: float
    plateau: Callable[[int], float]


def success_rate_limits(tstar: CutoffLike, p: float) -> SuccessRateLimits:
    """t -> infinity limit of E[S(t)] and the plateau values for t* = infinity.

    Finite t*: the limit is p.  t* = infinity: the limit is -p ln p / (1-p),
    and E[S(t)] descends through plateaus p * 2F1(1, 1, 2+x, 1-p), x = 0, 1, ...
    p in {0, 1} are handled as the continuous limits.
    """
    _validate_p(p)
    cut = Cutoff.parse(tstar)
    if p == 0.0:
        return SuccessRateLimits(limit=0.0, plateau=lambda x: 0.0)
    if p == 1.0:
        return SuccessRateLimits(limit=1.0, plateau=lambda x: 1.0)
    if cut.is_infinite:
        limit = -p * math.log(p) / (1.0 - p)
    else:
        limit = p

    def plateau(x: int) -> float:
        if x < 0:
            raise ValueError(f"plateau index must be >= 0, got {x}")
        return p * hyp2f1_series(1.0, 1.0, 2.0 + x, 1.0 - p)

    return SuccessRateLimits(limit=limit, plateau=plateau)


def hyp2f1_series(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric 2F1(a, b; c; z) by direct series summation."""
    if abs(z) >= 1.0:
        raise ValueError(f"series requires |z| < 1, got {z}")
    if c <= 0.0 and c == int(c):
        raise ValueError(f"c must not be a non-positive integer, got {c}")
    total = 1.0
    term = 1.0
    for n in range(HYP2F1_MAX_TERMS):
        term *= (a + n) * (b + n) / ((c + n) * (1.0 + n)) * z
        total += term
        if abs(term) < HYP2F1_REL_TOL * abs(total):
            return total
    raise ArithmeticError(f"2F1 series did not converge for z={z}")


# ---------------------------------------------------------------------------
# waiting time
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WaitingTime:
    """The waiting-time law for an end-user request at time t_req.

    ``pmf(t)`` is the analytic form q * p * (1-p)^(t-2) for t >= 1, where
    q = Pr[M = t*, X = 0 at t_req + 1]; its total mass is q/(1-p), not 1
    in general (the t = 1 value extrapolates the geometric tail rather than
    equal Pr[X(t_req+1) = 1]).  ``expectation`` = q / (p (1-p)) follows the
    same convention; ``conditional_pmf`` is the properly normalized law of
    the wait given the link was down at t_req + 1.
    """

    t_req: int
    expectation: float
    limit: float
    pmf: Callable[[int], float]
    total_mass: float

    def conditional_pmf(self, t: int) -> float:
        """Pr[W = t | link down at t_req + 1]: geometric from t = 2.

        The analytic pmf restricted to t >= 2 has total mass q (the down
        probability itself), so renormalizing by it yields a proper law.
        """
        if t < 2:
            return 0.0
        mass = self.total_mass - self.pmf(1)  # = q
        if mass == 0.0:
            return 0.0
        return self.pmf(t) / mass


def waiting_time(t_req: int, tstar: CutoffLike, p: float) -> WaitingTime:
    if t_req < 0:
        raise ValueError(f"t_req must be >= 0, got {t_req}")
    _validate_p(p)
    cut = Cutoff.parse(tstar)
    if p == 1.0:
        # a request never fails: the link is re-established instantly
        return WaitingTime(t_req=t_req, expectation=1.0, limit=1.0,
                           pmf=lambda t: 1.0 if t == 1 else 0.0, total_mass=1.0)
    if p == 0.0:
        return WaitingTime(t_req=t_req, expectation=math.inf, limit=math.inf,
                           pmf=lambda t: 0.0, total_mass=0.0)
    if cut.is_infinite:
        q = (1.0 - p) ** (t_req + 1)
        limit = 0.0
    else:
        q = joint_prob(t_req + 1, cut, p, cut.finite_value, 0)
        limit = 1.0 / (p * (1.0 + cut.finite_value * p))

    def pmf(t: int) -> float:
        if t < 1:
            return 0.0
        return q * p * (1.0 - p) ** (t - 2)

    return WaitingTime(t_req=t_req, expectation=q / (p * (1.0 - p)), limit=limit,
                       pmf=pmf, total_mass=q / (1.0 - p))


def simulate_waiting_time(t_req: int, tstar: CutoffLike, p: float,
                          n_trials: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of the waiting-time expectation; returns (mean, SE).

    Each trial simulates the always-on generation chain through t_req + 1;
    if the link is down there, it keeps simulating requests until the next
    success.  The per-trial statistic 1{down} * (attempts) / (1-p) is an
    unbiased estimator of q * E[attempts] / (1-p) = q / (p (1-p)), the
    analytic expectation above.
    """
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    _validate_p(p)
    if p in (0.0, 1.0):
        raise ValueError("Monte Carlo waiting time requires p in (0, 1)")
    cut = Cutoff.parse(tstar)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed)))
    ts = None if cut.is_infinite else cut.finite_value

    # vectorized over trials: one uniform per step of the length-(t_req+1) chain
    n = n_trials
    x = (rng.random(n) < p).astype(np.int64)
    m = np.where(x == 1, 0, ts if ts is not None else -1)
    for _ in range(t_req):
        if ts is None:
            request = x == 0
        else:
            request = (x == 0) | (m >= ts)
        u = rng.random(n)
        succ = request & (u < p)
        failr = request & ~succ
        m = np.where(succ, 0, np.where(failr, ts if ts is not None else -1, m + x))
        x = np.where(succ, 1, np.where(failr, 0, x))
    down = x == 0
    attempts = rng.geometric(p, size=n)  # attempts until the next success
    z = np.where(down, attempts, 0) / (1.0 - p)
    mean = float(z.mean())
    se = float(z.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return mean, se


# ---------------------------------------------------------------------------
# Markov-chain form
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransitionMatrix:
    """The cutoff policy's (X, M) chain as a column-stochastic matrix.

    For finite t*, states are all (x, m) pairs with m in {0..t*}; for
    t* = infinity, states are x alone.  ``matrix[i, j]`` is the probability
    of moving to state i from state j.
    """

    tstar: Cutoff
    p: float
    states: tuple
    matrix: np.ndarray

    def state_index(self, state) -> int:
        return self.states.index(state)

    def initial_distribution(self) -> np.ndarray:
        """The t = 1 distribution (the A(0) = 1 request)."""
        dist = np.zeros(len(self.states))
        if self.tstar.is_infinite:
            dist[self.state_index(1)] = self.p
            dist[self.state_index(0)] = 1.0 - self.p
        else:
            dist[self.state_index((1, 0))] = self.p
            dist[self.state_index((0, self.tstar.finite_value))] = 1.0 - self.p
        return dist

    def distribution_at(self, t: int) -> np.ndarray:
        if t < 1:
            raise ValueError(f"t must be >= 1, got {t}")
        return np.linalg.matrix_power(self.matrix, t - 1) @ self.initial_distribution()


def transition_matrix(tstar: CutoffLike, p: float) -> TransitionMatrix:
    _validate_p(p)
    cut = Cutoff.parse(tstar)
    if cut.is_infinite:
        # states (x=0, x=1); an established link is kept forever
        mat = np.array([[1.0 - p, 0.0],
                        [p, 1.0]])
        return TransitionMatrix(tstar=cut, p=p, states=(0, 1), matrix=mat)
    ts = cut.finite_value
    states = tuple((x, m) for x in (0, 1) for m in range(ts + 1))
    index = {s: i for i, s in enumerate(states)}
    mat = np.zeros((len(states), len(states)))
    for (x, m), j in index.items():
        if x == 1 and m < ts:
            # keep the link one more step
            mat[index[(1, m + 1)], j] = 1.0
        else:
            # memory unloaded (x=0) or at cutoff age: a request is made
            mat[index[(1, 0)], j] = p
            mat[index[(0, ts)], j] = 1.0 - p
    return TransitionMatrix(tstar=cut, p=p, states=states, matrix=mat)
