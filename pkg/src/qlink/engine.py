"""The elementary-link decision process: histories, policies, exact evolution,
and Monte Carlo trajectory simulation.

Time convention.  Observations are X(1), X(2), ... with X(t) in {0, 1}
("link active at time t").  Actions are A(1), ..., A(t-1) with A(t) in
{0 = wait, 1 = request}; a request is always made before the first step
(A(0) = 1).  A request at time t succeeds with probability p, producing
X(t+1) = 1 and a fresh memory; waiting carries the current link value over
unchanged.  The memory time M(t) counts the steps the current state has sat
in memory, with -1 for an unloaded memory:

    M(t) = M(t-1) + X(t)   if A(t-1) = 0
    M(t) = X(t) - 1        if A(t-1) = 1

The engine runs symbolically on (p, FidelityCurve); density matrices enter
only through `materialize_average_state`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

from .quantum import (
    DensityOperator,
    FidelityCurve,
    KrausChannel,
    PureState,
    fidelity,
    memory_evolve,
)

EXHAUSTIVE_WARN_HORIZON = 20
WEIGHT_SUM_TOL = 1e-12


# ---------------------------------------------------------------------------
# histories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class History:
    """Alternating observation/action record (x1, a1, x2, ..., a_{t-1}, x_t)."""

    observations: tuple[int, ...]
    actions: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.observations) < 1:
            raise ValueError("history needs at least one observation")
        if len(self.actions) != len(self.observations) - 1:
            raise ValueError(
                f"history with {len(self.observations)} observations must have "
                f"{len(self.observations) - 1} actions, got {len(self.actions)}"
            )
        if any(x not in (0, 1) for x in self.observations):
            raise ValueError("observations must be bits")
        if any(a not in (0, 1) for a in self.actions):
            raise ValueError("actions must be bits")

    @property
    def t(self) -> int:
        return len(self.observations)

    def memory_time(self) -> int:
        """M(t) by the recursion; -1 means the memory is unloaded."""
        m = -1
        a_prev = 1  # A(0) = 1
        for j, x in enumerate(self.observations):
            m = m + x if a_prev == 0 else x - 1
            if j < len(self.actions):
                a_prev = self.actions[j]
        return m

    def memory_time_explicit(self) -> int:
        """M(t) by the explicit sum over request times (cross-check form).

        M(t) = sum_j A(j-1) (sum_{l=j..t} X(l) - 1) prod_{k=j..t-1} (1 - A(k)),
        with A(0) = 1.  Exactly one term survives: the most recent request.
        """
        t = self.t
        xs = self.observations
        total = 0
        for j in range(1, t + 1):
            a_prev = 1 if j == 1 else self.actions[j - 2]
            if a_prev == 0:
                continue
            blocker = 1
            for k in range(j, t):
                blocker *= 1 - self.actions[k - 1]
            if blocker == 0:
                continue
            total += sum(xs[j - 1:]) - 1
        return total

    def n_req(self) -> int:
        """Number of requests made up to time t (A(0) counts)."""
        return 1 + sum(self.actions)

    def n_succ(self) -> int:
        """Number of successful requests up to time t."""
        total = self.observations[0]  # A(0) = 1
        for j, a in enumerate(self.actions):
            total += a * self.observations[j + 1]
        return total


# ---------------------------------------------------------------------------
# policies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Policy:
    """A decision-function family d_t: histories -> Pr[A(t) = 1].

    ``decide`` consumes the full history; ``decide_state`` is an optional
    fast path for policies that only look at (t, x_t, M(t)) -- the simulator
    uses it when present to avoid building History objects per step.
    """

    decide: Callable[[int, History], float]
    kind: str  # "deterministic" | "stochastic"
    label: str = ""
    decide_state: Optional[Callable[[int, int, int], float]] = None

    def action_prob(self, t: int, history: History) -> float:
        val = float(self.decide(t, history))
        if not 0.0 <= val <= 1.0:
            raise ValueError(f"policy returned probability {val} outside [0, 1]")
        if self.kind == "deterministic" and val not in (0.0, 1.0):
            raise ValueError(f"deterministic policy returned {val}")
        return val

    @classmethod
    def from_state_rule(cls, rule: Callable[[int, int, int], float], kind: str,
                        label: str = "") -> "Policy":
        """Build a policy from a rule on (t, x_t, M(t))."""

        def decide(t: int, history: History) -> float:
            return rule(t, history.observations[-1], history.memory_time())

        return cls(decide=decide, kind=kind, label=label, decide_state=rule)

    @classmethod
    def always_request(cls) -> "Policy":
        return cls.from_state_rule(lambda t, x, m: 1.0, "deterministic", "always-request")

    @classmethod
    def never_request(cls) -> "Policy":
        return cls.from_state_rule(lambda t, x, m: 0.0, "deterministic", "never-request")


# ---------------------------------------------------------------------------
# link parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinkParams:
    """Physical model of one elementary link.

    Symbolic mode carries only (p, fidelity curve).  Materialized mode also
    carries (rho0, memory channel, target) so that average states can be
    produced as density matrices; its fidelity curve is derived from channel
    powers.
    """

    p: float
    fcurve: FidelityCurve
    rho0: Optional[DensityOperator] = None
    channel: Optional[KrausChannel] = None
    target: Optional[PureState] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"success probability must be in [0, 1], got {self.p}")
        mats = (self.rho0, self.channel, self.target)
        if any(m is not None for m in mats) and any(m is None for m in mats):
            raise ValueError("materialized mode needs rho0, channel and target together")
        if self.rho0 is not None:
            assert self.channel is not None and self.target is not None
            if not (self.rho0.dim == self.channel.dim_in == self.channel.dim_out
                    == self.target.dim):
                raise ValueError("rho0/channel/target dimensions disagree")

    @property
    def materialized(self) -> bool:
        return self.rho0 is not None

    @classmethod
    def symbolic(cls, p: float, fcurve: FidelityCurve) -> "LinkParams":
        return cls(p=p, fcurve=fcurve)

    @classmethod
    def from_quantum(cls, p: float, rho0: DensityOperator, channel: KrausChannel,
                     target: PureState) -> "LinkParams":
        fcurve = FidelityCurve.from_channel(rho0, channel, target)
        return cls(p=p, fcurve=fcurve, rho0=rho0, channel=channel, target=target)


# ---------------------------------------------------------------------------
# exact evolution
# ---------------------------------------------------------------------------

@dataclass
class LinkStateMixture:
    """Average classical-quantum state at a fixed time, kept symbolically.

    ``failure_weight`` is 1 - Pr[X(t) = 1]; ``age_weights[m]`` is
    Pr[X(t) = 1, M(t) = m].
    """

    t: int
    failure_weight: float
    age_weights: dict[int, float]

    def check_normalized(self, tol: float = WEIGHT_SUM_TOL) -> None:
        total = self.failure_weight + sum(self.age_weights.values())
        if abs(total - 1.0) > tol:
            raise ValueError(f"mixture weights at t={self.t} sum to {total}")
        if self.failure_weight < -tol or any(w < -tol for w in self.age_weights.values()):
            raise ValueError(f"negative weight in mixture at t={self.t}")

    @property
    def prob_active(self) -> float:
        return sum(self.age_weights.values())


def history_prob(history: History, policy: Policy, p: float) -> float:
    """Pr[H(t) = h] = prod_j d_j(a_j) * p^N_succ * (1-p)^(N_req - N_succ).

    Histories outside the transition support (waiting must carry the link
    value over) get probability 0.
    """
    xs, acts = history.observations, history.actions
    prob = p if xs[0] == 1 else 1.0 - p  # A(0) = 1
    for j, a in enumerate(acts, start=1):
        pi1 = policy.action_prob(j, History(xs[:j], acts[: j - 1]))
        prob *= pi1 if a == 1 else 1.0 - pi1
        if prob == 0.0:
            return 0.0
        if a == 1:
            prob *= p if xs[j] == 1 else 1.0 - p
        elif xs[j] != xs[j - 1]:
            return 0.0
    return prob


def iter_supported_histories(p: float, policy: Policy, horizon: int
                             ) -> Iterator[tuple[History, float]]:
    """All length-`horizon` histories with nonzero probability, with weights."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")

    def walk(xs: tuple[int, ...], acts: tuple[int, ...], weight: float
             ) -> Iterator[tuple[History, float]]:
        t = len(xs)
        if t == horizon:
            yield History(xs, acts), weight
            return
        pi1 = policy.action_prob(t, History(xs, acts))
        for a, a_prob in ((1, pi1), (0, 1.0 - pi1)):
            if a_prob == 0.0:
                continue
            if a == 1:
                for x, x_prob in ((1, p), (0, 1.0 - p)):
                    if x_prob == 0.0:
                        continue
                    yield from walk(xs + (x,), acts + (a,), weight * a_prob * x_prob)
            else:
                yield from walk(xs + (xs[-1],), acts + (a,), weight * a_prob)

    for x1, x_prob in ((1, p), (0, 1.0 - p)):
        if x_prob != 0.0:
            yield from walk((x1,), (), x_prob)


def evolve_exhaustive(params: LinkParams, policy: Policy, horizon: int
                      ) -> list[LinkStateMixture]:
    """Exact average state at every t = 1..horizon by support enumeration."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if horizon > EXHAUSTIVE_WARN_HORIZON:
        warnings.warn(
            f"exhaustive evolution at horizon {horizon} may enumerate a very "
            f"large history support", RuntimeWarning, stacklevel=2)
    p = params.p
    failure = [0.0] * (horizon + 1)
    ages: list[dict[int, float]] = [dict() for _ in range(horizon + 1)]

    def record(t: int, x: int, m: int, weight: float) -> None:
        if x == 1:
            ages[t][m] = ages[t].get(m, 0.0) + weight
        else:
            failure[t] += weight

    def walk(xs: tuple[int, ...], acts: tuple[int, ...], x: int, m: int,
             weight: float) -> None:
        t = len(xs)
        record(t, x, m, weight)
        if t == horizon:
            return
        pi1 = policy.action_prob(t, History(xs, acts))
        if pi1 > 0.0:
            for xn, x_prob in ((1, p), (0, 1.0 - p)):
                if x_prob != 0.0:
                    walk(xs + (xn,), acts + (1,), xn, xn - 1, weight * pi1 * x_prob)
        if pi1 < 1.0:
            walk(xs + (x,), acts + (0,), x, m + x, weight * (1.0 - pi1))

    for x1, x_prob in ((1, p), (0, 1.0 - p)):
        if x_prob != 0.0:
            walk((x1,), (), x1, x1 - 1, x_prob)

    out = []
    for t in range(1, horizon + 1):
        mixture = LinkStateMixture(t=t, failure_weight=failure[t],
                                   age_weights=dict(sorted(ages[t].items())))
        mixture.check_normalized(tol=1e-10)
        out.append(mixture)
    return out


# ---------------------------------------------------------------------------
# expected link quantities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinkQuantities:
    """Expected link quantities read off a LinkStateMixture.

    ``e_f`` and ``conditional_ages`` are None when the link is never active
    (the conditional fidelity is undefined, not zero).
    """

    prob_active: float
    e_ftilde: float
    e_f: Optional[float]
    conditional_ages: Optional[dict[int, float]]


def expected_quantities(mixture: LinkStateMixture, fcurve: FidelityCurve
                        ) -> LinkQuantities:
    prob_active = mixture.prob_active
    e_ftilde = sum(fcurve(m) * w for m, w in mixture.age_weights.items())
    if prob_active == 0.0:
        return LinkQuantities(prob_active=0.0, e_ftilde=0.0, e_f=None,
                              conditional_ages=None)
    conditional = {m: w / prob_active for m, w in mixture.age_weights.items()}
    return LinkQuantities(prob_active=prob_active, e_ftilde=e_ftilde,
                          e_f=e_ftilde / prob_active, conditional_ages=conditional)


def materialize_average_state(mixture: LinkStateMixture, params: LinkParams
                              ) -> DensityOperator:
    """The average state as a density matrix on dim+1 dimensions.

    The failure branch occupies one appended basis vector orthogonal to the
    link space, so fidelities against (padded) targets are unchanged.
    """
    if not params.materialized:
        raise ValueError("materialization requires LinkParams with rho0/channel/target")
    assert params.rho0 is not None and params.channel is not None
    dim = params.rho0.dim
    out = np.zeros((dim + 1, dim + 1), dtype=complex)
    for m, weight in mixture.age_weights.items():
        out[:dim, :dim] += weight * memory_evolve(params.rho0, params.channel, m).matrix
    out[dim, dim] = mixture.failure_weight
    return DensityOperator(out)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

@dataclass
class SimulationResult:
    """Per-time-step Monte Carlo estimates with standard errors.

    Arrays are indexed by t = 1..horizon (position t-1).  ``e_f[t-1]`` is
    None when no trial had an active link at t; standard errors are None
    when fewer than two samples back them.
    """

    horizon: int
    n_trials: int
    seed: int
    prob_active: list[float]
    prob_active_se: list[Optional[float]]
    e_ftilde: list[float]
    e_ftilde_se: list[Optional[float]]
    e_s: list[float]
    e_s_se: list[Optional[float]]
    e_f: list[Optional[float]]
    e_f_se: list[Optional[float]]


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """The per-trial RNG stream: PCG64 keyed on (seed, trial_index).

    Streams are independent across trials and identical regardless of how
    trials are distributed over threads.
    """
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(trial,))))


def _bernoulli(rng: np.random.Generator, prob: float) -> int:
    # inverse-CDF sampling from a single uniform draw
    return 1 if rng.random() < prob else 0


def simulate_trajectories(params: LinkParams, policy: Policy, horizon: int,
                          n_trials: int, seed: int) -> SimulationResult:
    """Sample n_trials trajectories and estimate the tracked link quantities."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    p = params.p
    fcurve = params.fcurve
    fast_rule = policy.decide_state

    sum_x = np.zeros(horizon)
    sum_ft = np.zeros(horizon)
    sum_ft_sq = np.zeros(horizon)
    sum_s = np.zeros(horizon)
    sum_s_sq = np.zeros(horizon)
    n_active = np.zeros(horizon, dtype=np.int64)
    sum_f_active = np.zeros(horizon)
    sum_f_active_sq = np.zeros(horizon)

    for trial in range(n_trials):
        rng = trial_rng(seed, trial)
        x = _bernoulli(rng, p)  # A(0) = 1
        m = x - 1
        n_req, n_succ = 1, x
        xs: list[int] = [x]
        acts: list[int] = []
        for t in range(1, horizon + 1):
            idx = t - 1
            sum_x[idx] += x
            ft = fcurve(m) if x == 1 else 0.0
            sum_ft[idx] += ft
            sum_ft_sq[idx] += ft * ft
            s = n_succ / n_req
            sum_s[idx] += s
            sum_s_sq[idx] += s * s
            if x == 1:
                n_active[idx] += 1
                sum_f_active[idx] += ft
                sum_f_active_sq[idx] += ft * ft
            if t == horizon:
                break
            if fast_rule is not None:
                pi1 = fast_rule(t, x, m)
            else:
                pi1 = policy.action_prob(t, History(tuple(xs), tuple(acts)))
            a = _bernoulli(rng, pi1)
            if a == 1:
                x = _bernoulli(rng, p)
                m = x - 1
                n_req += 1
                n_succ += x
            else:
                m += x
            if fast_rule is None:
                xs.append(x)
                acts.append(a)

    def mean_se(total: np.ndarray, total_sq: np.ndarray, n: int
                ) -> tuple[list[float], list[Optional[float]]]:
        means, ses = [], []
        for tot, tot_sq in zip(total, total_sq):
            mean = tot / n
            if n > 1:
                var = max(0.0, (tot_sq - n * mean * mean) / (n - 1))
                ses.append(float(np.sqrt(var / n)))
            else:
                ses.append(None)
            means.append(float(mean))
        return means, ses

    n = n_trials
    pa_mean, pa_se = mean_se(sum_x, sum_x, n)  # x^2 = x for bits
    ft_mean, ft_se = mean_se(sum_ft, sum_ft_sq, n)
    s_mean, s_se = mean_se(sum_s, sum_s_sq, n)

    e_f: list[Optional[float]] = []
    e_f_se: list[Optional[float]] = []
    for idx in range(horizon):
        k = int(n_active[idx])
        if k == 0:
            e_f.append(None)
            e_f_se.append(None)
            continue
        mean = sum_f_active[idx] / k
        e_f.append(float(mean))
        if k > 1:
            var = max(0.0, (sum_f_active_sq[idx] - k * mean * mean) / (k - 1))
            e_f_se.append(float(np.sqrt(var / k)))
        else:
            e_f_se.append(None)

    return SimulationResult(
        horizon=horizon, n_trials=n_trials, seed=seed,
        prob_active=pa_mean, prob_active_se=pa_se,
        e_ftilde=ft_mean, e_ftilde_se=ft_se,
        e_s=s_mean, e_s_se=s_se,
        e_f=e_f, e_f_se=e_f_se,
    )
