"""Exact expected cumulative reward, seeded rollouts and well-behavedness certificates."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .framework import (
    ZERO,
    Agent,
    Environment,
    History,
    MeasureNotNormalized,
    check_measure,
    dual_agent,
    dual_environment,
)

DEFAULT_MAX_HISTORIES = 10**7


class HorizonTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class ValueResult:
    n: int
    value: Fraction
    histories_enumerated: int


def _checked_env(mu: Environment, s: History) -> dict:
    m = mu.measure(s)
    check_measure(m, mu.space.outcomes, s)
    return m


def _checked_agent(pi: Agent, s: History) -> dict:
    m = pi.measure(s)
    check_measure(m, pi.space.actions, s)
    return m


def value_exact(pi: Agent, mu: Environment, n: int, max_histories: int = DEFAULT_MAX_HISTORIES) -> ValueResult:
    """Expected sum of rewards ``r_0 + ... + r_n`` when ``pi`` interacts with ``mu``.

    The interaction tree is walked depth first in canonical alphabet order;
    branches of probability zero are pruned. ``histories_enumerated`` counts
    the complete sequences ``(o_0, r_0, a_0, ..., o_n, r_n, a_n)`` of positive
    probability.
    """
    if n < 0:
        raise ValueError("horizon must be non-negative")
    space = mu.space
    worst = (len(space.outcomes) * len(space.actions)) ** (n + 1)
    if worst > max_histories:
        raise HorizonTooLarge(f"up to {worst} histories at n={n} exceeds the budget of {max_histories}")

    outcomes = space.outcomes
    actions = space.actions

    def walk(s: History, depth: int) -> tuple[Fraction, int]:
        m = _checked_env(mu, s)
        total = ZERO
        count = 0
        for x in outcomes:
            p = m.get(x)
            if not p:
                continue
            o, r = x
            t = s + x
            am = _checked_agent(pi, t)
            if depth == n:
                total += p * r
                count += sum(1 for a in actions if am.get(a))
                continue
            inner = ZERO
            for a in actions:
                q = am.get(a)
                if not q:
                    continue
                v, c = walk(t + (a,), depth + 1)
                inner += q * v
                count += c
            total += p * (r + inner)
        return total, count

    value, count = walk((), 0)
    return ValueResult(n, value, count)


def value_dual_identity_check(pi: Agent, mu: Environment, n: int) -> tuple[ValueResult, ValueResult]:
    """Return the values of ``(pi, mu)`` and of ``(dual pi, dual mu)``; they are exact negatives."""
    return value_exact(pi, mu, n), value_exact(dual_agent(pi), dual_environment(mu), n)


# -- rollouts ------------------------------------------------------------------


@dataclass(frozen=True)
class Rollout:
    history: History
    total: Fraction


def _sample(m: dict, order, u: float):
    cum = ZERO
    last = None
    for x in order:
        p = m.get(x)
        if not p:
            continue
        cum += p
        last = x
        if u < cum:
            return x
    return last


def rollout(pi: Agent, mu: Environment, n: int, seed, flip_rewards: bool = False) -> Rollout:
    """Sample one interaction of ``n + 1`` rounds.

    Every draw uses inverse-CDF sampling over a fixed outcome order with
    uniforms from ``random.Random(seed)``. ``flip_rewards`` orders the
    environment's outcomes as ``(o, -r)`` for ``(o, r)`` in canonical order;
    that is the dual-coupled mapping: with the same seed, ``(dual pi, dual mu)``
    under ``flip_rewards=True`` reproduces the reward-negated trajectory of
    ``(pi, mu)`` under ``flip_rewards=False``.
    """
    rng = random.Random(seed)
    space = mu.space
    env_order = [(o, -r) for o, r in space.outcomes] if flip_rewards else space.outcomes
    s: History = ()
    total = ZERO
    for _ in range(n + 1):
        o, r = _sample(_checked_env(mu, s), env_order, rng.random())
        s = s + (o, r)
        total += r
        a = _sample(_checked_agent(pi, s), space.actions, rng.random())
        s = s + (a,)
    return Rollout(s, total)


# -- well-behavedness ----------------------------------------------------------


@dataclass(frozen=True)
class WellBehavedCertificate:
    horizon: int
    budget: Fraction
    quiescent: bool = True


class CertificationRefused(Exception):
    """Refusal does not imply the environment is ill-behaved."""

    def __init__(self, message: str, witness: History, budget: Fraction | None):
        super().__init__(message)
        self.witness = witness
        self.budget = budget


class BudgetExceeded(CertificationRefused):
    pass


class NotQuiescent(CertificationRefused):
    pass


def certify_well_behaved(mu: Environment, H: int) -> WellBehavedCertificate:
    """Certify that ``mu`` is well-behaved using a bounded sufficient condition.

    Passes iff (i) along every positive-probability branch of rounds ``0..H``
    (all action choices) the sum of absolute rewards is at most 1, and (ii)
    ``mu`` is declared quiescent after ``H`` rounds and every reachable
    round-``H+1`` measure is supported on reward 0. The certified budget is
    the maximal branch sum.
    """
    space = mu.space
    outcomes, actions = space.outcomes, space.actions

    def best(s: History, depth: int) -> tuple[Fraction, History]:
        m = _checked_env(mu, s)
        top, arg = None, None
        for x in outcomes:
            if not m.get(x):
                continue
            gain = abs(x[1])
            t = s + x
            if depth == H:
                cand, path = gain, t + (actions[0],)
            else:
                cand, path = None, None
                for a in actions:
                    v, w = best(t + (a,), depth + 1)
                    if cand is None or v > cand:
                        cand, path = v, w
                cand = gain + cand
            if top is None or cand > top:
                top, arg = cand, path
        return top, arg

    budget, witness = best((), 0)
    if budget > 1:
        raise BudgetExceeded(f"branch reward magnitude {budget} exceeds 1", witness, budget)

    declared = mu.quiescent_after
    if declared is None or declared > H:
        raise NotQuiescent(f"environment not declared quiescent after {H} rounds", (), budget)

    def tail(s: History, depth: int) -> History | None:
        m = _checked_env(mu, s)
        if depth == H + 1:
            if any(p and r != 0 for (o, r), p in m.items()):
                return s
            return None
        for x in outcomes:
            if not m.get(x):
                continue
            for a in actions:
                bad = tail(s + x + (a,), depth + 1)
                if bad is not None:
                    return bad
        return None

    bad = tail((), 0)
    if bad is not None:
        raise NotQuiescent("nonzero reward reachable after the horizon", bad, budget)
    return WellBehavedCertificate(H, budget, True)


def certification_outcome(mu: Environment, H: int) -> tuple[str, Fraction | None]:
    """``("certified" | refusal class name, budget)`` without raising."""
    try:
        cert = certify_well_behaved(mu, H)
    except CertificationRefused as exc:
        return type(exc).__name__, exc.budget
    return "certified", cert.budget


__all__ = [
    "BudgetExceeded",
    "CertificationRefused",
    "HorizonTooLarge",
    "MeasureNotNormalized",
    "NotQuiescent",
    "Rollout",
    "ValueResult",
    "WellBehavedCertificate",
    "certification_outcome",
    "certify_well_behaved",
    "rollout",
    "value_dual_identity_check",
    "value_exact",
]
