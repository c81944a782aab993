"""Histories, agents, environments and the dual / permutation transforms.

A history is a plain tuple following the pattern ``o, r, a, o, r, a, ...``:
observations at positions ``0 mod 3``, rewards (``Fraction``) at ``1 mod 3``
and actions at ``2 mod 3``. Environments are queried on histories whose
length is a multiple of three; agents on histories of length ``2 mod 3``.

Agents and environments share a single query interface, :meth:`measure`,
returning a ``dict`` from outcome to exact probability. Results are memoised
per instance; callers must treat the returned dicts as read-only.
"""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import product
from typing import Callable, Iterable, Iterator, Mapping

from .spaces import Space

History = tuple
Measure = dict

ZERO = Fraction(0)
ONE = Fraction(1)


class PatternViolation(ValueError):
    """A sequence does not follow the observation, reward, action pattern."""


class MeasureNotNormalized(ValueError):
    """A probability measure does not sum to exactly one."""


class NotABijection(ValueError):
    pass


# -- histories -----------------------------------------------------------------


def check_history(space: Space, s: History) -> None:
    for i, x in enumerate(s):
        kind = i % 3
        if kind == 0 and x not in space.observation_index:
            raise PatternViolation(f"position {i}: {x!r} is not an observation")
        if kind == 1 and (not isinstance(x, Fraction) or x not in space.reward_index):
            raise PatternViolation(f"position {i}: {x!r} is not a reward")
        if kind == 2 and x not in space.action_index:
            raise PatternViolation(f"position {i}: {x!r} is not an action")


def is_complete(s: History) -> bool:
    """True for members of (ORA)*, i.e. empty or ending with an action."""
    return len(s) % 3 == 0


def rounds(s: History) -> int:
    """Number of completed observation, reward, action rounds in ``s``."""
    return len(s) // 3


def dual_history(s: History) -> History:
    return tuple(-x if i % 3 == 1 else x for i, x in enumerate(s))


def zero_rewards(s: History, fill: Fraction) -> History:
    return tuple(fill if i % 3 == 1 else x for i, x in enumerate(s))


def env_histories(space: Space, max_rounds: int) -> Iterator[History]:
    """All histories in (ORA)* with at most ``max_rounds`` rounds, canonical order."""
    step = [(o, r, a) for o in space.observations for r in space.rewards for a in space.actions]
    for k in range(max_rounds + 1):
        for combo in product(step, repeat=k):
            yield tuple(x for triple in combo for x in triple)


def agent_histories(space: Space, max_rounds: int) -> Iterator[History]:
    """All histories in (ORA)*OR with at most ``max_rounds`` completed rounds before the final pair."""
    for s in env_histories(space, max_rounds):
        for o, r in space.outcomes:
            yield s + (o, r)


# -- permutations --------------------------------------------------------------


class Permutation:
    """A bijection of a finite alphabet onto itself."""

    def __init__(self, mapping: Mapping[str, str], alphabet: Iterable[str] | None = None):
        mapping = dict(mapping)
        domain = set(alphabet) if alphabet is not None else set(mapping)
        for x in domain:
            mapping.setdefault(x, x)
        if set(mapping) != domain or set(mapping.values()) != domain:
            raise NotABijection(f"{mapping} is not a bijection of {sorted(domain)}")
        self.mapping = mapping

    @classmethod
    def identity(cls, alphabet: Iterable[str]) -> "Permutation":
        return cls({}, alphabet)

    @classmethod
    def swap(cls, x: str, y: str, alphabet: Iterable[str]) -> "Permutation":
        return cls({x: y, y: x}, alphabet)

    @classmethod
    def from_images(cls, alphabet: Iterable[str], images: Iterable[str]) -> "Permutation":
        """``images[i]`` is the image of the i-th symbol of ``alphabet``."""
        alphabet = list(alphabet)
        images = list(images)
        if len(images) != len(alphabet):
            raise NotABijection("image list length differs from alphabet size")
        return cls(dict(zip(alphabet, images)), alphabet)

    def __call__(self, x: str) -> str:
        return self.mapping[x]

    def inverse(self) -> "Permutation":
        return Permutation({v: k for k, v in self.mapping.items()})

    def compose(self, other: "Permutation") -> "Permutation":
        """``(self.compose(other))(x) == self(other(x))``."""
        return Permutation({x: self(other(x)) for x in other.mapping})

    def is_identity(self) -> bool:
        return all(k == v for k, v in self.mapping.items())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Permutation) and self.mapping == other.mapping

    def __hash__(self) -> int:
        return hash(frozenset(self.mapping.items()))

    def __repr__(self) -> str:
        return f"Permutation({self.mapping})"


def permute_actions_history(P: Permutation, s: History) -> History:
    return tuple(P(x) if i % 3 == 2 else x for i, x in enumerate(s))


def permute_observations_history(Q: Permutation, s: History) -> History:
    return tuple(Q(x) if i % 3 == 0 else x for i, x in enumerate(s))


# -- measures ------------------------------------------------------------------


def check_measure(m: Mapping, support: Iterable, where: object = None) -> None:
    """Raise :class:`MeasureNotNormalized` unless ``m`` is an exact probability measure on ``support``."""
    allowed = set(support)
    total = ZERO
    for x, p in m.items():
        if x not in allowed:
            raise MeasureNotNormalized(f"outcome {x!r} outside the alphabet (at {where!r})")
        if not isinstance(p, (Fraction, int)) or not 0 <= p <= 1:
            raise MeasureNotNormalized(f"probability {p!r} of {x!r} is not a rational in [0,1] (at {where!r})")
        total += p
    if total != 1:
        raise MeasureNotNormalized(f"measure sums to {total} (at {where!r})")


def uniform_measure(items: Iterable) -> Measure:
    items = list(items)
    p = Fraction(1, len(items))
    return {x: p for x in items}


def point_mass(x) -> Measure:
    return {x: ONE}


# -- agents and environments ---------------------------------------------------


class Agent:
    """Maps each history in (ORA)*OR to a probability measure over actions."""

    ignores_rewards = False

    def __init__(self, space: Space, name: str | None = None):
        self.space = space
        self.name = name or type(self).__name__
        self._cache: dict[History, Measure] = {}

    def measure(self, s: History) -> Measure:
        m = self._cache.get(s)
        if m is None:
            m = self._measure(s)
            self._cache[s] = m
        return m

    def _measure(self, s: History) -> Measure:
        raise NotImplementedError

    def prob(self, a: str, s: History) -> Fraction:
        return self.measure(s).get(a, ZERO)

    def __call__(self, a: str, s: History) -> Fraction:
        return self.prob(a, s)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}>"


class Environment:
    """Maps each history in (ORA)* to a probability measure over (observation, reward) pairs.

    ``quiescent_after`` is the constructor's declaration that every reward
    after that many rounds is zero (``None`` when no such promise is made).
    """

    quiescent_after: int | None = None

    def __init__(self, space: Space, name: str | None = None):
        self.space = space
        self.name = name or type(self).__name__
        self._cache: dict[History, Measure] = {}

    def measure(self, s: History) -> Measure:
        m = self._cache.get(s)
        if m is None:
            m = self._measure(s)
            self._cache[s] = m
        return m

    def _measure(self, s: History) -> Measure:
        raise NotImplementedError

    def prob(self, o: str, r: Fraction, s: History) -> Fraction:
        return self.measure(s).get((o, r), ZERO)

    def __call__(self, o: str, r: Fraction, s: History) -> Fraction:
        return self.prob(o, r, s)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}>"


class FunctionAgent(Agent):
    """An agent defined by a Python callable ``history -> measure``."""

    def __init__(self, space: Space, fn: Callable[[History], Measure], name: str | None = None,
                 ignores_rewards: bool = False):
        super().__init__(space, name)
        self.fn = fn
        self.ignores_rewards = ignores_rewards

    def _measure(self, s: History) -> Measure:
        return self.fn(s)


class FunctionEnvironment(Environment):
    def __init__(self, space: Space, fn: Callable[[History], Measure], name: str | None = None,
                 quiescent_after: int | None = None):
        super().__init__(space, name)
        self.fn = fn
        self.quiescent_after = quiescent_after

    def _measure(self, s: History) -> Measure:
        return self.fn(s)


class TableAgent(Agent):
    """Explicit table over bounded-depth histories; uniform everywhere else."""

    def __init__(self, space: Space, table: Mapping[History, Measure], name: str | None = None):
        super().__init__(space, name)
        self.table = dict(table)

    def _measure(self, s: History) -> Measure:
        m = self.table.get(s)
        return dict(m) if m is not None else uniform_measure(self.space.actions)


class TableEnvironment(Environment):
    """Explicit table over bounded-depth histories; uniform over outcomes elsewhere."""

    def __init__(self, space: Space, table: Mapping[History, Measure], name: str | None = None,
                 quiescent_after: int | None = None):
        super().__init__(space, name)
        self.table = dict(table)
        self.quiescent_after = quiescent_after

    def _measure(self, s: History) -> Measure:
        m = self.table.get(s)
        return dict(m) if m is not None else uniform_measure(self.space.outcomes)


# -- dual wrappers -------------------------------------------------------------


class DualAgent(Agent):
    """``dual(pi)(a|s) = pi(a|dual(s))``."""

    def __init__(self, inner: Agent):
        super().__init__(inner.space, f"dual:{inner.name}")
        self.inner = inner
        self.ignores_rewards = inner.ignores_rewards

    def _measure(self, s: History) -> Measure:
        return self.inner.measure(dual_history(s))


class DualEnvironment(Environment):
    """``dual(mu)(o,r|s) = mu(o,-r|dual(s))``."""

    def __init__(self, inner: Environment):
        super().__init__(inner.space, f"dual:{inner.name}")
        self.inner = inner
        self.quiescent_after = inner.quiescent_after

    def _measure(self, s: History) -> Measure:
        return {(o, -r): p for (o, r), p in self.inner.measure(dual_history(s)).items()}


def dual_agent(pi: Agent) -> Agent:
    return DualAgent(pi)


def dual_environment(mu: Environment) -> Environment:
    return DualEnvironment(mu)


# -- permutation wrappers ------------------------------------------------------


class ActionPermutedAgent(Agent):
    """``P pi(a|s) = pi(P a | P s)``."""

    def __init__(self, P: Permutation, inner: Agent):
        super().__init__(inner.space, f"permute:{_perm_label(P, inner.space.actions)}:{inner.name}")
        self.P, self.inner = P, inner
        self._P_inv = P.inverse()
        self.ignores_rewards = inner.ignores_rewards

    def _measure(self, s: History) -> Measure:
        m = self.inner.measure(permute_actions_history(self.P, s))
        return {self._P_inv(b): p for b, p in m.items()}


class ActionPermutedEnvironment(Environment):
    """``P mu(o,r|s) = mu(o,r | P s)``."""

    def __init__(self, P: Permutation, inner: Environment):
        super().__init__(inner.space, f"permute:{_perm_label(P, inner.space.actions)}:{inner.name}")
        self.P, self.inner = P, inner
        self.quiescent_after = inner.quiescent_after

    def _measure(self, s: History) -> Measure:
        return self.inner.measure(permute_actions_history(self.P, s))


class ObservationPermutedAgent(Agent):
    """``Q pi(a|s) = pi(a | Q s)``."""

    def __init__(self, Q: Permutation, inner: Agent):
        super().__init__(inner.space, f"permute-obs:{_perm_label(Q, inner.space.observations)}:{inner.name}")
        self.Q, self.inner = Q, inner
        self.ignores_rewards = inner.ignores_rewards

    def _measure(self, s: History) -> Measure:
        return self.inner.measure(permute_observations_history(self.Q, s))


class ObservationPermutedEnvironment(Environment):
    """``Q mu(o,r|s) = mu(Q o, r | Q s)``: the environment seen through relabelled observations."""

    def __init__(self, Q: Permutation, inner: Environment):
        super().__init__(inner.space, f"permute-obs:{_perm_label(Q, inner.space.observations)}:{inner.name}")
        self.Q, self.inner = Q, inner
        self._Q_inv = Q.inverse()
        self.quiescent_after = inner.quiescent_after

    def _measure(self, s: History) -> Measure:
        m = self.inner.measure(permute_observations_history(self.Q, s))
        return {(self._Q_inv(o), r): p for (o, r), p in m.items()}


def _perm_label(P: Permutation, alphabet) -> str:
    return ",".join(P(x) for x in alphabet)


def permute_agent(P: Permutation, pi: Agent) -> Agent:
    return ActionPermutedAgent(P, pi)


def permute_environment(P: Permutation, mu: Environment) -> Environment:
    return ActionPermutedEnvironment(P, mu)


def permute_observations_agent(Q: Permutation, pi: Agent) -> Agent:
    return ObservationPermutedAgent(Q, pi)


def permute_observations_environment(Q: Permutation, mu: Environment) -> Environment:
    return ObservationPermutedEnvironment(Q, mu)


# -- quiescence ------------------------------------------------------------------


class QuiescentEnvironment(Environment):
    """Clamp: after ``horizon`` rounds always answer (first observation, reward 0)."""

    def __init__(self, inner: Environment, horizon: int):
        super().__init__(inner.space, inner.name)
        if ZERO not in inner.space.reward_index:
            raise ValueError("quiescence needs 0 in the reward alphabet")
        self.inner = inner
        self.quiescent_after = horizon

    def _measure(self, s: History) -> Measure:
        if rounds(s) > self.quiescent_after:
            return point_mass((self.space.observations[0], ZERO))
        return self.inner.measure(s)


def quiescent(mu: Environment, horizon: int) -> Environment:
    return QuiescentEnvironment(mu, horizon)


# -- pointwise comparison helpers ----------------------------------------------


def agents_equal(pi: Agent, rho: Agent, max_rounds: int) -> bool:
    return all(pi.measure(s) == rho.measure(s) for s in agent_histories(pi.space, max_rounds))


def environments_equal(mu: Environment, nu: Environment, max_rounds: int) -> bool:
    return all(_strip(mu.measure(s)) == _strip(nu.measure(s)) for s in env_histories(mu.space, max_rounds))


def _strip(m: Measure) -> Measure:
    return {x: p for x, p in m.items() if p}


def ignores_rewards_up_to(pi: Agent, max_rounds: int) -> bool:
    """Empirical check that ``pi(.|s)`` does not depend on the rewards in ``s``."""
    fill = pi.space.rewards[0]
    return all(
        _strip(pi.measure(s)) == _strip(pi.measure(zero_rewards(s, fill)))
        for s in agent_histories(pi.space, max_rounds)
    )


# -- seeded random fixtures ----------------------------------------------------


def grid_measure(rng: random.Random, items: list, denominator: int) -> Measure:
    """A random measure whose probabilities are multiples of ``1/denominator``."""
    counts = [0] * len(items)
    for i in rng.choices(range(len(items)), k=denominator):
        counts[i] += 1
    return {x: Fraction(c, denominator) for x, c in zip(items, counts) if c}


def _history_key(s: History) -> str:
    return " ".join(str(x) for x in s)


class RandomTableAgent(Agent):
    """Seeded pseudo-random table agent over histories with ``<= depth`` completed rounds.

    Entries are generated on demand from ``(seed, history)`` so construction is
    O(1); :meth:`materialize` produces the equivalent explicit table.
    """

    def __init__(self, space: Space, seed: int, depth: int = 3, denominator: int = 8):
        super().__init__(space, f"rand-agent-{seed}")
        self.seed, self.depth, self.denominator = seed, depth, denominator

    def _measure(self, s: History) -> Measure:
        if rounds(s) > self.depth:
            return uniform_measure(self.space.actions)
        rng = random.Random(f"agent|{self.seed}|{_history_key(s)}")
        return grid_measure(rng, list(self.space.actions), self.denominator)

    def materialize(self) -> TableAgent:
        table = {s: self.measure(s) for s in agent_histories(self.space, self.depth)}
        return TableAgent(self.space, table, self.name)


class RandomTableEnvironment(Environment):
    """Seeded pseudo-random table environment.

    With probability ``quiet`` a history's measure is restricted to the
    reward-0 outcomes (when 0 is a reward), producing sparse-reward fixtures.
    """

    def __init__(self, space: Space, seed: int, depth: int = 3, denominator: int = 8, quiet: float = 0.0):
        super().__init__(space, f"rand-env-{seed}")
        self.seed, self.depth, self.denominator, self.quiet = seed, depth, denominator, quiet

    def _measure(self, s: History) -> Measure:
        if rounds(s) > self.depth:
            return uniform_measure(self.space.outcomes)
        rng = random.Random(f"env|{self.seed}|{_history_key(s)}")
        items = list(self.space.outcomes)
        if self.quiet and ZERO in self.space.reward_index and rng.random() < self.quiet:
            items = [(o, r) for o, r in items if r == 0]
        return grid_measure(rng, items, self.denominator)

    def materialize(self) -> TableEnvironment:
        table = {s: self.measure(s) for s in env_histories(self.space, self.depth)}
        return TableEnvironment(self.space, table, self.name)
