"""Finite action, observation and reward alphabets.

Every other module is parameterised by a :class:`Space`. Rewards are exact
:class:`~fractions.Fraction` values in ``[-1, 1]`` and the reward alphabet is
closed under negation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

Action = str
Observation = str
Reward = Fraction
Outcome = tuple  # (Observation, Reward)


class SpaceError(ValueError):
    """Base class for invalid alphabet definitions."""


class EmptyAlphabet(SpaceError):
    pass


class RangeViolation(SpaceError):
    pass


class NegationClosureViolation(SpaceError):
    pass


class OverlapViolation(SpaceError):
    pass


class UnknownReward(SpaceError, KeyError):
    pass


@dataclass(frozen=True)
class SpaceConfig:
    """Raw, unvalidated alphabets."""

    actions: Sequence[str]
    observations: Sequence[str]
    rewards: Sequence[Fraction | int | str]


@dataclass(frozen=True)
class Space:
    """A validated, immutable triple of alphabets.

    Order is canonical: it fixes codec indices, enumeration order and
    tie-breaks everywhere downstream. Use :func:`validate_space` to build one.
    """

    actions: tuple[Action, ...]
    observations: tuple[Observation, ...]
    rewards: tuple[Reward, ...]
    action_index: dict = field(init=False, repr=False, compare=False, hash=False)
    observation_index: dict = field(init=False, repr=False, compare=False, hash=False)
    reward_index: dict = field(init=False, repr=False, compare=False, hash=False)
    outcomes: tuple[Outcome, ...] = field(init=False, repr=False, compare=False, hash=False)
    outcome_index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        put = object.__setattr__
        put(self, "action_index", {a: i for i, a in enumerate(self.actions)})
        put(self, "observation_index", {o: i for i, o in enumerate(self.observations)})
        put(self, "reward_index", {r: i for i, r in enumerate(self.rewards)})
        outcomes = tuple((o, r) for o in self.observations for r in self.rewards)
        put(self, "outcomes", outcomes)
        put(self, "outcome_index", {x: i for i, x in enumerate(outcomes)})

    @property
    def max_abs_reward(self) -> Fraction:
        return max(abs(r) for r in self.rewards)

    def negate_reward(self, r: Reward) -> Reward:
        return negate_reward(self, r)


def _as_fraction(r: Fraction | int | str) -> Fraction:
    if isinstance(r, float):
        raise TypeError(f"rewards must be exact rationals, got float {r!r}")
    return Fraction(r)


def validate_space(cfg: SpaceConfig) -> Space:
    """Check the alphabet invariants and return the canonical :class:`Space`."""
    actions = tuple(str(a) for a in cfg.actions)
    observations = tuple(str(o) for o in cfg.observations)
    rewards = tuple(_as_fraction(r) for r in cfg.rewards)

    for name, alphabet in (("actions", actions), ("observations", observations), ("rewards", rewards)):
        if not alphabet:
            raise EmptyAlphabet(f"{name} must be non-empty")
        if len(set(alphabet)) != len(alphabet):
            raise SpaceError(f"{name} contains duplicate symbols")

    for r in rewards:
        if not -1 <= r <= 1:
            raise RangeViolation(f"reward {r} lies outside [-1, 1]")
    reward_set = set(rewards)
    for r in rewards:
        if -r not in reward_set:
            raise NegationClosureViolation(f"reward {r} present but {-r} missing")

    reward_names = {format_rational(r) for r in rewards}
    overlap = (set(actions) & set(observations)) | (set(actions) & reward_names) | (
        set(observations) & reward_names
    )
    if overlap:
        raise OverlapViolation(f"symbols shared between alphabets: {sorted(overlap)}")

    return Space(actions, observations, rewards)


def make_space(actions: Iterable[str], observations: Iterable[str], rewards: Iterable) -> Space:
    return validate_space(SpaceConfig(tuple(actions), tuple(observations), tuple(rewards)))


def negate_reward(space: Space, r: Reward) -> Reward:
    if r not in space.reward_index:
        raise UnknownReward(r)
    return -r


def format_rational(q: Fraction) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


# -- space definition files ----------------------------------------------------

_KEYS = ("actions", "observations", "rewards")


def parse_space(text: str) -> Space:
    """Parse ``key = value`` lines; values are comma separated, ``#`` starts a comment."""
    values: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpaceError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _KEYS:
            raise SpaceError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise SpaceError(f"line {lineno}: duplicate key {key!r}")
        values[key] = [v.strip() for v in value.split(",") if v.strip()]
    missing = [k for k in _KEYS if k not in values]
    if missing:
        raise SpaceError(f"missing keys: {missing}")
    return validate_space(SpaceConfig(values["actions"], values["observations"], values["rewards"]))


def format_space(space: Space) -> str:
    return (
        f"actions = {', '.join(space.actions)}\n"
        f"observations = {', '.join(space.observations)}\n"
        f"rewards = {', '.join(format_rational(r) for r in space.rewards)}\n"
    )


def default_space() -> Space:
    """Two actions, two observations, rewards ``-1/2, 0, 1/2``."""
    return make_space(["a0", "a1"], ["o0", "o1"], ["-1/2", "0", "1/2"])
