"""Truncated universal intelligence over a bounded program inventory."""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from . import codec
from .framework import ZERO, Agent, Environment, Permutation, dual_environment, permute_agent
from .machine import (
    Machine,
    MachineEnvironment,
    Probe,
    _probe_inputs,
    enumerate_programs,
    probe_program,
)
from .valuation import CertificationRefused, certify_well_behaved, rollout, value_exact


class UncertifiedEnvironment(ValueError):
    pass


@dataclass
class EnvClass:
    """Programs whose environments agree on every history up to ``H`` rounds."""

    env_id: str
    env: MachineEnvironment
    programs: list[str] = field(default_factory=list)

    @property
    def k_hat(self) -> int:
        return min(len(p) for p in self.programs)

    @property
    def representative(self) -> str:
        # body first, sign bit last: dual classes get twin representatives
        return min(self.programs, key=lambda p: (len(p), p[1:], p[0]))

    @property
    def weight(self) -> Fraction:
        return Fraction(1, 2**self.k_hat)


@dataclass
class Inventory:
    machine: Machine
    L: int
    T: int
    H: int
    probes: list[Probe]
    classes: dict[str, EnvClass]
    certified: bool = True

    @property
    def bounds(self) -> tuple[int, int, int]:
        return (self.L, self.T, self.H)

    @property
    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"L={self.L};T={self.T};H={self.H};sym={self.machine.symmetric};perm={self.machine.permutable}\n".encode())
        for cls in sorted(self.classes.values(), key=lambda c: c.env_id):
            h.update(f"{cls.env_id}:{cls.k_hat}\n".encode())
        return h.hexdigest()[:16]

    def accepted(self) -> list[Probe]:
        return [p for p in self.probes if p.accepted]

    def k_hat_of(self, env_id: str) -> int:
        return self.classes[env_id].k_hat

    def sorted_classes(self) -> list[EnvClass]:
        return sorted(self.classes.values(), key=lambda c: (c.k_hat, c.representative))


def group_classes(probes: Iterable[Probe]) -> dict[str, EnvClass]:
    classes: dict[str, EnvClass] = {}
    for probe in probes:
        if not probe.accepted:
            continue
        env_id = probe.env.env_id
        cls = classes.get(env_id)
        if cls is None:
            cls = classes[env_id] = EnvClass(env_id, probe.env)
        cls.programs.append(probe.program)
    return classes


def build_inventory(machine: Machine, L: int, T: int, H: int, extra_programs: Iterable[str] = ()) -> Inventory:
    """Enumerate every program of at most ``L`` bits, plus any hand-written extras."""
    probes = list(enumerate_programs(machine, L, H, T))
    seen = {p.program for p in probes}
    for p in extra_programs:
        if p not in seen:
            probes.append(probe_program(machine, p, H, T))
            seen.add(p)
    return Inventory(machine, L, T, H, probes, group_classes(probes))


def inventory_from_programs(machine: Machine, programs: Iterable[str], L: int, T: int, H: int) -> Inventory:
    """Rebuild an inventory from a list of programs (e.g. a manifest's accepted rows)."""
    probes = [probe_program(machine, p, H, T) for p in programs]
    return Inventory(machine, L, T, H, probes, group_classes(probes))


def dual_env_id(env: MachineEnvironment) -> str:
    dual = dual_environment(env)
    sig = b"".join(codec.encode_measure(env.space, dual.measure(s)) for s, _ in _probe_inputs(env.space, env.H))
    return hashlib.sha256(sig).hexdigest()[:16]


# -- estimates -----------------------------------------------------------------


@dataclass(frozen=True)
class IntelligenceEstimate:
    agent_id: str
    mode: str
    value: Fraction
    bounds: tuple[int, int, int]
    inventory_digest: str
    samples: int | None = None
    std_error: float | None = None

    @property
    def abs_value(self) -> Fraction:
        return abs(self.value)


def _check_certified(inventory: Inventory) -> None:
    for cls in inventory.classes.values():
        try:
            certify_well_behaved(cls.env, inventory.H)
        except CertificationRefused as exc:
            raise UncertifiedEnvironment(f"{cls.env_id}: {exc}") from exc


def upsilon_terms(pi: Agent, inventory: Inventory) -> list[tuple[EnvClass, Fraction]]:
    """``(class, V)`` for every environment class, in (K, representative) order."""
    return [(cls, value_exact(pi, cls.env, inventory.H).value) for cls in inventory.sorted_classes()]


def upsilon_enumerated(pi: Agent, inventory: Inventory, check: bool = False) -> IntelligenceEstimate:
    """``sum over classes of 2^-K * V`` as an exact rational (no normalisation)."""
    if check:
        _check_certified(inventory)
    value = sum((cls.weight * v for cls, v in upsilon_terms(pi, inventory)), ZERO)
    return IntelligenceEstimate(pi.name, "enumerated", value, inventory.bounds, inventory.digest)


def abs_upsilon(pi: Agent, inventory: Inventory) -> Fraction:
    return abs(upsilon_enumerated(pi, inventory).value)


def compare(pi: Agent, rho: Agent, inventory: Inventory) -> str:
    a = upsilon_enumerated(pi, inventory).value
    b = upsilon_enumerated(rho, inventory).value
    if a > b:
        return "pi-greater"
    if a < b:
        return "rho-greater"
    return "equal"


def upsilon_permutation_check(pi: Agent, P: Permutation, inventory: Inventory) -> tuple[Fraction, Fraction]:
    return upsilon_enumerated(permute_agent(P, pi), inventory).value, upsilon_enumerated(pi, inventory).value


# -- antithetic sampling ---------------------------------------------------------


@dataclass(frozen=True)
class BodyPair:
    """The POS and NEG twins sharing one program body."""

    body: str
    k_hat: int
    pos: Environment
    neg: Environment
    self_dual: bool


def body_pairs(inventory: Inventory) -> list[BodyPair]:
    """One pair per body among the class representatives; self-dual classes pair with themselves."""
    by_body: dict[str, dict[str, EnvClass]] = {}
    for cls in inventory.classes.values():
        rep = cls.representative
        by_body.setdefault(rep[1:], {})[rep[0]] = cls
    pairs = []
    for body in sorted(by_body, key=lambda b: (len(b), b)):
        signs = by_body[body]
        pos, neg = signs.get("0"), signs.get("1")
        if pos is not None and neg is not None:
            pairs.append(BodyPair(body, pos.k_hat, pos.env, neg.env, False))
        else:
            only = pos or neg
            pairs.append(BodyPair(body, only.k_hat, only.env, only.env, True))
    return pairs


def upsilon_sampled(pi: Agent, inventory: Inventory, N: int, seed: int) -> IntelligenceEstimate:
    """Antithetic estimate: draw bodies uniformly, roll out both the POS and NEG twin.

    The NEG twin is rolled out with the dual-coupled outcome order and the
    same per-sample seed as its POS partner, so an agent and its dual get
    exactly negated estimates and reward-ignoring agents get exactly 0.
    """
    if N < 1:
        raise ValueError("need at least one sample")
    pairs = body_pairs(inventory)
    rng = random.Random(seed)
    H = inventory.H
    terms: list[Fraction] = []
    for _ in range(N):
        pair = pairs[rng.randrange(len(pairs))]
        draw = rng.getrandbits(64)
        g = rollout(pi, pair.pos, H, draw).total + rollout(pi, pair.neg, H, draw, flip_rewards=True).total
        if pair.self_dual:
            g /= 2
        terms.append(g / 2**pair.k_hat)
    scale = len(pairs)
    mean = sum(terms, ZERO) / N
    if N > 1:
        var = sum((float(t - mean)) ** 2 for t in terms) / (N - 1)
        se = scale * math.sqrt(var / N)
    else:
        se = float("nan")
    return IntelligenceEstimate(pi.name, "sampled", scale * mean, inventory.bounds, inventory.digest, N, se)
