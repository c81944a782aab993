"""Batch checks of the symmetry results, shared by the CLI ``verify`` command."""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass
from itertools import permutations
from typing import Iterable, Sequence

from . import codec
from .framework import (
    Agent,
    Environment,
    Permutation,
    agents_equal,
    dual_agent,
    dual_environment,
    environments_equal,
    grid_measure,
    permute_agent,
    permute_environment,
    permute_observations_agent,
    permute_observations_environment,
    quiescent,
)
from .intelligence import Inventory, dual_env_id, upsilon_enumerated
from .machine import flip_sign
from .spaces import Space
from .valuation import certification_outcome, value_exact


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    checked: int
    detail: str = ""


def _result(name: str, failures: list[str], checked: int) -> CheckResult:
    if failures:
        return CheckResult(name, False, checked, f"{len(failures)} failures; first: {failures[0]}")
    return CheckResult(name, True, checked)


Pair = tuple[Agent, Environment]


def check_dual_values(pairs: Sequence[Pair], horizons: Iterable[int]) -> CheckResult:
    failures, checked = [], 0
    horizons = list(horizons)
    for pi, mu in pairs:
        for n in horizons:
            v = value_exact(pi, mu, n).value
            w = value_exact(dual_agent(pi), dual_environment(mu), n).value
            checked += 1
            if w != -v:
                failures.append(f"{pi.name}/{mu.name} n={n}: {v} vs {w}")
    return _result("dual_value_negation", failures, checked)


def check_twist(pairs: Sequence[Pair], horizons: Iterable[int]) -> CheckResult:
    failures, checked = [], 0
    horizons = list(horizons)
    for pi, mu in pairs:
        for n in horizons:
            a = value_exact(pi, dual_environment(mu), n).value
            b = value_exact(dual_agent(pi), mu, n).value
            checked += 1
            if a != -b:
                failures.append(f"{pi.name}/{mu.name} n={n}: {a} vs {b}")
    return _result("twist_identity", failures, checked)


def check_double_negation(pairs: Sequence[Pair], depth: int) -> CheckResult:
    failures, checked = [], 0
    for pi, mu in pairs:
        checked += 2
        if not agents_equal(dual_agent(dual_agent(pi)), pi, depth):
            failures.append(f"agent {pi.name}")
        if not environments_equal(dual_environment(dual_environment(mu)), mu, depth):
            failures.append(f"environment {mu.name}")
    return _result("double_negation", failures, checked)


def check_certificate_duality(envs: Iterable[Environment], H: int) -> CheckResult:
    failures, checked = [], 0
    for mu in envs:
        for candidate in (mu, quiescent(mu, H)):
            a = certification_outcome(candidate, H)
            b = certification_outcome(dual_environment(candidate), H)
            checked += 1
            if a != b:
                failures.append(f"{candidate.name}: {a} vs {b}")
    return _result("certificate_duality", failures, checked)


def _perms(alphabet: Sequence[str]) -> list[Permutation]:
    return [Permutation.from_images(alphabet, images) for images in permutations(alphabet)]


def check_permutation_values(pairs: Sequence[Pair], horizons: Iterable[int]) -> CheckResult:
    """Permutation value identities for actions and observations.

    For every permutation ``P``: ``V(pi, mu) = V(P pi, P mu)`` and
    ``V(P pi, mu) = V(pi, P^-1 mu)``; for involutions these are the forms
    ``V(pi, mu) = V(P pi, P^-1 mu)`` and ``V(P pi, mu) = V(pi, P mu)``.
    """
    failures, checked = [], 0
    horizons = list(horizons)
    for pi, mu in pairs:
        space = mu.space
        for kind, alphabet, wa, we in (
            ("actions", space.actions, permute_agent, permute_environment),
            ("observations", space.observations, permute_observations_agent, permute_observations_environment),
        ):
            for P in _perms(alphabet):
                if P.is_identity():
                    continue
                Pinv = P.inverse()
                for n in horizons:
                    base = value_exact(pi, mu, n).value
                    conj = value_exact(wa(P, pi), we(P, mu), n).value
                    left = value_exact(wa(P, pi), mu, n).value
                    right = value_exact(pi, we(Pinv, mu), n).value
                    checked += 2
                    if base != conj:
                        failures.append(f"{kind} {P} {pi.name}/{mu.name} n={n}: V={base}, V(P pi, P mu)={conj}")
                    if left != right:
                        failures.append(f"{kind} {P} {pi.name}/{mu.name} n={n}: {left} vs {right}")
    return _result("permutation_values", failures, checked)


def check_machine_symmetry(inventory: Inventory) -> list[CheckResult]:
    accepted = {p.program: p for p in inventory.accepted()}
    closure, ksym, prefix = [], [], []
    for p, probe in accepted.items():
        twin = accepted.get(flip_sign(p))
        if twin is None:
            closure.append(f"{p}: flipped program not accepted")
        elif twin.env.env_id != dual_env_id(probe.env):
            closure.append(f"{p}: flipped program does not compute the dual environment")
    for cls in inventory.classes.values():
        dual_id = dual_env_id(cls.env)
        other = inventory.classes.get(dual_id)
        if other is None:
            ksym.append(f"{cls.env_id}: dual environment missing from the inventory")
        elif other.k_hat != cls.k_hat:
            ksym.append(f"{cls.env_id}: K={cls.k_hat} but dual has K={other.k_hat}")
    programs = sorted(accepted)
    for i, p in enumerate(programs):
        for q in programs[i + 1 :]:
            if q.startswith(p) or p.startswith(q):
                prefix.append(f"{p} / {q}")
    return [
        _result("flip_closure", closure, len(accepted)),
        _result("k_symmetry", ksym, len(inventory.classes)),
        _result("prefix_free", prefix, len(programs)),
    ]


def check_upsilon_symmetry(agents: Sequence[Agent], inventory: Inventory) -> CheckResult:
    failures = []
    for pi in agents:
        u = upsilon_enumerated(pi, inventory).value
        d = upsilon_enumerated(dual_agent(pi), inventory).value
        if d != -u:
            failures.append(f"{pi.name}: Y={u}, Y(dual)={d}")
    return _result("upsilon_symmetry", failures, len(agents))


def check_reward_ignoring_zero(agents: Sequence[Agent], inventory: Inventory) -> CheckResult:
    failures, checked = [], 0
    for pi in agents:
        if not pi.ignores_rewards:
            continue
        checked += 1
        u = upsilon_enumerated(pi, inventory).value
        if u != 0:
            failures.append(f"{pi.name}: Y={u}")
    return _result("reward_ignoring_zero", failures, checked)


def check_order_reversal(agents: Sequence[Agent], inventory: Inventory) -> CheckResult:
    values = {pi.name: upsilon_enumerated(pi, inventory).value for pi in agents}
    duals = {pi.name: upsilon_enumerated(dual_agent(pi), inventory).value for pi in agents}
    failures, checked = [], 0
    for a in values:
        for b in values:
            if values[a] > values[b]:
                checked += 1
                if not duals[a] < duals[b]:
                    failures.append(f"{a} > {b} but duals {duals[a]} vs {duals[b]}")
    return _result("order_reversal", failures, checked)


def check_permutable_upsilon(agents: Sequence[Agent], inventory: Inventory) -> CheckResult:
    failures, checked = [], 0
    for pi in agents:
        base = upsilon_enumerated(pi, inventory).value
        for P in _perms(pi.space.actions):
            checked += 1
            got = upsilon_enumerated(permute_agent(P, pi), inventory).value
            if got != base:
                failures.append(f"{pi.name} {P}: {got} vs {base}")
    return _result("permutable_upsilon", failures, checked)


# -- codec -----------------------------------------------------------------------


def all_histories(space: Space, max_symbols: int) -> list[tuple]:
    """Every pattern-valid sequence of at most ``max_symbols`` symbols."""
    alphabets = (space.observations, space.rewards, space.actions)
    layer = [()]
    out = [()]
    for i in range(max_symbols):
        layer = [s + (x,) for s in layer for x in alphabets[i % 3]]
        out.extend(layer)
    return out


def random_measures(space: Space, count: int, seed: int) -> list[dict]:
    rng = random.Random(seed)
    seen, out = set(), []
    denominators = (1, 2, 3, 4, 6, 8, 12, 16, 128, 1000)
    while len(out) < count:
        m = grid_measure(rng, list(space.outcomes), rng.choice(denominators))
        key = tuple(sorted((space.outcome_index[x], p) for x, p in m.items()))
        if key not in seen:
            seen.add(key)
            out.append(m)
    return out


def check_codec(space: Space, max_symbols: int = 6, measures: int = 1000, round_trips: int = 10_000,
                seed: int = 0) -> list[CheckResult]:
    words = [codec.encode_history(space, s) for s in all_histories(space, max_symbols)]
    words += [codec.encode_measure(space, m) for m in random_measures(space, measures, seed)]
    violations = []
    if len(set(words)) != len(words):
        violations.append("duplicate codewords")
    for i, c in enumerate(words):
        for j, d in enumerate(words):
            if i != j and (d.startswith(c) or d.endswith(c)):
                violations.append(f"{c.hex()} vs {d.hex()}")
                break
    rng = random.Random(seed + 1)
    failures = []
    for _ in range(round_trips):
        k = rng.randrange(0, 13)
        s = []
        for i in range(k):
            alphabet = (space.observations, space.rewards, space.actions)[i % 3]
            s.append(rng.choice(alphabet))
        s = tuple(s)
        if codec.decode(space, codec.encode_history(space, s)) != s:
            failures.append(repr(s))
    return [
        _result("codec_prefix_suffix_free", violations, len(words)),
        _result("codec_round_trip", failures, round_trips),
    ]


def summarize(results: Sequence[CheckResult]) -> str:
    lines = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{status}  {r.name} ({r.checked} checked){'  ' + r.detail if r.detail else ''}")
    failed = sum(not r.passed for r in results)
    lines.append(f"{len(results) - failed}/{len(results)} checks passed")
    return "\n".join(lines) + "\n"


def results_csv(results: Sequence[CheckResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check", "passed", "checked", "detail"])
    for r in results:
        w.writerow([r.name, int(r.passed), r.checked, r.detail])
    return buf.getvalue()

