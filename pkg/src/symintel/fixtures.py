"""Text format for table agents and environments.

One line per history::

    # kind = environment
    <> -> o0,1/2:3/4 o0,-1/2:1/4
    o0 1/2 a1 -> o1,0:1

Histories list their symbols in order (``<>`` is the empty history); each
outcome is ``symbol:p/q`` for agents and ``obs,reward:p/q`` for environments.
Histories missing from the file get the uniform measure.
"""

from __future__ import annotations

from fractions import Fraction

from .framework import (
    Agent,
    Environment,
    History,
    RandomTableAgent,
    RandomTableEnvironment,
    TableAgent,
    TableEnvironment,
    check_history,
    check_measure,
)
from .spaces import Space, format_rational


class FixtureFormatError(ValueError):
    pass


def _format_history(s: History) -> str:
    if not s:
        return "<>"
    return " ".join(format_rational(x) if i % 3 == 1 else x for i, x in enumerate(s))


def _parse_history(text: str) -> History:
    text = text.strip()
    if text == "<>":
        return ()
    return tuple(Fraction(tok) if i % 3 == 1 else tok for i, tok in enumerate(text.split()))


def dump_table(kind: str, table: dict) -> str:
    if kind not in ("agent", "environment"):
        raise ValueError(kind)
    lines = [f"# kind = {kind}"]
    for s, m in table.items():
        if kind == "agent":
            entries = [f"{a}:{format_rational(p)}" for a, p in m.items() if p]
        else:
            entries = [f"{o},{format_rational(r)}:{format_rational(p)}" for (o, r), p in m.items() if p]
        lines.append(f"{_format_history(s)} -> {' '.join(entries)}")
    return "\n".join(lines) + "\n"


def load_table(space: Space, text: str) -> Agent | Environment:
    kind = None
    table: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            if key.strip() == "kind":
                kind = value.strip()
            continue
        if kind not in ("agent", "environment"):
            raise FixtureFormatError(f"line {lineno}: missing '# kind = agent|environment' header")
        if "->" not in line:
            raise FixtureFormatError(f"line {lineno}: missing '->'")
        lhs, rhs = line.split("->", 1)
        try:
            s = _parse_history(lhs)
            check_history(space, s)
            m: dict = {}
            for tok in rhs.split():
                key, _, prob = tok.rpartition(":")
                if kind == "environment":
                    o, _, r = key.partition(",")
                    m[(o, Fraction(r))] = Fraction(prob)
                else:
                    m[key] = Fraction(prob)
        except (ValueError, ZeroDivisionError) as exc:
            raise FixtureFormatError(f"line {lineno}: {exc}") from exc
        support = space.actions if kind == "agent" else space.outcomes
        check_measure(m, support, s)
        table[s] = m
    if kind == "agent":
        return TableAgent(space, table)
    if kind == "environment":
        return TableEnvironment(space, table)
    raise FixtureFormatError("missing '# kind = agent|environment' header")


def random_fixture_pairs(space: Space, count: int, seed: int = 0, depth: int = 3):
    """``count`` seeded ``(agent, environment)`` table pairs on a ``k/8`` probability grid.

    Every third environment is sparse (most histories pay reward 0), so the
    suite mixes dense and sparse reward structure.
    """
    pairs = []
    for i in range(count):
        k = seed * 100003 + i
        quiet = 0.9 if i % 3 == 2 else 0.0
        pairs.append((RandomTableAgent(space, k, depth), RandomTableEnvironment(space, k, depth, quiet=quiet)))
    return pairs
