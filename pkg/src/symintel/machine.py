"""Reference machine, its POS/NEG symmetrisation and bounded complexity search.

Base machine ``U0``
-------------------
A program body is a stream of 3-bit opcodes (an ``EXT`` opcode is followed by
a 3-bit extended opcode). Parsing stops at the first terminator (``END`` or
``EMIT``); a body is well formed only if the terminator is its last bit, so
the set of well-formed bodies is prefix-free. The machine has an accumulator
``ACC`` (starts at 0), a stack of mixture components, an output tape and a
read-only input register. One step per executed instruction.

=======  ====  =============================================================
opcode   bits  effect
=======  ====  =============================================================
END      000   halt, output the tape
EMIT     001   halt, output the tape followed by the codeword of the uniform
               mixture over the stacked components and ``ACC``
INC      010   ``ACC += 1``
ACT      011   ``ACC = 1 + index of the last action`` (no-op on ``<>``)
OBS      100   ``ACC = 1 + index of the last observation`` (no-op on ``<>``)
RWD      101   ``ACC = emit code of the last reward`` (no-op on ``<>``)
MARK     110   push ``ACC`` as a mixture component
EXT      111   read a 3-bit extended opcode:
DBL      000   ``ACC *= 2``
CLR      001   ``ACC = 0``
LEN      010   ``ACC = number of rounds in the input history``
JNZ      011   jump to the first instruction if ``ACC != 0``
CPY      100   append the whole input register to the tape
BIT      101   append ``ACC mod 2`` to the tape
DEC      110   ``ACC = max(ACC - 1, 0)``
LOOP     111   jump to the first instruction
=======  ====  =============================================================

History opcodes (``ACT``, ``OBS``, ``RWD``, ``LEN``) diverge unless the input
register holds a history codeword. Component ``k`` names outcome
``(observations[(k // |R|) mod |O|], zero_first_rewards[k mod |R|])`` where
rewards are ordered by magnitude, positive before negative (``0, 1/2, -1/2``).

As a function of one bit string, ``U0`` reads a body and treats the rest as
its input, which must be exactly one codeword; this keeps the function
prefix-free on whole strings.

Symmetric machine ``U``
-----------------------
The first program bit is POS (0) or NEG (1). ``U(POS x) = U0(x)``. For
``U(NEG x)`` split ``x = y + code(s)``, run ``U0(y + code(dual s))`` and, if
that yields a measure ``m``, output ``code(m')`` with ``m'(o, r) = m(o, -r)``.
A permutable machine adds a fixed-width action-permutation index after the
sign bit; a non-identity index runs the body on the permuted history.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import permutations, product
from typing import Iterator

from . import codec
from .framework import (
    Environment,
    History,
    Permutation,
    dual_history,
    env_histories,
    permute_actions_history,
    point_mass,
    rounds,
)
from .spaces import Space
from .valuation import CertificationRefused, certify_well_behaved

PRIMARY = ("END", "EMIT", "INC", "ACT", "OBS", "RWD", "MARK", "EXT")
EXTENDED = ("DBL", "CLR", "LEN", "JNZ", "CPY", "BIT", "DEC", "LOOP")
TERMINATORS = frozenset(("END", "EMIT"))
OPCODE_BITS = {name: format(i, "03b") for i, name in enumerate(PRIMARY) if name != "EXT"}
OPCODE_BITS.update({name: "111" + format(i, "03b") for i, name in enumerate(EXTENDED)})

FLIP_COST = 1
ZERO_REWARD = Fraction(0)
POS, NEG = "0", "1"


class Malformed(ValueError):
    pass


class Rejected(Exception):
    def __init__(self, reason: str, witness: History | None = None, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.witness = witness


@dataclass(frozen=True)
class Run:
    """Outcome of one execution: ``output`` is ``None`` when the run diverged."""

    output: str | None
    steps: int
    reason: str = ""

    @property
    def halted(self) -> bool:
        return self.output is not None


# -- assembly --------------------------------------------------------------------


def assemble(ops) -> str:
    if isinstance(ops, str):
        ops = ops.split()
    return "".join(OPCODE_BITS[op.upper()] for op in ops)


@lru_cache(maxsize=1 << 16)
def parse_prefix(bits: str) -> tuple[tuple[str, ...], int]:
    """Read instructions up to the first terminator; return them and the bits consumed."""
    ops = []
    i = 0
    while True:
        if i + 3 > len(bits):
            raise Malformed("missing terminator")
        code = int(bits[i : i + 3], 2)
        i += 3
        op = PRIMARY[code]
        if op == "EXT":
            if i + 3 > len(bits):
                raise Malformed("truncated extended opcode")
            op = EXTENDED[int(bits[i : i + 3], 2)]
            i += 3
        ops.append(op)
        if op in TERMINATORS:
            return tuple(ops), i


def parse_body(bits: str) -> tuple[str, ...]:
    ops, used = parse_prefix(bits)
    if used != len(bits):
        raise Malformed("bits after the terminator")
    return ops


def disassemble(bits: str) -> str:
    return " ".join(parse_body(bits))


# -- base machine ----------------------------------------------------------------


def reward_emit_order(space: Space) -> tuple[Fraction, ...]:
    return tuple(sorted(space.rewards, key=lambda r: (abs(r), -r)))


@lru_cache(maxsize=1 << 16)
def _input_history(space: Space, bits: str) -> History | None:
    try:
        return codec.decode_history(space, codec.from_bits(bits))
    except codec.NotACodeword:
        return None


@lru_cache(maxsize=1 << 16)
def _is_codeword(space: Space, bits: str) -> bool:
    try:
        codec.decode(space, codec.from_bits(bits))
    except codec.NotACodeword:
        return False
    return True


def _emit_bits(space: Space, components: list[int]) -> str:
    order = reward_emit_order(space)
    n_r, n_o = len(order), len(space.observations)
    weight = Fraction(1, len(components))
    m: dict = {}
    for k in components:
        x = (space.observations[(k // n_r) % n_o], order[k % n_r])
        m[x] = m.get(x, 0) + weight
    return codec.to_bits(codec.encode_measure(space, m))


def execute(space: Space, ops: tuple[str, ...], input_bits: str, T: int) -> Run:
    acc = 0
    stack: list[int] = []
    out: list[str] = []
    pc = 0
    steps = 0
    history: History | None = None
    loaded = False
    emit_order = None
    while True:
        if steps >= T:
            return Run(None, steps, "step budget exhausted")
        steps += 1
        op = ops[pc]
        pc += 1
        if op in ("ACT", "OBS", "RWD", "LEN"):
            if not loaded:
                history, loaded = _input_history(space, input_bits), True
            if history is None:
                return Run(None, steps, "input is not a history codeword")
            if op == "LEN":
                acc = rounds(history)
            elif history:
                if op == "ACT":
                    acc = 1 + space.action_index[history[-1]]
                elif op == "OBS":
                    acc = 1 + space.observation_index[history[-3]]
                else:
                    emit_order = emit_order or reward_emit_order(space)
                    acc = emit_order.index(history[-2])
        elif op == "END":
            return Run("".join(out), steps)
        elif op == "EMIT":
            return Run("".join(out) + _emit_bits(space, stack + [acc]), steps)
        elif op == "INC":
            acc += 1
        elif op == "MARK":
            stack.append(acc)
        elif op == "DBL":
            acc *= 2
        elif op == "CLR":
            acc = 0
        elif op == "DEC":
            acc = max(acc - 1, 0)
        elif op == "JNZ":
            if acc:
                pc = 0
        elif op == "LOOP":
            pc = 0
        elif op == "CPY":
            out.append(input_bits)
        elif op == "BIT":
            out.append(str(acc & 1))
        else:  # pragma: no cover - parse_prefix only yields known opcodes
            raise AssertionError(op)


def run_u0(space: Space, body: str, input_bits: str, T: int) -> Run:
    """Run a well-formed body on an explicit input register."""
    if T < 1:
        raise ValueError("step budget must be positive")
    try:
        ops = parse_body(body)
    except Malformed as exc:
        return Run(None, 0, f"malformed body: {exc}")
    return execute(space, ops, input_bits, T)


def run_u0_string(space: Space, w: str, T: int) -> Run:
    """``U0`` on a single string: a body followed by exactly one codeword."""
    try:
        ops, used = parse_prefix(w)
    except Malformed as exc:
        return Run(None, 0, f"malformed body: {exc}")
    rest = w[used:]
    if not _is_codeword(space, rest):
        return Run(None, 0, "input is not a single codeword")
    return execute(space, ops, rest, T)


# -- symmetric / permutable machine ------------------------------------------------


def _flip_measure_bits(space: Space, bits: str) -> str | None:
    try:
        m = codec.decode_measure(space, codec.from_bits(bits))
    except codec.NotACodeword:
        return None
    return codec.to_bits(codec.encode_measure(space, {(o, -r): p for (o, r), p in m.items()}))


@dataclass(frozen=True)
class Machine:
    """The machine ``U`` built on ``U0`` for a given space.

    ``symmetric=False`` gives the negative-control machine whose NEG branch is
    a plain pass-through to ``U0``. ``permutable=True`` adds the
    action-permutation header.
    """

    space: Space
    symmetric: bool = True
    permutable: bool = False
    perms: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = len(self.space.actions)
        object.__setattr__(self, "perms", tuple(permutations(range(n))) if self.permutable else ((),))

    @property
    def perm_bits(self) -> int:
        if not self.permutable:
            return 0
        return math.ceil(math.log2(math.factorial(len(self.space.actions))))

    @property
    def header_bits(self) -> int:
        return 1 + self.perm_bits

    def permutation(self, index: int) -> Permutation | None:
        if index >= len(self.perms):
            return None
        images = self.perms[index]
        acts = self.space.actions
        return Permutation({acts[i]: acts[j] for i, j in enumerate(images)}, acts)

    def run(self, p: str, x: str, T: int) -> Run:
        """``U(p + x)``."""
        return self.run_string(p + x, T)

    def run_string(self, w: str, T: int) -> Run:
        h = self.header_bits
        if len(w) < h:
            return Run(None, 0, "missing header")
        neg = w[0] == NEG
        perm_index = int(w[1:h], 2) if h > 1 else 0
        rest = w[h:]
        if perm_index and perm_index >= len(self.perms):
            return Run(None, 0, "invalid permutation index")
        if (not neg or not self.symmetric) and not perm_index:
            return run_u0_string(self.space, rest, T)
        try:
            y, s = codec.split_trailing_codeword(self.space, rest)
        except codec.NoTrailingCodeword:
            return Run(None, 0, "no trailing history codeword")
        if perm_index:
            s = permute_actions_history(self.permutation(perm_index), s)
        flip = neg and self.symmetric
        if flip:
            s = dual_history(s)
        inner = run_u0_string(self.space, y + codec.to_bits(codec.encode_history(self.space, s)), T)
        if not inner.halted or not flip:
            return inner
        flipped = _flip_measure_bits(self.space, inner.output)
        if flipped is None:
            return Run(None, inner.steps + FLIP_COST, "NEG branch output is not a measure")
        return Run(flipped, inner.steps + FLIP_COST)

    def is_program(self, p: str) -> bool:
        h = self.header_bits
        if len(p) <= h:
            return False
        if h > 1 and int(p[1:h], 2) >= len(self.perms):
            return False
        try:
            parse_body(p[h:])
        except Malformed:
            return False
        return True


def make_permutable(machine: Machine) -> Machine:
    return Machine(machine.space, machine.symmetric, True)


def run_symmetric(machine: Machine, p: str, x: str, T: int) -> Run:
    return machine.run(p, x, T)


def flip_sign(p: str) -> str:
    return (NEG if p[0] == POS else POS) + p[1:]


# -- machine-backed environments -------------------------------------------------


@lru_cache(maxsize=64)
def _probe_inputs(space: Space, H: int) -> tuple[tuple[History, str], ...]:
    return tuple((s, codec.to_bits(codec.encode_history(space, s))) for s in env_histories(space, H))


class MachineEnvironment(Environment):
    """Environment computed by a program, clamped to (first observation, 0) after ``H`` rounds."""

    def __init__(self, machine: Machine, program: str, H: int, T: int, table: dict[History, dict]):
        super().__init__(machine.space, f"prog:{program_label(program)}")
        self.machine, self.program, self.H, self.T = machine, program, H, T
        self.table = table
        self.quiescent_after = H
        self._rest = point_mass((machine.space.observations[0], Fraction(0)))

    def _measure(self, s: History) -> dict:
        if rounds(s) > self.H:
            return self._rest
        return self.table[s]

    def signature(self) -> bytes:
        """Canonical byte string of the behaviour on all histories up to ``H`` rounds."""
        return b"".join(codec.encode_measure(self.space, self.table[s]) for s, _ in _probe_inputs(self.space, self.H))

    @property
    def env_id(self) -> str:
        return hashlib.sha256(self.signature()).hexdigest()[:16]


def program_to_environment(machine: Machine, p: str, H: int, T: int) -> MachineEnvironment:
    """Probe ``p`` on every history up to ``H`` rounds; raise :class:`Rejected` unless it defines a certified environment."""
    if ZERO_REWARD not in machine.space.reward_index:
        raise ValueError("machine environments need 0 in the reward alphabet")
    if not machine.is_program(p):
        raise Rejected("malformed")
    space = machine.space
    table: dict[History, dict] = {}
    for s, bits in _probe_inputs(space, H):
        run = machine.run(p, bits, T)
        if not run.halted:
            raise Rejected("diverged", s, run.reason)
        try:
            table[s] = codec.decode_measure(space, codec.from_bits(run.output))
        except codec.NotACodeword as exc:
            raise Rejected("non-measure", s, str(exc)) from None
    env = MachineEnvironment(machine, p, H, T, table)
    try:
        certify_well_behaved(env, H)
    except CertificationRefused as exc:
        raise Rejected("budget-violation", exc.witness, str(exc)) from None
    return env


# -- enumeration and complexity bounds -------------------------------------------


def program_label(p: str) -> str:
    """``hex:nbits`` rendering of a bit string (bits padded on the right)."""
    if not p:
        return ":0"
    pad = (-len(p)) % 4
    return f"{int(p + '0' * pad, 2):0{(len(p) + pad) // 4}x}:{len(p)}"


def parse_program_label(text: str) -> str:
    text = text.strip()
    hexpart, _, nbits = text.partition(":")
    bits = "".join(format(int(c, 16), "04b") for c in hexpart)
    if not nbits:
        return bits
    n = int(nbits)
    if n > len(bits) or any(b != "0" for b in bits[n:]):
        raise ValueError(f"bad program label {text!r}")
    return bits[:n]


def all_bitstrings(L: int, start: int = 1) -> Iterator[str]:
    """Length-then-lexicographic order."""
    for n in range(start, L + 1):
        for bits in product("01", repeat=n):
            yield "".join(bits)


@dataclass
class Probe:
    program: str
    accepted: bool
    reason: str
    env: MachineEnvironment | None = None


def probe_program(machine: Machine, p: str, H: int, T: int) -> Probe:
    try:
        env = program_to_environment(machine, p, H, T)
    except Rejected as exc:
        return Probe(p, False, exc.reason)
    return Probe(p, True, "", env)


def enumerate_programs(machine: Machine, L: int, H: int, T: int) -> Iterator[Probe]:
    for p in all_bitstrings(L):
        yield probe_program(machine, p, H, T)


@dataclass(frozen=True)
class ComplexityBound:
    env_id: str
    k_hat: int
    L: int
    T: int
    H: int
    program: str


def _strip(m: dict) -> dict:
    return {x: p for x, p in m.items() if p}


def behaves_like(env: Environment, target: Environment, H: int) -> bool:
    return all(_strip(env.measure(s)) == _strip(target.measure(s)) for s in env_histories(env.space, H))


def complexity_upper_bound(machine: Machine, target: Environment, L: int, T: int, H: int) -> ComplexityBound | None:
    """Length of the first accepted program (length-then-lex order) matching ``target`` up to ``H`` rounds."""
    for probe in enumerate_programs(machine, L, H, T):
        if probe.accepted and behaves_like(probe.env, target, H):
            return ComplexityBound(probe.env.env_id, len(probe.program), L, T, H, probe.program)
    return None
