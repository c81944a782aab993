"""A prefix-free and suffix-free byte encoding of histories and measures.

Byte layout of every codeword (format version 1)::

    OPEN  KIND  FORMAT  payload...  CLOSE

``OPEN = 0x5B`` (``[``), ``CLOSE = 0x5D`` (``]``), ``KIND`` is ``H`` (0x48)
for histories and ``M`` (0x4D) for measures, ``FORMAT = 0x01``. The payload is
a sequence of unsigned LEB128 varints; any payload byte equal to OPEN, CLOSE
or ESC (0x5C) is written as ``ESC, byte ^ 0x20``. Neither delimiter can
appear inside a codeword, so no codeword is a proper prefix or suffix of
another.

* History payload: one varint per symbol, the symbol's index in its
  alphabet (observation, reward or action according to position).
* Measure payload: for each outcome of positive probability, in canonical
  outcome order: ``outcome index, sign, numerator, denominator`` with the
  probability in lowest terms (sign is 0 for non-negative, 1 for negative).

Codewords are handled as ``bytes``; :func:`to_bits` / :func:`from_bits` convert
to the ``'0'``/``'1'`` strings the machine works on (most significant bit
first).
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

from .framework import ZERO, History, MeasureNotNormalized, check_history
from .spaces import Space

OPEN = 0x5B
CLOSE = 0x5D
ESC = 0x5C
KIND_HISTORY = 0x48
KIND_MEASURE = 0x4D
FORMAT_V1 = 0x01

_RESERVED = frozenset((OPEN, CLOSE, ESC))


class NotACodeword(ValueError):
    pass


class NoTrailingCodeword(ValueError):
    pass


# -- varints and escaping ------------------------------------------------------


def _varint(n: int) -> bytes:
    if n < 0:
        raise ValueError("varint must be non-negative")
    out = bytearray()
    while True:
        byte = n & 0x7F
        n >>= 7
        if n:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _escape(payload: bytes) -> bytes:
    out = bytearray()
    for b in payload:
        if b in _RESERVED:
            out += bytes((ESC, b ^ 0x20))
        else:
            out.append(b)
    return bytes(out)


def _unescape(body: bytes) -> bytes:
    out = bytearray()
    it = iter(body)
    for b in it:
        if b in (OPEN, CLOSE):
            raise NotACodeword("delimiter byte inside codeword")
        if b == ESC:
            nxt = next(it, None)
            if nxt is None or (nxt ^ 0x20) not in _RESERVED:
                raise NotACodeword("bad escape sequence")
            out.append(nxt ^ 0x20)
        else:
            out.append(b)
    return bytes(out)


def _read_varints(payload: bytes) -> list[int]:
    values = []
    n = shift = 0
    pending = False
    for b in payload:
        n |= (b & 0x7F) << shift
        pending = True
        if b & 0x80:
            shift += 7
            continue
        if shift and b == 0:
            raise NotACodeword("non-canonical varint")
        values.append(n)
        n = shift = 0
        pending = False
    if pending:
        raise NotACodeword("truncated varint")
    return values


def _frame(kind: int, payload: bytes) -> bytes:
    return bytes((OPEN, kind, FORMAT_V1)) + _escape(payload) + bytes((CLOSE,))


# -- encoding ------------------------------------------------------------------


def encode_history(space: Space, s: History) -> bytes:
    check_history(space, s)
    indices = (space.observation_index, space.reward_index, space.action_index)
    payload = b"".join(_varint(indices[i % 3][x]) for i, x in enumerate(s))
    return _frame(KIND_HISTORY, payload)


def encode_measure(space: Space, m: dict) -> bytes:
    total = ZERO
    payload = bytearray()
    for x, p in m.items():
        if x not in space.outcome_index:
            raise MeasureNotNormalized(f"outcome {x!r} outside the alphabet")
        if not isinstance(p, (int, Fraction)) or not 0 <= p <= 1:
            raise MeasureNotNormalized(f"probability {p!r} not in [0,1]")
        total += p
    if total != 1:
        raise MeasureNotNormalized(f"measure sums to {total}")
    for i, x in enumerate(space.outcomes):
        p = Fraction(m.get(x, 0))
        if not p:
            continue
        payload += _varint(i) + _varint(1 if p < 0 else 0) + _varint(abs(p.numerator)) + _varint(p.denominator)
    return _frame(KIND_MEASURE, bytes(payload))


# -- decoding ------------------------------------------------------------------


def decode(space: Space, c: bytes):
    """Invert :func:`encode_history` / :func:`encode_measure`; reject anything else."""
    c = bytes(c)
    if len(c) < 4 or c[0] != OPEN or c[-1] != CLOSE:
        raise NotACodeword("missing delimiters")
    kind, fmt = c[1], c[2]
    if fmt != FORMAT_V1:
        raise NotACodeword(f"unknown format tag {fmt:#x}")
    if kind in (OPEN, CLOSE):
        raise NotACodeword("delimiter byte inside codeword")
    values = _read_varints(_unescape(c[3:-1]))
    if kind == KIND_HISTORY:
        return _decode_history(space, values)
    if kind == KIND_MEASURE:
        return _decode_measure(space, values)
    raise NotACodeword(f"unknown kind tag {kind:#x}")


def _decode_history(space: Space, values: list[int]) -> History:
    alphabets = (space.observations, space.rewards, space.actions)
    out = []
    for i, v in enumerate(values):
        alphabet = alphabets[i % 3]
        if v >= len(alphabet):
            raise NotACodeword(f"symbol index {v} out of range at position {i}")
        out.append(alphabet[v])
    return tuple(out)


def _decode_measure(space: Space, values: list[int]) -> dict:
    if len(values) % 4:
        raise NotACodeword("measure payload is not a list of 4-tuples")
    m: dict = {}
    prev = -1
    for k in range(0, len(values), 4):
        idx, sign, num, den = values[k : k + 4]
        if idx <= prev or idx >= len(space.outcomes):
            raise NotACodeword("outcome indices must be increasing and in range")
        if sign not in (0, 1) or den == 0 or num == 0:
            raise NotACodeword("malformed probability")
        p = Fraction(num, den)
        if p.numerator != num or p.denominator != den:
            raise NotACodeword("probability not in lowest terms")
        if sign:
            raise NotACodeword("negative probability")
        if p > 1:
            raise NotACodeword("probability above one")
        m[space.outcomes[idx]] = p
        prev = idx
    if sum(m.values(), ZERO) != 1:
        raise NotACodeword("measure not normalised")
    return m


def decode_history(space: Space, c: bytes) -> History:
    v = decode(space, c)
    if not isinstance(v, tuple):
        raise NotACodeword("not a history codeword")
    return v


def decode_measure(space: Space, c: bytes) -> dict:
    v = decode(space, c)
    if not isinstance(v, dict):
        raise NotACodeword("not a measure codeword")
    return v


def is_history_codeword(space: Space, c: bytes) -> bool:
    try:
        decode_history(space, c)
    except NotACodeword:
        return False
    return True


# -- bit strings ---------------------------------------------------------------


def to_bits(c: bytes) -> str:
    return "".join(format(b, "08b") for b in c)


def from_bits(bits: str) -> bytes:
    if len(bits) % 8:
        raise NotACodeword("bit string is not a whole number of bytes")
    return bytes(int(bits[i : i + 8], 2) for i in range(0, len(bits), 8))


@lru_cache(maxsize=1 << 16)
def _split_cached(space: Space, x: str) -> tuple[str, History]:
    n = len(x)
    if n < 32 or x[n - 8 :] != format(CLOSE, "08b"):
        raise NoTrailingCodeword("input does not end with a close delimiter")
    open_bits = format(OPEN, "08b")
    # the only byte-aligned (from the end) OPEN not followed by another OPEN
    # is the last one; suffix-freeness makes that split unique
    for start in range(n - 8, -1, -8):
        if x[start : start + 8] == open_bits:
            try:
                s = decode_history(space, from_bits(x[start:]))
            except NotACodeword as exc:
                raise NoTrailingCodeword(str(exc)) from exc
            return x[:start], s
    raise NoTrailingCodeword("no open delimiter")


def split_trailing_codeword(space: Space, x: str) -> tuple[str, History]:
    """Split ``x`` as ``y + encode(s)`` for a history ``s``; the split is unique."""
    return _split_cached(space, x)


def hex_of(c: bytes) -> str:
    return c.hex()
