"""Signed-permutation operators on {A, B} strings and their quaternion algebra.

With the complement written as a bar (A-bar = B, B-bar = A), the operators
act blockwise along the string:

    negate:  every symbol complemented
    i:       per pair       (a1, a2)         -> (a2-bar, a1)
    e1:      per quadruplet (a1, a2, a3, a4) -> (a2-bar, a1, a4, a3-bar)
    e2:                                      -> (a3-bar, a4-bar, a1, a2)
    e3:                                      -> (a4, a3-bar, a2, a1-bar)

i and each e_k square to negate, and {identity, negate, e1, e2, e3} closes
into the order-8 quaternion group.  Composition is right-to-left: the last
operator listed acts first, matching the matrix convention.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

__all__ = [
    "VerificationError",
    "BitString",
    "StringOperator",
    "IDENTITY",
    "NEGATE",
    "I_OP",
    "E1",
    "E2",
    "E3",
    "negate",
    "apply_i",
    "apply_e",
    "compose",
    "verify_q8",
    "pauli",
    "correlation",
    "phase_cycle",
    "enumerate_strings",
    "write_group_table_csv",
]

_COMPLEMENT = {"A": "B", "B": "A"}


class VerificationError(RuntimeError):
    """An algebraic relation failed during group verification."""


@dataclass(frozen=True)
class BitString:
    """Sequence over {A, B}; length is a positive multiple of 4."""

    symbols: tuple[str, ...]

    def __post_init__(self):
        n = len(self.symbols)
        if n < 4 or n % 4 != 0:
            raise ValueError("length must be a positive multiple of 4")
        if any(s not in _COMPLEMENT for s in self.symbols):
            raise ValueError("symbols must be 'A' or 'B'")

    @classmethod
    def from_str(cls, text: str) -> "BitString":
        return cls(tuple(text))

    def __len__(self) -> int:
        return len(self.symbols)

    def __str__(self) -> str:
        return "".join(self.symbols)

    def concat(self, other: "BitString") -> "BitString":
        return BitString(self.symbols + other.symbols)


@dataclass(frozen=True)
class StringOperator:
    """Signed block permutation, repeated blockwise along the string.

    Output position j of each block takes the input at ``index_map[j]``,
    complemented when ``flip_mask[j]`` is set.
    """

    block_size: int
    index_map: tuple[int, ...]
    flip_mask: tuple[bool, ...]
    name: str = ""

    def __post_init__(self):
        if self.block_size not in (2, 4):
            raise ValueError("block_size must be 2 or 4")
        if len(self.index_map) != self.block_size or len(self.flip_mask) != self.block_size:
            raise ValueError("index_map and flip_mask must match block_size")
        if sorted(self.index_map) != list(range(self.block_size)):
            raise ValueError("index_map must be a bijection on the block")

    def __call__(self, s: BitString) -> BitString:
        if len(s) % self.block_size != 0:
            raise ValueError(f"string length must be a multiple of {self.block_size}")
        out = []
        for start in range(0, len(s), self.block_size):
            block = s.symbols[start : start + self.block_size]
            for j in range(self.block_size):
                sym = block[self.index_map[j]]
                out.append(_COMPLEMENT[sym] if self.flip_mask[j] else sym)
        return BitString(tuple(out))

    def lifted(self) -> "StringOperator":
        """Equivalent quadruplet operator (pair action repeated per half)."""
        if self.block_size == 4:
            return self
        m, f = self.index_map, self.flip_mask
        return StringOperator(
            4, (m[0], m[1], m[0] + 2, m[1] + 2), (f[0], f[1], f[0], f[1]), self.name
        )

    def key(self) -> tuple:
        lifted = self.lifted()
        return (lifted.index_map, lifted.flip_mask)


IDENTITY = StringOperator(2, (0, 1), (False, False), "1")
NEGATE = StringOperator(2, (0, 1), (True, True), "-1")
I_OP = StringOperator(2, (1, 0), (True, False), "i")
E1 = StringOperator(4, (1, 0, 3, 2), (True, False, False, True), "e1")
E2 = StringOperator(4, (2, 3, 0, 1), (True, True, False, False), "e2")
E3 = StringOperator(4, (3, 2, 1, 0), (False, True, False, True), "e3")

_E_OPS = {1: E1, 2: E2, 3: E3}


def negate(s: BitString) -> BitString:
    """Complement every symbol: the anti-correlated partner string."""
    return NEGATE(s)


def apply_i(s: BitString) -> BitString:
    """Pairwise square root of negate."""
    if len(s) % 2 != 0:
        raise ValueError("length must be even")
    return I_OP(s)


def apply_e(k: int, s: BitString) -> BitString:
    """Quadruplet square roots of negate, k in {1, 2, 3}."""
    if k not in _E_OPS:
        raise ValueError("k must be 1, 2 or 3")
    if len(s) % 4 != 0:
        raise ValueError("length must be a multiple of 4")
    return _E_OPS[k](s)


def _compose2(a: StringOperator, b: StringOperator, name: str = "") -> StringOperator:
    """a after b: (a . b)(S) = a(b(S))."""
    size = max(a.block_size, b.block_size)
    if size == 4:
        a, b = a.lifted(), b.lifted()
    index_map = tuple(b.index_map[a.index_map[j]] for j in range(size))
    flip_mask = tuple(a.flip_mask[j] ^ b.flip_mask[a.index_map[j]] for j in range(size))
    return StringOperator(size, index_map, flip_mask, name)


def compose(ops: Sequence[StringOperator]) -> StringOperator:
    """Composition of operators, the last listed acting first.

    ``compose([])`` is the identity; ``compose([a, b])`` applies b, then a.
    """
    result = IDENTITY
    for op in ops:
        result = _compose2(result, op)
    names = [op.name or "?" for op in ops]
    return StringOperator(
        result.block_size, result.index_map, result.flip_mask, "*".join(names) or "1"
    )


def enumerate_strings(length: int = 4) -> Iterator[BitString]:
    """All 2**length strings of the given length."""
    for combo in itertools.product("AB", repeat=length):
        yield BitString(combo)


def correlation(s: BitString, t: BitString) -> float:
    """(matches - mismatches) / length, in [-1, 1]."""
    if len(s) != len(t):
        raise ValueError("length mismatch")
    matches = sum(1 for a, b in zip(s.symbols, t.symbols) if a == b)
    return (2 * matches - len(s)) / len(s)


def phase_cycle(s: BitString, n_steps: int) -> list[BitString]:
    """Iterated e1 orbit [S, e1(S), e1^2(S), ...]; the cycle closes at period 4."""
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    out = [s]
    for _ in range(n_steps):
        out.append(E1(out[-1]))
    return out


def pauli(axis: str) -> StringOperator:
    """Spin operators from the quaternion units: z = i.e1, y = i.e2, x = -i.e3."""
    ops = {
        "z": compose([I_OP, E1]),
        "y": compose([I_OP, E2]),
        "x": compose([NEGATE, I_OP, E3]),
    }
    if axis not in ops:
        raise ValueError("axis must be 'x', 'y' or 'z'")
    op = ops[axis]
    return StringOperator(op.block_size, op.index_map, op.flip_mask, f"sigma_{axis}")


# ---------------------------------------------------------------------------
# quaternion group verification
# ---------------------------------------------------------------------------

# reference Q8 arithmetic on (sign, unit) pairs, unit in {1, i, j, k}
_Q8_UNITS = ("1", "i", "j", "k")
_Q8_PRODUCTS = {
    ("i", "j"): (1, "k"),
    ("j", "i"): (-1, "k"),
    ("j", "k"): (1, "i"),
    ("k", "j"): (-1, "i"),
    ("k", "i"): (1, "j"),
    ("i", "k"): (-1, "j"),
}


def _q8_multiply(a: tuple[int, str], b: tuple[int, str]) -> tuple[int, str]:
    sa, ua = a
    sb, ub = b
    if ua == "1":
        return (sa * sb, ub)
    if ub == "1":
        return (sa * sb, ua)
    if ua == ub:
        return (-sa * sb, "1")
    s, u = _Q8_PRODUCTS[(ua, ub)]
    return (s * sa * sb, u)


def _q8_name(el: tuple[int, str]) -> str:
    sign, unit = el
    return unit if sign == 1 else f"-{unit}"


def verify_q8() -> dict:
    """Close {1, -1, e1, e2, e3} under composition and verify it is Q8.

    Checks closure of order 8, the center {1, -1}, and a full 64-product
    isomorphism against reference quaternion arithmetic under
    1 -> identity, -1 -> negate, i -> e1, j -> e2, k -> e3.  Raises
    :class:`VerificationError` naming the first failing product.
    """
    failures: list[str] = []
    named = {
        "1": IDENTITY.lifted(),
        "-1": NEGATE.lifted(),
        "e1": E1,
        "e2": E2,
        "e3": E3,
        "-e1": _compose2(NEGATE, E1),
        "-e2": _compose2(NEGATE, E2),
        "-e3": _compose2(NEGATE, E3),
    }
    key_to_name = {op.key(): name for name, op in named.items()}

    # closure from the generators
    frontier = [named[n] for n in ("1", "-1", "e1", "e2", "e3")]
    seen = {op.key() for op in frontier}
    pool = list(frontier)
    while frontier:
        new = []
        for a in pool:
            for b in frontier:
                for prod in (_compose2(a, b), _compose2(b, a)):
                    if prod.key() not in seen:
                        seen.add(prod.key())
                        new.append(prod)
        pool.extend(new)
        frontier = new
    order = len(seen)
    if order != 8:
        failures.append(f"closure has order {order}, expected 8")
    if seen != set(key_to_name):
        failures.append("closure does not match {+-1, +-e1, +-e2, +-e3}")

    # quaternion map against reference arithmetic, all 64 products
    sign_unit = {
        name: ((1 if not name.startswith("-") else -1), name.lstrip("-").replace("e1", "i").replace("e2", "j").replace("e3", "k"))
        for name in named
    }
    relations_checked = 0
    table: dict[str, dict[str, str]] = {}
    names = ["1", "-1", "e1", "-e1", "e2", "-e2", "e3", "-e3"]
    for na in names:
        table[na] = {}
        for nb in names:
            prod = _compose2(named[na], named[nb])
            got = key_to_name.get(prod.key())
            expected = _q8_name(_q8_multiply(sign_unit[na], sign_unit[nb])).replace(
                "i", "e1"
            ).replace("j", "e2").replace("k", "e3")
            relations_checked += 1
            table[na][nb] = got or "?"
            if got != expected:
                failures.append(f"{na} . {nb} = {got}, expected {expected}")

    # the exhaustive string-level relations behind the table
    for s in enumerate_strings(4):
        for name, op in (("i", I_OP), ("e1", E1), ("e2", E2), ("e3", E3)):
            relations_checked += 1
            if op(op(s)) != negate(s):
                failures.append(f"{name}^2 != -1 on {s}")
        relations_checked += 1
        if E1(E2(E3(s))) != negate(s):
            failures.append(f"e1 . e2 . e3 != -1 on {s}")

    center = sorted(
        na for na in names if all(table[na][nb] == table[nb][na] for nb in names)
    )
    if center != ["-1", "1"]:
        failures.append(f"center is {center}, expected ['-1', '1']")

    if failures:
        raise VerificationError(failures[0])
    return {
        "order": order,
        "center": center,
        "relations_checked": relations_checked,
        "failures": failures,
        "names": names,
        "table": [[table[na][nb] for nb in names] for na in names],
    }


def write_group_table_csv(report: dict, path) -> None:
    """8x8 composition table of operator names."""
    names = report["names"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + names)
        for name, row in zip(names, report["table"]):
            writer.writerow([name] + row)
