"""Exact base-3 arithmetic on truncated ternary fractions.

Everything here is digit-combinatorial on fixed-depth expansions: a point
of the middle-third Cantor set is a fraction with no digit 1, a generic
perturbation has equidistributed digits.  Floating point never touches the
digits; products go through exact integers and are truncated (not rounded)
to the working depth at the very last step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "TernaryFraction",
    "CounterfactualResult",
    "is_exceptional",
    "random_exceptional",
    "random_normal",
    "add_mod1",
    "multiply_mod1",
    "perturbation_experiment",
    "line_intersection_experiment",
    "axis_direction_counterexample",
    "cantor_endpoints",
    "write_gradient_csv",
]

_INT64_SAFE_DEPTH = 19  # 3**(2*19) still fits in int64


@dataclass(frozen=True)
class TernaryFraction:
    """Fixed-depth base-3 expansion of a point in [0, 1)."""

    digits: tuple[int, ...]

    def __post_init__(self):
        if len(self.digits) < 1:
            raise ValueError("depth must be at least 1")
        if any(d not in (0, 1, 2) for d in self.digits):
            raise ValueError("digits must lie in {0, 1, 2}")
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))

    @property
    def depth(self) -> int:
        return len(self.digits)

    def to_int(self) -> int:
        """Numerator n with value = n / 3**depth."""
        n = 0
        for d in self.digits:
            n = 3 * n + d
        return n

    @classmethod
    def from_int(cls, n: int, depth: int) -> "TernaryFraction":
        if not 0 <= n < 3**depth:
            raise ValueError("numerator out of range for depth")
        digits = []
        for _ in range(depth):
            n, d = divmod(n, 3)
            digits.append(d)
        return cls(tuple(reversed(digits)))

    @classmethod
    def from_fraction(cls, value: Fraction, depth: int) -> "TernaryFraction":
        """Truncate an exact rational in [0, 1) to ``depth`` ternary digits."""
        if not 0 <= value < 1:
            raise ValueError("value must lie in [0, 1)")
        return cls.from_int(int(value * 3**depth), depth)

    def value(self) -> Fraction:
        return Fraction(self.to_int(), 3**self.depth)

    def __float__(self) -> float:
        return self.to_int() / 3.0**self.depth

    def __str__(self) -> str:
        return "0." + "".join(str(d) for d in self.digits) + " (base 3)"


def is_exceptional(f: TernaryFraction) -> bool:
    """True iff no digit equals 1, i.e. the point lies on the depth-limited Cantor set."""
    return 1 not in f.digits


def random_exceptional(depth: int, rng: np.random.Generator) -> TernaryFraction:
    """Digits drawn iid uniform over {0, 2}."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    return TernaryFraction(tuple(2 * rng.integers(0, 2, size=depth)))


def random_normal(depth: int, rng: np.random.Generator) -> TernaryFraction:
    """Digits drawn iid uniform over {0, 1, 2}."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    return TernaryFraction(tuple(rng.integers(0, 3, size=depth)))


def add_mod1(f: TernaryFraction, g: TernaryFraction) -> TernaryFraction:
    """Digit-wise base-3 addition, carries propagated from the last digit.

    The final carry out of the leading digit is discarded (mod 1); the
    result keeps the common depth exactly.
    """
    if f.depth != g.depth:
        raise ValueError("depth mismatch")
    out = [0] * f.depth
    carry = 0
    for i in range(f.depth - 1, -1, -1):
        total = f.digits[i] + g.digits[i] + carry
        out[i] = total % 3
        carry = total // 3
    return TernaryFraction(tuple(out))


def multiply_mod1(f: TernaryFraction, g: TernaryFraction) -> TernaryFraction:
    """Exact integer product, re-expanded in base 3 and truncated to depth."""
    if f.depth != g.depth:
        raise ValueError("depth mismatch")
    depth = f.depth
    # value = (nf * ng) / 3**(2*depth); keep the leading `depth` digits
    n = (f.to_int() * g.to_int()) % 3 ** (2 * depth)
    return TernaryFraction.from_int(n // 3**depth, depth)


@dataclass(frozen=True)
class CounterfactualResult:
    """Outcome of a line-through-the-origin intersection experiment."""

    depth: int
    n_gradients: int
    n_points: int
    intersection_fraction: float
    empty_set_rate: float
    seed: int
    gradient_hits: np.ndarray = field(repr=False, compare=False)

    def to_record(self) -> dict:
        return {
            "depth": self.depth,
            "n_gradients": self.n_gradients,
            "n_points": self.n_points,
            "intersection_fraction": self.intersection_fraction,
            "empty_set_rate": self.empty_set_rate,
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# vectorized digit helpers
# ---------------------------------------------------------------------------


def _digits_to_ints(digits: np.ndarray) -> np.ndarray:
    """Collapse (..., depth) digit arrays to integer numerators."""
    depth = digits.shape[-1]
    powers = 3 ** np.arange(depth - 1, -1, -1, dtype=np.int64)
    return digits.astype(np.int64) @ powers


def _any_digit_one(ints: np.ndarray, depth: int) -> np.ndarray:
    """Element-wise: does the depth-digit expansion of each int contain a 1."""
    has_one = np.zeros(ints.shape, dtype=bool)
    for i in range(depth):
        has_one |= (ints // 3 ** (depth - 1 - i)) % 3 == 1
    return has_one


def perturbation_experiment(depth: int, n_trials: int, seed: int) -> float:
    """Fraction of exceptional + normal sums that stay exceptional.

    Each trial adds a random Cantor point and a random generic perturbation
    mod 1 at the working depth; the returned fraction is the survival rate,
    which shrinks with depth (roughly like (2/3)**depth).
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    rng = np.random.default_rng(seed)
    exc = 2 * rng.integers(0, 2, size=(n_trials, depth), dtype=np.int8)
    nor = rng.integers(0, 3, size=(n_trials, depth), dtype=np.int8)
    out = np.empty((n_trials, depth), dtype=np.int8)
    carry = np.zeros(n_trials, dtype=np.int8)
    for i in range(depth - 1, -1, -1):
        total = exc[:, i] + nor[:, i] + carry
        out[:, i] = total % 3
        carry = total // 3
    survived = ~np.any(out == 1, axis=1)
    return float(survived.mean())


def _sample_exceptional_ints(rng, depth: int, shape) -> np.ndarray:
    """Non-zero exceptional numerators (digits in {0,2}, not all zero)."""
    digits = 2 * rng.integers(0, 2, size=shape + (depth,), dtype=np.int8)
    ints = _digits_to_ints(digits)
    # the origin lies on the product Cantor set by definition; exclude it
    for _ in range(64):
        zero = ints == 0
        if not zero.any():
            break
        redraw = 2 * rng.integers(0, 2, size=(int(zero.sum()), depth), dtype=np.int8)
        ints[zero] = _digits_to_ints(redraw)
    else:
        raise RuntimeError("failed to draw non-zero exceptional fractions")
    return ints


def line_intersection_experiment(
    depth: int, n_gradients: int, n_points: int, seed: int
) -> CounterfactualResult:
    """Random-gradient lines through the origin probed against the Cantor square.

    For each normal gradient k, sample non-zero Cantor abscissas x and ask
    whether y = k*x (mod 1, truncated) is itself free of the digit 1.  A
    hit is a candidate intersection with the product set; generic gradients
    hit almost never, so most per-gradient counterfactual sets come out
    empty.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if n_gradients < 1 or n_points < 1:
        raise ValueError("n_gradients and n_points must be at least 1")
    if depth > _INT64_SAFE_DEPTH:
        raise ValueError(f"depth above {_INT64_SAFE_DEPTH} is not supported")
    rng = np.random.default_rng(seed)
    k_ints = _digits_to_ints(rng.integers(0, 3, size=(n_gradients, depth), dtype=np.int8))
    x_ints = _sample_exceptional_ints(rng, depth, (n_gradients, n_points))
    mod = np.int64(3) ** (2 * depth)
    y_lead = (k_ints[:, None] * x_ints) % mod // np.int64(3) ** depth
    hit = ~_any_digit_one(y_lead, depth)
    hits_per_gradient = hit.sum(axis=1)
    return CounterfactualResult(
        depth=depth,
        n_gradients=n_gradients,
        n_points=n_points,
        intersection_fraction=float(hit.mean()),
        empty_set_rate=float((hits_per_gradient == 0).mean()),
        seed=int(seed),
        gradient_hits=hits_per_gradient,
    )


def axis_direction_counterexample(
    depth: int, n_points: int, seed: int
) -> CounterfactualResult:
    """Degenerate direction along the x-axis: every probe intersects.

    The ordinate is identically zero, which is exceptional, so the
    intersection fraction is exactly 1; non-generic directions do meet the
    product set.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    rng = np.random.default_rng(seed)
    x_ints = _sample_exceptional_ints(rng, depth, (1, n_points))
    zero = TernaryFraction.from_int(0, depth)
    hits = sum(
        1
        for xi in x_ints[0]
        if is_exceptional(multiply_mod1(zero, TernaryFraction.from_int(int(xi), depth)))
    )
    hits_per_gradient = np.array([hits])
    return CounterfactualResult(
        depth=depth,
        n_gradients=1,
        n_points=n_points,
        intersection_fraction=hits / n_points,
        empty_set_rate=float((hits_per_gradient == 0).mean()),
        seed=int(seed),
        gradient_hits=hits_per_gradient,
    )


def cantor_endpoints(depth: int) -> np.ndarray:
    """All 2**depth values with digits in {0, 2}, ascending.

    The standard finite approximation of the middle-third Cantor set; used
    as a benchmark cloud of known dimension ln2/ln3.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    vals = np.array([0.0])
    for i in range(1, depth + 1):
        vals = np.concatenate([vals, vals + 2.0 * 3.0 ** (-i)])
    return np.sort(vals)


def write_gradient_csv(result: CounterfactualResult, path) -> None:
    """Per-gradient hit counts for a counterfactual experiment."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gradient", "hits", "n_points"])
        for i, h in enumerate(result.gradient_hits):
            writer.writerow([i, int(h), result.n_points])
