#!/usr/bin/env python3
"""Cyclic subgroups of U(m) acting on C^m, with age and terminality tests.

Usage:
    alekahler-quotient <m> <k> <a_1> ... <a_m>

The generator acts by z_j -> exp(2 pi i a_j / k) z_j. Prints a one-line
summary and returns exit code 0 if the quotient C^m/G is terminal, 1 otherwise
(including invalid input).
"""

from __future__ import annotations

import itertools
import math
import sys
from collections.abc import Iterator
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce


class QuotientError(ValueError):
    """Raised for invalid group data or out-of-range queries."""


@dataclass(frozen=True)
class CyclicQuotient:
    """A cyclic group G = <gamma> in U(m) in reduced form.

    Attributes:
        m: Complex dimension.
        k: Order of gamma (and of G).
        exponents: a_1..a_m in [0, k-1].
    """

    m: int
    k: int
    exponents: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.m < 2:
            raise QuotientError(f"complex dimension must be at least 2, got {self.m}")
        if self.k < 1:
            raise QuotientError(f"group order must be positive, got {self.k}")
        if len(self.exponents) != self.m:
            raise QuotientError(
                f"expected {self.m} exponents, got {len(self.exponents)}"
            )
        if any(not 0 <= a < self.k for a in self.exponents):
            raise QuotientError(f"exponents must lie in [0, {self.k - 1}]")
        if reduce(math.gcd, self.exponents, self.k) != 1:
            raise QuotientError(
                "representation is not reduced; use CyclicQuotient.reduced()"
            )

    @classmethod
    def reduced(cls, m: int, k: int, exponents) -> CyclicQuotient:
        """Build a quotient, reducing exponents mod k and k to the true order."""
        if k < 1:
            raise QuotientError(f"group order must be positive, got {k}")
        exps = [int(a) % k for a in exponents]
        g = reduce(math.gcd, exps, k)
        return cls(m=m, k=k // g, exponents=tuple(a // g for a in exps))

    @classmethod
    def from_dict(cls, data: dict) -> CyclicQuotient:
        """Parse {"m": int, "k": int, "exponents": [int]} as used in job configs."""
        try:
            return cls.reduced(int(data["m"]), int(data["k"]), data["exponents"])
        except KeyError as e:
            raise QuotientError(f"missing quotient field: {e.args[0]}") from e

    def to_dict(self) -> dict:
        return {"m": self.m, "k": self.k, "exponents": list(self.exponents)}

    @property
    def order(self) -> int:
        return self.k


def acts_freely(q: CyclicQuotient) -> bool:
    """True iff no nontrivial power of gamma fixes a nonzero vector."""
    return all(math.gcd(a, q.k) == 1 for a in q.exponents)


def in_special_unitary(q: CyclicQuotient) -> bool:
    """True iff det(gamma) = 1."""
    return sum(q.exponents) % q.k == 0


def age(q: CyclicQuotient, power: int) -> Fraction:
    """Age of gamma^power, the sum of the fractional eigenvalue exponents.

    Args:
        q: A freely acting quotient.
        power: Exponent l with 1 <= l < k.

    Returns:
        sum_j ((l * a_j) mod k) / k as an exact rational.
    """
    if power % q.k == 0:
        raise QuotientError("identity element has no age in this test")
    if not 1 <= power < q.k:
        raise QuotientError(f"power must lie in [1, {q.k - 1}], got {power}")
    return Fraction(sum((power * a) % q.k for a in q.exponents), q.k)


def is_terminal(q: CyclicQuotient) -> bool:
    """Reid's criterion: every nontrivial element has age > 1."""
    if not (acts_freely(q) and in_special_unitary(q)):
        raise QuotientError("criterion applies to free SU actions")
    # the trivial group has no nontrivial elements
    return all(age(q, power) > 1 for power in range(1, q.k))


def minimum_age(q: CyclicQuotient) -> Fraction | None:
    """Smallest age over nontrivial powers, None for the trivial group."""
    if q.k == 1:
        return None
    return min(age(q, power) for power in range(1, q.k))


def satisfies_symplectic_pairing(q: CyclicQuotient) -> bool:
    """True iff the exponents split into pairs each summing to 0 mod k.

    This is the exponent form of gamma preserving
    dz^1 ^ dz^2 + ... + dz^{m-1} ^ dz^m in suitable coordinates.
    """
    if q.m % 2:
        raise QuotientError("symplectic pairing needs even complex dimension")
    if not acts_freely(q):
        raise QuotientError("symplectic pairing test expects a free action")
    return _has_perfect_pairing(list(q.exponents), q.k)


def _has_perfect_pairing(remaining: list[int], k: int) -> bool:
    if not remaining:
        return True
    first, rest = remaining[0], remaining[1:]
    tried: set[int] = set()
    for i, a in enumerate(rest):
        if a in tried or (first + a) % k:
            continue
        tried.add(a)
        if _has_perfect_pairing(rest[:i] + rest[i + 1:], k):
            return True
    return False


def symplectic_family(m: int, k: int) -> Iterator[CyclicQuotient]:
    """Every free SU action of order k whose exponents pair up as (b, k - b).

    Exponent multisets are yielded once each, sorted.
    """
    if m % 2:
        raise QuotientError("symplectic pairing needs even complex dimension")
    if k < 2:
        raise QuotientError(f"group order must be at least 2, got {k}")
    units = [b for b in range(1, k) if math.gcd(b, k) == 1]
    seen: set[tuple[int, ...]] = set()
    for combo in itertools.combinations_with_replacement(units, m // 2):
        exponents = tuple(sorted(itertools.chain.from_iterable((b, k - b) for b in combo)))
        if exponents not in seen:
            seen.add(exponents)
            yield CyclicQuotient(m, k, exponents)


def summarize(q: CyclicQuotient) -> dict:
    """All group-theoretic checks for one quotient, JSON-ready."""
    free = acts_freely(q)
    special = in_special_unitary(q)
    summary: dict = {
        "quotient": q.to_dict(),
        "acts_freely": free,
        "in_special_unitary": special,
    }
    if free:
        ages = [str(age(q, power)) for power in range(1, q.k)]
        summary["ages"] = ages
        if q.m % 2 == 0:
            summary["symplectic_pairing"] = satisfies_symplectic_pairing(q)
    if free and special:
        summary["terminal"] = is_terminal(q)
        low = minimum_age(q)
        summary["minimum_age"] = None if low is None else str(low)
    return summary


def main() -> int:
    """CLI entry point."""
    if len(sys.argv) < 4:
        print("Usage: alekahler-quotient <m> <k> <a_1> ... <a_m>", file=sys.stderr)
        print("Returns 0 if C^m/G is terminal, 1 otherwise", file=sys.stderr)
        return 1

    try:
        m, k, *exponents = (int(arg) for arg in sys.argv[1:])
        q = CyclicQuotient.reduced(m, k, exponents)
        summary = summarize(q)
    except (ValueError, QuotientError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1

    if "terminal" not in summary:
        print("Error: terminality needs a free action inside SU(m)", file=sys.stderr)
        return 1

    verdict = "terminal" if summary["terminal"] else "not terminal"
    print(f"{verdict} (k={q.k}, exponents={list(q.exponents)}, "
          f"minimum age={summary['minimum_age']})")
    return 0 if summary["terminal"] else 1


if __name__ == "__main__":
    sys.exit(main())
