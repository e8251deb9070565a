"""Bit-packed n-qubit Pauli operators and sparse real linear combinations.

A Pauli string is stored as two integer bit masks (``x``, ``z``), one bit per
qubit, so weight and commutation checks reduce to popcounts.  No phase is
stored on the string itself: products return a separate power of ``i`` and
callers fold the resulting sign into real coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

CODE_CHARS = "IXYZ"
_CHAR_TO_CODE = {c: i for i, c in enumerate(CODE_CHARS)}

# site code <-> (x bit, z bit): I=(0,0), X=(1,0), Y=(1,1), Z=(0,1)
CODE_TO_BITS = ((0, 0), (1, 0), (1, 1), (0, 1))
BITS_TO_CODE = (0, 1, 3, 2)  # indexed by x_bit + 2*z_bit


class QubitCountMismatch(ValueError):
    """Operands act on different numbers of qubits."""


@dataclass(frozen=True)
class PauliString:
    """One n-qubit Pauli operator.

    ``x`` and ``z`` are bit masks over qubit indices; site q is I when
    both bits q are clear, X for x-only, Z for z-only, Y when both are
    set.  Two strings are equal iff their masks are equal, so instances
    are usable as dictionary keys.  ``weight`` is the number of
    non-identity sites, cached at construction.
    """

    n: int
    x: int
    z: int
    weight: int = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.n <= 0:
            raise ValueError("qubit count must be positive")
        mask = (1 << self.n) - 1
        if self.x & ~mask or self.z & ~mask:
            raise ValueError("bit mask addresses a qubit outside 0..n-1")
        object.__setattr__(self, "weight", (self.x | self.z).bit_count())

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, 0, 0)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse a string over I/X/Y/Z; the leftmost character is qubit 0."""
        x = z = 0
        for q, ch in enumerate(label):
            try:
                code = _CHAR_TO_CODE[ch.upper()]
            except KeyError:
                raise ValueError(f"invalid Pauli letter {ch!r}") from None
            xb, zb = CODE_TO_BITS[code]
            x |= xb << q
            z |= zb << q
        return cls(len(label), x, z)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PauliString":
        """A weight-<=1 string with ``letter`` on ``qubit``, identity elsewhere."""
        if not 0 <= qubit < n:
            raise ValueError("qubit index out of range")
        code = _CHAR_TO_CODE[letter.upper()]
        xb, zb = CODE_TO_BITS[code]
        return cls(n, xb << qubit, zb << qubit)

    @classmethod
    def from_codes(cls, codes: Iterable[int]) -> "PauliString":
        x = z = 0
        count = 0
        for q, code in enumerate(codes):
            xb, zb = CODE_TO_BITS[code]
            x |= xb << q
            z |= zb << q
            count += 1
        return cls(count, x, z)

    def code(self, qubit: int) -> int:
        """Site code at ``qubit``: 0=I, 1=X, 2=Y, 3=Z."""
        return BITS_TO_CODE[((self.x >> qubit) & 1) + 2 * ((self.z >> qubit) & 1)]

    def codes(self) -> tuple[int, ...]:
        return tuple(self.code(q) for q in range(self.n))

    def label(self) -> str:
        return "".join(CODE_CHARS[self.code(q)] for q in range(self.n))

    def support(self) -> tuple[int, ...]:
        mask = self.x | self.z
        return tuple(q for q in range(self.n) if (mask >> q) & 1)

    @property
    def xy_count(self) -> int:
        """Number of sites carrying an X or Y (sites with the x bit set)."""
        return self.x.bit_count()

    @property
    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"PauliString({self.label()!r})"


def weight(p: PauliString) -> int:
    """Number of non-identity sites of ``p``."""
    return p.weight


def _require_same_n(p: PauliString, q: PauliString) -> None:
    if p.n != q.n:
        raise QubitCountMismatch(f"{p.n} qubits vs {q.n} qubits")


def multiply(p: PauliString, q: PauliString) -> tuple[PauliString, int]:
    """Product of two Pauli strings.

    Returns ``(r, m)`` with ``p @ q == i**m * r`` and ``r`` canonical
    (phase-free).  Each site contributes via Y = i X Z bookkeeping; the
    total exponent is reduced mod 4.
    """
    _require_same_n(p, q)
    x3 = p.x ^ q.x
    z3 = p.z ^ q.z
    m = (
        (p.x & p.z).bit_count()
        + (q.x & q.z).bit_count()
        - (x3 & z3).bit_count()
        + 2 * (p.z & q.x).bit_count()
    ) % 4
    return PauliString(p.n, x3, z3), m


def commutes(p: PauliString, q: PauliString) -> bool:
    """True iff the symplectic inner product of ``p`` and ``q`` vanishes mod 2."""
    _require_same_n(p, q)
    return ((p.x & q.z).bit_count() + (p.z & q.x).bit_count()) % 2 == 0


class PauliSum:
    """Sparse real linear combination of Pauli strings.

    Zero coefficients are never stored; construction merges duplicate
    keys.  Instances are immutable once built and safe to share.
    """

    __slots__ = ("n", "_terms")

    def __init__(
        self,
        n: int,
        terms: Mapping[PauliString, float] | Iterable[tuple[PauliString, float]] = (),
    ) -> None:
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[PauliString, float] = {}
        for p, c in items:
            if p.n != n:
                raise QubitCountMismatch(f"term on {p.n} qubits in a {n}-qubit sum")
            acc[p] = acc.get(p, 0.0) + float(c)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "_terms", {p: c for p, c in acc.items() if c != 0.0})

    def __setattr__(self, name, value):  # immutability guard
        raise AttributeError("PauliSum is immutable")

    @classmethod
    def from_strings(cls, pairs: Iterable[tuple[str, float]]) -> "PauliSum":
        pairs = list(pairs)
        if not pairs:
            raise ValueError("cannot infer qubit count from an empty term list")
        n = len(pairs[0][0])
        return cls(n, [(PauliString.from_label(lbl), c) for lbl, c in pairs])

    @classmethod
    def single(cls, label: str, coeff: float = 1.0) -> "PauliSum":
        return cls.from_strings([(label, coeff)])

    @property
    def terms(self) -> Mapping[PauliString, float]:
        return MappingProxyType(self._terms)

    def items(self) -> Iterator[tuple[PauliString, float]]:
        return iter(self._terms.items())

    def coeff(self, p: PauliString) -> float:
        return self._terms.get(p, 0.0)

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def frobenius_norm_sq(self) -> float:
        """Squared normalized Frobenius norm: the sum of squared coefficients."""
        return math.fsum(c * c for c in self._terms.values())

    def to_json_obj(self) -> list[dict]:
        return [
            {"pauli": p.label(), "coeff": c}
            for p, c in sorted(self._terms.items(), key=lambda kv: kv[0].label())
        ]

    @classmethod
    def from_json_obj(cls, obj: list[dict]) -> "PauliSum":
        return cls.from_strings([(d["pauli"], float(d["coeff"])) for d in obj])

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        body = " + ".join(f"{c:g}*{p.label()}" for p, c in self._terms.items())
        return f"PauliSum({body or '0'})"


def frobenius_norm_sq(o: PauliSum) -> float:
    return o.frobenius_norm_sq()


@dataclass(frozen=True)
class ProductState:
    """Product state given by one Bloch vector (r_x, r_y, r_z) per qubit.

    Tr[P rho] factorizes over sites: identity sites contribute 1 and a
    site carrying X/Y/Z contributes the matching Bloch component.
    """

    bloch: tuple[tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        if not self.bloch:
            raise ValueError("state needs at least one qubit")
        for r in self.bloch:
            if len(r) != 3:
                raise ValueError("each Bloch vector needs three components")
            if r[0] * r[0] + r[1] * r[1] + r[2] * r[2] > 1.0 + 1e-9:
                raise ValueError(f"Bloch vector {r} lies outside the unit ball")

    @property
    def n(self) -> int:
        return len(self.bloch)

    @classmethod
    def zeros(cls, n: int) -> "ProductState":
        """The all-|0> computational state: Bloch vector (0, 0, 1) on every qubit."""
        return cls(((0.0, 0.0, 1.0),) * n)

    @classmethod
    def from_vectors(cls, vectors: Iterable[Iterable[float]]) -> "ProductState":
        return cls(tuple(tuple(float(v) for v in r) for r in vectors))

    def factor(self, qubit: int, code: int) -> float:
        """Single-site expectation of the Pauli with site ``code`` (0=I..3=Z)."""
        if code == 0:
            return 1.0
        return self.bloch[qubit][code - 1]


def expectation_product_state(o: PauliSum, state: ProductState) -> float:
    """Exact Tr[O rho] for a Pauli sum against a product state."""
    if o.n != state.n:
        raise QubitCountMismatch(f"observable on {o.n} qubits, state on {state.n}")
    total = 0.0
    for p, c in o.items():
        f = c
        mask = p.x | p.z
        q = 0
        while mask:
            if mask & 1:
                f *= state.factor(q, p.code(q))
                if f == 0.0:
                    break
            mask >>= 1
            q += 1
        total += f
    return total
