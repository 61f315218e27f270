"""Finite abelian groups in invariant-factor form, elements, characters,
and exact torus arithmetic.

The group Z/q1 + ... + Z/qd (q1 | q2 | ... | qd) carries elements as reduced
coordinate tuples.  Characters are coordinate tuples of the isomorphic dual
group; evaluation is the exact rational sum |chi_i * x_i|_{q_i} / q_i mod 1.

Two-tier numerics: everything here is exact (integers and reduced
fractions); complex exponentials appear only at the boundary via
``TorusValue.exp()``.
"""

from __future__ import annotations

import cmath
import math
from fractions import Fraction
from functools import reduce
from typing import Iterable, Iterator, Sequence

from .config import DEFAULT_ENUMERATION_CAP
from .errors import BudgetError, CertificateError, InputError, PreconditionError


class TorusValue:
    """Exact element of R/Z stored as a reduced fraction in [0, 1)."""

    __slots__ = ("_frac",)

    def __init__(self, value):
        if isinstance(value, TorusValue):
            self._frac = value._frac
            return
        frac = Fraction(value)
        self._frac = frac - (frac.numerator // frac.denominator)

    @property
    def numerator(self) -> int:
        return self._frac.numerator

    @property
    def denominator(self) -> int:
        return self._frac.denominator

    def as_fraction(self) -> Fraction:
        return self._frac

    def __add__(self, other) -> "TorusValue":
        other = other._frac if isinstance(other, TorusValue) else Fraction(other)
        return TorusValue(self._frac + other)

    __radd__ = __add__

    def __sub__(self, other) -> "TorusValue":
        other = other._frac if isinstance(other, TorusValue) else Fraction(other)
        return TorusValue(self._frac - other)

    def __rsub__(self, other) -> "TorusValue":
        return TorusValue(Fraction(other) - self._frac)

    def __neg__(self) -> "TorusValue":
        return TorusValue(-self._frac)

    def __mul__(self, k: int) -> "TorusValue":
        if not isinstance(k, int):
            raise TypeError("torus values only admit integer scalars")
        return TorusValue(self._frac * k)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if isinstance(other, TorusValue):
            return self._frac == other._frac
        try:
            return self == TorusValue(other)
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self) -> int:
        return hash(("TorusValue", self._frac))

    def __repr__(self) -> str:
        return f"TorusValue({self._frac})"

    def __str__(self) -> str:
        return str(self._frac)

    def norm(self) -> Fraction:
        """Distance to 0 in the torus metric, an exact rational in [0, 1/2]."""
        return min(self._frac, 1 - self._frac)

    def exp(self) -> complex:
        """e(t) = exp(2 pi i t) in double precision."""
        return cmath.exp(2j * math.pi * float(self._frac))

    def __float__(self) -> float:
        return float(self._frac)


TORUS_ZERO = TorusValue(0)


def torus_norm(t) -> Fraction:
    """min(t, 1 - t) for t in R/Z, as an exact rational in [0, 1/2]."""
    return TorusValue(t).norm()


def exp_phase(t) -> complex:
    """e(t) = exp(2 pi i t)."""
    return TorusValue(t).exp()


class FinAbGroup:
    """Z/q1 + ... + Z/qd with q1 | q2 | ... | qd; immutable value object."""

    __slots__ = ("invariant_factors", "order", "_strides")

    def __init__(self, invariant_factors: Sequence[int]):
        factors = tuple(int(q) for q in invariant_factors)
        for q in factors:
            if q < 1:
                raise InputError(f"invariant factor {q} is not positive")
        for a, b in zip(factors, factors[1:]):
            if b % a != 0:
                raise InputError(
                    f"invariant factors {factors} violate the divisibility chain"
                )
        object.__setattr__(self, "invariant_factors", factors)
        order = 1
        for q in factors:
            order *= q
        object.__setattr__(self, "order", order)
        # mixed-radix strides for index <-> coords conversion
        strides = []
        acc = 1
        for q in reversed(factors):
            strides.append(acc)
            acc *= q
        object.__setattr__(self, "_strides", tuple(reversed(strides)))

    def __setattr__(self, *args):
        raise AttributeError("FinAbGroup is immutable")

    @classmethod
    def from_presentation(cls, relations: Sequence[Sequence[int]], ngens: int) -> "FinAbGroup":
        """Group generated by ``ngens`` symbols modulo integer relation rows.

        Reduces the relation matrix to Smith normal form and keeps the
        nontrivial invariant factors.  A zero relation matrix would present a
        free group, which is rejected.
        """
        from .lattice import IntMatrix, smith_normal_form

        rows = [list(map(int, row)) for row in relations]
        if any(len(row) != ngens for row in rows):
            raise InputError("relation rows must have one entry per generator")
        if not rows:
            rows = [[0] * ngens]
        _, diag, _ = smith_normal_form(IntMatrix(rows))
        diags = [diag.entries[i][i] for i in range(min(len(rows), ngens))]
        diags += [0] * (ngens - len(diags))
        if any(d == 0 for d in diags):
            raise InputError("presentation has a free part; group is infinite")
        factors = sorted(abs(d) for d in diags if abs(d) > 1)
        return cls(factors)

    @property
    def rank(self) -> int:
        return len(self.invariant_factors)

    @property
    def exponent(self) -> int:
        return self.invariant_factors[-1] if self.invariant_factors else 1

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FinAbGroup)
            and self.invariant_factors == other.invariant_factors
        )

    def __hash__(self) -> int:
        return hash(("FinAbGroup", self.invariant_factors))

    def __repr__(self) -> str:
        inner = " + ".join(f"Z/{q}" for q in self.invariant_factors) or "0"
        return f"FinAbGroup({inner})"

    # -- element plumbing ---------------------------------------------------

    def zero(self) -> "GroupElement":
        return GroupElement(self, (0,) * self.rank)

    def element(self, coords: Sequence[int]) -> "GroupElement":
        return GroupElement(self, coords)

    def character(self, coords: Sequence[int]) -> "Character":
        return Character(self, coords)

    def reduce_coords(self, coords: Sequence[int]) -> tuple:
        if len(coords) != self.rank:
            raise InputError(
                f"coordinate length {len(coords)} does not match rank {self.rank}"
            )
        return tuple(int(c) % q for c, q in zip(coords, self.invariant_factors))

    def index_of(self, coords: Sequence[int]) -> int:
        coords = self.reduce_coords(coords)
        return sum(c * s for c, s in zip(coords, self._strides))

    def coords_of(self, index: int) -> tuple:
        if not 0 <= index < self.order:
            raise InputError(f"index {index} out of range for order {self.order}")
        out = []
        for q, s in zip(self.invariant_factors, self._strides):
            out.append((index // s) % q)
        return tuple(out)

    def add(self, a: Sequence[int], b: Sequence[int]) -> tuple:
        return tuple(
            (x + y) % q for x, y, q in zip(a, b, self.invariant_factors)
        )

    def sub(self, a: Sequence[int], b: Sequence[int]) -> tuple:
        return tuple(
            (x - y) % q for x, y, q in zip(a, b, self.invariant_factors)
        )

    def neg(self, a: Sequence[int]) -> tuple:
        return tuple((-x) % q for x, q in zip(a, self.invariant_factors))

    def scale(self, k: int, a: Sequence[int]) -> tuple:
        return tuple((k * x) % q for x, q in zip(a, self.invariant_factors))

    def enumerate(self, cap: int = DEFAULT_ENUMERATION_CAP) -> Iterator["GroupElement"]:
        """All elements in lexicographic coordinate order, each exactly once."""
        if self.order > cap:
            raise BudgetError(
                f"group order {self.order} exceeds enumeration cap {cap}"
            )
        for idx in range(self.order):
            yield GroupElement(self, self.coords_of(idx))

    def characters(self, cap: int = DEFAULT_ENUMERATION_CAP) -> Iterator["Character"]:
        if self.order > cap:
            raise BudgetError(
                f"dual order {self.order} exceeds enumeration cap {cap}"
            )
        for idx in range(self.order):
            yield Character(self, self.coords_of(idx))

    def element_order(self, coords: Sequence[int]) -> int:
        coords = self.reduce_coords(coords)
        return reduce(
            math.lcm,
            (q // math.gcd(q, c) if c else 1 for c, q in zip(coords, self.invariant_factors)),
            1,
        )


class _Vector:
    """Shared coordinate-tuple behaviour of elements and characters."""

    __slots__ = ("group", "coords")

    def __init__(self, group: FinAbGroup, coords: Sequence[int]):
        object.__setattr__(self, "group", group)
        object.__setattr__(self, "coords", group.reduce_coords(coords))

    def __setattr__(self, *args):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def _check_same(self, other):
        if type(other) is not type(self) or other.group != self.group:
            raise InputError(
                f"{type(self).__name__} arithmetic requires matching groups"
            )

    def __add__(self, other):
        self._check_same(other)
        return type(self)(self.group, self.group.add(self.coords, other.coords))

    def __sub__(self, other):
        self._check_same(other)
        return type(self)(self.group, self.group.sub(self.coords, other.coords))

    def __neg__(self):
        return type(self)(self.group, self.group.neg(self.coords))

    def __rmul__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        return type(self)(self.group, self.group.scale(k, self.coords))

    __mul__ = __rmul__

    def __eq__(self, other) -> bool:
        return (
            type(other) is type(self)
            and other.group == self.group
            and other.coords == self.coords
        )

    def __hash__(self) -> int:
        return hash((type(self).__name__, self.group, self.coords))

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coords)

    @property
    def index(self) -> int:
        return self.group.index_of(self.coords)

    def __repr__(self) -> str:
        return f"{type(self).__name__}{self.coords}"


class GroupElement(_Vector):
    """Element of a FinAbGroup as a reduced coordinate tuple."""

    def order(self) -> int:
        return self.group.element_order(self.coords)


class Character(_Vector):
    """Character chi(x) = sum_i |chi_i x_i|_{q_i} / q_i mod 1."""

    def __call__(self, x: GroupElement) -> TorusValue:
        return char_eval(self, x)

    def order(self) -> int:
        return self.group.element_order(self.coords)

    def eval_coords(self, coords: Sequence[int]) -> TorusValue:
        total = Fraction(0)
        for c, x, q in zip(self.coords, coords, self.group.invariant_factors):
            total += Fraction((c * x) % q, q)
        return TorusValue(total)


def char_eval(chi: Character, x: GroupElement) -> TorusValue:
    """Exact rational value of chi at x."""
    if not isinstance(chi, Character) or not isinstance(x, GroupElement):
        raise InputError("char_eval expects (Character, GroupElement)")
    if chi.group != x.group:
        raise InputError("character and element belong to different groups")
    return chi.eval_coords(x.coords)


# -- subgroups ----------------------------------------------------------------


def subgroup_closure(
    gens: Iterable[GroupElement], cap: int = DEFAULT_ENUMERATION_CAP
) -> list:
    """All elements of the subgroup generated by ``gens``, sorted by index.

    Plain BFS closure; fine at desk scale.
    """
    gens = list(gens)
    if not gens:
        raise InputError("subgroup_closure needs at least one generator (use zero)")
    group = gens[0].group
    for g in gens:
        if g.group != group:
            raise InputError("generators belong to different groups")
    seen = {(0,) * group.rank}
    frontier = [(0,) * group.rank]
    gen_coords = [g.coords for g in gens]
    while frontier:
        new = []
        for base in frontier:
            for g in gen_coords:
                cand = group.add(base, g)
                if cand not in seen:
                    seen.add(cand)
                    new.append(cand)
                    if len(seen) > cap:
                        raise BudgetError("subgroup closure exceeded cap")
        frontier = new
    return [GroupElement(group, c) for c in sorted(seen, key=group.index_of)]


def subgroup_dual(
    group: FinAbGroup, subgroup_elements: Sequence[GroupElement]
) -> list:
    """All homomorphisms H -> T as value tables, via restriction from G.

    Every character of a subgroup extends to the full group, so restricting
    all of Ghat and de-duplicating yields exactly Hhat (|H| distinct tables).
    Each table maps element coords to TorusValue.
    """
    coords_list = [h.coords for h in subgroup_elements]
    seen = {}
    for chi in group.characters():
        table = tuple(chi.eval_coords(c) for c in coords_list)
        if table not in seen:
            seen[table] = {c: v for c, v in zip(coords_list, table)}
    if len(seen) != len(subgroup_elements):
        raise CertificateError(  # pragma: no cover - dual counting identity
            "subgroup dual has wrong size; subgroup set is inconsistent"
        )
    return list(seen.values())


def is_homomorphism_table(
    group: FinAbGroup, table: dict, elements: Sequence[GroupElement]
) -> bool:
    """Exhaustively check chi(x+y) = chi(x) + chi(y) on a subgroup table."""
    coords = [e.coords for e in elements]
    for a in coords:
        for b in coords:
            s = group.add(a, b)
            if table[s] != table[a] + table[b]:
                return False
    return True


def char_extend(
    H_gens: Sequence[GroupElement],
    chi_on_H: dict,
    G: FinAbGroup,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> Character:
    """Extend a homomorphism on a subgroup to a character of the full group.

    ``chi_on_H`` maps coordinate tuples of H = <H_gens> to TorusValue.  The
    construction adjoins one generator at a time: if x has order k over the
    current domain H', the extension assigns chi'(x) = chi(kx)/k and
    chi'(l x + h) = l chi'(x) + chi(h).

    Raises PreconditionError when the table is not a homomorphism on H.
    """
    H_elements = subgroup_closure(H_gens, cap=cap) if H_gens else [G.zero()]
    table = dict(chi_on_H)
    zero_coords = (0,) * G.rank
    if zero_coords not in table:
        table[zero_coords] = TORUS_ZERO
    for h in H_elements:
        if h.coords not in table:
            raise PreconditionError(f"table misses subgroup element {h.coords}")
    if not is_homomorphism_table(G, table, H_elements):
        raise PreconditionError("chi_on_H is not a homomorphism on <H_gens>")

    domain = {h.coords for h in H_elements}
    values = {c: TorusValue(table[c]) for c in domain}

    for idx in range(G.order):
        x = G.coords_of(idx)
        if x in domain:
            continue
        # k = least positive multiple of x landing in the current domain
        k = 1
        acc = x
        while acc not in domain:
            acc = G.add(acc, x)
            k += 1
        t = TorusValue(values[acc].as_fraction() / k)
        # adjoin <x>: new domain = { l*x + h }
        new_values = {}
        mult = zero_coords
        for ell in range(k):
            if ell:
                mult = G.add(mult, x)
            for h in list(domain):
                c = G.add(mult, h)
                if c not in domain:
                    new_values[c] = ell * t + values[h]
        values.update(new_values)
        domain.update(new_values)
        if len(domain) > cap:
            raise BudgetError("char_extend exceeded enumeration cap")
        if len(domain) == G.order:
            break

    # identify the table with an explicit dual element
    q_last = G.invariant_factors[-1] if G.rank else 1
    chi_coords = []
    for j in range(G.rank):
        e_j = tuple(1 if i == j else 0 for i in range(G.rank))
        val = values[e_j].as_fraction()
        q = G.invariant_factors[j]
        num = val * q
        if num.denominator != 1:
            raise CertificateError("extension table is not a character")
        chi_coords.append(int(num) % q)
    chi = Character(G, chi_coords)
    for c, v in values.items():
        if chi.eval_coords(c) != v:
            raise CertificateError("extension does not match its dual element")
    return chi
