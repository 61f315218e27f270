"""Coset progressions: canonical forms, properness certificates, shrinking,
tiling, Freiman-subgroup extraction, and the two-way bridge to Bohr sets.

Enumeration is the cost center, so properness is certified once and cached.
All constructions are verified by enumeration before being returned; the
verification is the contract, the search heuristics are not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Optional, Sequence

from .config import DEFAULT_ENUMERATION_CAP
from .errors import (
    BudgetError,
    CertificateError,
    InputError,
    NoWitness,
    PartialResultError,
    PreconditionError,
)
from .group import FinAbGroup, GroupElement, TorusValue, subgroup_closure
from .bohr import BohrSet


class CosetProgression:
    """base + L_1 v_1 + ... + L_r v_r + H in canonical form.

    ``symmetric`` selects coefficient ranges [-L_i, L_i]; otherwise they are
    one-sided [0, N_i - 1] with lengths = N_i.
    """

    def __init__(
        self,
        group: FinAbGroup,
        base: Sequence[int],
        gens: Sequence[Sequence[int]],
        lengths: Sequence[int],
        subgroup_gens: Sequence[Sequence[int]] = (),
        symmetric: bool = True,
    ):
        self.group = group
        self.base = group.reduce_coords(base)
        self.gens = tuple(group.reduce_coords(g) for g in gens)
        self.lengths = tuple(int(x) for x in lengths)
        if len(self.gens) != len(self.lengths):
            raise InputError("one length per generator required")
        for L in self.lengths:
            if L < 0 or (not symmetric and L < 1):
                raise InputError("invalid progression length")
        self.subgroup_gens = tuple(group.reduce_coords(g) for g in subgroup_gens)
        self.symmetric = bool(symmetric)
        self._H = None
        self._elements = None
        self._proper = None

    @property
    def rank(self) -> int:
        return len(self.gens)

    def coefficient_ranges(self):
        if self.symmetric:
            return [range(-L, L + 1) for L in self.lengths]
        return [range(0, N) for N in self.lengths]

    def H_elements(self) -> list:
        if self._H is None:
            gens = [GroupElement(self.group, g) for g in self.subgroup_gens]
            if not gens:
                gens = [self.group.zero()]
            self._H = [h.coords for h in subgroup_closure(gens)]
        return self._H

    def size_claim(self) -> int:
        total = len(self.H_elements())
        for r in self.coefficient_ranges():
            total *= len(r)
        return total

    def iter_points(self):
        """(coords, lam, h) for every formal combination."""
        H = self.H_elements()
        g = self.group
        for lam in product(*self.coefficient_ranges()):
            shift = self.base
            for coef, gen in zip(lam, self.gens):
                shift = g.add(shift, g.scale(coef, gen))
            for h in H:
                yield g.add(shift, h), lam, h

    def element_set(self) -> set:
        if self._elements is None:
            self._elements = {c for c, _, _ in self.iter_points()}
        return self._elements

    def __contains__(self, coords) -> bool:
        return tuple(coords) in self.element_set()

    def size(self) -> int:
        return len(self.element_set())

    def properness(self, cap: int = DEFAULT_ENUMERATION_CAP):
        """Certificate (True, None) or an explicit colliding pair."""
        if self._proper is None:
            if self.size_claim() > cap:
                raise BudgetError("properness check exceeds enumeration cap")
            seen = {}
            result = (True, None)
            for coords, lam, h in self.iter_points():
                if coords in seen:
                    result = (False, (seen[coords], (lam, h), coords))
                    break
                seen[coords] = (lam, h)
            self._proper = result
        return self._proper

    def is_proper(self) -> bool:
        return self.properness()[0]

    def shrink(self, factor: Fraction) -> "CosetProgression":
        """factor * C: lengths floored; subgroup unchanged (symmetric only)."""
        if not self.symmetric:
            raise PreconditionError("shrinking is defined for symmetric form")
        factor = Fraction(factor)
        if factor < 0:
            raise InputError("shrink factor must be nonnegative")
        lengths = [int(factor * L) for L in self.lengths]  # floor for >= 0
        return CosetProgression(
            self.group, self.base, self.gens, lengths, self.subgroup_gens, True
        )

    def subprogression(self, ells: Sequence[int], new_lengths: Sequence[int]):
        """Same base/subgroup, generators ell_i v_i with the given lengths."""
        gens = [self.group.scale(l, g) for l, g in zip(ells, self.gens)]
        return CosetProgression(
            self.group, self.base, gens, new_lengths, self.subgroup_gens,
            self.symmetric,
        )

    def translate(self, t: Sequence[int]) -> "CosetProgression":
        return CosetProgression(
            self.group,
            self.group.add(self.base, tuple(t)),
            self.gens,
            self.lengths,
            self.subgroup_gens,
            self.symmetric,
        )

    def one_sided_form(self) -> "CosetProgression":
        """Centering change of variables: [-L, L] -> base' + [0, 2L]."""
        if not self.symmetric:
            return self
        g = self.group
        base = self.base
        for L, gen in zip(self.lengths, self.gens):
            base = g.add(base, g.scale(-L, gen))
        return CosetProgression(
            g, base, self.gens, [2 * L + 1 for L in self.lengths],
            self.subgroup_gens, symmetric=False,
        )

    def __repr__(self):
        kind = "sym" if self.symmetric else "one-sided"
        return (
            f"CosetProgression({kind}, rank={self.rank}, lengths={self.lengths},"
            f" |H|={len(self.H_elements())})"
        )


def properness_check(C: CosetProgression, cap: int = DEFAULT_ENUMERATION_CAP):
    return C.properness(cap=cap)


def shrink(C: CosetProgression, factor) -> CosetProgression:
    return C.shrink(Fraction(factor))


# -- tiling -----------------------------------------------------------------


@dataclass
class TilingResult:
    S: CosetProgression
    translates: list        # coordinate tuples
    covered: int            # |S + T|
    total: int              # |C|


def tile(
    C: CosetProgression,
    ells: Sequence[int],
    n_primes: Sequence[int],
    eta: Fraction,
) -> TilingResult:
    """Almost tile C by S = [0, N'_i - 1] (ell_i v_i) + H.

    The step condition (ell_i N'_i <= eta N_i / d, or N'_i = 1) is checked;
    the grid construction is then verified by enumeration:  S + T inside C,
    |S + T| = |S| |T|, and |S + T| >= (1 - eta)|C|.
    """
    if C.symmetric:
        raise PreconditionError("tile expects the one-sided canonical form")
    eta = Fraction(eta)
    d = C.rank
    g = C.group
    ells = [int(x) for x in ells]
    n_primes = [int(x) for x in n_primes]
    for l, npr, N in zip(ells, n_primes, C.lengths):
        if npr != 1 and Fraction(l * npr) > eta * N / d:
            raise PreconditionError("tiling step condition fails")
    S = CosetProgression(
        g,
        (0,) * g.rank,
        [g.scale(l, v) for l, v in zip(ells, C.gens)],
        n_primes,
        C.subgroup_gens,
        symmetric=False,
    )
    I = [i for i in range(d) if n_primes[i] > 1]
    # T0 = base + sum_{i in I} [0, ell_i - 1] v_i
    t_parts = []
    for i in range(d):
        if i in I:
            t_parts.append([g.scale(j, C.gens[i]) for j in range(ells[i])])
        else:
            t_parts.append([(0,) * g.rank])
    grid_parts = []
    for i in range(d):
        if i in I:
            k_i = C.lengths[i] // (ells[i] * n_primes[i])
            grid_parts.append(
                [g.scale(j * ells[i] * n_primes[i], C.gens[i]) for j in range(k_i)]
            )
        else:
            grid_parts.append([g.scale(j, C.gens[i]) for j in range(C.lengths[i])])
    translates = set()
    for t0 in product(*t_parts):
        for t1 in product(*grid_parts):
            acc = C.base
            for part in t0:
                acc = g.add(acc, part)
            for part in t1:
                acc = g.add(acc, part)
            translates.add(acc)
    S_set = S.element_set()
    C_set = C.element_set()
    union = set()
    for t in translates:
        for s in S_set:
            union.add(g.add(t, s))
    if not union <= C_set:
        raise CertificateError("tiling landed outside C")
    if len(union) != len(S_set) * len(translates):
        raise CertificateError("tiling translates collide")
    if len(union) < (1 - eta) * len(C_set):
        raise CertificateError("tiling covers too little of C")
    return TilingResult(S, sorted(translates, key=g.index_of), len(union), len(C_set))


def centered_symmetric_piece(
    C: CosetProgression, X: Sequence, k: int
):
    """Symmetric proper S and translate t with t + kS inside C and t + S
    carrying at least half the average X-density.

    The source statement's density conclusion is stated against |X|, which is
    impossible on cardinality grounds (|S| can be far below |X|/2); what the
    averaging argument yields, and what is asserted here, is
    |(t + S) cap X| >= (alpha / 2) |S| with alpha = |X| / |C|.
    """
    if C.symmetric:
        C = C.one_sided_form()
    X_set = {tuple(x.coords) if isinstance(x, GroupElement) else tuple(x) for x in X}
    C_set = C.element_set()
    if not X_set <= C_set:
        raise PreconditionError("X must be a subset of C")
    alpha = Fraction(len(X_set), len(C_set))
    if alpha == 0:
        raise PreconditionError("X must be nonempty")
    d = C.rank
    g = C.group
    n_primes = []
    for N in C.lengths:
        if N >= 200 * k * d / alpha:
            n_primes.append(math.ceil(alpha * N / (100 * k * d)))
        else:
            n_primes.append(0)
    S = CosetProgression(
        g, (0,) * g.rank, C.gens, n_primes, C.subgroup_gens, symmetric=True
    )
    if not S.is_proper():
        raise CertificateError("shrunk symmetric piece is not proper")
    # C' = base + sum [k N'_i, N_i - 1 - k N'_i] v_i + H
    inner_base = C.base
    inner_lengths = []
    for npr, N, v in zip(n_primes, C.lengths, C.gens):
        inner_base = g.add(inner_base, g.scale(k * npr, v))
        inner_lengths.append(N - 2 * k * npr)
    if any(L < 1 for L in inner_lengths):
        raise PreconditionError("C too small for the requested k and density")
    C_inner = CosetProgression(
        g, inner_base, C.gens, inner_lengths, C.subgroup_gens, symmetric=False
    )
    tiling = tile(
        C_inner,
        [1] * d,
        [2 * npr + 1 if npr > 0 else 1 for npr in n_primes],
        Fraction(alpha, 4),
    )
    S_set = S.element_set()
    threshold = alpha * len(S_set) / 2
    best_t = None
    # scan in deterministic index order; first translate at the threshold wins
    offset = (0,) * g.rank
    for npr, v in zip(n_primes, C.gens):
        offset = g.add(offset, g.scale(npr, v))
    for t in tiling.translates:
        t_shift = g.add(t, offset)  # recenter: one-sided block -> symmetric S
        hits = sum(1 for s in S_set if g.add(t_shift, s) in X_set)
        if hits >= threshold:
            best_t = t_shift
            break
    if best_t is None:
        raise CertificateError("no translate meets the average density")
    # t + kS inside C
    kS = CosetProgression(
        g, (0,) * g.rank, C.gens, [k * npr for npr in n_primes],
        C.subgroup_gens, symmetric=True,
    )
    for s in kS.element_set():
        if g.add(best_t, s) not in C_set:
            raise CertificateError("t + kS escapes C")
    size_bound = Fraction(alpha, 100 * k * d) ** d * len(C_set)
    if len(S_set) < size_bound:
        raise CertificateError("symmetric piece smaller than the stated bound")
    return S, GroupElement(g, best_t)


# -- Freiman subgroups -------------------------------------------------------


def is_freiman_subgroup(A: set, C_set: set, group: FinAbGroup):
    """a, b in A and a - b in C implies a - b in A; witness on failure."""
    for a in A:
        for b in A:
            d = group.sub(a, b)
            if d in C_set and d not in A:
                return False, (a, b, d)
    return True, None


def freiman_subgroup_extract(
    A: Sequence, C: CosetProgression, cap: int = DEFAULT_ENUMERATION_CAP
):
    """Contained sub-progression [-M_i, M_i] (ell_i v_i) + H' of a
    Freiman-subgroup A, with ell_i <= 20/alpha and |H'| >= alpha |H|."""
    if not C.symmetric:
        raise PreconditionError("extraction expects the symmetric form")
    g = C.group
    A_set = {tuple(a.coords) if isinstance(a, GroupElement) else tuple(a) for a in A}
    C_set = C.element_set()
    if not A_set <= C_set:
        raise PreconditionError("A must be a subset of C")
    ok, witness = is_freiman_subgroup(A_set, C_set, g)
    if not ok:
        raise PreconditionError(f"A is not a Freiman-subgroup; witness {witness}")
    alpha = Fraction(len(A_set), len(C_set))
    H = C.H_elements()
    H_prime = [h for h in H if h in A_set]
    if Fraction(len(H_prime)) < alpha * len(H):
        raise CertificateError("A cap H is smaller than the stated bound")
    ell_cap = math.ceil(20 / alpha)
    ells, Ms = [], []
    for v, N in zip(C.gens, C.lengths):
        ell_found = None
        for ell in range(1, min(N, ell_cap) + 1):
            if g.scale(ell, v) in A_set:
                ell_found = ell
                break
        if ell_found is None:
            if ell_cap <= N:
                raise CertificateError(
                    "no short multiple of a generator lies in A; "
                    "contradicts the extraction lemma"
                )
            ell_found = N + 1  # only M = 0 is claimed in this direction
        ells.append(ell_found)
        Ms.append(N // ell_found)
    sub = CosetProgression(
        g,
        (0,) * g.rank,
        [g.scale(l, v) for l, v in zip(ells, C.gens)],
        Ms,
        H_prime if H_prime else [(0,) * g.rank],
        symmetric=True,
    )
    missing = [c for c in sub.element_set() if c not in A_set]
    if missing:
        raise CertificateError(f"extracted progression escapes A at {missing[0]}")
    return sub, ells, Ms


# -- Bohr <-> progression bridge ---------------------------------------------


def _image_table(B: BohrSet):
    """Map (chi_1(x), ..., chi_r(x)) numerators (mod Q) -> a preimage x."""
    g = B.group
    Q = g.exponent
    from .bohr import char_value_numerators

    cols = [char_value_numerators(g, chi) for chi in B.freqs]
    table = {}
    for idx in range(g.order):
        key = tuple(int(col[idx]) for col in cols)
        if key not in table:
            table[key] = idx
    return table, Q


def _kernel_subgroup(B: BohrSet) -> list:
    g = B.group
    from .bohr import char_value_numerators

    cols = [char_value_numerators(g, chi) for chi in B.freqs]
    return [
        g.coords_of(idx)
        for idx in range(g.order)
        if all(int(col[idx]) == 0 for col in cols)
    ]


def bohr_to_progression(
    B: BohrSet, cap: int = DEFAULT_ENUMERATION_CAP
) -> CosetProgression:
    """Proper symmetric C with B(r^-4r rho) <= C <= B(r^-2r rho) <= r^2r C <= B.

    Desk-scale discrete-John substitute: exhaustive short-vector search in
    the lattice chi(G) + Z^r (r <= 2), with every containment verified by
    enumeration before returning.  Raises PartialResultError when the search
    space is exhausted.
    """
    g = B.group
    r = B.codimension
    if g.order > cap:
        raise BudgetError("bridge construction needs full enumeration")
    if r == 0:
        return CosetProgression(
            g, (0,) * g.rank, [], [],
            [g.coords_of(i) for i in range(1, g.order)] or [],
            symmetric=True,
        )
    if r == 1:
        return _bohr_to_progression_rank1(B)
    if r == 2:
        return _bohr_to_progression_rank2(B)
    raise BudgetError("bridge implemented for codimension <= 2 at desk scale")


def _verify_sandwich(B: BohrSet, C: CosetProgression, scale: int):
    inner4 = B.scaled(Fraction(1, scale * scale))
    inner2 = B.scaled(Fraction(1, scale))
    C_set = C.element_set()
    big = CosetProgression(
        C.group, C.base, C.gens, [scale * L for L in C.lengths],
        C.subgroup_gens, symmetric=True,
    )
    big_set = big.element_set()
    if not C.is_proper() or not big.is_proper():
        return None
    if not inner4.element_set() <= C_set:
        return None
    if not C_set <= inner2.element_set():
        return None
    if not inner2.element_set() <= big_set:
        return None
    if not big_set <= B.element_set():
        return None
    return big


def _bohr_to_progression_rank1(B: BohrSet) -> CosetProgression:
    g = B.group
    chi = B.freqs[0]
    rho = B.radii[0]
    m = chi.order()
    kernel = _kernel_subgroup(B)
    if m == 1:
        return CosetProgression(g, (0,) * g.rank, [], [], kernel, symmetric=True)
    # generator with chi(v) = 1/m
    table, Q = _image_table(B)
    v_idx = None
    for key, idx in table.items():
        val = key[0]
        if val != 0 and math.gcd(val * m // Q, m) == 1:
            j = val * m // Q
            v_idx = g.index_of(g.scale(pow(j, -1, m), g.coords_of(idx)))
            break
    if v_idx is None:
        raise PartialResultError("no generator of the character image found")
    L = min(int(rho * m), (m - 1) // 2)
    C = CosetProgression(
        g, (0,) * g.rank, [g.coords_of(v_idx)], [L], kernel, symmetric=True
    )
    if _verify_sandwich(B, C, 1) is None:
        raise PartialResultError("rank-1 bridge failed verification", partial=C)
    return C


def _bohr_to_progression_rank2(B: BohrSet) -> CosetProgression:
    g = B.group
    rho = min(B.radii)
    scale = 16  # r^{2r} for r = 2
    sigma = Fraction(rho, scale)
    table, Q = _image_table(B)
    kernel = _kernel_subgroup(B)
    image_keys = set(table)

    # short nonzero lattice vectors of chi(G) + Z^2, in units of 1/Q
    bound = int(sigma * Q)
    shorts = []
    for a in range(-bound, bound + 1):
        for b in range(-bound, bound + 1):
            if (a, b) == (0, 0):
                continue
            if (a % Q, b % Q) in image_keys:
                shorts.append((a, b))
    shorts.sort(key=lambda w: (max(abs(w[0]), abs(w[1])), w))

    def preimage(w):
        return g.coords_of(table[(w[0] % Q, w[1] % Q)])

    # rank-2 candidates: pairs of independent short vectors
    candidates = []
    for i, w1 in enumerate(shorts[:24]):
        for w2 in shorts[i + 1:24]:
            if w1[0] * w2[1] - w1[1] * w2[0] != 0:
                candidates.append((w1, w2))
    for w1, w2 in candidates[:60]:
        base_L1 = max(int(sigma * Q) // (2 * max(abs(w1[0]), abs(w1[1]))), 1)
        base_L2 = max(int(sigma * Q) // (2 * max(abs(w2[0]), abs(w2[1]))), 1)
        for dL1, dL2 in product((0, -1, 1), repeat=2):
            L1, L2 = base_L1 + dL1, base_L2 + dL2
            if L1 < 0 or L2 < 0:
                continue
            C = CosetProgression(
                g, (0,) * g.rank, [preimage(w1), preimage(w2)], [L1, L2],
                kernel, symmetric=True,
            )
            if C.size_claim() > 4 * g.order:
                continue
            if _verify_sandwich(B, C, scale) is not None:
                return C
    # degenerate boxes: a single short direction, or none at all
    for w in shorts[:24]:
        norm = max(abs(w[0]), abs(w[1]))
        for L in {max(int(sigma * Q) // norm, 1),
                  max(int(sigma * Q) // (2 * norm), 1), 1}:
            C = CosetProgression(
                g, (0,) * g.rank, [preimage(w)], [L], kernel, symmetric=True
            )
            if _verify_sandwich(B, C, scale) is not None:
                return C
    C = CosetProgression(g, (0,) * g.rank, [], [], kernel, symmetric=True)
    if _verify_sandwich(B, C, scale) is not None:
        return C
    raise PartialResultError("rank-2 bridge search exhausted")


def bridge_shrink_clause(B: BohrSet, C: CosetProgression, c: Fraction) -> bool:
    """B(Gamma, c r^-4r rho) inside [-2cL_i, 2cL_i] generators + H."""
    r = max(C.rank, 1)
    scale = r ** (2 * r)
    inner = B.scaled(Fraction(c) / (scale * scale))
    shrunk = CosetProgression(
        C.group, C.base, C.gens,
        [int(2 * Fraction(c) * L) for L in C.lengths],
        C.subgroup_gens, symmetric=True,
    )
    return inner.element_set() <= shrunk.element_set()


def progression_to_bohr_check(C: CosetProgression, B: BohrSet) -> bool:
    """Pure enumeration check B subset of C."""
    return B.element_set() <= C.element_set()


def bounded_char_span(freqs: Sequence, R: int) -> set:
    """<Gamma>_{[-R, R]} as a set of character coordinate tuples."""
    if not freqs:
        return set()
    g = freqs[0].group
    span = {(0,) * g.rank}
    for chi in freqs:
        new = set()
        for lam in range(-R, R + 1):
            shift = g.scale(lam, chi.coords)
            for base in span:
                new.add(g.add(base, shift))
        span = new
    return span


def bohr_sum_containment_check(
    B1: BohrSet, B2: BohrSet, R_max: int
):
    """Least R <= R_max with B(<G1>_R cap <G2>_R, 1/4) inside B1 + B2."""
    g = B1.group
    if B2.group != g:
        raise InputError("Bohr sets from different groups")
    sum_set = {
        g.add(a, b) for a in B1.element_set() for b in B2.element_set()
    }
    from .group import Character

    if not (B1.freqs and B2.freqs):
        raise InputError("containment check needs nonempty frequency sets")
    for R in range(1, R_max + 1):
        inter = bounded_char_span(B1.freqs, R) & bounded_char_span(B2.freqs, R)
        freqs = [Character(g, c) for c in sorted(inter)]
        BI = BohrSet(g, freqs, Fraction(1, 4))
        if BI.element_set() <= sum_set:
            return R
    return None


# -- biased forms on progressions ---------------------------------------------


def exp_sum_bound_holds(N: int, alpha: Fraction) -> bool:
    """|sum_{k=1}^N e(k alpha)| <= min(N, 1 / ||alpha||)."""
    total = sum(TorusValue(Fraction(alpha) * k).exp() for k in range(1, N + 1))
    norm = TorusValue(alpha).norm()
    bound = N if norm == 0 else min(N, 1 / float(norm))
    return abs(total) <= bound + 1e-9


def biased_progression_form(
    C: CosetProgression,
    phi: dict,
    delta: float,
    eps_grid: Sequence[Fraction] = (Fraction(1, 4), Fraction(1, 10), Fraction(1, 100)),
):
    """Shrinking P' on which phi - phi(0) is small near the center.

    phi maps element coords of C to TorusValue and must be a Freiman
    homomorphism; the bias |sum e(phi)| >= delta |C| is computed first and a
    NoWitness result returned when it fails.  The per-generator shrink is
    L_i' = min(floor(1 / (1000 r ||alpha_i||)), L_i) with alpha_i the
    generator phase; the conclusion ||phi(x) - phi(0)|| < eps on eps P' + H
    is verified by enumeration for every eps in ``eps_grid``.
    """
    if not C.symmetric:
        raise PreconditionError("biased form analysis expects symmetric C")
    C_set = C.element_set()
    total = sum(TorusValue(phi[c]).exp() for c in C_set)
    bias = abs(total) / len(C_set)
    if bias < delta:
        return NoWitness("bias below threshold", measured=bias)
    g = C.group
    base_val = TorusValue(phi[C.base])
    r = max(C.rank, 1)
    alphas = []
    for v in C.gens:
        alphas.append(TorusValue(phi[g.add(C.base, v)]) - base_val)
    new_lengths = []
    for a, L in zip(alphas, C.lengths):
        nrm = a.norm()
        if nrm == 0:
            new_lengths.append(L)
        else:
            new_lengths.append(min(int(Fraction(1, 1000 * r) / nrm), L))
    P_prime = CosetProgression(
        g, C.base, C.gens, new_lengths, C.subgroup_gens, symmetric=True
    )
    # phi is constant on the H-coset of the base (forced by bias + linearity)
    for h in C.H_elements():
        if TorusValue(phi[g.add(C.base, h)]) != base_val:
            raise CertificateError("biased Freiman form varies along H")
    for eps in eps_grid:
        eps = Fraction(eps)
        piece = P_prime.shrink(eps)
        for c in piece.element_set():
            dev = (TorusValue(phi[c]) - base_val).norm()
            if dev >= eps:
                raise CertificateError(
                    f"biased form deviation {dev} at {c} exceeds eps {eps}"
                )
    return P_prime, bias, alphas
