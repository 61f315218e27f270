"""Freiman and E-homomorphisms: verification, additive-quadruple statistics,
naive extensions with error-set certificates, subgroup extensions, and the
6-path graph primitives.

Codomain values are GroupElements of a codomain group or TorusValues; both
support the additive operations used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Callable, Optional, Sequence

import numpy as np

from .config import DEFAULT_ENUMERATION_CAP
from .errors import (
    BudgetError,
    CertificateError,
    InputError,
    PreconditionError,
)
from .group import Character, FinAbGroup, GroupElement, TorusValue, subgroup_closure
from .bohr import BohrSet
from .progression import CosetProgression, bohr_to_progression, bounded_char_span

MAX_ERROR_RANK = 25


def _val_zero(sample):
    if isinstance(sample, TorusValue):
        return TorusValue(0)
    if isinstance(sample, GroupElement):
        return sample.group.zero()
    raise InputError("codomain values must be GroupElement or TorusValue")


@dataclass
class PartialMap:
    """Map from an explicit subset of a group into H (group or torus)."""

    group: FinAbGroup
    table: dict  # coords tuple -> value

    def __post_init__(self):
        self.table = {tuple(k): v for k, v in self.table.items()}

    @property
    def domain(self) -> set:
        return set(self.table)

    def __call__(self, coords):
        return self.table[tuple(coords)]

    def restricted(self, coords_set) -> "PartialMap":
        return PartialMap(
            self.group, {c: self.table[c] for c in coords_set if c in self.table}
        )


class ErrorSet:
    """E = <generators>_{-1,0,1}; membership by meet-in-the-middle."""

    def __init__(self, generators: Sequence):
        self.generators = list(generators)
        if len(self.generators) > MAX_ERROR_RANK:
            raise PreconditionError(
                f"error-set rank {len(self.generators)} exceeds {MAX_ERROR_RANK}"
            )
        self._half_table = None

    @property
    def rank(self) -> int:
        return len(self.generators)

    def _halves(self):
        if self._half_table is None:
            gens = self.generators
            k = len(gens) // 2
            first, second = gens[:k], gens[k:]
            table = {}
            zero = _val_zero(gens[0]) if gens else None
            for eps in product((-1, 0, 1), repeat=len(first)):
                acc = zero
                for e, g in zip(eps, first):
                    acc = acc + e * g
                table.setdefault(acc, eps)
            self._half_table = (first, second, table, zero)
        return self._half_table

    def membership(self, value):
        """Sign vector eps with value = sum eps_i gen_i, or None."""
        if not self.generators:
            zero = value
            try:
                zero = _val_zero(value)
            except InputError:
                return None
            return () if value == zero else None
        first, second, table, zero = self._halves()
        for eps2 in product((-1, 0, 1), repeat=len(second)):
            acc = zero
            for e, g in zip(eps2, second):
                acc = acc + e * g
            probe = value - acc
            if probe in table:
                return table[probe] + eps2
        return None

    def __contains__(self, value) -> bool:
        return self.membership(value) is not None

    def elements(self, cap: int = 10**6) -> set:
        if not self.generators:
            return set()
        if 3 ** self.rank > cap:
            raise BudgetError("error set too large to enumerate")
        out = set()
        zero = _val_zero(self.generators[0])
        for eps in product((-1, 0, 1), repeat=self.rank):
            acc = zero
            for e, g in zip(eps, self.generators):
                acc = acc + e * g
            out.add(acc)
        return out


def _quadruple_iter(phi: PartialMap, budget: int):
    """(a, b, c, d) with a + b = c + d, all in the domain."""
    dom = sorted(phi.domain)
    if len(dom) ** 3 > budget:
        raise BudgetError("quadruple enumeration exceeds budget")
    g = phi.group
    dom_set = phi.domain
    for a in dom:
        for b in dom:
            s = g.add(a, b)
            for c in dom:
                d = g.sub(s, c)
                if d in dom_set:
                    yield a, b, c, d


def freiman_check(phi: PartialMap, budget: int = DEFAULT_ENUMERATION_CAP):
    """(is_freiman, first violating quadruple or None)."""
    for a, b, c, d in _quadruple_iter(phi, budget):
        if phi(a) + phi(b) != phi(c) + phi(d):
            return False, (a, b, c, d)
    return True, None


def is_freiman_linear(phi: PartialMap, budget: int = DEFAULT_ENUMERATION_CAP) -> bool:
    zero = (0,) * phi.group.rank
    if zero not in phi.domain:
        return False
    if phi(zero) != _val_zero(phi(zero)):
        return False
    return freiman_check(phi, budget)[0]


def e_hom_check(
    phi: PartialMap, E: ErrorSet, budget: int = DEFAULT_ENUMERATION_CAP
):
    """(is_e_hom, first failing quadruple or None, its residual or None)."""
    for a, b, c, d in _quadruple_iter(phi, budget):
        residual = phi(a) + phi(b) - phi(c) - phi(d)
        if residual not in E:
            return False, (a, b, c, d), residual
    return True, None, None


def respected_quadruple_count(
    phi: PartialMap, budget: int = DEFAULT_ENUMERATION_CAP
):
    """(respected, total) over all additive quadruples of the domain."""
    respected = total = 0
    for a, b, c, d in _quadruple_iter(phi, budget):
        total += 1
        if phi(a) + phi(b) == phi(c) + phi(d):
            respected += 1
    return respected, total


def additive_energy(domain: set, group: FinAbGroup) -> int:
    total = 0
    for a in domain:
        for b in domain:
            s = group.add(a, b)
            for c in domain:
                if group.sub(s, c) in domain:
                    total += 1
    return total


# -- abstract-BSG collection predicates --------------------------------------
#
# Quadruples are stored in the alternating-sign convention
# (q1, q2, q3, q4) with -q1 + q2 + q3 - q4 = 0, i.e. q2 + q3 = q1 + q4.


def quadruple_symmetries(q):
    q1, q2, q3, q4 = q
    return (
        (q3, q4, q1, q2),  # S1
        (q2, q1, q4, q3),  # S2
        (q1, q3, q2, q4),  # S3
    )


def respected_collection(phi: PartialMap, budget: int = DEFAULT_ENUMERATION_CAP):
    """Respected quadruples of phi in the alternating-sign convention."""
    out = set()
    for a, b, c, d in _quadruple_iter(phi, budget):
        if phi(a) + phi(b) == phi(c) + phi(d):
            out.add((c, a, b, d))
    return out


def collection_symmetry_audit(Q: set) -> bool:
    return all(img in Q for q in Q for img in quadruple_symmetries(q))


def collection_largeness(Q: set, X_size: int, c: float) -> bool:
    return len(Q) >= c * X_size**3


def weak_transitivity_audit(
    Qs: dict,
    X: Sequence,
    group: FinAbGroup,
    c_prime_count: int,
    pairs=((1, 1), (1, 2)),
):
    """Exhaustive check of the chaining predicate on tiny instances.

    For (i, j) in ``pairs``: whenever at least ``c_prime_count`` pairs
    (b, b') chain q = (a1, a2, ., .) in Q_i to (., ., a3, a4) in Q_j, the
    composite quadruple must lie in Q_{i+j}.
    """
    X = [tuple(x.coords) if isinstance(x, GroupElement) else tuple(x) for x in X]
    for (i, j) in pairs:
        Qi, Qj, Qij = Qs.get(i, set()), Qs.get(j, set()), Qs.get(i + j, set())
        for a1 in X:
            for a2 in X:
                for a3 in X:
                    a4 = group.sub(group.add(a2, a3), a1)
                    if a4 not in set(X):
                        continue
                    count = 0
                    for b in X:
                        bp = group.sub(group.add(a2, b), a1)
                        if (a1, a2, b, bp) in Qi and (b, bp, a3, a4) in Qj:
                            count += 1
                    if count >= c_prime_count and (a1, a2, a3, a4) not in Qij:
                        return False, (i, j, (a1, a2, a3, a4))
    return True, None


# -- combinations of partially defined maps ----------------------------------


def range_of_combination(maps: Sequence, budget: int = DEFAULT_ENUMERATION_CAP):
    """Image size of sum_i sign_i phi_i on the intersection of domains.

    ``maps`` is a list of (sign, PartialMap).
    """
    if not maps:
        raise InputError("need at least one map")
    domain = set.intersection(*[m.domain for _, m in maps])
    if len(domain) > budget:
        raise BudgetError("combination domain exceeds budget")
    values = set()
    for c in domain:
        acc = None
        for sign, m in maps:
            term = m(c) if sign > 0 else -m(c)
            acc = term if acc is None else acc + term
        values.add(acc)
    return len(values), domain


def small_range_check(
    phi: PartialMap, B: BohrSet, budget: int = DEFAULT_ENUMERATION_CAP
):
    """Many zeroes imply small range, as a checked inequality.

    Measures the zero fraction c of a Freiman-linear phi on B and asserts
    the image count on B(rho/2) is at most
    (200 d / c)^(d+1) (prod rho)^(-d).
    """
    B_coords = B.element_set()
    zero_val = _val_zero(next(iter(phi.table.values())))
    zeros = sum(1 for cds in B_coords if phi(cds) == zero_val)
    c = Fraction(zeros, len(B_coords))
    if c == 0:
        raise PreconditionError("phi never vanishes on B")
    half = B.scaled(Fraction(1, 2)).element_set()
    image = {phi(cds) for cds in half}
    d = max(B.codimension, 1)
    prod_rho = Fraction(1)
    for r in B.radii:
        prod_rho *= r
    bound = float(Fraction(200 * d, 1) / c) ** (d + 1) * float(prod_rho) ** (-d)
    ok = len(image) <= bound
    return {"zero_fraction": float(c), "image_size": len(image),
            "bound": bound, "ok": ok}


# -- naive extensions ---------------------------------------------------------


def _pm1_decompose(vectors: Sequence, target) -> Optional[tuple]:
    """Signs eps in {-1,0,1}^k with sum eps_i v_i = target (integer vectors).

    Depth-first search with componentwise suffix bounds; vectors should be
    sorted large-to-small for effective pruning.
    """
    k = len(vectors)
    dim = len(target)
    suffix = [[0] * dim for _ in range(k + 1)]
    for i in range(k - 1, -1, -1):
        suffix[i] = [s + abs(v) for s, v in zip(suffix[i + 1], vectors[i])]

    out = [0] * k

    def rec(i, rem):
        if all(r == 0 for r in rem):
            # remaining signs zero
            for j in range(i, k):
                out[j] = 0
            return True
        if i == k:
            return False
        if any(abs(r) > s for r, s in zip(rem, suffix[i])):
            return False
        v = vectors[i]
        for e in (0, 1, -1):
            out[i] = e
            if rec(i + 1, [r - e * x for r, x in zip(rem, v)]):
                return True
        return False

    return tuple(out) if rec(0, list(target)) else None


def greedy_dissociated(points: Sequence[tuple]) -> list:
    """Maximal dissociated subset, greedy in the given (lex) order.

    Adding p breaks dissociativity exactly when p lies in the {-1,0,1}-span
    of the current set, so span membership is the whole test.
    """
    chosen: list = []
    for p in points:
        if not any(p):
            continue
        ordered = sorted(chosen, key=lambda v: -max(map(abs, v)))
        if _pm1_decompose(ordered, p) is None:
            chosen.append(p)
    return chosen


@dataclass
class NaiveExtension:
    group: FinAbGroup
    phi_tilde: dict                  # coords -> value on G' = <B'>
    error_generators: list           # sigma_i, sigma'_i values
    mus: list                        # dissociated lattice vectors
    B_prime: BohrSet
    C: CosetProgression
    scale: int
    m: int
    _coord_of: dict = field(repr=False, default_factory=dict)
    _decomp: dict = field(repr=False, default_factory=dict)
    _phi: Optional[PartialMap] = field(repr=False, default=None)
    _e_basis: list = field(repr=False, default_factory=list)

    def certify_defect(self, xs: Sequence[tuple]):
        """For x_1..x_m in B', certify phi~(sum) - sum phi(x_i) in <S>_{+-1}.

        Returns (defect, eps) where eps signs the sigma_i - sigma'_i pairs.
        Raises CertificateError if the certificate fails (library bug).
        """
        g = self.group
        if len(xs) != self.m:
            raise InputError(f"need exactly m = {self.m} summands")
        total = (0,) * g.rank
        for x in xs:
            total = g.add(total, x)
        defect = self.phi_tilde[total]
        for x in xs:
            defect = defect - self._phi(x)
        # lattice relation vector of (decomposition of total, minus the xs)
        dprime = len(self.C.gens)
        v = [0] * dprime
        for y in self._decomp[total]:
            lam = self._coord_of[y]
            v = [a + b for a, b in zip(v, lam)]
        for x in xs:
            lam = self._coord_of[g.neg(x)]
            v = [a + b for a, b in zip(v, lam)]
        order = sorted(
            range(len(self.mus)), key=lambda i: -max(map(abs, self.mus[i]))
        )
        eps_sorted = _pm1_decompose([self.mus[i] for i in order], v)
        if eps_sorted is None:
            raise CertificateError("relation vector escapes the dissociated span")
        eps = [0] * len(self.mus)
        for pos, i in enumerate(order):
            eps[i] = eps_sorted[pos]
        acc = _val_zero(defect)
        for e, (sigma, sigma_p) in zip(eps, self._e_basis):
            if e:
                acc = acc + e * sigma - e * sigma_p
        if acc != defect:
            raise CertificateError("defect certificate identity failed")
        return defect, tuple(eps)


def naive_extension(
    B: BohrSet,
    phi: PartialMap,
    m: int,
    budget: int = DEFAULT_ENUMERATION_CAP,
) -> NaiveExtension:
    """Extend a Freiman-linear phi on B to phi~ on G' = <B(Gamma, rho')>.

    rho' = d^{-2d} rho; requires G' = m-fold sumset of B(Gamma, rho')
    (verified).  Constructs the dissociated relation set and the error
    generators sigma_i, sigma'_i; every defect of phi~ is certified inside
    <S>_{+-1} through ``certify_defect``.
    """
    g = B.group
    d = max(B.codimension, 1)
    if not is_freiman_linear(phi, budget):
        raise PreconditionError("phi must be Freiman-linear on B")
    scale = d ** (2 * d)
    B_prime = B.scaled(Fraction(1, scale))
    bp_set = B_prime.element_set()
    # G' and the m-fold sumset check, keeping one decomposition per element
    decomp = {c: (c,) for c in bp_set}
    reach = set(bp_set)
    for _ in range(m - 1):
        new = {}
        for base in reach:
            for b in bp_set:
                t = g.add(base, b)
                if t not in reach and t not in new:
                    new[t] = decomp[base] + (b,)
        for t, chain in new.items():
            decomp[t] = chain
        reach |= set(new)
    G_prime = {h.coords for h in subgroup_closure(
        [GroupElement(g, c) for c in bp_set] or [g.zero()])}
    if reach != G_prime:
        raise PreconditionError(
            f"m = {m} sumsets of B' do not exhaust <B'> "
            f"({len(reach)} of {len(G_prime)})"
        )
    # pad decompositions to exactly m summands with zeros
    zero = (0,) * g.rank
    for t in list(decomp):
        chain = decomp[t]
        decomp[t] = chain + (zero,) * (m - len(chain))

    C = bohr_to_progression(B_prime)
    C_big = CosetProgression(
        g, C.base, C.gens, [scale * L for L in C.lengths],
        C.subgroup_gens, symmetric=True,
    )
    if not C_big.element_set() <= B.element_set():
        raise CertificateError("scaled progression escapes B")
    # coordinates of every element of C_big (proper, so unique)
    coord_of = {}
    H_set = set(C.H_elements())
    for coords, lam, h in C_big.iter_points():
        if coords not in coord_of:
            coord_of[coords] = lam
    for c in bp_set:
        if c not in coord_of:
            raise CertificateError("B' not inside the scaled progression")

    dprime = len(C.gens)
    box = [2 * m * scale * L for L in C.lengths]
    count = 1
    for b in box:
        count *= 2 * b + 1
    if count > 4 * 10**6:
        raise BudgetError("dissociated-set box too large for this fixture")
    lattice_points = []
    if dprime:
        for lam in product(*[range(-b, b + 1) for b in box]):
            vec_coords = zero
            for coef, gen in zip(lam, C.gens):
                vec_coords = g.add(vec_coords, g.scale(coef, gen))
            if vec_coords in H_set:
                lattice_points.append(lam)
    mus = greedy_dissociated(sorted(lattice_points))
    # unconditional counting bound from the disjoint-translates argument
    count_bound = dprime * math.log2(4 * m * scale + 2) + 1
    if len(mus) > count_bound:
        raise CertificateError("dissociated set exceeds the counting bound")

    e_basis = []
    err_gens = []
    zero_val = _val_zero(phi(zero))
    for mu in mus:
        sigma = zero_val
        for coef, gen in zip(mu, C.gens):
            sigma = sigma + coef * phi(gen)
        arg = zero
        for coef, gen in zip(mu, C.gens):
            arg = g.add(arg, g.scale(coef, gen))
        sigma_p = phi(arg)
        e_basis.append((sigma, sigma_p))
        err_gens.extend([sigma, sigma_p])

    phi_tilde = {}
    for t, chain in decomp.items():
        acc = zero_val
        for x in chain:
            acc = acc + phi(x)
        phi_tilde[t] = acc

    return NaiveExtension(
        group=g,
        phi_tilde=phi_tilde,
        error_generators=err_gens,
        mus=mus,
        B_prime=B_prime,
        C=C,
        scale=scale,
        m=m,
        _coord_of=coord_of,
        _decomp=decomp,
        _phi=phi,
        _e_basis=e_basis,
    )


# -- E-homomorphism extension from subgroups ----------------------------------


def quotient_cyclic_decomposition(G: FinAbGroup, H_elements: set):
    """Direct-sum decomposition of G/H: list of (generator coords, order).

    Computed from the Smith normal form of the combined relation matrix, so
    the generators really are independent and d_i x_i lies in H.
    """
    from .lattice import IntMatrix, smith_normal_form, unimodular_inverse

    n = G.rank
    rows = [[G.invariant_factors[i] if j == i else 0 for j in range(n)]
            for i in range(n)]
    for h in sorted(H_elements):
        rows.append(list(h))
    _, D, V = smith_normal_form(IntMatrix(rows))
    gens = []
    for j in range(n):
        dj = D.entries[j][j]
        if dj > 1:
            coords = tuple(V.entries[i][j] % G.invariant_factors[i] for i in range(n))
            gens.append((G.reduce_coords(coords), dj))
    return gens


def subgroup_e_extension(
    chis: Sequence[Character],
    B: BohrSet,
    phi: PartialMap,
    E: ErrorSet,
    rng,
    samples: int = 200,
    budget: int = DEFAULT_ENUMERATION_CAP,
):
    """Extend an E-homomorphism on H cap B to an E'-homomorphism on B(rho/16).

    H = ker(chi_1, ..., chi_r).  The independence condition
    <chi>_[-M, M] cap <Gamma> = {0} is verified by bounded search (the
    coefficient box saturates to the generated subgroup).  Coset
    representatives are chosen inside B(Gamma, rho / 16 M^2) as the proof
    requires, and the E'-homomorphism property is verified on sampled
    quadruples.
    """
    g = B.group
    from .bohr import char_value_numerators

    cols = [char_value_numerators(g, chi) for chi in chis]
    H_set = {
        g.coords_of(i)
        for i in range(g.order)
        if all(int(col[i]) == 0 for col in cols)
    }
    M = g.order // len(H_set)
    chi_span = bounded_char_span(chis, M)
    gamma_span = {
        h.coords for h in subgroup_closure(
            [GroupElement(g, chi.coords) for chi in B.freqs] or [g.zero()]
        )
    }
    inter = chi_span & gamma_span
    if inter != {(0,) * g.rank}:
        raise PreconditionError(
            "independence condition fails: spans intersect nontrivially"
        )

    decomposition = quotient_cyclic_decomposition(g, H_set)
    m_count = len(decomposition)
    B_reps = B.with_radii([Fraction(r, 16 * M * M) for r in B.radii])
    rep_candidates = B_reps.element_set()
    xs = []
    for gen_coords, dj in decomposition:
        found = None
        for cand in sorted(rep_candidates, key=g.index_of):
            if g.sub(cand, gen_coords) in H_set:
                found = cand
                break
        if found is None:
            raise CertificateError(
                "no coset representative inside the small Bohr set; "
                "contradicts the extension argument"
            )
        xs.append((found, dj))

    # coset coordinates: every coset is sum lambda_i x_i + H uniquely
    coset_lambda = {}
    for lam in product(*[range(dj) for _, dj in xs]):
        shift = (0,) * g.rank
        for coef, (x, _) in zip(lam, xs):
            shift = g.add(shift, g.scale(coef, x))
        for h in H_set:
            coset_lambda[g.add(shift, h)] = lam
    if len(coset_lambda) != g.order:
        raise CertificateError("coset coordinates do not cover the group")

    def pi(coords):
        lam = coset_lambda[coords]
        out = coords
        for coef, (x, _) in zip(lam, xs):
            out = g.sub(out, g.scale(coef, x))
        return out

    B16 = B.with_radii([Fraction(r, 16) for r in B.radii])
    phi_tilde = {}
    for c in B16.element_set():
        p = pi(c)
        if p not in phi.table:
            raise CertificateError("projection left the domain of phi")
        phi_tilde[c] = phi(p)

    # E' = m(E + {0, phi(0)}) - m(E + {0, phi(0)}) + <k_i>_{+-1}
    zero = (0,) * g.rank
    phi0 = phi(zero)
    zero_val = _val_zero(phi0)
    base = E.elements() | {e + phi0 for e in E.elements()} | {zero_val, phi0}
    m_fold = {zero_val}
    for _ in range(max(m_count, 1)):
        m_fold = {a + b for a in m_fold for b in base}
        if len(m_fold) > 10**6:
            raise BudgetError("E' construction too large")
    diff = {a - b for a in m_fold for b in m_fold}
    ks = [phi(g.scale(dj, x)) for (x, dj) in xs]
    k_span = {zero_val}
    for k in ks:
        k_span = {a + e * k for a in k_span for e in (-1, 0, 1)}
    e_prime = {a + b for a in diff for b in k_span}

    dom = sorted(phi_tilde)
    failures = []
    for _ in range(samples):
        a = dom[int(rng.integers(len(dom)))]
        b = dom[int(rng.integers(len(dom)))]
        c = dom[int(rng.integers(len(dom)))]
        dd = g.sub(g.add(a, b), c)
        if dd not in phi_tilde:
            continue
        residual = phi_tilde[a] + phi_tilde[b] - phi_tilde[c] - phi_tilde[dd]
        if residual not in e_prime:
            failures.append((a, b, c, dd, residual))
    if failures:
        raise CertificateError(
            f"E'-homomorphism check failed on {len(failures)} samples"
        )
    return phi_tilde, e_prime, {"m": m_count, "reps": xs, "index": M}


# -- graph primitives ---------------------------------------------------------


def count_paths_len6(adj, u: int, v: int) -> int:
    """(A^6)_{uv}: exact length-6 walk count."""
    A = np.asarray(adj, dtype=np.int64)
    if A.shape[0] != A.shape[1]:
        raise InputError("adjacency matrix must be square")
    if A.shape[0] > 10**3:
        raise BudgetError("graph too large")
    A2 = A @ A
    A3 = A2 @ A
    W = A3 @ A3
    return int(W[u, v])


def robust_subset(adj, c: float):
    """Vertex set X with |X| >= 2^-5 c n and >= 2^-35 c^9 n^5 6-walks
    between every pair, per the repeated-deletion argument.

    Walk counts are taken in the full graph (exact matrix powers).  Raises
    CertificateError with the deletion trace if pruning empties the graph,
    which the source lemma rules out for genuine inputs.
    """
    A = np.asarray(adj, dtype=np.int64)
    n = A.shape[0]
    edges = int(A.sum()) // 2
    if edges < c * n * n:
        raise PreconditionError(f"edge count {edges} below c n^2 = {c * n * n}")
    A3 = A @ A @ A
    W = A3 @ A3
    theta = (c**9) * (n**5) / (2**35)
    alive = list(range(n))
    trace = []
    while alive:
        sub = W[np.ix_(alive, alive)]
        bad = sub < theta
        np.fill_diagonal(bad, False)
        counts = bad.sum(axis=1)
        if counts.max() == 0:
            break
        worst = int(np.argmax(counts))  # first maximum: deterministic
        trace.append(alive[worst])
        alive.pop(worst)
    if not alive:
        raise CertificateError(f"pruning emptied the graph; trace {trace}")
    if len(alive) < c * n / 32:
        raise CertificateError(
            f"robust subset too small: {len(alive)} < {c * n / 32}; trace {trace}"
        )
    return alive, W, theta
