"""Polynomials of degree <= 3 on (Z/2^d Z)^n: the explicit monomial basis,
derivative operators, classification, multilinear coefficient extraction,
and integration of symmetric bilinear/trilinear forms.

Requires d >= 2 throughout (the d = 1 case needs the non-classical theory
and is routed out).  All phase arithmetic is exact: polynomial values are
integer numerators over the common denominator 3 * 2^(d+2), apart from an
arbitrary rational constant term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Optional, Sequence

import numpy as np

from .config import DEFAULT_ENUMERATION_CAP
from .errors import BudgetError, CertificateError, InputError, PreconditionError
from .group import FinAbGroup, GroupElement, TorusValue


def _torsion_params(group: FinAbGroup):
    factors = group.invariant_factors
    if not factors:
        raise InputError("trivial group carries no polynomial structure here")
    q = factors[0]
    if any(f != q for f in factors):
        raise InputError("group must be (Z/2^d)^n")
    d = q.bit_length() - 1
    if q != 1 << d:
        raise InputError("factors must be powers of two")
    if d < 2:
        raise PreconditionError(
            "d = 1 is the non-classical regime and is out of scope"
        )
    return q, d, group.rank


class PolyPhase:
    """Coefficient vector over the explicit degree <= 3 monomial basis.

    Monomials (all with |x| the representative in [0, 2^d)):

    - cubic diagonal   (2|x_i|^3 - 3|x_i|^2 + 4|x_i|) / (3 * 2^(d+2))
    - cubic mixed      (|x_i|^2 |x_j| + |x_i| |x_j|^2 - |x_i||x_j|) / 2^(d+1),  i < j
    - cubic square     |x_i|^2 |x_j| / 2^d,  i != j
    - cubic triple     |x_i||x_j||x_k| / 2^d,  i < j < k
    - quadratic diag   |x_i|^2 / 2^(d+1)
    - quadratic off    |x_i||x_j| / 2^d,  i < j
    - linear           |x_i| / 2^d
    - constant         alpha (any torus value)

    Canonical coefficient ranges (the ones ``classify_membership`` emits):
    cubic mixed in {0, 1}, cubic square in [0, 2^(d-1)), everything else in
    [0, 2^d).  The basis is redundant beyond these ranges: e.g. 2^d times
    the cubic diagonal monomial is a linear function.
    """

    def __init__(self, group: FinAbGroup, *, cubic_diag=None, cubic_mixed=None,
                 cubic_sq=None, cubic_triple=None, quad_diag=None,
                 quad_off=None, linear=None, const=0):
        self.group = group
        self.q, self.d, self.n = _torsion_params(group)
        self.M = 3 * (1 << (self.d + 2))
        self.cubic_diag = {int(i): int(v) for i, v in (cubic_diag or {}).items()}
        self.cubic_mixed = {tuple(k): int(v) for k, v in (cubic_mixed or {}).items()}
        self.cubic_sq = {tuple(k): int(v) for k, v in (cubic_sq or {}).items()}
        self.cubic_triple = {tuple(k): int(v) for k, v in (cubic_triple or {}).items()}
        self.quad_diag = {int(i): int(v) for i, v in (quad_diag or {}).items()}
        self.quad_off = {tuple(k): int(v) for k, v in (quad_off or {}).items()}
        self.linear = {int(i): int(v) for i, v in (linear or {}).items()}
        self.const = TorusValue(const)
        for (i, j) in self.cubic_mixed:
            if not i < j:
                raise InputError("mixed cubic keys must satisfy i < j")
        for (i, j) in self.cubic_sq:
            if i == j:
                raise InputError("square cubic keys need distinct indices")
        for key in self.cubic_triple:
            if not (key[0] < key[1] < key[2]):
                raise InputError("triple keys must be strictly increasing")
        for (i, j) in self.quad_off:
            if not i < j:
                raise InputError("off-diagonal quadratic keys must have i < j")

    def numerator_at(self, coords) -> int:
        """Numerator of (value - const) over M = 3 * 2^(d+2)."""
        a = [int(c) for c in coords]
        d = self.d
        total = 0
        for i, lam in self.cubic_diag.items():
            x = a[i]
            total += lam * (2 * x**3 - 3 * x**2 + 4 * x)
        for (i, j), mu in self.cubic_mixed.items():
            total += mu * 6 * (a[i] ** 2 * a[j] + a[i] * a[j] ** 2 - a[i] * a[j])
        for (i, j), lam in self.cubic_sq.items():
            total += lam * 12 * (a[i] ** 2 * a[j])
        for (i, j, k), lam in self.cubic_triple.items():
            total += lam * 12 * (a[i] * a[j] * a[k])
        for i, lam in self.quad_diag.items():
            total += lam * 6 * (a[i] ** 2)
        for (i, j), lam in self.quad_off.items():
            total += lam * 12 * (a[i] * a[j])
        for i, lam in self.linear.items():
            total += lam * 12 * a[i]
        return total % self.M

    def eval(self, coords) -> TorusValue:
        return TorusValue(Fraction(self.numerator_at(coords), self.M)) + self.const

    def __call__(self, x) -> TorusValue:
        coords = x.coords if isinstance(x, GroupElement) else tuple(x)
        return self.eval(self.group.reduce_coords(coords))

    def numerator_table(self) -> np.ndarray:
        """Numerators over M for every group element, in index order."""
        g = self.group
        out = np.empty(g.order, dtype=np.int64)
        for idx in range(g.order):
            out[idx] = self.numerator_at(g.coords_of(idx))
        return out

    def torus_table(self) -> list:
        g = self.group
        return [self.eval(g.coords_of(i)) for i in range(g.order)]

    def coefficients(self) -> dict:
        return {
            "cubic_diag": dict(self.cubic_diag),
            "cubic_mixed": {f"{i},{j}": v for (i, j), v in self.cubic_mixed.items()},
            "cubic_sq": {f"{i},{j}": v for (i, j), v in self.cubic_sq.items()},
            "cubic_triple": {
                f"{i},{j},{k}": v for (i, j, k), v in self.cubic_triple.items()
            },
            "quad_diag": dict(self.quad_diag),
            "quad_off": {f"{i},{j}": v for (i, j), v in self.quad_off.items()},
            "linear": dict(self.linear),
            "const": str(self.const),
        }

    def degree_bound(self) -> int:
        if self.cubic_diag or self.cubic_mixed or self.cubic_sq or self.cubic_triple:
            return 3
        if self.quad_diag or self.quad_off:
            return 2
        if self.linear:
            return 1
        return 0


# -- exact derivative machinery on numerator tables ---------------------------


def _axis_shift(table: np.ndarray, group: FinAbGroup, coords) -> np.ndarray:
    shape = group.invariant_factors
    t = table.reshape(shape)
    return np.roll(t, shift=tuple(-c for c in coords),
                   axis=tuple(range(len(shape)))).reshape(group.order)


def derivative_table(table: np.ndarray, group: FinAbGroup, coords, M: int):
    """Numerators of Delta_a f from numerators of f (constants cancel)."""
    return (_axis_shift(table, group, coords) - table) % M


def iterated_derivative(table, group, shift_list, M):
    out = table
    for coords in shift_list:
        out = derivative_table(out, group, coords, M)
    return out


def _basis_dirs(group: FinAbGroup):
    n = group.rank
    return [tuple(1 if j == i else 0 for j in range(n)) for i in range(n)]


def degree_at_most(table: np.ndarray, group: FinAbGroup, m: int, M: int):
    """Is every (m+1)-fold derivative zero?  Witness chain on failure.

    Checking basis directions only is enough: derivatives along a sum of
    shifts decompose into translates of basis-direction derivatives.
    """
    dirs = _basis_dirs(group)

    def rec(tab, depth, chain):
        if depth == 0:
            if np.any(tab % M):
                x = int(np.nonzero(tab % M)[0][0])
                return False, (tuple(chain), group.coords_of(x))
            return True, None
        for e in dirs:
            ok, wit = rec(derivative_table(tab, group, e, M), depth - 1, chain + [e])
            if not ok:
                return False, wit
        return True, None

    if group.rank == 0:
        return True, None
    return rec(table, m + 1, [])


def derivative_poly(q: PolyPhase, shifts: Sequence) -> np.ndarray:
    """Numerator table of the iterated discrete derivative of q."""
    coords_list = [
        s.coords if isinstance(s, GroupElement) else tuple(s) for s in shifts
    ]
    return iterated_derivative(q.numerator_table(), q.group, coords_list, q.M)


def poly_degree_certificate(q: PolyPhase, m: int):
    return degree_at_most(q.numerator_table(), q.group, m, q.M)


# -- classification ------------------------------------------------------------


def _to_numerators(values: Sequence[TorusValue]):
    vals = [TorusValue(v) for v in values]
    denom = 1
    for v in vals:
        denom = denom * v.denominator // math.gcd(denom, v.denominator)
    nums = np.array(
        [v.numerator * (denom // v.denominator) for v in vals], dtype=object
    )
    return nums, denom


def _delta_at_zero(nums, denom, group: FinAbGroup, shifts) -> Fraction:
    """Delta_{shifts} f(0) as an exact fraction mod 1."""
    k = len(shifts)
    total = Fraction(0)
    for mask in range(1 << k):
        pt = (0,) * group.rank
        bits = 0
        for i in range(k):
            if (mask >> i) & 1:
                pt = group.add(pt, shifts[i])
                bits += 1
        sign = (-1) ** (k - bits)
        total += sign * Fraction(int(nums[group.index_of(pt)]), denom)
    return total - math.floor(total)


@dataclass
class Refutation:
    reason: str
    witness: object


def classify_membership(
    group: FinAbGroup, values: Sequence[TorusValue], m: int
) -> "PolyPhase | Refutation":
    """Solve for the monomial-basis coefficients of a degree <= m table.

    Returns the canonicalized PolyPhase, or a Refutation holding a witness
    derivative chain when the table is not a polynomial of degree <= m.
    The reconstruction is verified pointwise before returning.
    """
    q_mod, d, n = _torsion_params(group)
    if m > 3:
        raise InputError("classification implemented for degree <= 3")
    nums, denom = _to_numerators(values)
    ok, wit = degree_at_most(nums, group, m, denom)
    if not ok:
        return Refutation("derivative of order m+1 does not vanish", wit)

    dirs = _basis_dirs(group)
    coeff = {
        "cubic_diag": {}, "cubic_mixed": {}, "cubic_sq": {},
        "cubic_triple": {}, "quad_diag": {}, "quad_off": {}, "linear": {},
    }
    residual = list(values)

    def tensor_entry(res_nums, res_denom, pattern):
        val = _delta_at_zero(res_nums, res_denom, group, [dirs[i] for i in pattern])
        scaled = val * q_mod
        if scaled.denominator != 1:
            raise CertificateError(
                f"derivative at {pattern} is not a 2^-d rational: {val}"
            )
        return int(scaled) % q_mod

    if m >= 3:
        res_nums, res_denom = _to_numerators(residual)
        for i in range(n):
            lam = tensor_entry(res_nums, res_denom, (i, i, i))
            if lam:
                coeff["cubic_diag"][i] = lam
        for i, j in combinations(range(n), 2):
            tij = tensor_entry(res_nums, res_denom, (i, i, j))
            tji = tensor_entry(res_nums, res_denom, (j, j, i))
            if tij % 2 != tji % 2:
                raise CertificateError(
                    "mixed cubic parity mismatch on a degree <= 3 table"
                )
            mu = tij % 2
            if mu:
                coeff["cubic_mixed"][(i, j)] = mu
            sij = ((tij - mu) // 2) % (q_mod // 2)
            sji = ((tji - mu) // 2) % (q_mod // 2)
            if sij:
                coeff["cubic_sq"][(i, j)] = sij
            if sji:
                coeff["cubic_sq"][(j, i)] = sji
        for i, j, k in combinations(range(n), 3):
            lam = tensor_entry(res_nums, res_denom, (i, j, k))
            if lam:
                coeff["cubic_triple"][(i, j, k)] = lam
        cubic = PolyPhase(
            group,
            cubic_diag=coeff["cubic_diag"],
            cubic_mixed=coeff["cubic_mixed"],
            cubic_sq=coeff["cubic_sq"],
            cubic_triple=coeff["cubic_triple"],
        )
        residual = [
            TorusValue(v) - cubic.eval(group.coords_of(idx))
            for idx, v in enumerate(residual)
        ]

    if m >= 2:
        res_nums, res_denom = _to_numerators(residual)
        for i in range(n):
            lam = tensor_entry(res_nums, res_denom, (i, i))
            if lam:
                coeff["quad_diag"][i] = lam
        for i, j in combinations(range(n), 2):
            lam = tensor_entry(res_nums, res_denom, (i, j))
            if lam:
                coeff["quad_off"][(i, j)] = lam
        quad = PolyPhase(group, quad_diag=coeff["quad_diag"],
                         quad_off=coeff["quad_off"])
        residual = [
            TorusValue(v) - quad.eval(group.coords_of(idx))
            for idx, v in enumerate(residual)
        ]

    if m >= 1:
        res_nums, res_denom = _to_numerators(residual)
        for i in range(n):
            lam = tensor_entry(res_nums, res_denom, (i,))
            if lam:
                coeff["linear"][i] = lam
        lin = PolyPhase(group, linear=coeff["linear"])
        residual = [
            TorusValue(v) - lin.eval(group.coords_of(idx))
            for idx, v in enumerate(residual)
        ]

    const = residual[group.index_of((0,) * n)]
    out = PolyPhase(group, const=const, **{
        k: v for k, v in coeff.items()
    })
    for idx in range(group.order):
        if out.eval(group.coords_of(idx)) != TorusValue(values[idx]):
            raise CertificateError("classification reconstruction mismatch")
    return out


# -- multilinear forms ---------------------------------------------------------


class MultilinearForm:
    """phi(x_1..x_k) = sum lambda_{i_1..i_k} prod x_{j, i_j} / 2^d."""

    def __init__(self, group: FinAbGroup, arity: int, tensor: dict):
        self.group = group
        self.q, self.d, self.n = _torsion_params(group)
        self.arity = int(arity)
        self.tensor = {}
        for key, val in tensor.items():
            key = tuple(int(i) for i in key)
            if len(key) != self.arity:
                raise InputError("tensor key arity mismatch")
            v = int(val) % self.q
            if v:
                self.tensor[key] = v

    def eval(self, *points) -> TorusValue:
        if len(points) != self.arity:
            raise InputError("wrong number of arguments")
        pts = [
            p.coords if isinstance(p, GroupElement) else tuple(p) for p in points
        ]
        total = 0
        for key, lam in self.tensor.items():
            prod_val = lam
            for slot, i in enumerate(key):
                prod_val *= pts[slot][i]
            total += prod_val
        return TorusValue(Fraction(total % self.q, self.q))

    __call__ = eval

    def is_symmetric(self):
        from itertools import permutations

        for key, lam in self.tensor.items():
            for perm in permutations(key):
                if self.tensor.get(tuple(perm), 0) != lam:
                    return False, (key, perm)
        # also check zero entries whose permutations are nonzero
        seen = set(self.tensor)
        for key in list(seen):
            for perm in permutations(key):
                if tuple(perm) not in seen and self.tensor.get(key, 0) != 0:
                    return False, (key, perm)
        return True, None

    def coefficient(self, key) -> int:
        return self.tensor.get(tuple(key), 0)


def multilinear_from_poly(
    q: PolyPhase, k: int, rng=None, x_samples: int = 32
) -> MultilinearForm:
    """phi(a_1..a_k) = Delta_{a_1..a_k} q, with the degree certificate and
    x-independence asserted, and coefficients extracted at basis tuples."""
    ok, wit = poly_degree_certificate(q, k)
    if not ok:
        raise PreconditionError(f"q has degree above {k}; witness {wit}")
    g = q.group
    dirs = _basis_dirs(g)
    nums = q.numerator_table()
    tensor = {}
    for key in product(range(q.n), repeat=k):
        table = iterated_derivative(nums, g, [dirs[i] for i in key], q.M)
        vals = set(np.unique(table))
        if len(vals) != 1:
            raise CertificateError("k-th derivative depends on the base point")
        val = Fraction(int(table[0]), q.M)
        scaled = val * q.q
        if scaled.denominator != 1:
            raise CertificateError("multilinear coefficient not over 2^d")
        lam = int(scaled) % q.q
        if lam:
            tensor[key] = lam
    phi = MultilinearForm(g, k, tensor)
    # spot-check x-independence on non-basis shifts
    if rng is not None:
        for _ in range(x_samples):
            shifts = [g.coords_of(int(rng.integers(g.order))) for _ in range(k)]
            table = iterated_derivative(nums, g, shifts, q.M)
            if len(set(np.unique(table))) != 1:
                raise CertificateError("derivative depends on x at a sample")
            expect = phi.eval(*shifts)
            if TorusValue(Fraction(int(table[0]), q.M)) != expect:
                raise CertificateError("tensor does not reproduce a derivative")
    sym, wit = phi.is_symmetric()
    if not sym:
        raise CertificateError(f"derivative form is not symmetric: {wit}")
    return phi


# -- integration ---------------------------------------------------------------


@dataclass
class Obstruction:
    criterion: str
    witness: object


def integrate_bilinear(beta: MultilinearForm):
    """Quadratic q with Delta_{a,b} q = beta, or a symmetry refutation."""
    if beta.arity != 2:
        raise InputError("expected a bilinear form")
    sym, wit = beta.is_symmetric()
    if not sym:
        return Obstruction("symmetry", wit)
    quad_diag = {}
    quad_off = {}
    for (i, j), lam in beta.tensor.items():
        if i == j:
            quad_diag[i] = lam % beta.q
        elif i < j:
            quad_off[(i, j)] = lam % beta.q
    return PolyPhase(beta.group, quad_diag=quad_diag, quad_off=quad_off)


def verify_integration(q: PolyPhase, phi: MultilinearForm,
                       budget: int = 10**7, rng=None, samples: int = 10**4):
    """Delta^k q = phi on all tuples (exhaustive when |G|^(k+1) fits the
    budget, sampled otherwise).  Vectorized exact integer arithmetic."""
    g = q.group
    k = phi.arity
    n_tuples = g.order ** (k + 1)
    nums = q.numerator_table()
    if n_tuples <= budget:
        shift_iter = product(range(g.order), repeat=k)
    else:
        if rng is None:
            raise BudgetError("need rng for sampled verification")
        shift_iter = (
            tuple(int(v) for v in rng.integers(0, g.order, size=k))
            for _ in range(samples)
        )
    for shifts_idx in shift_iter:
        shifts = [g.coords_of(i) for i in shifts_idx]
        table = iterated_derivative(nums, g, shifts, q.M)
        expect = phi.eval(*shifts)
        want = (expect - q.const * 0).as_fraction() if False else expect
        # all x at once: table must be constant and equal to expect
        uniq = np.unique(table)
        if len(uniq) != 1:
            return False, (shifts, "not constant in x")
        got = TorusValue(Fraction(int(uniq[0]), q.M))
        if got != expect:
            return False, (shifts, got, expect)
    return True, None


def _half_bilinear_symmetric(phi: MultilinearForm):
    """Is psi(a, b) = 2^(d-1) phi(a, a, b) a symmetric bilinear map?

    Characterized by the parity condition lambda_{iij} = lambda_{jji} mod 2.
    Additivity of psi in a holds automatically since 2^d phi vanishes; it is
    still checked on basis pairs.
    """
    q = phi.q
    half = q // 2
    n = phi.n
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            tij = phi.coefficient((i, i, j))
            tji = phi.coefficient((j, j, i))
            if (tij - tji) % 2 != 0:
                return False, (i, j)
    return True, None


def integrate_trilinear(phi: MultilinearForm, budget: int = 10**7, rng=None):
    """Cubic q with Delta_{a,b,c} q = phi, or a structured obstruction.

    Checks the two criteria (full symmetry; 2^(d-1) phi(a,a,b) symmetric
    bilinear) and solves the triangular coefficient system: the parity of
    lambda_{iij} fixes the mixed-monomial corrections.  The construction is
    verified before being returned.
    """
    if phi.arity != 3:
        raise InputError("expected a trilinear form")
    sym, wit = phi.is_symmetric()
    if not sym:
        return Obstruction("symmetry", wit)
    ok, wit = _half_bilinear_symmetric(phi)
    if not ok:
        return Obstruction("half-bilinear-symmetry", wit)
    q_mod = phi.q
    cubic_diag = {}
    cubic_mixed = {}
    cubic_sq = {}
    cubic_triple = {}
    n = phi.n
    for i in range(n):
        lam = phi.coefficient((i, i, i))
        if lam:
            cubic_diag[i] = lam
    for i, j in combinations(range(n), 2):
        tij = phi.coefficient((i, i, j))
        tji = phi.coefficient((j, j, i))
        mu = tij % 2
        if mu:
            cubic_mixed[(i, j)] = mu
        sij = ((tij - mu) * pow(2, -1, q_mod // 2) if False else (tij - mu) // 2) % (q_mod // 2)
        sji = ((tji - mu) // 2) % (q_mod // 2)
        if sij:
            cubic_sq[(i, j)] = sij
        if sji:
            cubic_sq[(j, i)] = sji
    for i, j, k in combinations(range(n), 3):
        lam = phi.coefficient((i, j, k))
        if lam:
            cubic_triple[(i, j, k)] = lam
    q = PolyPhase(
        phi.group,
        cubic_diag=cubic_diag,
        cubic_mixed=cubic_mixed,
        cubic_sq=cubic_sq,
        cubic_triple=cubic_triple,
    )
    ok, wit = verify_integration(q, phi, budget=budget, rng=rng)
    if not ok:
        raise CertificateError(f"trilinear integration verification failed: {wit}")
    return q


def exhaustive_integration_oracle(phi: MultilinearForm, budget: int = 10**7):
    """Search the whole cubic coefficient space for an antiderivative.

    Only feasible for n = 1; used to cross-validate the solver's verdict.
    Returns a PolyPhase or None.
    """
    if phi.n != 1:
        raise BudgetError("oracle implemented for n = 1 only")
    g = phi.group
    q_mod = phi.q
    for lam3 in range(4 * q_mod):
        for lam2 in range(2 * q_mod):
            for lam1 in range(q_mod):
                q = PolyPhase(
                    g,
                    cubic_diag={0: lam3} if lam3 else None,
                    quad_diag={0: lam2} if lam2 else None,
                    linear={0: lam1} if lam1 else None,
                )
                ok, _ = verify_integration(q, phi, budget=budget)
                if ok:
                    return q
    return None


# -- biased trilinear forms ----------------------------------------------------


def trilinear_bias(phi: MultilinearForm) -> Fraction:
    """E e(phi) over G^3, exactly, via kernel counting.

    For fixed (x, y) the inner sum over z vanishes unless every contraction
    c_k(x, y) = sum_ij lambda_{ijk} x_i y_j is 0 mod 2^d, so the bias is the
    rational count of such pairs.
    """
    g = phi.group
    q = phi.q
    n = phi.n
    count = 0
    for xi in range(g.order):
        x = g.coords_of(xi)
        for yi in range(g.order):
            y = g.coords_of(yi)
            good = True
            for k in range(n):
                acc = 0
                for (i, j, kk), lam in phi.tensor.items():
                    if kk == k:
                        acc += lam * x[i] * y[j]
                if acc % q:
                    good = False
                    break
            if good:
                count += 1
    return Fraction(count, g.order**2)


def _all_f2_subspaces(elements: list, add_fn):
    """All subgroups of an elementary abelian 2-group given as element list."""
    spans = {frozenset([elements[0]])}  # elements[0] must be the zero
    zero = elements[0]
    frontier = [frozenset([zero])]
    while frontier:
        new = []
        for span in frontier:
            for e in elements:
                if e in span:
                    continue
                grown = set(span)
                for s in list(span):
                    grown.add(add_fn(s, e))
                grown = frozenset(grown)
                if grown not in spans:
                    spans.add(grown)
                    new.append(grown)
        frontier = new
    return spans


def trilinear_bias_subgroup(phi: MultilinearForm, c: float,
                            cap: int = DEFAULT_ENUMERATION_CAP):
    """Subgroup H with phi = 0 on H^3, when the bias E e(phi) is >= c.

    Follows the recursion: pass to 2 phi on the quotient by 2^(d-1) G, then
    the characteristic-2 base case by exhaustive subspace search.  H is
    verified exhaustively; its density is reported, not asserted (the
    constants in the statement are implicit).
    """
    from .errors import NoWitness

    bias = trilinear_bias(phi)
    if bias < c:
        return NoWitness("trilinear bias below threshold", measured=float(bias))
    H = _bias_subgroup_rec(phi)
    g = phi.group
    for trip in product(H, repeat=3):
        if phi.eval(*trip) != TorusValue(0):
            raise CertificateError("phi does not vanish on the found subgroup")
    return {
        "subgroup": sorted(H, key=g.index_of),
        "density": Fraction(len(H), g.order),
        "bias": bias,
    }


def _bias_subgroup_rec(phi: MultilinearForm) -> set:
    g = phi.group
    q = phi.q
    n = phi.n
    if q == 2:
        # base case: exhaustive subspace search over F_2^n
        elements = [g.coords_of(i) for i in range(g.order)]
        best = {elements[0]}
        for span in _all_f2_subspaces(elements, g.add):
            if len(span) <= len(best):
                continue
            if all(
                phi.eval(a, b, c) == TorusValue(0)
                for a in span for b in span for c in span
            ):
                best = set(span)
        return best

    d = phi.d
    quot = FinAbGroup([q // 2] * n)
    theta = MultilinearForm(
        quot, 3, {k: v % (q // 2) for k, v in phi.tensor.items()}
    )
    U_bar = _bias_subgroup_rec(theta)
    # U' = preimage of U_bar under reduction mod 2^(d-1)
    half = q // 2
    U_prime = [
        g.coords_of(i)
        for i in range(g.order)
        if tuple(c % half for c in g.coords_of(i)) in U_bar
    ]
    U_set = set(U_prime)
    two_U = {g.scale(2, u) for u in U_prime}
    # classes of U' / 2U'
    class_of = {}
    reps = []
    for u in sorted(U_prime, key=g.index_of):
        if u in class_of:
            continue
        reps.append(u)
        for t in two_U:
            class_of[g.add(u, t)] = u

    def class_add(a, b):
        return class_of[g.add(a, b)]

    best = {reps[0]} if reps else set()
    zero_rep = class_of[(0,) * g.rank]
    ordered = [zero_rep] + [r for r in reps if r != zero_rep]
    for span in _all_f2_subspaces(ordered, class_add):
        if len(span) <= len(best):
            continue
        if all(
            phi.eval(a, b, cc) == TorusValue(0)
            for a in span for b in span for cc in span
        ):
            best = set(span)
    return {u for u in U_set if class_of[u] in best}
