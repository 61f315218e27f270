"""Bohr sets: exact membership, enumeration, size bounds, weak and Bourgain
regularity, bump-function spectral approximation, and subgroup generation.

Membership is decided by exact rational comparison (radii are Fractions),
so enumeration is deterministic and fixtures are bit-stable.  Spectral
quantities (bump Fourier coefficients, approximants) are double precision.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .config import DEFAULT_ENUMERATION_CAP
from .errors import (
    BudgetError,
    CertificateError,
    InputError,
    PreconditionError,
    RetryableError,
    SearchExhaustedError,
)
from .group import Character, FinAbGroup, GroupElement, subgroup_closure
from .fourier import GroupFn, dft

# truncation constant in the spectrum approximation; the source argument
# gives 4e, pinned here as an integer
C_SPEC = 11


@lru_cache(maxsize=64)
def coords_matrix(group: FinAbGroup) -> np.ndarray:
    """(order, rank) int64 matrix of all coordinate tuples in index order."""
    if group.order > DEFAULT_ENUMERATION_CAP:
        raise BudgetError("group too large for a dense coordinate matrix")
    n, d = group.order, group.rank
    out = np.zeros((n, d), dtype=np.int64)
    for j, (q, s) in enumerate(zip(group.invariant_factors, group._strides)):
        out[:, j] = (np.arange(n) // s) % q
    return out


def char_value_numerators(group: FinAbGroup, chi: Character) -> np.ndarray:
    """chi(x) for every x, as integer numerators over Q = exponent(G)."""
    Q = group.exponent
    if group.rank == 0:
        return np.zeros(1, dtype=np.int64)
    weights = np.array(
        [(c * (Q // q)) % Q for c, q in zip(chi.coords, group.invariant_factors)],
        dtype=np.int64,
    )
    return (coords_matrix(group) @ weights) % Q


def _norm_leq(values: np.ndarray, Q: int, radius: Fraction) -> np.ndarray:
    """Boolean mask of ||v/Q||_T <= radius, exact integer comparisons."""
    num, den = radius.numerator, radius.denominator
    if num * 2 >= den:  # radius >= 1/2 covers the whole torus
        return np.ones(len(values), dtype=bool)
    rhs = num * Q
    return (values * den <= rhs) | ((Q - values) * den <= rhs)


class BohrSet:
    """B(Gamma; rho) with per-character exact rational radii."""

    __slots__ = ("group", "freqs", "radii", "_indices")

    def __init__(self, group: FinAbGroup, freqs: Sequence[Character], radii):
        freqs = tuple(freqs)
        for chi in freqs:
            if chi.group != group:
                raise InputError("frequency from a different group")
        if isinstance(radii, (Fraction, int, str)):
            radii = [Fraction(radii)] * len(freqs)
        radii = tuple(Fraction(r) for r in radii)
        if len(radii) != len(freqs):
            raise InputError("one radius per frequency required")
        for r in radii:
            if r < 0 or r >= 1:
                raise InputError("radii must lie in [0, 1)")
        object.__setattr__(self, "group", group)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "_indices", None)

    def __setattr__(self, *a):
        raise AttributeError("BohrSet is immutable")

    @property
    def codimension(self) -> int:
        return len(self.freqs)

    def radius_map(self) -> dict:
        return dict(zip(self.freqs, self.radii))

    def contains(self, x: GroupElement) -> bool:
        if x.group != self.group:
            raise InputError("membership query from a different group")
        for chi, rho in zip(self.freqs, self.radii):
            if chi.eval_coords(x.coords).norm() > rho:
                return False
        return True

    def member_mask(self) -> np.ndarray:
        Q = self.group.exponent
        mask = np.ones(self.group.order, dtype=bool)
        for chi, rho in zip(self.freqs, self.radii):
            mask &= _norm_leq(char_value_numerators(self.group, chi), Q, rho)
        return mask

    def indices(self) -> np.ndarray:
        if self._indices is None:
            object.__setattr__(
                self, "_indices", np.nonzero(self.member_mask())[0]
            )
        return self._indices

    def size(self) -> int:
        return int(len(self.indices()))

    def elements(self) -> list:
        g = self.group
        return [GroupElement(g, g.coords_of(int(i))) for i in self.indices()]

    def element_set(self) -> set:
        g = self.group
        return {g.coords_of(int(i)) for i in self.indices()}

    def scaled(self, factor) -> "BohrSet":
        """Dilate: every radius multiplied by ``factor`` (capped below 1)."""
        factor = Fraction(factor)
        radii = [min(r * factor, Fraction(1, 2)) for r in self.radii]
        return BohrSet(self.group, self.freqs, radii)

    def with_radii(self, radii) -> "BohrSet":
        return BohrSet(self.group, self.freqs, radii)

    def __repr__(self):
        rads = ",".join(str(r) for r in self.radii)
        return f"BohrSet(codim={self.codimension}, radii=[{rads}])"


def bohr_size_bounds(B: BohrSet, cap: int = DEFAULT_ENUMERATION_CAP):
    """(|B|, prod(rho) |G|, |B(2 rho)|, 4^codim |B|) with both inequalities
    checked exactly."""
    if B.group.order > cap:
        raise BudgetError("size bounds need full enumeration")
    size = B.size()
    lower = Fraction(B.group.order)
    for r in B.radii:
        lower *= r
    doubled = B.with_radii([min(2 * r, Fraction(1, 2)) for r in B.radii]).size()
    upper = 4 ** B.codimension * size
    if size < lower:
        raise CertificateError("Bohr lower size bound failed")
    if doubled > upper:
        raise CertificateError("Bohr doubling bound failed")
    return size, lower, doubled, upper


def almost_full_difference_check(A: Sequence[GroupElement], B: BohrSet) -> bool:
    """Does A - A cover B(Gamma; rho/2)?  Requires the density precondition."""
    k = B.codimension
    need = (1 - Fraction(1, 4 ** (k + 1))) * B.size()
    if len(A) < need:
        raise PreconditionError(
            f"|A| = {len(A)} below the density threshold {float(need):.2f}"
        )
    a_set = {a.coords for a in A}
    g = B.group
    half = B.scaled(Fraction(1, 2))
    for x in half.elements():
        if not any(g.add(a, x.coords) in a_set for a in a_set):
            return False
    return True


def char_separation(
    S: Sequence[GroupElement],
    rng: np.random.Generator,
    retries: int = 5,
    cap: int = DEFAULT_ENUMERATION_CAP,
):
    """Frequency set Gamma with the translates s + B(Gamma, 1/10) disjoint.

    Randomized halving with |Gamma| <= ceil(log2 |S|^2) + retries rounds; an
    exhaustive character search backstops tiny groups.  Disjointness is
    verified exactly before returning.
    """
    S = list(S)
    if len(S) < 2:
        return []
    group = S[0].group
    if len({s.coords for s in S}) != len(S):
        raise PreconditionError("separation input has repeated elements")
    pairs = [
        (S[i].coords, S[j].coords) for i in range(len(S)) for j in range(i + 1, len(S))
    ]
    diffs = {p: group.sub(p[0], p[1]) for p in pairs}
    fifth = Fraction(1, 5)
    gamma: list = []
    unseparated = set(pairs)
    max_rounds = math.ceil(math.log2(len(S) ** 2)) + retries
    while unseparated and len(gamma) < max_rounds:
        best = None
        for _ in range(retries):
            chi = Character(group, group.coords_of(int(rng.integers(group.order))))
            removed = {
                p for p in unseparated
                if chi.eval_coords(diffs[p]).norm() > fifth
            }
            if best is None or len(removed) > len(best[1]):
                best = (chi, removed)
            if 2 * len(removed) >= len(unseparated):
                break
        if not best[1] and group.order <= 10**5:
            # exhaustive fallback for tiny duals
            for ci in range(group.order):
                chi = Character(group, group.coords_of(ci))
                removed = {
                    p for p in unseparated
                    if chi.eval_coords(diffs[p]).norm() > fifth
                }
                if len(removed) > len(best[1]):
                    best = (chi, removed)
                if 2 * len(removed) >= len(unseparated):
                    break
        if not best[1]:
            raise RetryableError("char_separation made no progress; reseed")
        gamma.append(best[0])
        unseparated -= best[1]
    if unseparated:
        raise RetryableError("char_separation retry budget exhausted")
    B = BohrSet(group, gamma, Fraction(1, 10))
    diff_set = {
        group.sub(a, b) for a in B.element_set() for b in B.element_set()
    }
    for p in pairs:
        if diffs[p] in diff_set:
            raise CertificateError("separation verification failed")
    return gamma


def _norm_value_grid(order: int) -> list:
    """Attainable torus norms of a character of the given order."""
    return [Fraction(j, order) for j in range(order // 2 + 1)]


def _snap_interval(order: int, rho: Fraction):
    """[a, b) between attainable norms with a <= rho < b."""
    grid = _norm_value_grid(order)
    a = max(v for v in grid if v <= rho)
    larger = [v for v in grid if v > rho]
    b = min(larger) if larger else Fraction(1)
    return a, b


def weak_regularize_fn(B: BohrSet, eps: Fraction, eta: Fraction):
    """Radius function rho' with B unchanged and a thin annulus.

    Snaps the radius of every low-order frequency away from the attainable
    norm values; high-order frequencies keep their radius.  Returns the new
    radius tuple; the caller gets the certified inequality
    |B(rho'+eta) \\ B(rho'-eta)| <= eps |G| (verified here).
    """
    eps, eta = Fraction(eps), Fraction(eta)
    d = max(B.codimension, 1)
    if eta > eps / (8 * d):
        raise PreconditionError("eta must be at most eps / 8d")
    K = Fraction(4 * d) / eps
    new_radii = []
    for chi, rho in zip(B.freqs, B.radii):
        s = chi.order()
        if s > K:
            new_radii.append(rho)
            continue
        a, b = _snap_interval(s, rho)
        if rho <= a + eta:
            new_radii.append(rho + eta)
        elif rho >= b - eta:
            new_radii.append(rho - eta)
        else:
            new_radii.append(rho)
    B2 = B.with_radii(new_radii)
    if not np.array_equal(B.member_mask(), B2.member_mask()):
        raise CertificateError("weak regularization changed the Bohr set")
    outer = B2.with_radii([r + eta for r in new_radii])
    inner = B2.with_radii([max(r - eta, Fraction(0)) for r in new_radii])
    annulus = outer.size() - inner.size()
    if annulus > eps * B.group.order:
        raise CertificateError("weak regularity annulus bound failed")
    return tuple(new_radii)


def weak_regularize_const(B: BohrSet, eps: Fraction, eta: Fraction) -> Fraction:
    """Single radius rho' in [rho-eta, rho+eta] with a thin annulus."""
    eps, eta = Fraction(eps), Fraction(eta)
    d = max(B.codimension, 1)
    if eta > (eps / (8 * d)) ** 2:
        raise PreconditionError("eta must be at most (eps / 8d)^2")
    rhos = set(B.radii)
    if len(rhos) != 1:
        raise PreconditionError("constant-radius regularization needs one radius")
    rho = rhos.pop()
    K = Fraction(4 * d) / eps
    lows = [chi for chi in B.freqs if chi.order() <= K]
    if lows:
        snaps = [_snap_interval(chi.order(), rho) for chi in lows]
        a = max(s[0] for s in snaps)
        b = min(s[1] for s in snaps)
        if rho < a + eta:
            rho_p = a + eta
        elif rho > b - eta:
            rho_p = b - eta
        else:
            rho_p = rho
    else:
        rho_p = rho
    outer = B.with_radii([rho_p + eta] * B.codimension)
    inner = B.with_radii([max(rho_p - eta, Fraction(0))] * B.codimension)
    if outer.size() - inner.size() > eps * B.group.order:
        raise CertificateError("constant weak regularity annulus bound failed")
    return rho_p


# -- bump functions --------------------------------------------------------


class BumpFn:
    """Trapezoid b_{rho,eta}: 1 on [-rho, rho], linear ramp of width eta."""

    __slots__ = ("rho", "eta")

    def __init__(self, rho: float, eta: float):
        if eta <= 0:
            raise InputError("ramp width eta must be positive")
        self.rho = float(rho)
        self.eta = float(eta)

    def __call__(self, x: float) -> float:
        t = abs(x - round(x))  # torus distance from 0
        if t <= self.rho:
            return 1.0
        if t >= self.rho + self.eta:
            return 0.0
        return (self.rho + self.eta - t) / self.eta

    def fourier(self, xi: int) -> float:
        """b_hat(xi), in closed form via the interval-convolution identity."""
        if xi == 0:
            return 2 * self.rho + self.eta
        s1 = math.sin(2 * math.pi * xi * (self.rho + self.eta / 2))
        s2 = math.sin(math.pi * xi * self.eta)
        return s1 * s2 / (self.eta * math.pi**2 * xi**2)

    def fourier_bound(self, xi: int) -> float:
        if xi == 0:
            raise InputError("the decay bound concerns nonzero frequencies")
        return 1.0 / (self.eta * xi * xi)

    def truncation_error(self, L: int) -> float:
        """Sup-norm bound for dropping frequencies outside [-L, L]."""
        return 2.0 / (self.eta * L)

    def partial_sum(self, x: float, L: int) -> float:
        xs = np.arange(-L, L + 1)
        coeffs = np.array([self.fourier(int(k)) for k in xs])
        return float(np.real(np.sum(coeffs * np.exp(2j * math.pi * xs * x))))


def bump_fourier(b: BumpFn, xi: int) -> float:
    """Fourier coefficient with the decay bound asserted for xi != 0."""
    val = b.fourier(xi)
    if xi != 0 and abs(val) > b.fourier_bound(xi) + 1e-15:
        raise CertificateError("bump coefficient decay bound failed")
    return val


# -- spectrum of Bohr sets --------------------------------------------------


def spectrum_K_required(r: int, eps: float, eta: float) -> int:
    return math.ceil(C_SPEC * r / (eps * eta))


def _s_values_on_subgroup(b: BumpFn, L: int, m: int) -> np.ndarray:
    """s(t/m) for t in [0, m): the truncated bump series on (1/m) Z / Z.

    Folds the coefficient window [-L, L] modulo m, then one inverse FFT.
    Exactly equal (up to roundoff) to summing the window term by term.
    """
    lam = np.arange(-L, L + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        s1 = np.sin(2 * math.pi * lam * (b.rho + b.eta / 2))
        s2 = np.sin(math.pi * lam * b.eta)
        coeffs = s1 * s2 / (b.eta * math.pi**2 * lam.astype(float) ** 2)
    coeffs[L] = 2 * b.rho + b.eta
    folded = np.zeros(m, dtype=float)
    np.add.at(folded, lam % m, coeffs)
    return np.fft.ifft(folded) * m


def bohr_spectrum_approx(
    group: FinAbGroup,
    gammas: Sequence[Character],
    rhos: Sequence[Fraction],
    eta: Fraction,
    eps: float,
    Ls: Sequence[int],
    taus: Sequence[Character],
    lattice_path_cap: int = 200_000,
):
    """Exact Fourier coefficients of 1_B against the bump-product approximant.

    Requires the weak-regularity hypothesis |B(rho+eta) \\ B(rho)| <= eps|G|/2
    (checked exactly) and L_i >= K = C_SPEC r / (eps eta).  Returns one row
    per tau: (tau, exact, approx, gap).

    The approximant is the boxed lattice sum
    sum_{lambda in prod [-L_i, L_i]} 1(sum lambda_i gamma_i = tau)
    prod b_hat_i(lambda_i); it is evaluated through the character-sum
    identity for the indicator (fold + FFT), which reproduces the box sum
    exactly up to roundoff.  When the annihilator-lattice point count fits
    ``lattice_path_cap`` the literal lattice enumeration is used instead.
    """
    r = len(gammas)
    if r == 0:
        raise InputError("need at least one frequency")
    rhos = [Fraction(x) for x in rhos]
    eta = Fraction(eta)
    B = BohrSet(group, gammas, rhos)
    outer = B.with_radii([x + eta for x in rhos])
    if outer.size() - B.size() > Fraction(eps) * group.order / 2:
        raise PreconditionError("weak-regularity hypothesis fails for this eta")
    K = spectrum_K_required(r, float(eps), float(eta))
    for L in Ls:
        if L < K:
            raise PreconditionError(f"L = {L} below required K = {K}")

    bumps = [BumpFn(float(rho), float(eta)) for rho in rhos]
    orders = [chi.order() for chi in gammas]

    # g(x) = prod_i s_i(gamma_i(x)) via per-frequency folded series
    Q = group.exponent
    g = np.ones(group.order, dtype=complex)
    for chi, b, L, m in zip(gammas, bumps, Ls, orders):
        vals = char_value_numerators(group, chi)  # numerators over Q
        t = vals // (Q // m) if m > 0 else vals
        g *= _s_values_on_subgroup(b, L, m)[t]
    ghat = dft(GroupFn(group, g)).coefficients

    indicator = np.zeros(group.order)
    indicator[B.indices()] = 1.0
    exact_hat = dft(GroupFn(group, indicator)).coefficients

    # optional literal box-sum path for small problems
    lattice = None
    total_points = 1.0
    for L, m in zip(Ls, orders):
        total_points *= (2 * L + 1) / m
    use_lattice = total_points <= lattice_path_cap and r <= 2
    if use_lattice:
        from .lattice import AnnihilatorLattice

        lattice = AnnihilatorLattice(gammas)

    rows = []
    for tau in taus:
        exact = complex(exact_hat[tau.index])
        approx = complex(ghat[tau.index])
        if use_lattice:
            approx_box = _lattice_box_sum(lattice, tau, bumps, Ls)
            if abs(approx_box - approx) > 1e-6:
                raise CertificateError(
                    "lattice and character-sum approximants disagree"
                )
            approx = approx_box
        rows.append((tau, exact, approx, abs(exact - approx)))
    return rows


def _lattice_box_sum(lattice, tau: Character, bumps, Ls):
    sol = lattice.solve(tau)
    if sol is None:
        return 0j
    basis = lattice.basis
    r = lattice.rank
    total = 0.0
    if r == 1:
        step = basis[0][0]
        lo = math.ceil((-Ls[0] - sol[0]) / step)
        hi = math.floor((Ls[0] - sol[0]) / step)
        for i in range(lo, hi + 1):
            lam = sol[0] + i * step
            total += bumps[0].fourier(lam)
        return complex(total)
    if r == 2:
        (b11, b12), (b21, b22) = basis
        if b21 != 0:
            raise CertificateError("expected a triangular lattice basis")
        lo1 = math.ceil((-Ls[0] - sol[0]) / b11)
        hi1 = math.floor((Ls[0] - sol[0]) / b11)
        for i in range(lo1, hi1 + 1):
            l1 = sol[0] + i * b11
            base2 = sol[1] + i * b12
            lo2 = math.ceil((-Ls[1] - base2) / b22)
            hi2 = math.floor((Ls[1] - base2) / b22)
            c1 = bumps[0].fourier(l1)
            for j in range(lo2, hi2 + 1):
                total += c1 * bumps[1].fourier(base2 + j * b22)
        return complex(total)
    raise BudgetError("literal lattice path implemented for r <= 2")


# -- Bourgain regularity -----------------------------------------------------


def _dilate_profile(B: BohrSet) -> list:
    """Sorted minimal dilation factors m(x) = max_i ||chi_i(x)|| / rho_i."""
    Q = B.group.exponent
    profile = [Fraction(0)] * B.group.order
    for chi, rho in zip(B.freqs, B.radii):
        if rho == 0:
            raise PreconditionError("zero radius has no regular dilate")
        vals = char_value_numerators(B.group, chi)
        norms = np.minimum(vals, Q - vals)
        for i, v in enumerate(norms):
            m = Fraction(int(v), Q) / rho
            if m > profile[i]:
                profile[i] = m
    return sorted(profile)


def bourgain_regular_dilate(
    B: BohrSet,
    grid_step: Optional[Fraction] = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> Fraction:
    """delta in [1/2, 1] whose dilate passes the regularity sandwich on a grid.

    Regularity of B_delta is checked at test dilations kappa with
    |kappa| <= 1/(100 d), kappa on a grid of the given step (default
    1/(1000 d)):  |B_{delta(1 +/- kappa)}| within the 1 +/- 100 d kappa
    sandwich.  Raises SearchExhaustedError when no grid point passes
    (pathological tiny groups).
    """
    if B.group.order > cap:
        raise BudgetError("regular dilate search needs full enumeration")
    d = max(B.codimension, 1)
    if B.codimension == 0:
        return Fraction(1, 2)
    step = Fraction(grid_step) if grid_step else Fraction(1, 1000 * d)
    profile = _dilate_profile(B)

    def count(sigma: Fraction) -> int:
        return bisect_right(profile, sigma)

    kappas = []
    k = step
    while k <= Fraction(1, 100 * d):
        kappas.append(k)
        k += step
    deltas = []
    delta = Fraction(1, 2)
    while delta <= 1:
        deltas.append(delta)
        delta += step
    for delta in deltas:
        base = count(delta)
        if base == 0:
            continue
        ok = True
        for kappa in kappas:
            up = count(delta * (1 + kappa))
            down = count(delta * (1 - kappa))
            if up > (1 + 100 * d * kappa) * base or down < (1 - 100 * d * kappa) * base:
                ok = False
                break
        if ok:
            return delta
    raise SearchExhaustedError("no regular dilate found on the grid")


def is_regular_dilate(B: BohrSet, delta: Fraction, grid_step=None) -> bool:
    try:
        found = bourgain_regular_dilate(B, grid_step=grid_step)
    except SearchExhaustedError:
        return False
    d = max(B.codimension, 1)
    profile = _dilate_profile(B)

    def count(sigma):
        return bisect_right(profile, sigma)

    base = count(Fraction(delta))
    if base == 0:
        return False
    step = Fraction(grid_step) if grid_step else Fraction(1, 1000 * d)
    kappa = step
    while kappa <= Fraction(1, 100 * d):
        if count(Fraction(delta) * (1 + kappa)) > (1 + 100 * d * kappa) * base:
            return False
        if count(Fraction(delta) * (1 - kappa)) < (1 - 100 * d * kappa) * base:
            return False
        kappa += step
    return True


# -- subgroup generation -----------------------------------------------------


def bohr_generated_subgroup(B: BohrSet, cap: int = DEFAULT_ENUMERATION_CAP):
    """<B> with iterated-sum witnesses x_1 + 2 x_2 + ... + 2^{r-1} x_r.

    Returns a dict with the subgroup elements, the witness map (target
    coords -> list of B-element coords), and the number of weighted levels r
    used.  Witnesses are produced at least for all of B(Gamma, rho/2).
    """
    group = B.group
    members = B.elements()
    if not members:
        raise CertificateError("a Bohr set always contains 0")
    subgroup = subgroup_closure(members, cap=cap)
    sub_set = {g.coords for g in subgroup}

    half_set = B.scaled(Fraction(1, 2)).element_set()
    member_coords = [m.coords for m in members]

    # level 1: single elements of B; higher levels add 2^{level-1} b
    parents = {c: (None, c, 1) for c in member_coords}
    reached = set(member_coords)
    r = 1
    max_r = 2 * max(1, group.order).bit_length() + 4
    while r < max_r and reached != sub_set:
        weight = 1 << r
        new = {}
        for base in reached:
            for b in member_coords:
                target = group.add(base, group.scale(weight, b))
                if target not in reached and target not in new:
                    new[target] = (base, b, r + 1)
        if not new:
            break
        parents.update(new)
        reached |= set(new)
        r += 1

    if not half_set <= reached:
        raise CertificateError("B(rho/2) not covered by iterated sums of B")

    zero = (0,) * group.rank

    def witness(target_coords):
        """Decomposition [x_1, ..., x_r] with target = sum 2^{i-1} x_i."""
        base, step, level = parents[target_coords]
        if base is None:
            return [step]
        chain = witness(base)
        chain += [zero] * (level - 1 - len(chain))
        chain.append(step)
        return chain

    witnesses = {c: witness(c) for c in sorted(half_set, key=group.index_of)}
    # verify the decompositions
    for tgt, chain in witnesses.items():
        acc = (0,) * group.rank
        for i, x in enumerate(chain):
            acc = group.add(acc, group.scale(1 << i, x))
        if acc != tgt:
            raise CertificateError("iterated-sum witness failed to recompose")
    return {
        "subgroup": subgroup,
        "covered": reached == sub_set,
        "witnesses": witnesses,
        "levels": r,
    }
