"""Bilinear Bohr varieties, directional difference set operators,
Freiman-bihomomorphism checks, arrangements, and quasirandomness statistics.

Point sets in G1 x G2 are plain sets of (coords1, coords2) pairs; column
maps of a variety are explicit tables, validated for Freiman-linearity at
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Callable, Optional, Sequence

import numpy as np

from .config import DEFAULT_ENUMERATION_CAP
from .errors import BudgetError, CertificateError, InputError, PreconditionError
from .group import Character, FinAbGroup, GroupElement, TorusValue
from .bohr import BohrSet
from .fourier import box_norm


# -- directional difference operators -----------------------------------------


def d_hor(A: set, group1: FinAbGroup) -> set:
    """{(x1 - x2, y) : (x1, y), (x2, y) in A}."""
    rows = {}
    for x, y in A:
        rows.setdefault(y, []).append(x)
    out = set()
    for y, xs in rows.items():
        for x1 in xs:
            for x2 in xs:
                out.add((group1.sub(x1, x2), y))
    return out


def d_ver(A: set, group2: FinAbGroup) -> set:
    """{(x, y1 - y2) : (x, y1), (x, y2) in A}."""
    cols = {}
    for x, y in A:
        cols.setdefault(x, []).append(y)
    out = set()
    for x, ys in cols.items():
        for y1 in ys:
            for y2 in ys:
                out.add((x, group2.sub(y1, y2)))
    return out


def apply_word(
    word: str, A: set, group1: FinAbGroup, group2: FinAbGroup,
    budget: int = DEFAULT_ENUMERATION_CAP,
) -> set:
    """Apply a word of 'h'/'v' operators left-to-right."""
    cur = set(A)
    for ch in word.lower():
        if len(cur) > budget:
            raise BudgetError("difference-set word blew the budget")
        if ch == "h":
            cur = d_hor(cur, group1)
        elif ch == "v":
            cur = d_ver(cur, group2)
        else:
            raise InputError(f"unknown operator {ch!r} in word")
    return cur


# -- bihomomorphism checks ----------------------------------------------------


@dataclass
class BiMap:
    """Map from an explicit subset of G1 x G2 into a value group."""

    group1: FinAbGroup
    group2: FinAbGroup
    table: dict  # (coords1, coords2) -> value

    def __post_init__(self):
        self.table = {(tuple(k[0]), tuple(k[1])): v for k, v in self.table.items()}

    @property
    def domain(self) -> set:
        return set(self.table)

    def __call__(self, x, y):
        return self.table[(tuple(x), tuple(y))]


def _directional_quadruples(points_by_line: dict, group: FinAbGroup, budget: int):
    """(p1, p2, p3, p4) line-indexed additive quadruples."""
    for line, members in points_by_line.items():
        if len(members) ** 3 > budget:
            raise BudgetError("directional quadruple enumeration over budget")
        mem_set = set(members)
        for a in members:
            for b in members:
                s = group.add(a, b)
                for c in members:
                    d = group.sub(s, c)
                    if d in mem_set:
                        yield line, a, b, c, d


def bihom_check(phi: BiMap, E=None, budget: int = DEFAULT_ENUMERATION_CAP):
    """Exact bihomomorphism verdict in both directions, with witness.

    With E (an ErrorSet) this is the E-bihomomorphism check.  Returns
    (ok, witness) where witness = (direction, line, quadruple, residual).
    """
    rows, cols = {}, {}
    for x, y in phi.domain:
        rows.setdefault(y, []).append(x)
        cols.setdefault(x, []).append(y)

    def respected(residual):
        if E is None:
            zero = residual - residual
            return residual == zero
        return residual in E

    for y, a, b, c, d in _directional_quadruples(rows, phi.group1, budget):
        residual = phi(a, y) + phi(b, y) - phi(c, y) - phi(d, y)
        if not respected(residual):
            return False, ("horizontal", y, (a, b, c, d), residual)
    for x, a, b, c, d in _directional_quadruples(cols, phi.group2, budget):
        residual = phi(x, a) + phi(x, b) - phi(x, c) - phi(x, d)
        if not respected(residual):
            return False, ("vertical", x, (a, b, c, d), residual)
    return True, None


def bohr_respected_check(
    maps: Sequence, quadruple: Sequence, domains: Sequence,
    budget: int = DEFAULT_ENUMERATION_CAP,
):
    """Does phi_{x1} - phi_{x2} + phi_{x3} - phi_{x4} vanish on the
    intersection of the domains?

    ``maps`` are four coords->value tables, ``domains`` four coordinate
    sets; the quadruple itself is only carried for reporting.
    """
    inter = set.intersection(*[set(d) for d in domains])
    if len(inter) > budget:
        raise BudgetError("intersection too large")
    for y in inter:
        val = maps[0][y] - maps[1][y] + maps[2][y] - maps[3][y]
        if val != val - val:
            return False, y
    return True, None


# -- bilinear Bohr varieties ---------------------------------------------------


class BilinearVariety:
    """Column-indexed union of Bohr sets B(Gamma union {Theta_i(x)}, rho).

    Theta maps are explicit tables from the column index set into the dual
    group, validated to respect all additive triples of the index set.
    """

    def __init__(
        self,
        column_index: Sequence,       # coordinate tuples in G1
        group1: FinAbGroup,
        group2: FinAbGroup,
        base_freqs: Sequence[Character],
        thetas: Sequence[dict],       # x coords -> Character of G2
        rho: Fraction,
    ):
        self.group1 = group1
        self.group2 = group2
        self.columns_idx = [tuple(c) for c in column_index]
        self.base_freqs = tuple(base_freqs)
        self.thetas = list(thetas)
        self.rho = Fraction(rho)
        idx_set = set(self.columns_idx)
        for theta in self.thetas:
            for x in idx_set:
                if x not in theta:
                    raise InputError("theta table misses a column index")
            self._check_theta_linear(theta, idx_set)

    def _check_theta_linear(self, theta: dict, idx_set: set):
        for a in idx_set:
            for b in idx_set:
                s = self.group1.add(a, b)
                if s in idx_set:
                    lhs = theta[a] + theta[b]
                    if lhs.coords != theta[s].coords:
                        raise PreconditionError(
                            f"theta violates additivity at {a}, {b}"
                        )

    def column(self, x) -> BohrSet:
        x = tuple(x)
        freqs = list(self.base_freqs) + [theta[x] for theta in self.thetas]
        return BohrSet(self.group2, freqs, self.rho)

    def contains(self, x, y) -> bool:
        return tuple(x) in set(self.columns_idx) and self.column(x).contains(y)


def variety_quasirandomness(
    V: BilinearVariety,
    rho_prime: Fraction,
    t,
    eta: float,
    cap: int = DEFAULT_ENUMERATION_CAP,
):
    """Statistics for the regularity conditions on the piece indexed by t.

    Measures, over columns x (and pairs), the deviation between
    |B(chi, rho') cap B(Theta(x) - chi, rho')| and delta |B(chi, rho')|,
    where chi = Theta(t) and delta is the median column density.  Also
    converts the two statistics into a box-norm quasirandomness certificate
    via the one-sided criterion.
    """
    g2 = V.group2
    t = tuple(t)
    chis = [theta[t] for theta in V.thetas]
    base = BohrSet(g2, list(V.base_freqs) + chis, rho_prime)
    base_idx = base.indices()
    nb = len(base_idx)
    if nb == 0:
        raise PreconditionError("base Bohr set is empty at this radius")
    cols = [c for c in V.columns_idx]
    masks = np.zeros((len(cols), g2.order), dtype=bool)
    for i, x in enumerate(cols):
        freqs = [theta[x] - chi for theta, chi in zip(V.thetas, chis)]
        col = BohrSet(g2, list(V.base_freqs) + chis + freqs,
                      list(base.radii) + [Fraction(rho_prime)] * len(freqs))
        masks[i, col.indices()] = True
    counts = masks.sum(axis=1)
    densities = sorted(counts / nb)
    delta = float(densities[len(densities) // 2])
    dev1 = np.abs(counts - delta * nb)
    frac_i = float(np.mean(dev1 > eta * g2.order))
    inter = masks.astype(np.int64) @ masks.astype(np.int64).T
    dev2 = np.abs(inter - delta * delta * nb)
    frac_ii = float(np.mean(dev2 > eta * g2.order))

    # one-sided criterion: measured eps turns into a box-norm bound
    eps1 = float(np.mean(dev1) / nb)
    eps2 = float(np.mean(dev2) / nb)
    eps = max(eps1, eps2)
    graph = masks[:, base_idx].astype(float)
    density = graph.mean()
    bnorm = box_norm(graph - density)
    onesided_ok = (
        abs(density - delta) <= eps + 1e-9
        and bnorm <= 3 * eps ** 0.125 + 1e-9
    )
    return {
        "delta": delta,
        "frac_i": frac_i,
        "frac_ii": frac_ii,
        "eta": float(eta),
        "eps_onesided": eps,
        "box_norm": float(bnorm),
        "onesided_ok": bool(onesided_ok),
    }


def neighborhood_statistics(
    graph,
    k: int,
    eta: float,
    rng,
    samples: int = 2000,
):
    """Empirical check of the k-fold neighborhood concentration bound.

    ``graph`` is a 0/1 matrix on X x Y.  Measures the box-norm
    quasirandomness eps of graph - density, samples k-tuples of rows, and
    asserts the exceedance probability is at most 4 k eta^-2 eps plus three
    sampling sigmas.
    """
    A = np.asarray(graph, dtype=float)
    nx, ny = A.shape
    density = A.mean()
    eps = box_norm(A - density)
    exceed = 0
    for _ in range(samples):
        rows = rng.integers(0, nx, size=k)
        inter = np.ones(ny, dtype=bool)
        for r in rows:
            inter &= A[r] > 0.5
        if abs(int(inter.sum()) - density**k * ny) >= eta * ny:
            exceed += 1
    p_hat = exceed / samples
    bound = 4 * k * eps / (eta * eta)
    slack = 3 * math.sqrt(0.25 / samples)
    ok = p_hat <= bound + slack
    return {"p_hat": p_hat, "bound": bound, "slack": slack,
            "eps": float(eps), "ok": bool(ok)}


# -- arrangements --------------------------------------------------------------


def arrangements(
    shape: Sequence[int],
    length,
    domain: set,
    group1: FinAbGroup,
    group2: FinAbGroup,
    cap: int = 64,
    budget: int = DEFAULT_ENUMERATION_CAP,
):
    """Enumerate arrangements of the given shape and length inside a domain.

    An empty-shape arrangement is a single point equal to its length; a
    (d_1, ..., d_r)-arrangement of length (l1, l2) is a concatenation of
    d_r blocks whose lengths agree in one coordinate and alternate-sum to
    the other.  Returns the set of point sequences (deduplicated across the
    horizontal and vertical branchings).
    """
    total = 1
    for d in shape:
        total *= d
    if total > cap:
        raise BudgetError("arrangement shape too large")
    length = (tuple(length[0]), tuple(length[1]))
    return _arrangements_rec(tuple(shape), length, frozenset(domain),
                             group1, group2, budget)


def _alternating_tuples(count: int, total, group: FinAbGroup):
    """Tuples (a_1, ..., a_count) with a_1 - a_2 + a_3 - ... = total."""
    if count == 1:
        yield (total,)
        return
    for first in _all_coords(group):
        # a_1 - (a_2 - a_3 + ...) = total; the tail uses the same convention
        tail = group.sub(first, total)
        for rest in _alternating_tuples(count - 1, tail, group):
            yield (first,) + rest


def _all_coords(group: FinAbGroup):
    for i in range(group.order):
        yield group.coords_of(i)


def _arrangements_rec(shape, length, domain, group1, group2, budget):
    if not shape:
        return {(length,)} if length in domain else set()
    d_r = shape[-1]
    inner = shape[:-1]
    l1, l2 = length
    out = set()
    # horizontal: block lengths (a_i, l2), alternating sum of a_i equals l1
    for a_tuple in _alternating_tuples(d_r, l1, group1):
        blocks = []
        feasible = True
        for a in a_tuple:
            sub = _arrangements_rec(inner, (a, l2), domain, group1, group2, budget)
            if not sub:
                feasible = False
                break
            blocks.append(sub)
        if feasible:
            for combo in product(*blocks):
                seq = tuple(p for block in combo for p in block)
                out.add(seq)
                if len(out) > budget:
                    raise BudgetError("arrangement enumeration over budget")
    # vertical: block lengths (l1, b_i)
    for b_tuple in _alternating_tuples(d_r, l2, group2):
        blocks = []
        feasible = True
        for b in b_tuple:
            sub = _arrangements_rec(inner, (l1, b), domain, group1, group2, budget)
            if not sub:
                feasible = False
                break
            blocks.append(sub)
        if feasible:
            for combo in product(*blocks):
                seq = tuple(p for block in combo for p in block)
                out.add(seq)
                if len(out) > budget:
                    raise BudgetError("arrangement enumeration over budget")
    return out


def count_arrangements(shape, length, domain, group1, group2, **kw) -> int:
    return len(arrangements(shape, length, domain, group1, group2, **kw))
