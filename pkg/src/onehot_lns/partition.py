"""Subproblem extraction: random, multivalued and binary partitions.

All three start from the current state and return something a sampler can
solve directly.  The multivalued and binary partitions always keep the
current solution reachable inside the subproblem.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from onehot_lns.potts import PottsInstance, energy, validate_assignment
from onehot_lns.qubo import ClampedQubo, OneHotEncoding, Qubo, clamp_to, group_counts, qubo_energy

__all__ = [
    "grow_connected",
    "grow_region",
    "random_partition",
    "MultivaluedSelection",
    "components_for_budget",
    "select_components",
    "multivalued_subqubo",
    "multivalued_partition",
    "BinarySubproblem",
    "binary_partition",
    "apply_binary_solution",
    "tentative_components",
]


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def grow_connected(indptr, indices, n: int, target: int, rng, restart: bool = False) -> list[int]:
    """Grow a vertex set by adding uniformly random frontier vertices.

    The graph is given in CSR form.  With ``restart`` a new random seed
    vertex is drawn whenever the frontier runs dry before ``target``.
    """
    target = min(target, n)
    inside = np.zeros(n, dtype=bool)
    order: list[int] = []
    frontier: list[int] = []
    where: dict[int, int] = {}

    def add(v):
        inside[v] = True
        order.append(v)
        if v in where:
            k = where.pop(v)
            last = frontier.pop()
            if k < len(frontier):
                frontier[k] = last
                where[last] = k
        for u in indices[indptr[v]:indptr[v + 1]]:
            u = int(u)
            if not inside[u] and u not in where:
                where[u] = len(frontier)
                frontier.append(u)

    add(int(rng.integers(n)))
    while len(order) < target:
        if frontier:
            add(frontier[int(rng.integers(len(frontier)))])
        elif restart:
            rest = np.flatnonzero(~inside)
            add(int(rest[rng.integers(rest.size)]))
        else:
            break
    return order


def grow_region(instance: PottsInstance, target_size: int, seed=None) -> list[int]:
    """Connected set of integer variables grown from a random start."""
    if target_size < 1:
        raise ValueError("target_size must be at least 1")
    indptr, nbr, *_ = instance.adjacency
    return grow_connected(indptr, nbr, instance.num_vars, target_size, _rng(seed))


def random_partition(qubo: Qubo, enc: OneHotEncoding, current, bit_budget: int, seed=None) -> ClampedQubo:
    """Pick ``bit_budget`` bits by random growth over the QUBO graph.

    No attention is paid to the one-hot groups; penalty terms stay in the
    sub-QUBO.
    """
    if bit_budget < 1:
        raise ValueError("bit_budget must be at least 1")
    m = qubo.csr
    bits = grow_connected(m.indptr, m.indices, qubo.num_bits, bit_budget, _rng(seed), restart=True)
    return clamp_to(qubo, current, bits)


@dataclass(frozen=True)
class MultivaluedSelection:
    """Per variable, the components kept free; the current one is listed first."""

    components: dict[int, list[int]]

    @property
    def vars(self) -> list[int]:
        return list(self.components)

    def bits(self, enc: OneHotEncoding) -> np.ndarray:
        return np.array([enc.bit(v, c) for v, cs in self.components.items() for c in cs], dtype=np.int64)

    def num_feasible(self) -> int:
        out = 1
        for cs in self.components.values():
            out *= len(cs)
        return out


def components_for_budget(q: int, region_size: int, bit_budget: int | None) -> int:
    """All components unless the bit budget binds, then the largest fit (>= 2)."""
    if bit_budget is None or region_size * q <= bit_budget:
        return q
    return max(2, min(q, bit_budget // max(region_size, 1)))


def select_components(current, region, q: int, r: int, rng) -> MultivaluedSelection:
    if not 2 <= r <= q:
        raise ValueError(f"components per variable must lie in 2..{q}, got {r}")
    out = {}
    for v in region:
        alpha = int(current[v])
        others = [c for c in range(1, q + 1) if c != alpha]
        picked = rng.choice(others, size=r - 1, replace=False) if r < q else others
        out[int(v)] = [alpha] + [int(c) for c in picked]
    return MultivaluedSelection(out)


def multivalued_subqubo(qubo: Qubo, enc: OneHotEncoding, current, selection: MultivaluedSelection) -> ClampedQubo:
    """Free the selected component bits; freeze the rest at the current state."""
    state = np.zeros(enc.num_bits, dtype=np.uint8)
    state[enc.groups[np.arange(enc.num_vars), np.asarray(current) - 1]] = 1
    return clamp_to(qubo, state, selection.bits(enc))


def multivalued_partition(qubo: Qubo, enc: OneHotEncoding, current, region, r: int,
                          seed=None) -> tuple[MultivaluedSelection, ClampedQubo]:
    """Keep the current component plus ``r - 1`` random others per region variable."""
    current = np.asarray(current, dtype=np.int64)
    if current.size != enc.num_vars or current.min() < 1 or current.max() > enc.q:
        raise ValueError("multivalued partition needs a feasible current assignment")
    if r > enc.q:
        raise ValueError(f"r={r} exceeds q={enc.q}")
    selection = select_components(current, region, enc.q, r, _rng(seed))
    return selection, multivalued_subqubo(qubo, enc, current, selection)


@dataclass(frozen=True, eq=False)
class BinarySubproblem:
    """Penalty-free QUBO over transit bits ``y``.

    ``y[k] = 0`` keeps ``vars[k]`` at ``alpha[k]``; ``y[k] = 1`` moves it to
    ``beta[k]``.  ``reduced`` has zero offset, and
    ``qubo_energy(reduced, y) + offset_full`` is the Potts energy after
    applying ``y``.
    """

    vars: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    reduced: Qubo
    offset_full: float

    def energy(self, y) -> float:
        return qubo_energy(self.reduced, y) + self.offset_full


def _edge_term(J, shift, q, a, b):
    return np.where((a - b - shift) % q == 0, J, 0.0)


def binary_partition(instance: PottsInstance, current, region, seed=None, beta=None) -> BinarySubproblem:
    """Build the reduced transit-bit QUBO for ``region``.

    ``beta`` may be given explicitly (aligned with ``region``); otherwise each
    is drawn uniformly from the components other than the current one.
    """
    current = validate_assignment(instance, current)
    region = np.asarray(list(region), dtype=np.int64)
    if np.unique(region).size != region.size:
        raise ValueError("region contains duplicates")
    if region.size and (region.min() < 0 or region.max() >= instance.num_vars):
        raise ValueError("region variable out of range")
    q = instance.q
    alpha = current[region]
    if beta is None:
        rng = _rng(seed)
        # uniform over the q - 1 components different from alpha
        beta = (alpha - 1 + rng.integers(1, q, size=region.size)) % q + 1
    beta = np.asarray(beta, dtype=np.int64)
    if beta.shape != alpha.shape or np.any(beta == alpha) or np.any((beta < 1) | (beta > q)):
        raise ValueError("beta must differ from alpha and lie in 1..q")

    k = region.size
    pos = np.full(instance.num_vars, -1, dtype=np.int64)
    pos[region] = np.arange(k)
    moved = current.copy()
    moved[region] = beta
    ei, ej = instance.edges_i, instance.edges_j
    J, d = instance.couplings, instance.shifts
    pi, pj = pos[ei], pos[ej]
    a0i, a1i, a0j, a1j = current[ei], moved[ei], current[ej], moved[ej]
    e00 = _edge_term(J, d, q, a0i, a0j)
    e10 = _edge_term(J, d, q, a1i, a0j)
    e01 = _edge_term(J, d, q, a0i, a1j)
    e11 = _edge_term(J, d, q, a1i, a1j)

    lin = np.zeros(k)
    # endpoints outside the region contribute with their frozen component
    m = pi >= 0
    np.add.at(lin, pi[m], (e10 - e00)[m])
    m = pj >= 0
    np.add.at(lin, pj[m], (e01 - e00)[m])
    both = (pi >= 0) & (pj >= 0)
    quad = (e11 - e10 - e01 + e00)[both]
    reduced = Qubo.from_arrays(k, lin, pi[both], pj[both], quad)
    return BinarySubproblem(region, alpha, beta, reduced, energy(instance, current))


def apply_binary_solution(sub: BinarySubproblem, y, current) -> np.ndarray:
    y = np.asarray(y)
    if y.size != sub.vars.size:
        raise ValueError(f"transit vector has {y.size} entries, expected {sub.vars.size}")
    out = np.array(current, dtype=np.int64, copy=True)
    out[sub.vars] = np.where(y.astype(bool), sub.beta, sub.alpha)
    return out


def tentative_components(enc: OneHotEncoding, bits, fallback) -> np.ndarray:
    """Project a (possibly infeasible) bit state onto an assignment.

    Each group takes its lowest set component; empty groups take the
    ``fallback`` component.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    g = bits[enc.groups]
    has = g.any(axis=1)
    first = np.argmax(g, axis=1) + 1
    return np.where(has, first, np.asarray(fallback, dtype=np.int64)).astype(np.int64)


def infeasible_groups(enc: OneHotEncoding, bits) -> np.ndarray:
    return np.flatnonzero(group_counts(enc, bits) != 1)
