"""Potts-type integer optimization instances on cubic lattices.

Components are 1-based everywhere in the public API: an assignment is an
integer array with entries in ``1..q``.  The interaction of an edge
``(i, j, J, delta)`` contributes ``J`` when ``S_i == S_j + delta (mod q)``.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Sequence

import numpy as np

from onehot_lns import _kernels

__all__ = [
    "ModelKind",
    "LatticeSpec",
    "PottsInstance",
    "generate_instance",
    "validate_assignment",
    "energy",
    "local_energy",
    "local_energies",
    "greedy_refine",
    "is_local_minimum",
]


class ModelKind(str, enum.Enum):
    FERROMAGNETIC = "ferro"
    ANTIFERROMAGNETIC = "antiferro"
    POTTS_GLASS = "glass"
    POTTS_GAUGE_GLASS = "gauge"

    @classmethod
    def parse(cls, name: str) -> "ModelKind":
        aliases = {
            "ferromagnetic": cls.FERROMAGNETIC,
            "antiferromagnetic": cls.ANTIFERROMAGNETIC,
            "anti-ferro": cls.ANTIFERROMAGNETIC,
            "pottsglass": cls.POTTS_GLASS,
            "potts-glass": cls.POTTS_GLASS,
            "gauge-glass": cls.POTTS_GAUGE_GLASS,
            "gaugeglass": cls.POTTS_GAUGE_GLASS,
            "pottsgaugeglass": cls.POTTS_GAUGE_GLASS,
        }
        key = name.strip().lower()
        if key in aliases:
            return aliases[key]
        return cls(key)


@dataclass(frozen=True)
class LatticeSpec:
    dims: tuple[int, int, int]
    periodic: bool = True

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3:
            raise ValueError(f"lattice needs three dimensions, got {self.dims!r}")
        if any(d < 1 for d in dims):
            raise ValueError(f"lattice dimensions must be positive, got {dims}")
        if self.periodic and 2 in dims:
            # a periodic side of length 2 would bond the same pair twice
            raise ValueError(f"periodic lattice with a side of length 2 is not allowed: {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def num_sites(self) -> int:
        lx, ly, lz = self.dims
        return lx * ly * lz

    def site(self, x: int, y: int, z: int) -> int:
        lx, ly, _ = self.dims
        return x + lx * (y + ly * z)

    def bonds(self) -> list[tuple[int, int]]:
        """Nearest-neighbour pairs, each unordered pair listed once."""
        lx, ly, lz = self.dims
        out = []
        seen = set()
        for z, y, x in itertools.product(range(lz), range(ly), range(lx)):
            i = self.site(x, y, z)
            for axis in range(3):
                nxt = [x, y, z]
                nxt[axis] += 1
                if nxt[axis] >= self.dims[axis]:
                    if not self.periodic or self.dims[axis] == 1:
                        continue
                    nxt[axis] = 0
                j = self.site(*nxt)
                key = (min(i, j), max(i, j))
                if key in seen:
                    continue
                seen.add(key)
                out.append((i, j))
        return out


@dataclass(frozen=True, eq=False)
class PottsInstance:
    """Integer cost function ``sum_edges J_ij * [S_i == S_j + delta_ij (mod q)]``."""

    num_vars: int
    q: int
    edges_i: np.ndarray
    edges_j: np.ndarray
    couplings: np.ndarray
    shifts: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.num_vars < 1:
            raise ValueError("instance needs at least one variable")
        if self.q < 2:
            raise ValueError(f"q must be at least 2, got {self.q}")
        ei = np.asarray(self.edges_i, dtype=np.int64)
        ej = np.asarray(self.edges_j, dtype=np.int64)
        J = np.asarray(self.couplings, dtype=np.float64)
        d = np.asarray(self.shifts, dtype=np.int64)
        if not (ei.shape == ej.shape == J.shape == d.shape) or ei.ndim != 1:
            raise ValueError("edge arrays must be one-dimensional and of equal length")
        if ei.size:
            if min(ei.min(), ej.min()) < 0 or max(ei.max(), ej.max()) >= self.num_vars:
                raise ValueError("edge endpoint out of range")
            if np.any(ei == ej):
                raise ValueError("self-loops are not allowed")
            pairs = np.minimum(ei, ej) * self.num_vars + np.maximum(ei, ej)
            if np.unique(pairs).size != pairs.size:
                raise ValueError("at most one edge per unordered pair")
        for name, arr in (("edges_i", ei), ("edges_j", ej), ("couplings", J), ("shifts", d)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_edges(cls, num_vars: int, q: int, edges: Iterable[Sequence], metadata=None) -> "PottsInstance":
        edges = [tuple(e) for e in edges]
        if edges:
            ei, ej, J, d = (np.array(col) for col in zip(*edges))
        else:
            ei = ej = d = np.zeros(0, dtype=np.int64)
            J = np.zeros(0)
        return cls(num_vars, q, ei, ej, J, d, dict(metadata or {}))

    @property
    def num_edges(self) -> int:
        return int(self.edges_i.size)

    def edges(self) -> list[tuple[int, int, float, int]]:
        return [
            (int(i), int(j), float(c), int(s))
            for i, j, c, s in zip(self.edges_i, self.edges_j, self.couplings, self.shifts)
        ]

    @cached_property
    def adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """CSR view of incident edges: ``(indptr, nbr, coupling, shift, sign)``.

        For the entry of site ``i`` on edge ``(a, b, J, d)`` the condition
        ``S_i == S_nbr + sign * d (mod q)`` holds exactly when the edge is
        satisfied, with ``sign = +1`` when ``i == a`` and ``-1`` otherwise.
        """
        n = self.num_vars
        src = np.concatenate([self.edges_i, self.edges_j])
        dst = np.concatenate([self.edges_j, self.edges_i])
        cpl = np.concatenate([self.couplings, self.couplings])
        shf = np.concatenate([self.shifts, self.shifts])
        sgn = np.concatenate([np.ones(self.num_edges, np.int64), -np.ones(self.num_edges, np.int64)])
        order = np.argsort(src, kind="stable")
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        indptr = np.cumsum(indptr)
        return indptr, dst[order], cpl[order], shf[order], sgn[order]

    def neighbors(self, i: int) -> np.ndarray:
        indptr, nbr, *_ = self.adjacency
        return nbr[indptr[i]:indptr[i + 1]]

    def degree_weights(self) -> np.ndarray:
        """Per-site sum of incident ``|J|``."""
        w = np.zeros(self.num_vars)
        np.add.at(w, self.edges_i, np.abs(self.couplings))
        np.add.at(w, self.edges_j, np.abs(self.couplings))
        return w


_MODEL_RULES = {
    ModelKind.FERROMAGNETIC: "J=-1, delta=0",
    ModelKind.ANTIFERROMAGNETIC: "J=+1, delta=0",
    ModelKind.POTTS_GLASS: "J=+/-1 (1/2 each), delta=0",
    ModelKind.POTTS_GAUGE_GLASS: "J=-1, delta=0 (1/2), +1 (1/4), -1 (1/4)",
}


def generate_instance(kind: ModelKind | str, lattice: LatticeSpec, q: int, seed: int | None = 0) -> PottsInstance:
    """Build one of the four benchmark Potts models on a cubic lattice."""
    if isinstance(kind, str):
        kind = ModelKind.parse(kind)
    if q < 2:
        raise ValueError(f"q must be at least 2, got {q}")
    bonds = lattice.bonds()
    m = len(bonds)
    rng = np.random.default_rng(seed)
    if kind is ModelKind.FERROMAGNETIC:
        J = -np.ones(m)
        d = np.zeros(m, dtype=np.int64)
    elif kind is ModelKind.ANTIFERROMAGNETIC:
        J = np.ones(m)
        d = np.zeros(m, dtype=np.int64)
    elif kind is ModelKind.POTTS_GLASS:
        J = rng.choice([1.0, -1.0], size=m)
        d = np.zeros(m, dtype=np.int64)
    else:
        J = -np.ones(m)
        d = rng.choice([0, 1, -1], size=m, p=[0.5, 0.25, 0.25]).astype(np.int64)
    ei = np.array([b[0] for b in bonds], dtype=np.int64)
    ej = np.array([b[1] for b in bonds], dtype=np.int64)
    meta = {
        "model": kind.value,
        "dims": list(lattice.dims),
        "periodic": lattice.periodic,
        "seed": seed,
        "rule": _MODEL_RULES[kind],
    }
    return PottsInstance(lattice.num_sites, q, ei, ej, J, d, meta)


def validate_assignment(instance: PottsInstance, a) -> np.ndarray:
    arr = np.asarray(a)
    if arr.ndim != 1 or arr.size != instance.num_vars:
        raise ValueError(f"assignment length {arr.size} does not match {instance.num_vars} variables")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.mod(arr, 1) == 0):
            raise ValueError("assignment entries must be integers")
    arr = arr.astype(np.int64)
    if arr.size and (arr.min() < 1 or arr.max() > instance.q):
        raise ValueError(f"assignment entries must lie in 1..{instance.q}")
    return arr


def satisfied(instance: PottsInstance, a: np.ndarray) -> np.ndarray:
    """Boolean mask of edges whose delta condition holds under ``a``."""
    return (a[instance.edges_i] - a[instance.edges_j] - instance.shifts) % instance.q == 0


def energy(instance: PottsInstance, a) -> float:
    a = validate_assignment(instance, a)
    return float(instance.couplings[satisfied(instance, a)].sum())


def local_energy(instance: PottsInstance, a, i: int) -> float:
    a = validate_assignment(instance, a)
    if not 0 <= i < instance.num_vars:
        raise IndexError(f"variable index {i} out of range")
    indptr, nbr, cpl, shf, sgn = instance.adjacency
    lo, hi = indptr[i], indptr[i + 1]
    hit = (a[i] - a[nbr[lo:hi]] - sgn[lo:hi] * shf[lo:hi]) % instance.q == 0
    return float(cpl[lo:hi][hit].sum())


def local_energies(instance: PottsInstance, a) -> np.ndarray:
    """Local energy of every site; sums to twice the total energy."""
    a = validate_assignment(instance, a)
    contrib = np.where(satisfied(instance, a), instance.couplings, 0.0)
    out = np.zeros(instance.num_vars)
    np.add.at(out, instance.edges_i, contrib)
    np.add.at(out, instance.edges_j, contrib)
    return out


def greedy_refine(instance: PottsInstance, a, seed=None) -> np.ndarray:
    """Single-site descent until no component change lowers any local energy.

    Sites are visited in a fresh random order each sweep.  On ties the current
    component is kept; otherwise the lowest minimizing component wins.
    """
    a = validate_assignment(instance, a)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    indptr, nbr, cpl, shf, sgn = instance.adjacency
    state = a - 1
    while True:
        order = rng.permutation(instance.num_vars)
        changed = _kernels.potts_greedy_sweep(state, order, indptr, nbr, cpl, shf * sgn, instance.q)
        if not changed:
            break
    return state + 1


def is_local_minimum(instance: PottsInstance, a, atol: float = 1e-9) -> bool:
    a = validate_assignment(instance, a)
    for i in range(instance.num_vars):
        here = local_energy(instance, a, i)
        trial = a.copy()
        for c in range(1, instance.q + 1):
            trial[i] = c
            if local_energy(instance, trial, i) < here - atol:
                return False
        trial[i] = a[i]
    return True
