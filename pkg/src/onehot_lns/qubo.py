"""Binary quadratic forms and the one-hot encoding of Potts instances."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from onehot_lns import _kernels
from onehot_lns.potts import PottsInstance, validate_assignment

__all__ = [
    "Qubo",
    "OneHotEncoding",
    "Infeasible",
    "ClampedQubo",
    "encode",
    "qubo_energy",
    "onehot_bits",
    "decode",
    "is_feasible",
    "clamp",
    "min_safe_lambda",
    "lambda_window",
    "default_lambda",
    "refine_bits",
]


@dataclass(frozen=True, eq=False)
class Qubo:
    """``offset + sum_k linear[k] x_k + sum_{i<j} quad[i,j] x_i x_j``.

    Quadratic terms are kept as coordinate arrays with ``rows < cols``, one
    entry per pair.  Use :meth:`from_terms` to build one from dictionaries;
    duplicate pair contributions are summed and pairs that cancel to zero
    are dropped.
    """

    num_bits: int
    linear: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        lin = np.asarray(self.linear, dtype=np.float64).reshape(-1)
        if lin.size != self.num_bits:
            raise ValueError("linear vector length does not match num_bits")
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        vals = np.asarray(self.vals, dtype=np.float64)
        if rows.size and (np.any(rows >= cols) or rows.min() < 0 or cols.max() >= self.num_bits):
            raise ValueError("quadratic pairs must satisfy 0 <= row < col < num_bits")
        for name, arr in (("linear", lin), ("rows", rows), ("cols", cols), ("vals", vals)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_arrays(cls, num_bits, linear, rows, cols, vals, offset=0.0) -> "Qubo":
        """Canonicalize arbitrary coordinate triples (any order, duplicates)."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        lin = np.array(linear, dtype=np.float64).reshape(-1)
        if lin.size == 0 and num_bits:
            lin = np.zeros(num_bits)
        diag = rows == cols
        if np.any(diag):
            np.add.at(lin, rows[diag], vals[diag])
            rows, cols, vals = rows[~diag], cols[~diag], vals[~diag]
        lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
        if lo.size:
            key = lo * num_bits + hi
            uniq, inv = np.unique(key, return_inverse=True)
            merged = np.zeros(uniq.size)
            np.add.at(merged, inv, vals)
            lo, hi, vals = uniq // num_bits, uniq % num_bits, merged
            nz = vals != 0.0
            lo, hi, vals = lo[nz], hi[nz], vals[nz]
        return cls(num_bits, lin, lo, hi, vals, offset)

    @classmethod
    def from_terms(cls, num_bits: int, linear: Mapping[int, float] | None = None,
                   quadratic: Mapping[tuple[int, int], float] | None = None,
                   offset: float = 0.0) -> "Qubo":
        lin = np.zeros(num_bits)
        for k, v in (linear or {}).items():
            if not 0 <= k < num_bits:
                raise ValueError(f"bit {k} out of range")
            lin[k] += v
        quadratic = quadratic or {}
        pairs = np.array(list(quadratic.keys()), dtype=np.int64).reshape(-1, 2)
        vals = np.array(list(quadratic.values()), dtype=np.float64)
        if pairs.size and (pairs.min() < 0 or pairs.max() >= num_bits):
            raise ValueError("quadratic pair out of range")
        return cls.from_arrays(num_bits, lin, pairs[:, 0], pairs[:, 1], vals, offset)

    @property
    def quadratic(self) -> dict[tuple[int, int], float]:
        return {(int(i), int(j)): float(v) for i, j, v in zip(self.rows, self.cols, self.vals)}

    @property
    def linear_terms(self) -> dict[int, float]:
        return {int(k): float(v) for k, v in enumerate(self.linear) if v != 0.0}

    @cached_property
    def csr(self) -> sp.csr_matrix:
        """Symmetric sparse coupling matrix (zero diagonal)."""
        n = self.num_bits
        m = sp.coo_matrix((np.concatenate([self.vals, self.vals]),
                           (np.concatenate([self.rows, self.cols]), np.concatenate([self.cols, self.rows]))),
                          shape=(n, n)).tocsr()
        m.sort_indices()
        return m

    def max_abs_coefficient(self) -> float:
        vals = np.concatenate([np.abs(self.linear), np.abs(self.vals)])
        return float(vals.max()) if vals.size else 0.0

    def energies(self, states) -> np.ndarray:
        """Energies of a (m, num_bits) batch of 0/1 states."""
        x = np.asarray(states, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.num_bits:
            raise ValueError(f"states must have shape (m, {self.num_bits})")
        return self.offset + x @ self.linear + (x[:, self.rows] * x[:, self.cols]) @ self.vals

    def graph_edges(self) -> list[tuple[int, int]]:
        return list(zip(self.rows.tolist(), self.cols.tolist()))


@dataclass(frozen=True)
class OneHotEncoding:
    """Bit layout: variable ``i`` component ``c`` (1-based) is bit ``groups[i][c-1]``."""

    groups: np.ndarray
    lam: float

    @property
    def num_vars(self) -> int:
        return int(self.groups.shape[0])

    @property
    def q(self) -> int:
        return int(self.groups.shape[1])

    @property
    def num_bits(self) -> int:
        return int(self.groups.size)

    def bit(self, var: int, component: int) -> int:
        return int(self.groups[var, component - 1])

    @cached_property
    def group_of(self) -> np.ndarray:
        out = np.empty(self.num_bits, dtype=np.int64)
        out[self.groups.reshape(-1)] = np.repeat(np.arange(self.num_vars), self.q)
        return out

    @cached_property
    def component_of(self) -> np.ndarray:
        out = np.empty(self.num_bits, dtype=np.int64)
        out[self.groups.reshape(-1)] = np.tile(np.arange(1, self.q + 1), self.num_vars)
        return out


@dataclass(frozen=True)
class Infeasible:
    """Decode failure: ``violations`` maps variable index to its set-bit count."""

    violations: dict[int, int] = field(default_factory=dict)

    def __bool__(self):
        return False


@dataclass(frozen=True, eq=False)
class ClampedQubo:
    """A sub-QUBO over ``bits`` of a parent QUBO, all other bits frozen."""

    qubo: Qubo
    bits: np.ndarray
    incumbent: np.ndarray

    def lift(self, parent_state, sub_state) -> np.ndarray:
        full = np.array(parent_state, dtype=np.uint8, copy=True)
        full[self.bits] = np.asarray(sub_state, dtype=np.uint8)
        return full


def encode(instance: PottsInstance, lam: float) -> tuple[Qubo, OneHotEncoding]:
    """One-hot QUBO with penalty ``lam * sum_i (sum_c x_ic - 1)^2``."""
    if not lam > 0:
        raise ValueError(f"penalty weight must be positive, got {lam}")
    return _encode(instance, float(lam))


def _encode(instance: PottsInstance, lam: float) -> tuple[Qubo, OneHotEncoding]:
    n, q = instance.num_vars, instance.q
    groups = np.arange(n * q, dtype=np.int64).reshape(n, q)
    comps = np.arange(q)
    # x_i^(c) couples to x_j^(c - delta) for every component c
    ei = np.repeat(instance.edges_i, q)
    ej = np.repeat(instance.edges_j, q)
    c = np.tile(comps, instance.num_edges)
    cj = (c - np.repeat(instance.shifts, q)) % q
    rows = [groups[ei, c]]
    cols = [groups[ej, cj]]
    vals = [np.repeat(instance.couplings, q)]
    a, b = np.triu_indices(q, k=1)
    rows.append(groups[:, a].reshape(-1))
    cols.append(groups[:, b].reshape(-1))
    vals.append(np.full(n * a.size, 2.0 * lam))
    qubo = Qubo.from_arrays(n * q, np.full(n * q, -lam),
                            np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
                            offset=lam * n)
    return qubo, OneHotEncoding(groups, lam)


def penalty_qubo(enc: OneHotEncoding) -> Qubo:
    """The unit-weight one-hot penalty alone."""
    a, b = np.triu_indices(enc.q, k=1)
    rows = enc.groups[:, a].reshape(-1)
    cols = enc.groups[:, b].reshape(-1)
    return Qubo.from_arrays(enc.num_bits, -np.ones(enc.num_bits), rows, cols,
                            np.full(rows.size, 2.0), offset=enc.num_vars)


def _state(qubo_or_n, s) -> np.ndarray:
    n = qubo_or_n if isinstance(qubo_or_n, int) else qubo_or_n.num_bits
    x = np.asarray(s)
    if x.ndim != 1 or x.size != n:
        raise ValueError(f"bit state length {x.size} does not match {n} bits")
    if x.size and not np.all((x == 0) | (x == 1)):
        raise ValueError("bit state entries must be 0 or 1")
    return x.astype(np.uint8)


def qubo_energy(qubo: Qubo, s) -> float:
    x = _state(qubo, s).astype(np.float64)
    return float(qubo.offset + x @ qubo.linear + (x[qubo.rows] * x[qubo.cols]) @ qubo.vals)


def onehot_bits(enc: OneHotEncoding, a) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    if a.size != enc.num_vars:
        raise ValueError("assignment length does not match encoding")
    if a.size and (a.min() < 1 or a.max() > enc.q):
        raise ValueError(f"assignment entries must lie in 1..{enc.q}")
    bits = np.zeros(enc.num_bits, dtype=np.uint8)
    bits[enc.groups[np.arange(enc.num_vars), a - 1]] = 1
    return bits


def group_counts(enc: OneHotEncoding, s) -> np.ndarray:
    x = _state(enc.num_bits, s)
    return x[enc.groups].sum(axis=1)


def is_feasible(enc: OneHotEncoding, s) -> bool:
    return bool(np.all(group_counts(enc, s) == 1))


def decode(enc: OneHotEncoding, s):
    """Return the assignment (1-based) or an :class:`Infeasible` report."""
    x = _state(enc.num_bits, s)
    counts = x[enc.groups].sum(axis=1)
    bad = np.flatnonzero(counts != 1)
    if bad.size:
        return Infeasible({int(i): int(counts[i]) for i in bad})
    return np.argmax(x[enc.groups], axis=1).astype(np.int64) + 1


def clamp(qubo: Qubo, fixed) -> tuple[Qubo, np.ndarray]:
    """Freeze bits and fold their contributions into the remaining ones.

    ``fixed`` maps bit index to 0/1.  Returns the sub-QUBO over the free bits
    (in increasing index order) and the array of those free bit indices.
    """
    n = qubo.num_bits
    if isinstance(fixed, Mapping):
        idx = np.fromiter(fixed.keys(), dtype=np.int64, count=len(fixed))
        val = np.fromiter(fixed.values(), dtype=np.float64, count=len(fixed))
    else:
        idx, val = (np.asarray(v) for v in fixed)
        idx = idx.astype(np.int64)
        val = val.astype(np.float64)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValueError("fixed bit index out of range")
    if np.any((val != 0) & (val != 1)):
        raise ValueError("fixed bit values must be 0 or 1")
    is_fixed = np.zeros(n, dtype=bool)
    is_fixed[idx] = True
    x = np.zeros(n)
    x[idx] = val
    free = np.flatnonzero(~is_fixed)
    new_index = np.full(n, -1, dtype=np.int64)
    new_index[free] = np.arange(free.size)

    offset = qubo.offset + float(qubo.linear[is_fixed] @ x[is_fixed])
    lin = qubo.linear[free].copy()
    fr, fc = is_fixed[qubo.rows], is_fixed[qubo.cols]
    both = fr & fc
    offset += float((qubo.vals[both] * x[qubo.rows[both]] * x[qubo.cols[both]]).sum())
    # one endpoint fixed: fold into the free endpoint's linear term
    m = fr & ~fc
    np.add.at(lin, new_index[qubo.cols[m]], qubo.vals[m] * x[qubo.rows[m]])
    m = fc & ~fr
    np.add.at(lin, new_index[qubo.rows[m]], qubo.vals[m] * x[qubo.cols[m]])
    keep = ~fr & ~fc
    sub = Qubo(free.size, lin, new_index[qubo.rows[keep]], new_index[qubo.cols[keep]],
               qubo.vals[keep], offset)
    return sub, free


def clamp_to(qubo: Qubo, state, free_bits) -> ClampedQubo:
    """Keep ``free_bits`` free and freeze everything else at ``state``."""
    x = _state(qubo, state)
    free_bits = np.unique(np.asarray(free_bits, dtype=np.int64))
    mask = np.ones(qubo.num_bits, dtype=bool)
    mask[free_bits] = False
    fixed_idx = np.flatnonzero(mask)
    sub, free = clamp(qubo, (fixed_idx, x[fixed_idx]))
    return ClampedQubo(sub, free, x[free].copy())


def min_safe_lambda(instance: PottsInstance) -> float:
    """Penalty weight large enough that breaking one-hot never pays.

    Twice the largest per-site sum of ``|J|``, plus one.
    """
    if instance.num_edges == 0:
        return 1.0
    return 2.0 * float(instance.degree_weights().max()) + 1.0


def lambda_window(instance: PottsInstance) -> tuple[float, float]:
    """Heuristic chain window ``(max|J|, 2 max|J|)`` for experimentation."""
    m = float(np.abs(instance.couplings).max()) if instance.num_edges else 0.0
    return m, 2.0 * m


def default_lambda(instance: PottsInstance) -> float:
    """Top of the heuristic window, ``2 max|J|`` (1 for an edgeless instance)."""
    lo, hi = lambda_window(instance)
    return hi if hi > 0 else 1.0


def refine_bits(qubo: Qubo, enc: OneHotEncoding, bits, seed=None) -> np.ndarray:
    """Group-wise descent on the full QUBO, penalty included.

    Each sweep visits the one-hot groups in random order and sets each to
    its lowest-energy pattern among all ``2^q`` (current kept on ties),
    until a sweep changes nothing.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = _state(qubo, bits).copy()
    m = qubo.csr
    indptr, indices = m.indptr.astype(np.int64), m.indices.astype(np.int64)
    while True:
        order = rng.permutation(enc.num_vars)
        if not _kernels.group_greedy_sweep(x, order, enc.groups, enc.group_of, qubo.linear,
                                           indptr, indices, m.data):
            return x
