"""Chimera hardware graphs and greedy chain-growth minor embedding.

The embedder processes logical bits one at a time.  A bit with embedded
logical neighbours gets a chain rooted at the free qubit closest (in hops
over free qubits) to all of their chains; the chain is the root plus one
shortest free path towards each neighbour chain.  A bit that cannot be
placed is skipped, never retried.
"""
from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np

from onehot_lns.potts import PottsInstance
from onehot_lns.qubo import OneHotEncoding, Qubo
from onehot_lns.partition import MultivaluedSelection

__all__ = [
    "EmbeddingError",
    "ChimeraGraph",
    "chimera",
    "random_defects",
    "Embedding",
    "ChainEmbedder",
    "order_variables",
    "embed_subproblem",
    "embed_multivalued",
    "embed_binary",
    "verify_embedding",
    "embedding_stats",
    "dump_embedding",
]


class EmbeddingError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ChimeraGraph:
    """``m x n`` grid of ``K_{l,l}`` cells.

    Qubit ``((row * n + col) * 2 + shore) * l + k``; shore 0 couples to the
    same ``k`` in the next row, shore 1 to the next column.
    """

    m: int
    n: int
    l: int
    defects: frozenset = frozenset()
    graph: nx.Graph = field(repr=False, default=None)

    @property
    def num_qubits(self) -> int:
        return 2 * self.m * self.n * self.l

    @property
    def nodes(self) -> list[int]:
        return sorted(self.graph.nodes)

    @property
    def num_nodes(self) -> int:
        return self.graph.number_of_nodes()

    @property
    def num_edges(self) -> int:
        return self.graph.number_of_edges()

    def qubit(self, row: int, col: int, shore: int, k: int) -> int:
        return ((row * self.n + col) * 2 + shore) * self.l + k

    def neighbors(self, qubit: int) -> list[int]:
        return self._adj[qubit]

    def __post_init__(self):
        adj = [[] for _ in range(self.num_qubits)]
        for u, v in self.graph.edges:
            adj[u].append(v)
            adj[v].append(u)
        for a in adj:
            a.sort()
        object.__setattr__(self, "_adj", adj)

    @staticmethod
    def expected_edges(m: int, n: int, l: int) -> int:
        return m * n * l * l + (m - 1) * n * l + m * (n - 1) * l


def chimera(m: int, n: int | None = None, l: int = 4, defects: Iterable[int] = ()) -> ChimeraGraph:
    n = m if n is None else n
    if min(m, n, l) < 1:
        raise ValueError(f"chimera sizes must be positive, got {(m, n, l)}")
    total = 2 * m * n * l
    defects = frozenset(int(d) for d in defects)
    bad = [d for d in defects if not 0 <= d < total]
    if bad:
        raise ValueError(f"defect qubits out of range: {sorted(bad)[:5]}")

    def q(r, c, s, k):
        return ((r * n + c) * 2 + s) * l + k

    g = nx.Graph()
    g.add_nodes_from(range(total))
    for r in range(m):
        for c in range(n):
            for a in range(l):
                for b in range(l):
                    g.add_edge(q(r, c, 0, a), q(r, c, 1, b))
                if r + 1 < m:
                    g.add_edge(q(r, c, 0, a), q(r + 1, c, 0, a))
                if c + 1 < n:
                    g.add_edge(q(r, c, 1, a), q(r, c + 1, 1, a))
    g.remove_nodes_from(defects)
    return ChimeraGraph(m, n, l, defects, g)


def random_defects(m: int, n: int, l: int, count: int, seed=None) -> list[int]:
    rng = np.random.default_rng(seed)
    return sorted(int(x) for x in rng.choice(2 * m * n * l, size=count, replace=False))


@dataclass
class Embedding:
    """``chains`` maps logical bit to its qubits; ``unembedded`` lists the rest."""

    chains: dict[int, list[int]] = field(default_factory=dict)
    unembedded: set[int] = field(default_factory=set)
    groups: dict[int, list[int]] = field(default_factory=dict)

    @property
    def num_qubits(self) -> int:
        return sum(len(c) for c in self.chains.values())

    def embedded_bits(self) -> list[int]:
        return list(self.chains)


def _neighbor_fn(adjacency):
    if callable(adjacency):
        return adjacency
    return lambda b: adjacency.get(b, ())


def _adjacency(edges: Iterable[tuple[int, int]]) -> dict[int, set[int]]:
    adj: dict[int, set[int]] = {}
    for a, b in edges:
        if a == b:
            continue
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    return adj


class ChainEmbedder:
    """Incremental placement of logical bits onto a hardware graph."""

    def __init__(self, hw: ChimeraGraph, adjacency, rng, max_hops: int = 6):
        if hw.num_nodes == 0:
            raise EmbeddingError("hardware graph has no working qubits")
        self.hw = hw
        self.neighbors = _neighbor_fn(adjacency)
        self.rng = rng
        self.max_hops = max_hops
        self.owner = np.full(hw.num_qubits, -1, dtype=np.int64)
        self.owner[list(hw.defects)] = -2
        self.chains: dict[int, list[int]] = {}
        self._center = ((hw.m - 1) / 2.0, (hw.n - 1) / 2.0)

    def _free(self, qb: int) -> bool:
        return self.owner[qb] == -1

    def _bfs(self, sources: Sequence[int]):
        """Hop distance and parent over free qubits, starting next to ``sources``."""
        dist: dict[int, int] = {}
        parent: dict[int, int] = {}
        dq = deque()
        for s in sources:
            for u in self.hw.neighbors(s):
                if self._free(u) and u not in dist:
                    dist[u] = 1
                    parent[u] = -1
                    dq.append(u)
        while dq:
            v = dq.popleft()
            if dist[v] >= self.max_hops:
                continue
            for u in self.hw.neighbors(v):
                if self._free(u) and u not in dist:
                    dist[u] = dist[v] + 1
                    parent[u] = v
                    dq.append(u)
        return dist, parent

    def _cell_distance(self, qb: int) -> float:
        cell = qb // (2 * self.hw.l)
        r, c = divmod(cell, self.hw.n)
        return abs(r - self._center[0]) + abs(c - self._center[1])

    def _pick(self, candidates: list[int], cost) -> int:
        best = min(cost(c) for c in candidates)
        ties = sorted(c for c in candidates if cost(c) == best)
        return ties[int(self.rng.integers(len(ties)))]

    def place(self, bit: int) -> bool:
        if bit in self.chains:
            raise ValueError(f"bit {bit} already embedded")
        nbr_chains = [self.chains[b] for b in self.neighbors(bit) if b in self.chains]
        if not nbr_chains:
            if not self.chains:
                free = [int(x) for x in np.flatnonzero(self.owner == -1)]
                if not free:
                    return False
                root = self._pick(free, self._cell_distance)
            else:
                used = [qb for ch in self.chains.values() for qb in ch]
                dist, _ = self._bfs(used)
                if not dist:
                    return False
                root = self._pick(list(dist), dist.__getitem__)
            chain = [root]
        else:
            searches = [self._bfs(ch) for ch in nbr_chains]
            common = set(searches[0][0])
            for dist, _ in searches[1:]:
                common &= dist.keys()
            if not common:
                return False
            root = self._pick(list(common), lambda c: sum(d[c] for d, _ in searches))
            chain_set = {root}
            for _, parent in searches:
                v = root
                while parent[v] != -1:
                    v = parent[v]
                    chain_set.add(v)
            chain = sorted(chain_set)
        self.owner[chain] = bit
        self.chains[bit] = chain
        return True

    def release(self, bit: int) -> None:
        chain = self.chains.pop(bit)
        self.owner[chain] = -1


def order_variables(bits: Sequence[int], tentative: int | None, embedded,
                    adjacency, rng) -> list[int]:
    """Embedding order for the bits of one integer variable.

    A bit is "anchored" when a logical neighbour outside its own group is
    already embedded.  The first bit is the tentatively selected one if it
    is anchored or nothing is, otherwise a random anchored bit.  The rest
    follow as anchored bits, then the tentative bit, then the others.
    """
    nbrs = _neighbor_fn(adjacency)
    own = set(bits)
    anchored = [b for b in bits if any(n in embedded and n not in own for n in nbrs(b))]
    anchored_set = set(anchored)
    if anchored:
        first = tentative if tentative in anchored_set else anchored[int(rng.integers(len(anchored)))]
    elif tentative is not None and tentative in own:
        first = tentative
    else:
        first = bits[int(rng.integers(len(bits)))]
    rest_anchored = [b for b in anchored if b != first]
    rng.shuffle(rest_anchored)
    rest_tentative = [b for b in bits if b == tentative and b != first and b not in anchored_set]
    others = [b for b in bits if b != first and b not in anchored_set and b != tentative]
    rng.shuffle(others)
    return [first] + rest_anchored + rest_tentative + others


def _finish_group(emb: ChainEmbedder, var: int, placed: list[int], required: int | None,
                  min_components: int, groups: dict, unembedded: set) -> bool:
    keep = len(placed) >= min_components and (required is None or required in placed)
    if keep:
        groups[var] = placed
        return True
    for b in placed:
        emb.release(b)
        unembedded.add(b)
    return False


def embed_subproblem(edges: Iterable[tuple[int, int]], order, hw: ChimeraGraph, seed=None,
                     min_components: int = 1, required: Mapping[int, int] | None = None,
                     max_hops: int = 6) -> Embedding:
    """Embed logical bits in a fixed order.

    ``order`` is a list of bits or of ``(var, bits)`` groups.  A group ends
    up dropped (all its chains released) when fewer than ``min_components``
    of its bits were placed or its ``required`` bit failed.
    """
    rng = np.random.default_rng(seed)
    adj = _adjacency(edges)
    emb = ChainEmbedder(hw, adj, rng, max_hops)
    groups: dict[int, list[int]] = {}
    unembedded: set[int] = set()
    required = required or {}
    for k, item in enumerate(order):
        var, bits = (item if isinstance(item, tuple) else (k, [item]))
        placed = []
        for b in bits:
            if emb.place(b):
                placed.append(b)
            else:
                unembedded.add(b)
        _finish_group(emb, var, placed, required.get(var), min_components, groups, unembedded)
    return Embedding(dict(emb.chains), unembedded, groups)


def _grow_and_embed(instance: PottsInstance, hw: ChimeraGraph, rng, max_vars, bits_for_var,
                    adjacency, min_components, tentative_for, max_hops):
    """Shared driver: pick a random variable adjacent to the embedded ones, embed its bits."""
    emb = ChainEmbedder(hw, adjacency, rng, max_hops)
    groups: dict[int, list[int]] = {}
    unembedded: set[int] = set()
    tried = np.zeros(instance.num_vars, dtype=bool)
    frontier: list[int] = []
    in_frontier = np.zeros(instance.num_vars, dtype=bool)
    limit = instance.num_vars if max_vars is None else min(max_vars, instance.num_vars)
    start = int(rng.integers(instance.num_vars))
    pending = [start]
    while len(groups) < limit:
        if pending:
            var = pending.pop()
        elif frontier:
            var = frontier.pop(int(rng.integers(len(frontier))))
            in_frontier[var] = False
        else:
            break
        tried[var] = True
        bits = bits_for_var(var)
        tent = tentative_for(var)
        order = order_variables(bits, tent, emb.chains.keys(), adjacency, rng)
        placed = []
        for b in order:
            if emb.place(b):
                placed.append(b)
            else:
                unembedded.add(b)
        if _finish_group(emb, var, placed, tent, min_components, groups, unembedded):
            for u in instance.neighbors(var):
                u = int(u)
                if not tried[u] and not in_frontier[u]:
                    in_frontier[u] = True
                    frontier.append(u)
    return Embedding(dict(emb.chains), unembedded, groups)


def embed_multivalued(instance: PottsInstance, enc: OneHotEncoding, qubo: Qubo, current, hw: ChimeraGraph,
                      seed=None, max_vars: int | None = None, selection: MultivaluedSelection | None = None,
                      max_hops: int = 6) -> tuple[Embedding, MultivaluedSelection]:
    """Embed a multivalued subproblem variable by variable.

    Variables are added in random adjacency order; their component bits are
    ordered by :func:`order_variables`.  A variable keeps its place only if
    its current component and at least one other component were embedded.
    """
    rng = np.random.default_rng(seed)
    current = np.asarray(current, dtype=np.int64)
    m = qubo.csr
    allowed = None
    if selection is not None:
        allowed = set(selection.bits(enc).tolist())

    def bits_for_var(v):
        if selection is not None:
            return [enc.bit(v, c) for c in selection.components.get(v, [])] or [enc.bit(v, current[v])]
        return [int(b) for b in enc.groups[v]]

    def neighbors(b):
        nb = m.indices[m.indptr[b]:m.indptr[b + 1]].tolist()
        if allowed is None:
            return nb
        return [x for x in nb if x in allowed]

    emb = _grow_and_embed(instance, hw, rng, max_vars, bits_for_var, neighbors, 2,
                          lambda v: enc.bit(v, current[v]), max_hops)
    comps = {}
    for v, placed in emb.groups.items():
        cs = [int(enc.component_of[b]) for b in placed]
        alpha = int(current[v])
        comps[v] = [alpha] + sorted(c for c in cs if c != alpha)
    return emb, MultivaluedSelection(comps)


def embed_binary(instance: PottsInstance, current, beta_all, hw: ChimeraGraph, seed=None,
                 max_vars: int | None = None, max_hops: int = 6) -> Embedding:
    """Embed transit bits (logical bit id = variable index).

    Only lattice bonds with a nonzero reduced pair coefficient need a
    coupler, so the logical graph is the lattice with dilutions.
    """
    rng = np.random.default_rng(seed)
    current = np.asarray(current, dtype=np.int64)
    beta_all = np.asarray(beta_all, dtype=np.int64)
    q = instance.q
    ei, ej, J, d = instance.edges_i, instance.edges_j, instance.couplings, instance.shifts

    def term(a, b):
        return np.where((a - b - d) % q == 0, J, 0.0)

    pair = (term(beta_all[ei], beta_all[ej]) - term(beta_all[ei], current[ej])
            - term(current[ei], beta_all[ej]) + term(current[ei], current[ej]))
    nz = pair != 0
    adj = _adjacency(zip(ei[nz].tolist(), ej[nz].tolist()))
    return _grow_and_embed(instance, hw, rng, max_vars, lambda v: [v], adj, 1,
                           lambda v: None, max_hops)


def verify_embedding(embedding: Embedding, edges: Iterable[tuple[int, int]], hw: ChimeraGraph) -> list[str]:
    """List every violated embedding invariant; empty when valid."""
    problems = []
    seen: dict[int, int] = {}
    for bit, chain in embedding.chains.items():
        if not chain:
            problems.append(f"bit {bit}: empty chain")
            continue
        for qb in chain:
            if qb not in hw.graph:
                problems.append(f"bit {bit}: qubit {qb} missing from hardware")
            elif qb in seen:
                problems.append(f"bit {bit}: qubit {qb} also used by bit {seen[qb]}")
            seen[qb] = bit
        sub = hw.graph.subgraph(chain)
        if sub.number_of_nodes() == len(chain) and not nx.is_connected(sub):
            problems.append(f"bit {bit}: chain not connected")
    for a, b in edges:
        if a in embedding.chains and b in embedding.chains:
            cb = set(embedding.chains[b])
            if not any(u in cb for qa in embedding.chains[a] for u in hw.neighbors(qa)):
                problems.append(f"logical edge ({a}, {b}) has no coupler")
    return problems


def embedding_stats(embedding: Embedding, kind: str = "multivalued") -> dict:
    """Histogram of embedded components per variable and log10 of feasible count."""
    hist = Counter(len(bits) for bits in embedding.groups.values())
    if kind == "binary":
        log10 = len(embedding.groups) * math.log10(2)
    else:
        log10 = sum(math.log10(len(bits)) for bits in embedding.groups.values())
    return {
        "num_vars": len(embedding.groups),
        "num_bits": len(embedding.chains),
        "num_qubits": embedding.num_qubits,
        "histogram": dict(sorted(hist.items())),
        "log10_feasible": log10,
    }


def log10_feasible(q_embed: Sequence[int]) -> float:
    return float(sum(math.log10(k) for k in q_embed))


def dump_embedding(embedding: Embedding) -> str:
    lines = [f"{bit}: {' '.join(map(str, chain))}" for bit, chain in sorted(embedding.chains.items())]
    return "\n".join(lines) + ("\n" if lines else "")
