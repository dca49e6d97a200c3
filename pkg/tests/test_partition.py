import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from onehot_lns.potts import LatticeSpec, PottsInstance, energy, generate_instance
from onehot_lns.qubo import decode, encode, is_feasible, onehot_bits, qubo_energy
from onehot_lns.partition import (
    apply_binary_solution,
    binary_partition,
    components_for_budget,
    grow_region,
    multivalued_partition,
    random_partition,
    select_components,
    tentative_components,
)

from conftest import random_instance


def all_states(n):
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.uint8).reshape(-1, n)


def lattice_graph(instance):
    g = nx.Graph()
    g.add_nodes_from(range(instance.num_vars))
    g.add_edges_from((i, j) for i, j, *_ in instance.edges())
    return g


class TestGrowRegion:
    def test_single(self):
        inst = generate_instance("ferro", LatticeSpec((3, 3, 3)), 3)
        assert len(grow_region(inst, 1, seed=0)) == 1

    def test_everything(self):
        inst = generate_instance("ferro", LatticeSpec((3, 3, 3)), 3)
        assert sorted(grow_region(inst, 27, seed=0)) == list(range(27))

    def test_connected(self):
        inst = generate_instance("glass", LatticeSpec((4, 4, 4)), 4, seed=0)
        g = lattice_graph(inst)
        for seed in range(20):
            region = grow_region(inst, 20, seed=seed)
            assert len(set(region)) == 20
            assert nx.is_connected(g.subgraph(region))

    def test_rejects_zero(self):
        inst = generate_instance("ferro", LatticeSpec((3, 3, 3)), 3)
        with pytest.raises(ValueError):
            grow_region(inst, 0)


class TestRandomPartition:
    def chain_scenario(self, lam):
        inst = PottsInstance.from_edges(3, 3, [(0, 1, -1.0, 0), (1, 2, -1.0, 0)])
        qb, enc = encode(inst, lam)
        return inst, qb, enc, onehot_bits(enc, [1, 2, 1])

    @pytest.mark.parametrize("lam", [1.5, 2.0, 5.0])
    def test_single_bit_flip(self, lam):
        # the middle variable's component-1 bit: turning it on restores two
        # bonds and breaks the one-hot constraint
        inst, qb, enc, x = self.chain_scenario(lam)
        target = enc.bit(1, 1)
        for seed in range(200):
            cq = random_partition(qb, enc, x, 1, seed=seed)
            if cq.bits.tolist() == [target]:
                break
        else:
            pytest.fail("bit never extracted")
        gain = qubo_energy(cq.qubo, [1]) - qubo_energy(cq.qubo, [0])
        assert gain == pytest.approx(-2 * 1.0 + lam)

    def test_full_budget(self, rng):
        inst = random_instance(rng, 5, 3)
        qb, enc = encode(inst, 2.0)
        x = rng.integers(0, 2, size=qb.num_bits)
        cq = random_partition(qb, enc, x, qb.num_bits, seed=1)
        assert cq.bits.tolist() == list(range(qb.num_bits))
        assert cq.qubo.quadratic == qb.quadratic
        assert cq.qubo.offset == qb.offset

    def test_budget_respected(self):
        inst = generate_instance("gauge", LatticeSpec((4, 4, 4)), 4, seed=1)
        qb, enc = encode(inst, 2.0)
        x = onehot_bits(enc, np.ones(64, dtype=int))
        for seed in range(10):
            assert random_partition(qb, enc, x, 64, seed=seed).bits.size == 64

    def test_clamp_identity(self, rng):
        for _ in range(10):
            inst = random_instance(rng, 6, 3)
            qb, enc = encode(inst, 2.0)
            x = rng.integers(0, 2, size=qb.num_bits)
            cq = random_partition(qb, enc, x, int(rng.integers(1, 11)), seed=rng)
            for y in all_states(cq.bits.size):
                assert qubo_energy(cq.qubo, y) == pytest.approx(qubo_energy(qb, cq.lift(x, y)))


class TestMultivalued:
    def test_r_equals_q(self, rng):
        sel = select_components([1, 2, 3], [0, 1, 2], 3, 3, rng)
        for v, cs in sel.components.items():
            assert sorted(cs) == [1, 2, 3]

    def test_feasible_count(self):
        inst = generate_instance("glass", LatticeSpec((4, 4, 4)), 4, seed=3)
        qb, enc = encode(inst, 2.0)
        current = np.random.default_rng(0).integers(1, 5, size=64)
        region = grow_region(inst, 10, seed=2)
        sel, cq = multivalued_partition(qb, enc, current, region, 2, seed=5)
        assert cq.bits.size == 20
        n = cq.bits.size
        ints = np.arange(1 << n, dtype=np.int64)
        cols = (ints[:, None] >> np.arange(n)) & 1
        ok = np.ones(ints.size, dtype=bool)
        groups = enc.group_of[cq.bits]
        for v in region:
            ok &= cols[:, groups == v].sum(axis=1) == 1
        assert ok.sum() == 2 ** 10 == sel.num_feasible()

    def test_current_component_available(self, rng):
        inst = generate_instance("gauge", LatticeSpec((4, 4, 4)), 4, seed=3)
        qb, enc = encode(inst, 2.0)
        for seed in range(20):
            current = rng.integers(1, 5, size=64)
            region = grow_region(inst, 16, seed=seed)
            sel, cq = multivalued_partition(qb, enc, current, region, 2, seed=seed)
            for v in region:
                assert sel.components[v][0] == current[v]
                assert enc.bit(v, current[v]) in cq.bits
            # the incumbent is reachable inside the subproblem
            assert is_feasible(enc, cq.lift(onehot_bits(enc, current), cq.incumbent))

    def test_clamped_feasible_energy(self, rng):
        inst = random_instance(rng, 6, 4)
        qb, enc = encode(inst, 2.0)
        current = rng.integers(1, 5, size=6)
        sel, cq = multivalued_partition(qb, enc, current, [0, 2, 3], 2, seed=1)
        parent = onehot_bits(enc, current)
        for y in all_states(cq.bits.size):
            full = cq.lift(parent, y)
            a = decode(enc, full)
            if is_feasible(enc, full):
                assert qubo_energy(cq.qubo, y) == pytest.approx(energy(inst, a))

    def test_invalid_r(self, rng):
        with pytest.raises(ValueError):
            select_components([1, 1], [0], 3, 1, rng)
        with pytest.raises(ValueError):
            select_components([1, 1], [0], 3, 4, rng)

    @pytest.mark.parametrize("q,size,budget,expect", [(4, 10, None, 4), (4, 16, 64, 4), (4, 32, 64, 2), (4, 20, 64, 3)])
    def test_components_for_budget(self, q, size, budget, expect):
        assert components_for_budget(q, size, budget) == expect


class TestBinary:
    def test_zero_transit(self, rng):
        inst = random_instance(rng, 6, 3)
        a = rng.integers(1, 4, size=6)
        sub = binary_partition(inst, a, [0, 1, 2], seed=0)
        assert sub.reduced.offset == 0
        assert sub.energy(np.zeros(3)) == energy(inst, a)

    def test_ferro_edge(self):
        inst = PottsInstance.from_edges(2, 3, [(0, 1, -1.0, 0)])
        sub = binary_partition(inst, [1, 1], [0, 1], beta=[2, 2])
        assert sub.reduced.quadratic == {(0, 1): -2.0}
        assert sub.reduced.linear.tolist() == [1.0, 1.0]

    def test_beta_uniform_and_distinct(self):
        inst = PottsInstance.from_edges(2000, 4, [])
        a = np.full(2000, 2)
        sub = binary_partition(inst, a, range(2000), seed=3)
        assert np.all(sub.beta != 2)
        counts = np.bincount(sub.beta, minlength=5)[[1, 3, 4]]
        assert np.all(np.abs(counts / 2000 - 1 / 3) < 0.04)

    def test_bad_beta(self):
        inst = PottsInstance.from_edges(2, 3, [(0, 1, -1.0, 0)])
        with pytest.raises(ValueError):
            binary_partition(inst, [1, 1], [0, 1], beta=[1, 2])

    def test_reduction_exhaustive(self, rng):
        for _ in range(40):
            n = int(rng.integers(2, 11))
            inst = random_instance(rng, n, int(rng.choice([3, 4])), edge_prob=0.4)
            a = rng.integers(1, inst.q + 1, size=n)
            region = rng.choice(n, size=int(rng.integers(1, min(n, 8) + 1)), replace=False)
            sub = binary_partition(inst, a, region, seed=rng)
            for y in all_states(region.size):
                moved = apply_binary_solution(sub, y, a)
                assert sub.energy(y) == energy(inst, moved)

    def test_apply(self):
        inst = PottsInstance.from_edges(3, 3, [])
        a = np.array([1, 2, 3])
        sub = binary_partition(inst, a, [0, 2], beta=[3, 1])
        assert apply_binary_solution(sub, [0, 0], a).tolist() == [1, 2, 3]
        assert apply_binary_solution(sub, [1, 1], a).tolist() == [3, 2, 1]
        with pytest.raises(ValueError):
            apply_binary_solution(sub, [1], a)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_binary_apply_consistency(seed):
    rng = np.random.default_rng(seed)
    inst = generate_instance("gauge", LatticeSpec((3, 3, 3)), 4, seed=seed % 1000)
    a = rng.integers(1, 5, size=27)
    sub = binary_partition(inst, a, grow_region(inst, 12, seed=rng), seed=rng)
    y = rng.integers(0, 2, size=12)
    assert energy(inst, apply_binary_solution(sub, y, a)) == pytest.approx(sub.energy(y))


def test_tentative_components():
    inst = PottsInstance.from_edges(3, 3, [])
    _, enc = encode(inst, 1.0)
    bits = [0, 1, 1, 0, 0, 0, 0, 0, 1]
    assert tentative_components(enc, bits, [3, 2, 1]).tolist() == [2, 2, 3]
