import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from onehot_lns.potts import (
    LatticeSpec,
    ModelKind,
    PottsInstance,
    energy,
    generate_instance,
    greedy_refine,
    is_local_minimum,
    local_energies,
    local_energy,
)

from conftest import brute_potts_minimum, naive_energy, random_instance


def chain(n, J=-1.0, q=3):
    return PottsInstance.from_edges(n, q, [(i, i + 1, J, 0) for i in range(n - 1)])


class TestGenerate:
    def test_ferro_10_cubed(self):
        inst = generate_instance(ModelKind.FERROMAGNETIC, LatticeSpec((10, 10, 10)), 4, seed=3)
        assert inst.num_vars == 1000
        assert inst.num_edges == 3000
        assert np.all(inst.couplings == -1) and np.all(inst.shifts == 0)

    def test_antiferro_pair(self):
        inst = generate_instance("antiferro", LatticeSpec((2, 1, 1), periodic=False), 3, seed=0)
        assert inst.edges() == [(0, 1, 1.0, 0)]

    def test_glass_coupling_fraction(self):
        fracs = []
        for seed in range(40):
            inst = generate_instance("glass", LatticeSpec((4, 4, 4)), 4, seed=seed)
            assert inst.num_edges == 192
            assert set(np.unique(inst.couplings)) <= {-1.0, 1.0}
            fracs.append(np.mean(inst.couplings == 1))
        assert abs(np.mean(fracs) - 0.5) < 0.05

    def test_gauge_shift_distribution(self):
        shifts = np.concatenate([
            generate_instance("gauge", LatticeSpec((5, 5, 5)), 4, seed=s).shifts for s in range(20)
        ])
        n = shifts.size
        for value, p in ((0, 0.5), (1, 0.25), (-1, 0.25)):
            sigma = np.sqrt(p * (1 - p) / n)
            assert abs(np.mean(shifts == value) - p) < 3 * sigma

    def test_gauge_couplings_fixed(self):
        inst = generate_instance("gauge", LatticeSpec((3, 3, 3)), 4, seed=1)
        assert np.all(inst.couplings == -1)

    def test_deterministic(self):
        a = generate_instance("gauge", LatticeSpec((3, 3, 3)), 4, seed=9)
        b = generate_instance("gauge", LatticeSpec((3, 3, 3)), 4, seed=9)
        assert a.edges() == b.edges()

    def test_edges_are_lattice_neighbours(self):
        lat = LatticeSpec((3, 4, 5))
        inst = generate_instance("ferro", lat, 4, seed=0)
        coords = {lat.site(x, y, z): (x, y, z) for x in range(3) for y in range(4) for z in range(5)}
        for i, j, *_ in inst.edges():
            diff = [min(abs(a - b), d - abs(a - b)) for a, b, d in zip(coords[i], coords[j], lat.dims)]
            assert sorted(diff) == [0, 0, 1]

    @pytest.mark.parametrize("dims", [(0, 3, 3), (3, -1, 3)])
    def test_zero_volume_rejected(self, dims):
        with pytest.raises(ValueError):
            LatticeSpec(dims)

    def test_periodic_side_two_rejected(self):
        with pytest.raises(ValueError):
            LatticeSpec((2, 3, 3), periodic=True)

    def test_q_below_two_rejected(self):
        with pytest.raises(ValueError):
            generate_instance("ferro", LatticeSpec((3, 3, 3)), 1)

    def test_open_boundaries(self):
        inst = generate_instance("ferro", LatticeSpec((3, 3, 3), periodic=False), 4)
        assert inst.num_edges == 3 * 2 * 3 * 3


class TestEnergy:
    def test_ferro_pair(self):
        inst = PottsInstance.from_edges(2, 3, [(0, 1, -1.0, 0)])
        assert energy(inst, [2, 2]) == -1

    def test_gauge_pair_shift(self):
        inst = PottsInstance.from_edges(2, 3, [(0, 1, -1.0, 1)])
        assert energy(inst, [3, 2]) == -1
        assert energy(inst, [2, 3]) == 0

    def test_shift_wraps_mod_q(self):
        inst = PottsInstance.from_edges(2, 4, [(0, 1, -1.0, 1)])
        assert energy(inst, [1, 4]) == -1

    def test_ferro_uniform_cube(self):
        inst = generate_instance("ferro", LatticeSpec((4, 4, 4)), 4)
        for c in range(1, 5):
            assert energy(inst, np.full(64, c)) == -192

    def test_matches_naive(self, rng):
        for _ in range(20):
            inst = random_instance(rng, 7, 4)
            a = rng.integers(1, 5, size=7)
            assert energy(inst, a) == naive_energy(inst, a)

    @pytest.mark.parametrize("a", [[1, 2], [0, 1], [1, 4], [1, 2, 3]])
    def test_invalid_assignment(self, a):
        inst = PottsInstance.from_edges(3, 3, [(0, 1, -1.0, 0)]) if len(a) != 3 else \
            PottsInstance.from_edges(2, 3, [(0, 1, -1.0, 0)])
        with pytest.raises(ValueError):
            energy(inst, a)

    def test_instance_invariants(self):
        with pytest.raises(ValueError):
            PottsInstance.from_edges(2, 3, [(0, 0, 1.0, 0)])
        with pytest.raises(ValueError):
            PottsInstance.from_edges(2, 3, [(0, 1, 1.0, 0), (1, 0, 1.0, 0)])
        with pytest.raises(ValueError):
            PottsInstance.from_edges(2, 3, [(0, 2, 1.0, 0)])


class TestLocalEnergy:
    def test_isolated(self):
        inst = PottsInstance.from_edges(3, 3, [(0, 1, -1.0, 0)])
        assert local_energy(inst, [1, 1, 1], 2) == 0

    def test_chain_middle(self):
        assert local_energy(chain(3), [1, 1, 1], 1) == -2

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            local_energy(chain(3), [1, 1, 1], 3)

    def test_double_counting(self, rng):
        for _ in range(30):
            inst = random_instance(rng, 8, 3)
            a = rng.integers(1, 4, size=8)
            per_site = [local_energy(inst, a, i) for i in range(8)]
            assert sum(per_site) == 2 * energy(inst, a)
            np.testing.assert_array_equal(local_energies(inst, a), per_site)


class TestGreedy:
    def test_chain_fix(self):
        for seed in range(10):
            out = greedy_refine(chain(3), [1, 2, 1], seed=seed)
            assert len(set(out.tolist())) == 1
            assert energy(chain(3), out) == -2

    def test_fixed_point(self):
        inst = chain(4)
        a = np.array([2, 2, 2, 2])
        np.testing.assert_array_equal(greedy_refine(inst, a, seed=5), a)

    def test_tie_keeps_current(self):
        # S_1 sits between two different neighbours: both choices tie
        inst = chain(3)
        np.testing.assert_array_equal(greedy_refine(inst, [1, 1, 2], seed=0)[:2], [1, 1])

    def test_local_minimum_on_glass(self):
        for seed in range(5):
            inst = generate_instance("glass", LatticeSpec((3, 3, 3)), 4, seed=seed)
            a = np.random.default_rng(seed).integers(1, 5, size=27)
            out = greedy_refine(inst, a, seed=seed)
            assert energy(inst, out) <= energy(inst, a)
            assert is_local_minimum(inst, out)

    def test_global_bound_small(self):
        for seed in range(3):
            inst = generate_instance("gauge", LatticeSpec((2, 2, 2), periodic=False), 3, seed=seed)
            floor = brute_potts_minimum(inst)
            a = np.random.default_rng(seed).integers(1, 4, size=8)
            assert energy(inst, greedy_refine(inst, a, seed=seed)) >= floor

    def test_deterministic(self):
        inst = generate_instance("glass", LatticeSpec((3, 3, 3)), 4, seed=2)
        a = np.random.default_rng(0).integers(1, 5, size=27)
        np.testing.assert_array_equal(greedy_refine(inst, a, seed=4), greedy_refine(inst, a, seed=4))


@st.composite
def instances_and_states(draw):
    n = draw(st.integers(2, 7))
    q = draw(st.integers(2, 4))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n, q)
    a = rng.integers(1, q + 1, size=n)
    return inst, a, rng


@settings(max_examples=60, deadline=None)
@given(instances_and_states())
def test_energy_invariant_under_edge_permutation(data):
    inst, a, rng = data
    edges = inst.edges()
    perm = rng.permutation(len(edges)) if edges else []
    shuffled = PottsInstance.from_edges(inst.num_vars, inst.q, [edges[k] for k in perm])
    assert energy(shuffled, a) == energy(inst, a)


@settings(max_examples=60, deadline=None)
@given(instances_and_states())
def test_energy_invariant_under_label_permutation(data):
    inst, a, rng = data
    zero_shift = PottsInstance.from_edges(inst.num_vars, inst.q,
                                          [(i, j, J, 0) for i, j, J, _ in inst.edges()])
    relabel = rng.permutation(inst.q) + 1
    assert energy(zero_shift, relabel[a - 1]) == energy(zero_shift, a)


@settings(max_examples=40, deadline=None)
@given(instances_and_states(), st.integers(0, 1000), st.integers(0, 1000))
def test_greedy_idempotent(data, s1, s2):
    inst, a, _ = data
    once = greedy_refine(inst, a, seed=s1)
    twice = greedy_refine(inst, once, seed=s2)
    assert energy(inst, twice) == energy(inst, once)
