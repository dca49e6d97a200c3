"""Sub-QUBO solvers: exhaustive search, simulated annealing, and a stub.

Every solver returns a :class:`SampleSet` whose energies are recomputed
from the returned states with :meth:`Qubo.energies`.
"""
from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

from onehot_lns import _kernels
from onehot_lns.qubo import Qubo

__all__ = [
    "SampleSet",
    "AnnealSchedule",
    "brute_force",
    "sa_sample",
    "best_of",
    "Sampler",
    "ExactSampler",
    "SimulatedAnnealingSampler",
    "RandomStubSampler",
    "SamplerError",
    "TransportError",
    "DEFAULT_READS",
]

DEFAULT_READS = 1000
BRUTE_FORCE_CAP = 25


class SamplerError(RuntimeError):
    pass


class TransportError(SamplerError):
    """A remote sampler could not be reached; the call may be retried."""

    retryable = True


@dataclass(frozen=True, eq=False)
class SampleSet:
    """States sorted by ascending energy, ties kept in read order."""

    states: np.ndarray
    energies: np.ndarray
    reads: int

    @classmethod
    def from_states(cls, qubo: Qubo, states, reads: int | None = None) -> "SampleSet":
        states = np.asarray(states, dtype=np.uint8)
        if states.ndim == 1:
            states = states[None, :]
        if states.shape[1] != qubo.num_bits:
            raise ValueError(f"states must have {qubo.num_bits} columns")
        energies = qubo.energies(states) if len(states) else np.zeros(0)
        order = np.argsort(energies, kind="stable")
        return cls(states[order], energies[order], len(states) if reads is None else reads)

    def __len__(self):
        return len(self.energies)

    @property
    def samples(self) -> list[tuple[np.ndarray, float]]:
        return [(s, float(e)) for s, e in zip(self.states, self.energies)]

    def merge(self, other: "SampleSet") -> "SampleSet":
        states = np.concatenate([self.states, other.states])
        energies = np.concatenate([self.energies, other.energies])
        order = np.argsort(energies, kind="stable")
        return SampleSet(states[order], energies[order], self.reads + other.reads)


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric inverse-temperature ramp.

    ``beta_initial`` / ``beta_final`` left as None are scaled by the largest
    absolute coefficient of the problem (0.1 / max and 10 / max).
    """

    sweeps: int = 100
    beta_initial: float | None = None
    beta_final: float | None = None

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("schedule needs at least one sweep")
        for b in (self.beta_initial, self.beta_final):
            if b is not None and not b > 0:
                raise ValueError("inverse temperatures must be positive")
        if self.beta_initial is not None and self.beta_final is not None:
            if self.beta_initial > self.beta_final:
                raise ValueError("beta_initial must not exceed beta_final")

    def betas(self, qubo: Qubo) -> np.ndarray:
        scale = qubo.max_abs_coefficient() or 1.0
        b0 = self.beta_initial if self.beta_initial is not None else 0.1 / scale
        b1 = self.beta_final if self.beta_final is not None else 10.0 / scale
        if b0 > b1:
            raise ValueError("beta_initial must not exceed beta_final")
        if self.sweeps == 1:
            return np.array([b1])
        return np.geomspace(b0, b1, self.sweeps)


def _int_to_bits(ints: np.ndarray, n: int) -> np.ndarray:
    # bit 0 is the most significant digit of the state's integer value
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((ints[:, None] >> shifts) & 1).astype(np.uint8)


def brute_force(qubo: Qubo, cap: int = BRUTE_FORCE_CAP, chunk: int = 1 << 16) -> tuple[np.ndarray, float]:
    """Exact minimum by enumeration; ties go to the smallest state integer."""
    n = qubo.num_bits
    if n > cap:
        raise ValueError(f"brute force limited to {cap} bits, got {n}")
    if n == 0:
        return np.zeros(0, dtype=np.uint8), qubo.offset
    best_e, best_i = np.inf, -1
    total = 1 << n
    for start in range(0, total, chunk):
        ints = np.arange(start, min(start + chunk, total), dtype=np.int64)
        e = qubo.energies(_int_to_bits(ints, n))
        k = int(np.argmin(e))
        if e[k] < best_e:
            best_e, best_i = float(e[k]), int(ints[k])
    state = _int_to_bits(np.array([best_i]), n)[0]
    return state, best_e


def read_seeds(seed, reads: int) -> np.ndarray:
    """Independent 64-bit stream seeds, one per read index."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.generate_state(reads, dtype=np.uint64)


def sa_sample(qubo: Qubo, reads: int = DEFAULT_READS, schedule: AnnealSchedule | None = None,
              seed=None) -> SampleSet:
    if reads < 1:
        raise ValueError("reads must be at least 1")
    schedule = schedule or AnnealSchedule()
    betas = schedule.betas(qubo)
    n = qubo.num_bits
    if n == 0:
        return SampleSet.from_states(qubo, np.zeros((reads, 0), dtype=np.uint8))
    m = qubo.csr
    states = _kernels.sa_run(n, np.ascontiguousarray(qubo.linear), m.indptr.astype(np.int64),
                             m.indices.astype(np.int64), m.data, betas, read_seeds(seed, reads))
    return SampleSet.from_states(qubo, states)


def best_of(samples: SampleSet) -> tuple[np.ndarray, float]:
    if len(samples) == 0:
        raise ValueError("empty sample set")
    return samples.states[0], float(samples.energies[0])


class Sampler(abc.ABC):
    """Pluggable sub-QUBO solver.

    ``solve`` must not mutate its input.  Remote implementations signal
    transient failures with :class:`TransportError`.
    """

    name = "sampler"

    @abc.abstractmethod
    def solve(self, qubo: Qubo, reads: int, seed=None) -> SampleSet:
        ...


class ExactSampler(Sampler):
    name = "exact"

    def __init__(self, cap: int = BRUTE_FORCE_CAP):
        self.cap = cap

    def solve(self, qubo, reads=1, seed=None):
        state, _ = brute_force(qubo, self.cap)
        return SampleSet.from_states(qubo, state[None, :], reads=reads)


class SimulatedAnnealingSampler(Sampler):
    name = "sa"

    def __init__(self, schedule: AnnealSchedule | None = None):
        self.schedule = schedule or AnnealSchedule()

    def solve(self, qubo, reads=DEFAULT_READS, seed=None):
        return sa_sample(qubo, reads, self.schedule, seed)


class RandomStubSampler(Sampler):
    """Uniformly random states; stands in for an unavailable remote annealer."""

    name = "stub"

    def solve(self, qubo, reads=DEFAULT_READS, seed=None):
        rng = np.random.default_rng(seed)
        return SampleSet.from_states(qubo, rng.integers(0, 2, size=(reads, qubo.num_bits), dtype=np.uint8))


SAMPLERS = {cls.name: cls for cls in (ExactSampler, SimulatedAnnealingSampler, RandomStubSampler)}


def make_sampler(name: str, **kwargs) -> Sampler:
    try:
        return SAMPLERS[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; choose from {sorted(SAMPLERS)}") from None
