"""The optimization loop: partition, solve, replace, refine, track the best.

Trials are seeded from ``(master seed, trial index)`` only, so every method
run with the same master seed starts from the same initial states.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from onehot_lns import embedding as emb
from onehot_lns.partition import (
    binary_partition,
    apply_binary_solution,
    components_for_budget,
    grow_region,
    multivalued_partition,
    multivalued_subqubo,
    random_partition,
    tentative_components,
)
from onehot_lns.potts import PottsInstance, energy, greedy_refine
from onehot_lns.qubo import (
    ClampedQubo,
    Infeasible,
    OneHotEncoding,
    Qubo,
    clamp_to,
    decode,
    default_lambda,
    encode,
    is_feasible,
    onehot_bits,
    qubo_energy,
    refine_bits,
)
from onehot_lns.sampler import AnnealSchedule, Sampler, SamplerError, TransportError, best_of, make_sampler

logger = logging.getLogger(__name__)

METHODS = ("random", "multivalued", "binary")
RESULT_COLUMNS = ("trial", "iteration", "method", "current_energy", "best_energy", "feasible",
                  "subproblem_bits", "millis")
AGGREGATE_COLUMNS = ("iteration", "method", "min", "mean", "max")


@dataclass(frozen=True)
class RunConfig:
    method: str = "binary"
    lam: float | None = None
    bit_budget: int = 64
    region_size: int | None = None
    components: int | None = None
    iterations: int = 200
    trials: int = 16
    reads: int = 1000
    sweeps: int = 100
    seed: int = 0
    solver: str = "sa"
    embed: bool = False
    hardware: tuple[int, int, int] = (16, 16, 4)
    defects: int = 0
    retries: int = 2

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.bit_budget < 1:
            raise ValueError("bit_budget must be at least 1")
        if self.reads < 1:
            raise ValueError("reads must be at least 1")


@dataclass
class TrialState:
    """Mutable per-trial state.

    ``assignment`` is always feasible: the current state for the binary
    method, and the fallback used to repair infeasible bit states otherwise.
    """

    assignment: np.ndarray
    bits: np.ndarray | None
    best_assignment: np.ndarray
    best_energy: float
    bits_feasible: bool = True

    @property
    def feasible(self) -> bool:
        return self.bits is None or self.bits_feasible


@dataclass
class RunRecord:
    """Telemetry for one method: one row per (trial, iteration)."""

    method: str
    rows: list[dict] = field(default_factory=list)
    errors: list[tuple[int, int, str]] = field(default_factory=list)
    best_assignments: dict[int, np.ndarray] = field(default_factory=dict)

    def trial_rows(self, trial: int) -> list[dict]:
        return [r for r in self.rows if r["trial"] == trial]

    @property
    def trials(self) -> list[int]:
        return sorted({r["trial"] for r in self.rows})

    def best_series(self, trial: int) -> np.ndarray:
        return np.array([r["best_energy"] for r in self.trial_rows(trial)])

    def final_best(self) -> np.ndarray:
        return np.array([self.best_series(t)[-1] for t in self.trials])

    def iterations_to(self, target: float, tol: float = 1e-9) -> np.ndarray:
        """First iteration whose best energy reaches ``target``; -1 if never."""
        out = []
        for t in self.trials:
            rows = self.trial_rows(t)
            hit = [r["iteration"] for r in rows if r["best_energy"] <= target + tol]
            out.append(hit[0] if hit else -1)
        return np.array(out)

    def aggregate(self) -> list[dict]:
        by_iter: dict[int, list[float]] = {}
        for r in self.rows:
            by_iter.setdefault(r["iteration"], []).append(r["best_energy"])
        return [
            {"iteration": it, "method": self.method, "min": float(np.min(v)),
             "mean": float(np.mean(v)), "max": float(np.max(v))}
            for it, v in sorted(by_iter.items())
        ]


def trial_seed(master: int, trial: int, *stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master, trial, *stream])


def initial_state(instance: PottsInstance, seed=None) -> np.ndarray:
    """Uniformly random component per variable."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.integers(1, instance.q + 1, size=instance.num_vars).astype(np.int64)


class Runner:
    """Holds the encoded problem and solver shared by all trials of a run."""

    def __init__(self, instance: PottsInstance, config: RunConfig, sampler: Sampler | None = None):
        self.instance = instance
        self.config = config
        self.lam = config.lam if config.lam is not None else default_lambda(instance)
        self.qubo: Qubo | None = None
        self.enc: OneHotEncoding | None = None
        if config.method != "binary":
            self.qubo, self.enc = encode(instance, self.lam)
        if sampler is None:
            kwargs = {"schedule": AnnealSchedule(config.sweeps)} if config.solver == "sa" else {}
            sampler = make_sampler(config.solver, **kwargs)
        self.sampler = sampler
        self.hw = None
        if config.embed:
            m, n, l = config.hardware
            defects = emb.random_defects(m, n, l, config.defects, config.seed) if config.defects else ()
            self.hw = emb.chimera(m, n, l, defects)

    # sizes -----------------------------------------------------------------

    def _components(self, region_size: int) -> int:
        q = self.instance.q
        if self.config.components is not None:
            return self.config.components
        return components_for_budget(q, region_size, self.config.bit_budget)

    def _region_size(self) -> int:
        cfg, n, q = self.config, self.instance.num_vars, self.instance.q
        if cfg.region_size is not None:
            return min(cfg.region_size, n)
        if cfg.method == "binary":
            return min(cfg.bit_budget, n)
        r = cfg.components if cfg.components is not None else q
        return max(1, min(n, cfg.bit_budget // r))

    # state -------------------------------------------------------------------

    def start(self, trial: int) -> TrialState:
        a = initial_state(self.instance, trial_seed(self.config.seed, trial, 0))
        bits = None if self.config.method == "binary" else onehot_bits(self.enc, a)
        return TrialState(a, bits, a.copy(), energy(self.instance, a))

    def current_energy(self, st: TrialState) -> float:
        if st.bits is None:
            return energy(self.instance, st.assignment)
        return qubo_energy(self.qubo, st.bits)

    def _solve(self, qubo: Qubo, rng) -> tuple[np.ndarray, float]:
        seed = int(rng.integers(2**63))
        for attempt in range(self.config.retries + 1):
            try:
                return best_of(self.sampler.solve(qubo, self.config.reads, seed))
            except TransportError:
                if attempt == self.config.retries:
                    raise
                logger.warning("sampler transport failure, retrying (%d)", attempt + 1)

    def _repair(self, st: TrialState, rng) -> None:
        """Make a bit state feasible before a multivalued partition."""
        a = tentative_components(self.enc, st.bits, st.assignment)
        a = greedy_refine(self.instance, a, rng)
        st.assignment = a
        st.bits = onehot_bits(self.enc, a)

    def _bit_subproblem(self, st: TrialState, rng) -> ClampedQubo:
        cfg = self.config
        if cfg.method == "random":
            sub = random_partition(self.qubo, self.enc, st.bits, cfg.bit_budget, rng)
            if self.hw is not None:
                m = sub.qubo
                order = [int(b) for b in sub.bits]
                edges = [(int(sub.bits[i]), int(sub.bits[j])) for i, j in zip(m.rows, m.cols)]
                e = emb.embed_subproblem(edges, order, self.hw, rng.integers(2**32))
                sub = clamp_to(self.qubo, st.bits, sorted(e.chains))
            return sub
        if not is_feasible(self.enc, st.bits):
            self._repair(st, rng)
        if self.hw is not None:
            _, selection = emb.embed_multivalued(self.instance, self.enc, self.qubo, st.assignment, self.hw,
                                                 rng.integers(2**32), max_vars=self._region_size())
            return multivalued_subqubo(self.qubo, self.enc, st.assignment, selection)
        region = grow_region(self.instance, self._region_size(), rng)
        _, sub = multivalued_partition(self.qubo, self.enc, st.assignment, region,
                                       self._components(len(region)), rng)
        return sub

    def step(self, st: TrialState, rng) -> int:
        """One iteration in place; returns the number of free subproblem bits."""
        if self.config.method == "binary":
            return self._step_binary(st, rng)
        sub = self._bit_subproblem(st, rng)
        y, e = self._solve(sub.qubo, rng)
        if e <= qubo_energy(sub.qubo, sub.incumbent):
            st.bits = sub.lift(st.bits, y)
        st.bits = refine_bits(self.qubo, self.enc, st.bits, rng)
        a = decode(self.enc, st.bits)
        st.bits_feasible = not isinstance(a, Infeasible)
        if st.bits_feasible:
            st.assignment = a
            self._track(st, a)
        return int(sub.bits.size)

    def _step_binary(self, st: TrialState, rng) -> int:
        inst = self.instance
        if self.hw is not None:
            q = inst.q
            beta_all = (st.assignment - 1 + rng.integers(1, q, size=inst.num_vars)) % q + 1
            e = emb.embed_binary(inst, st.assignment, beta_all, self.hw, rng.integers(2**32),
                                 max_vars=self._region_size())
            region = np.array(sorted(e.groups), dtype=np.int64)
            sub = binary_partition(inst, st.assignment, region, beta=beta_all[region])
        else:
            region = grow_region(inst, self._region_size(), rng)
            sub = binary_partition(inst, st.assignment, region, rng)
        y, e = self._solve(sub.reduced, rng)
        if e <= 0.0:
            st.assignment = apply_binary_solution(sub, y, st.assignment)
        st.assignment = greedy_refine(inst, st.assignment, rng)
        self._track(st, st.assignment)
        return int(sub.vars.size)

    def _track(self, st: TrialState, a: np.ndarray) -> None:
        e = energy(self.instance, a)
        if e < st.best_energy:
            st.best_energy = e
            st.best_assignment = a.copy()

    def run_trial(self, trial: int, record: RunRecord) -> None:
        st = self.start(trial)
        record.rows.append(self._row(trial, 0, st, 0, 0.0))
        for it in range(1, self.config.iterations + 1):
            rng = np.random.default_rng(trial_seed(self.config.seed, trial, 1, it))
            t0 = time.perf_counter()
            snapshot = (st.assignment.copy(), None if st.bits is None else st.bits.copy(), st.bits_feasible)
            try:
                nbits = self.step(st, rng)
            except (SamplerError, emb.EmbeddingError) as exc:
                st.assignment, st.bits, st.bits_feasible = snapshot
                record.errors.append((trial, it, str(exc)))
                logger.error("trial %d iteration %d aborted: %s", trial, it, exc)
                nbits = 0
            millis = (time.perf_counter() - t0) * 1000.0
            record.rows.append(self._row(trial, it, st, nbits, millis))
        record.best_assignments[trial] = st.best_assignment

    def _row(self, trial, it, st, nbits, millis) -> dict:
        return {
            "trial": trial,
            "iteration": it,
            "method": self.config.method,
            "current_energy": self.current_energy(st),
            "best_energy": st.best_energy,
            "feasible": st.feasible,
            "subproblem_bits": nbits,
            "millis": millis,
        }


def run_iteration(runner: Runner, state: TrialState, rng) -> TrialState:
    """Advance a copy of ``state`` by one iteration."""
    st = replace(state, assignment=state.assignment.copy(),
                 bits=None if state.bits is None else state.bits.copy())
    runner.step(st, rng)
    return st


def run_experiment(instance: PottsInstance, config: RunConfig, sampler: Sampler | None = None) -> RunRecord:
    runner = Runner(instance, config, sampler)
    record = RunRecord(config.method)
    for trial in range(config.trials):
        runner.run_trial(trial, record)
        logger.info("%s trial %d: best %.6g", config.method, trial, record.best_series(trial)[-1])
    return record


def compare(instance: PottsInstance, config: RunConfig, methods: Sequence[str] = METHODS,
            sampler: Sampler | None = None) -> dict[str, RunRecord]:
    """Run several methods from the same initial states."""
    return {m: run_experiment(instance, replace(config, method=m), sampler) for m in methods}


def check_record(record: RunRecord, tol: float = 1e-9) -> list[str]:
    """Invariant violations: rising best energy, infeasible binary states."""
    problems = []
    for t in record.trials:
        series = record.best_series(t)
        bad = np.flatnonzero(np.diff(series) > tol)
        for k in bad:
            problems.append(f"{record.method} trial {t}: best energy rose at iteration {k + 1}")
        if record.method == "binary":
            for r in record.trial_rows(t):
                if not r["feasible"]:
                    problems.append(f"binary trial {t}: infeasible state at iteration {r['iteration']}")
    return problems
