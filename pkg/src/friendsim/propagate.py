"""Exact unitary evolution through piecewise-constant stage schedules.

Each stage's terms are partitioned into groups with pairwise-disjoint leg
sets.  Terms inside a group are summed on the union of their legs and
diagonalized once per stage; groups commute, so the stage propagator is the
product of the group propagators, each applied by contracting its own legs.
hbar = 1 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Iterator, Sequence

import numpy as np

from .tensorspace import (
    HermitianOperator,
    StateVector,
    SubsystemLayout,
    apply_on_legs,
    lift,
)

__all__ = [
    "BlockTooLarge",
    "Propagator",
    "Stage",
    "StageSchedule",
    "Trajectory",
    "exponentiate",
    "partition_terms",
    "iter_schedule",
    "run_schedule",
    "DEFAULT_BLOCK_CAP",
    "DEFAULT_SAMPLES",
]

DEFAULT_BLOCK_CAP = 4096
DEFAULT_SAMPLES = 512


class BlockTooLarge(ValueError):
    """A coupled leg block exceeds the diagonalization cap."""


@dataclass(frozen=True)
class Propagator:
    """``exp(-i H t)`` for a Hamiltonian block, stored as an eigendecomposition.

    ``eigvecs`` holds one unitary per diagonal block along the first leg
    (a single entry when the block has no such structure); ``eigvals`` is
    the concatenation of their eigenvalues.
    """

    legs: tuple[str, ...]
    dims: tuple[int, ...]
    eigvals: np.ndarray
    eigvecs: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return prod(self.dims)

    def unitary(self, t: float) -> np.ndarray:
        """Dense ``exp(-iHt)`` over the propagator's legs."""
        u = np.zeros((self.dim, self.dim), dtype=complex)
        start = 0
        for v in self.eigvecs:
            stop = start + v.shape[0]
            ph = np.exp(-1j * self.eigvals[start:stop] * t)
            u[start:stop, start:stop] = (v * ph) @ v.conj().T
            start = stop
        return u

    def to_eigenbasis(self, amps: np.ndarray, layout: SubsystemLayout) -> np.ndarray:
        return apply_on_legs(amps, layout, self.legs, tuple(v.conj().T for v in self.eigvecs))

    def from_eigenbasis(self, amps: np.ndarray, layout: SubsystemLayout) -> np.ndarray:
        return apply_on_legs(amps, layout, self.legs, self.eigvecs)

    def phase_tensor(self, layout: SubsystemLayout, t: float) -> np.ndarray:
        """Eigenphases broadcastable against ``amps.reshape(layout.dims)``."""
        shape = [1] * len(layout.factors)
        ph = np.exp(-1j * self.eigvals * t).reshape(self.dims)
        axes = [layout.index(leg) for leg in self.legs]
        order = np.argsort(axes)
        ph = np.transpose(ph, order)
        for k, ax in enumerate(sorted(axes)):
            shape[ax] = self.dims[order[k]]
        return ph.reshape(shape)

    def apply(self, state: StateVector, t: float) -> StateVector:
        amps = self.to_eigenbasis(state.amplitudes, state.layout)
        amps = (amps.reshape(state.layout.dims) * self.phase_tensor(state.layout, t)).reshape(-1)
        return StateVector(state.layout, self.from_eigenbasis(amps, state.layout))

    def unitarity_error(self, t: float) -> float:
        u = self.unitary(t)
        return float(np.max(np.abs(u @ u.conj().T - np.eye(self.dim))))


def _block_structure(terms: Sequence[HermitianOperator], legs: tuple[str, ...]):
    """Per-block matrices if every term shares ``legs`` and is block diagonal."""
    if not all(t.blocks is not None and t.legs == legs for t in terms):
        return None
    nblocks = {len(t.blocks) for t in terms}
    if len(nblocks) != 1:
        return None
    return [sum(t.blocks[i] for t in terms) for i in range(nblocks.pop())]


def exponentiate(
    terms: Sequence[HermitianOperator],
    layout: SubsystemLayout,
    cap: int = DEFAULT_BLOCK_CAP,
) -> Propagator:
    """Diagonalize the sum of ``terms`` on the union of their legs.

    ``Propagator.unitary(t)`` then gives ``exp(-i H t)`` for any real ``t``.
    """
    if not terms:
        raise ValueError("no terms to exponentiate")
    legs = layout.ordered(leg for t in terms for leg in t.legs)
    dims = layout.dims_of(legs)
    if prod(dims) > cap:
        raise BlockTooLarge(
            f"coupled block on legs {legs} has dimension {prod(dims)} > cap {cap}"
        )
    for t in terms:
        t.check_layout(layout)
    blocks = _block_structure(terms, legs)
    if blocks is None:
        h = sum(lift(t, legs, layout) for t in terms)
        blocks = [h]
    vals, vecs = [], []
    for b in blocks:
        w, v = np.linalg.eigh(b)
        vals.append(w)
        vecs.append(v)
    return Propagator(legs, dims, np.concatenate(vals), tuple(vecs))


def partition_terms(terms: Sequence[HermitianOperator]) -> list[list[HermitianOperator]]:
    """Group terms into connected components of shared legs."""
    groups: list[tuple[set[str], list[HermitianOperator]]] = []
    for term in terms:
        legs = set(term.legs)
        merged = [g for g in groups if g[0] & legs]
        for g in merged:
            groups.remove(g)
            legs |= g[0]
        members = [t for g in merged for t in g[1]] + [term]
        groups.append((legs, members))
    return [members for _, members in groups]


@dataclass(frozen=True)
class Stage:
    terms: tuple[HermitianOperator, ...]
    duration: float
    name: str = ""

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"stage duration must be positive, got {self.duration}")
        object.__setattr__(self, "terms", tuple(self.terms))


@dataclass(frozen=True)
class StageSchedule:
    """Ordered stages starting at ``t = 0``.

    Unless ``sample_times`` is given, each stage is sampled at
    ``samples_per_stage`` uniform points, and every stage boundary is
    included exactly.
    """

    stages: tuple[Stage, ...]
    samples_per_stage: int = DEFAULT_SAMPLES
    sample_times: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))

    def boundaries(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.stages])])

    @property
    def span(self) -> float:
        return float(self.boundaries()[-1])

    def times(self) -> np.ndarray:
        if self.sample_times is not None:
            return np.asarray(self.sample_times, dtype=float)
        b = self.boundaries()
        if not self.stages:
            return np.zeros(1)
        parts = [
            np.linspace(b[i], b[i + 1], self.samples_per_stage, endpoint=False)
            for i in range(len(self.stages))
        ]
        return np.concatenate(parts + [b[-1:]])


@dataclass(frozen=True)
class Trajectory:
    layout: SubsystemLayout
    times: np.ndarray
    states: np.ndarray  # (len(times), total_dim)

    def state(self, k: int) -> StateVector:
        return StateVector(self.layout, self.states[k])

    def __len__(self) -> int:
        return len(self.times)


def _stage_propagators(stage: Stage, layout, cap) -> list[Propagator]:
    return [exponentiate(g, layout, cap) for g in partition_terms(stage.terms)]


def iter_schedule(
    initial: StateVector,
    schedule: StageSchedule,
    times: Sequence[float] | None = None,
    cap: int = DEFAULT_BLOCK_CAP,
) -> Iterator[tuple[float, StateVector]]:
    """Yield ``(t, state)`` at each sample time, in increasing order.

    Every sample is evolved from the start of its stage, so errors do not
    accumulate across samples.  A time on a stage boundary is attributed to
    the earlier stage.
    """
    layout = initial.layout
    for stage in schedule.stages:
        for term in stage.terms:
            for leg in term.legs:
                layout.index(leg)
    times = np.sort(np.asarray(schedule.times() if times is None else times, dtype=float))
    bounds = schedule.boundaries()
    span = bounds[-1]
    tol = 1e-12 * max(1.0, span)
    if times.size and (times[0] < -tol or times[-1] > span + tol):
        raise ValueError(f"sample times outside the schedule span [0, {span}]")
    amps = initial.amplitudes
    k = 0
    while k < len(times) and times[k] <= tol and not schedule.stages:
        yield float(times[k]), initial
        k += 1
    for i, stage in enumerate(schedule.stages):
        start, stop = bounds[i], bounds[i + 1]
        props = _stage_propagators(stage, layout, cap)
        eig = amps
        for p in props:
            eig = p.to_eigenbasis(eig, layout)
        eig_t = eig.reshape(layout.dims)

        def at(t):
            a = eig_t
            for p in props:
                a = a * p.phase_tensor(layout, t - start)
            a = a.reshape(-1)
            for p in props:
                a = p.from_eigenbasis(a, layout)
            return a

        while k < len(times) and times[k] <= stop + tol:
            yield float(times[k]), StateVector(layout, at(times[k]))
            k += 1
        amps = at(stop)


def run_schedule(
    initial: StateVector,
    schedule: StageSchedule,
    times: Sequence[float] | None = None,
    cap: int = DEFAULT_BLOCK_CAP,
) -> Trajectory:
    """Materialize the whole trajectory (use :func:`iter_schedule` for big spaces)."""
    ts, states = [], []
    for t, s in iter_schedule(initial, schedule, times, cap):
        ts.append(t)
        states.append(s.amplitudes)
    return Trajectory(initial.layout, np.array(ts), np.array(states).reshape(len(ts), -1))
