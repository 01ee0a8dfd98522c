"""Composite Hilbert-space bookkeeping.

A :class:`SubsystemLayout` fixes an ordered list of tensor factors.  Global
amplitude indices are row-major over that order (leftmost factor varies
slowest), so a state on ``[("s", 2), ("a", 2)]`` is stored as
``(s0 a0, s0 a1, s1 a0, s1 a1)``.

Operators are never materialized on the full space.  They carry the labels
of the legs they act on and are applied by contracting those legs only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "SubsystemLayout",
    "StateVector",
    "DensityMatrix",
    "HermitianOperator",
    "EmbeddedOperator",
    "compose",
    "kron_state",
    "basis_state",
    "embed",
    "apply_on_legs",
    "lift",
    "partial_trace",
    "overlap",
]

HERMITIAN_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SubsystemLayout:
    """Ordered register of tensor factors ``(label, dim)``."""

    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        factors = tuple((str(lab), int(dim)) for lab, dim in self.factors)
        labels = [lab for lab, _ in factors]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate factor labels in {labels}")
        for lab, dim in factors:
            if dim < 1:
                raise ValueError(f"factor {lab!r} has dimension {dim} < 1")
        object.__setattr__(self, "factors", factors)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.factors)

    @property
    def total_dim(self) -> int:
        return prod(self.dims)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown leg {label!r}; layout has {self.labels}") from None

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def dims_of(self, legs: Iterable[str]) -> tuple[int, ...]:
        return tuple(self.dim(leg) for leg in legs)

    def sub(self, legs: Iterable[str]) -> "SubsystemLayout":
        """Layout restricted to ``legs``, in the order given."""
        return SubsystemLayout(tuple((leg, self.dim(leg)) for leg in legs))

    def ordered(self, legs: Iterable[str]) -> tuple[str, ...]:
        """``legs`` sorted into layout order."""
        legs = set(legs)
        for leg in legs:
            self.index(leg)
        return tuple(lab for lab in self.labels if lab in legs)

    def complement(self, legs: Iterable[str]) -> tuple[str, ...]:
        legs = set(legs)
        return tuple(lab for lab in self.labels if lab not in legs)


def compose(factors: Sequence[tuple[str, int]]) -> SubsystemLayout:
    """Build a layout from ``(label, dim)`` pairs.

    >>> compose([("x", 3), ("y", 5)]).total_dim
    15
    """
    return SubsystemLayout(tuple(factors))


@dataclass(frozen=True)
class StateVector:
    """Pure state of a composite system."""

    layout: SubsystemLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.layout.total_dim:
            raise ValueError(
                f"{amps.size} amplitudes for layout of dimension {self.layout.total_dim}"
            )
        object.__setattr__(self, "amplitudes", _frozen(amps))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        return StateVector(self.layout, self.amplitudes / self.norm())

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.dims)


@dataclass(frozen=True)
class DensityMatrix:
    """Density matrix over the legs of ``layout``."""

    layout: SubsystemLayout
    entries: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.entries, dtype=complex)
        n = self.layout.total_dim
        if rho.shape != (n, n):
            raise ValueError(f"density matrix of shape {rho.shape} for dimension {n}")
        object.__setattr__(self, "entries", _frozen(rho))

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def purity(self) -> float:
        return float(np.real(np.vdot(self.entries.conj().T, self.entries)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.entries + self.entries.conj().T))

    def validity_errors(self) -> dict[str, float]:
        """Deviation from Hermiticity, unit trace and positivity."""
        rho = self.entries
        return {
            "hermiticity": float(np.max(np.abs(rho - rho.conj().T), initial=0.0)),
            "trace": abs(self.trace() - 1.0),
            "negativity": max(0.0, -float(self.eigenvalues().min())),
        }


@dataclass(frozen=True)
class HermitianOperator:
    """Hamiltonian term acting on the named legs.

    ``matrix`` is indexed row-major over ``legs`` in the order given.  When
    the term is block diagonal in the basis of its first leg, ``blocks``
    holds the diagonal blocks (one per basis state of that leg) so that
    propagators can diagonalize them separately.
    """

    legs: tuple[str, ...]
    matrix: np.ndarray
    blocks: tuple[np.ndarray, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        legs = tuple(self.legs)
        if len(set(legs)) != len(legs):
            raise ValueError(f"repeated legs {legs}")
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator matrix must be square, got {m.shape}")
        scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
        if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL * scale:
            raise ValueError("operator matrix is not Hermitian")
        object.__setattr__(self, "legs", legs)
        object.__setattr__(self, "matrix", _frozen(m))
        if self.blocks is not None:
            blocks = tuple(_frozen(b) for b in self.blocks)
            if sum(b.shape[0] for b in blocks) != m.shape[0]:
                raise ValueError("blocks do not tile the operator matrix")
            object.__setattr__(self, "blocks", blocks)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def check_layout(self, layout: SubsystemLayout) -> None:
        dims = layout.dims_of(self.legs)
        if prod(dims) != self.dim:
            raise ValueError(
                f"operator of dimension {self.dim} on legs {self.legs} with dims {dims}"
            )


def apply_on_legs(
    amps: np.ndarray,
    layout: SubsystemLayout,
    legs: Sequence[str],
    blocks: Sequence[np.ndarray] | np.ndarray,
) -> np.ndarray:
    """Contract a matrix into the ``legs`` of a flat amplitude array.

    ``amps`` has shape ``(total_dim,)`` or ``(total_dim, batch)``.  ``blocks``
    is either one matrix over the legs, or a sequence of diagonal blocks
    along the first named leg.
    """
    if isinstance(blocks, np.ndarray):
        blocks = (blocks,)
    axes = [layout.index(leg) for leg in legs]
    batch = amps.shape[1:]
    psi = amps.reshape(layout.dims + batch)
    front = list(range(len(axes)))
    psi = np.moveaxis(psi, axes, front)
    moved_shape = psi.shape
    block_dim = prod(moved_shape[: len(axes)])
    flat = psi.reshape(block_dim, -1)
    if len(blocks) == 1:
        out = blocks[0] @ flat
    else:
        out = np.empty(flat.shape, dtype=np.result_type(flat, *blocks))
        start = 0
        for b in blocks:
            stop = start + b.shape[0]
            out[start:stop] = b @ flat[start:stop]
            start = stop
    out = np.moveaxis(out.reshape(moved_shape), front, axes)
    return out.reshape(amps.shape)


@dataclass(frozen=True)
class EmbeddedOperator:
    """Action of a leg operator on a full layout (identity elsewhere)."""

    op: HermitianOperator
    layout: SubsystemLayout

    def apply(self, state: StateVector) -> StateVector:
        if state.layout != self.layout:
            raise ValueError("state layout does not match embedding layout")
        return StateVector(
            self.layout, apply_on_legs(state.amplitudes, self.layout, self.op.legs, self.op.matrix)
        )

    def __matmul__(self, state: StateVector) -> StateVector:
        return self.apply(state)

    def expectation(self, state: StateVector) -> float:
        return float(np.real(np.vdot(state.amplitudes, self.apply(state).amplitudes)))


def embed(op: HermitianOperator, layout: SubsystemLayout) -> EmbeddedOperator:
    for leg in op.legs:
        layout.index(leg)
    op.check_layout(layout)
    return EmbeddedOperator(op, layout)


def lift(op: HermitianOperator, target_legs: Sequence[str], layout: SubsystemLayout) -> np.ndarray:
    """Dense matrix of ``op`` over ``target_legs`` (a superset of its legs).

    Only used for blocks well below the full space.
    """
    target_legs = tuple(target_legs)
    missing = set(op.legs) - set(target_legs)
    if missing:
        raise ValueError(f"target legs {target_legs} do not contain {sorted(missing)}")
    sub = layout.sub(target_legs)
    n = sub.total_dim
    eye = np.eye(n, dtype=np.result_type(op.matrix, float))
    return apply_on_legs(eye, sub, op.legs, op.matrix)


def kron_state(parts: Sequence[StateVector], layout: SubsystemLayout | None = None) -> StateVector:
    """Tensor product of single-factor states, in order.

    If ``layout`` is given the parts must cover its factors in layout order.
    """
    factors = []
    for p in parts:
        factors.extend(p.layout.factors)
    built = compose(factors)
    if layout is not None and built != layout:
        raise ValueError(f"parts cover {built.factors}, layout expects {layout.factors}")
    amps = np.ones(1, dtype=complex)
    for p in parts:
        amps = np.kron(amps, p.amplitudes)
    return StateVector(built, amps)


def basis_state(layout: SubsystemLayout, **indices: int) -> StateVector:
    """Computational basis state; legs not named sit at index 0."""
    idx = [0] * len(layout.factors)
    for leg, i in indices.items():
        k = layout.index(leg)
        if not 0 <= i < layout.dims[k]:
            raise ValueError(f"index {i} out of range for leg {leg!r}")
        idx[k] = i
    amps = np.zeros(layout.total_dim, dtype=complex)
    amps[np.ravel_multi_index(idx, layout.dims)] = 1.0
    return StateVector(layout, amps)


def partial_trace(state: StateVector | DensityMatrix, keep: Iterable[str]) -> DensityMatrix:
    """Reduced density matrix over ``keep`` (returned in layout order).

    Pure inputs are reshaped into a ``(kept, traced)`` block so that only a
    ``kept x kept`` matrix is ever formed.
    """
    keep = tuple(keep)
    if not keep:
        raise ValueError("keep set is empty")
    layout = state.layout
    keep = layout.ordered(keep)
    axes = [layout.index(leg) for leg in keep]
    kept = layout.sub(keep)
    k = kept.total_dim
    if isinstance(state, StateVector):
        psi = np.moveaxis(state.tensor(), axes, range(len(axes))).reshape(k, -1)
        rho = psi @ psi.conj().T
    else:
        n = len(layout.factors)
        rho_t = state.entries.reshape(layout.dims + layout.dims)
        traced = [i for i in range(n) if i not in axes]
        letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
        row = [letters[i] for i in range(n)]
        col = [letters[n + i] for i in range(n)]
        for i in traced:
            col[i] = row[i]
        out = "".join(row[i] for i in axes) + "".join(col[i] for i in axes)
        rho = np.einsum("".join(row) + "".join(col) + "->" + out, rho_t).reshape(k, k)
    return DensityMatrix(kept, rho)


def overlap(a: StateVector, b: StateVector) -> complex:
    """Inner product ``<a|b>`` (conjugate-linear in ``a``)."""
    if a.layout != b.layout:
        raise ValueError("overlap of states on different layouts")
    return complex(np.vdot(a.amplitudes, b.amplitudes))
