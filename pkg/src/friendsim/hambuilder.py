"""Hamiltonian terms for laboratories and their external observers.

Conventions: two-level legs use index 0 for ``h`` (or the apparatus ready
state ``A_h``) and index 1 for ``v`` (``A_v``).  Environment legs are a
single leg of dimension ``2**N``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .propagate import Stage, StageSchedule
from .tensorspace import HermitianOperator, StateVector, SubsystemLayout

__all__ = [
    "FLIP",
    "MeasurementCoupling",
    "MonitorCoupling",
    "build_premeasurement",
    "build_projected_premeasurement",
    "build_monitor",
    "build_system_drift",
    "build_stage1",
    "build_stage2",
    "make_interference_basis",
    "standard_schedule",
]

# |A0><A0| + |A1><A1| - |A1><A0| - |A0><A1|
FLIP = np.array([[1.0, -1.0], [-1.0, 1.0]])


@dataclass(frozen=True)
class MeasurementCoupling:
    """C-NOT style coupling ``g |trigger><trigger| (x) FLIP`` on the apparatus.

    With this normalization ``g * tau = pi / 2`` exchanges the two pointer
    states of the apparatus on the triggered branch exactly.
    """

    g: float
    measured: str
    apparatus: str
    trigger: int = 1

    def duration(self) -> float:
        return np.pi / (2 * self.g)


@dataclass(frozen=True)
class MonitorCoupling:
    """Pointer-conditioned environment coupling: one matrix per pointer state."""

    pointer: str
    environment: str
    matrices: tuple[np.ndarray, ...]


def _check_dims(layout: SubsystemLayout | None, leg: str, dim: int):
    if layout is not None and layout.dim(leg) != dim:
        raise ValueError(f"leg {leg!r} must have dimension {dim}, has {layout.dim(leg)}")


def build_premeasurement(
    g: float, measured: str, apparatus: str, layout: SubsystemLayout | None = None, trigger: int = 1
) -> HermitianOperator:
    """``g |v><v| (x) FLIP`` on (measured, apparatus); the ``h`` branch is untouched."""
    _check_dims(layout, measured, 2)
    _check_dims(layout, apparatus, 2)
    proj = np.zeros((2, 2))
    proj[trigger, trigger] = 1.0
    return HermitianOperator((measured, apparatus), g * np.kron(proj, FLIP))


def build_projected_premeasurement(
    target: StateVector, g: float, apparatus: str
) -> HermitianOperator:
    """``g |target><target| (x) FLIP`` where ``target`` lives on a whole laboratory."""
    if abs(target.norm() - 1.0) > 1e-10:
        raise ValueError(f"target state must be normalized, norm = {target.norm()}")
    if apparatus in target.layout.labels:
        raise ValueError(f"apparatus leg {apparatus!r} overlaps the target laboratory")
    psi = target.amplitudes
    proj = np.outer(psi, psi.conj())
    proj = 0.5 * (proj + proj.conj().T)
    return HermitianOperator(target.layout.labels + (apparatus,), g * np.kron(proj, FLIP))


def build_monitor(
    pointer: str,
    environment: str,
    matrices: Sequence[np.ndarray],
    layout: SubsystemLayout | None = None,
) -> HermitianOperator:
    """``sum_k |A_k><A_k| (x) V^k`` on (pointer, environment).

    The result is block diagonal in the pointer basis, so it commutes with
    every pointer projector and leaves pointer populations invariant.
    """
    mats = [np.asarray(m) for m in matrices]
    d = mats[0].shape[0]
    for m in mats:
        if m.shape != (d, d):
            raise ValueError("coupling matrices must share one square shape")
        if np.max(np.abs(m - m.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(m))):
            raise ValueError("coupling matrix is not Hermitian")
    _check_dims(layout, pointer, len(mats))
    _check_dims(layout, environment, d)
    n = len(mats)
    full = np.zeros((n * d, n * d), dtype=np.result_type(*mats))
    for k, m in enumerate(mats):
        full[k * d : (k + 1) * d, k * d : (k + 1) * d] = m
    return HermitianOperator((pointer, environment), full, blocks=tuple(mats))


def build_system_drift(h_s: np.ndarray, measured: str) -> HermitianOperator:
    """Free Hamiltonian of the measured system alone."""
    h_s = np.asarray(h_s)
    if np.max(np.abs(h_s - h_s.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(h_s))):
        raise ValueError("system Hamiltonian is not Hermitian")
    return HermitianOperator((measured,), h_s)


def build_stage1(
    internal: HermitianOperator | None, external: HermitianOperator | None
) -> tuple[HermitianOperator, ...]:
    """Internal and external monitors acting side by side (disjoint legs)."""
    terms = tuple(t for t in (internal, external) if t is not None)
    if len(terms) == 2 and set(terms[0].legs) & set(terms[1].legs):
        raise ValueError("internal and external monitors must act on disjoint legs")
    return terms


def build_stage2(
    beta_state: StateVector,
    g: float,
    apparatus: str,
    internal: HermitianOperator | None = None,
) -> tuple[HermitianOperator, ...]:
    """Internal monitor plus the external pre-measurement triggered by ``beta_state``.

    ``beta_state`` is the exact laboratory state at the start of the stage;
    it lives on the laboratory legs (system, apparatus, environment).
    """
    if g <= 0:
        raise ValueError("coupling constant must be positive")
    ext = build_projected_premeasurement(beta_state, g, apparatus)
    if internal is not None and not set(internal.legs) <= set(beta_state.layout.labels):
        raise ValueError("internal monitor must act inside the measured laboratory")
    return tuple(t for t in (internal, ext) if t is not None)


def make_interference_basis(
    theta: float, h_state: StateVector, v_state: StateVector, tol: float = 1e-6
) -> tuple[StateVector, StateVector]:
    """``alpha = sin(theta) h + cos(theta) v``, ``beta = -cos(theta) h + sin(theta) v``."""
    if h_state.layout != v_state.layout:
        raise ValueError("branch states live on different layouts")
    h, v = h_state.amplitudes, v_state.amplitudes
    gram = np.array([[np.vdot(h, h), np.vdot(h, v)], [np.vdot(v, h), np.vdot(v, v)]])
    if np.max(np.abs(gram - np.eye(2))) > tol:
        raise ValueError("branch states are not orthonormal")
    s, c = np.sin(theta), np.cos(theta)
    return (
        StateVector(h_state.layout, s * h + c * v),
        StateVector(h_state.layout, -c * h + s * v),
    )


def standard_schedule(
    stage1: Sequence[HermitianOperator],
    stage2: Sequence[HermitianOperator],
    tau1: float,
    g: float,
    t_final: float,
    samples_per_stage: int,
) -> StageSchedule:
    """H1 on [0, tau1], H2 for pi/(2g), then H1 again up to ``t_final``."""
    tau2 = tau1 + np.pi / (2 * g)
    if t_final <= tau2:
        raise ValueError(f"t_final={t_final} must exceed tau2={tau2}")
    return StageSchedule(
        (
            Stage(tuple(stage1), tau1, "stage1"),
            Stage(tuple(stage2), tau2 - tau1, "stage2"),
            Stage(tuple(stage1), t_final - tau2, "stage3"),
        ),
        samples_per_stage,
    )
