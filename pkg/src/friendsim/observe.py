"""Diagnostics on trajectories: branch environments, overlaps, C(tau), reduced coefficients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .tensorspace import StateVector, SubsystemLayout

__all__ = [
    "BranchDecomposition",
    "ReducedCoefficients",
    "CorrelationSeries",
    "contract_legs",
    "extract_branches",
    "branch_env_states",
    "branch_overlap_series",
    "autocorrelation",
    "reduced_coefficients",
    "coefficient_series",
    "long_time_average",
    "UNDEFINED_WEIGHT",
    "MonitorModel",
    "monitor_trajectory",
    "overlap_ensemble",
    "correlation_ensemble",
    "BRANCH_H",
    "BRANCH_V",
]

UNDEFINED_WEIGHT = 1e-12


def contract_legs(
    amps: np.ndarray, layout: SubsystemLayout, legs: Sequence[str], vector: np.ndarray
) -> np.ndarray:
    """``(<vector| (x) 1) |amps>``: project ``legs`` onto ``vector``.

    ``amps`` may carry leading batch axes, ``(..., total_dim)``.  Returns
    amplitudes on the remaining legs (layout order), ``(..., rest_dim)``.
    """
    batch = amps.shape[:-1]
    axes = [layout.index(leg) for leg in legs]
    nb = len(batch)
    psi = amps.reshape(batch + layout.dims)
    psi = np.moveaxis(psi, [nb + a for a in axes], range(nb, nb + len(axes)))
    kdim = int(np.prod(layout.dims_of(legs)))
    psi = psi.reshape(batch + (kdim, -1))
    return np.einsum("k,...kr->...r", np.conj(vector), psi)


@dataclass(frozen=True)
class BranchDecomposition:
    """``|psi> = sum_i sqrt(w_i) |branch_i> |eps_i>`` for pointer-tagged branches."""

    labels: tuple[str, ...]
    weights: np.ndarray
    env_states: tuple[StateVector | None, ...]
    branch_legs: tuple[str, ...]
    branch_vectors: tuple[np.ndarray, ...]

    @property
    def defined(self) -> tuple[bool, ...]:
        return tuple(s is not None for s in self.env_states)

    def env(self, label: str) -> StateVector:
        s = self.env_states[self.labels.index(label)]
        if s is None:
            raise ValueError(f"branch {label!r} has negligible weight; environment undefined")
        return s

    def reassemble(self, layout: SubsystemLayout) -> StateVector:
        """Rebuild the full state from the branches (exact for complete projectors)."""
        rest = layout.complement(self.branch_legs)
        sub = layout.sub(tuple(self.branch_legs) + rest)
        total = np.zeros(sub.total_dim, dtype=complex)
        for w, vec, env in zip(self.weights, self.branch_vectors, self.env_states):
            if env is not None:
                total += np.sqrt(w) * np.kron(vec, env.amplitudes)
        tensor = total.reshape(sub.dims)
        perm = [sub.labels.index(lab) for lab in layout.labels]
        return StateVector(layout, np.transpose(tensor, perm).reshape(-1))


def _check_orthogonal(vectors: Sequence[np.ndarray], tol: float = 1e-10):
    for i, a in enumerate(vectors):
        for b in vectors[i + 1 :]:
            if abs(np.vdot(a, b)) > tol:
                raise ValueError("branch projectors are not orthogonal")


def extract_branches(
    state: StateVector, branch_legs: Sequence[str], branches: Mapping[str, np.ndarray]
) -> BranchDecomposition:
    """Split ``state`` by rank-one branch projectors on ``branch_legs``.

    ``branches`` maps a label to a unit vector on ``branch_legs`` (e.g.
    ``|h A_h>``).  Environment states of branches whose weight is below
    ``UNDEFINED_WEIGHT`` are reported as ``None``.
    """
    labels = tuple(branches)
    vectors = tuple(np.asarray(branches[k], dtype=complex) for k in labels)
    _check_orthogonal(vectors)
    layout = state.layout
    env_layout = layout.sub(layout.complement(branch_legs))
    weights, envs = [], []
    for vec in vectors:
        rem = contract_legs(state.amplitudes, layout, branch_legs, vec)
        w = float(np.vdot(rem, rem).real)
        weights.append(w)
        envs.append(StateVector(env_layout, rem / np.sqrt(w)) if w > UNDEFINED_WEIGHT else None)
    return BranchDecomposition(labels, np.array(weights), tuple(envs), tuple(branch_legs), vectors)


def branch_env_states(
    states: np.ndarray, layout: SubsystemLayout, branch_legs: Sequence[str], vector: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized branch extraction over a stack of states ``(T, total_dim)``.

    Returns ``(env_states (T, rest_dim), weights (T,))``; rows with
    negligible weight are NaN.
    """
    rem = contract_legs(np.asarray(states), layout, branch_legs, np.asarray(vector, dtype=complex))
    w = np.einsum("tr,tr->t", rem.conj(), rem).real
    with np.errstate(invalid="ignore", divide="ignore"):
        env = np.where((w > UNDEFINED_WEIGHT)[:, None], rem / np.sqrt(w)[:, None], np.nan)
    return env, w


def branch_overlap_series(
    states: np.ndarray,
    layout: SubsystemLayout,
    branch_legs: Sequence[str],
    first: np.ndarray,
    second: np.ndarray,
) -> np.ndarray:
    """``|<eps_1(t)|eps_2(t)>|^2`` along a trajectory ``(T, total_dim)``."""
    _check_orthogonal([np.asarray(first), np.asarray(second)])
    e1, w1 = branch_env_states(states, layout, branch_legs, first)
    e2, w2 = branch_env_states(states, layout, branch_legs, second)
    if np.any(w1 <= UNDEFINED_WEIGHT) or np.any(w2 <= UNDEFINED_WEIGHT):
        raise ValueError("a branch has negligible weight; its environment state is undefined")
    return np.abs(np.einsum("tr,tr->t", e1.conj(), e2)) ** 2


@dataclass(frozen=True)
class CorrelationSeries:
    taus: np.ndarray
    values: np.ndarray  # mean over realizations
    stderr: np.ndarray
    n_realizations: int
    n_base_times: int


def autocorrelation(
    env_states: np.ndarray,
    dt: float,
    taus: Sequence[float],
    n_base: int = 10_000,
) -> CorrelationSeries:
    """``C(tau) = |<eps(t)|eps(t + tau)>|^2`` averaged over base times and realizations.

    ``env_states`` is ``(T, d)`` or ``(R, T, d)``, sampled on a uniform grid
    of spacing ``dt``.  Every ``tau`` must be a multiple of ``dt``.  Base
    times are the first grid points for which ``t + max(tau)`` is still
    sampled, thinned to at most ``n_base`` uniformly spaced points.
    """
    e = np.asarray(env_states)
    if e.ndim == 2:
        e = e[None]
    n_real, n_t, _ = e.shape
    shifts = np.asarray(taus, dtype=float) / dt
    steps = np.rint(shifts).astype(int)
    if np.any(np.abs(shifts - steps) > 1e-6) or np.any(steps < 0):
        raise ValueError("taus must be non-negative multiples of the sampling step")
    n_avail = n_t - steps.max()
    if n_avail < 1:
        raise ValueError("tau beyond the trajectory span")
    base = np.unique(np.linspace(0, n_avail - 1, min(n_base, n_avail)).round().astype(int))
    per_real = np.empty((n_real, len(steps)))
    for r in range(n_real):
        left = e[r, base].conj()
        for j, m in enumerate(steps):
            per_real[r, j] = np.mean(np.abs(np.einsum("bd,bd->b", left, e[r, base + m])) ** 2)
    mean = per_real.mean(axis=0)
    stderr = per_real.std(axis=0, ddof=1) / np.sqrt(n_real) if n_real > 1 else np.zeros_like(mean)
    return CorrelationSeries(np.asarray(taus, dtype=float), mean, stderr, n_real, len(base))


@dataclass(frozen=True)
class ReducedCoefficients:
    """Time series of a 2x2 block of a reduced density matrix in a chosen pair basis.

    ``matrix[t, i, j] = <b_i| rho(t) |b_j>`` with ``(b_0, b_1)`` the pair
    (``h A_h``, ``v A_v``) for the internal view or (``alpha A'_alpha``,
    ``beta A'_beta``) for the external one.
    """

    times: np.ndarray
    matrix: np.ndarray  # (T, 2, 2) complex

    @property
    def c11(self) -> np.ndarray:
        return self.matrix[:, 0, 0].real

    @property
    def c22(self) -> np.ndarray:
        return self.matrix[:, 1, 1].real

    @property
    def c12(self) -> np.ndarray:
        return self.matrix[:, 0, 1]

    @property
    def c21(self) -> np.ndarray:
        return self.matrix[:, 1, 0]

    @property
    def nd(self) -> np.ndarray:
        """Off-diagonal magnitude ``sqrt(|c12|^2 + |c21|^2)``."""
        return np.sqrt(np.abs(self.c12) ** 2 + np.abs(self.c21) ** 2)

    # names used for the internal agent
    hh = c11
    vv = c22
    hv = c12
    vh = c21


def reduced_coefficients(
    state: StateVector, keep: Sequence[str], basis: tuple[np.ndarray, np.ndarray], tol: float = 1e-8
) -> np.ndarray:
    """2x2 matrix ``<b_i| Tr_rest |psi><psi| |b_j>`` without forming the reduced matrix.

    ``keep`` lists the kept legs in the order the basis vectors are indexed.
    """
    b0, b1 = (np.asarray(b, dtype=complex) for b in basis)
    gram = np.array([[np.vdot(b0, b0), np.vdot(b0, b1)], [np.vdot(b1, b0), np.vdot(b1, b1)]])
    if np.max(np.abs(gram - np.eye(2))) > tol:
        raise ValueError("basis pair is not orthonormal")
    x0 = contract_legs(state.amplitudes, state.layout, keep, b0)
    x1 = contract_legs(state.amplitudes, state.layout, keep, b1)
    xs = (x0, x1)
    return np.array([[np.vdot(xs[j], xs[i]) for j in range(2)] for i in range(2)])


def coefficient_series(times, matrices) -> ReducedCoefficients:
    return ReducedCoefficients(np.asarray(times, dtype=float), np.asarray(matrices, dtype=complex))


def long_time_average(series, times, window: tuple[float, float]) -> tuple[float, float]:
    """Mean over samples with ``window[0] <= t <= window[1]``, with standard error.

    ``series`` is ``(T,)`` or ``(R, T)``; the window mean is taken per
    realization, and the error is the standard error over realizations
    (zero for a single one).
    """
    s = np.asarray(series, dtype=float)
    if s.ndim == 1:
        s = s[None]
    t = np.asarray(times, dtype=float)
    lo, hi = window
    if lo < t.min() - 1e-12 or hi > t.max() + 1e-12 or lo > hi:
        raise ValueError(f"window {window} outside series span [{t.min()}, {t.max()}]")
    mask = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if not mask.any():
        raise ValueError(f"no samples inside window {window}")
    per = s[:, mask].mean(axis=1)
    err = float(per.std(ddof=1) / np.sqrt(len(per))) if len(per) > 1 else 0.0
    return float(per.mean()), err


# ---------------------------------------------------------------------------
# Ensemble drivers for the simple monitoring model: a two-level system
# already correlated with its apparatus, (|h A_h> + |v A_v>)/sqrt2 (x) |eps_0>,
# evolving under the apparatus-environment monitor alone.


@dataclass(frozen=True)
class MonitorModel:
    """Settings of the simple monitoring model for one environment size."""

    n_qubits: int
    band_exponent: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"environment needs at least one qubit, got {self.n_qubits}")

    @property
    def env_dim(self) -> int:
        return 2**self.n_qubits


def _lab_layout(env_dim: int) -> SubsystemLayout:
    from .tensorspace import compose

    return compose([("system", 2), ("apparatus", 2), ("env", env_dim)])


def monitor_trajectory(model: MonitorModel, realization: int, times) -> tuple[SubsystemLayout, np.ndarray]:
    """States ``(T, 4 * 2**N)`` of one realization of the simple model."""
    from .hambuilder import build_monitor
    from .propagate import Stage, StageSchedule, run_schedule
    from .randmat import EnsembleSpec, realization_rng, sample_coupling

    times = np.asarray(times, dtype=float)
    spec = EnsembleSpec(model.env_dim, model.band_exponent, model.seed)
    rng = realization_rng(model.seed, realization)
    v_h = sample_coupling(spec, rng)
    v_v = sample_coupling(spec, rng)
    layout = _lab_layout(model.env_dim)
    term = build_monitor("apparatus", "env", (v_h, v_v), layout)
    amps = np.zeros(layout.total_dim, dtype=complex)
    amps[0] = amps[np.ravel_multi_index((1, 1, 0), layout.dims)] = 1 / np.sqrt(2)
    span = float(times.max())
    schedule = StageSchedule((Stage((term,), span, "monitor"),), sample_times=times)
    traj = run_schedule(StateVector(layout, amps), schedule)
    return layout, traj.states


BRANCH_H = np.array([1, 0, 0, 0], dtype=complex)  # |h A_h>
BRANCH_V = np.array([0, 0, 0, 1], dtype=complex)  # |v A_v>


def _map(fn, items, executor=None):
    return list(executor.map(fn, items) if executor is not None else map(fn, items))


def overlap_ensemble(
    model: MonitorModel, times, n_realizations: int, executor=None
) -> np.ndarray:
    """``|<eps_1(t)|eps_2(t)>|^2`` for each realization, shape ``(R, T)``."""

    def one(r):
        layout, states = monitor_trajectory(model, r, times)
        return branch_overlap_series(states, layout, ("system", "apparatus"), BRANCH_H, BRANCH_V)

    return np.array(_map(one, range(n_realizations), executor))


def correlation_ensemble(
    model: MonitorModel,
    taus,
    dt: float,
    base_span: float,
    n_realizations: int,
    n_base: int = 10_000,
    executor=None,
) -> CorrelationSeries:
    """Ensemble ``C(tau)`` of the ``h``-branch environment.

    Each realization is sampled every ``dt`` on ``[0, base_span + max(tau)]``;
    base times cover ``[0, base_span]``.
    """
    taus = np.asarray(taus, dtype=float)
    n_t = int(round((base_span + taus.max()) / dt)) + 1
    times = dt * np.arange(n_t)

    def one(r):
        layout, states = monitor_trajectory(model, r, times)
        env, _ = branch_env_states(states, layout, ("system", "apparatus"), BRANCH_H)
        return autocorrelation(env, dt, taus, n_base).values

    per = np.array(_map(one, range(n_realizations), executor))
    n_avail = n_t - int(round(taus.max() / dt))
    mean = per.mean(axis=0)
    err = per.std(axis=0, ddof=1) / np.sqrt(len(per)) if len(per) > 1 else np.zeros_like(mean)
    return CorrelationSeries(taus, mean, err, n_realizations, min(n_base, n_avail))
