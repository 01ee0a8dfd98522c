"""Protocol drivers: the standard Wigner's-friend run, Frauchiger-Renner, the
Brukner variant and its CHSH test.

Leg conventions follow :mod:`friendsim.hambuilder`: photons and apparati use
index 0 for ``h`` / ``A_h`` and index 1 for ``v`` / ``A_v``.  External
apparati start in index 0 (``A'_alpha`` or ``A'_+``) and are flipped to
index 1 (``A'_beta`` or ``A'_-``) on the triggering laboratory state.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Iterable, Mapping

import numpy as np

from .hambuilder import (
    build_monitor,
    build_premeasurement,
    build_projected_premeasurement,
    build_stage1,
    build_stage2,
    make_interference_basis,
    standard_schedule,
)
from .observe import ReducedCoefficients, coefficient_series, reduced_coefficients
from .propagate import (
    DEFAULT_BLOCK_CAP,
    DEFAULT_SAMPLES,
    BlockTooLarge,
    Stage,
    StageSchedule,
    iter_schedule,
)
from .randmat import EnsembleSpec, realization_rng, sample_coupling
from .tensorspace import (
    DensityMatrix,
    HermitianOperator,
    StateVector,
    SubsystemLayout,
    apply_on_legs,
    compose,
    partial_trace,
)

__all__ = [
    "ProtocolConfig",
    "StandardRun",
    "OutcomeTable",
    "BasisForm",
    "BruknerState",
    "ChshReport",
    "FR_TAGS",
    "BRUKNER_STAGES",
    "BRUKNER_PREDECESSORS",
    "run_standard",
    "run_standard_ensemble",
    "run_fr",
    "run_fr_all",
    "fr_basis_ambiguity",
    "run_brukner",
    "brukner_reachable",
    "chsh",
]

log = logging.getLogger(__name__)

H = np.array([1.0, 0.0], dtype=complex)
V = np.array([0.0, 1.0], dtype=complex)
COHERENCE_WARNING = 0.02


@dataclass(frozen=True)
class ProtocolConfig:
    """Parameters shared by all protocols.

    Defaults describe the standard run: theta = pi/8, six qubits in
    each environment, g = 100, tau1 = 10.  ``t_final`` closes the last
    monitoring stage of the standard protocol; the two-laboratory protocols
    use ``tau1`` for every monitoring stage instead.  In ``ideal`` mode all
    environments have dimension 1 and no monitor acts.
    """

    theta: float = math.pi / 8
    n_int: int = 6
    n_ext: int = 6
    g: float = 100.0
    tau1: float = 10.0
    t_final: float = 100.0
    mode: str = "decoherent"
    seed: int = 0
    realization: int = 0
    band_exponent: float = 0.0
    samples_per_stage: int = DEFAULT_SAMPLES
    cap: int = DEFAULT_BLOCK_CAP

    def __post_init__(self):
        if self.mode not in ("ideal", "decoherent"):
            raise ValueError(f"mode must be 'ideal' or 'decoherent', got {self.mode!r}")
        if self.mode == "decoherent" and (self.n_int < 1 or self.n_ext < 1):
            raise ValueError("decoherent mode needs at least one qubit per environment")
        if not self.g > 0:
            raise ValueError(f"coupling g must be positive, got {self.g}")
        if not self.tau1 > 0:
            raise ValueError(f"tau1 must be positive, got {self.tau1}")
        if self.t_final <= self.tau2:
            raise ValueError(f"t_final={self.t_final} must exceed tau2={self.tau2}")
        if self.samples_per_stage < 1:
            raise ValueError("samples_per_stage must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.band_exponent < 0:
            raise ValueError("band exponent must be non-negative")

    @property
    def ideal(self) -> bool:
        return self.mode == "ideal"

    @property
    def int_dim(self) -> int:
        return 1 if self.ideal else 2**self.n_int

    @property
    def ext_dim(self) -> int:
        return 1 if self.ideal else 2**self.n_ext

    @property
    def measurement_time(self) -> float:
        return math.pi / (2 * self.g)

    @property
    def tau2(self) -> float:
        return self.tau1 + self.measurement_time

    @classmethod
    def two_lab_defaults(cls, **overrides) -> "ProtocolConfig":
        """Defaults for the two-laboratory protocols (three qubits per environment)."""
        base = dict(n_int=3, n_ext=3)
        base.update(overrides)
        return cls(**base)


class _Branch:
    """Monitor-only evolution ``exp(-i V t)|eps_0>`` of one pointer branch."""

    def __init__(self, v: np.ndarray | None):
        if v is None:
            self.vals, self.vecs, self.c0 = np.zeros(1), np.ones((1, 1)), np.ones(1)
        else:
            self.vals, self.vecs = np.linalg.eigh(v)
            self.c0 = self.vecs[0].conj()

    def env(self, t: float) -> np.ndarray:
        return self.vecs @ (np.exp(-1j * self.vals * t) * self.c0)


def _lab_states(h_branch: _Branch, v_branch: _Branch, t: float) -> tuple[np.ndarray, np.ndarray]:
    """``|h A_h eps_1(t)>`` and ``|v A_v eps_2(t)>`` on (photon, apparatus, env)."""
    return (
        np.kron(np.kron(H, H), h_branch.env(t)),
        np.kron(np.kron(V, V), v_branch.env(t)),
    )


def _check_cap(config: ProtocolConfig, block_dim: int, what: str) -> None:
    """Refuse a run whose largest coupled block exceeds the cap, before any sampling."""
    if block_dim > config.cap:
        raise BlockTooLarge(
            f"{what} needs a {block_dim}-dimensional block, above the cap {config.cap}"
        )


def _draw(config: ProtocolConfig, dims: Iterable[int]) -> list[np.ndarray]:
    rng = realization_rng(config.seed, config.realization)
    return [
        sample_coupling(EnsembleSpec(d, config.band_exponent, config.seed), rng) for d in dims
    ]


# ---------------------------------------------------------------------------
# Standard protocol


STANDARD_LABELS = ("photon", "A", "eps", "Ap", "epsp")


def standard_layout(config: ProtocolConfig) -> SubsystemLayout:
    return compose(
        [("photon", 2), ("A", 2), ("eps", config.int_dim), ("Ap", 2), ("epsp", config.ext_dim)]
    )


@dataclass(frozen=True)
class StandardRun:
    """Outputs of one standard-protocol realization.

    ``internal`` holds agent I's coefficients in the pair (|h A_h>, |v A_v>);
    ``external`` holds agent E's in (|alpha(t)> |A'_alpha>, |beta(t)> |A'_beta>).
    """

    config: ProtocolConfig
    times: np.ndarray
    internal: ReducedCoefficients
    external: ReducedCoefficients
    norms: np.ndarray
    final_state: StateVector = field(repr=False)

    def final_window(self, fraction: float = 0.2) -> tuple[float, float]:
        t_end = float(self.times[-1])
        return t_end - fraction * t_end, t_end


def _standard_setup(config: ProtocolConfig):
    _check_cap(config, 8 * config.int_dim, "stage 2 (photon, A, eps, A')")
    _check_cap(config, 2 * config.ext_dim, "the external monitor")
    layout = standard_layout(config)
    if config.ideal:
        internal = external = None
        hb, vb = _Branch(None), _Branch(None)
    else:
        v_h, v_v, v_a, v_b = _draw(config, [config.int_dim] * 2 + [config.ext_dim] * 2)
        internal = build_monitor("A", "eps", (v_h, v_v), layout)
        external = build_monitor("Ap", "epsp", (v_a, v_b), layout)
        hb, vb = _Branch(v_h), _Branch(v_v)
    return layout, internal, external, hb, vb


def run_standard(config: ProtocolConfig, times=None) -> StandardRun:
    """Three-stage standard protocol for one coupling realization.

    The laboratory starts right after the friend's pre-measurement,
    ``(|h A_h> + |v A_v>)/sqrt2 |eps_0> |A'_alpha> |eps'_0>``.  Stage 1 runs
    both monitors for ``tau1``; stage 2 couples ``A'`` to the exact laboratory
    state ``|beta(tau1)>`` for ``pi/(2g)`` with the external monitor off;
    stage 3 runs both monitors again until ``t_final``.
    """
    layout, internal, external, hb, vb = _standard_setup(config)
    lab_layout = layout.sub(("photon", "A", "eps"))

    def lab_basis(t):
        h, v = _lab_states(hb, vb, t)
        return make_interference_basis(
            config.theta, StateVector(lab_layout, h), StateVector(lab_layout, v)
        )

    h0, v0 = _lab_states(hb, vb, 0.0)
    ap0 = np.kron(H, np.eye(config.ext_dim)[0])
    initial = StateVector(layout, np.kron((h0 + v0) / math.sqrt(2), ap0))

    stage1 = build_stage1(internal, external)
    beta1 = lab_basis(config.tau1)[1]
    stage2 = build_stage2(beta1, config.g, "Ap", internal)
    schedule = standard_schedule(
        stage1, stage2, config.tau1, config.g, config.t_final, config.samples_per_stage
    )

    hh = np.kron(H, H)
    vv = np.kron(V, V)
    ts, ints, exts, norms = [], [], [], []
    state = initial
    for t, state in iter_schedule(initial, schedule, times, config.cap):
        alpha, beta = lab_basis(t)
        ts.append(t)
        norms.append(state.norm())
        ints.append(reduced_coefficients(state, ("photon", "A"), (hh, vv)))
        exts.append(
            reduced_coefficients(
                state,
                ("photon", "A", "eps", "Ap"),
                (np.kron(alpha.amplitudes, H), np.kron(beta.amplitudes, V)),
            )
        )
    return StandardRun(
        config,
        np.array(ts),
        coefficient_series(ts, ints),
        coefficient_series(ts, exts),
        np.array(norms),
        state,
    )


def run_standard_ensemble(
    config: ProtocolConfig, n_realizations: int, times=None, executor=None
) -> list[StandardRun]:
    """Independent realizations ``0 .. n-1``; results come back in index order."""
    configs = [replace(config, realization=r) for r in range(n_realizations)]
    runner = (lambda c: run_standard(c, times))
    if executor is None:
        return [runner(c) for c in configs]
    return list(executor.map(runner, configs))


# ---------------------------------------------------------------------------
# Two-laboratory protocols (Frauchiger-Renner and the Brukner variant)


TWO_LAB_LABELS = (
    "a", "A_a", "eps_a", "b", "A_b", "eps_b", "Ap_A", "epsp_A", "Ap_B", "epsp_B",
)
MEMORY_LEGS = ("A_a", "A_b", "Ap_A", "Ap_B")
MEMORY_AGENTS = ("I_A", "I_B", "E_A", "E_B")
MEMORY_OUTCOMES = (("h_a", "v_a"), ("h_b", "v_b"), ("+_A", "-_A"), ("+_B", "-_B"))


class _TwoLabs:
    """Layout and couplings shared by the two-laboratory protocols."""

    def __init__(self, config: ProtocolConfig):
        self.config = config
        d, e = config.int_dim, config.ext_dim
        _check_cap(config, 8 * d, "an external measurement (photon, A, eps, A')")
        _check_cap(config, 2 * e, "an external monitor")
        self.layout = compose(
            [
                ("a", 2), ("A_a", 2), ("eps_a", d),
                ("b", 2), ("A_b", 2), ("eps_b", d),
                ("Ap_A", 2), ("epsp_A", e),
                ("Ap_B", 2), ("epsp_B", e),
            ]
        )
        self.lab_legs = {"A": ("a", "A_a", "eps_a"), "B": ("b", "A_b", "eps_b")}
        self.ext_legs = {"A": "Ap_A", "B": "Ap_B"}
        if config.ideal:
            self.monitors = {}
            self.branches = {lab: (_Branch(None), _Branch(None)) for lab in "AB"}
        else:
            vs = _draw(config, [d] * 4 + [e] * 4)
            self.monitors = {
                "int_A": build_monitor("A_a", "eps_a", vs[0:2], self.layout),
                "int_B": build_monitor("A_b", "eps_b", vs[2:4], self.layout),
                "ext_A": build_monitor("Ap_A", "epsp_A", vs[4:6], self.layout),
                "ext_B": build_monitor("Ap_B", "epsp_B", vs[6:8], self.layout),
            }
            self.branches = {
                "A": (_Branch(vs[0]), _Branch(vs[1])),
                "B": (_Branch(vs[2]), _Branch(vs[3])),
            }
        self.premeasure = (
            build_premeasurement(config.g, "a", "A_a", self.layout),
            build_premeasurement(config.g, "b", "A_b", self.layout),
        )

    def lab_pm(self, lab: str, t_lab: float) -> tuple[np.ndarray, np.ndarray]:
        """``|+(t)>`` and ``|-(t)>`` of a laboratory, ``t_lab`` after pre-measurement."""
        h, v = _lab_states(*self.branches[lab], t_lab)
        return (h + v) / math.sqrt(2), (h - v) / math.sqrt(2)

    def monitors_except(self, *off: str) -> tuple[HermitianOperator, ...]:
        return tuple(m for k, m in self.monitors.items() if k not in off)

    def external_measurement(self, lab: str, t_lab: float) -> HermitianOperator:
        minus = self.lab_pm(lab, t_lab)[1]
        target = StateVector(self.layout.sub(self.lab_legs[lab]), minus)
        return build_projected_premeasurement(target, self.config.g, self.ext_legs[lab])

    def initial(self, photons: np.ndarray) -> StateVector:
        """Photon pair state (2x2 amplitudes over a, b) with everything else ready."""
        amps = np.zeros(self.layout.dims, dtype=complex)
        amps[:, 0, 0, :, 0, 0, 0, 0, 0, 0] = photons
        return StateVector(self.layout, amps.reshape(-1))


def _evolve(setup: _TwoLabs, initial: StateVector, stages: list[Stage]) -> list[StateVector]:
    """States at the end of every stage."""
    schedule = StageSchedule(tuple(stages))
    ends = schedule.boundaries()[1:]
    return [s for _, s in iter_schedule(initial, schedule, ends, setup.config.cap)]


FR_TAGS = ("before_EA", "after_EA", "final")


def fr_photons() -> np.ndarray:
    """sqrt(1/3)|h>_a|v>_b + sqrt(2/3)|v>_a|+>_b as a 2x2 amplitude table."""
    psi = np.zeros((2, 2), dtype=complex)
    psi[0, 1] = math.sqrt(1 / 3)
    psi[1, :] = math.sqrt(2 / 3) / math.sqrt(2)
    return psi


def _fr_stages(setup: _TwoLabs) -> list[Stage]:
    cfg = setup.config
    tm, t1 = cfg.measurement_time, cfg.tau1
    return [
        Stage(setup.premeasure, tm, "premeasure"),
        Stage(setup.monitors_except(), t1, "monitor1"),
        Stage(
            setup.monitors_except("ext_A") + (setup.external_measurement("A", t1),), tm, "E_A"
        ),
        Stage(setup.monitors_except(), t1, "monitor2"),
        Stage(
            setup.monitors_except("ext_B") + (setup.external_measurement("B", 2 * t1 + tm),),
            tm,
            "E_B",
        ),
        Stage(setup.monitors_except(), t1, "monitor3"),
    ]


@dataclass(frozen=True)
class OutcomeTable:
    """Joint distribution of the four memory records, read off the reduced state.

    ``probs[i, j, k, l]`` is the diagonal of the reduced density matrix over
    (A_a, A_b, A'_A, A'_B).  Outcome labels are unique across agents, so
    queries name outcomes directly::

        table.prob("-_A", "-_B")
        table.conditional("+_B", given=("v_a",))
    """

    tag: str
    probs: np.ndarray
    max_coherence: float
    agents: tuple[str, ...] = MEMORY_AGENTS
    outcomes: tuple[tuple[str, str], ...] = MEMORY_OUTCOMES

    @property
    def definite(self) -> bool:
        return self.max_coherence <= COHERENCE_WARNING

    def _locate(self, label: str) -> tuple[int, int]:
        for axis, pair in enumerate(self.outcomes):
            if label in pair:
                return axis, pair.index(label)
        raise KeyError(f"unknown outcome label {label!r}")

    def prob(self, *labels: str) -> float:
        """Marginal probability that all named outcomes occur together."""
        index: list = [slice(None)] * self.probs.ndim
        for lab in labels:
            axis, k = self._locate(lab)
            if index[axis] != slice(None) and index[axis] != k:
                return 0.0
            index[axis] = k
        return float(self.probs[tuple(index)].sum())

    def conditional(self, outcome: str | Iterable[str], given: Iterable[str]) -> float:
        outcome = (outcome,) if isinstance(outcome, str) else tuple(outcome)
        given = tuple(given)
        p_given = self.prob(*given)
        if p_given <= 1e-14:
            raise ValueError(f"conditioning event {given} has zero probability")
        return self.prob(*outcome, *given) / p_given

    def marginal(self, *agents: str) -> dict[tuple[str, ...], float]:
        axes = [self.agents.index(a) for a in agents]
        return {
            tuple(self.outcomes[ax][k] for ax, k in zip(axes, ks)): self.prob(
                *(self.outcomes[ax][k] for ax, k in zip(axes, ks))
            )
            for ks in product(range(2), repeat=len(axes))
        }


def _outcome_table(state: StateVector, tag: str) -> OutcomeTable:
    rho = partial_trace(state, MEMORY_LEGS)
    m = rho.entries
    probs = np.clip(np.real(np.diag(m)), 0.0, None).reshape(2, 2, 2, 2)
    off = m - np.diag(np.diag(m))
    coherence = float(np.max(np.abs(off))) if off.size else 0.0
    if coherence > COHERENCE_WARNING:
        log.warning(
            "memory records at %s are not yet definite: largest coherence %.3g > %.2g",
            tag, coherence, COHERENCE_WARNING,
        )
    return OutcomeTable(tag, probs, coherence)


def run_fr_all(config: ProtocolConfig) -> dict[str, OutcomeTable]:
    """Frauchiger-Renner run with measurements in the order I_A, I_B, E_A, E_B.

    Each table is read at the end of a monitoring stage; the keys of
    ``FR_TAGS`` name the measurement that stage follows.
    """
    setup = _TwoLabs(config)
    ends = _evolve(setup, setup.initial(fr_photons()), _fr_stages(setup))
    return {
        "before_EA": _outcome_table(ends[1], "before_EA"),
        "after_EA": _outcome_table(ends[3], "after_EA"),
        "final": _outcome_table(ends[5], "final"),
    }


def run_fr(config: ProtocolConfig, tag: str) -> OutcomeTable:
    if tag not in FR_TAGS:
        raise ValueError(f"unknown evaluation tag {tag!r}; expected one of {FR_TAGS}")
    setup = _TwoLabs(config)
    n = {"before_EA": 2, "after_EA": 4, "final": 6}[tag]
    ends = _evolve(setup, setup.initial(fr_photons()), _fr_stages(setup)[:n])
    return _outcome_table(ends[-1], tag)


@dataclass(frozen=True)
class BasisForm:
    """Two-laboratory state written in a chosen basis for each laboratory.

    ``basis_a`` / ``basis_b`` are ``"hv"`` or ``"pm"``; amplitudes are indexed
    ``[i_A, j_B]`` with (h, v) or (+, -) ordering.
    """

    name: str
    basis_a: str
    basis_b: str
    amplitudes: np.ndarray

    def state(self) -> StateVector:
        return StateVector(compose([("A", 2), ("B", 2)]), self.amplitudes.reshape(-1))

    def to_hv(self) -> np.ndarray:
        ua = _PM_TO_HV if self.basis_a == "pm" else np.eye(2)
        ub = _PM_TO_HV if self.basis_b == "pm" else np.eye(2)
        return ua @ self.amplitudes @ ub.T


# columns are |+>, |-> in the (h, v) basis
_PM_TO_HV = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)


def fr_basis_ambiguity() -> dict[str, BasisForm]:
    """The ideal two-laboratory state after I_A and I_B, in four basis choices.

    The state is sqrt(1/3)(|v h> + |h v> + |v v>); the forms are obtained by
    rotating each laboratory to the (+, -) basis where requested.
    """
    psi = np.zeros((2, 2), dtype=complex)
    psi[1, 0] = psi[0, 1] = psi[1, 1] = math.sqrt(1 / 3)
    to_pm = _PM_TO_HV.T
    out = {}
    for name, ba, bb in (
        ("alpha", "hv", "hv"),
        ("beta", "pm", "hv"),
        ("gamma", "hv", "pm"),
        ("delta", "pm", "pm"),
    ):
        ua = to_pm if ba == "pm" else np.eye(2)
        ub = to_pm if bb == "pm" else np.eye(2)
        out[name] = BasisForm(name, ba, bb, ua @ psi @ ub.T)
    return out


BRUKNER_STAGES = ("1", "2a", "2b", "3")
BRUKNER_PREDECESSORS: Mapping[str, tuple[str, ...]] = {
    "1": (),
    "2a": ("1",),
    "2b": ("1",),
    "3": ("2a", "2b"),
}


def brukner_reachable(source: str, target: str) -> bool:
    """Whether ``target`` follows ``source`` along the stage map."""
    for s in (source, target):
        if s not in BRUKNER_STAGES:
            raise ValueError(f"unknown stage {s!r}")
    frontier, seen = [target], set()
    while frontier:
        s = frontier.pop()
        for p in BRUKNER_PREDECESSORS[s]:
            if p == source:
                return True
            if p not in seen:
                seen.add(p)
                frontier.append(p)
    return False


def brukner_photons() -> np.ndarray:
    c, s = math.cos(math.pi / 8), math.sin(math.pi / 8)
    psi = np.zeros((2, 2), dtype=complex)
    psi[0, 1] = psi[1, 0] = c / math.sqrt(2)
    psi[0, 0] = s / math.sqrt(2)
    psi[1, 1] = -s / math.sqrt(2)
    return psi


@dataclass(frozen=True)
class BruknerState:
    """State at the end of a Brukner-variant stage.

    ``lab_pm`` holds each laboratory's (|+(t)>, |-(t)>) at that same moment.
    """

    stage: str
    state: StateVector
    lab_pm: Mapping[str, tuple[np.ndarray, np.ndarray]]
    lab_legs: Mapping[str, tuple[str, ...]]


def run_brukner(config: ProtocolConfig, stage: str) -> BruknerState:
    """Stage 1: both internal measurements plus monitoring for ``tau1``.

    Stages 2a and 2b add the E_A or the E_B measurement to stage 1, and stage
    3 adds both at once; each is followed by another ``tau1`` of monitoring.
    """
    if stage not in BRUKNER_STAGES:
        raise ValueError(f"unknown stage {stage!r}; expected one of {BRUKNER_STAGES}")
    setup = _TwoLabs(config)
    tm, t1 = config.measurement_time, config.tau1
    stages = [
        Stage(setup.premeasure, tm, "premeasure"),
        Stage(setup.monitors_except(), t1, "monitor1"),
    ]
    labs = {"2a": ("A",), "2b": ("B",), "3": ("A", "B")}.get(stage, ())
    if labs:
        off = tuple("ext_" + lab for lab in labs)
        meas = tuple(setup.external_measurement(lab, t1) for lab in labs)
        stages.append(Stage(setup.monitors_except(*off) + meas, tm, "E_" + "".join(labs)))
        stages.append(Stage(setup.monitors_except(), t1, "monitor2"))
    final = _evolve(setup, setup.initial(brukner_photons()), stages)[-1]
    t_lab = sum(s.duration for s in stages[1:])
    pm = {lab: setup.lab_pm(lab, t_lab) for lab in "AB"}
    return BruknerState(stage, final, pm, setup.lab_legs)


@dataclass(frozen=True)
class ChshReport:
    """``S = <A1 B1> + <A1 B0> + <A0 B1> - <A0 B0>``."""

    correlators: Mapping[str, float]
    observables: str
    definitions: Mapping[str, str]

    @property
    def S(self) -> float:
        c = self.correlators
        return c["A1B1"] + c["A1B0"] + c["A0B1"] - c["A0B0"]


_MEMORY_DEFS = {
    "A0": "|h A_h><h A_h| - |v A_v><v A_v| on (a, A_a)",
    "B0": "|h A_h><h A_h| - |v A_v><v A_v| on (b, A_b)",
    "A1": "|A'_+><A'_+| - |A'_-><A'_-| on A'_A",
    "B1": "|A'_+><A'_+| - |A'_-><A'_-| on A'_B",
}
_LAB_DEFS = {
    "A0": _MEMORY_DEFS["A0"],
    "B0": _MEMORY_DEFS["B0"],
    "A1": "|+(tau)><+(tau)| - |-(tau)><-(tau)| on laboratory A",
    "B1": "|+(tau)><+(tau)| - |-(tau)><-(tau)| on laboratory B",
}


def _chsh_operators(result: BruknerState, observables: str) -> dict[str, HermitianOperator]:
    memory = np.diag([1.0, 0.0, 0.0, -1.0])
    ops = {
        "A0": HermitianOperator(("a", "A_a"), memory),
        "B0": HermitianOperator(("b", "A_b"), memory),
    }
    if observables == "memories":
        ops["A1"] = HermitianOperator(("Ap_A",), np.diag([1.0, -1.0]))
        ops["B1"] = HermitianOperator(("Ap_B",), np.diag([1.0, -1.0]))
    elif observables == "laboratories":
        for name, lab in (("A1", "A"), ("B1", "B")):
            plus, minus = result.lab_pm[lab]
            m = np.outer(plus, plus.conj()) - np.outer(minus, minus.conj())
            ops[name] = HermitianOperator(result.lab_legs[lab], 0.5 * (m + m.conj().T))
    else:
        raise ValueError(f"observable set must be 'memories' or 'laboratories', got {observables!r}")
    return ops


def chsh(result: BruknerState, observables: str = "memories") -> ChshReport:
    """CHSH correlators on a Brukner-variant state.

    ``memories`` reads the internal apparati (A0, B0) and the external
    apparati (A1, B1); ``laboratories`` replaces the external apparati by the
    interference observables of the whole laboratories.
    """
    ops = _chsh_operators(result, observables)
    state = result.state
    layout = state.layout
    for op in ops.values():
        op.check_layout(layout)
        w = np.linalg.eigvalsh(op.matrix)
        if np.any(np.min(np.abs(w[:, None] - np.array([-1.0, 0.0, 1.0])[None]), axis=1) > 1e-9):
            raise ValueError("CHSH observables must have eigenvalues in {-1, 0, 1}")

    def act(name, amps):
        return apply_on_legs(amps, layout, ops[name].legs, ops[name].matrix)

    psi = state.amplitudes
    corr = {}
    for a, b in (("A1", "B1"), ("A1", "B0"), ("A0", "B1"), ("A0", "B0")):
        corr[a + b] = float(np.real(np.vdot(psi, act(a, act(b, psi)))))
    defs = _MEMORY_DEFS if observables == "memories" else _LAB_DEFS
    return ChshReport(corr, observables, dict(defs))


def memory_density(state: StateVector) -> DensityMatrix:
    """Reduced state over the four memory pointers."""
    return partial_trace(state, MEMORY_LEGS)
