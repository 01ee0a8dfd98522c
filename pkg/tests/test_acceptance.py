"""Acceptance criteria 1-10, one PASS/FAIL line each.

Run under pytest (lines appear in the terminal output) or directly with
``python3 tests/test_acceptance.py``.  Tolerances are pinned below.
"""

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.linalg import expm

from friendsim.hambuilder import build_monitor
from friendsim.observe import MonitorModel, correlation_ensemble, long_time_average, overlap_ensemble
from friendsim.propagate import Stage, StageSchedule, exponentiate, run_schedule
from friendsim.protocols import (
    ProtocolConfig,
    chsh,
    memory_density,
    run_brukner,
    run_fr_all,
    run_standard,
    run_standard_ensemble,
)
from friendsim.randmat import EnsembleSpec, ensemble_ratios, ks_distance, realization_rng, sample_coupling
from friendsim.tensorspace import HermitianOperator, StateVector, compose, partial_trace
from oracles import dense_on_layout, random_hermitian, random_state, rk4

STANDARD_TOL = 0.03
FINAL_FRACTION = 0.2
N_STANDARD = 10
N_OVERLAP = 20
FR_ABS_TOL = 0.02
FR_COND_TOL = 0.03
APPROX_EQUAL = 0.02
BRUKNER_TOL = 0.05
NORM_DRIFT = 1e-10

pytestmark = pytest.mark.slow

_printer = print


def report(criterion, ok, detail):
    _printer(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
    return ok


@pytest.fixture(autouse=True)
def _show_lines(capsys):
    global _printer

    def emit(line):
        with capsys.disabled():
            print("\n" + line)

    _printer = emit
    yield
    _printer = print


@pytest.fixture(scope="module")
def standard_runs():
    cfg = ProtocolConfig(seed=2024)
    return {
        100.0: run_standard_ensemble(cfg, N_STANDARD),
        1.0: run_standard_ensemble(replace(cfg, g=1.0), N_STANDARD),
    }


def _final_average(runs, attr, field):
    window = runs[0].final_window(FINAL_FRACTION)
    series = np.array([getattr(getattr(r, attr), field) for r in runs])
    return long_time_average(series, runs[0].times, window)[0]


def test_1_standard_protocol(standard_runs):
    runs = standard_runs[100.0]
    got = {
        "C_hh": (_final_average(runs, "internal", "hh"), 0.25),
        "C_vv": (_final_average(runs, "internal", "vv"), 0.75),
        "C_aa": (_final_average(runs, "external", "c11"), 0.854),
        "C_bb": (_final_average(runs, "external", "c22"), 0.146),
    }
    ok = all(abs(v - e) <= STANDARD_TOL for v, e in got.values())
    text = ", ".join(f"{k}={v:.4f} (ref {e})" for k, (v, e) in got.items())
    assert report(1, ok, f"{text}; tol {STANDARD_TOL}, {N_STANDARD} realizations, window last 20%")


def test_2_coupling_sweep(standard_runs):
    dev = {g: abs(_final_average(standard_runs[g], "internal", "hh") - 0.25) for g in (100.0, 1.0)}
    ok = dev[100.0] < dev[1.0]
    assert report(2, ok, f"|C_hh - 0.25|: g=100 {dev[100.0]:.4f} < g=1 {dev[1.0]:.4f}")


def _overlap_average(n, alpha=0.0, t_max=10.0, samples=201, window=(2.0, 10.0)):
    times = np.linspace(0, t_max, samples)
    series = overlap_ensemble(MonitorModel(n, alpha, seed=11), times, N_OVERLAP)
    return long_time_average(series, times, window)[0]


def test_3_overlap_scaling():
    vals = {n: _overlap_average(n) for n in (1, 3, 5, 7, 9)}
    seq = [vals[n] for n in (1, 3, 5, 7)]
    ok = all(a > b for a, b in zip(seq, seq[1:])) and vals[9] < 0.05
    text = ", ".join(f"N={n}: {v:.4f}" for n, v in vals.items())
    assert report(3, ok, f"{text}; decreasing over N<=7 and N=9 < 0.05")


def test_4_correlation_scaling():
    dt = 0.1
    taus = dt * np.arange(201)
    long_avg, tail_max = {}, None
    for n in (1, 3, 5, 7, 9):
        res = correlation_ensemble(MonitorModel(n, seed=13), taus, dt, 50.0, N_OVERLAP, n_base=500)
        long_avg[n] = float(res.values[taus >= 10 - 1e-9].mean())
        if n == 9:
            tail_max = float(res.values[taus >= 0.5 - 1e-9].max())
    seq = list(long_avg.values())
    ok = all(a > b for a, b in zip(seq, seq[1:])) and tail_max < 0.05
    text = ", ".join(f"N={n}: {v:.4f}" for n, v in long_avg.items())
    assert report(4, ok, f"long-tau C: {text}; N=9 max C(tau>=0.5) = {tail_max:.4f} < 0.05")


def test_5_spectral_statistics():
    goe = ensemble_ratios(EnsembleSpec(512, 0.0, seed=5), 200)
    banded = ensemble_ratios(EnsembleSpec(512, 4.0, seed=5), 200)
    ks_goe = ks_distance(goe, "goe")
    ks_int, ks_goe4 = ks_distance(banded, "integrable"), ks_distance(banded, "goe")
    ok = ks_goe < 0.02 and ks_int < ks_goe4
    assert report(5, ok, f"alpha=0 KS(GOE)={ks_goe:.4f} < 0.02; alpha=4 KS(int)={ks_int:.4f} < KS(GOE)={ks_goe4:.4f}")


def test_6_chaos_requirement():
    v = {a: _overlap_average(7, a, 50.0, 501, (2.0, 50.0)) for a in (0.0, 0.5, 1.0, 2.0, 4.0)}
    ok = (
        abs(v[0.0] - v[0.5]) <= APPROX_EQUAL
        and max(v[0.0], v[0.5]) < v[1.0] < v[2.0] <= v[4.0]
        and v[2.0] > 0.3
        and v[4.0] > 0.3
    )
    text = ", ".join(f"a={a}: {x:.4f}" for a, x in v.items())
    assert report(6, ok, f"N=7 overlap {text}")


def _fr_checks(tables):
    return {
        "p(h_a,h_b) before E_A": (tables["before_EA"].prob("h_a", "h_b"), 0.0),
        "p(-_A,-_B)": (tables["final"].prob("-_A", "-_B"), 1 / 12),
        "p(+_B|v_a)": (tables["final"].conditional("+_B", given=("v_a",)), 5 / 6),
    }


def test_7_fr_ideal_and_decoherent():
    ideal = _fr_checks(run_fr_all(ProtocolConfig.two_lab_defaults(mode="ideal")))
    tols = {"p(h_a,h_b) before E_A": 1e-12, "p(-_A,-_B)": 1e-9, "p(+_B|v_a)": 1e-9}
    ok_ideal = all(abs(v - e) <= tols[k] for k, (v, e) in ideal.items())
    dec = _fr_checks(run_fr_all(ProtocolConfig.two_lab_defaults(seed=3)))
    dtols = {"p(h_a,h_b) before E_A": FR_ABS_TOL, "p(-_A,-_B)": FR_ABS_TOL, "p(+_B|v_a)": FR_COND_TOL}
    ok_dec = all(abs(v - e) <= dtols[k] for k, (v, e) in dec.items())
    text = "; ".join(f"{k}: ideal {ideal[k][0]:.6g}, N=3 {dec[k][0]:.4f} (ref {ideal[k][1]:.6g})" for k in ideal)
    assert report(7, ok_ideal and ok_dec, text)


@pytest.mark.xfail(strict=True, reason="reference value 2/3 for p(v_a|h_b) after E_A; the exact value is 1/2")
def test_7_fr_after_ea_reference_value():
    ideal = run_fr_all(ProtocolConfig.two_lab_defaults(mode="ideal"))["after_EA"]
    dec = run_fr_all(ProtocolConfig.two_lab_defaults(seed=3))["after_EA"]
    pi = ideal.conditional("v_a", given=("h_b",))
    pd = dec.conditional("v_a", given=("h_b",))
    ok = abs(pi - 2 / 3) <= 1e-9 and abs(pd - 2 / 3) <= FR_COND_TOL
    report("7 (after E_A)", ok, f"p(v_a|h_b) ideal {pi:.6f}, N=3 {pd:.4f}; reference 2/3 (exact algebra gives 1/2)")
    assert ok


def test_8_brukner_chsh():
    ideal = ProtocolConfig.two_lab_defaults(mode="ideal")
    s_mem = chsh(run_brukner(ideal, "3"), "memories").S
    s_dec = chsh(run_brukner(ProtocolConfig.two_lab_defaults(seed=3), "3"), "memories").S
    s_lab = chsh(run_brukner(ideal, "1"), "laboratories").S
    ok = (
        abs(s_mem - 1 / math.sqrt(2)) <= 1e-9
        and abs(s_dec - 1 / math.sqrt(2)) <= BRUKNER_TOL
        and abs(s_lab - 2 * math.sqrt(2)) <= 1e-9
    )
    assert report(8, ok, f"memories S ideal {s_mem:.10f}, N=3 {s_dec:.4f} (ref 0.7071); laboratories S {s_lab:.10f} (ref 2.8284)")


def test_9_oracle_equivalence():
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(12):
        while True:
            dims = list(rng.integers(1, 5, size=rng.integers(2, 5)))
            if np.prod(dims) <= 256:
                break
        labels = [f"q{i}" for i in range(len(dims))]
        lay = compose(list(zip(labels, dims)))
        dmap = dict(lay.factors)
        stages, dense = [], []
        for _ in range(2):
            terms = []
            for _ in range(rng.integers(1, 4)):
                k = int(rng.integers(1, len(labels) + 1))
                legs = tuple(rng.choice(labels, size=k, replace=False))
                d = int(np.prod([dmap[l] for l in legs]))
                terms.append(HermitianOperator(legs, random_hermitian(rng, d)))
            stages.append(Stage(tuple(terms), float(rng.uniform(0.1, 2.0))))
            dense.append(sum(dense_on_layout(t.matrix, t.legs, dmap, labels) for t in terms))
        psi = random_state(rng, lay.total_dim)
        got = run_schedule(StateVector(lay, psi), StageSchedule(tuple(stages)), [stages[0].duration + stages[1].duration])
        ref = expm(-1j * dense[1] * stages[1].duration) @ expm(-1j * dense[0] * stages[0].duration) @ psi
        worst = max(worst, float(np.max(np.abs(got.states[-1] - ref))))
    rk_worst = 0.0
    for _ in range(3):
        h = random_hermitian(rng, 16)
        psi = random_state(rng, 16)
        lay = compose([("x", 16)])
        got = exponentiate([HermitianOperator(("x",), h)], lay).apply(StateVector(lay, psi), 0.37)
        rk_worst = max(rk_worst, float(np.max(np.abs(got.amplitudes - rk4(h, psi, 0.37)))))
    ok = worst < 1e-10 and rk_worst < 1e-8
    assert report(9, ok, f"dense max error {worst:.2e} < 1e-10; RK4 max error {rk_worst:.2e} < 1e-8")


def test_10_invariants(standard_runs):
    drift = max(float(np.max(np.abs(r.norms - 1))) for runs in standard_runs.values() for r in runs)
    trace_err = 0.0
    for r in standard_runs[100.0][:3]:
        for keep in (("photon", "A"), ("Ap",), ("photon", "A", "Ap")):
            errs = partial_trace(r.final_state, keep).validity_errors()
            trace_err = max(trace_err, max(errs.values()))
    fr_state = run_brukner(ProtocolConfig.two_lab_defaults(seed=3), "3").state
    trace_err = max(trace_err, max(memory_density(fr_state).validity_errors().values()))

    rng = realization_rng(1)
    lay = compose([("s", 2), ("A", 2), ("eps", 64)])
    vh, vv = (sample_coupling(EnsembleSpec(64), rng) for _ in range(2))
    p = exponentiate([build_monitor("A", "eps", (vh, vv), lay)], lay)
    amps = np.zeros((2, 2, 64), dtype=complex)
    amps[0, 0, 0], amps[1, 1, 0] = math.sqrt(0.3), math.sqrt(0.7)
    w_err = 0.0
    for t in (1.0, 10.0, 100.0):
        out = p.apply(StateVector(lay, amps.reshape(-1)), t).tensor()
        w_err = max(w_err, abs(np.sum(np.abs(out[0, 0]) ** 2) - 0.3), abs(np.sum(np.abs(out[1, 1]) ** 2) - 0.7))

    cfg = ProtocolConfig(n_int=3, n_ext=3, seed=77, samples_per_stage=32)
    a, b = run_standard(cfg), run_standard(cfg)
    same = a.final_state.amplitudes.tobytes() == b.final_state.amplitudes.tobytes() and (
        a.internal.matrix.tobytes() == b.internal.matrix.tobytes()
    )
    ok = drift <= NORM_DRIFT and trace_err <= 1e-10 and w_err <= 1e-13 and same
    assert report(
        10, ok,
        f"norm drift {drift:.1e}; reduced-state errors {trace_err:.1e}; branch-weight error {w_err:.1e}; byte-identical reruns {same}",
    )


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
