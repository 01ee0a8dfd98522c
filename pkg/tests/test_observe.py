import numpy as np
import pytest

from friendsim.observe import (
    BRANCH_H,
    BRANCH_V,
    MonitorModel,
    autocorrelation,
    branch_env_states,
    branch_overlap_series,
    contract_legs,
    correlation_ensemble,
    extract_branches,
    long_time_average,
    monitor_trajectory,
    overlap_ensemble,
    reduced_coefficients,
)
from friendsim.tensorspace import StateVector, compose, partial_trace
from oracles import random_state

S2 = 1 / np.sqrt(2)
LAB = compose([("s", 2), ("A", 2), ("eps", 4)])


def branched(rng, wh=0.5):
    e1, e2 = random_state(rng, 4), random_state(rng, 4)
    amps = np.zeros((2, 2, 4), dtype=complex)
    amps[0, 0] = np.sqrt(wh) * e1
    amps[1, 1] = np.sqrt(1 - wh) * e2
    return StateVector(LAB, amps.reshape(-1)), e1, e2


def test_contract_legs_matches_loops():
    rng = np.random.default_rng(0)
    lay = compose([("x", 2), ("y", 3), ("z", 2)])
    psi = random_state(rng, 12)
    vec = random_state(rng, 4)
    got = contract_legs(psi, lay, ("z", "x"), vec)
    t = psi.reshape(2, 3, 2)
    ref = np.zeros(3, dtype=complex)
    for y in range(3):
        for z in range(2):
            for x in range(2):
                ref[y] += np.conj(vec[z * 2 + x]) * t[x, y, z]
    assert np.max(np.abs(got - ref)) < 1e-14
    batch = contract_legs(np.stack([psi, 2 * psi]), lay, ("z", "x"), vec)
    np.testing.assert_allclose(batch[1], 2 * ref)


def test_extract_and_reassemble():
    rng = np.random.default_rng(1)
    psi, e1, e2 = branched(rng, 0.3)
    dec = extract_branches(psi, ("s", "A"), {"h": BRANCH_H, "v": BRANCH_V})
    np.testing.assert_allclose(dec.weights, [0.3, 0.7])
    assert abs(np.vdot(dec.env("h").amplitudes, e1)) == pytest.approx(1)
    assert np.max(np.abs(dec.reassemble(LAB).amplitudes - psi.amplitudes)) < 1e-12


def test_reassemble_permuted_branch_legs():
    rng = np.random.default_rng(7)
    lay = compose([("e", 3), ("p", 2)])
    amps = np.zeros((3, 2), dtype=complex)
    amps[:, 0] = S2 * random_state(rng, 3)
    amps[:, 1] = S2 * random_state(rng, 3)
    psi = StateVector(lay, amps.reshape(-1))
    dec = extract_branches(psi, ("p",), {"0": np.array([1, 0]), "1": np.array([0, 1])})
    assert np.max(np.abs(dec.reassemble(lay).amplitudes - psi.amplitudes)) < 1e-14


def test_undefined_branch_and_non_orthogonal():
    lay = LAB
    amps = np.zeros((2, 2, 4), dtype=complex)
    amps[0, 0, 0] = 1
    dec = extract_branches(StateVector(lay, amps.reshape(-1)), ("s", "A"), {"h": BRANCH_H, "v": BRANCH_V})
    assert dec.defined == (True, False)
    with pytest.raises(ValueError, match="negligible"):
        dec.env("v")
    with pytest.raises(ValueError, match="orthogonal"):
        extract_branches(StateVector(lay, amps.reshape(-1)), ("s", "A"), {"a": BRANCH_H, "b": BRANCH_H})
    with pytest.raises(ValueError, match="negligible"):
        branch_overlap_series(amps.reshape(1, -1), lay, ("s", "A"), BRANCH_H, BRANCH_V)


def test_overlap_series_phase_invariant_and_bounded():
    rng = np.random.default_rng(2)
    states = np.array([branched(rng)[0].amplitudes for _ in range(5)])
    ov = branch_overlap_series(states, LAB, ("s", "A"), BRANCH_H, BRANCH_V)
    ov2 = branch_overlap_series(np.exp(0.9j) * states, LAB, ("s", "A"), BRANCH_H, BRANCH_V)
    np.testing.assert_allclose(ov, ov2, atol=1e-14)
    assert np.all((ov >= 0) & (ov <= 1 + 1e-12))
    e, w = branch_env_states(states, LAB, ("s", "A"), BRANCH_H)
    np.testing.assert_allclose(w, 0.5)
    np.testing.assert_allclose(np.linalg.norm(e, axis=1), 1)


def test_autocorrelation_matches_direct_average():
    rng = np.random.default_rng(3)
    env = np.array([random_state(rng, 4) for _ in range(30)])
    res = autocorrelation(env, 0.5, [0.0, 1.0, 2.5], n_base=1000)
    assert res.values[0] == pytest.approx(1)
    m = 5
    direct = np.mean([abs(np.vdot(env[i], env[i + m])) ** 2 for i in range(30 - m)])
    assert res.values[2] == pytest.approx(direct)
    assert res.n_base_times == 25
    with pytest.raises(ValueError, match="multiples"):
        autocorrelation(env, 0.5, [0.3])
    with pytest.raises(ValueError, match="beyond"):
        autocorrelation(env, 0.5, [20.0])


def test_autocorrelation_constant_state():
    env = np.tile(random_state(np.random.default_rng(4), 8), (20, 1))
    res = autocorrelation(np.stack([env, env]), 1.0, [0, 3, 9])
    np.testing.assert_allclose(res.values, 1)
    np.testing.assert_allclose(res.stderr, 0, atol=1e-15)


def test_reduced_coefficients_against_partial_trace():
    rng = np.random.default_rng(5)
    lay = compose([("s", 2), ("A", 2), ("eps", 4), ("x", 2)])
    psi = StateVector(lay, random_state(rng, lay.total_dim))
    rho = partial_trace(psi, ["s", "A"]).entries
    b0 = random_state(rng, 4)
    b1 = random_state(rng, 4)
    b1 -= np.vdot(b0, b1) * b0
    b1 /= np.linalg.norm(b1)
    got = reduced_coefficients(psi, ("s", "A"), (b0, b1))
    basis = (b0, b1)
    for i in range(2):
        for j in range(2):
            assert got[i, j] == pytest.approx(np.vdot(basis[i], rho @ basis[j]), abs=1e-13)
    with pytest.raises(ValueError, match="orthonormal"):
        reduced_coefficients(psi, ("s", "A"), (b0, b0))


def test_branch_mixture_coefficients():
    rng = np.random.default_rng(6)
    psi, e1, e2 = branched(rng)
    c = reduced_coefficients(psi, ("s", "A"), (BRANCH_H, BRANCH_V))
    assert c[0, 0].real == pytest.approx(0.5)
    assert abs(c[0, 1]) == pytest.approx(0.5 * abs(np.vdot(e2, e1)))


def test_long_time_average():
    t = np.linspace(0, 10, 11)
    s = np.stack([t, t + 2])
    mean, err = long_time_average(s, t, (8, 10))
    assert mean == pytest.approx(10.0)
    assert err == pytest.approx(1.0)
    assert long_time_average(t, t, (0, 10)) == (5.0, 0.0)
    with pytest.raises(ValueError):
        long_time_average(t, t, (5, 11))
    with pytest.raises(ValueError):
        long_time_average(t, t, (3.2, 3.4))


def test_monitor_model_overlap_starts_at_one():
    model = MonitorModel(3, seed=1)
    ov = overlap_ensemble(model, [0.0, 1.0, 5.0], 3)
    assert ov.shape == (3, 3)
    np.testing.assert_allclose(ov[:, 0], 1, atol=1e-12)
    layout, states = monitor_trajectory(model, 0, [0.0, 2.0])
    assert np.linalg.norm(states[1]) == pytest.approx(1)
    with pytest.raises(ValueError):
        MonitorModel(0)


def test_correlation_ensemble_zero_lag():
    res = correlation_ensemble(MonitorModel(2, seed=3), [0.0, 0.5], 0.5, 2.0, 2)
    assert res.values[0] == pytest.approx(1)
    assert res.n_realizations == 2
