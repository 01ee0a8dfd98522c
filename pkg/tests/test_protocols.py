import logging
import math

import numpy as np
import pytest

from friendsim.propagate import BlockTooLarge
from friendsim.protocols import (
    BRUKNER_STAGES,
    FR_TAGS,
    BruknerState,
    ProtocolConfig,
    brukner_photons,
    brukner_reachable,
    chsh,
    fr_basis_ambiguity,
    fr_photons,
    memory_density,
    run_brukner,
    run_fr,
    run_fr_all,
    run_standard,
)

IDEAL = ProtocolConfig(mode="ideal", samples_per_stage=16)


def test_config_validation():
    with pytest.raises(ValueError, match="mode"):
        ProtocolConfig(mode="quantum")
    with pytest.raises(ValueError):
        ProtocolConfig(n_int=0)
    with pytest.raises(ValueError):
        ProtocolConfig(g=0)
    with pytest.raises(ValueError):
        ProtocolConfig(tau1=-1)
    with pytest.raises(ValueError):
        ProtocolConfig(t_final=10.0)
    with pytest.raises(ValueError):
        ProtocolConfig(seed=-3)
    assert ProtocolConfig(mode="ideal", n_int=0).int_dim == 1
    cfg = ProtocolConfig()
    assert cfg.measurement_time == pytest.approx(math.pi / 200)
    assert cfg.tau2 == pytest.approx(10 + math.pi / 200)
    assert ProtocolConfig.two_lab_defaults().n_int == 3


def test_ideal_standard_closed_form():
    run = run_standard(IDEAL)
    before = run.times < IDEAL.tau1
    np.testing.assert_allclose(run.internal.hh[before], 0.5, atol=1e-12)
    end = run.internal.matrix[-1]
    assert end[0, 0].real == pytest.approx(0.25, abs=1e-12)
    assert end[1, 1].real == pytest.approx(0.75, abs=1e-12)
    c = math.cos(math.pi / 8) ** 2
    assert run.external.c11[-1] == pytest.approx(c, abs=1e-12)
    assert run.external.c22[-1] == pytest.approx(1 - c, abs=1e-12)
    assert np.max(np.abs(run.norms - 1)) < 1e-12


def test_ideal_theta_quarter_leaves_friend_untouched():
    from dataclasses import replace

    run = run_standard(replace(IDEAL, theta=math.pi / 4))
    np.testing.assert_allclose(run.internal.hh, 0.5, atol=1e-12)
    assert run.external.c11[-1] == pytest.approx(1, abs=1e-12)


def test_decoherent_stage1_weights():
    cfg = ProtocolConfig(n_int=3, n_ext=3, seed=2, samples_per_stage=8)
    run = run_standard(cfg, times=[0.0, 5.0, 10.0])
    np.testing.assert_allclose(run.internal.hh, 0.5, atol=1e-9)
    np.testing.assert_allclose(run.internal.vv, 0.5, atol=1e-9)
    assert abs(run.internal.hv[0]) == pytest.approx(0.5)
    assert run.final_window() == (8.0, 10.0)


def test_standard_cap_checked_before_allocation():
    with pytest.raises(BlockTooLarge, match="cap"):
        run_standard(ProtocolConfig(n_int=20))


def test_fr_photons_normalized():
    psi = fr_photons()
    assert np.sum(np.abs(psi) ** 2) == pytest.approx(1)
    assert psi[0, 0] == 0


def test_fr_ideal_tables():
    tables = run_fr_all(ProtocolConfig.two_lab_defaults(mode="ideal"))
    before, after, final = (tables[t] for t in FR_TAGS)
    assert before.prob("h_a", "h_b") == pytest.approx(0, abs=1e-12)
    assert before.conditional("v_a", given=("h_b",)) == pytest.approx(1, abs=1e-9)
    assert after.conditional("v_a", given=("h_b",)) == pytest.approx(0.5, abs=1e-9)
    assert final.prob("-_A", "-_B") == pytest.approx(1 / 12, abs=1e-9)
    assert final.conditional("+_B", given=("v_a",)) == pytest.approx(5 / 6, abs=1e-9)
    for t in tables.values():
        assert t.probs.sum() == pytest.approx(1)


def test_outcome_table_queries():
    table = run_fr(ProtocolConfig.two_lab_defaults(mode="ideal"), "before_EA")
    m = table.marginal("I_A", "I_B")
    assert sum(m.values()) == pytest.approx(1)
    assert m[("v_a", "v_b")] == pytest.approx(1 / 3)
    assert table.prob("h_a", "v_a") == 0.0
    assert table.conditional(("v_a", "v_b"), given=("v_a",)) == pytest.approx(0.5)
    with pytest.raises(ValueError, match="zero probability"):
        table.conditional("v_b", given=("h_a", "h_b"))
    with pytest.raises(KeyError):
        table.prob("x_q")
    with pytest.raises(ValueError, match="tag"):
        run_fr(ProtocolConfig.two_lab_defaults(mode="ideal"), "middle")


def test_fr_coherence_warning(caplog):
    caplog.set_level(logging.WARNING, logger="friendsim.protocols")
    table = run_fr(ProtocolConfig.two_lab_defaults(mode="ideal"), "after_EA")
    assert not table.definite
    assert "not yet definite" in caplog.text


def test_fr_truncated_matches_full_run():
    cfg = ProtocolConfig.two_lab_defaults(mode="ideal")
    full = run_fr_all(cfg)
    np.testing.assert_allclose(run_fr(cfg, "after_EA").probs, full["after_EA"].probs, atol=1e-14)


def test_basis_ambiguity_forms():
    forms = fr_basis_ambiguity()
    r3, r6, r12 = math.sqrt(1 / 3), math.sqrt(1 / 6), math.sqrt(1 / 12)
    np.testing.assert_allclose(forms["alpha"].amplitudes, [[0, r3], [r3, r3]], atol=1e-15)
    np.testing.assert_allclose(forms["beta"].amplitudes, [[r6, 2 * r6], [-r6, 0]], atol=1e-15)
    np.testing.assert_allclose(forms["gamma"].amplitudes, [[r6, -r6], [2 * r6, 0]], atol=1e-15)
    np.testing.assert_allclose(
        forms["delta"].amplitudes, [[math.sqrt(3 / 4), -r12], [-r12, -r12]], atol=1e-15
    )
    for f in forms.values():
        np.testing.assert_allclose(f.to_hv(), forms["alpha"].amplitudes, atol=1e-15)
        assert f.state().norm() == pytest.approx(1)


def test_brukner_reachability():
    assert brukner_reachable("1", "3")
    assert brukner_reachable("2a", "3")
    assert not brukner_reachable("3", "1")
    assert not brukner_reachable("2a", "2b")
    assert not brukner_reachable("1", "1")
    with pytest.raises(ValueError):
        brukner_reachable("1", "4")
    with pytest.raises(ValueError, match="stage"):
        run_brukner(IDEAL, "5")


def test_brukner_photon_weights():
    psi = brukner_photons()
    assert np.sum(np.abs(psi) ** 2) == pytest.approx(1)
    c2 = math.cos(math.pi / 8) ** 2
    assert abs(psi[0, 1]) ** 2 + abs(psi[1, 0]) ** 2 == pytest.approx(c2)


def test_brukner_ideal_chsh():
    cfg = ProtocolConfig.two_lab_defaults(mode="ideal")
    s1 = chsh(run_brukner(cfg, "1"), "laboratories")
    assert s1.S == pytest.approx(2 * math.sqrt(2), abs=1e-9)
    s3 = chsh(run_brukner(cfg, "3"), "memories")
    assert s3.S == pytest.approx(1 / math.sqrt(2), abs=1e-9)
    # before any external measurement the A' records are fixed: a local model
    s0 = chsh(run_brukner(cfg, "1"), "memories")
    assert abs(s0.S) <= 2 + 1e-12
    assert set(s3.correlators) == {"A1B1", "A1B0", "A0B1", "A0B0"}
    with pytest.raises(ValueError, match="observable"):
        chsh(run_brukner(cfg, "1"), "apparati")


def test_brukner_single_external_stages_are_states():
    cfg = ProtocolConfig.two_lab_defaults(mode="ideal")
    for stage in BRUKNER_STAGES:
        res = run_brukner(cfg, stage)
        assert res.state.norm() == pytest.approx(1, abs=1e-12)
        rho = memory_density(res.state)
        assert max(rho.validity_errors().values()) < 1e-10


def test_chsh_rejects_non_observable():
    cfg = ProtocolConfig.two_lab_defaults(mode="ideal")
    res = run_brukner(cfg, "1")
    plus, minus = res.lab_pm["A"]
    bad = BruknerState(res.stage, res.state, {"A": (2 * plus, minus), "B": res.lab_pm["B"]}, res.lab_legs)
    with pytest.raises(ValueError, match="eigenvalues"):
        chsh(bad, "laboratories")
