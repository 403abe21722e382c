import math

import numpy as np
import pytest

from twophoton.filters import (
    IDX,
    DegenerateJumpError,
    FilterState,
    ModelParams,
    component,
    drift_increment,
    excitation_probability,
    hh_step,
    hp_step,
    init_state,
    jump_numerators,
    k_signals,
    master_step,
    renormalized,
    z_signals,
)
from twophoton.operators import (
    KET_E,
    KET_G,
    SIGMA_MINUS,
    SIGMA_PLUS,
    commutator,
    dag,
    dissipator,
    projector,
    trace,
)
from twophoton.pulses import gaussian, vacuum

RNG = np.random.default_rng(31415)

GROUND = np.array([0.0, 1.0], complex)
EXCITED = np.array([1.0, 0.0], complex)


def vacuum_params(kappa1=1.0, kappa2=0.5, r=0.5, eta=GROUND):
    return ModelParams(kappa1, kappa2, r, vacuum(), vacuum(), eta)


def photon_params(eta=GROUND, r=1 / math.sqrt(2)):
    return ModelParams(1.0, 1.0, r, gaussian(1.46, 3.0), gaussian(2.92, 4.0), eta)


def random_state(consistent=True, unit_trace=False):
    """Random FilterState; hermitian corner components when `consistent`."""
    rho = RNG.normal(size=(10, 2, 2)) + 1j * RNG.normal(size=(10, 2, 2))
    if consistent:
        for label in ("11;11", "00;11", "11;00", "00;00"):
            i = IDX[label]
            rho[i] = rho[i] + dag(rho[i])
    if unit_trace:
        rho[IDX["11;11"]] /= trace(rho[IDX["11;11"]]).real
    return FilterState(rho, 0.0)


def test_init_state_components():
    st = init_state(photon_params(), -5.0)
    gg = projector(GROUND)
    for label in ("11;11", "00;11", "11;00", "00;00"):
        assert np.allclose(st.rho[IDX[label]], gg)
    for label in ("10;11", "11;10", "10;10", "01;10", "00;10", "10;00"):
        assert np.allclose(st.rho[IDX[label]], 0.0)
    assert excitation_probability(st) == 0.0


def test_component_resolves_adjoint_partners():
    st = random_state()
    assert np.array_equal(component(st.rho, "01;11"), dag(st.rho[IDX["10;11"]]))
    assert np.array_equal(component(st.rho, "11;01"), dag(st.rho[IDX["11;10"]]))
    assert np.array_equal(component(st.rho, "10;01"), dag(st.rho[IDX["01;10"]]))


def test_excitation_probability_trivials():
    p = photon_params()
    st = init_state(p, -5.0)
    st.rho[IDX["11;11"]] = projector(EXCITED)
    assert excitation_probability(st) == 1.0
    st.rho[IDX["11;11"]] = projector(GROUND)
    assert excitation_probability(st) == 0.0


def test_z_signals_ground_state():
    p = photon_params()
    st = init_state(p, -5.0)
    st.rho[IDX["11;11"]] = projector(GROUND)
    z11, z12 = z_signals(st, p, -5.0)
    assert z11 == pytest.approx(0.0, abs=1e-14)
    assert z12 == pytest.approx(0.0, abs=1e-14)


def test_z_signals_plus_state():
    p = ModelParams(1.3, 0.6, 0.2, vacuum(), vacuum())
    st = init_state(p, 0.0)
    plus = (KET_E + KET_G) / math.sqrt(2)
    st.rho[IDX["11;11"]] = projector(plus)
    for label in ("10;11", "11;10"):
        st.rho[IDX[label]] = 0.0
    z11, z12 = z_signals(st, p, 0.0)
    assert z11 == pytest.approx(math.sqrt(1.3), abs=1e-12)
    assert z12 == pytest.approx(math.sqrt(0.6), abs=1e-12)


def test_z_signals_against_independent_evaluation():
    p = photon_params()
    st = random_state()
    t = 2.7
    z11, z12 = z_signals(st, p, t)
    x1 = float(p.pulse1.xi(t))
    x2 = float(p.pulse2.xi(t))
    pm = SIGMA_PLUS + SIGMA_MINUS
    r1011 = st.rho[IDX["10;11"]]
    r1110 = st.rho[IDX["11;10"]]
    e11 = (
        x1 * np.trace(r1011).conjugate()
        + x1 * np.trace(dag(r1011))
        + np.trace(pm @ st.rho[IDX["11;11"]])
    )
    # conj(x)*Tr[A] + x*Tr[A+] with real x collapses to 2 Re x Tr[A]
    expect11 = 2 * x1 * np.trace(r1011).real + np.trace(pm @ st.rho[IDX["11;11"]]).real
    expect12 = 2 * x2 * np.trace(r1110).real + np.trace(pm @ st.rho[IDX["11;11"]]).real
    assert z11 == pytest.approx(expect11, abs=1e-11)
    assert z12 == pytest.approx(expect12, abs=1e-11)
    assert e11 is not None  # silence unused warning


def test_k_signals_ground_corner_states():
    p = vacuum_params(kappa1=1.2, kappa2=0.7, r=0.6)
    st = init_state(p, 0.0)  # corner components |g><g|
    ks = k_signals(st, p, 0.0)
    assert ks.kp == pytest.approx(0.0, abs=1e-14)


def test_k_signals_excited_corner_states():
    p = vacuum_params(kappa1=1.2, kappa2=0.7, r=0.6, eta=EXCITED)
    st = init_state(p, 0.0)
    ks = k_signals(st, p, 0.0)
    r2 = 0.6**2
    expect = r2 * 1.2 + (1 - r2) * 0.7
    assert ks.kp == pytest.approx(expect, abs=1e-12)
    assert ks.kp_raw == pytest.approx(expect, abs=1e-12)


def test_k_signals_clamps_negative():
    p = vacuum_params(kappa1=1.0, kappa2=0.0, r=1.0)
    st = init_state(p, 0.0)
    st.rho[IDX["11;00"]] = -projector(EXCITED)  # unphysical probe state
    ks = k_signals(st, p, 0.0)
    assert ks.kp_raw < 0
    assert ks.kp == 0.0


def test_drift_ground_fixed_point():
    # no photons anywhere: the ground state is stationary
    p = vacuum_params()
    st = init_state(p, 2.0)
    d = drift_increment(st, p, 2.0)
    assert np.allclose(d, 0.0, atol=1e-14)


def test_drift_spontaneous_decay_rate():
    p = vacuum_params(kappa1=1.0, kappa2=0.5, eta=EXCITED)
    st = init_state(p, 0.0)
    d = drift_increment(st, p, 0.0)
    # d Pe/dt = -(kappa1 + kappa2) Pe
    assert d[IDX["11;11"]][0, 0].real == pytest.approx(-1.5, abs=1e-12)


def test_drift_top_component_traceless():
    p = photon_params()
    for _ in range(10):
        st = random_state()
        d = drift_increment(st, p, RNG.uniform(0, 6))
        assert abs(trace(d[IDX["11;11"]])) < 1e-12


def _daggered_drift_01_11(st, p, t):
    """Independent transcription of the adjoint equation for rho^{01;11}."""
    x1 = complex(p.pulse1.xi(t))
    x2 = complex(p.pulse2.xi(t))
    rk1, rk2 = math.sqrt(p.kappa1), math.sqrt(p.kappa2)
    c = lambda lbl: component(st.rho, lbl)
    out = (p.kappa1 + p.kappa2) * dissipator(SIGMA_MINUS, c("01;11"))
    out = out + rk1 * np.conj(x1) * commutator(SIGMA_MINUS, c("00;11"))
    out = out + rk2 * x2 * commutator(c("01;01"), SIGMA_PLUS)
    out = out + rk2 * np.conj(x2) * commutator(SIGMA_MINUS, c("01;10"))
    return out


def test_drift_adjoint_consistency():
    # the stored component's drift, daggered, must equal the independently
    # transcribed daggered equation evaluated on the same state
    p = photon_params()
    for _ in range(5):
        st = random_state()
        t = RNG.uniform(0, 6)
        d = drift_increment(st, p, t)
        lhs = dag(d[IDX["10;11"]])
        rhs = _daggered_drift_01_11(st, p, t)
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_hh_step_ground_fixed_point():
    p = vacuum_params()
    st = init_state(p, 2.0)
    for dw1, dw2 in ((0.0, 0.0), (0.3, -0.2), (-1.0, 1.0)):
        out = hh_step(st, p, 2.0, 1e-3, dw1, dw2)
        assert np.allclose(out.rho, st.rho, atol=1e-14)


def test_hh_step_trace_gain_vanishes():
    # Tr rho^{11;11} is unchanged by the innovation gains when the state is
    # adjoint-consistent and normalized
    p = photon_params()
    st = random_state(consistent=True, unit_trace=True)
    t = 2.5
    base = master_step(st, p, t, 1e-3, method="euler")
    for dw1, dw2 in ((0.5, 0.0), (0.0, 0.5), (0.7, -0.3)):
        out = hh_step(st, p, t, 1e-3, dw1, dw2)
        tr_gain = trace(out.rho[IDX["11;11"]] - base.rho[IDX["11;11"]])
        assert abs(tr_gain) < 1e-12


def test_steps_with_zero_noise_reduce_to_master_euler():
    p = photon_params()
    st = random_state(consistent=True, unit_trace=True)
    t, dt = 2.5, 1e-3
    euler = master_step(st, p, t, dt, method="euler")
    hh = hh_step(st, p, t, dt, 0.0, 0.0)
    assert np.array_equal(hh.rho, euler.rho)
    # hp with the innovation set to zero: dN_raw = Kp dt restores pure drift
    ks = k_signals(st, p, t)
    jnum = jump_numerators(st, p, t)
    hp = hp_step(st, p, t, dt, 0.0, 0)
    manual = hp.rho + (jnum / ks.kp - st.rho) * (ks.kp * dt)
    assert np.allclose(manual, euler.rho, atol=1e-12)


def test_hp_step_ground_fixed_point():
    p = vacuum_params()
    st = init_state(p, 2.0)
    out = hp_step(st, p, 2.0, 1e-3, 0.0, 0)
    assert np.allclose(out.rho, st.rho, atol=1e-14)


def test_hp_step_click_collapses_excited_atom():
    # no photons, excited atom, r = 1: a click funnels the emission into the
    # counted output and drops the atom to the ground state
    p = ModelParams(1.0, 0.3, 1.0, vacuum(), vacuum(), EXCITED)
    st = init_state(p, 0.0)
    dt = 1e-8
    out = hp_step(st, p, 0.0, dt, 0.0, 1)
    assert np.allclose(out.rho[IDX["11;11"]], projector(GROUND), atol=1e-6)
    assert excitation_probability(out) == pytest.approx(0.0, abs=1e-6)


def test_hp_step_degenerate_click_raises():
    p = vacuum_params()
    st = init_state(p, 2.0)  # ground state, no photons: click rate is 0
    with pytest.raises(DegenerateJumpError):
        hp_step(st, p, 2.0, 1e-3, 0.0, 1)


def test_master_step_analytic_decay():
    p = vacuum_params(kappa1=1.0, kappa2=0.5, eta=EXCITED)
    st = init_state(p, 0.0)
    dt = 1e-3
    t = 0.0
    for _ in range(2000):
        st = master_step(st, p, t, dt)
        t += dt
    assert excitation_probability(st) == pytest.approx(math.exp(-1.5 * t), abs=1e-9)


def test_master_step_preserves_trace():
    p = photon_params()
    st = init_state(p, 1.0)
    t = 1.0
    for _ in range(1000):
        st = master_step(st, p, t, 1e-3)
        t += 1e-3
    assert trace(st.rho[IDX["11;11"]]).real == pytest.approx(1.0, abs=1e-9)


def test_renormalized_rescales_all_components():
    st = random_state(unit_trace=False)
    out = renormalized(st)
    assert trace(out.rho[IDX["11;11"]]).real == pytest.approx(1.0, abs=1e-12)
    ratio = st.rho[IDX["00;00"]] / out.rho[IDX["00;00"]]
    tr = trace(st.rho[IDX["11;11"]]).real
    assert np.allclose(ratio, tr, atol=1e-9)


def _gains_daggered_01_11(st, p, t):
    """Adjoint equation's two homodyne gains for rho^{01;11}, transcribed
    independently (channel blocks for jk = 01, mn = 11)."""
    x1 = complex(p.pulse1.xi(t))
    x2 = complex(p.pulse2.xi(t))
    rk1, rk2 = math.sqrt(p.kappa1), math.sqrt(p.kappa2)
    r = p.r
    s = math.sqrt(1 - r * r)
    c = lambda lbl: component(st.rho, lbl)
    tgt = c("01;11")
    sandwich = tgt @ SIGMA_PLUS + SIGMA_MINUS @ tgt
    a1 = np.conj(x1) * c("00;11") + rk1 * sandwich
    a2 = np.conj(x2) * c("01;10") + x2 * c("01;01") + rk2 * sandwich
    z11, z12 = z_signals(st, p, t)
    g1 = s * a1 + r * a2 - tgt * (s * z11 + r * z12)
    g2 = -r * a1 + s * a2 - tgt * (-r * z11 + s * z12)
    return g1, g2


def test_hh_gains_adjoint_consistency():
    p = photon_params()
    for _ in range(5):
        st = random_state()
        t = RNG.uniform(0, 6)
        dt = 1e-3
        base = master_step(st, p, t, dt, method="euler")
        w1 = hh_step(st, p, t, dt, 1.0, 0.0)
        w2 = hh_step(st, p, t, dt, 0.0, 1.0)
        g1_stored = w1.rho[IDX["10;11"]] - base.rho[IDX["10;11"]]
        g2_stored = w2.rho[IDX["10;11"]] - base.rho[IDX["10;11"]]
        g1_dag, g2_dag = _gains_daggered_01_11(st, p, t)
        assert np.allclose(dag(g1_stored), g1_dag, atol=1e-11)
        assert np.allclose(dag(g2_stored), g2_dag, atol=1e-11)


def test_trajectory_preserves_hermiticity_and_trace():
    # two-homodyne trajectory with renormalization off
    p = photon_params()
    st = init_state(p, 1.0)
    rng = np.random.default_rng(5)
    t, dt = 1.0, 1e-3
    for _ in range(3000):
        dw = rng.normal(0.0, math.sqrt(dt), size=2)
        st = hh_step(st, p, t, dt, dw[0], dw[1])
        t += dt
    top = st.rho[IDX["11;11"]]
    assert np.max(np.abs(top - dag(top))) < 1e-8
    assert trace(top).real == pytest.approx(1.0, abs=5e-2)
    for stored, virt in (("10;11", "01;11"), ("11;10", "11;01")):
        assert np.allclose(
            dag(st.rho[IDX[stored]]), component(st.rho, virt), atol=1e-12
        )


def test_batched_state_matches_single():
    p = photon_params()
    single = init_state(p, 1.0)
    batch = init_state(p, 1.0, batch_shape=(3,))
    dw1 = np.array([0.1, -0.2, 0.0])
    dw2 = np.array([0.05, 0.0, -0.1])
    out_b = hh_step(batch, p, 1.0, 1e-3, dw1, dw2)
    for j in range(3):
        out_s = hh_step(single, p, 1.0, 1e-3, float(dw1[j]), float(dw2[j]))
        assert np.allclose(out_b.rho[:, j], out_s.rho, atol=1e-15)
