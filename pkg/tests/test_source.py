from __future__ import annotations

import cmath
import math
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st
from sympy import S
from sympy.physics.quantum.cg import CG

from spinwave_photon.hilbert import BasisLabel, apply_map, project
from spinwave_photon.optics import quarter_wave
from spinwave_photon.source import (
    PHASE_RATIO,
    LevelScheme,
    SourceParams,
    arm_ensemble,
    build_atom_photon_state,
    clebsch_gordan,
    evolve_larmor,
    larmor_rate,
    phi_of_tau,
    retrieve,
    scan_level_assignments,
    spin_wave_qubit,
    spin_wave_weights,
)

SQ2 = 1 / math.sqrt(2)


def sympy_cg(j1, m1, j2, m2, j, m) -> float:
    return float(CG(S(j1), S(m1), S(j2), S(m2), S(j), S(m)).doit())


# ---------------------------------------------------------------------------
# angular momentum


@pytest.mark.parametrize("j1", [S(1) / 2, 1, S(3) / 2, 2])
@pytest.mark.parametrize("j2", [S(1) / 2, 1])
def test_clebsch_gordan_matches_sympy(j1, j2):
    j = abs(j1 - j2)
    while j <= j1 + j2:
        for k1 in range(int(2 * j1) + 1):
            m1 = -j1 + k1
            for k2 in range(int(2 * j2) + 1):
                m2 = -j2 + k2
                m = m1 + m2
                if abs(m) > j:
                    continue
                ours = clebsch_gordan(j1, m1, j2, m2, j, m)
                assert ours == pytest.approx(sympy_cg(j1, m1, j2, m2, j, m), abs=1e-14)
        j += 1


def test_cg_products_match_independent_evaluator():
    scheme = LevelScheme()
    for (m, alpha), x in scheme.cg_products().items():
        oracle = sympy_cg(1, m, 1, 0, scheme.F_e2, m) * sympy_cg(scheme.F_e2, m, 1, alpha, scheme.F_b, m + alpha)
        assert x == pytest.approx(oracle, abs=1e-14)


def test_spin_wave_weights_reproduce_hard_coded_values():
    w = spin_wave_weights(LevelScheme())
    assert w.w_plus == pytest.approx((math.sqrt(3 / 7), math.sqrt(4 / 7)), abs=1e-12)
    assert w.w_minus == pytest.approx((math.sqrt(4 / 7), math.sqrt(3 / 7)), abs=1e-12)
    assert w.cos_eta == pytest.approx(SQ2, abs=1e-12)
    assert w.sin_eta == pytest.approx(SQ2, abs=1e-12)


def _oracle_weights(f_e2, f_b):
    """Retained weights computed with sympy alone."""
    out = {}
    for alpha in (1, -1):
        xs = [sympy_cg(1, m, 1, 0, f_e2, m) * sympy_cg(f_e2, m, 1, alpha, f_b, m + alpha)
              for m in (-1, 0, 1) if abs(m + alpha) <= 1]
        n2 = sum(x * x for x in xs)
        out[alpha] = [x * x / n2 for x in xs] if n2 else None
    return out


def test_brute_force_assignment_selects_default_scheme():
    matches = []
    for f_e2 in range(4):
        for f_b in range(4):
            w = _oracle_weights(f_e2, f_b)
            if w[1] and w[-1] and w[1] == pytest.approx([3 / 7, 4 / 7]) and w[-1] == pytest.approx([4 / 7, 3 / 7]):
                matches.append((f_e2, f_b))
    assert matches == [(2, 2)]
    assert (LevelScheme().F_e2, LevelScheme().F_b) == (2, 2)
    scanned = scan_level_assignments()
    assert [k for k, w in scanned.items()
            if [x * x for x in w.w_plus] == pytest.approx([3 / 7, 4 / 7])] == [(2, 2)]


def test_scheme_without_retrievable_weight_raises():
    with pytest.raises(ValueError):
        spin_wave_weights(LevelScheme(1, 0, 0))


def test_qubit_drops_unreadable_components():
    q = spin_wave_qubit("A1")
    comps = {(c.m_a, c.m_b) for c in q.plus_components + q.minus_components}
    assert (1, 2) not in comps and (-1, -2) not in comps
    assert sum(c.weight ** 2 for c in q.plus_components) == pytest.approx(1, abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3))
def test_weight_normalisation(f_e2, f_b):
    try:
        w = spin_wave_weights(LevelScheme(1, f_b, f_e2))
    except ValueError:
        return
    assert sum(x * x for x in w.w_plus) == pytest.approx(1, abs=1e-12)
    assert sum(x * x for x in w.w_minus) == pytest.approx(1, abs=1e-12)


# ---------------------------------------------------------------------------
# write process


def lab(photons, level):
    return BasisLabel.make(photons, {"A1": level})


def test_zero_chi_gives_vacuum():
    st_ = build_atom_photon_state(SourceParams(chi=0.0), "A1")
    assert st_.amplitudes == {lab({}, "vac"): 1}


def test_second_order_amplitudes():
    chi = 0.014
    st_ = build_atom_photon_state(SourceParams(chi=chi), "A1")
    vac = st_.amplitude(lab({}, "vac"))
    single = sum(abs(st_.amplitude(lab({("S1", p): 1}, lv))) ** 2 for p, lv in (("L", "plus"), ("R", "minus")))
    double = st_.amplitude(lab({("S1", "L"): 1, ("S1", "R"): 1}, "double"))
    assert single / abs(vac) ** 2 == pytest.approx(chi**2, rel=1e-12)
    assert double / vac == pytest.approx(9.8e-5, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-4, 0.1))
def test_one_stokes_photon_conditional_state(chi):
    st_ = build_atom_photon_state(SourceParams(chi=chi), "A1")
    prob, post = project(st_, lambda l: l.occupation("S1") == 1)
    expected = {lab({("S1", "L"): 1}, "plus"): SQ2, lab({("S1", "R"): 1}, "minus"): SQ2}
    assert post.distance(st_.with_amplitudes(expected)) <= 1e-12


def test_visibility_ensemble_weights():
    ens = arm_ensemble(SourceParams(visibility=0.9), "A1")
    assert sum(w for w, _ in ens) == pytest.approx(1)
    assert len(ens) == 5


# ---------------------------------------------------------------------------
# storage


def test_default_precession_rate():
    beta = larmor_rate(0.2, 0.5)
    assert beta == pytest.approx(8.794e5, rel=1e-3)
    assert SourceParams().beta == beta


def test_zero_storage_leaves_state_unchanged():
    st_ = build_atom_photon_state(SourceParams(), "A1")
    p = SourceParams(tau=0.0)
    retrieved_direct = retrieve(st_, "A1", replace(p, retrieval_eff=1.0))
    retrieved_stored = retrieve(evolve_larmor(st_, p), "A1", replace(p, retrieval_eff=1.0))
    assert retrieved_stored.isclose(retrieved_direct)
    assert evolve_larmor(st_, p, model="effective").isclose(st_)


def _retrieved_phase(params):
    st_ = build_atom_photon_state(replace(params, double_excitations=False, retrieval_eff=1.0), "A1")
    out = retrieve(evolve_larmor(st_, params), "A1", replace(params, retrieval_eff=1.0))
    a_plus = out.amplitude(BasisLabel.make({("S1", "L"): 1, ("AS1", "R"): 1}, {"A1": "vac"}))
    a_minus = out.amplitude(BasisLabel.make({("S1", "R"): 1, ("AS1", "L"): 1}, {"A1": "vac"}))
    return cmath.phase(a_plus / a_minus), out


def test_component_evolution_reproduces_closed_form_phase():
    p = SourceParams(tau=500e-9)
    assert p.beta * p.tau == pytest.approx(0.4397, abs=1e-4)
    phase, _ = _retrieved_phase(p)
    assert phase == pytest.approx(phi_of_tau(p.tau, p.beta), abs=1e-12)


def test_half_turn_precession_is_a_branch_global_sign():
    p = SourceParams(beta=math.pi / 1e-6, tau=1e-6)
    base = build_atom_photon_state(p, "A1")
    st_ = evolve_larmor(base, p)
    out = retrieve(st_, "A1", replace(p, retrieval_eff=1.0))
    ref = retrieve(base, "A1", replace(p, retrieval_eff=1.0))
    for k, a in ref.amplitudes.items():
        assert abs(out.amplitude(k)) == pytest.approx(abs(a), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1.7e-6), st.sampled_from(["components", "effective"]))
def test_larmor_preserves_amplitude_moduli(tau, model):
    p = SourceParams(tau=tau)
    base = build_atom_photon_state(p, "A1")
    out = evolve_larmor(base, p, model=model)
    assert out.norm2 == pytest.approx(base.norm2, abs=1e-12)
    # Moduli are compared against the unprecessed state in the same representation.
    ref = evolve_larmor(base, replace(p, tau=0.0), model=model)
    assert set(out.amplitudes) == set(ref.amplitudes)
    for k, a in ref.amplitudes.items():
        assert abs(out.amplitude(k)) == pytest.approx(abs(a), rel=1e-14)


def test_phi_examples():
    beta = SourceParams().beta
    assert phi_of_tau(0.0, beta) == 0.0
    assert PHASE_RATIO == pytest.approx(0.07180, abs=5e-6)
    phi = phi_of_tau(500e-9, beta)
    assert phi == pytest.approx(0.0675, abs=5e-4)
    assert 3.8 < math.degrees(phi) < 3.95


def test_phi_domain_error():
    with pytest.raises(ValueError):
        phi_of_tau(1.0, math.pi / 2)


@given(st.floats(0, 1.5), st.floats(1e-6, 0.05))
def test_phi_is_strictly_increasing(x, dx):
    if x + dx >= math.pi / 2:
        return
    assert phi_of_tau(x + dx, 1.0) > phi_of_tau(x, 1.0)


def test_projected_form_is_overlap_phase():
    """The projected variant is the relative phase of <psi(0)|psi(tau)> per level."""
    x = 0.4397
    q = spin_wave_qubit("A1")
    ov = {kind: sum(c.weight ** 2 * cmath.exp(1j * (c.m_a + c.m_b) * x) for c in q.components(kind))
          for kind in ("plus", "minus")}
    expected = cmath.phase(ov["plus"]) - cmath.phase(ov["minus"])
    assert phi_of_tau(x, 1.0, form="projected") == pytest.approx(expected, abs=1e-12)


# ---------------------------------------------------------------------------
# retrieval


def test_retrieval_then_waveplates_gives_photon_pair_state():
    p = SourceParams(retrieval_eff=1.0, double_excitations=False, tau=0.0)
    st_ = build_atom_photon_state(p, "A1")
    _, st_ = project(st_, lambda l: l.occupation("S1") == 1)
    st_ = apply_map(st_, quarter_wave("S1", "stokes"))
    st_ = apply_map(retrieve(st_, "A1", p), quarter_wave("AS1", "anti_stokes"))
    expected = {BasisLabel.make({("S1", x): 1, ("AS1", x): 1}, {"A1": "vac"}): SQ2 for x in "HV"}
    assert st_.distance(st_.with_amplitudes(expected)) <= 1e-12


def test_zero_retrieval_moves_all_spin_wave_weight_to_deficit():
    p = SourceParams(retrieval_eff=0.0)
    st_ = build_atom_photon_state(p, "A1")
    out = retrieve(st_, "A1", p)
    stored = 1 - abs(st_.amplitude(lab({}, "vac"))) ** 2
    assert out.norm_deficit == pytest.approx(stored, abs=1e-15)
    out.check()


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1), st.floats(1e-3, 0.2), st.booleans())
def test_retrieval_contract(eff, chi, doubles):
    p = SourceParams(chi=chi, retrieval_eff=eff, double_excitations=doubles, tau=0.0)
    st_ = build_atom_photon_state(p, "A1")
    out = retrieve(st_, "A1", p)
    w = {lv: sum(abs(a) ** 2 for k, a in st_.amplitudes.items() if k.level("A1") == lv)
         for lv in ("vac", "plus", "minus", "double")}
    assert out.norm2 == pytest.approx(w["vac"] + eff * (w["plus"] + w["minus"]) + eff**2 * w["double"], abs=1e-12)
    out.check()


def test_single_branch_weight_scales_by_retrieval():
    p = SourceParams(retrieval_eff=0.2, double_excitations=False, tau=0.0)
    st_ = build_atom_photon_state(p, "A1")
    out = retrieve(st_, "A1", p)
    before = abs(st_.amplitude(lab({("S1", "L"): 1}, "plus"))) ** 2
    after = abs(out.amplitude(BasisLabel.make({("S1", "L"): 1, ("AS1", "R"): 1}, {"A1": "vac"}))) ** 2
    assert after == pytest.approx(0.2 * before, rel=1e-12)
