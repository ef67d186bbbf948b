from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinwave_photon.engines import DetectorSpec, outcome_distribution
from spinwave_photon.hilbert import BasisLabel, JointKet, LinearMap, apply_map, tensor
from spinwave_photon.optics import (
    AnalyzerSetting,
    analyzer_map,
    analyzer_projectors,
    half_wave_45,
    pbs,
    quarter_wave,
)

SQ2 = 1 / math.sqrt(2)


def one(mode, pol, amp=1.0, basis=None):
    basis = basis or ("HV" if pol in "HV" else "RL")
    return JointKet({BasisLabel.make({(mode, pol): 1}): amp}, {mode: basis})


def lab(**photons):
    return BasisLabel.make({tuple(k.split("_")): n for k, n in photons.items()})


def test_quarter_wave_conventions():
    assert apply_map(one("S", "R"), quarter_wave("S", "stokes")).isclose(one("S", "H"))
    assert apply_map(one("S", "L"), quarter_wave("S", "stokes")).isclose(one("S", "V"))
    assert apply_map(one("AS", "R"), quarter_wave("AS", "anti_stokes")).isclose(one("AS", "V"))
    assert apply_map(one("AS", "L"), quarter_wave("AS", "anti_stokes")).isclose(one("AS", "H"))


def test_quarter_wave_inverse_round_trip():
    m = quarter_wave("S", "anti_stokes")
    st_ = JointKet({lab(S_R=1): 0.6, lab(S_L=1): 0.8j}, {"S": "RL"})
    assert apply_map(apply_map(st_, m), m.inverse()).isclose(st_)
    with pytest.raises(ValueError):
        quarter_wave("S", "sideways")


def test_half_wave_45():
    h_prime = JointKet({lab(a_H=1): SQ2, lab(a_V=1): SQ2}, {"a": "HV"})
    assert apply_map(one("a", "H"), half_wave_45("a")).isclose(h_prime)
    assert apply_map(h_prime, half_wave_45("a")).isclose(one("a", "H"))
    v_prime = np.array([SQ2, -SQ2])
    out = apply_map(one("a", "H"), half_wave_45("a"))
    overlap = v_prime[0] * out.amplitude(lab(a_H=1)) + v_prime[1] * out.amplitude(lab(a_V=1))
    assert overlap == pytest.approx(0, abs=1e-15)
    out_v = apply_map(one("a", "V"), half_wave_45("a"))
    assert out_v.amplitude(lab(a_H=1)) == pytest.approx(SQ2)
    assert out_v.amplitude(lab(a_V=1)) == pytest.approx(-SQ2)


def two(p1, p2):
    return tensor(one("i1", p1), one("i2", p2))


def test_pbs_routing():
    m = pbs("i1", "i2", "o1", "o2")
    assert apply_map(two("H", "H"), m).amplitude(lab(o1_H=1, o2_H=1)) == pytest.approx(1)
    out = apply_map(two("H", "V"), m)
    assert out.amplitude(lab(o1_H=1, o1_V=1)) == pytest.approx(1)


def test_pbs_splits_a_double_excitation_across_ports():
    amp = 0.014**2 / 2
    st_ = JointKet({lab(i1_H=1, i1_V=1): amp}, {"i1": "HV"})
    st_ = tensor(st_, JointKet.vacuum({"i2": "HV"}))
    out = apply_map(st_, pbs("i1", "i2", "o1", "o2"))
    assert out.amplitude(lab(o1_H=1, o2_V=1)) == pytest.approx(amp)


def test_pbs_needs_distinct_modes_and_unit_phase():
    with pytest.raises(ValueError):
        pbs("a", "a", "b", "c")
    with pytest.raises(ValueError):
        pbs("a", "b", "c", "d", reflection_phase=0.5)


@pytest.mark.parametrize("phase", [1, 1j, -1, np.exp(0.7j)])
def test_reflection_phase_does_not_change_coincidence_branches(phase):
    src = JointKet({lab(i1_H=1, i2_H=1): 0.5, lab(i1_V=1, i2_V=1): 0.5, lab(i1_H=1, i2_V=1): 0.5,
                    lab(i1_V=1, i2_H=1): 0.5}, {"i1": "HV", "i2": "HV"})
    out = apply_map(src, pbs("i1", "i2", "o1", "o2", reflection_phase=phase))
    dets = [DetectorSpec(f"{p}{m}", m, p) for m in ("o1", "o2") for p in "HV"]
    ref = outcome_distribution(apply_map(src, pbs("i1", "i2", "o1", "o2")), dets)
    dist = outcome_distribution(out, dets)
    for clicks, p in ref.probs.items():
        assert dist.prob(clicks) == pytest.approx(p, abs=1e-12)


def test_analyzer_examples():
    plus, minus = analyzer_projectors(AnalyzerSetting("a", "linear", 0))
    assert np.allclose(plus, [1, 0]) and np.allclose(minus, [0, 1])
    r = np.array([SQ2, 1j * SQ2])
    plus, _ = analyzer_projectors(AnalyzerSetting("a", "pauli-y"))
    assert abs(np.vdot(plus, r)) ** 2 == pytest.approx(1)
    plus, _ = analyzer_projectors(AnalyzerSetting("a", "linear", 22.5))
    assert abs(np.vdot(plus, [1, 0])) ** 2 == pytest.approx(0.8536, abs=5e-5)


def test_analyzer_map_sends_plus_outcome_to_H():
    s = AnalyzerSetting("a", "linear", 22.5)
    plus, _ = analyzer_projectors(s)
    st_ = JointKet({lab(a_H=1): plus[0], lab(a_V=1): plus[1]}, {"a": "HV"})
    assert abs(apply_map(st_, analyzer_map(s)).amplitude(lab(a_H=1))) == pytest.approx(1)


def test_analyzer_setting_validation():
    with pytest.raises(ValueError):
        AnalyzerSetting("a", "linear", 180)
    with pytest.raises(ValueError):
        AnalyzerSetting("a", "pauli-x", 10)
    with pytest.raises(ValueError):
        AnalyzerSetting("a", "elliptic")


@settings(max_examples=50, deadline=None)
@given(st.one_of(
    st.builds(AnalyzerSetting, st.just("a"), st.just("linear"), st.floats(0, 179.999)),
    st.builds(AnalyzerSetting, st.just("a"), st.sampled_from(["circular", "pauli-x", "pauli-y", "pauli-z"])),
))
def test_projector_pair_is_complete_and_orthogonal(setting):
    plus, minus = analyzer_projectors(setting)
    total = np.outer(plus, plus.conj()) + np.outer(minus, minus.conj())
    assert np.allclose(total, np.eye(2), atol=1e-12)
    assert abs(np.vdot(plus, minus)) < 1e-12


def test_all_elements_unitary():
    for m in (quarter_wave("a", "stokes"), quarter_wave("a", "anti_stokes"), half_wave_45("a"),
              pbs("a", "b", "c", "d"), analyzer_map(AnalyzerSetting("a", "linear", 33.0))):
        assert np.allclose(m.matrix.conj().T @ m.matrix, np.eye(len(m.inputs)), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from(["i1_H", "i1_V", "i2_H", "i2_V"]), min_size=1, max_size=2))
def test_pbs_conserves_photon_number(keys):
    occ = {}
    for k in keys:
        occ[k] = occ.get(k, 0) + 1
    st_ = JointKet({lab(**occ): 1.0}, {"i1": "HV", "i2": "HV"})
    out = apply_map(st_, pbs("i1", "i2", "o1", "o2"))
    for k in out.amplitudes:
        assert k.total_photons == len(keys)


def test_identity_composition():
    m = half_wave_45("a")
    comp = m.then(m)
    assert np.allclose(comp.matrix, np.eye(2))
    assert isinstance(comp, LinearMap)
