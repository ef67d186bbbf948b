from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinwave_photon import analysis as A
from spinwave_photon.engines import DetectorSpec, count_coincidences, outcome_distribution, sample_masks
from spinwave_photon.hilbert import BasisLabel, JointKet, apply_map
from spinwave_photon.optics import AnalyzerSetting, analyzer_map

R2 = 1 / math.sqrt(2)


@pytest.mark.parametrize("counts, expected", [
    ((100, 100, 0, 0), 1.0), ((75, 75, 25, 25), 0.5), ((50, 50, 50, 50), 0.0), ((0, 0, 10, 30), -1.0),
])
def test_correlation_examples(counts, expected):
    est = A.correlation_E(counts)
    assert est.value == pytest.approx(expected, abs=1e-15)
    assert est.stderr == pytest.approx(math.sqrt((1 - expected**2) / sum(counts)))


def test_correlation_errors():
    with pytest.raises(ValueError, match="undefined"):
        A.correlation_E((0, 0, 0, 0))
    with pytest.raises(ValueError):
        A.correlation_E((1, 2, 3))
    with pytest.raises(ValueError):
        A.correlation_E((1, -2, 3, 4))


def test_exact_estimate_has_no_error_bar():
    est = A.correlation_E((0.3, 0.3, 0.2, 0.2), exact=True)
    assert est.stderr == 0 and est.value == pytest.approx(0.2)


def test_chsh_ideal_values():
    r = A.chsh((R2, -R2, R2, R2))
    assert r.value == pytest.approx(A.TSIRELSON, abs=1e-12)
    assert r.sigma_violation is None


@pytest.mark.parametrize("column, printed", [
    ((0.55, -0.66, 0.57, 0.63), 2.41),
    ((0.55, -0.67, 0.44, 0.61), 2.27),
    ((0.63, -0.59, 0.26, 0.57), 2.05),
])
def test_correlation_table_recombination(column, printed):
    assert A.chsh(column).value == pytest.approx(printed, abs=1e-12)


def test_chsh_stderr_and_sigma():
    ests = [A.CorrelationEstimate(v, 0.04, (0, 0, 0, 0)) for v in (0.55, -0.66, 0.57, 0.63)]
    r = A.chsh(ests)
    assert r.stderr == pytest.approx(0.08)
    assert r.sigma_violation == pytest.approx(0.41 / 0.08)


def test_chsh_setting_pattern_enforced():
    good = [("0", "22.5"), ("0", "67.5"), ("45", "22.5"), ("45", "67.5")]
    ests = [A.CorrelationEstimate(0.5, 0.1, (1, 1, 1, 1), s) for s in good]
    A.chsh(ests)
    bad = [ests[0], ests[2], ests[1], ests[3]]
    with pytest.raises(ValueError, match="order"):
        A.chsh(bad)
    with pytest.raises(ValueError):
        A.chsh(ests[:3])
    with pytest.raises(ValueError, match="outside"):
        A.chsh((1.5, 0, 0, 0))


def test_witness_examples():
    ideal = dict(xxx=1, zz23=1, zz34=1, zz24=1)
    assert A.ghz_witness(ideal).value == pytest.approx(-1)
    measured = dict(xxx=0.80, zz23=0.92, zz34=0.89, zz24=0.94)
    assert A.ghz_witness(measured).value == pytest.approx(-0.675, abs=1e-12)
    assert A.ghz_witness(dict.fromkeys(ideal, 0)).value == pytest.approx(1.5)
    with pytest.raises(ValueError):
        A.ghz_witness(dict(ideal, xxx=1.2))
    with pytest.raises(ValueError, match="missing"):
        A.ghz_witness({"xxx": 1})


def test_mermin_examples():
    assert A.mermin(dict(yyx=-1, yxy=-1, xyy=-1, xxx=1)).value == pytest.approx(4)
    r = A.mermin(dict(yyx=-0.77, yxy=-0.77, xyy=-0.80, xxx=0.80))
    assert r.value == pytest.approx(3.14, abs=1e-12)
    assert r.value > 2 and r.value > A.TSIRELSON
    assert A.mermin(dict(yyx=0, yxy=0, xyy=0, xxx=0)).value == 0
    with pytest.raises(ValueError):
        A.mermin(dict(yyx=-2, yxy=0, xyy=0, xxx=0))


def test_witness_and_mermin_error_propagation():
    t = {k: A.CorrelationEstimate(0.9, 0.02, (0, 0, 0, 0)) for k in A.WITNESS_TERMS}
    w = A.ghz_witness(t)
    assert w.stderr == pytest.approx(math.sqrt(0.02**2 + 3 * 0.25 * 0.02**2))
    assert w.sigma_violation == pytest.approx(-w.value / w.stderr)
    m = A.mermin({k: A.CorrelationEstimate(-0.8 if k != "xxx" else 0.8, 0.06, (0, 0, 0, 0)) for k in A.MERMIN_TERMS})
    assert m.stderr == pytest.approx(0.12)
    assert m.sigma_above_tsirelson == pytest.approx((3.2 - A.TSIRELSON) / 0.12)


def test_parity_correlation():
    counts = {(1, 1, 1): 40, (-1, -1, 1): 40, (1, -1, 1): 10, (-1, 1, -1): 10}
    assert A.parity_correlation(counts, (0, 1, 2)).value == pytest.approx(0.8)
    assert A.parity_correlation(counts, (0, 1)).value == pytest.approx(0.6)
    assert A.parity_correlation(counts, (2,)).value == pytest.approx(0.8)


def _pair_dist(theta_a, theta_b):
    lab = lambda pa, pb: BasisLabel.make({("a", pa): 1, ("b", pb): 1})
    st_ = JointKet({lab("H", "H"): R2, lab("V", "V"): R2}, {"a": "HV", "b": "HV"})
    st_ = apply_map(apply_map(st_, analyzer_map(AnalyzerSetting("a", "linear", theta_a))),
                    analyzer_map(AnalyzerSetting("b", "linear", theta_b)))
    dets = [DetectorSpec(f"{p}{m}", m, p) for m in "ab" for p in "HV"]
    return outcome_distribution(st_, dets)


PATTERNS = ({"Ha", "Hb"}, {"Va", "Vb"}, {"Ha", "Vb"}, {"Va", "Hb"})


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 179.9), st.floats(0, 179.9))
def test_estimator_consistency_with_exact_probabilities(ta, tb):
    d = _pair_dist(ta, tb)
    est = A.correlation_E([d.prob(p) for p in PATTERNS], exact=True)
    assert est.value == pytest.approx(math.cos(2 * math.radians(ta - tb)), abs=1e-12)


def test_monte_carlo_convergence_over_seeds():
    d = _pair_dist(0, 22.5)
    exact = A.correlation_E([d.prob(p) for p in PATTERNS], exact=True).value
    inside = 0
    for seed in range(100):
        masks = sample_masks(d, 10_000, seed)
        est = A.correlation_E([count_coincidences(masks, d, p) for p in PATTERNS])
        inside += abs(est.value - exact) <= 4 * est.stderr
    assert inside >= 99


def test_write_etable(tmp_path):
    path = tmp_path / "e.csv"
    A.write_etable(path, [{"theta_a": "0", "theta_b": "22.5", "E": 0.5, "stderr": 0.1, "counts": [3, 3, 1, 1]}],
                   ("theta_a", "theta_b", "E", "stderr", "counts"), ["manifest: {}"])
    assert path.read_text().splitlines() == ["# manifest: {}", "theta_a,theta_b,E,stderr,counts",
                                             "0,22.5,0.5,0.1,3;3;1;1"]
