"""End-to-end pipelines: pair CHSH, three-photon GHZ and heralded swapping.

Every pipeline works on a convex ensemble of kets, ``[(weight, JointKet)]``,
so that the per-arm white-noise (visibility) model can be carried through
the optics.  Click statistics are evaluated on the post-selected
(coincidence-accepted) distribution; the Monte Carlo engine samples that
same distribution trial by trial.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from . import analysis, engines
from .engines import DetectorSpec, OutcomeDistribution
from .hilbert import (
    BasisLabel,
    JointKet,
    apply_map,
    at_level,
    drop_modes,
    occupied,
    project,
    tensor,
)
from .optics import AnalyzerSetting, analyzer_map, half_wave_45, pbs, quarter_wave
from .source import (
    ARMS,
    LevelScheme,
    SourceParams,
    anti_stokes_mode,
    arm_ensemble,
    evolve_larmor,
    phi_of_tau,
    retrieve,
    stokes_mode,
)

PROTOCOLS = ("pair", "ghz3", "swap")
ENGINES = ("exact", "mc")
GHZ_SETTINGS = ("zzz", "xxx", "yyx", "yxy", "xyy")
PAULI_KIND = {"x": "pauli-x", "y": "pauli-y", "z": "pauli-z"}

# Trials per 10 ms run quoted for the measured storage times (ns -> n).
REFERENCE_TRIALS_PER_RUN = {30: 10000, 230: 8333, 430: 8333}

Ensemble = list[tuple[float, JointKet]]


# ---------------------------------------------------------------------------
# timing


@dataclass(frozen=True)
class TimingSequence:
    """One experimental cycle: preparation, then a run of write/store/read trials."""

    prep_ms: float = 23.0
    run_ms: float = 10.0
    write_ns: float = 70.0
    read_ns: float = 100.0
    clean_ns: float = 200.0
    cycle_hz: int = 30

    def __post_init__(self):
        for name in ("prep_ms", "run_ms", "write_ns", "read_ns", "clean_ns"):
            if getattr(self, name) < 0:
                raise ValueError(f"timing.{name} must be non-negative")
        if self.cycle_hz <= 0:
            raise ValueError("timing.cycle_hz must be positive")
        if (self.prep_ms + self.run_ms) * self.cycle_hz > 1000 + 1e-9:
            raise ValueError("prep + run exceed the cycle period")

    def trial_length_ns(self, tau_ns: float) -> float:
        return self.write_ns + tau_ns + self.read_ns + self.clean_ns

    def trials_per_run(self, tau_ns: float) -> int:
        if tau_ns < 0:
            raise ValueError("tau must be non-negative")
        n = math.floor(self.run_ms * 1e6 / self.trial_length_ns(tau_ns) + 1e-9)
        ref = REFERENCE_TRIALS_PER_RUN.get(tau_ns)
        if ref is not None and self == TimingSequence():
            n = min(n, ref)
        if n < 1:
            raise ValueError(f"no trial of length {self.trial_length_ns(tau_ns)} ns fits in a {self.run_ms} ms run")
        return n

    def timestamp_ns(self, k, tau_ns: float):
        """Start of the read window of trial ``k`` on the nominal clock.

        ``k`` may be an integer or an integer array.
        """
        n = self.trials_per_run(tau_ns)
        cycle, j = np.divmod(np.asarray(k, dtype=np.int64), n)
        t = (cycle * 10**9 // self.cycle_hz + round(self.prep_ms * 1e6)
             + np.round(j * self.trial_length_ns(tau_ns) + self.write_ns + tau_ns).astype(np.int64))
        return int(t) if t.ndim == 0 else t


def trials_per_second(timing: TimingSequence, tau_ns: float) -> int:
    """Trials per second, N = (trials per run) x (runs per second)."""
    return timing.trials_per_run(tau_ns) * timing.cycle_hz


def pair_rate(eta_s: float, eta_as: float, chi: float, retrieval: float, n_per_s: float) -> float:
    """Detected Stokes/anti-Stokes pair rate r = eta_S eta_AS chi R N."""
    return eta_s * eta_as * chi * retrieval * n_per_s


def swap_success_probability(eta3: float, eta4: float, r3: float, r4: float) -> float:
    """Probability that a heralded swap yields a 3-4 coincidence, 0.5 eta3 eta4 R3 R4."""
    return 0.5 * eta3 * eta4 * r3 * r4


def fit_visibility(s_target: float) -> float:
    """White-noise visibility p giving CHSH value 2 sqrt(2) p (a fit, not a measurement)."""
    p = s_target / analysis.TSIRELSON
    if not 0 <= p <= 1:
        raise ValueError(f"S = {s_target} is not reachable with a visibility in [0, 1]")
    return p


# ---------------------------------------------------------------------------
# configuration


def default_settings(protocol: str) -> tuple[AnalyzerSetting, ...]:
    if protocol == "pair":
        return tuple(AnalyzerSetting(m, "linear", t) for m, t in (("S", 0), ("S", 45), ("AS", 22.5), ("AS", 67.5)))
    if protocol == "swap":
        return tuple(AnalyzerSetting(m, "linear", t) for m, t in (("3", 0), ("3", 45), ("4", 22.5), ("4", 67.5)))
    return ()


SETTING_PARTIES = {"pair": ("S", "AS"), "swap": ("3", "4")}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs.  Times in ns, angles in degrees."""

    protocol: str = "pair"
    source: SourceParams = field(default_factory=SourceParams)
    scheme: LevelScheme | None = None
    detector_eff: Mapping[str, float] = field(default_factory=dict)
    default_efficiency: float = 0.3
    dark_prob: float = 0.0
    settings: tuple[AnalyzerSetting, ...] | None = None
    taus_ns: tuple[float, ...] = (30.0,)
    visibility_by_tau: Mapping[float, Mapping[str, float]] = field(default_factory=dict)
    timing: TimingSequence = field(default_factory=TimingSequence)
    engine: str = "exact"
    mc_trials: int = 100_000
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")
        if self.engine == "mc" and self.mc_trials < 1:
            raise ValueError("mc_trials must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not self.taus_ns:
            raise ValueError("at least one storage time is required")
        for t in self.taus_ns:
            if t < 0:
                raise ValueError("storage times must be non-negative")
        for d, e in {**self.detector_eff, "default": self.default_efficiency}.items():
            if not 0 <= e <= 1:
                raise ValueError(f"detector efficiency {d} = {e} outside [0, 1]")
        if self.settings is None:
            object.__setattr__(self, "settings", default_settings(self.protocol))
        object.__setattr__(self, "settings", tuple(self.settings))
        self._check_settings()

    def _check_settings(self) -> None:
        if self.protocol == "ghz3":
            if self.settings:
                raise ValueError("ghz3 uses fixed Pauli settings; settings must be empty")
            return
        parties = SETTING_PARTIES[self.protocol]
        for s in self.settings:
            if s.mode not in parties:
                raise ValueError(f"{self.protocol} setting mode must be one of {parties}, got {s.mode!r}")
        for p in parties:
            ps = [s for s in self.settings if s.mode == p]
            if len(ps) != 2 or ps[0] == ps[1]:
                raise ValueError(f"{self.protocol} needs two distinct settings on {p}")

    def efficiency(self, detector_id: str) -> float:
        return float(self.detector_eff.get(detector_id, self.default_efficiency))

    def detector(self, detector_id: str, mode: str, pol: str) -> DetectorSpec:
        return DetectorSpec(detector_id, mode, pol, self.efficiency(detector_id), dark_prob=self.dark_prob)

    def params_at(self, tau_ns: float) -> SourceParams:
        p = self.source.with_tau(tau_ns * 1e-9)
        vis = self.visibility_by_tau.get(tau_ns)
        if vis is not None:
            p = replace(p, visibility={**p.visibility, **vis})
        return p

    def party_settings(self, party: str) -> tuple[AnalyzerSetting, AnalyzerSetting]:
        a, b = [s for s in self.settings if s.mode == party]
        return a, b


def ideal(config: ExperimentConfig) -> ExperimentConfig:
    """No double excitations, unit visibility and zero storage time."""
    src = replace(config.source, double_excitations=False, visibility={a: 1.0 for a in ARMS}, tau=0.0)
    return replace(config, source=src, taus_ns=(0.0,), visibility_by_tau={})


# ---------------------------------------------------------------------------
# pipeline helpers


def _map_ens(ens: Ensemble, fn: Callable[[JointKet], JointKet]) -> Ensemble:
    return [(w, fn(k)) for w, k in ens]


def _tensor_ens(a: Ensemble, b: Ensemble) -> Ensemble:
    return [(wa * wb, tensor(ka, kb)) for wa, ka in a for wb, kb in b]


def _with_maps(ens: Ensemble, maps) -> Ensemble:
    def run(k):
        for m in maps:
            k = apply_map(k, m)
        return k

    return _map_ens(ens, run)


def _store_and_read(ens: Ensemble, params: SourceParams, scheme, arms_out: Mapping[str, str]) -> Ensemble:
    def run(k):
        k = evolve_larmor(k, params, scheme=scheme)
        for arm, mode in arms_out.items():
            k = retrieve(k, arm, params, mode=mode, scheme=scheme)
            k = apply_map(k, quarter_wave(mode, "anti_stokes"))
        return k

    return _map_ens(ens, run)


def _pn_detectors(cfg: ExperimentConfig, mode: str, tag: str | None = None) -> list[DetectorSpec]:
    tag = tag or mode
    return [cfg.detector(f"D_H{tag}", mode, "H"), cfg.detector(f"D_V{tag}", mode, "V")]


def _accept_all(groups: Sequence[Sequence[str]]) -> Callable[[frozenset], bool]:
    return lambda s: all(any(d in s for d in g) for g in groups)


@dataclass
class SettingRun:
    """Statistics of one measurement setting."""

    name: str
    dist: OutcomeDistribution
    counts: Callable[[frozenset], float]
    exact: bool
    masks: np.ndarray | None = None
    tvd: float | None = None


def _measure(cfg: ExperimentConfig, name: str, dist: OutcomeDistribution, stream: int) -> SettingRun:
    if dist.acceptance == 0:
        return SettingRun(name, dist, lambda p: 0.0, True)
    if cfg.engine == "exact":
        return SettingRun(name, dist, dist.prob_superset, True)
    masks = engines.sample_masks(dist, cfg.mc_trials, cfg.seed, stream=stream, workers=cfg.workers)
    tvd = dist.tvd(engines.empirical(masks, dist))
    return SettingRun(name, dist, lambda p: float(engines.count_coincidences(masks, dist, p)), False, masks, tvd)


def _stream(*parts: int) -> int:
    s = 0
    for p in parts:
        s = s * 1000 + p
    return s


@dataclass
class Report:
    """Protocol results plus the data the command line turns into files."""

    protocol: str
    results: dict
    warnings: list[str] = field(default_factory=list)
    etable_columns: tuple[str, ...] = ()
    etable: list[dict] = field(default_factory=list)
    trial_logs: list[tuple[str, float, SettingRun]] = field(default_factory=list)
    s_vs_tau: list[dict] = field(default_factory=list)


def _tau_common(cfg: ExperimentConfig, tau: float) -> dict:
    p = cfg.params_at(tau)
    out = {"tau_ns": tau, "trials_per_second": trials_per_second(cfg.timing, tau),
           "beta_tau": p.beta * p.tau, "visibility": dict(p.visibility)}
    try:
        out["phi_deg"] = math.degrees(phi_of_tau(p.tau, p.beta))
    except ValueError:
        out["phi_deg"] = None
    return out


def _etable_row(tau, arm, est: analysis.CorrelationEstimate, a: AnalyzerSetting, b: AnalyzerSetting) -> dict:
    return {"tau_ns": tau, "arm": arm, "theta_a": a.label(), "theta_b": b.label(), "E": est.value,
            "stderr": est.stderr, "counts": list(est.counts)}


def _chsh_from_runs(cfg, runs, party_a, party_b, det_a, det_b):
    """Correlations over the four setting pairs of a two-party CHSH test.

    Every trial of a conditioned run is already accepted, so the coincidence
    patterns only name the two analysed detectors.
    """
    a_set, b_set = cfg.party_settings(party_a), cfg.party_settings(party_b)
    estimates = []
    for (i, a), (j, b) in itertools.product(enumerate(a_set), enumerate(b_set)):
        run = runs[(i, j)]
        c = [run.counts(frozenset({det_a[x], det_b[y]})) for x, y in ((0, 0), (1, 1), (0, 1), (1, 0))]
        if sum(c) <= 0:
            return None, []
        estimates.append((analysis.correlation_E(c, (a.label(), b.label()), exact=run.exact), a, b))
    return analysis.chsh([e for e, _, _ in estimates]), estimates


# ---------------------------------------------------------------------------
# pair


def pair_state(params: SourceParams, arm: str, scheme: LevelScheme | None = None) -> Ensemble:
    """Stokes/anti-Stokes photon pair of one arm in the H/V basis, after storage and readout."""
    s, a = stokes_mode(arm), anti_stokes_mode(arm)
    ens = _with_maps(arm_ensemble(params, arm), [quarter_wave(s, "stokes")])
    return _store_and_read(ens, params, scheme, {arm: a})


def run_pair(cfg: ExperimentConfig) -> Report:
    if cfg.protocol != "pair":
        raise ValueError("run_pair needs protocol = pair")
    report = Report("pair", {"taus": []}, etable_columns=("tau_ns", "arm", "theta_a", "theta_b", "E", "stderr", "counts"))
    for ti, tau in enumerate(cfg.taus_ns):
        params = cfg.params_at(tau)
        entry = _tau_common(cfg, tau)
        n_per_s = entry["trials_per_second"]
        entry["arms"] = {}
        for ai, arm in enumerate(ARMS):
            s, a = stokes_mode(arm), anti_stokes_mode(arm)
            base = pair_state(params, arm, cfg.scheme)
            dets = _pn_detectors(cfg, s, f"S{arm[1:]}") + _pn_detectors(cfg, a, f"AS{arm[1:]}")
            ids = [d.id for d in dets]
            accept = _accept_all([ids[:2], ids[2:]])
            runs = {}
            for (i, sa), (j, sb) in itertools.product(enumerate(cfg.party_settings("S")),
                                                      enumerate(cfg.party_settings("AS"))):
                ens = _with_maps(base, [analyzer_map(AnalyzerSetting(s, sa.kind, sa.theta)),
                                        analyzer_map(AnalyzerSetting(a, sb.kind, sb.theta))])
                dist = engines.outcome_distribution(ens, dets).conditioned(accept)
                name = f"tau{tau:g}_{arm}_S{sa.label()}_AS{sb.label()}"
                runs[(i, j)] = _measure(cfg, name, dist, _stream(ti, ai, 2 * i + j))
                if cfg.engine == "mc":
                    report.trial_logs.append((name, tau, runs[(i, j)]))
            bell, estimates = _chsh_from_runs(cfg, runs, "S", "AS", ids[:2], ids[2:])
            rate = pair_rate(cfg.efficiency(ids[0]), cfg.efficiency(ids[2]), params.chi,
                             params.retrieval_eff[arm], n_per_s)
            arm_out = {"pair_rate_per_s": rate,
                       "acceptance": [runs[k].dist.acceptance for k in sorted(runs)]}
            if bell is None:
                arm_out["empty"] = True
                report.warnings.append(f"{arm} at tau={tau:g} ns: no accepted coincidences")
            else:
                arm_out.update(bell.to_dict())
                arm_out["E"] = [e.to_dict() for e, _, _ in estimates]
                for e, sa, sb in estimates:
                    report.etable.append(_etable_row(tau, arm, e, sa, sb))
                report.s_vs_tau.append({"tau_ns": tau, "arm": arm, "S": bell.value, "stderr": bell.stderr})
            if cfg.engine == "mc":
                arm_out["max_tvd"] = max(r.tvd for r in runs.values() if r.tvd is not None)
            entry["arms"][arm] = arm_out
        report.results["taus"].append(entry)
    first = report.results["taus"][0]
    report.results["pair_rate_per_s"] = first["arms"]["A1"]["pair_rate_per_s"]
    return report


# ---------------------------------------------------------------------------
# four-party state, GHZ and swap


def four_party_state(params: SourceParams, scheme: LevelScheme | None = None) -> Ensemble:
    """Both arms after the Stokes quarter-wave plates and PBS1 (outputs ``1`` and ``2``)."""
    arms = [_with_maps(arm_ensemble(params, arm), [quarter_wave(stokes_mode(arm), "stokes")]) for arm in ARMS]
    ens = _tensor_ens(*arms)
    return _with_maps(ens, [pbs(stokes_mode("A1"), stokes_mode("A2"), "1", "2")])


def one_photon_per_port(state: JointKet) -> JointKet:
    """Restriction of the four-party state to one photon in each PBS output."""
    from .hilbert import restrict

    return restrict(state, lambda lab: lab.occupation("1") == 1 and lab.occupation("2") == 1)


def ghz_state_after_herald(params: SourceParams, branch: str = "H", scheme=None) -> tuple[float, JointKet]:
    """Photon 1 rotated by 45 degrees and found in ``branch``: probability and state of 2, A1, A2.

    Uses the pure (unit visibility) source.
    """
    params = replace(params, visibility={a: 1.0 for a in ARMS})
    (_, st), = four_party_state(params, scheme)
    st = apply_map(one_photon_per_port(st), half_wave_45("1"))
    prob, post = project(st, occupied("1", branch))
    return prob, drop_modes(post, ["1"])


def _ghz_terms(run: SettingRun, herald: str, det_ids) -> dict:
    """Parity correlators from the 8 threefold coincidence patterns of parties 2, 3, 4."""
    counts = {}
    for signs in itertools.product((1, -1), repeat=3):
        pattern = {herald} | {det_ids[k][0 if s > 0 else 1] for k, s in enumerate(signs)}
        counts[signs] = run.counts(frozenset(pattern))
    return counts


def run_ghz(cfg: ExperimentConfig) -> Report:
    if cfg.protocol != "ghz3":
        raise ValueError("run_ghz needs protocol = ghz3")
    report = Report("ghz3", {"taus": []},
                    etable_columns=("tau_ns", "branch", "setting", "term", "E", "stderr", "counts"))
    det_ids = [("D_H2", "D_V2"), ("D_H3", "D_V3"), ("D_H4", "D_V4")]
    for ti, tau in enumerate(cfg.taus_ns):
        params = cfg.params_at(tau)
        entry = _tau_common(cfg, tau)
        base = _with_maps(four_party_state(params, cfg.scheme), [half_wave_45("1")])
        base = _store_and_read(base, params, cfg.scheme, {"A1": "3", "A2": "4"})
        dets = [d for m in ("1", "2", "3", "4") for d in _pn_detectors(cfg, m)]
        branches = {}
        for branch in ("H", "V"):
            herald = f"D_{branch}1"
            accept = lambda s, h=herald: h in s and all(any(d in s for d in g) for g in det_ids)
            terms, term_est, runs = {}, {}, {}
            for si, setting in enumerate(GHZ_SETTINGS):
                maps = [analyzer_map(AnalyzerSetting(m, PAULI_KIND[c])) for m, c in zip("234", setting)]
                dist = engines.outcome_distribution(_with_maps(base, maps), dets).conditioned(accept)
                name = f"tau{tau:g}_{branch}1_{setting}"
                run = _measure(cfg, name, dist, _stream(ti, 10 + (branch == "V"), si))
                runs[setting] = run
                if cfg.engine == "mc" and branch == "H":
                    report.trial_logs.append((name, tau, run))
            if any(r.dist.acceptance == 0 for r in runs.values()):
                branches[branch] = {"empty": True}
                report.warnings.append(f"ghz3 {branch}' branch at tau={tau:g} ns: heralding probability 0")
                continue
            parity = {s: _ghz_terms(runs[s], herald, det_ids) for s in GHZ_SETTINGS}
            wanted = {"xxx": ("xxx", (0, 1, 2)), "yyx": ("yyx", (0, 1, 2)), "yxy": ("yxy", (0, 1, 2)),
                      "xyy": ("xyy", (0, 1, 2)), "zz23": ("zzz", (0, 1)), "zz34": ("zzz", (1, 2)),
                      "zz24": ("zzz", (0, 2))}
            for term, (setting, parties) in wanted.items():
                counts = parity[setting]
                if sum(counts.values()) <= 0:
                    term_est = None
                    break
                est = analysis.parity_correlation(counts, parties, settings=(setting, term),
                                                  exact=runs[setting].exact)
                term_est[term] = est
                report.etable.append({"tau_ns": tau, "branch": branch, "setting": setting, "term": term,
                                      "E": est.value, "stderr": est.stderr, "counts": [est.counts[0], est.counts[2]]})
            if term_est is None:
                branches[branch] = {"empty": True}
                report.warnings.append(f"ghz3 {branch}' branch at tau={tau:g} ns: no threefold coincidences")
                continue
            w = analysis.ghz_witness(term_est)
            me = analysis.mermin(term_est)
            out = {"herald": herald, "acceptance": {s: runs[s].dist.acceptance for s in GHZ_SETTINGS},
                   "witness": w.to_dict(), "mermin": me.to_dict(),
                   "terms": {k: e.to_dict() for k, e in term_est.items()}}
            if cfg.engine == "mc":
                out["max_tvd"] = max(r.tvd for r in runs.values())
            branches[branch] = out
        entry["branches"] = branches
        entry["empty"] = branches["H"].get("empty", False)
        if not entry["empty"]:
            entry["witness"] = branches["H"]["witness"]
            entry["mermin"] = branches["H"]["mermin"]
            report.s_vs_tau.append({"tau_ns": tau, "arm": "A1A2", "S": entry["mermin"]["S_Me"],
                                    "stderr": entry["mermin"]["stderr"]})
        report.results["taus"].append(entry)
    return report


SWAP_HERALDS = (("D_H1", "D_H2"), ("D_V1", "D_V2"))


@dataclass(frozen=True)
class SwapDecomposition:
    """Heralded spin-wave state split into its two-arm and one-arm parts."""

    herald_probability: float
    phi_plus_weight: float
    error_weight: float
    phi_plus_fidelity: float
    state: JointKet

    @property
    def ratio(self) -> float:
        return self.phi_plus_weight / self.error_weight if self.error_weight else math.inf

    @property
    def phi_plus_fraction(self) -> float:
        return self.phi_plus_weight / (self.phi_plus_weight + self.error_weight)

    def to_dict(self) -> dict:
        return {"herald_probability": self.herald_probability, "phi_plus_weight": self.phi_plus_weight,
                "error_weight": self.error_weight, "phi_plus_fraction": self.phi_plus_fraction,
                "phi_plus_fidelity": self.phi_plus_fidelity}


def swap_heralded_state(params: SourceParams, branch: str = "H", scheme=None) -> SwapDecomposition:
    """Project both rotated PBS outputs on ``branch`` and decompose the spin-wave state.

    Uses the pure (unit visibility) source; the norm of the pre-retrieval
    state is the only loss at this stage.
    """
    params = replace(params, visibility={a: 1.0 for a in ARMS})
    (_, st), = four_party_state(params, scheme)
    st = _with_maps([(1.0, st)], [half_wave_45("1"), half_wave_45("2")])[0][1]
    prob, post = project(st, lambda lab: lab.occupation("1", branch) == 1 and lab.occupation("2", branch) == 1
                         and lab.total_photons == 2)
    post = drop_modes(post, ["1", "2"])
    good = at_level("A1", "plus", "minus")
    both = lambda lab: good(lab) and at_level("A2", "plus", "minus")(lab)
    w_good = sum(abs(a) ** 2 for k, a in post.amplitudes.items() if both(k))
    w_err = sum(abs(a) ** 2 for k, a in post.amplitudes.items()
                if {k.level("A1"), k.level("A2")} == {"double", "vac"})
    target = {BasisLabel.make(arms={"A1": lv, "A2": lv}): 1 / math.sqrt(2) for lv in ("plus", "minus")}
    fid = 0.0
    if w_good > 0:
        amps = {k: a for k, a in post.amplitudes.items() if both(k)}
        norm = math.sqrt(w_good)
        fid = float(abs(sum(np.conj(t) * amps.get(k, 0) for k, t in target.items()) / norm) ** 2)
    return SwapDecomposition(prob, w_good, w_err, fid, post)


def run_swap(cfg: ExperimentConfig) -> Report:
    if cfg.protocol != "swap":
        raise ValueError("run_swap needs protocol = swap")
    report = Report("swap", {"taus": []},
                    etable_columns=("tau_ns", "arm", "theta_a", "theta_b", "E", "stderr", "counts"))
    closed = swap_success_probability(cfg.efficiency("D_H3"), cfg.efficiency("D_H4"),
                                      cfg.source.retrieval_eff["A1"], cfg.source.retrieval_eff["A2"])
    report.results["success_probability"] = closed
    for ti, tau in enumerate(cfg.taus_ns):
        params = cfg.params_at(tau)
        entry = _tau_common(cfg, tau)
        decomp = {b: swap_heralded_state(params, b, cfg.scheme) for b in ("H", "V")}
        entry["decomposition"] = {b: d.to_dict() for b, d in decomp.items()}
        total = sum(d.phi_plus_weight + d.error_weight for d in decomp.values())
        entry["double_excitation_fraction"] = sum(d.error_weight for d in decomp.values()) / total if total else None
        written = _with_maps(four_party_state(params, cfg.scheme), [half_wave_45("1"), half_wave_45("2")])
        base = _store_and_read(written, params, cfg.scheme, {"A1": "3", "A2": "4"})
        dets = [d for m in ("1", "2", "3", "4") for d in _pn_detectors(cfg, m)]

        def heralded(s):
            return any(a in s and b in s for a, b in SWAP_HERALDS)

        # The herald happens before readout, so its probability comes from the written state.
        herald_dist = engines.outcome_distribution(written, dets[:4])
        herald_p = sum(p for s, p in herald_dist.probs.items() if heralded(s))
        entry["herald_probability"] = herald_p

        accept = lambda s: heralded(s) and any(d in s for d in ("D_H3", "D_V3")) and any(
            d in s for d in ("D_H4", "D_V4"))
        runs, p_success = {}, []
        for (i, s3), (j, s4) in itertools.product(enumerate(cfg.party_settings("3")),
                                                  enumerate(cfg.party_settings("4"))):
            ens = _with_maps(base, [analyzer_map(s3), analyzer_map(s4)])
            dist = engines.outcome_distribution(ens, dets).conditioned(accept)
            p_success.append(dist.acceptance / herald_p if herald_p else 0.0)
            name = f"tau{tau:g}_3{s3.label()}_4{s4.label()}"
            runs[(i, j)] = _measure(cfg, name, dist, _stream(ti, 20, 2 * i + j))
            if cfg.engine == "mc":
                report.trial_logs.append((name, tau, runs[(i, j)]))
        entry["success_probability_pipeline"] = float(np.mean(p_success))
        entry["acceptance"] = [runs[k].dist.acceptance for k in sorted(runs)]

        bell, estimates = _chsh_from_runs(cfg, runs, "3", "4", ("D_H3", "D_V3"), ("D_H4", "D_V4"))
        if bell is None:
            entry["empty"] = True
            report.warnings.append(f"swap at tau={tau:g} ns: no accepted fourfold coincidences")
        else:
            entry.update(bell.to_dict())
            entry["E"] = [e.to_dict() for e, _, _ in estimates]
            for e, a, b in estimates:
                report.etable.append(_etable_row(tau, "A1A2", e, a, b))
            report.s_vs_tau.append({"tau_ns": tau, "arm": "A1A2", "S": bell.value, "stderr": bell.stderr})
        if cfg.engine == "mc":
            entry["max_tvd"] = max(r.tvd for r in runs.values())
        report.results["taus"].append(entry)
    return report


RUNNERS = {"pair": run_pair, "ghz3": run_ghz, "swap": run_swap}


def run(cfg: ExperimentConfig) -> Report:
    return RUNNERS[cfg.protocol](cfg)
