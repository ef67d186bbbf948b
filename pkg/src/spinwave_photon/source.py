"""Write/read physics of one atomic ensemble emitting into two Stokes directions.

Each arm ``A<i>`` pairs a Stokes mode ``S<i>`` with a spin-wave memory whose
logical levels are ``vac``, ``plus``, ``minus`` and ``double`` (one plus and
one minus excitation).  A logical level can be *resolved* into its Zeeman
coherences, written ``plus[m_a,m_b]`` or ``double[m_a,m_b;m_a',m_b']``, so that
Larmor precession acts on each coherence separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, NamedTuple

import numpy as np
from scipy import constants

from .hilbert import BasisLabel, JointKet, level_kind, phase_where, transform

ARMS = ("A1", "A2")

# Retained Zeeman components (m_a, m_b) of each spin-wave qubit level and
# their normalised weights.  These are authoritative; the Clebsch-Gordan
# route in ``spin_wave_weights`` reproduces them for the default scheme.
PLUS_COMPONENTS = ((-1, 0), (0, 1))
MINUS_COMPONENTS = ((0, -1), (1, 0))
PLUS_WEIGHTS = (math.sqrt(3 / 7), math.sqrt(4 / 7))
MINUS_WEIGHTS = (math.sqrt(4 / 7), math.sqrt(3 / 7))

PHASE_RATIO = (math.sqrt(4 / 7) - math.sqrt(3 / 7)) / (math.sqrt(4 / 7) + math.sqrt(3 / 7))
PROJECTED_PHASE_RATIO = 1 / 7

LARMOR_MODELS = ("components", "effective", "off")


def stokes_mode(arm: str) -> str:
    return "S" + arm[1:]


def anti_stokes_mode(arm: str) -> str:
    return "AS" + arm[1:]


# ---------------------------------------------------------------------------
# angular momentum


def clebsch_gordan(j1, m1, j2, m2, j, m) -> float:
    """<j1 m1; j2 m2 | j m> by the Racah formula in exact rational arithmetic."""
    j1, m1, j2, m2, j, m = (Fraction(x) for x in (j1, m1, j2, m2, j, m))
    if m1 + m2 != m:
        return 0.0
    if not abs(j1 - j2) <= j <= j1 + j2:
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(m) > j:
        return 0.0
    for a in (j1 + m1, j2 + m2, j + m, j1 + j2 + j):
        if a.denominator != 1:
            return 0.0

    def f(x: Fraction) -> int:
        return math.factorial(int(x))

    pre = Fraction(
        int(2 * j + 1) * f(j + j1 - j2) * f(j - j1 + j2) * f(j1 + j2 - j),
        f(j1 + j2 + j + 1),
    ) * (f(j + m) * f(j - m) * f(j1 - m1) * f(j1 + m1) * f(j2 - m2) * f(j2 + m2))
    total = Fraction(0)
    k = 0
    while True:
        args = (k, j1 + j2 - j - k, j1 - m1 - k, j2 + m2 - k, j - j2 + m1 + k, j - j1 - m2 + k)
        if any(a < 0 for a in args[1:4]):
            break
        if min(args[4], args[5]) >= 0:
            den = 1
            for a in args:
                den *= f(Fraction(a))
            total += Fraction((-1) ** k, den)
        k += 1
    if total == 0:
        return 0.0
    return math.copysign(math.sqrt(pre * total * total), total)


@dataclass(frozen=True)
class LevelScheme:
    """Hyperfine assignment of the write transition |a> -> |e2> -> |b>."""

    F_a: int = 1
    F_b: int = 2
    F_e2: int = 2

    def __post_init__(self):
        if self.F_a != 1:
            raise ValueError("F_a is fixed to 1")
        if self.F_b < 0 or self.F_e2 < 0:
            raise ValueError("hyperfine quantum numbers must be non-negative")

    def X(self, m: int, alpha: int) -> float:
        """Product of write-transition Clebsch-Gordan coefficients X_alpha(m)."""
        return clebsch_gordan(self.F_a, m, 1, 0, self.F_e2, m) * clebsch_gordan(
            self.F_e2, m, 1, alpha, self.F_b, m + alpha
        )

    def cg_products(self) -> dict[tuple[int, int], float]:
        return {(m, a): self.X(m, a) for a in (1, -1) for m in range(-self.F_a, self.F_a + 1)}

    def retained(self, alpha: int) -> list[tuple[int, int]]:
        """(m_a, m_b) coherences kept for helicity ``alpha``.

        Coherences with |m_b| > F_a cannot be read out and are dropped.
        """
        return [(m, m + alpha) for m in range(-self.F_a, self.F_a + 1) if abs(m + alpha) <= self.F_a]


class SpinWaveWeights(NamedTuple):
    w_plus: tuple[float, ...]
    w_minus: tuple[float, ...]
    cos_eta: float
    sin_eta: float


def spin_wave_weights(scheme: LevelScheme = LevelScheme()) -> SpinWaveWeights:
    """Normalised Zeeman weights of the two retrievable spin-wave levels."""
    raw = {}
    for alpha in (1, -1):
        xs = np.array([scheme.X(m, alpha) for m, _ in scheme.retained(alpha)])
        norm = math.sqrt(float(xs @ xs))
        if norm == 0:
            raise ValueError(f"scheme {scheme}: no retrievable weight for helicity {alpha:+d}")
        if xs.sum() < 0:  # global sign of the level is a convention
            xs = -xs
        raw[alpha] = (xs / norm, norm)
    cos_eta = raw[-1][1] / math.hypot(raw[-1][1], raw[1][1])
    sin_eta = raw[1][1] / math.hypot(raw[-1][1], raw[1][1])
    return SpinWaveWeights(tuple(raw[1][0]), tuple(raw[-1][0]), cos_eta, sin_eta)


def scan_level_assignments(max_F: int = 3) -> dict[tuple[int, int], SpinWaveWeights]:
    """Spin-wave weights for every (F_e2, F_b) with both levels retrievable."""
    out = {}
    for fe in range(max_F + 1):
        for fb in range(max_F + 1):
            try:
                out[(fe, fb)] = spin_wave_weights(LevelScheme(1, fb, fe))
            except ValueError:
                continue
    return out


@dataclass(frozen=True)
class SpinWaveComponent:
    m_a: int
    m_b: int
    weight: float
    larmor_sign: int


@dataclass(frozen=True)
class SpinWaveQubit:
    arm: str
    plus_components: tuple[SpinWaveComponent, ...]
    minus_components: tuple[SpinWaveComponent, ...]

    def components(self, kind: str) -> tuple[SpinWaveComponent, ...]:
        return self.plus_components if kind == "plus" else self.minus_components


def _larmor_sign(m_a: int, m_b: int) -> int:
    # g_F = -1/2 on F=1 and +1/2 on F=2: the coherence precesses as (m_a + m_b) * beta.
    return int(np.sign(m_a + m_b))


def spin_wave_qubit(arm: str, scheme: LevelScheme | None = None) -> SpinWaveQubit:
    if scheme is None:
        wp, wm = PLUS_WEIGHTS, MINUS_WEIGHTS
        pc, mc = PLUS_COMPONENTS, MINUS_COMPONENTS
    else:
        w = spin_wave_weights(scheme)
        wp, wm = w.w_plus, w.w_minus
        pc, mc = tuple(scheme.retained(1)), tuple(scheme.retained(-1))
    return SpinWaveQubit(
        arm,
        tuple(SpinWaveComponent(a, b, w, _larmor_sign(a, b)) for (a, b), w in zip(pc, wp)),
        tuple(SpinWaveComponent(a, b, w, _larmor_sign(a, b)) for (a, b), w in zip(mc, wm)),
    )


# ---------------------------------------------------------------------------
# parameters


def larmor_rate(B_gauss: float, g_factor: float = 0.5) -> float:
    """Precession rate g * mu_B * B / hbar in rad/s."""
    mu_b = constants.physical_constants["Bohr magneton"][0]
    return g_factor * mu_b * (B_gauss * 1e-4) / constants.hbar


def _per_arm(value, name: str) -> dict[str, float]:
    if isinstance(value, Mapping):
        out = {a: float(v) for a, v in value.items()}
    else:
        out = {a: float(value) for a in ARMS}
    for a, v in out.items():
        if not 0 <= v <= 1:
            raise ValueError(f"{name}[{a}] = {v} outside [0, 1]")
    return out


@dataclass(frozen=True)
class SourceParams:
    """Source configuration in SI units (tau in s, B in gauss, beta in rad/s)."""

    chi: float = 0.014
    eta: float = math.pi / 4
    B: float = 0.2
    g_factor: float = 0.5
    beta: float | None = None
    tau: float = 30e-9
    retrieval_eff: Mapping[str, float] = field(default_factory=lambda: {a: 0.2 for a in ARMS})
    visibility: Mapping[str, float] = field(default_factory=lambda: {a: 1.0 for a in ARMS})
    double_excitations: bool = True
    larmor_model: str = "components"

    def __post_init__(self):
        if not 0 <= self.chi <= 0.2:
            raise ValueError(f"chi = {self.chi} outside [0, 0.2]")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        if self.larmor_model not in LARMOR_MODELS:
            raise ValueError(f"larmor_model must be one of {LARMOR_MODELS}")
        if self.beta is None:
            object.__setattr__(self, "beta", larmor_rate(self.B, self.g_factor))
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        object.__setattr__(self, "retrieval_eff", _per_arm(self.retrieval_eff, "retrieval_eff"))
        object.__setattr__(self, "visibility", _per_arm(self.visibility, "visibility"))

    def with_tau(self, tau: float) -> "SourceParams":
        return replace(self, tau=tau)


# ---------------------------------------------------------------------------
# state generation


def _first_order_terms(params: SourceParams, arm: str):
    s = stokes_mode(arm)
    return [
        (BasisLabel.make({(s, "L"): 1}, {arm: "plus"}), params.chi * math.cos(params.eta)),
        (BasisLabel.make({(s, "R"): 1}, {arm: "minus"}), params.chi * math.sin(params.eta)),
    ]


def _arm_state(params: SourceParams, arm: str, first_order) -> JointKet:
    s = stokes_mode(arm)
    amps = {BasisLabel.make(arms={arm: "vac"}): 1.0}
    for label, a in first_order:
        amps[label] = amps.get(label, 0) + a
    if params.double_excitations:
        amps[BasisLabel.make({(s, "L"): 1, (s, "R"): 1}, {arm: "double"})] = params.chi**2 / 2
    return JointKet(amps, {s: "RL"}, (arm,)).normalized()


def build_atom_photon_state(params: SourceParams, arm: str) -> JointKet:
    """Stokes-photon / spin-wave state of one arm after the write pulse.

    Vacuum, the two first-order branches (L with ``plus``, R with ``minus``)
    weighted by cos(eta) and sin(eta), and the chi^2/2 double excitation when
    enabled, normalised together.
    """
    return _arm_state(params, arm, _first_order_terms(params, arm))


def arm_ensemble(params: SourceParams, arm: str) -> list[tuple[float, JointKet]]:
    """Arm state with white noise of weight ``1 - visibility`` on the
    single-excitation sector, as a convex mixture of kets."""
    p = params.visibility[arm]
    out = []
    if p > 0:
        out.append((p, build_atom_photon_state(params, arm)))
    if p < 1:
        s = stokes_mode(arm)
        for pol in ("L", "R"):
            for level in ("plus", "minus"):
                term = [(BasisLabel.make({(s, pol): 1}, {arm: level}), params.chi)]
                out.append(((1 - p) / 4, _arm_state(params, arm, term)))
    return out


# ---------------------------------------------------------------------------
# storage


def _resolved(kind: str, comps) -> str:
    return f"{kind}[" + ";".join(f"{a},{b}" for a, b in comps) + "]"


def parse_level(level: str) -> tuple[str, tuple[tuple[int, int], ...]]:
    kind = level_kind(level)
    if "[" not in level:
        return kind, ()
    body = level[level.index("[") + 1 : -1]
    comps = tuple(tuple(int(x) for x in part.split(",")) for part in body.split(";"))
    return kind, comps


def _phase(comps, beta_tau: float) -> complex:
    return complex(np.exp(1j * sum(a + b for a, b in comps) * beta_tau))


def _resolve_level(level: str, qubit: SpinWaveQubit, beta_tau: float):
    kind, comps = parse_level(level)
    if kind == "vac":
        return [(level, 1.0)]
    if comps:
        return [(level, _phase(comps, beta_tau))]
    plus = [((c.m_a, c.m_b), c.weight) for c in qubit.plus_components]
    minus = [((c.m_a, c.m_b), c.weight) for c in qubit.minus_components]
    if kind == "plus":
        parts = [((k,), w) for k, w in plus]
    elif kind == "minus":
        parts = [((k,), w) for k, w in minus]
    else:
        parts = [((kp, km), wp * wm) for kp, wp in plus for km, wm in minus]
    return [(_resolved(kind, comps), w * _phase(comps, beta_tau)) for comps, w in parts]


def evolve_larmor(state: JointKet, params: SourceParams, *, model: str | None = None,
                  scheme: LevelScheme | None = None) -> JointKet:
    """Larmor precession of every stored spin wave for ``params.tau``.

    ``components`` resolves each level into its Zeeman coherences and gives
    each the phase exp(i (m_a + m_b) beta tau); ``effective`` multiplies every
    stored minus excitation by exp(-i phi(tau)); ``off`` does nothing.
    """
    model = model or params.larmor_model
    if model == "off":
        return state
    if model == "effective":
        phi = phi_of_tau(params.tau, params.beta)

        def phase_of(label):
            n_minus = sum(level_kind(lev) in ("minus", "double") for _, lev in label.arms)
            return np.exp(-1j * phi * n_minus)

        return phase_where(state, phase_of)
    if model != "components":
        raise ValueError(f"unknown Larmor model {model!r}")
    bt = params.beta * params.tau
    qubits = {a: spin_wave_qubit(a, scheme) for a in state.arms}

    def fn(label: BasisLabel):
        options = [[(a, lev, c) for lev, c in _resolve_level(lev0, qubits[a], bt)] for a, lev0 in label.arms]
        out = [((), 1.0)]
        for opts in options:
            out = [(arms + ((a, lev),), c * c2) for arms, c in out for a, lev, c2 in opts]
        return [(BasisLabel(label.photons, arms), c) for arms, c in out]

    return transform(state, fn)


def phi_of_tau(tau: float, beta: float, form: str = "equal_amplitude") -> float:
    """Effective relative phase of the minus branch after storage time ``tau``.

    ``equal_amplitude`` is 2 atan(K tan(beta tau)) with K = (sqrt(4/7) - sqrt(3/7)) /
    (sqrt(4/7) + sqrt(3/7)), the phase obtained when every Zeeman coherence
    is read out with the same amplitude.  ``projected`` uses K = 1/7, the
    phase of the overlap <psi(0)|psi(tau)>.
    """
    x = beta * tau
    if not 0 <= x < math.pi / 2:
        raise ValueError(f"beta*tau = {x} outside [0, pi/2)")
    ratios = {"equal_amplitude": PHASE_RATIO, "projected": PROJECTED_PHASE_RATIO}
    if form not in ratios:
        raise ValueError(f"form must be one of {tuple(ratios)}")
    k = ratios[form]
    return 2 * math.atan(k * math.sin(x) / math.cos(x))


def retrieve(state: JointKet, arm: str, params: SourceParams, *, mode: str | None = None,
             scheme: LevelScheme | None = None) -> JointKet:
    """Read the spin wave of ``arm`` out into anti-Stokes photons.

    ``plus`` -> one R (sigma+) photon, ``minus`` -> one L photon, ``double`` ->
    both, each with amplitude sqrt(retrieval_eff).  Resolved Zeeman
    coherences are read out with equal amplitudes, normalised so that an
    unprecessed level is retrieved with exactly sqrt(retrieval_eff).  Failed
    retrievals are credited to ``norm_deficit`` and the arm is reset to vac.
    """
    if arm not in state.arms:
        raise ValueError(f"state has no arm {arm}")
    mode = mode or anti_stokes_mode(arm)
    if state.modes.get(mode, "RL") != "RL":
        raise ValueError(f"retrieval mode {mode} must be in the circular basis")
    eff = params.retrieval_eff[arm]
    q = spin_wave_qubit(arm, scheme)
    c_plus = 1 / sum(c.weight for c in q.plus_components)
    c_minus = 1 / sum(c.weight for c in q.minus_components)
    root = math.sqrt(eff)

    def fn(label: BasisLabel):
        levels = label.arm_map()
        kind, comps = parse_level(levels[arm])
        if kind == "vac":
            return [(label, 1.0)]
        if kind == "plus":
            photons, amp = {(mode, "R"): 1}, root * (c_plus if comps else 1)
        elif kind == "minus":
            photons, amp = {(mode, "L"): 1}, root * (c_minus if comps else 1)
        else:
            photons, amp = {(mode, "R"): 1, (mode, "L"): 1}, eff * (c_plus * c_minus if comps else 1)
        levels[arm] = "vac"
        merged = [(k, n) for k, n in label.photon_map().items()] + list(photons.items())
        return [(BasisLabel.make(merged, levels), amp)]

    return transform(state, fn, modes={**state.modes, mode: "RL"})
