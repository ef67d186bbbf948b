"""Small-basis state algebra for photonic modes and spin-wave arms.

States are sparse maps from :class:`BasisLabel` to complex amplitudes.  A label
records the photon occupation of every ``(mode, polarization)`` pair and the
logical level of every spin-wave arm.  Linear-optical elements act on the
creation operators of the modes they touch (second quantisation), so
multi-photon terms such as double excitations interfere correctly.

Loss is never represented by explicit environment modes.  The weight of the
branches in which a photon or excitation disappeared is accumulated in
``JointKet.norm_deficit`` instead, which is exact for every statistic that
requires the lost quanta to be detected.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

PRUNE_EPS = 1e-15
NORM_TOL = 1e-12
MAX_OCCUPATION = 2

POLARIZATION_BASES: dict[str, tuple[str, str]] = {"HV": ("H", "V"), "RL": ("R", "L")}
ARM_LEVELS = ("vac", "plus", "minus", "double")

_RESERVED = set(":,|^\t ")


def basis_of(pol: str) -> str:
    for name, pols in POLARIZATION_BASES.items():
        if pol in pols:
            return name
    raise ValueError(f"unknown polarization tag {pol!r}")


def level_kind(level: str) -> str:
    """Logical kind of an arm level tag (``plus[-1,0]`` -> ``plus``)."""
    kind = level.split("[", 1)[0]
    if kind not in ARM_LEVELS:
        raise ValueError(f"unknown spin-wave level {level!r}")
    return kind


def _check_name(name: str) -> None:
    if not name or any(c in _RESERVED for c in name):
        raise ValueError(f"invalid mode/arm name {name!r}")


@dataclass(frozen=True, order=True)
class BasisLabel:
    """One composite basis vector.

    ``photons`` holds ``(mode, pol, n)`` triples with ``n >= 1`` and ``arms``
    holds ``(arm, level)`` pairs, both sorted, so equal labels compare equal.
    """

    photons: tuple[tuple[str, str, int], ...] = ()
    arms: tuple[tuple[str, str], ...] = ()

    @classmethod
    def make(cls, photons=None, arms=None) -> "BasisLabel":
        occ: dict[tuple[str, str], int] = defaultdict(int)
        items = photons.items() if isinstance(photons, Mapping) else (photons or ())
        for key, n in items:
            mode, pol = key
            occ[(mode, pol)] += int(n)
        bases: dict[str, str] = {}
        triples = []
        for (mode, pol), n in sorted(occ.items()):
            if n == 0:
                continue
            _check_name(mode)
            if not 0 < n <= MAX_OCCUPATION:
                raise ValueError(f"occupation {n} of {mode}:{pol} outside 0..{MAX_OCCUPATION}")
            b = basis_of(pol)
            if bases.setdefault(mode, b) != b:
                raise ValueError(f"mode {mode} mixes polarization bases within one label")
            triples.append((mode, pol, n))
        arm_items = arms.items() if isinstance(arms, Mapping) else (arms or ())
        arm_pairs = []
        for arm, level in sorted(arm_items):
            _check_name(arm)
            level_kind(level)
            arm_pairs.append((arm, level))
        return cls(tuple(triples), tuple(arm_pairs))

    def occupation(self, mode: str, pol: str | None = None) -> int:
        return sum(n for m, p, n in self.photons if m == mode and (pol is None or p == pol))

    def level(self, arm: str) -> str:
        for a, lev in self.arms:
            if a == arm:
                return lev
        raise KeyError(arm)

    def photon_map(self) -> dict[tuple[str, str], int]:
        return {(m, p): n for m, p, n in self.photons}

    def arm_map(self) -> dict[str, str]:
        return dict(self.arms)

    @property
    def total_photons(self) -> int:
        return sum(n for _, _, n in self.photons)

    def __str__(self) -> str:
        ph = ",".join(f"{m}:{p}" + (f"^{n}" if n > 1 else "") for m, p, n in self.photons)
        ar = ",".join(f"{a}:{lev}" for a, lev in self.arms)
        return f"{ph or '-'}|{ar or '-'}"

    @classmethod
    def parse(cls, text: str) -> "BasisLabel":
        ph_text, ar_text = text.split("|", 1)
        photons = []
        if ph_text != "-":
            for tok in ph_text.split(","):
                mode, rest = tok.split(":", 1)
                pol, _, n = rest.partition("^")
                photons.append(((mode, pol), int(n or 1)))
        arms = []
        if ar_text != "-":
            for tok in _split_arms(ar_text):
                arm, level = tok.split(":", 1)
                arms.append((arm, level))
        return cls.make(photons, arms)


def _split_arms(text: str) -> list[str]:
    # Resolved levels contain commas inside brackets, e.g. ``A1:plus[-1,0]``.
    out, depth, cur = [], 0, []
    for c in text:
        if c == "[":
            depth += 1
        elif c == "]":
            depth -= 1
        if c == "," and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(c)
    out.append("".join(cur))
    return out


@dataclass(frozen=True, eq=False)
class JointKet:
    """Sparse, possibly sub-normalised pure state.

    ``modes`` maps every photonic mode the state lives on to its declared
    polarization basis (``"HV"`` or ``"RL"``); ``arms`` lists the spin-wave
    arms.  Every label carries a level for each arm, ``vac`` included.
    """

    amplitudes: Mapping[BasisLabel, complex]
    modes: Mapping[str, str] = field(default_factory=dict)
    arms: tuple[str, ...] = ()
    norm_deficit: float = 0.0

    def __post_init__(self):
        modes = dict(sorted(dict(self.modes).items()))
        for m, b in modes.items():
            _check_name(m)
            if b not in POLARIZATION_BASES:
                raise ValueError(f"mode {m}: unknown basis {b!r}")
        arms = tuple(sorted(self.arms))
        if len(set(arms)) != len(arms):
            raise ValueError("duplicate arm ids")
        amps = {}
        for label, a in self.amplitudes.items():
            a = complex(a)
            if abs(a) < PRUNE_EPS:
                continue
            for m, p, _ in label.photons:
                if m not in modes or basis_of(p) != modes[m]:
                    raise ValueError(f"label {label} uses undeclared mode/basis {m}:{p}")
            if tuple(a_ for a_, _ in label.arms) != arms:
                raise ValueError(f"label {label} does not cover arms {arms}")
            amps[label] = a
        amps = dict(sorted(amps.items()))
        object.__setattr__(self, "amplitudes", MappingProxyType(amps))
        object.__setattr__(self, "modes", MappingProxyType(modes))
        object.__setattr__(self, "arms", arms)
        object.__setattr__(self, "norm_deficit", float(self.norm_deficit))

    @classmethod
    def vacuum(cls, modes: Mapping[str, str] | None = None, arms: Iterable[str] = ()) -> "JointKet":
        arms = tuple(arms)
        label = BasisLabel.make(arms={a: "vac" for a in arms})
        return cls({label: 1.0}, modes or {}, arms)

    @property
    def norm2(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    @property
    def is_empty(self) -> bool:
        return not self.amplitudes

    def labels(self) -> list[BasisLabel]:
        return list(self.amplitudes)

    def amplitude(self, label: BasisLabel) -> complex:
        return self.amplitudes.get(label, 0j)

    def with_amplitudes(self, amps, *, modes=None, arms=None, norm_deficit=None) -> "JointKet":
        return JointKet(
            amps,
            self.modes if modes is None else modes,
            self.arms if arms is None else arms,
            self.norm_deficit if norm_deficit is None else norm_deficit,
        )

    def normalized(self) -> "JointKet":
        n2 = self.norm2
        if n2 == 0:
            raise ValueError("cannot normalise an empty state")
        s = 1 / math.sqrt(n2)
        return self.with_amplitudes({k: v * s for k, v in self.amplitudes.items()}, norm_deficit=0.0)

    def scaled(self, c: complex) -> "JointKet":
        return self.with_amplitudes({k: v * c for k, v in self.amplitudes.items()})

    def inner(self, other: "JointKet") -> complex:
        """<self|other> over the shared labels."""
        return complex(sum(np.conj(a) * other.amplitude(k) for k, a in self.amplitudes.items()))

    def distance(self, other: "JointKet") -> float:
        keys = set(self.amplitudes) | set(other.amplitudes)
        return max((abs(self.amplitude(k) - other.amplitude(k)) for k in keys), default=0.0)

    def isclose(self, other: "JointKet", atol: float = 1e-12) -> bool:
        return (
            dict(self.modes) == dict(other.modes)
            and self.arms == other.arms
            and self.distance(other) <= atol
        )

    def check(self, tol: float = NORM_TOL) -> None:
        """Raise if the loss bookkeeping is off by more than ``tol``."""
        if not -tol <= self.norm_deficit <= 1 + tol:
            raise ValueError(f"norm_deficit {self.norm_deficit} outside [0, 1]")
        total = self.norm2 + self.norm_deficit
        if abs(total - 1) > tol:
            raise ValueError(f"|amplitudes|^2 + norm_deficit = {total!r}, expected 1")

    def to_text(self) -> str:
        return dumps_ket(self)

    def __repr__(self) -> str:
        terms = " + ".join(f"({a:.4g})|{k}>" for k, a in list(self.amplitudes.items())[:6])
        more = "" if len(self.amplitudes) <= 6 else f" + ... ({len(self.amplitudes)} terms)"
        return f"JointKet({terms}{more}, deficit={self.norm_deficit:.3g})"


def dumps_ket(state: JointKet) -> str:
    """Debug text form: ``label<TAB>re<TAB>im`` per line, canonical order."""
    lines = [f"{k}\t{a.real!r}\t{a.imag!r}" for k, a in state.amplitudes.items()]
    return "\n".join(lines) + ("\n" if lines else "")


def loads_ket(text: str, norm_deficit: float = 0.0) -> JointKet:
    amps: dict[BasisLabel, complex] = {}
    modes: dict[str, str] = {}
    arms: tuple[str, ...] | None = None
    for line in text.splitlines():
        if not line.strip():
            continue
        lab, re, im = line.split("\t")
        label = BasisLabel.parse(lab)
        for m, p, _ in label.photons:
            modes[m] = basis_of(p)
        arms = tuple(a for a, _ in label.arms)
        amps[label] = complex(float(re), float(im))
    return JointKet(amps, modes, arms or (), norm_deficit)


def tensor(a: JointKet, b: JointKet) -> JointKet:
    """Product state of two kets on disjoint modes and arms."""
    shared = (set(a.modes) & set(b.modes)) | (set(a.arms) & set(b.arms))
    if shared:
        raise ValueError(f"tensor: overlapping modes/arms {sorted(shared)}")
    amps = {}
    for la, xa in a.amplitudes.items():
        for lb, xb in b.amplitudes.items():
            amps[BasisLabel(tuple(sorted(la.photons + lb.photons)), tuple(sorted(la.arms + lb.arms)))] = xa * xb
    deficit = 1 - (1 - a.norm_deficit) * (1 - b.norm_deficit)
    return JointKet(amps, {**a.modes, **b.modes}, a.arms + b.arms, deficit)


# ---------------------------------------------------------------------------
# linear maps on single-photon creation operators


@dataclass(frozen=True, eq=False)
class LinearMap:
    """Mode transformation ``a_in^dagger -> sum_out M[out, in] a_out^dagger``.

    Every mode named in ``inputs`` (``outputs``) must be listed with both
    polarizations of one basis, which fixes that mode's basis before (after)
    the map.
    """

    inputs: tuple[tuple[str, str], ...]
    outputs: tuple[tuple[str, str], ...]
    matrix: np.ndarray
    kind: str = "unitary"
    name: str = ""

    def __post_init__(self):
        inputs = tuple((m, p) for m, p in self.inputs)
        outputs = tuple((m, p) for m, p in self.outputs)
        mat = np.array(self.matrix, dtype=complex)
        if mat.shape != (len(outputs), len(inputs)):
            raise ValueError(f"matrix shape {mat.shape} != ({len(outputs)}, {len(inputs)})")
        if len(set(inputs)) != len(inputs) or len(set(outputs)) != len(outputs):
            raise ValueError("duplicate (mode, pol) entries")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "matrix", mat)
        self.in_bases  # validates completeness
        self.out_bases
        if self.kind == "unitary":
            gram = mat.conj().T @ mat
            if not np.allclose(gram, np.eye(len(inputs)), atol=NORM_TOL, rtol=0):
                raise ValueError(f"{self.name or 'map'}: columns not orthonormal")
        elif self.kind == "isometry-with-loss":
            if mat.size and np.linalg.svd(mat, compute_uv=False).max() > 1 + NORM_TOL:
                raise ValueError(f"{self.name or 'map'}: singular value exceeds 1")
        else:
            raise ValueError(f"unknown map kind {self.kind!r}")

    @staticmethod
    def _bases(keys) -> dict[str, str]:
        seen: dict[str, set[str]] = defaultdict(set)
        for m, p in keys:
            seen[m].add(p)
        out = {}
        for m, pols in seen.items():
            b = basis_of(next(iter(pols)))
            if pols != set(POLARIZATION_BASES[b]):
                raise ValueError(f"mode {m}: map must cover a full polarization basis, got {sorted(pols)}")
            out[m] = b
        return out

    @property
    def in_bases(self) -> dict[str, str]:
        return self._bases(self.inputs)

    @property
    def out_bases(self) -> dict[str, str]:
        return self._bases(self.outputs)

    def inverse(self) -> "LinearMap":
        if self.kind != "unitary":
            raise ValueError("only unitary maps are invertible")
        return LinearMap(self.outputs, self.inputs, self.matrix.conj().T, "unitary", f"{self.name}^-1")

    def then(self, other: "LinearMap") -> "LinearMap":
        """Composite map: ``self`` first, then ``other`` (on the same keys)."""
        if set(other.inputs) != set(self.outputs):
            raise ValueError("then: domain mismatch")
        idx = [other.inputs.index(k) for k in self.outputs]
        mat = other.matrix[:, idx] @ self.matrix
        kind = "unitary" if self.kind == other.kind == "unitary" else "isometry-with-loss"
        return LinearMap(self.inputs, other.outputs, mat, kind, f"{other.name}*{self.name}")

    @classmethod
    def identity(cls, mode: str, basis: str = "HV") -> "LinearMap":
        keys = tuple((mode, p) for p in POLARIZATION_BASES[basis])
        return cls(keys, keys, np.eye(2), "unitary", f"id[{mode}]")

    @classmethod
    def loss(cls, mode: str, transmission: float, basis: str = "HV") -> "LinearMap":
        if not 0 <= transmission <= 1:
            raise ValueError("transmission must lie in [0, 1]")
        keys = tuple((mode, p) for p in POLARIZATION_BASES[basis])
        return cls(keys, keys, math.sqrt(transmission) * np.eye(2), "isometry-with-loss", f"loss[{mode}]")


def _expand_photons(domain: tuple[tuple[tuple[str, str], int], ...], m: LinearMap, col: dict):
    """Apply ``m`` to the Fock state of the photons in ``domain``.

    Returns ``{occupation tuple: amplitude}`` for the output photons.
    """
    norm = 1.0
    for _, n in domain:
        norm /= math.sqrt(math.factorial(n))
    polys: dict[tuple[int, ...], complex] = {(): norm}
    for key, n in domain:
        j = col[key]
        column = [(i, m.matrix[i, j]) for i in range(len(m.outputs)) if m.matrix[i, j] != 0]
        for _ in range(n):
            nxt: dict[tuple[int, ...], complex] = defaultdict(complex)
            for mono, c in polys.items():
                for i, coef in column:
                    nxt[tuple(sorted(mono + (i,)))] += c * coef
            polys = nxt
    out: dict[tuple, complex] = defaultdict(complex)
    for mono, c in polys.items():
        counts: dict[int, int] = defaultdict(int)
        for i in mono:
            counts[i] += 1
        amp = c
        for k in counts.values():
            amp *= math.sqrt(math.factorial(k))
        out[tuple((m.outputs[i], k) for i, k in sorted(counts.items()))] += amp
    return out


def apply_map(state: JointKet, m: LinearMap) -> JointKet:
    in_b, out_b = m.in_bases, m.out_bases
    for mode, b in in_b.items():
        if state.modes.get(mode) != b:
            raise ValueError(f"apply_map {m.name}: state has no mode {mode} in basis {b}")
    new_modes = {k: v for k, v in state.modes.items() if k not in in_b}
    for mode, b in out_b.items():
        if mode in new_modes:
            raise ValueError(f"apply_map {m.name}: output mode {mode} already occupied by the state")
        new_modes[mode] = b
    col = {k: j for j, k in enumerate(m.inputs)}
    cache: dict = {}
    amps: dict[BasisLabel, complex] = defaultdict(complex)
    for label, a in state.amplitudes.items():
        domain = tuple(((md, p), n) for md, p, n in label.photons if md in in_b)
        rest = tuple((md, p, n) for md, p, n in label.photons if md not in in_b)
        if domain not in cache:
            cache[domain] = _expand_photons(domain, m, col)
        for occ, c in cache[domain].items():
            photons = [((md, p), n) for md, p, n in rest] + list(occ)
            amps[BasisLabel.make(photons, label.arms)] += a * c
    out = JointKet(amps, new_modes, state.arms, state.norm_deficit)
    if m.kind != "unitary":
        lost = max(0.0, state.norm2 - out.norm2)
        out = out.with_amplitudes(out.amplitudes, norm_deficit=state.norm_deficit + lost)
    return out


def transform(state: JointKet, fn: Callable[[BasisLabel], Iterable[tuple[BasisLabel, complex]]],
              *, modes: Mapping[str, str] | None = None, arms: Sequence[str] | None = None) -> JointKet:
    """Linear map defined label by label.

    Weight that the map removes is credited to ``norm_deficit``; ``fn`` must
    not increase the norm of any state it is applied to.
    """
    amps: dict[BasisLabel, complex] = defaultdict(complex)
    for label, a in state.amplitudes.items():
        for new, c in fn(label):
            amps[new] += a * c
    out = JointKet(amps, state.modes if modes is None else modes, state.arms if arms is None else tuple(arms))
    lost = state.norm2 - out.norm2
    if lost < -NORM_TOL:
        raise ValueError(f"transform increased the norm by {-lost:.3g}")
    return out.with_amplitudes(out.amplitudes, norm_deficit=state.norm_deficit + max(lost, 0.0))


# ---------------------------------------------------------------------------
# projection

Predicate = Callable[[BasisLabel], bool]


def _as_predicate(projector) -> Predicate:
    if callable(projector):
        return projector
    preds = list(projector)
    return lambda lab: any(p(lab) for p in preds)


def restrict(state: JointKet, projector) -> JointKet:
    """Keep the labels satisfying ``projector`` without renormalising."""
    pred = _as_predicate(projector)
    kept = {k: a for k, a in state.amplitudes.items() if pred(k)}
    out = state.with_amplitudes(kept)
    return out.with_amplitudes(kept, norm_deficit=state.norm_deficit + state.norm2 - out.norm2)


def project(state: JointKet, projector) -> tuple[float, JointKet]:
    """Projective measurement onto the span of matching labels.

    ``projector`` is a label predicate or an iterable of predicates (their
    union).  Returns the outcome probability and the renormalised post-state;
    a zero-probability outcome yields an empty state with deficit 1.
    """
    pred = _as_predicate(projector)
    kept = {k: a for k, a in state.amplitudes.items() if pred(k)}
    prob = float(sum(abs(a) ** 2 for a in kept.values()))
    if prob == 0.0:
        return 0.0, state.with_amplitudes({}, norm_deficit=1.0)
    s = 1 / math.sqrt(prob)
    return prob, state.with_amplitudes({k: a * s for k, a in kept.items()}, norm_deficit=0.0)


def occupied(mode: str, pol: str | None = None, n: int = 1) -> Predicate:
    return lambda lab: lab.occupation(mode, pol) == n


def at_level(arm: str, *levels: str) -> Predicate:
    return lambda lab: level_kind(lab.level(arm)) in levels


def all_of(*preds: Predicate) -> Predicate:
    return lambda lab: all(p(lab) for p in preds)


def drop_modes(state: JointKet, modes: Iterable[str]) -> JointKet:
    """Remove measured modes whose occupation is identical in every label."""
    modes = set(modes)
    seen = None
    amps = {}
    for label, a in state.amplitudes.items():
        part = tuple(t for t in label.photons if t[0] in modes)
        if seen is None:
            seen = part
        elif part != seen:
            raise ValueError("drop_modes: occupation differs between labels (would need a partial trace)")
        amps[BasisLabel(tuple(t for t in label.photons if t[0] not in modes), label.arms)] = a
    return state.with_amplitudes(amps, modes={k: v for k, v in state.modes.items() if k not in modes})


def phase_where(state: JointKet, phase_of: Callable[[BasisLabel], complex]) -> JointKet:
    return state.with_amplitudes({k: a * phase_of(k) for k, a in state.amplitudes.items()})


# ---------------------------------------------------------------------------
# density operators


@dataclass(frozen=True, eq=False)
class DensityOp:
    basis: tuple[BasisLabel, ...]
    matrix: np.ndarray
    modes: Mapping[str, str] = field(default_factory=dict)
    arms: tuple[str, ...] = ()

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        basis = tuple(self.basis)
        if mat.shape != (len(basis), len(basis)):
            raise ValueError("matrix does not match basis")
        if len(set(basis)) != len(basis):
            raise ValueError("duplicate basis labels")
        if not np.allclose(mat, mat.conj().T, atol=NORM_TOL, rtol=0):
            raise ValueError("density operator is not Hermitian")
        if abs(np.trace(mat).real - 1) > NORM_TOL:
            raise ValueError(f"trace {np.trace(mat).real!r} != 1")
        if mat.size and np.linalg.eigvalsh(mat).min() < -1e-10:
            raise ValueError("density operator is not positive semidefinite")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "modes", MappingProxyType(dict(sorted(dict(self.modes).items()))))
        object.__setattr__(self, "arms", tuple(sorted(self.arms)))

    @classmethod
    def maximally_mixed(cls, labels: Sequence[BasisLabel], modes, arms=()) -> "DensityOp":
        labels = sorted(labels)
        return cls(tuple(labels), np.eye(len(labels)) / len(labels), modes, arms)

    def probabilities(self) -> dict[BasisLabel, float]:
        return {k: float(self.matrix[i, i].real) for i, k in enumerate(self.basis)}

    def expectation(self, observable: np.ndarray) -> float:
        return float(np.trace(self.matrix @ observable).real)

    def apply_map(self, m: LinearMap) -> "DensityOp":
        if m.kind != "unitary":
            raise ValueError("DensityOp.apply_map supports unitary maps only")
        columns = []
        for label in self.basis:
            columns.append(apply_map(JointKet({label: 1.0}, self.modes, self.arms), m))
        new_basis = sorted({k for c in columns for k in c.amplitudes})
        index = {k: i for i, k in enumerate(new_basis)}
        big = np.zeros((len(new_basis), len(self.basis)), dtype=complex)
        for j, c in enumerate(columns):
            for k, a in c.amplitudes.items():
                big[index[k], j] = a
        rho = big @ self.matrix @ big.conj().T
        return DensityOp(tuple(new_basis), rho, columns[0].modes if columns else self.modes, self.arms)


def to_density(state: JointKet) -> DensityOp:
    """Density operator of the (renormalised) ket."""
    st = state.normalized()
    basis = tuple(st.amplitudes)
    v = np.array([st.amplitudes[k] for k in basis])
    return DensityOp(basis, np.outer(v, v.conj()), st.modes, st.arms)


def mix(ops: Sequence[tuple[float, DensityOp]]) -> DensityOp:
    """Convex combination of density operators on a common mode/arm universe."""
    if not ops:
        raise ValueError("mix: nothing to mix")
    weights = [float(w) for w, _ in ops]
    if min(weights) < 0:
        raise ValueError("mix: negative weight")
    if abs(sum(weights) - 1) > NORM_TOL:
        raise ValueError(f"mix: weights sum to {sum(weights)!r}")
    first = ops[0][1]
    for _, op in ops[1:]:
        if dict(op.modes) != dict(first.modes) or op.arms != first.arms:
            raise ValueError("mix: operators live on different modes/arms")
    basis = sorted({k for _, op in ops for k in op.basis})
    index = {k: i for i, k in enumerate(basis)}
    rho = np.zeros((len(basis), len(basis)), dtype=complex)
    for w, op in ops:
        idx = [index[k] for k in op.basis]
        rho[np.ix_(idx, idx)] += w * op.matrix
    return DensityOp(tuple(basis), rho, first.modes, first.arms)


def ensemble_density(ensemble: Sequence[tuple[float, JointKet]]) -> DensityOp:
    return mix([(w, to_density(k)) for w, k in ensemble])
