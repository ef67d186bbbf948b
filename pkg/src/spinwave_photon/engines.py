"""Exact click statistics and the Monte Carlo trial sampler.

The exact engine turns a state into an :class:`OutcomeDistribution` over
click sets of threshold detectors, folding detector efficiency and dark
clicks in analytically.  The sampler draws i.i.d. trials from such a
distribution with a counter-based generator: the uniform of trial ``k`` is a
pure function of ``(seed, stream, k)``, so chunking the trial range across
workers cannot change the result.
"""

from __future__ import annotations

import csv
import itertools
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .hilbert import POLARIZATION_BASES, DensityOp, JointKet

StateLike = JointKet | DensityOp | Sequence[tuple[float, JointKet]]


@dataclass(frozen=True)
class DetectorSpec:
    """Threshold detector on one (mode, polarization) of the state."""

    id: str
    mode: str
    pol: str
    efficiency: float = 1.0
    number_resolving: bool = False
    dark_prob: float = 0.0

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise ValueError(f"{self.id}: efficiency {self.efficiency} outside [0, 1]")
        if not 0 <= self.dark_prob < 1:
            raise ValueError(f"{self.id}: dark_prob {self.dark_prob} outside [0, 1)")
        if ";" in self.id or "," in self.id:
            raise ValueError(f"detector id {self.id!r} may not contain ';' or ','")

    def click_probability(self, n: int) -> float:
        return 1 - (1 - self.dark_prob) * (1 - self.efficiency) ** n


@dataclass(frozen=True)
class TrialOutcome:
    trial_index: int
    clicks: frozenset[str]
    timestamp_ns: int


def _click_key(s: frozenset[str]) -> tuple:
    return (len(s), tuple(sorted(s)))


class OutcomeDistribution:
    """Probabilities of click sets; the missing weight ``deficit`` is loss."""

    def __init__(self, detectors: Sequence[str], probs: Mapping[frozenset, float],
                 deficit: float = 0.0, acceptance: float = 1.0):
        self.detectors = tuple(detectors)
        known = set(self.detectors)
        clean = {}
        for s, p in probs.items():
            s = frozenset(s)
            if not s <= known:
                raise ValueError(f"click set {sorted(s)} uses undeclared detectors")
            if p < -1e-15:
                raise ValueError("negative probability")
            if p > 0:
                clean[s] = clean.get(s, 0.0) + float(p)
        self.probs = dict(sorted(clean.items(), key=lambda kv: _click_key(kv[0])))
        self.deficit = float(deficit)
        self.acceptance = float(acceptance)

    @property
    def total(self) -> float:
        return sum(self.probs.values())

    def prob(self, clicks: Iterable[str]) -> float:
        return self.probs.get(frozenset(clicks), 0.0)

    def prob_superset(self, pattern: Iterable[str]) -> float:
        """Probability that every detector in ``pattern`` clicks."""
        pattern = frozenset(pattern)
        return sum(p for s, p in self.probs.items() if pattern <= s)

    def conditioned(self, accept: Callable[[frozenset], bool]) -> "OutcomeDistribution":
        """Distribution restricted to accepted click sets and renormalised."""
        kept = {s: p for s, p in self.probs.items() if accept(s)}
        total = sum(kept.values())
        if total == 0:
            return OutcomeDistribution(self.detectors, {}, 0.0, 0.0)
        return OutcomeDistribution(self.detectors, {s: p / total for s, p in kept.items()}, 0.0, total)

    def mask_of(self, clicks: Iterable[str]) -> int:
        index = {d: i for i, d in enumerate(self.detectors)}
        m = 0
        for d in clicks:
            m |= 1 << index[d]
        return m

    def clicks_of(self, mask: int) -> frozenset[str]:
        return frozenset(d for i, d in enumerate(self.detectors) if mask >> i & 1)

    def categories(self) -> tuple[np.ndarray, np.ndarray]:
        """Click masks and cumulative probabilities in canonical order."""
        if len(self.detectors) > 64:
            raise ValueError("at most 64 detectors per distribution")
        items = list(self.probs.items())
        masks = np.array([self.mask_of(s) for s, _ in items], dtype=np.uint64)
        p = np.array([v for _, v in items], dtype=np.float64)
        cdf = np.cumsum(p) / p.sum()
        cdf[-1] = 1.0
        return masks, np.ascontiguousarray(cdf)

    def tvd(self, other: Mapping[frozenset, float]) -> float:
        keys = sorted(set(self.probs) | set(other), key=_click_key)  # fixed order: summation is bit-reproducible
        return 0.5 * sum(abs(self.probs.get(k, 0.0) - other.get(k, 0.0)) for k in keys)

    def __repr__(self) -> str:
        body = ", ".join(f"{{{','.join(sorted(s))}}}: {p:.4g}" for s, p in list(self.probs.items())[:8])
        return f"OutcomeDistribution({body}{', ...' if len(self.probs) > 8 else ''})"


def _check_detectors(detectors: Sequence[DetectorSpec], modes: Mapping[str, str]) -> None:
    ids = [d.id for d in detectors]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate detector ids")
    watched: dict[str, set[str]] = defaultdict(set)
    for d in detectors:
        if (d.pol in watched[d.mode]):
            raise ValueError(f"detectors overlap on {d.mode}:{d.pol}")
        watched[d.mode].add(d.pol)
    for mode, pols in watched.items():
        if mode not in modes:
            raise ValueError(f"state has no mode {mode}")
        if pols != set(POLARIZATION_BASES[modes[mode]]):
            raise ValueError(f"detectors on {mode} do not cover its {modes[mode]} basis")


def _weighted_labels(state: StateLike):
    if isinstance(state, JointKet):
        return state.modes, [(k, abs(a) ** 2) for k, a in state.amplitudes.items()], state.norm_deficit
    if isinstance(state, DensityOp):
        return state.modes, list(state.probabilities().items()), 0.0
    items, deficit, modes = [], 0.0, None
    for w, ket in state:
        if modes is None:
            modes = ket.modes
        items.extend((k, w * abs(a) ** 2) for k, a in ket.amplitudes.items())
        deficit += w * ket.norm_deficit
    return modes or {}, items, deficit


def photon_patterns(state: StateLike, detectors: Sequence[DetectorSpec]) -> tuple[dict[tuple[int, ...], float], float]:
    """Probability of each photon-number pattern on the detectors."""
    modes, items, deficit = _weighted_labels(state)
    _check_detectors(detectors, modes)
    keys = [(d.mode, d.pol) for d in detectors]
    patterns: dict[tuple[int, ...], float] = defaultdict(float)
    for label, w in items:
        occ = label.photon_map()
        patterns[tuple(occ.get(k, 0) for k in keys)] += w
    return dict(patterns), deficit


def outcome_distribution(state: StateLike, detectors: Sequence[DetectorSpec]) -> OutcomeDistribution:
    """Exact click-set distribution of threshold detectors on ``state``.

    ``state`` may be a ket, a density operator or a convex mixture of kets
    given as ``[(weight, ket), ...]``.
    """
    patterns, deficit = photon_patterns(state, detectors)
    ids = [d.id for d in detectors]
    probs: dict[frozenset, float] = defaultdict(float)
    for pattern, w in patterns.items():
        sure, unsure = [], []
        for d, n in zip(detectors, pattern):
            q = d.click_probability(n)
            if q >= 1.0:
                sure.append((d.id, 1.0))
            elif q > 0:
                unsure.append((d.id, q))
        for bits in itertools.product((0, 1), repeat=len(unsure)):
            p = w
            clicks = [i for i, _ in sure]
            for b, (i, q) in zip(bits, unsure):
                if b:
                    p *= q
                    clicks.append(i)
                else:
                    p *= 1 - q
            probs[frozenset(clicks)] += p
    return OutcomeDistribution(ids, probs, deficit)


def number_resolved_distribution(state: StateLike, detectors: Sequence[DetectorSpec]) -> dict[tuple[int, ...], float]:
    """Detected photon counts per detector, binomially thinned by efficiency.

    Diagnostic counterpart of :func:`outcome_distribution` for
    number-resolving detectors; dark clicks are ignored.
    """
    from math import comb

    patterns, _ = photon_patterns(state, detectors)
    out: dict[tuple[int, ...], float] = defaultdict(float)
    for pattern, w in patterns.items():
        per = [[(k, comb(n, k) * d.efficiency**k * (1 - d.efficiency) ** (n - k)) for k in range(n + 1)]
               for d, n in zip(detectors, pattern)]
        for combo in itertools.product(*per):
            p = w
            for _, q in combo:
                p *= q
            out[tuple(k for k, _ in combo)] += p
    return dict(out)


# ---------------------------------------------------------------------------
# sampling


def _chunks(n: int, workers: int) -> list[tuple[int, int]]:
    workers = max(1, min(workers, n))
    step = -(-n // workers)
    return [(s, min(step, n - s)) for s in range(0, n, step)]


def sample_masks(dist: OutcomeDistribution, n: int, seed: int, *, stream: int = 0, workers: int = 1) -> np.ndarray:
    """Click masks (bit i = ``dist.detectors[i]``) of trials ``0..n-1``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not dist.probs:
        raise ValueError("cannot sample from an empty distribution")
    masks, cdf = dist.categories()
    key = kernels.stream_key(seed, stream)
    parts = _chunks(n, workers)
    if len(parts) == 1:
        idx = kernels.draw_categories(cdf, key, 0, n)
    else:
        with ThreadPoolExecutor(len(parts)) as pool:
            idx = np.concatenate(list(pool.map(lambda p: kernels.draw_categories(cdf, key, p[0], p[1]), parts)))
    return masks[idx]


def sample_trials(dist: OutcomeDistribution, n: int, seed: int, *, stream: int = 0, workers: int = 1,
                  clock: Callable[[int], int] | None = None) -> list[TrialOutcome]:
    """Draw ``n`` i.i.d. trials; ``clock`` maps a trial index to model time (ns)."""
    masks = sample_masks(dist, n, seed, stream=stream, workers=workers)
    clock = clock or (lambda k: k)
    lookup = {int(m): dist.clicks_of(int(m)) for m in np.unique(masks)}
    return [TrialOutcome(k, lookup[int(m)], int(clock(k))) for k, m in enumerate(masks)]


def coincidences(outcomes: Sequence[TrialOutcome], pattern: Iterable[str]) -> int:
    """Number of trials whose click set contains every detector in ``pattern``."""
    pattern = frozenset(pattern)
    if not pattern:
        raise ValueError("pattern must be non-empty")
    return sum(1 for o in outcomes if pattern <= o.clicks)


def count_coincidences(masks: np.ndarray, dist: OutcomeDistribution, pattern: Iterable[str]) -> int:
    """Kernel-backed :func:`coincidences` on sampled click masks."""
    pattern = frozenset(pattern)
    if not pattern:
        raise ValueError("pattern must be non-empty")
    return kernels.count_superset(masks, dist.mask_of(pattern))


def empirical(masks: np.ndarray, dist: OutcomeDistribution) -> dict[frozenset, float]:
    values, counts = np.unique(masks, return_counts=True)
    n = len(masks)
    return {dist.clicks_of(int(v)): c / n for v, c in zip(values, counts)}


def write_trial_log(path, outcomes: Iterable[TrialOutcome], header: Sequence[str] = ()) -> None:
    """CSV with columns trial_index, timestamp_ns, click_list (';'-joined)."""
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial_index", "timestamp_ns", "click_list"])
        for o in outcomes:
            w.writerow([o.trial_index, o.timestamp_ns, ";".join(sorted(o.clicks))])


def read_trial_log(path) -> list[TrialOutcome]:
    with open(path, newline="") as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        return [
            TrialOutcome(int(r["trial_index"]), frozenset(filter(None, r["click_list"].split(";"))),
                         int(r["timestamp_ns"]))
            for r in rows
        ]
