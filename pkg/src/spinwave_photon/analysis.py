"""Counts to statistics: correlation functions, CHSH, GHZ witness and Mermin."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

TSIRELSON = 2 * math.sqrt(2)
_RANGE_TOL = 1e-12


@dataclass(frozen=True)
class CorrelationEstimate:
    """E = (C++ + C-- - C+- - C-+) / total with a multinomial standard error.

    ``counts`` are (C++, C--, C+-, C-+); for the exact engine they are
    probabilities and ``stderr`` is zero.
    """

    value: float
    stderr: float
    counts: tuple[float, float, float, float]
    settings: tuple | None = None

    @property
    def total(self) -> float:
        return sum(self.counts)

    def to_dict(self) -> dict:
        return {"E": self.value, "stderr": self.stderr, "counts": list(self.counts),
                "settings": None if self.settings is None else [str(s) for s in self.settings]}


def _stderr(value: float, total: float) -> float:
    return math.sqrt(max(0.0, 1 - value * value) / total)


def correlation_E(counts: Sequence[float], settings: tuple | None = None, *, exact: bool = False) -> CorrelationEstimate:
    """Correlation function from (C++, C--, C+-, C-+) coincidence counts."""
    if len(counts) != 4:
        raise ValueError("counts must be (C++, C--, C+-, C-+)")
    if min(counts) < 0:
        raise ValueError("counts must be non-negative")
    pp, mm, pm, mp = (float(c) for c in counts)
    total = pp + mm + pm + mp
    if total <= 0:
        raise ValueError("no coincidences: correlation undefined")
    value = (pp + mm - pm - mp) / total
    value = max(-1.0, min(1.0, value))
    err = 0.0 if exact else _stderr(value, total)
    out_counts = tuple(c if exact else int(round(c)) for c in (pp, mm, pm, mp))
    return CorrelationEstimate(value, err, out_counts, settings)


def parity_correlation(counts: Mapping[tuple[int, ...], float], parties: Sequence[int], *,
                       settings: tuple | None = None, exact: bool = False) -> CorrelationEstimate:
    """Parity expectation of a subset of parties.

    ``counts`` maps a tuple of +-1 outcomes (one per party) to a count;
    ``parties`` selects the positions whose product is averaged.  The
    returned ``counts`` are (even, 0, odd, 0) so that the usual estimator
    applies unchanged.
    """
    even = odd = 0.0
    for signs, c in counts.items():
        if math.prod(signs[i] for i in parties) > 0:
            even += c
        else:
            odd += c
    return correlation_E((even, 0.0, odd, 0.0), settings, exact=exact)


def _value(x) -> tuple[float, float]:
    if isinstance(x, CorrelationEstimate):
        return x.value, x.stderr
    return float(x), 0.0


def _check_range(name: str, v: float) -> None:
    if not -1 - _RANGE_TOL <= v <= 1 + _RANGE_TOL:
        raise ValueError(f"expectation {name} = {v} outside [-1, 1]")


def _sigma(excess: float, stderr: float) -> float | None:
    return None if stderr == 0 else excess / stderr


@dataclass(frozen=True)
class BellResult:
    value: float
    stderr: float
    sigma_violation: float | None
    terms: tuple[float, float, float, float]
    bound: float = 2.0

    def to_dict(self) -> dict:
        return {"S": self.value, "stderr": self.stderr, "sigma_violation": self.sigma_violation,
                "terms": list(self.terms), "classical_bound": self.bound}


def _check_chsh_pattern(settings: Sequence[tuple]) -> None:
    (a1, b1), (a2, b2), (a3, b3), (a4, b4) = settings
    if not (a1 == a2 and a3 == a4 and b1 == b3 and b2 == b4 and a1 != a3 and b1 != b2):
        raise ValueError(
            "CHSH needs settings in the order (a,b), (a,b'), (a',b), (a',b') with a != a' and b != b'"
        )


def chsh(estimates: Sequence) -> BellResult:
    """S = |E(a,b) - E(a,b') + E(a',b) + E(a',b')|.

    Accepts four :class:`CorrelationEstimate` (whose settings, when present,
    must follow that order) or four plain numbers.
    """
    if len(estimates) != 4:
        raise ValueError("CHSH needs exactly four correlations")
    settings = [e.settings for e in estimates if isinstance(e, CorrelationEstimate) and e.settings is not None]
    if len(settings) == 4:
        _check_chsh_pattern(settings)
    vals = [_value(e) for e in estimates]
    for i, (v, _) in enumerate(vals):
        _check_range(f"E{i}", v)
    (e1, s1), (e2, s2), (e3, s3), (e4, s4) = vals
    value = abs(e1 - e2 + e3 + e4)
    err = math.sqrt(s1**2 + s2**2 + s3**2 + s4**2)
    return BellResult(value, err, _sigma(value - 2, err), (e1, e2, e3, e4))


WITNESS_TERMS = ("xxx", "zz23", "zz34", "zz24")
MERMIN_TERMS = ("yyx", "yxy", "xyy", "xxx")


@dataclass(frozen=True)
class WitnessResult:
    value: float
    stderr: float
    sigma_violation: float | None
    terms: Mapping[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"W": self.value, "stderr": self.stderr, "sigma_violation": self.sigma_violation,
                "terms": dict(self.terms)}


@dataclass(frozen=True)
class MerminResult:
    value: float
    stderr: float
    sigma_violation: float | None
    sigma_above_tsirelson: float | None
    terms: Mapping[str, float] = field(default_factory=dict)
    bound: float = 2.0

    def to_dict(self) -> dict:
        return {"S_Me": self.value, "stderr": self.stderr, "sigma_violation": self.sigma_violation,
                "sigma_above_2sqrt2": self.sigma_above_tsirelson, "terms": dict(self.terms),
                "classical_bound": self.bound}


def _terms(expectations: Mapping, names: Sequence[str]) -> dict[str, tuple[float, float]]:
    missing = [n for n in names if n not in expectations]
    if missing:
        raise ValueError(f"missing expectations {missing}")
    out = {n: _value(expectations[n]) for n in names}
    for n, (v, _) in out.items():
        _check_range(n, v)
    return out


def ghz_witness(expectations: Mapping) -> WitnessResult:
    """W = 3/2 - <XXX> - (<Z2Z3> + <Z3Z4> + <Z2Z4>) / 2; W < 0 certifies GHZ entanglement."""
    t = _terms(expectations, WITNESS_TERMS)
    value = 1.5 - t["xxx"][0] - 0.5 * (t["zz23"][0] + t["zz34"][0] + t["zz24"][0])
    err = math.sqrt(t["xxx"][1] ** 2 + 0.25 * (t["zz23"][1] ** 2 + t["zz34"][1] ** 2 + t["zz24"][1] ** 2))
    return WitnessResult(value, err, _sigma(-value, err), {k: v for k, (v, _) in t.items()})


def mermin(expectations: Mapping) -> MerminResult:
    """S_Me = |<YYX> + <YXY> + <XYY> - <XXX>|; local bound 2."""
    t = _terms(expectations, MERMIN_TERMS)
    value = abs(t["yyx"][0] + t["yxy"][0] + t["xyy"][0] - t["xxx"][0])
    err = math.sqrt(sum(s**2 for _, s in t.values()))
    return MerminResult(value, err, _sigma(value - 2, err), _sigma(value - TSIRELSON, err),
                        {k: v for k, (v, _) in t.items()})


def write_etable(path, rows: Sequence[Mapping], columns: Sequence[str], header: Sequence[str] = ()) -> None:
    """CSV of correlation rows; ``counts`` lists are ';'-joined."""
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([";".join(repr(c) for c in r[c_]) if isinstance(r[c_], (list, tuple)) else r[c_]
                        for c_ in columns])
