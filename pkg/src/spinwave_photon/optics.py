"""Waveplates, polarizing beam splitter and polarization analyzers as LinearMaps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hilbert import LinearMap

SQ2 = 1 / math.sqrt(2)
ANALYZER_KINDS = ("linear", "circular", "pauli-x", "pauli-y", "pauli-z")


def quarter_wave(mode: str, convention: str = "stokes") -> LinearMap:
    """Circular-to-linear relabeling used in front of the fibre couplers.

    ``stokes``: R -> H, L -> V.  ``anti_stokes``: R -> V, L -> H.
    """
    inputs = ((mode, "R"), (mode, "L"))
    outputs = ((mode, "H"), (mode, "V"))
    if convention == "stokes":
        mat = np.eye(2)
    elif convention == "anti_stokes":
        mat = np.array([[0, 1], [1, 0]])
    else:
        raise ValueError(f"unknown quarter-wave convention {convention!r}")
    return LinearMap(inputs, outputs, mat, "unitary", f"qwp[{mode},{convention}]")


def half_wave_45(mode: str) -> LinearMap:
    """45 degree rotation: H -> (H+V)/sqrt2, V -> (H-V)/sqrt2."""
    keys = ((mode, "H"), (mode, "V"))
    return LinearMap(keys, keys, SQ2 * np.array([[1, 1], [1, -1]]), "unitary", f"hwp45[{mode}]")


def pbs(in1: str, in2: str, out1: str, out2: str, reflection_phase: complex = 1.0) -> LinearMap:
    """Polarizing beam splitter transmitting H and reflecting V.

    H@in1 -> H@out1, V@in1 -> V@out2, H@in2 -> H@out2, V@in2 -> V@out1.
    """
    if len({in1, in2, out1, out2}) != 4:
        raise ValueError("pbs needs four distinct modes")
    if abs(abs(reflection_phase) - 1) > 1e-12:
        raise ValueError("reflection phase must have unit modulus")
    inputs = ((in1, "H"), (in1, "V"), (in2, "H"), (in2, "V"))
    outputs = ((out1, "H"), (out1, "V"), (out2, "H"), (out2, "V"))
    r = complex(reflection_phase)
    mat = np.zeros((4, 4), dtype=complex)
    mat[0, 0] = 1  # H in1 -> H out1
    mat[3, 1] = r  # V in1 -> V out2
    mat[2, 2] = 1  # H in2 -> H out2
    mat[1, 3] = r  # V in2 -> V out1
    return LinearMap(inputs, outputs, mat, "unitary", f"pbs[{in1},{in2}]")


@dataclass(frozen=True)
class AnalyzerSetting:
    """Polarization measurement on one mode; ``theta`` in degrees from H."""

    mode: str
    kind: str = "linear"
    theta: float = 0.0

    def __post_init__(self):
        if self.kind not in ANALYZER_KINDS:
            raise ValueError(f"unknown analyzer kind {self.kind!r}")
        if not 0 <= self.theta < 180:
            raise ValueError(f"analyzer angle {self.theta} outside [0, 180)")
        if self.kind != "linear" and self.theta != 0:
            raise ValueError(f"{self.kind} analyzer takes no angle")

    def label(self) -> str:
        return f"{self.theta:g}" if self.kind == "linear" else self.kind


def analyzer_projectors(setting: AnalyzerSetting) -> tuple[np.ndarray, np.ndarray]:
    """Jones vectors (in the H, V basis) of the +1 and -1 outcomes."""
    kind = setting.kind
    if kind == "linear":
        t = math.radians(setting.theta)
        plus = np.array([math.cos(t), math.sin(t)], dtype=complex)
        minus = np.array([-math.sin(t), math.cos(t)], dtype=complex)
    elif kind == "pauli-x":
        plus, minus = SQ2 * np.array([1, 1], dtype=complex), SQ2 * np.array([1, -1], dtype=complex)
    elif kind in ("pauli-y", "circular"):
        plus, minus = SQ2 * np.array([1, 1j]), SQ2 * np.array([1, -1j])
    else:
        plus, minus = np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
    return plus, minus


def analyzer_map(setting: AnalyzerSetting) -> LinearMap:
    """Unitary taking the +1 (-1) analyzer state of the mode to H (V).

    Detectors placed on H and V after this map realise the measurement.
    """
    plus, minus = analyzer_projectors(setting)
    keys = ((setting.mode, "H"), (setting.mode, "V"))
    return LinearMap(keys, keys, np.array([plus.conj(), minus.conj()]), "unitary",
                     f"analyzer[{setting.mode},{setting.label()}]")
