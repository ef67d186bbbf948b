"""Simulator of two spin-wave/photon entangled states generated in one atomic ensemble."""

from __future__ import annotations

__version__ = "0.1.0"
