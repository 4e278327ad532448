"""Identification and estimation for missing-data graphical models with interference.

The package decides whether laws over counterfactuals and missingness
indicators are identified from the observed data law, emits the identifying
functionals, and checks the theory numerically with exact enumeration and a
simulation harness.
"""

from __future__ import annotations

__version__ = "0.1.0"
