"""Biexciton cascade in a chiral waveguide: model, simulation and analysis."""

from ._core import *  # noqa: F401,F403
from ._core import PortPair, EmitterParams, InstrumentParams, Histogram  # noqa: F401

__version__ = "0.1.0"
