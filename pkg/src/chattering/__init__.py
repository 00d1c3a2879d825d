"""Construction and verification of chattering bang-bang controls for the 1-D heat equation."""

from .sequence import SQUARES, Block, ChatterSequence, ExponentSpec
from .series_builder import BuildError, run

__all__ = ["SQUARES", "Block", "ChatterSequence", "ExponentSpec", "BuildError", "run"]
__version__ = "0.1.0"
