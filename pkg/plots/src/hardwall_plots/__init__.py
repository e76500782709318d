"""Offline figure generation from hardwall CSV sweeps.

Reads only the documented CSV schema (no access to the simulator's
internals) and renders the four standard views: pinned density vs box
side, pinned density vs pinning strength, mean height vs log box side,
and the tail of the pinned-site count. Rendering is deterministic: the
same CSV yields byte-identical image files.
"""

__version__ = "0.1.0"

from .figures import EXPECTED_COLUMNS, KINDS, PlotError, PlotRequest, render
