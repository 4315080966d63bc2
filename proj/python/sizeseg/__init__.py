"""Weakly supervised segmentation with approximate size targets."""

from ._sizeseg import *  # noqa: F401,F403
from ._sizeseg import ConfigError, DomainError, RuntimeFailure

__version__ = "0.1.0"


def rectangles_to_fraction(count, grid="5x4"):
    """Fraction of the image covered by `count` grid cells (fractions allowed)."""
    cells = {"5x4": 20, "3x3": 9}
    if grid not in cells:
        raise ValueError(f"unknown grid {grid!r}")
    if count < 0 or count > cells[grid]:
        raise ValueError("cell count out of range")
    return count / cells[grid]
