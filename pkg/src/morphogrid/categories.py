"""The four road-network pattern categories and their probability vector."""
from __future__ import annotations

from enum import IntEnum

import numpy as np


class RoadCategory(IntEnum):
    """Fixed index order 0..3; serialized as lowercase names."""
    GRIDIRON = 0
    ORGANIC = 1
    RADIAL = 2
    NO_PATTERN = 3

    def __str__(self):
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str) -> "RoadCategory":
        return cls[name.strip().upper()]


PROB_COLUMNS = ("p_gridiron", "p_organic", "p_radial", "p_nopattern")


def as_probs(values) -> np.ndarray:
    """Validate a 4-vector of category probabilities."""
    p = np.asarray(values, dtype=float)
    if p.shape != (4,):
        raise ValueError("probability vector must have exactly 4 entries")
    if np.any(p < -1e-12) or np.any(p > 1.0 + 1e-12):
        raise ValueError("probabilities must lie in [0, 1]")
    if abs(float(p.sum()) - 1.0) > 1e-6:
        raise ValueError("probabilities must sum to 1 within 1e-6")
    return p


def assign_category(probs) -> RoadCategory:
    """Argmax category; ties resolve to the lowest index (gridiron first)."""
    p = np.asarray(probs, dtype=float)
    if p.shape != (4,):
        raise ValueError("probability vector must have exactly 4 entries")
    return RoadCategory(int(np.argmax(p)))
